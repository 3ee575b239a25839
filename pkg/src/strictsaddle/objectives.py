"""Objectives for orthogonal 4th-order tensor decomposition.

Three equality-constrained problems over products of unit spheres:

* ``maxeig``: minimize f(u) = -T(u,u,u,u) on one sphere; the minima are
  the components +-a_i.
* ``reconstruction``: minimize f(U) = ||T - sum_i u_i^{(x)4}||_F^2 with
  every row of U on the sphere.
* ``correlation``: minimize the cross-component correlations
  sum_{i != j} T(u_i,u_i,u_j,u_j), again with unit-norm rows.  The sum
  runs over ordered pairs; ``halved=True`` builds the view scaled by 1/2
  (the unordered-pair sum), which is the scaling whose closed-form
  multipliers and Lagrangian Hessian take the simplest form and which
  the per-sample gradient oracles in :mod:`strictsaddle.ica` estimate.

Each problem exposes analytic value/gradient/Hessian in ambient
coordinates through tensor contractions; the closed forms in the
decomposition basis are provided separately (``*_coords`` functions) and
cross-checked in tests.
"""

from dataclasses import dataclass

import numpy as np

from .manifold import SphereProduct
from .tensor4 import (
    ComponentMatrix,
    OrthoBasis,
    Tensor4,
    basis_form_matrix,
    basis_form_scalar,
    basis_form_vector,
    form_matrix,
    form_pair_matrix,
    form_scalar,
    form_vector,
    reconstruction_error,
    reconstruction_error_from_basis,
)

__all__ = [
    "ConstrainedProblem",
    "QuadraticObjective",
    "SampledObjective",
    "SmoothnessBudget",
    "maxeig_objective",
    "reconstruction_objective",
    "correlation_objective",
    "quadratic_objective",
    "maxeig_value_coords",
    "maxeig_multiplier_coords",
    "maxeig_tangent_gradient_coords",
    "maxeig_lagrangian_hessian_coords",
    "correlation_value_coords",
    "correlation_psi",
    "correlation_multipliers_coords",
    "correlation_tangent_gradient_coords",
    "correlation_lagrangian_hessian_coords",
]


class ConstrainedProblem:
    """Equality-constrained objective with analytic derivatives.

    Attributes
    ----------
    name : str
    constraints : SphereProduct
    dim : int
        Ambient dimension (constraints.n).
    """

    def __init__(self, name, constraints, value_fn, gradient_fn, hessian_fn, recon_metric=None):
        self.name = name
        self.constraints = constraints
        self._value = value_fn
        self._gradient = gradient_fn
        self._hessian = hessian_fn
        self._recon = recon_metric

    @property
    def dim(self):
        return self.constraints.n

    def value(self, w):
        return float(self._value(np.asarray(w, dtype=float)))

    def gradient(self, w):
        return self._gradient(np.asarray(w, dtype=float))

    def hessian(self, w):
        return self._hessian(np.asarray(w, dtype=float))

    def recon_error(self, w):
        """Normalized reconstruction error at w, or None when undefined."""
        if self._recon is None:
            return None
        return float(self._recon(np.asarray(w, dtype=float)))

    def random_feasible(self, rng):
        return self.constraints.random_point(rng)

    def __repr__(self):
        return f"ConstrainedProblem({self.name!r}, dim={self.dim})"


def _tensor_ops(T, basis):
    """Contraction callables, preferring the O(d^2) basis fast path."""
    if basis is not None:
        a = basis.vectors

        def t_scalar(u, v, w, z):
            return basis_form_scalar(basis, u, v, w, z)

        def t_vector(u):
            return basis_form_vector(basis, u)

        def t_matrix(u):
            return basis_form_matrix(basis, u)

        def t_pair_matrix(u, v):
            return (a.T * ((a @ u) * (a @ v))) @ a

        return t_scalar, t_vector, t_matrix, t_pair_matrix

    def t_scalar(u, v, w, z):
        return form_scalar(T, u, v, w, z)

    def t_vector(u):
        return form_vector(T, u)

    def t_matrix(u):
        return form_matrix(T, u)

    def t_pair_matrix(u, v):
        return form_pair_matrix(T, u, v)

    return t_scalar, t_vector, t_matrix, t_pair_matrix


def _validate_tensor(T):
    if not isinstance(T, Tensor4):
        T = Tensor4(T)
    if not T.is_symmetric(tol=1e-10):
        raise ValueError("objective requires a fully symmetric tensor")
    return T


def maxeig_objective(T, basis=None):
    """Single-component problem: minimize -T(u,u,u,u) on the unit sphere.

    gradient -4 T(I,u,u,u); Hessian -12 T(I,I,u,u).
    """
    T = _validate_tensor(T)
    t_scalar, t_vector, t_matrix, _ = _tensor_ops(T, basis)
    constraints = SphereProduct([T.d])

    def value(u):
        return -t_scalar(u, u, u, u)

    def gradient(u):
        return -4.0 * t_vector(u)

    def hessian(u):
        return -12.0 * t_matrix(u)

    return ConstrainedProblem("maxeig", constraints, value, gradient, hessian)


def reconstruction_objective(T, basis=None):
    """Full-decomposition problem: minimize ||T - sum_i u_i^{(x)4}||_F^2.

    Expanded as ||T||^2 - 2 sum_i T(u_i,u_i,u_i,u_i) + sum_{i,l} (u_i.u_l)^4,
    so no dense d^4 residual is ever formed.
    """
    T = _validate_tensor(T)
    t_scalar, t_vector, t_matrix, _ = _tensor_ops(T, basis)
    d = T.d
    constraints = SphereProduct.spheres(d, d)
    tnorm2 = T.norm() ** 2

    def value(w):
        U = w.reshape(d, d)
        cross = sum(t_scalar(U[i], U[i], U[i], U[i]) for i in range(d))
        gram = U @ U.T
        return tnorm2 - 2.0 * cross + float(np.sum(gram**4))

    def gradient(w):
        U = w.reshape(d, d)
        gram = U @ U.T
        out = np.empty_like(U)
        for i in range(d):
            out[i] = -8.0 * t_vector(U[i]) + 8.0 * (gram[i] ** 3) @ U
        return out.reshape(-1)

    def hessian(w):
        U = w.reshape(d, d)
        gram = U @ U.T
        H = np.zeros((d * d, d * d))
        for i in range(d):
            si = slice(i * d, (i + 1) * d)
            diag = -24.0 * t_matrix(U[i])
            for l in range(d):
                if l == i:
                    continue
                diag += 24.0 * gram[i, l] ** 2 * np.outer(U[l], U[l])
            diag += 48.0 * gram[i, i] ** 2 * np.outer(U[i], U[i])
            diag += 8.0 * gram[i, i] ** 3 * np.eye(d)
            H[si, si] = diag
            for j in range(i + 1, d):
                sj = slice(j * d, (j + 1) * d)
                block = 8.0 * (3.0 * gram[i, j] ** 2 * np.outer(U[j], U[i]) + gram[i, j] ** 3 * np.eye(d))
                H[si, sj] = block
                H[sj, si] = block.T
        return H

    if basis is not None:
        recon = lambda w: reconstruction_error_from_basis(basis, w.reshape(d, d))
    else:
        recon = lambda w: reconstruction_error(T, w.reshape(d, d))

    return ConstrainedProblem("reconstruction", constraints, value, gradient, hessian, recon_metric=recon)


def correlation_objective(T, basis=None, halved=False):
    """Cross-correlation problem: minimize sum_{i != j} T(u_i,u_i,u_j,u_j).

    The default value sums over ordered pairs.  ``halved=True`` scales the
    whole problem by 1/2 (the unordered-pair sum); all derivatives scale
    with it.  The halved view is the one whose least-squares multipliers
    equal sum_{j != i} h(u_j, u_i) exactly and whose gradient the ICA
    oracle estimates without bias.
    """
    T = _validate_tensor(T)
    _, _, t_matrix, t_pair_matrix = _tensor_ops(T, basis)
    d = T.d
    constraints = SphereProduct.spheres(d, d)
    scale = 0.5 if halved else 1.0

    def block_matrices(U):
        Ms = [t_matrix(U[i]) for i in range(d)]
        return Ms, sum(Ms)

    def value(w):
        U = w.reshape(d, d)
        Ms, M_tot = block_matrices(U)
        return scale * sum(U[i] @ (M_tot - Ms[i]) @ U[i] for i in range(d))

    def gradient(w):
        U = w.reshape(d, d)
        Ms, M_tot = block_matrices(U)
        out = np.empty_like(U)
        for i in range(d):
            out[i] = scale * 4.0 * (M_tot - Ms[i]) @ U[i]
        return out.reshape(-1)

    def hessian(w):
        U = w.reshape(d, d)
        Ms, M_tot = block_matrices(U)
        H = np.zeros((d * d, d * d))
        for i in range(d):
            si = slice(i * d, (i + 1) * d)
            H[si, si] = scale * 4.0 * (M_tot - Ms[i])
            for j in range(i + 1, d):
                sj = slice(j * d, (j + 1) * d)
                block = scale * 8.0 * t_pair_matrix(U[i], U[j])
                H[si, sj] = block
                H[sj, si] = block.T
        return H

    if basis is not None:
        recon = lambda w: reconstruction_error_from_basis(basis, w.reshape(d, d))
    else:
        recon = lambda w: reconstruction_error(T, w.reshape(d, d))

    name = "correlation-halved" if halved else "correlation"
    return ConstrainedProblem(name, constraints, value, gradient, hessian, recon_metric=recon)


class QuadraticObjective:
    """Quadratic model f(w) = f0 + g.(w-w0) + (1/2)(w-w0).H(w-w0).

    Serves as the local second-order surrogate in the coupling analysis.
    ``stochastic_gradient(w, sample)`` treats the sample as an additive
    gradient perturbation, so a recorded perturbation stream can be
    replayed exactly.
    """

    def __init__(self, w0, g, H, f0=0.0, oracle_bound=None):
        w0 = np.asarray(w0, dtype=float)
        g = np.asarray(g, dtype=float)
        H = np.asarray(H, dtype=float)
        if H.shape != (w0.size, w0.size):
            raise ValueError(f"H has shape {H.shape}, expected {(w0.size, w0.size)}")
        if np.max(np.abs(H - H.T)) > 1e-12:
            raise ValueError("H must be symmetric")
        self.w0 = w0
        self.g = g
        self.H = H
        self.f0 = float(f0)
        self.oracle_bound = oracle_bound

    @property
    def dim(self):
        return self.w0.size

    def value(self, w):
        delta = np.asarray(w, dtype=float) - self.w0
        return self.f0 + float(self.g @ delta) + 0.5 * float(delta @ self.H @ delta)

    def gradient(self, w):
        delta = np.asarray(w, dtype=float) - self.w0
        return self.g + self.H @ delta

    def hessian(self, w):
        return self.H

    def stochastic_gradient(self, w, sample):
        if sample is None:
            return self.gradient(w)
        return self.gradient(w) + np.asarray(sample, dtype=float)


def quadratic_objective(w0, g, H, f0=0.0, oracle_bound=None):
    """Factory form of :class:`QuadraticObjective`."""
    return QuadraticObjective(w0, g, H, f0=f0, oracle_bound=oracle_bound)


class SampledObjective:
    """A constrained problem paired with a per-sample gradient oracle.

    Satisfies the stochastic-objective contract: ``value``, ``gradient``,
    ``stochastic_gradient(w, sample)`` and an ``oracle_bound`` Q with
    ||SG(w) - grad f(w)|| <= Q.  Q is estimated at construction from
    ``probes`` draws at random feasible points, times a safety margin;
    it is conservative evidence, not a proof.
    """

    def __init__(self, problem, sampler, probes=1000, margin=1.5, seed=1234):
        self.problem = problem
        self.sampler = sampler
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(probes):
            w = problem.random_feasible(rng)
            g = problem.gradient(w)
            sg = sampler.gradient(w, sampler.draw(rng))
            worst = max(worst, float(np.linalg.norm(sg - g)))
        self.oracle_bound = margin * worst

    @property
    def dim(self):
        return self.problem.dim

    @property
    def constraints(self):
        return self.problem.constraints

    def value(self, w):
        return self.problem.value(w)

    def gradient(self, w):
        return self.problem.gradient(w)

    def hessian(self, w):
        return self.problem.hessian(w)

    def recon_error(self, w):
        return self.problem.recon_error(w)

    def stochastic_gradient(self, w, sample):
        return self.sampler.gradient(w, sample)


@dataclass(frozen=True)
class SmoothnessBudget:
    """Regularity constants: |f| <= B, beta-smooth gradient, rho-Lipschitz Hessian."""

    B: float
    beta: float
    rho: float

    def __post_init__(self):
        for name in ("B", "beta", "rho"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


# ---------------------------------------------------------------------------
# Closed forms in the decomposition basis.  All of them assume the point is
# feasible (unit-norm blocks); they are the cross-check targets for the
# generic machinery in strictsaddle.manifold.
# ---------------------------------------------------------------------------


def maxeig_value_coords(x):
    """f(x) = -sum_i x_i^4 for coordinates x on the unit sphere."""
    x = np.asarray(x, dtype=float)
    return -float(np.sum(x**4))


def maxeig_multiplier_coords(x):
    """Least-squares multiplier on the sphere: -2 sum_i x_i^4."""
    x = np.asarray(x, dtype=float)
    return -2.0 * float(np.sum(x**4))


def maxeig_tangent_gradient_coords(x):
    """Tangent gradient 4 x_i (sum_j x_j^4 - x_i^2), zero iff stationary."""
    x = np.asarray(x, dtype=float)
    s4 = float(np.sum(x**4))
    return 4.0 * x * (s4 - x**2)


def maxeig_lagrangian_hessian_coords(x):
    """Lagrangian Hessian -12 diag(x_i^2) + 4 (sum_j x_j^4) I."""
    x = np.asarray(x, dtype=float)
    s4 = float(np.sum(x**4))
    return -12.0 * np.diag(x**2) + 4.0 * s4 * np.eye(x.size)


def _pairwise_h(U):
    """H[j, i] = h(u_j, u_i) = sum_k U_jk^2 U_ik^2."""
    sq = U**2
    return sq @ sq.T


def correlation_value_coords(U, halved=False):
    """Coordinate value sum_{i != j} h(u_i, u_j), optionally halved."""
    U = np.asarray(U, dtype=float)
    h = _pairwise_h(U)
    total = float(np.sum(h) - np.trace(h))
    return 0.5 * total if halved else total


def correlation_multipliers_coords(U):
    """Multipliers of the halved problem: lambda_i = sum_{j != i} h(u_j, u_i)."""
    U = np.asarray(U, dtype=float)
    h = _pairwise_h(U)
    return h.sum(axis=0) - np.diag(h)


def correlation_psi(U):
    """psi_ik = sum_{j != i} (U_jk^2 - h(u_j, u_i)), the halved-problem stencil."""
    U = np.asarray(U, dtype=float)
    sq = U**2
    col = sq.sum(axis=0)
    lam = correlation_multipliers_coords(U)
    return (col[None, :] - sq) - lam[:, None]


def correlation_tangent_gradient_coords(U):
    """Tangent gradient of the halved problem: entries 2 U_ik psi_ik."""
    U = np.asarray(U, dtype=float)
    return (2.0 * U * correlation_psi(U)).reshape(-1)


def correlation_lagrangian_hessian_coords(U):
    """Lagrangian Hessian of the halved problem.

    Entry ((i,k), (i',k')): 2 psi_ik when (i,k)=(i',k'); 4 U_{i'k} U_{ik}
    when k=k' and i != i'; zero otherwise.
    """
    U = np.asarray(U, dtype=float)
    d = U.shape[0]
    psi = correlation_psi(U)
    M = np.zeros((d * d, d * d))
    for k in range(d):
        idx = np.arange(d) * d + k
        block = 4.0 * np.outer(U[:, k], U[:, k])
        np.fill_diagonal(block, 2.0 * psi[:, k])
        M[np.ix_(idx, idx)] = block
    return M
