"""Equality-constraint machinery for products of unit spheres.

The feasible set is W = {w : c_i(w) = 0, i in [m]} with one constraint per
block, c_i(w) = ||w_i||^2 - 1.  This module provides projection onto W,
least-squares Lagrange multipliers, the tangent component of the gradient,
the Lagrangian Hessian, orthonormal tangent frames, and the minimum
singular value of the constraint-gradient matrix (the robustness measure
for constraint qualification).
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SphereProduct",
    "TangentFrame",
    "SaddleParams",
    "project",
    "lagrange_multipliers",
    "tangent_gradient",
    "chi",
    "lagrangian_hessian",
    "tangent_frame",
    "min_tangent_eig",
    "rlicq_sigma_min",
]

FEASIBLE_TOL = 1e-10
DEGENERATE_BLOCK_NORM = 1e-12


class SphereProduct:
    """Product of m unit spheres, embedded blockwise in R^n.

    Parameters
    ----------
    block_dims : sequence of int
        Dimension of each block; n = sum(block_dims).
    """

    __slots__ = ("block_dims", "offsets", "m", "n")

    def __init__(self, block_dims):
        dims = [int(b) for b in block_dims]
        if not dims or any(b < 1 for b in dims):
            raise ValueError(f"invalid block dimensions {block_dims}")
        self.block_dims = tuple(dims)
        self.offsets = tuple(int(x) for x in np.cumsum([0] + dims))
        self.m = len(dims)
        self.n = self.offsets[-1]

    @classmethod
    def spheres(cls, m, block_dim):
        """m unit spheres of equal dimension block_dim."""
        return cls([block_dim] * m)

    def blocks(self):
        """Iterate (start, stop) index pairs of the blocks."""
        for i in range(self.m):
            yield self.offsets[i], self.offsets[i + 1]

    def block_norms(self, w):
        w = np.asarray(w, dtype=float)
        return np.array([np.linalg.norm(w[a:b]) for a, b in self.blocks()])

    def c(self, w):
        """Constraint values c_i(w) = ||w_i||^2 - 1."""
        return self.block_norms(w) ** 2 - 1.0

    def feasible(self, w, tol=FEASIBLE_TOL):
        return bool(np.max(np.abs(self.c(w))) <= tol)

    def constraint_gradients(self, w):
        """The n x m matrix C(w) whose i-th column is grad c_i(w) = 2 w_i."""
        w = np.asarray(w, dtype=float)
        C = np.zeros((self.n, self.m))
        for i, (a, b) in enumerate(self.blocks()):
            C[a:b, i] = 2.0 * w[a:b]
        return C

    def constraint_hessian(self, i):
        """Dense Hessian of c_i: 2I on block i, zero elsewhere."""
        H = np.zeros((self.n, self.n))
        a, b = self.offsets[i], self.offsets[i + 1]
        H[a:b, a:b] = 2.0 * np.eye(b - a)
        return H

    def weighted_constraint_hessian(self, lam):
        """sum_i lam_i * hess c_i, a diagonal matrix with 2*lam_i per block."""
        diag = np.zeros(self.n)
        for i, (a, b) in enumerate(self.blocks()):
            diag[a:b] = 2.0 * lam[i]
        return np.diag(diag)

    def project(self, v):
        """Closest feasible point: each block rescaled to unit norm.

        Raises
        ------
        ValueError
            If any block norm is below 1e-12; the projection is not
            unique there and the caller must treat it as a failure.
        """
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        for a, b in self.blocks():
            nrm = np.linalg.norm(v[a:b])
            if nrm < DEGENERATE_BLOCK_NORM:
                raise ValueError(f"degenerate projection: block [{a}:{b}] has norm {nrm:.3e}")
            out[a:b] = v[a:b] / nrm
        return out

    def random_point(self, rng):
        """Uniform draw from the product of spheres (normalized Gaussians)."""
        w = rng.standard_normal(self.n)
        return self.project(w)

    def tangent_project(self, w, v):
        """P_T(w) v at a feasible w: drop each block's radial component."""
        w = np.asarray(w, dtype=float)
        out = np.array(v, dtype=float)
        for a, b in self.blocks():
            out[a:b] -= (out[a:b] @ w[a:b]) * w[a:b]
        return out

    def normal_project(self, w, v):
        """P_T(w)^c v at a feasible w (complement of tangent_project)."""
        return np.asarray(v, dtype=float) - self.tangent_project(w, v)

    def tangent_dim(self):
        return self.n - self.m

    def __repr__(self):
        return f"SphereProduct(blocks={self.block_dims})"


class TangentFrame:
    """Orthonormal frame of the tangent space at a feasible point.

    Attributes
    ----------
    w : ndarray
        Base point.
    tangent_basis : ndarray, shape (n, n-m)
        Orthonormal columns spanning T(w) = {v : grad c_i(w).v = 0}.
    normal_basis : ndarray, shape (n, m)
        Orthonormal columns spanning the complement span{grad c_i(w)}.
    """

    __slots__ = ("w", "tangent_basis", "normal_basis")

    def __init__(self, w, tangent_basis, normal_basis):
        self.w = w
        self.tangent_basis = tangent_basis
        self.normal_basis = normal_basis

    @property
    def p_tangent(self):
        b = self.tangent_basis
        return b @ b.T

    @property
    def p_normal(self):
        b = self.normal_basis
        return b @ b.T

    def project_tangent(self, v):
        b = self.tangent_basis
        return b @ (b.T @ v)

    def project_normal(self, v):
        b = self.normal_basis
        return b @ (b.T @ v)


def project(constraints, v):
    """Module-level alias for :meth:`SphereProduct.project`."""
    return constraints.project(v)


def tangent_frame(constraints, w):
    """Orthonormal completion of the constraint gradients at w.

    Runs a full QR factorization of C(w); the first m columns of Q span
    the normal space, the rest span the tangent space.  Deterministic
    given the input.

    Raises
    ------
    ValueError
        If C(w) is numerically rank deficient.
    """
    w = np.asarray(w, dtype=float)
    C = constraints.constraint_gradients(w)
    q, r = np.linalg.qr(C, mode="complete")
    diag = np.abs(np.diag(r[: constraints.m, : constraints.m]))
    if np.min(diag) < 1e-10:
        raise ValueError("constraint gradients are rank deficient at this point")
    return TangentFrame(w, q[:, constraints.m :], q[:, : constraints.m])


def rlicq_sigma_min(constraints, w):
    """Smallest singular value of C(w); equals 2 on feasible sphere products."""
    C = constraints.constraint_gradients(w)
    return float(np.linalg.svd(C, compute_uv=False)[-1])


def lagrange_multipliers(problem, w):
    """Least-squares multipliers lambda* = argmin ||grad f(w) - C(w) lambda||.

    Solved through the pseudo-inverse (lstsq on C); requires C(w) to have
    full column rank.
    """
    C = problem.constraints.constraint_gradients(w)
    g = problem.gradient(w)
    sing = np.linalg.svd(C, compute_uv=False)
    if sing[-1] < 1e-8:
        raise ValueError(f"constraint qualification failure: sigma_min(C) = {sing[-1]:.3e}")
    lam, *_ = np.linalg.lstsq(C, g, rcond=None)
    return lam


def tangent_gradient(problem, w):
    """Gradient of the Lagrangian at the least-squares multipliers.

    chi(w) = grad f(w) - sum_i lambda*_i grad c_i(w).  For sphere products
    this equals the tangent-space projection of grad f(w).
    """
    C = problem.constraints.constraint_gradients(w)
    g = problem.gradient(w)
    lam = lagrange_multipliers(problem, w)
    return g - C @ lam


# The short historical name for the tangent gradient.
chi = tangent_gradient


def lagrangian_hessian(problem, w):
    """M(w) = hess f(w) - sum_i lambda*_i hess c_i(w), symmetric."""
    lam = lagrange_multipliers(problem, w)
    H = problem.hessian(w) - problem.constraints.weighted_constraint_hessian(lam)
    return 0.5 * (H + H.T)


def min_tangent_eig(problem, w, frame=None):
    """Smallest eigenvalue of the Lagrangian Hessian on the tangent space.

    Reduces M(w) to the (n-m) x (n-m) matrix B^T M B in an orthonormal
    tangent frame B and solves it densely.

    Returns
    -------
    (eigenvalue, direction)
        The eigenvalue and a unit witness direction in T(w).
    """
    if frame is None:
        frame = tangent_frame(problem.constraints, w)
    B = frame.tangent_basis
    M = lagrangian_hessian(problem, w)
    reduced = B.T @ M @ B
    vals, vecs = np.linalg.eigh(reduced)
    direction = B @ vecs[:, 0]
    return float(vals[0]), direction / np.linalg.norm(direction)


@dataclass(frozen=True)
class SaddleParams:
    """Quantitative strict-saddle thresholds.

    alpha: strong-convexity floor near local minima; gamma: required
    negative-curvature magnitude; epsilon: large-gradient threshold;
    delta: matching radius to a catalogued minimum.
    """

    alpha: float
    gamma: float
    epsilon: float
    delta: float

    def __post_init__(self):
        for name in ("alpha", "gamma", "epsilon", "delta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
