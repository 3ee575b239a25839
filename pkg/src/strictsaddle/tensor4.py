"""Dense symmetric 4th-order tensors and orthogonal decompositions.

A 4th-order tensor over R^d is stored as a dense (d, d, d, d) array.  The
tensors of interest here have an orthogonal decomposition

    T = sum_i a_i (x) a_i (x) a_i (x) a_i,

with orthonormal a_1..a_d, and are fully symmetric under all 24 index
permutations.  Multilinear forms T(u,v,w,z), T(I,u,u,u) and T(I,I,u,u) are
provided both as dense contractions (the oracle path) and as O(d^2)
closed forms that use the known decomposition basis.
"""

import numpy as np

__all__ = [
    "Tensor4",
    "OrthoBasis",
    "ComponentMatrix",
    "make_orthogonal_tensor",
    "form_scalar",
    "form_vector",
    "form_matrix",
    "form_pair_vector",
    "form_pair_matrix",
    "basis_form_scalar",
    "basis_form_vector",
    "basis_form_matrix",
    "reconstruction_error",
    "reconstruction_error_from_basis",
    "save_tensor",
    "load_tensor",
]

ORTHO_TOL = 1e-10
FEASIBLE_ROW_TOL = 1e-10


class Tensor4:
    """Dense 4th-order tensor on R^d.

    Parameters
    ----------
    entries : array_like
        Either a (d, d, d, d) array or a flat array of d**4 reals in
        row-major order.

    Attributes
    ----------
    entries : ndarray
        The dense (d, d, d, d) entry array.  Treated as immutable.
    d : int
        Ambient dimension.
    """

    __slots__ = ("entries", "d")

    def __init__(self, entries):
        arr = np.asarray(entries, dtype=float)
        if arr.ndim == 1:
            d = round(arr.size ** 0.25)
            if d**4 != arr.size:
                raise ValueError(f"flat entry count {arr.size} is not a 4th power")
            arr = arr.reshape(d, d, d, d)
        if arr.ndim != 4 or len(set(arr.shape)) != 1:
            raise ValueError(f"expected a (d,d,d,d) array, got shape {arr.shape}")
        self.entries = arr
        self.d = arr.shape[0]

    def norm(self):
        """Frobenius norm sqrt(sum of squared entries)."""
        return float(np.linalg.norm(self.entries.ravel()))

    def is_symmetric(self, tol=1e-12):
        """True when entries are invariant under all 24 index permutations."""
        base = self.entries
        from itertools import permutations

        for perm in permutations(range(4)):
            if np.max(np.abs(np.transpose(base, perm) - base)) > tol:
                return False
        return True

    def __repr__(self):
        return f"Tensor4(d={self.d})"


class OrthoBasis:
    """Orthonormal component vectors a_1..a_d, stored as rows.

    Parameters
    ----------
    vectors : array_like
        (d, d) array whose i-th row is a_i.
    tol : float
        Orthonormality tolerance on input validation.

    Raises
    ------
    ValueError
        If the rows are not orthonormal to within ``tol``.
    """

    __slots__ = ("vectors", "d")

    def __init__(self, vectors, tol=ORTHO_TOL):
        arr = np.asarray(vectors, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square (d,d) array, got shape {arr.shape}")
        gram = arr @ arr.T
        err = np.max(np.abs(gram - np.eye(arr.shape[0])))
        if err > tol:
            raise ValueError(f"rows are not orthonormal: max Gram deviation {err:.3e} > {tol:.1e}")
        self.vectors = arr
        self.d = arr.shape[0]

    @classmethod
    def random(cls, d, rng):
        """Haar-ish random orthonormal basis via QR of a Gaussian matrix."""
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        # fix the sign convention so the draw is deterministic given the rng
        q = q * np.sign(np.diag(r))
        return cls(q.T)

    @classmethod
    def standard(cls, d):
        return cls(np.eye(d))

    def __repr__(self):
        return f"OrthoBasis(d={self.d})"


class ComponentMatrix:
    """Candidate components u^(1)..u^(d), stored as rows.

    The same object is also viewed as the flat vector U in R^{d^2} with
    U[i*d + k] = u^(i)_k; that flat view is what the constrained
    optimizer works on.
    """

    __slots__ = ("rows", "d")

    def __init__(self, rows):
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square (d,d) array, got shape {arr.shape}")
        self.rows = arr
        self.d = arr.shape[0]

    @classmethod
    def from_flat(cls, w):
        w = np.asarray(w, dtype=float)
        d = round(w.size**0.5)
        if d * d != w.size:
            raise ValueError(f"flat length {w.size} is not a perfect square")
        return cls(w.reshape(d, d))

    @property
    def flat(self):
        return self.rows.reshape(-1)

    def row_norm_error(self):
        """Largest deviation of a row norm from 1."""
        return float(np.max(np.abs(np.linalg.norm(self.rows, axis=1) - 1.0)))

    def is_feasible(self, tol=FEASIBLE_ROW_TOL):
        return self.row_norm_error() <= tol

    def __repr__(self):
        return f"ComponentMatrix(d={self.d})"


def make_orthogonal_tensor(basis):
    """Build T = sum_i a_i^{(x)4} from an orthonormal basis.

    Parameters
    ----------
    basis : OrthoBasis

    Returns
    -------
    Tensor4
        Fully symmetric by construction.
    """
    a = basis.vectors
    entries = np.einsum("ip,iq,ir,is->pqrs", a, a, a, a, optimize=True)
    return Tensor4(entries)


def _as_tensor_entries(T):
    return T.entries if isinstance(T, Tensor4) else np.asarray(T, dtype=float)


def form_scalar(T, u, v, w, z):
    """Full contraction T(u, v, w, z) = sum T[p,q,r,s] u_p v_q w_r z_s."""
    t = _as_tensor_entries(T)
    for name, vec in (("u", u), ("v", v), ("w", w), ("z", z)):
        if np.shape(vec) != (t.shape[0],):
            raise ValueError(f"vector {name} has shape {np.shape(vec)}, expected ({t.shape[0]},)")
    return float(np.einsum("pqrs,p,q,r,s->", t, u, v, w, z, optimize=True))


def form_vector(T, u):
    """One free slot: the vector T(I, u, u, u)."""
    t = _as_tensor_entries(T)
    if np.shape(u) != (t.shape[0],):
        raise ValueError(f"vector has shape {np.shape(u)}, expected ({t.shape[0]},)")
    return np.einsum("pqrs,q,r,s->p", t, u, u, u, optimize=True)


def form_matrix(T, u):
    """Two free slots: the matrix T(I, I, u, u)."""
    t = _as_tensor_entries(T)
    if np.shape(u) != (t.shape[0],):
        raise ValueError(f"vector has shape {np.shape(u)}, expected ({t.shape[0]},)")
    return np.einsum("pqrs,r,s->pq", t, u, u, optimize=True)


def form_pair_vector(T, a, b):
    """Mixed contraction T(I, a, b, b); equals T(I,I,b,b) @ a for symmetric T."""
    t = _as_tensor_entries(T)
    return np.einsum("pqrs,q,r,s->p", t, a, b, b, optimize=True)


def form_pair_matrix(T, a, b):
    """Mixed contraction T(I, a, b, I); symmetric for fully symmetric T."""
    t = _as_tensor_entries(T)
    return np.einsum("pqrs,q,r->ps", t, a, b, optimize=True)


def basis_form_scalar(basis, u, v, w, z):
    """Decomposition-aware T(u,v,w,z) = sum_i (a_i.u)(a_i.v)(a_i.w)(a_i.z)."""
    a = basis.vectors
    return float(np.sum((a @ u) * (a @ v) * (a @ w) * (a @ z)))


def basis_form_vector(basis, u):
    """Decomposition-aware T(I,u,u,u) = sum_i (a_i.u)^3 a_i."""
    a = basis.vectors
    c = a @ u
    return a.T @ (c**3)


def basis_form_matrix(basis, u):
    """Decomposition-aware T(I,I,u,u) = sum_i (a_i.u)^2 a_i a_i^T."""
    a = basis.vectors
    c = a @ u
    return (a.T * c**2) @ a


def reconstruction_error(T, U):
    """Normalized reconstruction error of a candidate decomposition.

    epsilon = ||T - sum_i u_i^{(x)4}||_F^2 / ||T||_F^2

    Parameters
    ----------
    T : Tensor4
    U : ComponentMatrix or (d, d) array of candidate rows.

    Raises
    ------
    ValueError
        If T has zero norm (the metric is undefined).
    """
    t = _as_tensor_entries(T)
    rows = U.rows if isinstance(U, ComponentMatrix) else np.asarray(U, dtype=float)
    denom = float(np.sum(t * t))
    if denom == 0.0:
        raise ValueError("reconstruction error undefined for a zero tensor")
    approx = np.einsum("ip,iq,ir,is->pqrs", rows, rows, rows, rows, optimize=True)
    diff = t - approx
    return float(np.sum(diff * diff)) / denom


def reconstruction_error_from_basis(basis, U):
    """O(d^3) reconstruction error when the decomposition basis is known.

    Expands ||T - S||^2 = ||T||^2 - 2<T,S> + ||S||^2 with
    <T, u^{(x)4}> = sum_i (a_i.u)^4 and <u^{(x)4}, v^{(x)4}> = (u.v)^4,
    avoiding any dense d^4 work.
    """
    a = basis.vectors
    rows = U.rows if isinstance(U, ComponentMatrix) else np.asarray(U, dtype=float)
    d = a.shape[0]
    coeff = rows @ a.T  # coeff[i, j] = u_i . a_j
    cross = float(np.sum(coeff**4))
    gram = rows @ rows.T
    ss = float(np.sum(gram**4))
    return (d - 2.0 * cross + ss) / d


def save_tensor(path, T):
    """Write a tensor as text: header ``d=<n>``, then d^4 entries row-major."""
    t = _as_tensor_entries(T)
    d = t.shape[0]
    with open(path, "w") as fh:
        fh.write(f"d={d}\n")
        for x in t.ravel():
            fh.write(f"{float(x)!r}\n")


def load_tensor(path):
    """Read a tensor written by :func:`save_tensor`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("d="):
            raise ValueError(f"bad tensor header {header!r}")
        d = int(header[2:])
        values = np.array([float(line) for line in fh if line.strip()])
    if values.size != d**4:
        raise ValueError(f"expected {d**4} entries, found {values.size}")
    return Tensor4(values.reshape(d, d, d, d))
