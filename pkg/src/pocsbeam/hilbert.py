"""Real Hilbert space of tuples of complex Hermitian matrices.

A point of the space is an ``(M, N, N)`` complex array whose ``M`` slices
are Hermitian.  The inner product is the real part of the summed trace
pairing, which makes the space a real vector space even though entries
are complex; scalars multiplying points are always real.

Two decomposition APIs coexist here.  The single-matrix functions
(:func:`eig_hermitian`, :func:`svd_hermitian`) return a
:class:`SpectralDecomposition` and are the reference contract.  The
batched functions (:func:`eig_tuple`, :func:`svd_tuple`) decompose all
slices of a tuple at once and carry the solver hot path; both routes
share the same canonical ordering and phase conventions, so they agree
bitwise on identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative tolerance for accepting a matrix as Hermitian.
HERMITIAN_RTOL = 1e-10
# Relative reconstruction tolerance for spectral decompositions.
SPECTRAL_RTOL = 1e-8

__all__ = [
    "HERMITIAN_RTOL",
    "SPECTRAL_RTOL",
    "symmetrize",
    "hermitian",
    "check_hermitian",
    "inner",
    "norm",
    "axpy",
    "zeros",
    "SpectralDecomposition",
    "eig_tuple",
    "svd_tuple",
    "eig_hermitian",
    "svd_hermitian",
]


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Hermitian part ``(a + a^H) / 2``, slicewise on batched input."""
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def check_hermitian(a: np.ndarray) -> None:
    """Raise ``ValueError`` unless ``a`` is finite and Hermitian.

    Accepts a single matrix or a batch; the deviation ``max|a - a^H|``
    must not exceed ``HERMITIAN_RTOL`` relative to the largest entry.
    """
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    dev = np.abs(a - np.conj(np.swapaxes(a, -1, -2))).max() if a.size else 0.0
    scale = max(float(np.abs(a).max()) if a.size else 0.0, 1.0)
    if dev > HERMITIAN_RTOL * scale:
        raise ValueError(f"not Hermitian: deviation {dev:.3e} at scale {scale:.3e}")


def hermitian(a: np.ndarray) -> np.ndarray:
    """Validate and return the exactly-Hermitian version of ``a``.

    Downstream code assumes exact symmetry, so construction goes through
    this symmetrizing constructor; drift beyond ``HERMITIAN_RTOL`` is an
    error rather than silently averaged away.
    """
    a = np.asarray(a, dtype=complex)
    check_hermitian(a)
    return symmetrize(a)


def inner(x: np.ndarray, y: np.ndarray) -> float:
    """Real inner product ``sum_m Re tr(x_m^H y_m)``."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.vdot(x, y).real)


def norm(x: np.ndarray) -> float:
    """Norm induced by :func:`inner` (Frobenius norm of the whole tuple)."""
    return float(np.linalg.norm(x))


def axpy(a: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return ``a * x + y`` for a real scalar ``a``."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(a) * x + y


def zeros(m: int, n: int) -> np.ndarray:
    """All-zero tuple of ``m`` Hermitian ``n x n`` matrices."""
    return np.zeros((m, n, n), dtype=complex)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Spectral factorization ``left @ diag(values) @ right^H`` of one matrix.

    ``kind`` is ``"eigen"`` (values are eigenvalues, descending, and
    ``right is left``) or ``"singular"`` (values are singular values,
    nonnegative descending, right columns are sign-flipped eigenvectors).
    """

    values: np.ndarray  # (N,) real, descending
    left_basis: np.ndarray  # (N, N) unitary
    right_basis: np.ndarray  # (N, N) unitary
    kind: str

    def reconstruct(self) -> np.ndarray:
        return (self.left_basis * self.values) @ np.conj(self.right_basis.T)


def _canonical_phase(vals: np.ndarray, vecs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Pin each eigenvector's free phase: rotate so its largest-modulus
    # entry (lowest row index on modulus ties) is real and positive.
    m, n = vals.shape
    lead = np.abs(vecs).argmax(axis=1)  # (M, N) pivot row per column
    pivot = vecs[np.arange(m)[:, None], lead, np.arange(n)]
    mag = np.abs(pivot)
    phase = np.where(mag > 0, pivot / np.where(mag > 0, mag, 1.0), 1.0)
    vecs = vecs * np.conj(phase)[:, None, :]

    # Inside a run of exactly equal eigenvalues the basis order is
    # LAPACK's choice; reorder those columns so the lexicographically
    # largest vector (by real parts, then imaginary parts) comes first.
    # Exact float ties are rare, but the tie-break must not depend on a
    # library's internal ordering.
    for mi in range(m):
        j = 0
        while j < n:
            k = j + 1
            while k < n and vals[mi, k] == vals[mi, j]:
                k += 1
            if k - j > 1:
                block = vecs[mi, :, j:k]
                keys = [
                    tuple(np.concatenate([-block[:, c].real, -block[:, c].imag]))
                    for c in range(k - j)
                ]
                order = sorted(range(k - j), key=keys.__getitem__)
                vecs[mi, :, j:k] = block[:, order]
            j = k
    return vals, vecs


def eig_tuple(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose every slice of a Hermitian tuple.

    Returns ``(vals, vecs)`` with ``vals`` of shape ``(M, N)`` sorted
    descending per slice and ``vecs[m, :, i]`` the unit eigenvector of
    ``vals[m, i]``.  The result is a pure function of the input values:
    column phases are pinned and exact eigenvalue ties are broken
    lexicographically, so equal inputs give bitwise-equal output.
    """
    x = np.asarray(x, dtype=complex)
    vals, vecs = np.linalg.eigh(x)
    vals = vals[..., ::-1].copy()  # eigh returns ascending
    vecs = vecs[..., ::-1].copy()
    return _canonical_phase(vals, vecs)


def svd_tuple(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular value decomposition of each slice of a Hermitian tuple.

    A Hermitian matrix with eigenpairs ``(lam_i, u_i)`` has singular
    triples ``(|lam_i|, u_i, sign(lam_i) u_i)`` with ``sign(0) := +1``.
    Returns ``(s, u, v)`` where ``s`` is ``(M, N)`` descending and
    ``x[m] = u[m] @ diag(s[m]) @ v[m]^H``.
    """
    lam, u = eig_tuple(x)
    s = np.abs(lam)
    v = u * np.where(lam < 0, -1.0, 1.0)[:, None, :]
    # Stable re-sort by descending magnitude keeps the canonical
    # eigen-order within every run of equal singular values.
    order = np.argsort(-s, axis=1, kind="stable")
    s = np.take_along_axis(s, order, axis=1)
    u = np.take_along_axis(u, order[:, None, :], axis=2)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return s, u, v


def eig_hermitian(a: np.ndarray) -> SpectralDecomposition:
    """Eigendecomposition of a single Hermitian matrix, values descending."""
    a = np.asarray(a, dtype=complex)
    check_hermitian(a)
    if a.ndim != 2:
        raise ValueError(f"expected a single matrix, got shape {a.shape}")
    vals, vecs = eig_tuple(symmetrize(a)[None])
    return SpectralDecomposition(
        values=vals[0], left_basis=vecs[0], right_basis=vecs[0], kind="eigen"
    )


def svd_hermitian(a: np.ndarray) -> SpectralDecomposition:
    """SVD of a single Hermitian matrix via its eigendecomposition."""
    a = np.asarray(a, dtype=complex)
    check_hermitian(a)
    if a.ndim != 2:
        raise ValueError(f"expected a single matrix, got shape {a.shape}")
    s, u, v = svd_tuple(symmetrize(a)[None])
    return SpectralDecomposition(values=s[0], left_basis=u[0], right_basis=v[0], kind="singular")
