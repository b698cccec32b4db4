"""Superiorization perturbations: shrinkage, rank-one truncation, and
their combination.

The solver steers its feasibility iterates toward low-power, low-rank
tuples by adding scaled perturbation vectors between projection sweeps.
The perturbation of a tuple is built from one spectral decomposition:
shrink every singular value by a global threshold, truncate to the top
singular triple, and subtract the original point.
"""

from __future__ import annotations

import numpy as np

from . import hilbert

# Singular values below this fraction of the largest count as zero when
# measuring numerical rank.
RANK_RTOL = 1e-9

__all__ = [
    "RANK_RTOL",
    "sigma_max",
    "shrink",
    "t_power",
    "project_rank_one",
    "perturbation",
    "perturbation_from_psd_eig",
    "rank_distance",
    "numerical_rank",
]


def sigma_max(x: np.ndarray) -> float:
    """Largest singular value over all components of a Hermitian tuple."""
    return float(np.abs(np.linalg.eigvalsh(x)).max())


def shrink(a: np.ndarray, tau: float) -> np.ndarray:
    """Soft-threshold the singular values of one Hermitian matrix by ``tau``.

    Computes ``U diag([sigma_i - tau]_+) V^H``; this is the proximal
    operator of ``tau * ||.||_*`` at ``a``.  PSD input gives PSD output.
    """
    if tau < 0:
        raise ValueError(f"shrinkage threshold must be nonnegative, got {tau}")
    if tau == 0:
        return np.asarray(a, dtype=complex)
    dec = hilbert.svd_hermitian(a)
    vals = np.maximum(dec.values - tau, 0.0)
    out = (dec.left_basis * vals) @ np.conj(dec.right_basis.T)
    return hilbert.symmetrize(out)


def t_power(x: np.ndarray, alpha: float) -> np.ndarray:
    """Shrink all components by the global threshold ``alpha * sigma_max(x)``.

    ``alpha = 0`` is the identity; any ``alpha >= 1`` maps to the zero
    tuple because no singular value exceeds the threshold.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    s, u, v = hilbert.svd_tuple(x)
    tau = alpha * float(s.max())
    if tau == 0:
        return np.asarray(x, dtype=complex)
    vals = np.maximum(s - tau, 0.0)
    out = np.einsum("mik,mk,mjk->mij", u, vals, np.conj(v))
    return hilbert.symmetrize(out)


def project_rank_one(x: np.ndarray) -> np.ndarray:
    """Nearest tuple whose components all have rank at most one.

    Keeps each component's top singular triple.  When the largest
    singular value is degenerate the minimizer is not unique; the
    canonical decomposition order makes the selection deterministic.
    """
    s, u, v = hilbert.svd_tuple(x)
    out = s[:, 0, None, None] * np.einsum("mi,mj->mij", u[:, :, 0], np.conj(v[:, :, 0]))
    return hilbert.symmetrize(out)


def perturbation(x: np.ndarray, alpha: float) -> np.ndarray:
    """Combined perturbation: rank-one truncation of the shrunk tuple, minus ``x``.

    Component ``m`` of the result is
    ``[sigma_1(x_m) - alpha * sigma_max(x)]_+ u_m1 v_m1^H - x_m``.
    Shrinking preserves the singular order, so truncation and shrinkage
    commute and one decomposition suffices.  The result never exceeds
    ``x`` in norm, for any ``alpha >= 0``.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    s, u, v = hilbert.svd_tuple(x)
    tau = alpha * float(s.max())
    top = np.maximum(s[:, 0] - tau, 0.0)
    out = top[:, None, None] * np.einsum("mi,mj->mij", u[:, :, 0], np.conj(v[:, :, 0]))
    return hilbert.symmetrize(out) - x


def perturbation_from_psd_eig(
    x: np.ndarray, lam: np.ndarray, vecs: np.ndarray, alpha: float
) -> np.ndarray:
    """Perturbation of a PSD tuple whose eigenpairs are already known.

    ``lam`` must be the componentwise eigenvalues of ``x`` sorted
    descending (all nonnegative) with eigenvectors ``vecs``, as produced
    by the solver's PSD projection step.  Avoids a second decomposition
    in the iteration hot path; agrees with :func:`perturbation` because
    a PSD matrix's singular triples are its eigenpairs.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    tau = alpha * float(lam[:, 0].max())
    top = np.maximum(lam[:, 0] - tau, 0.0)
    u = vecs[:, :, 0]
    out = top[:, None, None] * np.einsum("mi,mj->mij", u, np.conj(u))
    return hilbert.symmetrize(out) - x


def rank_distance(x: np.ndarray) -> float:
    """Frobenius distance from ``x`` to the rank-one set.

    Equals the root of the summed squares of all singular values below
    the top one of each component; summing the tail directly avoids the
    cancellation of a subtract-the-projection formulation.
    """
    s = np.abs(np.linalg.eigvalsh(x))
    s = np.sort(s, axis=1)[:, :-1]  # drop each component's largest
    return float(np.sqrt((s**2).sum()))


def numerical_rank(x: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Componentwise count of singular values above ``rtol`` times the top one."""
    s = np.abs(np.linalg.eigvalsh(x))
    top = s.max(axis=1)
    return (s > rtol * top[:, None]).sum(axis=1)
