"""Constraint sets of the beamforming feasibility problem.

An instance induces three families of convex sets in the tuple space:
one half-space per user encoding its SINR target, one half-space per
antenna encoding its power cap, and the cone of componentwise positive
semidefinite tuples.  This module builds those sets from a
:class:`ProblemInstance`, provides their closed-form projections, and
composes the relaxed projections into the cyclic operator ``t_star``
that drives every solver.

Projection order inside ``t_star`` is fixed: user half-spaces first (in
user order), then the power set, then the PSD cone.  The composition is
order-sensitive, so this order is part of the contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hilbert
from .perturb import rank_distance

__all__ = [
    "ProblemInstance",
    "ConstraintCache",
    "prepare",
    "objective",
    "sinr_normal",
    "power_normal",
    "sinr_values",
    "project_sinr",
    "project_power",
    "project_psd",
    "relax",
    "t_star",
    "t_star_with_eig",
    "Residuals",
    "residuals",
]


@dataclass(frozen=True)
class ProblemInstance:
    """Immutable problem data for one beamforming scenario.

    Parameters
    ----------
    channels : (K, N) complex array
        User channel vectors; row ``k`` is the channel of user ``k``.
    group_of : (K,) int array
        Zero-based multicast group index of each user.
    sinr_target : (K,) float array
        Linear (not dB) SINR targets, strictly positive.
    noise_power : (K,) float array
        Per-user noise powers, strictly positive.
    antenna_power : (N,) float array
        Per-antenna power caps; ``inf`` marks an uncapped antenna.
    n_groups : int
        Number of multicast groups ``M``; every group must be nonempty.
    """

    channels: np.ndarray
    group_of: np.ndarray
    sinr_target: np.ndarray
    noise_power: np.ndarray
    antenna_power: np.ndarray
    n_groups: int

    def __post_init__(self) -> None:
        ch = np.asarray(self.channels, dtype=complex)
        if ch.ndim != 2:
            raise ValueError(f"channels must be (K, N), got shape {ch.shape}")
        k, n = ch.shape
        grp = np.asarray(self.group_of, dtype=np.int64)
        gam = np.asarray(self.sinr_target, dtype=float)
        sig = np.asarray(self.noise_power, dtype=float)
        cap = np.asarray(self.antenna_power, dtype=float)
        m = int(self.n_groups)
        if grp.shape != (k,) or gam.shape != (k,) or sig.shape != (k,):
            raise ValueError("group_of, sinr_target, noise_power must all have length K")
        if cap.shape != (n,):
            raise ValueError(f"antenna_power must have length N={n}")
        if m < 1 or k < 1 or n < 1:
            raise ValueError("N, K, M must all be positive")
        if not np.all(np.isfinite(ch)):
            raise ValueError("channels contain non-finite entries")
        if np.any(np.linalg.norm(ch, axis=1) == 0):
            raise ValueError("degenerate all-zero channel: SINR constraint unsatisfiable")
        if np.any(grp < 0) or np.any(grp >= m):
            raise ValueError("group indices must lie in [0, n_groups)")
        if np.any(np.bincount(grp, minlength=m) == 0):
            raise ValueError("every group must have at least one member")
        if not np.all(np.isfinite(gam)) or np.any(gam <= 0):
            raise ValueError("sinr_target must be finite and positive")
        if not np.all(np.isfinite(sig)) or np.any(sig <= 0):
            raise ValueError("noise_power must be finite and positive")
        if np.any(cap <= 0) or np.any(np.isnan(cap)):
            raise ValueError("antenna_power must be positive (inf allowed)")
        for name, arr in (
            ("channels", ch),
            ("group_of", grp),
            ("sinr_target", gam),
            ("noise_power", sig),
            ("antenna_power", cap),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "n_groups", m)

    @property
    def n_users(self) -> int:
        return self.channels.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True)
class ConstraintCache:
    """Iteration-invariant constraint geometry derived from an instance.

    Holds the rank-one channel outer products, the squared norms of the
    SINR half-space normals, and the indices of finite power caps.  All
    solvers share one cache per instance.
    """

    instance: ProblemInstance
    q: np.ndarray  # (K, N, N) outer products h_k h_k^H
    z_norm2: np.ndarray  # (K,) squared norms of the SINR normals
    finite_caps: np.ndarray  # indices i with a finite power cap


def prepare(instance: ProblemInstance) -> ConstraintCache:
    """Precompute the constraint normals' data for ``instance``."""
    h = instance.channels
    m = instance.n_groups
    q = np.einsum("ki,kj->kij", h, np.conj(h))
    h2 = np.sum(np.abs(h) ** 2, axis=1)
    # The SINR normal has one component h h^H / gamma and M-1 components
    # -h h^H, and ||h h^H||_F = ||h||^2.
    z_norm2 = h2**2 * (1.0 / instance.sinr_target**2 + (m - 1))
    finite = np.flatnonzero(np.isfinite(instance.antenna_power))
    q.setflags(write=False)
    z_norm2.setflags(write=False)
    finite.setflags(write=False)
    return ConstraintCache(instance=instance, q=q, z_norm2=z_norm2, finite_caps=finite)


def objective(x: np.ndarray) -> float:
    """Total transmit power ``sum_m tr(x_m)`` of a tuple."""
    return float(np.trace(x, axis1=-2, axis2=-1).sum().real)


def sinr_normal(cache: ConstraintCache, k: int) -> np.ndarray:
    """Materialize the normal tuple of user ``k``'s SINR half-space.

    Component ``g_k`` is ``Q_k / gamma_k``; every other component is
    ``-Q_k``.  Mainly for tests and diagnostics; the solver path never
    materializes these.
    """
    inst = cache.instance
    z = np.repeat(-cache.q[k][None], inst.n_groups, axis=0)
    z[inst.group_of[k]] = cache.q[k] / inst.sinr_target[k]
    return z


def power_normal(m: int, n: int, i: int) -> np.ndarray:
    """Materialize the normal tuple of antenna ``i``'s power half-space."""
    d = np.zeros((m, n, n), dtype=complex)
    d[:, i, i] = 1.0
    return d


def sinr_values(x: np.ndarray, cache: ConstraintCache) -> np.ndarray:
    """Inner products of ``x`` with every SINR normal, as a (K,) array.

    User ``k``'s constraint is satisfied iff the returned value is at
    least its noise power.
    """
    inst = cache.instance
    # t[k, l] = tr(Q_k x_l), real because both factors are Hermitian.
    t = np.einsum("ki,mij,kj->km", np.conj(inst.channels), x, inst.channels).real
    sig = t[np.arange(inst.n_users), inst.group_of]
    return sig / inst.sinr_target - (t.sum(axis=1) - sig)


def project_sinr(x: np.ndarray, cache: ConstraintCache, k: int) -> np.ndarray:
    """Project onto user ``k``'s SINR half-space."""
    inst = cache.instance
    hk = inst.channels[k]
    g = inst.group_of[k]
    t = np.einsum("i,mij,j->m", np.conj(hk), x, hk).real
    s = t[g] / inst.sinr_target[k] - (t.sum() - t[g])
    gap = inst.noise_power[k] - s
    if gap <= 0:
        return x
    coef = gap / cache.z_norm2[k]
    w = np.full(inst.n_groups, -coef)
    w[g] = coef / inst.sinr_target[k]
    return x + w[:, None, None] * cache.q[k]


def project_power(x: np.ndarray, cache: ConstraintCache) -> np.ndarray:
    """Project onto the intersection of all per-antenna power caps.

    The normals are mutually orthogonal, so correcting each violated cap
    once is the exact projection onto the intersection.  Uncapped
    antennas are skipped.
    """
    inst = cache.instance
    idx = cache.finite_caps
    if idx.size == 0:
        return x
    d = x[:, idx, idx].real.sum(axis=0)
    over = d - inst.antenna_power[idx]
    hit = over > 0
    if not np.any(hit):
        return x
    y = x.copy()
    cols = idx[hit]
    y[:, cols, cols] -= over[hit] / x.shape[0]
    return y


def project_psd(x: np.ndarray) -> np.ndarray:
    """Componentwise projection onto the PSD cone (eigenvalue clamp)."""
    y, _, _ = _psd_clamp(x)
    return y


def _psd_clamp(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lam, vecs = hilbert.eig_tuple(x)
    if np.all(lam[:, -1] >= 0):
        return x, lam, vecs
    lp = np.maximum(lam, 0.0)
    y = np.einsum("mik,mk,mjk->mij", vecs, lp, np.conj(vecs))
    return hilbert.symmetrize(y), lp, vecs


def relax(projected: np.ndarray, x: np.ndarray, mu: float) -> np.ndarray:
    """Relaxed projector value ``x + mu * (projected - x)``."""
    if not 0.0 < mu < 2.0:
        raise ValueError(f"relaxation parameter must lie in (0, 2), got {mu}")
    return x + mu * (projected - x)


def _check_mus(mus: np.ndarray, k: int) -> np.ndarray:
    mus = np.asarray(mus, dtype=float)
    if mus.shape != (k + 2,):
        raise ValueError(f"expected {k + 2} relaxation parameters, got shape {mus.shape}")
    if np.any(mus <= 0) or np.any(mus >= 2):
        raise ValueError("all relaxation parameters must lie in (0, 2)")
    return mus


def _t_star_impl(
    x: np.ndarray,
    cache: ConstraintCache,
    mus: np.ndarray,
    coefs: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    inst = cache.instance
    k = inst.n_users
    mus = _check_mus(mus, k)
    gamma = inst.sinr_target
    sigma2 = inst.noise_power
    group_of = inst.group_of
    m = inst.n_groups

    y = np.array(x, dtype=complex, copy=True)
    # Relaxed SINR projections, sequentially in user order.
    for j in range(k):
        hj = inst.channels[j]
        g = group_of[j]
        t = np.einsum("i,mi->m", np.conj(hj), y @ hj).real
        s = t[g] / gamma[j] - (t.sum() - t[g])
        gap = sigma2[j] - s
        if gap > 0:
            coef = mus[j] * gap / cache.z_norm2[j]
            w = np.full(m, -coef)
            w[g] = coef / gamma[j]
            y += w[:, None, None] * cache.q[j]
            if coefs is not None:
                coefs[0][j] += coef

    # Relaxed projection onto the power caps.
    idx = cache.finite_caps
    if idx.size:
        d = y[:, idx, idx].real.sum(axis=0)
        over = d - inst.antenna_power[idx]
        hit = over > 0
        if np.any(hit):
            cols = idx[hit]
            step = mus[k] * over[hit] / m
            y[:, cols, cols] -= step
            if coefs is not None:
                coefs[1][cols] += step

    # Relaxed projection onto the PSD cone, applied last.
    clamped, lam_clamped, vecs = _psd_clamp(y)
    mu_psd = mus[k + 1]
    if clamped is y:  # already PSD
        return y, lam_clamped, vecs
    if mu_psd == 1.0:
        return clamped, lam_clamped, vecs
    return y + mu_psd * (clamped - y), None, None


def t_star(x: np.ndarray, cache: ConstraintCache, mus: np.ndarray) -> np.ndarray:
    """One sweep of relaxed projections over all constraint sets.

    ``mus`` holds K + 2 relaxation parameters in (0, 2): one per user
    half-space, one for the power set, one for the PSD cone, applied in
    that order.
    """
    y, _, _ = _t_star_impl(x, cache, mus)
    return y


def t_star_with_eig(
    x: np.ndarray, cache: ConstraintCache, mus: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Like :func:`t_star`, also returning an eigendecomposition of the output.

    When the PSD relaxation parameter is 1 the final clamp already knows
    the output's eigenpairs, so the solver loop can feed them straight
    into the next perturbation without a second decomposition.  Ordering
    inside runs of exactly equal eigenvalues may differ from a fresh
    ``eig_tuple`` call; the top eigenpair is canonical whenever it is
    strictly separated or the component is zero.
    """
    y, lam, vecs = _t_star_impl(x, cache, mus)
    if lam is None:
        lam, vecs = hilbert.eig_tuple(y)
    return y, lam, vecs


@dataclass(frozen=True)
class Residuals:
    """Raw constraint violations of a tuple, in problem units."""

    sinr: np.ndarray  # (K,) max(0, sigma_k^2 - <X, Z^k>)
    power: np.ndarray  # (N,) max(0, <X, D^i> - p_i), zero where uncapped
    psd: float  # sum of all negative-eigenvalue magnitudes
    rank_distance: float  # Frobenius distance to the rank-one set

    @property
    def max_constraint(self) -> float:
        """Largest violation among SINR, power, and PSD residuals."""
        return max(
            float(self.sinr.max(initial=0.0)),
            float(self.power.max(initial=0.0)),
            self.psd,
        )


def residuals(x: np.ndarray, cache: ConstraintCache) -> Residuals:
    """Per-constraint violation report for ``x``."""
    inst = cache.instance
    s = sinr_values(x, cache)
    sinr_res = np.maximum(0.0, inst.noise_power - s)
    diag = np.einsum("mii->i", x).real
    power_res = np.where(
        np.isfinite(inst.antenna_power), np.maximum(0.0, diag - inst.antenna_power), 0.0
    )
    lam, _ = hilbert.eig_tuple(x)
    psd = float(np.maximum(0.0, -lam).sum())
    return Residuals(
        sinr=sinr_res, power=power_res, psd=psd, rank_distance=rank_distance(x)
    )
