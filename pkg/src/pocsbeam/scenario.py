"""Experiment generation and beamformer evaluation.

Channels are i.i.d. circularly-symmetric complex Gaussian, drawn from a
seeded PCG64 generator so every instance is reproducible from its seed
alone.  Evaluation scales a candidate beamformer until it meets the
power budget implied by the relaxed optimum, then reports the worst
user's SINR under that scaling.
"""

from __future__ import annotations

import numpy as np

from .constraints import ProblemInstance

__all__ = [
    "generate_instance",
    "derive_seed",
    "per_user_sinr",
    "scale_factor",
    "min_scaled_sinr",
]


def derive_seed(base: int, index: int) -> int:
    """Per-run seed for trial ``index`` of a sweep with base seed ``base``.

    XOR keeps the derivation order-independent, so parallel sweep tasks
    can generate their instances without coordination.
    """
    if base < 0 or index < 0:
        raise ValueError("seeds and indices must be nonnegative")
    return base ^ index


def generate_instance(
    n: int,
    k: int,
    m: int,
    gamma: float,
    sigma2: float,
    p: float | np.ndarray,
    seed: int,
) -> ProblemInstance:
    """Draw a Rayleigh-fading instance with uniform targets.

    Every channel entry is complex normal with variance ``sigma2`` (two
    real normals of variance ``sigma2 / 2``); all users share the linear
    SINR target ``gamma`` and noise power ``sigma2``.  Users are split
    into ``m`` contiguous groups, the first ``k mod m`` groups one user
    larger.  ``p`` is a scalar cap for all antennas (``inf`` for none)
    or a length-``n`` array.
    """
    if k < m:
        raise ValueError(f"need at least one user per group, got K={k} < M={m}")
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.normal(0.0, np.sqrt(sigma2 / 2.0), size=(2, k, n))
    channels = z[0] + 1j * z[1]
    sizes = np.full(m, k // m)
    sizes[: k % m] += 1
    group_of = np.repeat(np.arange(m), sizes)
    caps = np.broadcast_to(np.asarray(p, dtype=float), (n,)).copy()
    return ProblemInstance(
        channels=channels,
        group_of=group_of,
        sinr_target=np.full(k, float(gamma)),
        noise_power=np.full(k, float(sigma2)),
        antenna_power=caps,
        n_groups=m,
    )


def _cross_powers(w: np.ndarray, instance: ProblemInstance) -> np.ndarray:
    # powers[l, k] = |w_l^H h_k|^2
    return np.abs(np.einsum("mi,ki->mk", np.conj(w), instance.channels)) ** 2


def per_user_sinr(w: np.ndarray, instance: ProblemInstance) -> np.ndarray:
    """Unscaled per-user SINR of beamformer ``w`` (rows are group vectors)."""
    w = np.asarray(w, dtype=complex)
    pw = _cross_powers(w, instance)
    users = np.arange(instance.n_users)
    sig = pw[instance.group_of, users]
    interference = pw.sum(axis=0) - sig
    return sig / (interference + instance.noise_power)


def scale_factor(w: np.ndarray, instance: ProblemInstance, p_sdr: float) -> float:
    """Largest power scaling that keeps ``sqrt(rho) * w`` within budget.

    The scaled beamformer satisfies total power at most ``p_sdr`` and
    every finite per-antenna cap.  Uncapped antennas do not constrain
    the scaling.
    """
    w = np.asarray(w, dtype=complex)
    if p_sdr <= 0:
        raise ValueError(f"p_sdr must be positive, got {p_sdr}")
    total = float(np.sum(np.abs(w) ** 2))
    if total == 0:
        raise ValueError("cannot scale an all-zero beamformer")
    rho = p_sdr / total
    per_antenna = np.sum(np.abs(w) ** 2, axis=0)
    caps = instance.antenna_power
    mask = np.isfinite(caps) & (per_antenna > 0)
    if np.any(mask):
        rho = min(rho, float((caps[mask] / per_antenna[mask]).min()))
    return rho


def min_scaled_sinr(w: np.ndarray, instance: ProblemInstance, p_sdr: float) -> float:
    """Worst-user SINR after scaling ``w`` to the power budget, linear scale.

    Cannot exceed the SINR target when ``p_sdr`` does not exceed the
    true optimum; reporting layers convert to dB.
    """
    w = np.asarray(w, dtype=complex)
    rho = scale_factor(w, instance, p_sdr)
    pw = _cross_powers(w, instance)
    users = np.arange(instance.n_users)
    sig = pw[instance.group_of, users]
    interference = pw.sum(axis=0) - sig
    return float((sig / (interference + instance.noise_power / rho)).min())
