"""Feasibility solvers and the power-optimum estimator.

``pocs_solve`` runs the plain cyclic-projection iteration; ``spocs_solve``
interleaves it with summably-scaled perturbations that steer iterates
toward low-power, near-rank-one tuples without breaking convergence.
``estimate_sdr_optimum`` estimates the relaxed problem's optimal power
by steepest descent over the feasible set; the evaluation metric scales
beamformers against that estimate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import hilbert
from .constraints import (
    ConstraintCache,
    ProblemInstance,
    _t_star_impl,
    objective,
    prepare,
    residuals,
    sinr_values,
    t_star_with_eig,
)
from .perturb import perturbation, perturbation_from_psd_eig

__all__ = [
    "SolverConfig",
    "TraceRecord",
    "SolverTrace",
    "pocs_solve",
    "spocs_solve",
    "extract_beamformer",
    "OracleConfig",
    "SdrEstimate",
    "estimate_sdr_optimum",
]

TRACE_FIELDS = (
    "n",
    "objective",
    "rank_distance",
    "max_sinr_residual",
    "max_power_residual",
    "psd_residual",
    "rel_step",
    "elapsed_ns",
)


@dataclass(frozen=True)
class SolverConfig:
    """Iteration parameters shared by both solvers.

    ``mu_sinr`` applies to every user half-space, ``mu_power`` to the
    power set, ``mu_psd`` to the PSD cone; all must lie in (0, 2).
    ``a`` and ``b`` in (0, 1) control the perturbation decay (step size
    ``a^n``, scaling ``b^n``); ``b < 1`` keeps the total perturbation
    mass finite.  Iteration stops when the step is below ``eps``
    relative to the new iterate, or at ``n_max``.
    """

    mu_sinr: float = 1.9
    mu_power: float = 1.0
    mu_psd: float = 1.0
    a: float = 0.95
    b: float = 0.999
    eps: float = 1e-6
    n_max: int = 100_000
    record_trace_every: int = 10

    def __post_init__(self) -> None:
        for name in ("mu_sinr", "mu_power", "mu_psd"):
            v = getattr(self, name)
            if not 0.0 < v < 2.0:
                raise ValueError(f"{name} must lie in (0, 2), got {v}")
        for name in ("a", "b"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.n_max < 1 or self.record_trace_every < 1:
            raise ValueError("n_max and record_trace_every must be at least 1")

    def mus(self, n_users: int) -> np.ndarray:
        """Relaxation parameters in projection order, length K + 2."""
        return np.concatenate(
            [np.full(n_users, self.mu_sinr), [self.mu_power, self.mu_psd]]
        )


@dataclass(frozen=True)
class TraceRecord:
    """One sampled diagnostic row; fields match the trace CSV columns."""

    n: int
    objective: float
    rank_distance: float
    max_sinr_residual: float
    max_power_residual: float
    psd_residual: float
    rel_step: float
    elapsed_ns: int

    def astuple(self) -> tuple:
        return (
            self.n,
            self.objective,
            self.rank_distance,
            self.max_sinr_residual,
            self.max_power_residual,
            self.psd_residual,
            self.rel_step,
            self.elapsed_ns,
        )


@dataclass
class SolverTrace:
    """Sampled per-iteration diagnostics plus the termination verdict."""

    records: list[TraceRecord] = field(default_factory=list)
    iterations: int = 0
    terminated_by: str = "iteration-cap"  # or "tolerance"


def _resolve(instance: ProblemInstance | ConstraintCache) -> ConstraintCache:
    if isinstance(instance, ConstraintCache):
        return instance
    return prepare(instance)


def _start_point(cache: ConstraintCache, x0: np.ndarray | None) -> np.ndarray:
    inst = cache.instance
    if x0 is None:
        return hilbert.zeros(inst.n_groups, inst.n_antennas)
    x0 = np.asarray(x0, dtype=complex)
    if x0.shape != (inst.n_groups, inst.n_antennas, inst.n_antennas):
        raise ValueError(f"x0 has shape {x0.shape}, expected "
                         f"{(inst.n_groups, inst.n_antennas, inst.n_antennas)}")
    return hilbert.hermitian(x0)


def _fast_residuals(x: np.ndarray, lam: np.ndarray, cache: ConstraintCache):
    # Residuals from quantities the iteration already has; avoids a
    # second eigendecomposition per sampled row.
    inst = cache.instance
    sinr = float(np.maximum(0.0, inst.noise_power - sinr_values(x, cache)).max())
    diag = np.einsum("mii->i", x).real
    over = np.where(
        np.isfinite(inst.antenna_power), diag - inst.antenna_power, -np.inf
    )
    power = float(max(0.0, over.max()))
    psd = float(np.maximum(0.0, -lam).sum())
    s = np.sort(np.abs(lam), axis=1)[:, :-1]
    g = float(np.sqrt((s**2).sum()))
    return sinr, power, psd, g


def _trace_row(
    n: int, x: np.ndarray, lam: np.ndarray, cache: ConstraintCache, rel: float, t0: int
) -> TraceRecord:
    sinr, power, psd, g = _fast_residuals(x, lam, cache)
    return TraceRecord(
        n=n,
        objective=objective(x),
        rank_distance=g,
        max_sinr_residual=sinr,
        max_power_residual=power,
        psd_residual=psd,
        rel_step=rel,
        elapsed_ns=time.perf_counter_ns() - t0,
    )


def pocs_solve(
    instance: ProblemInstance | ConstraintCache,
    config: SolverConfig | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, SolverTrace]:
    """Cyclic relaxed projections until the relative step drops below ``eps``.

    Returns the final tuple and the trace.  A zero new iterate never
    satisfies the stopping test (the targets' noise powers are positive,
    so zero is infeasible and the iteration must keep moving).
    """
    config = config or SolverConfig()
    cache = _resolve(instance)
    mus = config.mus(cache.instance.n_users)
    x = _start_point(cache, x0)
    trace = SolverTrace()
    t0 = time.perf_counter_ns()
    for n in range(1, config.n_max + 1):
        x_new, lam, _ = t_star_with_eig(x, cache, mus)
        step = hilbert.norm(x_new - x)
        size = hilbert.norm(x_new)
        rel = step / size if size > 0 else float("inf")
        x = x_new
        done = size > 0 and step < config.eps * size
        if done or n % config.record_trace_every == 0 or n == config.n_max:
            trace.records.append(_trace_row(n, x, lam, cache, rel, t0))
        if done:
            trace.iterations = n
            trace.terminated_by = "tolerance"
            return x, trace
    trace.iterations = config.n_max
    trace.terminated_by = "iteration-cap"
    return x, trace


def spocs_solve(
    instance: ProblemInstance | ConstraintCache,
    config: SolverConfig | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, SolverTrace]:
    """Superiorized projections: perturb, project, repeat.

    Iteration ``n`` (counted from 0) adds the scaled perturbation
    ``b^n * Y_{a^n}(X)`` to the current point before the projection
    sweep.  Stopping rule and trace are as in :func:`pocs_solve`.
    """
    config = config or SolverConfig()
    cache = _resolve(instance)
    mus = config.mus(cache.instance.n_users)
    x = _start_point(cache, x0)
    trace = SolverTrace()
    # After one sweep ending in an unrelaxed PSD clamp the iterate is PSD
    # with known eigenpairs, so later perturbations reuse them.
    fast = config.mu_psd == 1.0
    lam = vecs = None
    an = 1.0
    bn = 1.0
    t0 = time.perf_counter_ns()
    for n in range(1, config.n_max + 1):
        if fast and lam is not None:
            y = perturbation_from_psd_eig(x, lam, vecs, an)
        else:
            y = perturbation(x, an)
        x_new, lam, vecs = t_star_with_eig(x + bn * y, cache, mus)
        an *= config.a
        bn *= config.b
        step = hilbert.norm(x_new - x)
        size = hilbert.norm(x_new)
        rel = step / size if size > 0 else float("inf")
        x = x_new
        done = size > 0 and step < config.eps * size
        if done or n % config.record_trace_every == 0 or n == config.n_max:
            trace.records.append(_trace_row(n, x, lam, cache, rel, t0))
        if done:
            trace.iterations = n
            trace.terminated_by = "tolerance"
            return x, trace
    trace.iterations = config.n_max
    trace.terminated_by = "iteration-cap"
    return x, trace


def extract_beamformer(x: np.ndarray) -> np.ndarray:
    """Strongest principal component of every tuple slice, as an (M, N) array.

    Row ``m`` is ``sqrt(sigma_1(x_m))`` times the top left singular
    vector, so for an exactly rank-one PSD slice the outer product of
    the row reproduces the slice.
    """
    s, u, _ = hilbert.svd_tuple(x)
    return np.sqrt(s[:, 0])[:, None] * u[:, :, 0]


@dataclass(frozen=True)
class OracleConfig:
    """Knobs of the power-optimum estimator.

    The descent step is ``c / (n + 1)`` with ``c = step_scale`` times
    the largest singular value of the feasible warm start.  The default
    ``step_scale`` is an empirical oracle knob: large enough that the
    diminishing steps traverse the feasible set within the iteration
    budget, small enough that the O(c/n) excess of the checkpoint
    powers stays negligible.  At every geometric checkpoint the iterate
    is polished back to feasibility (residuals at most ``tol``) to give
    an achievable power, and the certified lower bound is refreshed; a
    cutting-plane pass (at most ``dual_rounds`` rounds, ``dual_depth``
    eigenvector cuts per component) runs while the certificate is
    looser than ``gap_rtol``.  The run stops once the certified gap
    falls below ``gap_rtol`` or ``gap_accept``.  Uncertified runs
    instead stop when two successive checkpoint powers agree to
    ``stab_rtol`` relative, since without a certificate only stability
    of the upper value speaks for the estimate.
    """

    step_scale: float = 2.0
    n_max: int = 200_000
    tol: float = 1e-6
    gap_rtol: float = 1e-3
    gap_accept: float = 2e-2
    stab_rtol: float = 2e-3
    first_checkpoint: int = 1000
    polish_n_max: int = 20_000
    dual_rounds: int = 400
    dual_depth: int = 2
    mu_sinr: float = 1.9
    mu_power: float = 1.0
    mu_psd: float = 1.0

    def __post_init__(self) -> None:
        for name in ("step_scale", "tol", "gap_rtol", "gap_accept", "stab_rtol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_max < 1 or self.first_checkpoint < 1 or self.polish_n_max < 1:
            raise ValueError("iteration budgets must be at least 1")
        if self.dual_rounds < 0 or self.dual_depth < 1:
            raise ValueError("dual_rounds must be >= 0 and dual_depth >= 1")

    def mus(self, n_users: int) -> np.ndarray:
        return np.concatenate(
            [np.full(n_users, self.mu_sinr), [self.mu_power, self.mu_psd]]
        )


@dataclass(frozen=True)
class SdrEstimate:
    """Estimator verdict: the value plus the evidence for trusting it.

    ``value`` is what downstream scaling should use.  When ``certified``
    it is a duality-certified lower bound on the relaxed optimum, so the
    scaled-SINR metric bound is mathematically guaranteed; otherwise it
    falls back to the best feasible power found (``upper``).  ``gap`` is
    ``(upper - value) / upper``, the certified optimality gap.
    """

    value: float
    upper: float
    gap: float
    certified: bool
    reliable: bool
    stabilized: bool
    max_residual: float
    iterations: int
    history: tuple[tuple[int, float, float], ...]


def _project_to_feasible(
    x: np.ndarray, cache: ConstraintCache, mus: np.ndarray, tol: float, n_max: int
) -> tuple[np.ndarray, int, bool]:
    """Iterate projection sweeps until all constraint residuals are ≤ tol."""
    inst = cache.instance
    for n in range(1, n_max + 1):
        x, lam, _ = t_star_with_eig(x, cache, mus)
        sinr = float(np.maximum(0.0, inst.noise_power - sinr_values(x, cache)).max())
        diag = np.einsum("mii->i", x).real
        over = np.where(
            np.isfinite(inst.antenna_power), diag - inst.antenna_power, -np.inf
        )
        power = float(max(0.0, over.max()))
        psd = float(np.maximum(0.0, -lam).sum())
        if max(sinr, power, psd) <= tol:
            return x, n, True
    return x, n_max, False


def _ls_multipliers(
    cache: ConstraintCache, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Multiplier estimates from a near-optimal feasible tuple.

    At an optimum the dual slack matrix annihilates every component's
    principal eigenvector; solving that annihilation condition in least
    squares over the multipliers recovers them to first order in the
    distance from ``x`` to the optimum.  Small negative solution entries
    are clamped; the caller's certificate scaling absorbs the error.
    """
    inst = cache.instance
    m, n = inst.n_groups, inst.n_antennas
    lam, vecs = hilbert.eig_tuple(x)
    u = vecs[:, :, 0]  # (M, N) principal eigenvectors

    # Column for nu_k: the SINR normal applied to u, stacked over
    # components; Z^k_m u_m reduces to (h_k^H u_m) h_k.
    w = np.einsum("ki,mi->km", np.conj(inst.channels), u)  # (K, M)
    coef = np.full((inst.n_users, m), -1.0)
    coef[np.arange(inst.n_users), inst.group_of] = 1.0 / inst.sinr_target
    cols = [(coef[k] * w[k])[:, None] * inst.channels[k][None, :] for k in range(inst.n_users)]

    # Columns for omega_i, active power caps only.
    diag = np.einsum("mii->i", x).real
    caps = inst.antenna_power
    scale = max(float(np.abs(diag).max()), 1.0)
    active = [
        int(i)
        for i in cache.finite_caps
        if diag[i] >= caps[i] - 1e-6 * scale
    ]
    for i in active:
        col = np.zeros((m, n), dtype=complex)
        col[:, i] = -u[:, i]
        cols.append(col)

    a = np.stack([c.ravel() for c in cols], axis=1)
    rhs = u.ravel()
    a_real = np.concatenate([a.real, a.imag], axis=0)
    rhs_real = np.concatenate([rhs.real, rhs.imag])
    theta, *_ = np.linalg.lstsq(a_real, rhs_real, rcond=None)
    theta = np.maximum(theta, 0.0)
    nu = theta[: inst.n_users]
    om = np.zeros(n)
    om[active] = theta[inst.n_users :]
    return nu, om


def _dual_matrices(cache: ConstraintCache, nu: np.ndarray, om: np.ndarray) -> np.ndarray:
    """Weighted constraint-normal sum ``B_m`` for multipliers ``(nu, om)``."""
    inst = cache.instance
    coeff = -nu[:, None].repeat(inst.n_groups, axis=1)
    coeff[np.arange(inst.n_users), inst.group_of] = nu / inst.sinr_target
    b = np.einsum("km,kij->mij", coeff, cache.q)
    idx = np.arange(inst.n_antennas)
    b[:, idx, idx] -= om
    return b


def _dual_value(cache: ConstraintCache, nu: np.ndarray, om: np.ndarray) -> float:
    inst = cache.instance
    fin = cache.finite_caps
    dual = float(nu @ inst.noise_power)
    if fin.size:
        dual -= float(om[fin] @ inst.antenna_power[fin])
    return dual


def _dual_lower_bound(
    cache: ConstraintCache, nu: np.ndarray, om: np.ndarray
) -> float | None:
    """Duality-certified lower bound on the minimum total power.

    For any nonnegative multipliers, scaling them by ``t`` keeps the
    dual matrices ``I - t * B_m`` PSD up to ``t* = 1 / max_m
    lambda_max(B_m)``, and the dual value at ``t*`` bounds the optimum
    from below.  Returns None when no positive scaling is admissible.
    """
    beta = float(np.linalg.eigvalsh(_dual_matrices(cache, nu, om))[:, -1].max())
    if beta <= 0:
        return None
    return _dual_value(cache, nu, om) / beta


def _cut_row(
    inst: ProblemInstance, fin: np.ndarray, m: int, u: np.ndarray
) -> np.ndarray:
    """Linear coefficients of ``u^H B_m(nu, om) u`` in the multipliers."""
    proj = np.abs(inst.channels @ np.conj(u)) ** 2
    c = np.where(inst.group_of == m, 1.0 / inst.sinr_target, -1.0)
    return np.concatenate([c * proj, -np.abs(u[fin]) ** 2])


def _cutting_plane_bound(
    cache: ConstraintCache,
    seeds: list[tuple[np.ndarray, np.ndarray]],
    primal: np.ndarray,
    rounds: int,
    depth: int,
) -> tuple[float, tuple[np.ndarray, np.ndarray] | None, bool]:
    """Maximize the certified bound by cutting planes on the dual program.

    The dual constraint ``B_m <= I`` is the family of linear cuts
    ``u^H B_m u <= 1`` over unit vectors ``u``.  Each round solves the
    linear program restricted to the accumulated cuts and separates new
    ones from the top eigenvectors of the violating components.  Every
    candidate is re-certified by an exact eigenvalue scaling, so the
    returned bound is valid no matter how early the loop stops.  The
    final flag reports convergence: a converged pass has pinned the
    dual optimum, so rerunning it cannot improve the bound.
    """
    inst = cache.instance
    fin = cache.finite_caps
    k = inst.n_users
    depth = min(depth, inst.n_antennas)
    obj = np.concatenate([inst.noise_power, -inst.antenna_power[fin]])

    best = -float("inf")
    best_mult: tuple[np.ndarray, np.ndarray] | None = None
    rows = []
    _, vecs_p = hilbert.eig_tuple(primal)
    for m in range(inst.n_groups):
        for j in range(depth):
            rows.append(_cut_row(inst, fin, m, vecs_p[m, :, j]))
    for nu, om in seeds:
        lam, vecs = np.linalg.eigh(_dual_matrices(cache, nu, om))
        beta = float(lam[:, -1].max())
        if beta > 0:
            cand = _dual_value(cache, nu, om) / beta
            if cand > best:
                best, best_mult = cand, (nu, om)
        for m in range(inst.n_groups):
            for j in range(1, depth + 1):
                rows.append(_cut_row(inst, fin, m, vecs[m, :, -j]))

    # A box keeps early iterations bounded; the separation cuts take
    # over long before it binds at the optimum.
    box = 1e6 * max(1.0, *(float(nu.max()) for nu, _ in seeds)) if seeds else 1e6
    a_ub = np.array(rows)
    converged = False
    for _ in range(rounds):
        res = optimize.linprog(
            -obj,
            A_ub=a_ub,
            b_ub=np.ones(len(a_ub)),
            bounds=(0.0, box),
            method="highs",
        )
        if not res.success:
            break
        # The LP relaxes the dual feasible set, so its optimum bounds
        # the dual optimum from above while every rescaled candidate
        # bounds it from below; the loop ends when the two meet.
        q_lp = -float(res.fun)
        nu = res.x[:k]
        om = np.zeros(inst.n_antennas)
        om[fin] = res.x[k:]
        lam, vecs = np.linalg.eigh(_dual_matrices(cache, nu, om))
        beta = float(lam[:, -1].max())
        if beta > 0 and q_lp / beta > best:
            best, best_mult = q_lp / beta, (nu, om)
        if beta <= 1.0 + 1e-9 or (
            np.isfinite(best) and q_lp - best <= 1e-6 * max(abs(best), 1e-12)
        ):
            converged = True
            break
        new = [
            _cut_row(inst, fin, m, vecs[m, :, -1 - j])
            for m in range(inst.n_groups)
            for j in range(depth)
        ]
        a_ub = np.vstack([a_ub, new])
    return best, best_mult, converged


def estimate_sdr_optimum(
    instance: ProblemInstance | ConstraintCache,
    config: OracleConfig | None = None,
) -> SdrEstimate:
    """Estimate the relaxed problem's minimum total power.

    Runs ``X <- t_star(X) - (c / (n + 1)) * J`` with ``J`` the identity
    tuple: the projection sweep pulls toward feasibility while the
    diminishing, non-summable identity steps push the trace down, so the
    iterates approach the minimum-power feasible tuple.  At geometric
    checkpoints the iterate is polished back to feasibility and its
    power recorded as an upper value.

    The lower value comes from weak duality: nonnegative multipliers
    whose dual slack matrices stay below the identity certify a bound
    on the optimum, and an exact eigenvalue rescaling extends this to
    arbitrary nonnegative multipliers.  Candidates are seeded from the
    projection corrections accumulated between checkpoints and from a
    least-squares fit at the polished iterate, then refined by a
    cutting-plane pass whenever the certificate is looser than
    ``gap_rtol``.  The returned ``value`` is the best certified
    bound, so scaling a beamformer against it can never overshoot the
    SINR target.  The run stops once the certified gap is acceptable;
    uncertified runs stop on stalled checkpoint powers.  ``reliable``
    requires final residuals within tolerance and a certified gap at
    most ``gap_accept``.
    """
    config = config or OracleConfig()
    cache = _resolve(instance)
    inst = cache.instance
    mus = config.mus(inst.n_users)

    x = hilbert.zeros(inst.n_groups, inst.n_antennas)
    x, _, warm_ok = _project_to_feasible(x, cache, mus, config.tol, config.polish_n_max)
    if not warm_ok:
        val = objective(x)
        return SdrEstimate(
            value=val,
            upper=val,
            gap=float("inf"),
            certified=False,
            reliable=False,
            stabilized=False,
            max_residual=residuals(x, cache).max_constraint,
            iterations=0,
            history=(),
        )

    c = config.step_scale * float(np.abs(np.linalg.eigvalsh(x)).max())
    idx = np.arange(inst.n_antennas)
    nu_acc = np.zeros(inst.n_users)
    om_acc = np.zeros(inst.n_antennas)
    lam_acc = 0.0
    history: list[tuple[int, float, float]] = []
    prev_upper: float | None = None
    nu_best: tuple[np.ndarray, np.ndarray] | None = None
    bound_final = False
    upper = objective(x)
    lower = -float("inf")
    polished = x
    polish_ok = True
    stabilized = False
    next_checkpoint = config.first_checkpoint
    n_done = 0
    for n in range(config.n_max):
        x, _, _ = _t_star_impl(x, cache, mus, (nu_acc, om_acc))
        step = c / (n + 1)
        x[:, idx, idx] -= step
        lam_acc += step
        n_done = n + 1
        if n_done == next_checkpoint or n_done == config.n_max:
            polished, _, polish_ok = _project_to_feasible(
                x.copy(), cache, mus, config.tol, config.polish_n_max
            )
            upper = objective(polished)
            seeds = [
                (nu_acc / lam_acc, om_acc / lam_acc),
                _ls_multipliers(cache, polished),
            ]
            if nu_best is not None:
                seeds.append(nu_best)
            for nu, om in seeds:
                cand = _dual_lower_bound(cache, nu, om)
                if cand is not None and cand > lower:
                    lower = cand
                    nu_best = (nu, om)
            gap = (upper - lower) / upper if upper > 0 else float("inf")
            if gap > config.gap_rtol and config.dual_rounds > 0 and not bound_final:
                bound, mult, bound_final = _cutting_plane_bound(
                    cache, seeds, polished, config.dual_rounds, config.dual_depth
                )
                if bound > lower and mult is not None:
                    lower = bound
                    nu_best = mult
                gap = (upper - lower) / upper if upper > 0 else float("inf")
            history.append((n_done, upper, lower))
            if gap <= max(config.gap_rtol, config.gap_accept):
                stabilized = True
                break
            stalled = prev_upper is not None and abs(upper - prev_upper) <= (
                config.stab_rtol * abs(upper)
            )
            if stalled and not np.isfinite(lower):
                stabilized = True
                break
            prev_upper = upper
            nu_acc[:] = 0.0
            om_acc[:] = 0.0
            lam_acc = 0.0
            next_checkpoint *= 2

    certified = np.isfinite(lower)
    value = lower if certified else upper
    gap = (upper - lower) / upper if certified and upper > 0 else float("inf")
    max_residual = residuals(polished, cache).max_constraint
    return SdrEstimate(
        value=value,
        upper=upper,
        gap=gap,
        certified=bool(certified),
        reliable=bool(
            polish_ok
            and certified
            and max_residual <= config.tol
            and gap <= config.gap_accept
        ),
        stabilized=stabilized,
        max_residual=max_residual,
        iterations=n_done,
        history=tuple(history),
    )
