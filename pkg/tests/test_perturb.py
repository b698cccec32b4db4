"""Perturbation machinery: shrinkage, truncation, and their combination.

The shrinkage oracle minimizes the proximal objective numerically over
the real parameters of a Hermitian matrix; the rank-one oracle samples
random matched-norm rank-one candidates.  Both are written before the
tests that rely on them.
"""

import numpy as np
import pytest

from pocsbeam import (
    norm,
    objective,
    perturbation,
    project_psd,
    project_rank_one,
    rank_distance,
    shrink,
    sigma_max,
    t_power,
)
from pocsbeam.hilbert import eig_tuple, svd_hermitian
from pocsbeam.perturb import numerical_rank, perturbation_from_psd_eig

from conftest import random_hermitian_tuple, random_psd_tuple, random_unit_vector
from oracles import prox_oracle


# ----------------------------------------------------------------- oracles


def nuclear_sum(x):
    """f of the perturbation target: summed nuclear norms of the tuple."""
    return float(np.abs(np.linalg.eigvalsh(x)).sum())


def psd_distance(x):
    return norm(x - project_psd(x))


# --------------------------------------------------------------- sigma_max


def test_sigma_max_zero():
    assert sigma_max(np.zeros((2, 3, 3), dtype=complex)) == 0.0


def test_sigma_max_diagonal():
    x = np.stack([np.diag([3.0, 1.0]), np.diag([5.0, 0.0])]).astype(complex)
    assert sigma_max(x) == pytest.approx(5.0)


def test_sigma_max_exhaustive_oracle(rng):
    x = random_hermitian_tuple(rng, 3, 4)
    best = max(svd_hermitian(x[m]).values[0] for m in range(3))
    assert sigma_max(x) == pytest.approx(best, rel=1e-12)


# ------------------------------------------------------------------ shrink


def test_shrink_diagonal_analytic():
    out = shrink(np.diag([3.0, 1.0]).astype(complex), 2.0)
    np.testing.assert_allclose(out, np.diag([1.0, 0.0]), atol=1e-12)


def test_shrink_zero_threshold(rng):
    a = random_hermitian_tuple(rng, 1, 3)[0]
    np.testing.assert_array_equal(shrink(a, 0.0), a)


def test_shrink_rejects_negative():
    with pytest.raises(ValueError):
        shrink(np.eye(2, dtype=complex), -0.1)


def test_shrink_matches_prox_oracle(rng):
    for _ in range(5):
        a = random_hermitian_tuple(rng, 1, 2)[0]
        ref = prox_oracle(a, 0.7)
        ours = shrink(a, 0.7)
        assert np.linalg.norm(ours - ref) <= 1e-5


def test_shrink_preserves_psd(rng):
    a = random_psd_tuple(rng, 1, 3)[0]
    out = shrink(a, 0.4)
    assert np.linalg.eigvalsh(out).min() >= -1e-12


# ----------------------------------------------------------------- t_power


def test_t_power_alpha_zero_identity(rng):
    x = random_hermitian_tuple(rng, 2, 3)
    np.testing.assert_array_equal(t_power(x, 0.0), x)


def test_t_power_alpha_one_annihilates(rng):
    x = random_hermitian_tuple(rng, 2, 3)
    np.testing.assert_allclose(t_power(x, 1.0), 0.0, atol=1e-12 * norm(x))


def test_t_power_diagonal_analytic():
    x = np.diag([2.0, 1.0]).astype(complex)[None]
    np.testing.assert_allclose(t_power(x, 0.5), np.diag([1.0, 0.0])[None], atol=1e-12)


def test_t_power_global_threshold():
    # The threshold is alpha times the tuple-wide top value, applied to
    # every component, not per component.
    x = np.stack([np.diag([4.0, 0.0]), np.diag([1.0, 0.0])]).astype(complex)
    out = t_power(x, 0.5)
    np.testing.assert_allclose(out[0], np.diag([2.0, 0.0]), atol=1e-12)
    np.testing.assert_allclose(out[1], np.zeros((2, 2)), atol=1e-12)


def test_t_power_rejects_negative(rng):
    with pytest.raises(ValueError):
        t_power(random_hermitian_tuple(rng, 1, 2), -0.5)


# --------------------------------------------------------- project_rank_one


def test_project_rank_one_fixed_on_rank_one(rng):
    u = random_unit_vector(rng, 4)
    x = 3.0 * np.outer(u, np.conj(u))[None]
    np.testing.assert_allclose(project_rank_one(x), x, atol=1e-12)


def test_project_rank_one_diagonal():
    x = np.diag([3.0, 1.0]).astype(complex)[None]
    np.testing.assert_allclose(project_rank_one(x), np.diag([3.0, 0.0])[None], atol=1e-12)


def test_project_rank_one_random_search_probe(rng):
    # No Hermitian rank-one candidate of matched norm from 1e5 samples
    # may beat the projection.
    x = random_hermitian_tuple(rng, 1, 3)
    p = project_rank_one(x)
    base = norm(x - p)
    s = norm(p)
    u = rng.normal(size=(10**5, 3)) + 1j * rng.normal(size=(10**5, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    quad = np.einsum("ci,ij,cj->c", np.conj(u), x[0], u).real
    # distance^2 to +/- s u u^H, minimized over the sign analytically
    d2 = norm(x) ** 2 - 2.0 * s * np.abs(quad) + s**2
    assert base**2 <= d2.min() + 1e-10


# ------------------------------------------------------------- perturbation


def test_perturbation_rank_one_alpha_zero(rng):
    u = random_unit_vector(rng, 3)
    x = np.stack([2.0 * np.outer(u, np.conj(u))])
    np.testing.assert_allclose(perturbation(x, 0.0), 0.0, atol=1e-12)


def test_perturbation_diagonal_analytic():
    x = np.diag([2.0, 1.0]).astype(complex)[None]
    np.testing.assert_allclose(
        perturbation(x, 0.5), np.diag([-1.0, -1.0])[None], atol=1e-12
    )


def test_perturbation_norm_bound_psd(rng):
    x = random_psd_tuple(rng, 2, 4)
    assert norm(perturbation(x, 0.3)) <= norm(x) * (1 + 1e-12)


def test_perturbation_rejects_negative(rng):
    with pytest.raises(ValueError):
        perturbation(random_hermitian_tuple(rng, 1, 2), -0.1)


def test_perturbation_from_psd_eig_consistency(rng):
    x = random_psd_tuple(rng, 3, 4)
    lam, vecs = eig_tuple(x)
    for alpha in (0.0, 0.3, 0.95):
        fast = perturbation_from_psd_eig(x, lam, vecs, alpha)
        slow = perturbation(x, alpha)
        assert norm(fast - slow) <= 1e-12 * max(norm(x), 1.0)


# ------------------------------------------------------- norm bound (full)


def test_norm_bound_mixed_spectra_alpha_grid(rng):
    # ||Y_alpha(X)|| <= ||X|| across the full alpha range, including
    # alpha > 1 where the shrinkage annihilates everything.
    for _ in range(50):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(2, 6))
        x = random_hermitian_tuple(rng, m, n, scale=float(rng.uniform(0.1, 10)))
        bound = norm(x) * (1 + 1e-12)
        for alpha in (0.0, 0.1, 0.5, 1.0, 1.7, 2.0):
            assert norm(perturbation(x, alpha)) <= bound


# --------------------------------------------- distance / objective effects


def test_psd_distance_never_increases(rng):
    for _ in range(20):
        x = random_hermitian_tuple(rng, 2, 3)
        y = perturbation(x, 0.5)
        d0 = psd_distance(x)
        for lam in (0.1, 0.5, 1.0):
            assert psd_distance(x + lam * y) <= d0 + 1e-10
    # PSD stays PSD under the perturbation step.
    x = random_psd_tuple(rng, 2, 3)
    y = perturbation(x, 0.5)
    for lam in (0.1, 0.5, 1.0):
        assert np.linalg.eigvalsh(x + lam * y).min() >= -1e-10


def test_nuclear_sum_strictly_decreases(rng):
    for _ in range(20):
        x = random_hermitian_tuple(rng, 2, 3)
        if nuclear_sum(x) <= 0:
            continue
        for alpha in (0.1, 0.5, 0.9):
            y = perturbation(x, alpha)
            for lam in (0.1, 0.5, 1.0):
                assert nuclear_sum(x + lam * y) < nuclear_sum(x) - 1e-10


def test_objective_strictly_decreases_on_psd(rng):
    for _ in range(20):
        x = random_psd_tuple(rng, 2, 3)
        if objective(x) <= 0:
            continue
        for alpha in (0.1, 0.5, 0.9):
            y = perturbation(x, alpha)
            for lam in (0.1, 0.5, 1.0):
                assert objective(x + lam * y) < objective(x) - 1e-10


def test_rank_distance_strictly_decreases(rng):
    for _ in range(20):
        x = random_hermitian_tuple(rng, 2, 3)
        if rank_distance(x) <= 1e-8:
            continue
        for alpha in (0.1, 0.5, 0.9):
            y = perturbation(x, alpha)
            for lam in (0.1, 0.5, 1.0):
                assert rank_distance(x + lam * y) < rank_distance(x) - 1e-10


# ------------------------------------------------------------ rank effects


def test_rank_never_increases_under_shrinkage(rng):
    for _ in range(20):
        x = random_psd_tuple(rng, 2, 4, rank=int(rng.integers(1, 5)))
        before = numerical_rank(x)
        after = numerical_rank(t_power(x, 0.3))
        assert np.all(after <= before)


def test_commutation_rank_one_and_shrinkage(rng):
    for _ in range(20):
        x = random_hermitian_tuple(rng, 2, 3)
        s = np.abs(np.linalg.eigvalsh(x))
        if np.any(np.diff(np.sort(s, axis=1)[:, -2:], axis=1) < 1e-3):
            continue  # degenerate top value: projection selection differs
        for alpha in (0.2, 0.6):
            left = project_rank_one(t_power(x, alpha))
            right = t_power(project_rank_one(x), alpha)
            assert norm(left - right) <= 1e-10 * max(norm(x), 1.0)


def test_rank_distance_matches_projection_route(rng):
    for _ in range(20):
        x = random_hermitian_tuple(rng, 2, 4)
        direct = rank_distance(x)
        via_projection = norm(x - project_rank_one(x))
        assert direct == pytest.approx(via_projection, rel=1e-8, abs=1e-10)


def test_numerical_rank_counts():
    x = np.stack([np.diag([1.0, 1e-12, 0.0]), np.diag([2.0, 1.0, 0.5])]).astype(complex)
    np.testing.assert_array_equal(numerical_rank(x), [1, 3])
