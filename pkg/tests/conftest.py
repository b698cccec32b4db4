"""Shared helpers: random Hermitian / PSD tuple factories."""

import numpy as np
import pytest


def random_hermitian_tuple(rng, m, n, scale=1.0):
    """Random tuple of Hermitian matrices with mixed-sign spectra."""
    a = rng.normal(size=(m, n, n)) + 1j * rng.normal(size=(m, n, n))
    return scale * (a + np.conj(np.swapaxes(a, -1, -2))) / 2.0


def random_psd_tuple(rng, m, n, rank=None, scale=1.0):
    r = n if rank is None else rank
    b = rng.normal(size=(m, n, r)) + 1j * rng.normal(size=(m, n, r))
    return scale * np.einsum("mir,mjr->mij", b, np.conj(b))


def random_unit_vector(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
