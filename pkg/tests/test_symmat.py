import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcprox.symmat import (
    InvalidInput,
    NotPd,
    NotPsd,
    frob_inner,
    inv_pd,
    logdet_pd,
    sym_eig,
    sym_sqrt,
    symmetrize,
)
from dcprox.checks import random_psd, random_spd, random_sym


def test_symmetrize_rejects_skew():
    m = np.array([[1.0, 2.0], [1.0, 1.0]])
    with pytest.raises(InvalidInput):
        symmetrize(m)


def test_symmetrize_rejects_nonfinite():
    with pytest.raises(InvalidInput):
        symmetrize(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(InvalidInput):
        symmetrize(np.ones((2, 3)))


def test_symmetrize_exact_output():
    m = np.array([[1.0, 2.0 + 1e-14], [2.0, 3.0]])
    s = symmetrize(m)
    assert np.array_equal(s, s.T)


def test_sym_eig_diagonal():
    q, lam = sym_eig(np.diag([3.0, 1.0]))
    assert np.allclose(lam, [3.0, 1.0])
    assert np.allclose(np.abs(q), np.eye(2))


def test_sym_eig_classic_2x2():
    q, lam = sym_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(lam, [1.0, -1.0])
    r = 1.0 / math.sqrt(2.0)
    assert np.allclose(np.abs(q[:, 0]), [r, r])
    assert np.allclose(np.abs(q[:, 1]), [r, r])
    assert np.allclose(q[:, 0] @ q[:, 1], 0.0)


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 10**6), st.integers(1, 8))
def test_sym_eig_reconstruction_property(seed, n):
    m = random_sym(np.random.default_rng(seed), n, scale=2.0)
    q, lam = sym_eig(m)
    assert np.all(np.diff(lam) <= 1e-12)
    assert np.linalg.norm(q.T @ q - np.eye(n), "fro") <= 1e-10 * n
    assert (np.linalg.norm((q * lam) @ q.T - m, "fro")
            <= 1e-9 * (1.0 + np.linalg.norm(m, "fro")))


def test_sym_eig_reconstruction_5x5(rng):
    m = random_sym(rng, 5, scale=3.0)
    q, lam = sym_eig(m)
    assert np.linalg.norm((q * lam) @ q.T - m, "fro") <= 1e-9


def test_sym_sqrt_identity_and_diagonal():
    assert np.allclose(sym_sqrt(np.eye(3)), np.eye(3))
    assert np.allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_sym_sqrt_squares_random(rng):
    m = random_psd(rng, 4)
    r = sym_sqrt(m)
    assert np.linalg.norm(r @ r - m, "fro") <= 1e-8 * (1.0 + np.linalg.norm(m, "fro"))
    assert np.linalg.eigvalsh(r).min() >= -1e-12


def test_sym_sqrt_clamps_roundoff(rng):
    m = random_psd(rng, 3)
    m = m - 1e-12 * np.eye(3)  # round-off scale indefiniteness
    r = sym_sqrt(m)
    assert np.all(np.isfinite(r))


def test_sym_sqrt_rejects_indefinite():
    with pytest.raises(NotPsd):
        sym_sqrt(np.diag([1.0, -1.0]))


def test_logdet_identity_any_n():
    for n in (1, 2, 5):
        assert logdet_pd(np.eye(n)) == pytest.approx(0.0, abs=1e-14)


def test_logdet_log_rules():
    m = np.diag([math.e, math.e**2])
    assert logdet_pd(m) == pytest.approx(3.0, abs=1e-12)


def test_logdet_matches_eigenvalue_sum(rng):
    m = random_spd(rng, 6, cond=30.0)
    lam = np.linalg.eigvalsh(m)
    assert logdet_pd(m) == pytest.approx(np.sum(np.log(lam)), rel=1e-9)


def test_logdet_rejects_indefinite():
    with pytest.raises(NotPd):
        logdet_pd(np.diag([1.0, -2.0]))


@settings(deadline=None, max_examples=30)
@given(st.integers(0, 10**6), st.integers(1, 7))
def test_logdet_inverse_identity(seed, n):
    m = random_spd(np.random.default_rng(seed), n, cond=40.0)
    assert abs(logdet_pd(m) + logdet_pd(inv_pd(m))) <= 1e-8


def test_inv_pd_examples(rng):
    assert np.allclose(inv_pd(np.eye(3)), np.eye(3))
    assert np.allclose(inv_pd(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))
    m = random_spd(rng, 5, cond=20.0)
    n = m.shape[0]
    assert np.linalg.norm(m @ inv_pd(m) - np.eye(n), "fro") <= 1e-8 * n
    inv = inv_pd(m)
    assert np.array_equal(inv, inv.T)


def test_inv_pd_rejects_singular():
    with pytest.raises(NotPd):
        inv_pd(np.zeros((2, 2)))


def test_frob_inner_examples(rng):
    assert frob_inner(np.eye(3), np.eye(3)) == pytest.approx(3.0)
    assert frob_inner(np.diag([1.0, 2.0]), np.diag([3.0, 4.0])) == pytest.approx(11.0)
    a = random_sym(rng, 4)
    b = random_sym(rng, 4)
    assert frob_inner(a, b) == pytest.approx(np.trace(a @ b), rel=1e-12)
    assert frob_inner(a, b) == pytest.approx(frob_inner(b, a))


def test_frob_inner_dimension_mismatch():
    with pytest.raises(InvalidInput):
        frob_inner(np.eye(2), np.eye(3))
