import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcprox import cones
from dcprox.cones import (
    EUCLIDEAN,
    OutOfDomain,
    Unbounded,
    bregman_distance,
    logdet_barrier,
    logdet_shifted,
    project_cap,
    project_psd,
    prox_conj_indicator,
    prox_logdet_barrier,
    prox_logdet_cap,
    prox_logdet_psd,
    prox_logdet_quadratic,
    strong_convexity_bound,
)
from dcprox.symmat import NotPd, frob_inner, inv_pd, logdet_pd
from dcprox.checks import (
    projected_gradient,
    prox_cap_kkt_residual,
    prox_psd_kkt_residual,
    random_psd,
    random_spd,
    random_sym,
)


# ---------------------------------------------------------------------------
# projections


def test_project_psd_examples():
    assert np.allclose(project_psd(np.diag([1.0, -2.0])), np.diag([1.0, 0.0]))


def test_project_psd_idempotent_on_cone(rng):
    m = random_psd(rng, 4)
    assert np.linalg.norm(project_psd(m) - m, "fro") <= 1e-10


def test_project_psd_is_nearest_point(rng):
    m = random_sym(rng, 4, 2.0)
    proj = project_psd(m)
    dist = np.linalg.norm(proj - m, "fro")
    for _ in range(1000):
        cand = random_psd(rng, 4, scale=rng.uniform(0.2, 2.0))
        assert np.linalg.norm(cand - m, "fro") >= dist - 1e-10


def test_project_cap_examples(rng):
    assert project_cap(np.array([[3.0]]), np.array([[0.0]])) == pytest.approx(0.0)
    cap = random_psd(rng, 3) + 0.5 * np.eye(3)
    inside = cap - random_psd(rng, 3, scale=0.1)
    assert np.linalg.norm(project_cap(inside, cap) - inside, "fro") <= 1e-10
    m = random_sym(rng, 3, 2.0)
    assert np.allclose(project_cap(m, cap), cap - project_psd(cap - m))


def test_project_cap_dimension_mismatch():
    with pytest.raises(ValueError):
        project_cap(np.eye(2), np.eye(3))


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_projection_idempotence_property(seed, n):
    r = np.random.default_rng(seed)
    m = random_sym(r, n, 2.0)
    cap = random_psd(r, n)
    p1 = project_psd(m)
    p2 = project_cap(m, cap)
    assert np.linalg.norm(project_psd(p1) - p1, "fro") <= 1e-10 * (1 + np.linalg.norm(p1))
    assert np.linalg.norm(project_cap(p2, cap) - p2, "fro") <= 1e-10 * (1 + np.linalg.norm(p2))


def test_obtuse_angle_property(rng):
    n = 4
    m = random_sym(rng, n, 2.0)
    cap = random_psd(rng, n) + 0.1 * np.eye(n)
    p_psd = project_psd(m)
    p_cap = project_cap(m, cap)
    for _ in range(100):
        feas = random_psd(rng, n)
        assert frob_inner(m - p_psd, feas - p_psd) <= 1e-8 * (1 + np.linalg.norm(m))
        feas2 = cap - random_psd(rng, n)
        assert frob_inner(m - p_cap, feas2 - p_cap) <= 1e-8 * (1 + np.linalg.norm(m))


# ---------------------------------------------------------------------------
# conjugate-indicator prox


def test_prox_conj_indicator_zero_inside(rng):
    cap = random_psd(rng, 3) + np.eye(3)
    z = 0.1 * (cap - 0.5 * np.eye(3))  # z/sigma well inside the cap set
    out = prox_conj_indicator(z, 1.0, lambda m: project_cap(m, cap))
    assert np.linalg.norm(out, "fro") <= 1e-12


def test_prox_conj_indicator_scalar_moreau():
    # cap set {x <= 1}, sigma = 1, z = 3: prox = z - proj(z) = 2
    out = prox_conj_indicator(np.array([[3.0]]), 1.0,
                              lambda m: project_cap(m, np.array([[1.0]])))
    assert out[0, 0] == pytest.approx(2.0)


def test_prox_conj_indicator_moreau_identity(rng):
    cap = random_psd(rng, 3)
    for sigma in (0.4, 1.0, 2.5):
        z = random_sym(rng, 3, 3.0)
        prox = prox_conj_indicator(z, sigma, lambda m: project_cap(m, cap))
        assert np.allclose(prox + sigma * project_cap(z / sigma, cap), z)
        assert np.linalg.eigvalsh(prox).min() >= -1e-9
        prox2 = prox_conj_indicator(z, sigma, project_psd)
        assert np.linalg.eigvalsh(prox2).max() <= 1e-9


def test_prox_conj_indicator_rejects_bad_sigma():
    with pytest.raises(ValueError):
        prox_conj_indicator(np.eye(2), 0.0, project_psd)


# ---------------------------------------------------------------------------
# closed-form log-det proxes: spec scalar examples


def test_prox_logdet_psd_scalar_cases():
    # -log(x+2) + x/4 minimized over x >= 0 at x = 2
    out = prox_logdet_psd(np.array([[0.25]]), np.array([[2.0]]), 1.0)
    assert out[0, 0] == pytest.approx(2.0, abs=1e-12)
    # clamp branch: gamma = 2 > 1 -> 0
    assert np.allclose(prox_logdet_psd(2.0 * np.eye(2), np.eye(2), 1.0), 0.0)
    # gamma = 1/2 -> psi = 1 -> identity
    assert np.allclose(prox_logdet_psd(0.5 * np.eye(3), np.eye(3), 1.0), np.eye(3))


def test_prox_logdet_psd_unbounded():
    with pytest.raises(Unbounded):
        prox_logdet_psd(np.diag([1.0, -0.5]), np.eye(2), 1.0)


def test_prox_logdet_cap_scalar_cases():
    s = np.array([[1.0]])
    c = np.array([[1.0]])
    # gamma = 1/2 <= 1 -> lands on the cap
    assert prox_logdet_cap(np.array([[0.25]]), s, c, 1.0)[0, 0] == pytest.approx(1.0)
    # -log(x+1) + x minimized over x <= 1 at x = 0
    assert prox_logdet_cap(np.array([[1.0]]), s, c, 1.0)[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_prox_logdet_cap_threshold_lands_on_cap(rng):
    sigma = random_spd(rng, 3, 4.0)
    cap = random_psd(rng, 3) + 0.2 * np.eye(3)
    c = 1.7
    a = c * inv_pd(cap + sigma)
    out = prox_logdet_cap(a, sigma, cap, c)
    assert np.linalg.norm(out - cap, "fro") <= 1e-8 * (1 + np.linalg.norm(cap))


def test_prox_logdet_cap_indefinite_operand(rng):
    sigma = random_spd(rng, 4, 3.0)
    cap = random_psd(rng, 4) + 0.3 * np.eye(4)
    a = random_sym(rng, 4, 1.0)  # indefinite
    out = prox_logdet_cap(a, sigma, cap, 1.3)
    assert np.linalg.eigvalsh(cap - out).min() >= -1e-9
    assert np.linalg.eigvalsh(out + sigma).min() > 0
    assert prox_cap_kkt_residual(out, a, sigma, cap, 1.3) <= 1e-7


def test_prox_logdet_barrier_cases(rng):
    assert np.allclose(prox_logdet_barrier(np.eye(2), 1.0), np.eye(2))
    assert np.allclose(prox_logdet_barrier(np.diag([2.0, 4.0]), 2.0),
                       np.diag([1.0, 0.5]))
    b = random_spd(rng, 5, 10.0)
    u = prox_logdet_barrier(b, 1.4)
    assert (np.linalg.norm(b - 1.4 * inv_pd(u), "fro")
            <= 1e-9 * (1 + np.linalg.norm(b, "fro")))


def test_prox_logdet_barrier_unbounded():
    with pytest.raises(Unbounded):
        prox_logdet_barrier(np.diag([1.0, 0.0]), 1.0)


def test_prox_logdet_quadratic_stationarity(rng):
    p = random_sym(rng, 4, 2.0)
    shift = random_spd(rng, 4, 3.0)
    for c, t in ((1.0, 0.7), (2.5, 0.2)):
        x = prox_logdet_quadratic(p, c, t, shift)
        grad = -c * inv_pd(x + shift) + (x - p) / t
        assert np.linalg.norm(grad, "fro") <= 1e-9 * (1 + np.linalg.norm(p))
    # c = 0 degenerates to the identity map
    assert np.allclose(prox_logdet_quadratic(p, 0.0, 0.5, shift), p)


# ---------------------------------------------------------------------------
# prox vs projected-gradient oracle (small; the full battery is acceptance)


def test_prox_psd_matches_pg_oracle(rng):
    for n in (1, 2, 3):
        sigma = random_spd(rng, n, 5.0)
        a = random_spd(rng, n, 4.0) * 0.7
        c = 1.3
        x_cf = prox_logdet_psd(a, sigma, c)

        def obj(x):
            try:
                return -c * logdet_pd(x + sigma) + frob_inner(a, x)
            except Exception:
                return math.inf

        x_pg = projected_gradient(lambda x: -c * inv_pd(x + sigma) + a,
                                  project_psd, np.eye(n), 4000, obj)
        assert abs(obj(x_cf) - obj(x_pg)) <= 1e-6 * (1 + abs(obj(x_pg)))
        assert prox_psd_kkt_residual(x_cf, a, sigma, c) <= 1e-7


def test_prox_cap_large_cap_limit(rng):
    sigma = random_spd(rng, 3, 3.0)
    a = random_spd(rng, 3, 2.0) * 0.2
    c = 0.9
    unconstrained = c * inv_pd(a) - sigma
    out = prox_logdet_cap(a, sigma, 1e6 * np.eye(3), c)
    rel = (np.linalg.norm(out - unconstrained, "fro")
           / (1 + np.linalg.norm(unconstrained, "fro")))
    assert rel <= 1e-5


# ---------------------------------------------------------------------------
# kernels and Bregman distances


def test_kernel_spec_requires_pd_shift():
    with pytest.raises(NotPd):
        logdet_shifted(np.diag([1.0, 0.0]))


def test_bregman_distance_examples():
    x = np.eye(2)
    assert bregman_distance(EUCLIDEAN, x, x) == pytest.approx(0.0)
    assert bregman_distance(EUCLIDEAN, x, np.zeros((2, 2))) == pytest.approx(1.0)
    # scalar shifted kernel: d = -log 2 + log 1 + 1*1 = 1 - log 2
    k = logdet_shifted(np.array([[1.0]]))
    d = bregman_distance(k, np.array([[1.0]]), np.array([[0.0]]))
    assert d == pytest.approx(1.0 - math.log(2.0), abs=1e-12)


def test_bregman_distance_domain_error():
    k = logdet_barrier()
    with pytest.raises(OutOfDomain):
        bregman_distance(k, np.diag([1.0, -1.0]), np.eye(2))


def test_bregman_distance_nonnegative_zero_iff_equal(rng):
    sigma = random_spd(rng, 3, 3.0)
    k = logdet_shifted(sigma)
    x = random_psd(rng, 3)
    y = random_psd(rng, 3) + 0.1 * np.eye(3)
    assert bregman_distance(k, x, y) >= -1e-10
    assert bregman_distance(k, x, x) == pytest.approx(0.0, abs=1e-12)
    assert bregman_distance(k, x, y) > 1e-8  # distinct points, strictly convex


def test_bregman_distance_strong_convexity_lower_bound(rng):
    n = 3
    cap = random_psd(rng, n) + 0.2 * np.eye(n)
    sigma = random_spd(rng, n, 5.0)
    kern = logdet_shifted(sigma)
    m = strong_convexity_bound(kern, cap)
    for _ in range(30):
        x = project_psd(project_cap(random_psd(rng, n), cap))
        y = project_psd(project_cap(random_psd(rng, n), cap))
        d = bregman_distance(kern, x, y)
        lower = 0.5 * m * float(np.tensordot(x - y, x - y, axes=2))
        assert d >= lower - 1e-10


def test_strong_convexity_bound_values():
    assert strong_convexity_bound(EUCLIDEAN, np.eye(2)) == 1.0
    # lam_max(cap + shift) = 2 -> m = 1/4
    assert strong_convexity_bound(logdet_shifted(np.eye(2)), np.eye(2)) == pytest.approx(0.25)
    assert strong_convexity_bound(logdet_barrier(), 2.0 * np.eye(2)) == pytest.approx(0.25)
