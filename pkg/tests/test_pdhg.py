import math

import numpy as np
import pytest

from dcprox import cones, problems
from dcprox.pdhg import (
    LinearMapSpec,
    NoConvergence,
    PdhgConfig,
    PdhgState,
    SubproblemSpec,
    identity_map,
    pdhg_solve,
    residual,
    stepsize_init,
    tuple_norm,
)
from dcprox.checks import (
    dykstra_projection,
    intersection_projection_spec,
    projected_gradient,
    random_psd,
    random_spd,
    random_sym,
)
from dcprox.symmat import frob_inner, inv_pd, logdet_pd


def _noop(*args):
    raise AssertionError("not meant to be called")


def _dummy_spec(kernels, box, lmap=None):
    return SubproblemSpec(primal_prox=_noop, dual_prox=_noop,
                          map=lmap or identity_map(), objective=_noop,
                          kernels=kernels, box_upper=box,
                          initial_primal=box, dual_signs=(0,) * len(box),
                          feasibility=lambda u, t: True)


# ---------------------------------------------------------------------------
# stepsizes


def test_stepsize_euclidean_identity_map():
    spec = _dummy_spec((cones.EUCLIDEAN,), (np.eye(2),))
    tau, sigma = stepsize_init(spec, spec.box_upper)
    assert tau == pytest.approx(0.95)
    assert sigma == pytest.approx(0.95)


def test_stepsize_euclidean_difference_map():
    lmap = LinearMapSpec(forward=lambda u: (u[1] - u[0],),
                         adjoint=lambda v: (-v[0], v[0]),
                         norm_bound=math.sqrt(2.0))
    spec = _dummy_spec((cones.EUCLIDEAN, cones.EUCLIDEAN),
                       (np.eye(2), np.eye(2)), lmap)
    tau, _ = stepsize_init(spec, spec.box_upper)
    assert tau == pytest.approx(0.95 / math.sqrt(2.0))


def test_stepsize_logdet_kernel():
    spec = _dummy_spec((cones.logdet_shifted(np.eye(3)),), (np.eye(3),))
    tau, sigma = stepsize_init(spec, spec.box_upper)
    assert tau == pytest.approx(0.475)
    assert sigma == pytest.approx(0.475)


def test_difference_map_norm_bound_via_power_iteration(rng):
    # ||A(U, W) = W - U|| should be sqrt(2) in the Frobenius geometry
    lmap = LinearMapSpec(forward=lambda u: (u[1] - u[0],),
                         adjoint=lambda v: (-v[0], v[0]),
                         norm_bound=math.sqrt(2.0))
    u = (random_sym(rng, 3), random_sym(rng, 3))
    for _ in range(200):
        v = lmap.forward(u)
        u = lmap.adjoint(v)
        nrm = tuple_norm(u)
        u = tuple(b / nrm for b in u)
    est = tuple_norm(lmap.forward(u)) / tuple_norm(u)
    assert est == pytest.approx(math.sqrt(2.0), rel=1e-6)
    assert est <= lmap.norm_bound * (1 + 1e-9)


# ---------------------------------------------------------------------------
# adjoint consistency of every problem map


@pytest.mark.parametrize("kind", problems.KINDS)
@pytest.mark.parametrize("variant", problems.VARIANTS)
def test_map_adjoint_consistency(rng, kind, variant):
    inst = problems.gen_synthetic(kind, 4, seed=11, cond=3.0)
    prog = problems.build_program(inst, variant)
    spec = prog.build_subproblem(prog.feasible_start())
    for _ in range(5):
        u = tuple(random_sym(rng, b.shape[0]) for b in spec.initial_primal)
        v = tuple(random_sym(rng, b.shape[0]) for b in spec.map.forward(u))
        lhs = sum(frob_inner(vb, ab) for vb, ab in zip(v, spec.map.forward(u)))
        rhs = sum(frob_inner(ab, ub) for ab, ub in zip(spec.map.adjoint(v), u))
        assert abs(lhs - rhs) <= 1e-10 * tuple_norm(u) * tuple_norm(v)
        assert lhs <= spec.map.norm_bound * tuple_norm(u) * tuple_norm(v) * (1 + 1e-10)


# ---------------------------------------------------------------------------
# residual


def test_residual_identical_states_is_zero():
    u = (np.eye(2),)
    v = (np.zeros((2, 2)),)
    cfg = PdhgConfig(tau=0.5, sigma=0.5)
    assert residual(PdhgState(u, v), PdhgState(u, v), cfg) == 0.0


def test_residual_formula_single_block():
    u0 = (np.zeros((2, 2)),)
    delta = np.diag([0.3, 0.4])
    v = (np.zeros((2, 2)),)
    cfg = PdhgConfig(tau=1.0, sigma=1.0)
    r = residual(PdhgState((u0[0] + delta,), v), PdhgState(u0, v), cfg)
    assert r == pytest.approx(np.linalg.norm(delta, "fro") / 1.0)


def test_residual_scales_linearly(rng):
    u = (random_sym(rng, 3),)
    v = (random_sym(rng, 3),)
    du = (random_sym(rng, 3),)
    dv = (random_sym(rng, 3),)
    cfg = PdhgConfig(tau=0.7, sigma=0.3)
    r1 = residual(PdhgState((u[0] + du[0],), (v[0] + dv[0],)),
                  PdhgState(u, v), cfg)
    r2 = residual(PdhgState((u[0] + 2 * du[0],), (v[0] + 2 * dv[0],)),
                  PdhgState(u, v), cfg)
    assert r2 == pytest.approx(2.0 * r1, rel=1e-12)


# ---------------------------------------------------------------------------
# engine behavior on known problems


def test_intersection_projection_matches_dykstra(rng):
    for n in (2, 3, 4):
        a = random_sym(rng, n, 2.0)
        cap = random_psd(rng, n) + 0.05 * np.eye(n)
        spec = intersection_projection_spec(a, cap)
        state, stats = pdhg_solve(spec, PdhgConfig(max_iters=5000, tol=1e-9))
        oracle = dykstra_projection(a, cones.project_psd,
                                    lambda m: cones.project_cap(m, cap), 4000)
        assert stats.converged
        assert np.linalg.norm(state.u[0] - oracle, "fro") <= 1e-6


def test_inactive_constraints_converge_to_unconstrained_min(rng):
    # F = 0.5||u - a||^2 with a strictly inside S+ and far below the cap:
    # the solution is a itself and the dual vanishes.
    n = 3
    a = random_psd(rng, n) + 0.5 * np.eye(n)
    cap = 50.0 * np.eye(n)
    spec = intersection_projection_spec(a, cap)
    state, stats = pdhg_solve(spec, PdhgConfig(max_iters=4000, tol=1e-11))
    assert stats.converged
    assert np.linalg.norm(state.u[0] - a, "fro") <= 1e-8
    assert tuple_norm(state.v) <= 1e-8


def test_bc_private_subproblem_matches_pg_oracle(rng):
    inst = problems.gen_synthetic("bc-private", 3, seed=5, cond=3.0)
    prog = problems.build_program(inst, "bregman")
    x0 = prog.feasible_start()
    spec = prog.build_subproblem(x0)
    state, stats = pdhg_solve(spec, PdhgConfig(tol=1e-10, max_iters=60000))
    assert stats.converged

    s1, cap = inst.sigma1, inst.cap
    frozen = inst.lam * inv_pd(x0[0] + inst.sigma2)

    def obj(x):
        try:
            return -logdet_pd(x + s1) + frob_inner(frozen, x)
        except Exception:
            return math.inf

    def grad(x):
        return -inv_pd(x + s1) + frozen

    def project(x):
        return dykstra_projection(0.5 * (x + x.T), cones.project_psd,
                                  lambda m: cones.project_cap(m, cap), 50)

    x_pg = projected_gradient(grad, project, 0.5 * cap, 5000, obj)
    assert abs(spec.objective(state.u) - obj(x_pg)) <= 1e-5 * (1 + abs(obj(x_pg)))


def test_returned_iterate_feasible_at_tight_tol(rng):
    for kind in problems.KINDS:
        inst = problems.gen_synthetic(kind, 5, seed=8, cond=3.0)
        prog = problems.build_program(inst, "bregman")
        x0 = prog.feasible_start()
        spec = prog.build_subproblem(x0)
        state, stats = pdhg_solve(spec, PdhgConfig(tol=1e-7, max_iters=60000))
        assert stats.converged
        x = spec.from_subproblem_vars(state.u)
        assert prog.feasibility_check(x, 1e-6), kind


def test_dual_sign_patterns_debug(rng):
    for kind in problems.KINDS:
        for variant in problems.VARIANTS:
            inst = problems.gen_synthetic(kind, 5, seed=3, cond=3.0)
            prog = problems.build_program(inst, variant)
            spec = prog.build_subproblem(prog.feasible_start())
            state, stats = pdhg_solve(spec, PdhgConfig(tol=1e-8, max_iters=60000,
                                                       debug=True))
            assert stats.sign_violations == 0, (kind, variant)


def test_warm_start_dominance(rng):
    # Warm-starting the second subproblem from the first one's state should
    # essentially never take more inner iterations than a cold start.
    wins = 0
    for seed in range(1, 11):
        inst = problems.gen_synthetic("bc-private", 6, seed=seed, cond=4.0)
        prog = problems.build_program(inst, "bregman")
        x0 = prog.feasible_start()
        spec0 = prog.build_subproblem(x0)
        cfg = PdhgConfig(tol=1e-7, max_iters=60000)
        state0, _ = pdhg_solve(spec0, cfg)
        x1 = spec0.from_subproblem_vars(state0.u)
        spec1 = prog.build_subproblem(x1)
        _, cold = pdhg_solve(spec1, cfg)
        _, warm = pdhg_solve(spec1, cfg, warm=state0)
        if warm.iterations <= cold.iterations:
            wins += 1
    assert wins >= 9


def test_safeguard_restarts_recover_from_bad_stepsizes():
    # Understate the operator norm so the nominal stepsizes violate the
    # product rule; the divergence safeguard must shrink them and still
    # finish (or give up with NoConvergence after the restart budget).
    rng = np.random.default_rng(1)
    a = random_sym(rng, 3, 2.0)
    cap = random_psd(rng, 3) + 0.05 * np.eye(3)
    spec = intersection_projection_spec(a, cap)
    cfg = PdhgConfig(tau=40.0, sigma=40.0, max_iters=60000, tol=1e-8,
                     growth_window=20)
    try:
        state, stats = pdhg_solve(spec, cfg)
    except NoConvergence:
        return
    assert stats.restarts >= 1
    assert stats.converged
    oracle = dykstra_projection(a, cones.project_psd,
                                lambda m: cones.project_cap(m, cap), 4000)
    assert np.linalg.norm(state.u[0] - oracle, "fro") <= 1e-5
