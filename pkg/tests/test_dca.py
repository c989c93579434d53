import math

import numpy as np
import pytest

from dcprox import problems
from dcprox.dca import DcaTrace, dca_solve, linearized_objective, objective
from dcprox.diagnostics import sufficient_decrease_gap
from dcprox.pdhg import PdhgConfig, SubproblemSpec, identity_map
from dcprox.checks import random_psd, random_sym, scalar_box_dc_program


def _scalar_quadratic_program():
    # g(x) = x^2, h(x) = 4x over [0, 1]
    return scalar_box_dc_program(
        g_curv=1.0, h_slope_at=lambda x: 4.0,
        eval_g=lambda x: x * x, eval_h=lambda x: 4.0 * x,
        lower=0.0, upper=1.0, start=0.5)


def test_scalar_dca_one_step_to_boundary():
    prog = _scalar_quadratic_program()
    trace = dca_solve(prog, outer_tol=1e-10, max_outer=20,
                      inner_cfg=PdhgConfig(tol=1e-12, max_iters=20000))
    assert trace.status == "Converged"
    # x^2 - 4x over [0, 1] is minimized at the cap after one linearization
    assert trace.iterates[1][0][0, 0] == pytest.approx(1.0, abs=1e-8)
    assert trace.objectives[-1] == pytest.approx(-3.0, abs=1e-8)


def test_scalar_dca_concave_fixed_point():
    prog = scalar_box_dc_program(
        g_curv=0.0, h_slope_at=lambda x: 2.0 * x,
        eval_g=lambda x: 0.0, eval_h=lambda x: x * x,
        lower=-1.0, upper=1.0, start=0.3)
    trace = dca_solve(prog, outer_tol=1e-10, max_outer=20,
                      inner_cfg=PdhgConfig(tol=1e-12, max_iters=20000))
    assert trace.iterates[1][0][0, 0] == pytest.approx(1.0, abs=1e-8)
    # fixed point: stays at 1
    assert trace.iterates[-1][0][0, 0] == pytest.approx(1.0, abs=1e-8)
    assert trace.objectives[-1] == pytest.approx(-1.0, abs=1e-8)


def test_effectively_unconstrained_bc_private_goes_to_zero():
    # With sigma1 = sigma2 and lam > 1 the objective is (lam-1) log det(X+S),
    # increasing in X, so the minimizer over 0 <= X <= 10^6 I is X = 0.
    n = 3
    rng = np.random.default_rng(9)
    s = problems._random_spd(rng, n, 3.0)
    inst = problems.BcPrivateInstance(sigma1=s.copy(), sigma2=s.copy(),
                                      cap=1e6 * np.eye(n), lam=2.0,
                                      meta={"kind": "bc-private", "n": n,
                                            "seed": -1, "cond": 3.0})
    prog = problems.bc_private_program(inst)
    # the box-based stepsize rule is uselessly conservative for a 1e6 cap;
    # override with unit-scale steps (the cap never activates)
    trace = dca_solve(prog, outer_tol=1e-10, max_outer=80,
                      inner_cfg=PdhgConfig(tau=0.9, sigma=0.9, tol=1e-10,
                                           max_iters=20000))
    assert trace.status == "Converged"
    assert np.linalg.norm(trace.iterates[-1][0], "fro") <= 1e-6
    assert trace.objectives[-1] == pytest.approx(
        (inst.lam - 1.0) * np.linalg.slogdet(s)[1], abs=1e-6)


def test_linearized_objective_tangency_and_majorization(rng):
    inst = problems.gen_synthetic("bc-private", 4, seed=6, cond=3.0)
    prog = problems.build_program(inst)
    x_k = prog.feasible_start()
    f_xk = objective(prog, x_k)
    assert linearized_objective(prog, x_k, x_k) == pytest.approx(f_xk, abs=1e-9)
    for _ in range(10):
        u = (problems._project_box(random_psd(rng, 4), inst.cap),)
        assert linearized_objective(prog, x_k, u) >= objective(prog, u) - 1e-9


def test_linearized_objective_scalar_example():
    # h(x) = x^2, x_k = 1, u = 0, g = 0: surrogate = -(1 + 2(0-1)) = 1 >= f(0)
    prog = scalar_box_dc_program(
        g_curv=0.0, h_slope_at=lambda x: 2.0 * x,
        eval_g=lambda x: 0.0, eval_h=lambda x: x * x,
        lower=-1.0, upper=1.0, start=0.3)
    x_k = (np.array([[1.0]]),)
    u = (np.array([[0.0]]),)
    assert linearized_objective(prog, x_k, u) == pytest.approx(1.0)
    assert objective(prog, u) == pytest.approx(0.0)


@pytest.mark.parametrize("kind", problems.KINDS)
def test_monotone_descent_and_sufficient_decrease_small(kind):
    inst = problems.gen_synthetic(kind, 6, seed=7, cond=3.0)
    prog = problems.build_program(inst)
    trace = dca_solve(prog, outer_tol=1e-8, max_outer=100,
                      inner_cfg=PdhgConfig(tol=1e-8, max_iters=60000))
    assert trace.status in ("Converged", "Flagged")
    assert not trace.flags
    for k in range(len(trace.objectives) - 1):
        slack = 10.0 * trace.inner_tols[k]
        assert trace.objectives[k + 1] <= trace.objectives[k] + slack
        gap = sufficient_decrease_gap(prog, trace.iterates[k],
                                      trace.iterates[k + 1])
        assert gap >= -slack
    # recorded iterates stay feasible
    for x in trace.iterates:
        assert prog.feasibility_check(x, 1e-6)


def test_warm_start_carries_between_outer_steps():
    inst = problems.gen_synthetic("bc-private", 8, seed=2, cond=4.0)
    prog = problems.build_program(inst)
    trace = dca_solve(prog, outer_tol=1e-8, max_outer=60,
                      inner_cfg=PdhgConfig(tol=1e-8, max_iters=60000))
    assert trace.status == "Converged"
    # later warm-started subproblems need far less work than the first
    assert min(trace.inner_iters[1:]) < trace.inner_iters[0]


def test_inner_tolerance_schedule():
    inst = problems.gen_synthetic("bc-private", 6, seed=3, cond=3.0)
    prog = problems.build_program(inst)
    trace = dca_solve(prog, outer_tol=1e-12, max_outer=12,
                      inner_cfg=PdhgConfig(tol=1e-8, max_iters=60000))
    tols = trace.inner_tols
    assert tols[0] == pytest.approx(1e-4)
    for k in range(1, len(tols)):
        assert tols[k] <= tols[k - 1] + 1e-16
        assert tols[k] >= 1e-8 - 1e-20
    if len(tols) >= 8:
        assert tols[7] == pytest.approx(1e-8)


def test_failed_inner_solver_aborts_with_partial_trace():
    # A fabricated subproblem whose iterates blow up: the safeguard runs out
    # of restarts and the outer loop must abort with a Failed status.
    def build(x_k):
        def primal_prox(u, astar_v, tau, cache):
            return (2.0 * u[0] + np.eye(2),), None

        def dual_prox(z, sigma):
            return (z[0],)

        return SubproblemSpec(
            primal_prox=primal_prox, dual_prox=dual_prox, map=identity_map(),
            objective=lambda u: 0.0, kernels=(None,),
            box_upper=(np.eye(2),), initial_primal=(x_k[0].copy(),),
            dual_signs=(0,), feasibility=lambda u, t: True)

    from dcprox.dca import DcProgram
    prog = DcProgram(
        eval_g=lambda x: float(np.trace(x[0])),
        eval_h=lambda x: 0.0,
        grad_g=lambda x: (np.eye(2),),
        grad_h=lambda x: (np.zeros((2, 2)),),
        build_subproblem=build,
        feasible_start=lambda: (np.eye(2),),
        feasibility_check=lambda x, t: True,
        feasibility_residual=lambda x: 0.0,
        name="diverging")
    trace = dca_solve(prog, outer_tol=1e-8, max_outer=5,
                      inner_cfg=PdhgConfig(tau=1.0, sigma=1.0, tol=1e-10,
                                           max_iters=10000, growth_window=10))
    assert trace.status == "Failed"
    assert trace.flags
    assert len(trace.objectives) >= 1


def test_outer_tol_validation():
    prog = _scalar_quadratic_program()
    with pytest.raises(ValueError):
        dca_solve(prog, outer_tol=0.0)
