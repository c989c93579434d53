"""Named invariant suites behind the ``check`` CLI command.

Each check is a function ``rng -> list of violation strings`` registered
under a stable name.  The "fast" level covers the closed-form operators
against small numeric oracles plus the algebraic identities; "full" adds
the brute-force suites (larger instances, sampling oracles, end-to-end
solver properties).

The oracles here (projected gradient with backtracking, Dykstra's
alternating projections, dense grids) deliberately avoid the closed-form
code paths they are used to verify.
"""

from __future__ import annotations

import json
import math
import zlib
from typing import Callable, Dict, List

import numpy as np

from . import cones, diagnostics, problems
from .symmat import frob_inner, inv_pd, logdet_pd, sym_eig, symmetrize
from .pdhg import (
    LinearMapSpec,
    PdhgConfig,
    SubproblemSpec,
    identity_map,
    pdhg_solve,
    stepsize_init,
)
from .dca import DcProgram, dca_solve


# ---------------------------------------------------------------------------
# numeric oracles


def projected_gradient(grad: Callable, project: Callable, x0: np.ndarray,
                       iters: int = 5000, objective: Callable = None,
                       step0: float = 1.0) -> np.ndarray:
    """Projected gradient with Armijo backtracking.

    ``objective`` may return +inf outside the domain; the line search then
    shrinks until the trial point is admissible.  Independent of every
    closed-form prox in :mod:`dcprox.cones`.
    """
    x = np.array(x0, dtype=float)
    t = step0
    f_x = objective(x)
    for _ in range(iters):
        g = grad(x)
        accepted = False
        t_try = min(t * 2.0, 1e6)
        while t_try > 1e-18:
            cand = project(x - t_try * g)
            f_c = objective(cand)
            if math.isfinite(f_c) and f_c <= f_x - 1e-4 / t_try * float(
                    np.tensordot(cand - x, cand - x, axes=2)):
                accepted = True
                break
            t_try *= 0.5
        if not accepted:
            break
        x, f_x, t = cand, f_c, t_try
    return x


def dykstra_projection(a: np.ndarray, proj1: Callable, proj2: Callable,
                       iters: int = 2000) -> np.ndarray:
    """Dykstra's alternating projections onto the intersection of two sets."""
    x = np.array(a, dtype=float)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(iters):
        y = proj1(x + p)
        p = x + p - y
        x = proj2(y + q)
        q = y + q - x
    return x


def random_spd(rng: np.random.Generator, n: int, cond: float = 10.0) -> np.ndarray:
    return problems._random_spd(rng, n, cond)


def random_sym(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    m = rng.standard_normal((n, n)) * scale
    return 0.5 * (m + m.T)


def random_psd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((n, n)) * scale
    return symmetrize(g @ g.T / math.sqrt(n))


# ---------------------------------------------------------------------------
# scalar (1x1) DC programs used as hand-checkable end-to-end fixtures


def scalar_box_dc_program(g_curv: float, h_slope_at: Callable, eval_g, eval_h,
                          lower: float, upper: float,
                          start: float) -> DcProgram:
    """DC program on 1x1 matrices over the box [lower, upper].

    ``g`` must be ``g_curv * x^2`` plus a linear part folded into eval_g;
    the subproblem prox is the exact scalar minimizer over [lower, inf)
    with the cap handled by the dual block.
    """

    def _wrap(v):
        return (np.array([[float(v)]]),)

    def grad_g(x):
        return (np.array([[2.0 * g_curv * x[0][0, 0]]]),)

    def grad_h(x):
        return (np.array([[h_slope_at(x[0][0, 0])]]),)

    def feasible_start():
        return _wrap(start)

    def feas_res(x):
        v = x[0][0, 0]
        return max(0.0, lower - v, v - upper)

    def build(x_k):
        slope = h_slope_at(x_k[0][0, 0])

        def primal_prox(u, astar_v, tau, cache):
            w = u[0][0, 0]
            av = astar_v[0][0, 0]
            val = (w / tau + slope - av) / (2.0 * g_curv + 1.0 / tau)
            return _wrap(max(lower, val)), None

        def dual_prox(z, sigma):
            zv = z[0][0, 0]
            return _wrap(zv - sigma * min(zv / sigma, upper))

        def sub_objective(u):
            v = u[0][0, 0]
            return g_curv * v * v - slope * v

        return SubproblemSpec(
            primal_prox=primal_prox, dual_prox=dual_prox, map=identity_map(),
            objective=sub_objective, kernels=(cones.EUCLIDEAN,),
            box_upper=_wrap(upper), initial_primal=(x_k[0].copy(),),
            dual_signs=(1,),
            feasibility=lambda u, tol: u[0][0, 0] >= lower - tol,
            kkt_certificate=lambda u, v, tau: (v[0].copy(),))

    return DcProgram(
        eval_g=lambda x: eval_g(x[0][0, 0]),
        eval_h=lambda x: eval_h(x[0][0, 0]),
        grad_g=grad_g, grad_h=grad_h, build_subproblem=build,
        feasible_start=feasible_start,
        feasibility_check=lambda x, tol: feas_res(x) <= tol,
        feasibility_residual=feas_res, name="scalar-box")


def intersection_projection_spec(a: np.ndarray, cap: np.ndarray) -> SubproblemSpec:
    """PDHG spec for projecting ``a`` onto S+ intersected with {X <= cap}."""
    n = a.shape[0]

    def primal_prox(u, astar_v, tau, cache):
        p = (tau * (a - astar_v[0]) + u[0]) / (tau + 1.0)
        return (cones.project_psd(p),), None

    def dual_prox(z, sigma):
        return (cones.prox_conj_indicator(
            z[0], sigma, lambda m: cones.project_cap(m, cap)),)

    return SubproblemSpec(
        primal_prox=primal_prox, dual_prox=dual_prox, map=identity_map(),
        objective=lambda u: 0.5 * float(np.tensordot(u[0] - a, u[0] - a, axes=2)),
        kernels=(cones.EUCLIDEAN,), box_upper=(cap,),
        initial_primal=(np.zeros((n, n)),), dual_signs=(1,),
        feasibility=lambda u, tol: np.linalg.eigvalsh(u[0]).min() >= -tol,
        kkt_certificate=None)


# ---------------------------------------------------------------------------
# prox-vs-oracle harness


def _prox_oracle_violations(rng, n_values, per_case, pg_iters, tol) -> List[str]:
    out = []
    for case in range(per_case):
        n = int(n_values[case % len(n_values)])
        sigma = random_spd(rng, n, cond=rng.uniform(1.0, 8.0))
        c = float(rng.uniform(0.5, 3.0))

        # PSD-cone prox: operand must be PD
        a = random_spd(rng, n, cond=rng.uniform(1.0, 6.0)) * rng.uniform(0.2, 2.0)
        x_cf = cones.prox_logdet_psd(a, sigma, c)

        def obj_psd(x):
            try:
                return -c * logdet_pd(x + sigma) + frob_inner(a, x)
            except Exception:
                return math.inf

        def grad_psd(x):
            return -c * inv_pd(x + sigma) + a

        x_pg = projected_gradient(grad_psd, cones.project_psd,
                                  np.eye(n), pg_iters, obj_psd)
        gap = obj_psd(x_cf) - obj_psd(x_pg)
        if gap > tol * (1.0 + abs(obj_psd(x_pg))):
            out.append(f"prox_logdet_psd case {case}: closed form above "
                       f"oracle by {gap:.3e}")
        if obj_psd(x_pg) - obj_psd(x_cf) > tol * (1.0 + abs(obj_psd(x_pg))):
            out.append(f"prox_logdet_psd case {case}: oracle above closed "
                       f"form by {obj_psd(x_pg) - obj_psd(x_cf):.3e} "
                       f"(oracle failed to converge)")
        kkt = prox_psd_kkt_residual(x_cf, a, sigma, c)
        if kkt > 1e-7:
            out.append(f"prox_logdet_psd case {case}: KKT residual {kkt:.3e}")

        # cap prox: indefinite operands every other case
        cap = random_psd(rng, n, scale=1.5) + 0.05 * np.eye(n)
        a2 = random_sym(rng, n) if case % 2 else a
        x_cf = cones.prox_logdet_cap(a2, sigma, cap, c)

        def obj_cap(x):
            try:
                return -c * logdet_pd(x + sigma) + frob_inner(a2, x)
            except Exception:
                return math.inf

        def grad_cap(x):
            return -c * inv_pd(x + sigma) + a2

        x_pg = projected_gradient(grad_cap, lambda m: cones.project_cap(m, cap),
                                  cap.copy(), pg_iters, obj_cap)
        gap = abs(obj_cap(x_cf) - obj_cap(x_pg))
        if gap > tol * (1.0 + abs(obj_cap(x_pg))):
            out.append(f"prox_logdet_cap case {case}: objective gap {gap:.3e}")
        kkt = prox_cap_kkt_residual(x_cf, a2, sigma, cap, c)
        if kkt > 1e-7:
            out.append(f"prox_logdet_cap case {case}: KKT residual {kkt:.3e}")

        # barrier prox: stationarity is exact
        b = random_spd(rng, n, cond=rng.uniform(1.0, 6.0)) * rng.uniform(0.3, 2.0)
        u = cones.prox_logdet_barrier(b, c)
        station = np.linalg.norm(b - c * inv_pd(u), "fro")
        if station > 1e-9 * (1.0 + np.linalg.norm(b, "fro")):
            out.append(f"prox_logdet_barrier case {case}: stationarity "
                       f"residual {station:.3e}")

        def obj_bar(x):
            try:
                return -c * logdet_pd(x) + frob_inner(b, x)
            except Exception:
                return math.inf

        def grad_bar(x):
            return -c * inv_pd(x) + b

        x_pg = projected_gradient(grad_bar, lambda m: m, np.eye(n),
                                  pg_iters, obj_bar)
        gap = abs(obj_bar(u) - obj_bar(x_pg))
        if gap > tol * (1.0 + abs(obj_bar(x_pg))):
            out.append(f"prox_logdet_barrier case {case}: objective gap {gap:.3e}")
    return out


def prox_psd_kkt_residual(x: np.ndarray, a: np.ndarray, sigma: np.ndarray,
                          c: float) -> float:
    """Scaled KKT residual of min -c log det(X+S) + <A,X> s.t. X >= 0.

    Stationarity leaves a multiplier S = c (X+S)^-1 - A that must be NSD
    and complementary to X; the residual is the worst violation of dual
    feasibility and complementarity, relative to the data scale.
    """
    mult = c * inv_pd(x + sigma) - a
    scale = 1.0 + np.linalg.norm(a, "fro")
    dual_viol = max(0.0, float(np.linalg.eigvalsh(mult).max())) / scale
    comp = abs(frob_inner(mult, x)) / (scale * (1.0 + np.linalg.norm(x, "fro")))
    return max(dual_viol, comp)


def prox_cap_kkt_residual(x: np.ndarray, a: np.ndarray, sigma: np.ndarray,
                          cap: np.ndarray, c: float) -> float:
    """Scaled KKT residual of min -c log det(X+S) + <A,X> s.t. X <= cap."""
    mult = c * inv_pd(x + sigma) - a
    scale = 1.0 + np.linalg.norm(a, "fro")
    dual_viol = max(0.0, float(-np.linalg.eigvalsh(mult).min())) / scale
    comp = abs(frob_inner(mult, cap - x)) / (scale * (1.0 + np.linalg.norm(cap - x, "fro")))
    return max(dual_viol, comp)


# ---------------------------------------------------------------------------
# individual checks


def _check_eig_reconstruction(rng) -> List[str]:
    out = []
    for n in (2, 3, 5, 8):
        m = random_sym(rng, n, scale=2.0)
        q, lam = sym_eig(m)
        rec = np.linalg.norm((q * lam) @ q.T - m, "fro")
        orth = np.linalg.norm(q.T @ q - np.eye(n), "fro")
        if rec > 1e-9 * (1.0 + np.linalg.norm(m, "fro")):
            out.append(f"eig reconstruction residual {rec:.3e} at n={n}")
        if orth > 1e-10 * n:
            out.append(f"eig orthogonality residual {orth:.3e} at n={n}")
        if np.any(np.diff(lam) > 0):
            out.append(f"eigenvalues not descending at n={n}")
    return out


def _check_logdet_inverse(rng) -> List[str]:
    out = []
    for n in (1, 3, 6):
        m = random_spd(rng, n, cond=rng.uniform(1.0, 50.0))
        s = logdet_pd(m) + logdet_pd(inv_pd(m))
        if abs(s) > 1e-8:
            out.append(f"logdet(M) + logdet(M^-1) = {s:.3e} at n={n}")
    return out


def _check_sqrt_square(rng) -> List[str]:
    from .symmat import sym_sqrt
    out = []
    for n in (2, 4, 6):
        m = random_psd(rng, n)
        r = sym_sqrt(m)
        res = np.linalg.norm(r @ r - m, "fro")
        if res > 1e-8 * (1.0 + np.linalg.norm(m, "fro")):
            out.append(f"sqrt(M)^2 residual {res:.3e} at n={n}")
    return out


def _check_projection_idempotence(rng) -> List[str]:
    out = []
    for n in (2, 4):
        m = random_sym(rng, n, 2.0)
        cap = random_psd(rng, n)
        p1 = cones.project_psd(m)
        if np.linalg.norm(cones.project_psd(p1) - p1, "fro") > 1e-10 * (1 + np.linalg.norm(p1)):
            out.append(f"project_psd not idempotent at n={n}")
        p2 = cones.project_cap(m, cap)
        if np.linalg.norm(cones.project_cap(p2, cap) - p2, "fro") > 1e-10 * (1 + np.linalg.norm(p2)):
            out.append(f"project_cap not idempotent at n={n}")
    return out


def _check_obtuse_angle(rng) -> List[str]:
    out = []
    n = 4
    m = random_sym(rng, n, 2.0)
    cap = random_psd(rng, n) + 0.1 * np.eye(n)
    pp = cones.project_psd(m)
    pc = cones.project_cap(m, cap)
    for _ in range(100):
        feas_psd = random_psd(rng, n)
        val = frob_inner(m - pp, feas_psd - pp)
        if val > 1e-8 * (1 + np.linalg.norm(m)):
            out.append(f"obtuse angle violated for project_psd: {val:.3e}")
            break
    for _ in range(100):
        feas_cap = cap - random_psd(rng, n)
        val = frob_inner(m - pc, feas_cap - pc)
        if val > 1e-8 * (1 + np.linalg.norm(m)):
            out.append(f"obtuse angle violated for project_cap: {val:.3e}")
            break
    return out


def _check_moreau_identity(rng) -> List[str]:
    out = []
    n = 3
    cap = random_psd(rng, n)
    for sigma in (0.3, 1.0, 2.7):
        z = random_sym(rng, n, 3.0)
        prox = cones.prox_conj_indicator(z, sigma,
                                         lambda m: cones.project_cap(m, cap))
        recon = prox + sigma * cones.project_cap(z / sigma, cap)
        if np.linalg.norm(recon - z, "fro") > 1e-12 * (1 + np.linalg.norm(z)):
            out.append(f"Moreau identity violated at sigma={sigma}")
        if np.linalg.eigvalsh(prox).min() < -1e-9:
            out.append(f"cap-set conjugate prox not PSD at sigma={sigma}")
        prox2 = cones.prox_conj_indicator(z, sigma, cones.project_psd)
        if np.linalg.eigvalsh(prox2).max() > 1e-9:
            out.append(f"PSD-cone conjugate prox not NSD at sigma={sigma}")
    return out


def _check_prox_oracles_fast(rng) -> List[str]:
    return _prox_oracle_violations(rng, n_values=(1, 2, 3), per_case=6,
                                   pg_iters=2000, tol=1e-6)


def _check_prox_oracles_full(rng) -> List[str]:
    return _prox_oracle_violations(rng, n_values=(1, 2, 3, 4, 5), per_case=15,
                                   pg_iters=5000, tol=1e-6)


def _check_cap_large_limit(rng) -> List[str]:
    out = []
    for n in (2, 3):
        sigma = random_spd(rng, n, 3.0)
        c = float(rng.uniform(0.5, 2.0))
        a = random_spd(rng, n, 2.0) * 0.2
        unconstrained = c * inv_pd(a) - sigma
        cap = 1e6 * np.eye(n)
        x = cones.prox_logdet_cap(a, sigma, cap, c)
        rel = np.linalg.norm(x - unconstrained, "fro") / (1 + np.linalg.norm(unconstrained, "fro"))
        if rel > 1e-5:
            out.append(f"large-cap prox differs from unconstrained point by {rel:.3e}")
    return out


def _check_bregman_lower_bound(rng) -> List[str]:
    out = []
    n = 3
    cap = random_psd(rng, n) + 0.2 * np.eye(n)
    sigma = random_spd(rng, n, 4.0)
    kernel = cones.logdet_shifted(sigma)
    m = cones.strong_convexity_bound(kernel, cap)
    for _ in range(25):
        x = cones.project_cap(random_psd(rng, n), cap)
        x = cones.project_psd(x)
        y = cones.project_cap(random_psd(rng, n), cap)
        y = cones.project_psd(y)
        d = cones.bregman_distance(kernel, x, y)
        lower = 0.5 * m * float(np.tensordot(x - y, x - y, axes=2))
        if d < lower - 1e-10:
            out.append(f"Bregman distance {d:.3e} below strong-convexity bound "
                       f"{lower:.3e}")
            break
    return out


def _check_adjoints(rng) -> List[str]:
    out = []
    for kind in problems.KINDS:
        for variant in problems.VARIANTS:
            inst = problems.gen_synthetic(kind, 4, seed=11, cond=3.0)
            prog = problems.build_program(inst, variant)
            spec = prog.build_subproblem(prog.feasible_start())
            u = tuple(random_sym(rng, b.shape[0]) for b in spec.initial_primal)
            v = tuple(random_sym(rng, b.shape[0]) for b in spec.map.forward(u))
            au = spec.map.forward(u)
            atv = spec.map.adjoint(v)
            lhs = sum(frob_inner(vb, ab) for vb, ab in zip(v, au))
            rhs = sum(frob_inner(ab, ub) for ab, ub in zip(atv, u))
            nu = math.sqrt(sum(float(np.tensordot(b, b, axes=2)) for b in u))
            nv = math.sqrt(sum(float(np.tensordot(b, b, axes=2)) for b in v))
            if abs(lhs - rhs) > 1e-10 * nu * nv:
                out.append(f"adjoint test failed for {kind}/{variant}: "
                           f"{abs(lhs - rhs):.3e}")
            if lhs > spec.map.norm_bound * nu * nv * (1 + 1e-10):
                out.append(f"norm bound violated for {kind}/{variant}")
    return out


def _check_stepsize_examples(rng) -> List[str]:
    out = []
    n = 2
    ident = np.eye(n)

    def noop(*args):
        return None

    spec = SubproblemSpec(primal_prox=noop, dual_prox=noop, map=identity_map(),
                          objective=noop, kernels=(cones.EUCLIDEAN,),
                          box_upper=(ident,), initial_primal=(ident,),
                          dual_signs=(0,), feasibility=lambda u, t: True)
    tau, sigma = stepsize_init(spec, spec.box_upper)
    if abs(tau - 0.95) > 1e-12 or abs(sigma - 0.95) > 1e-12:
        out.append(f"euclidean stepsize {tau} != 0.95")

    spec2 = SubproblemSpec(primal_prox=noop, dual_prox=noop,
                           map=LinearMapSpec(lambda u: u, lambda v: v,
                                             math.sqrt(2.0)),
                           objective=noop, kernels=(cones.EUCLIDEAN,),
                           box_upper=(ident,), initial_primal=(ident,),
                           dual_signs=(0,), feasibility=lambda u, t: True)
    tau2, _ = stepsize_init(spec2, spec2.box_upper)
    if abs(tau2 - 0.95 / math.sqrt(2)) > 1e-12:
        out.append(f"sqrt(2)-norm stepsize {tau2} != 0.95/sqrt(2)")

    spec3 = SubproblemSpec(primal_prox=noop, dual_prox=noop, map=identity_map(),
                           objective=noop,
                           kernels=(cones.logdet_shifted(ident),),
                           box_upper=(ident,), initial_primal=(ident,),
                           dual_signs=(0,), feasibility=lambda u, t: True)
    tau3, _ = stepsize_init(spec3, spec3.box_upper)
    if abs(tau3 - 0.475) > 1e-12:
        out.append(f"log-det kernel stepsize {tau3} != 0.475")
    return out


def _check_intersection_projection(rng) -> List[str]:
    out = []
    for n in (2, 3, 4):
        a = random_sym(rng, n, 2.0)
        cap = random_psd(rng, n) + 0.05 * np.eye(n)
        spec = intersection_projection_spec(a, cap)
        state, stats = pdhg_solve(spec, PdhgConfig(max_iters=5000, tol=1e-9))
        oracle = dykstra_projection(
            a, cones.project_psd, lambda m: cones.project_cap(m, cap),
            iters=4000)
        err = np.linalg.norm(state.u[0] - oracle, "fro")
        if err > 1e-6:
            out.append(f"intersection projection off by {err:.3e} at n={n} "
                       f"({stats.iterations} iterations)")
    return out


def _check_dca_scalar(rng) -> List[str]:
    out = []
    prog = scalar_box_dc_program(
        g_curv=1.0, h_slope_at=lambda x: 4.0,
        eval_g=lambda x: x * x, eval_h=lambda x: 4.0 * x,
        lower=0.0, upper=1.0, start=0.5)
    trace = dca_solve(prog, outer_tol=1e-10, max_outer=20,
                      inner_cfg=PdhgConfig(tol=1e-12, max_iters=10000))
    x_fin = trace.iterates[-1][0][0, 0]
    if abs(x_fin - 1.0) > 1e-6 or abs(trace.objectives[-1] + 3.0) > 1e-6:
        out.append(f"scalar DCA example 1: x={x_fin}, f={trace.objectives[-1]}")

    prog2 = scalar_box_dc_program(
        g_curv=0.0, h_slope_at=lambda x: 2.0 * x,
        eval_g=lambda x: 0.0, eval_h=lambda x: x * x,
        lower=-1.0, upper=1.0, start=0.3)
    trace2 = dca_solve(prog2, outer_tol=1e-10, max_outer=20,
                       inner_cfg=PdhgConfig(tol=1e-12, max_iters=10000))
    x_fin2 = trace2.iterates[-1][0][0, 0]
    if abs(x_fin2 - 1.0) > 1e-6:
        out.append(f"scalar DCA example 2: x={x_fin2}")
    return out


def _check_fenchel_young(rng) -> List[str]:
    out = []
    for n in (1, 2, 4):
        sigma = random_spd(rng, n, 3.0)
        lam = float(rng.uniform(0.5, 3.0))
        x = random_psd(rng, n) + 0.1 * np.eye(n)
        grad = -lam * inv_pd(x + sigma)
        gap = abs(-lam * logdet_pd(x + sigma)
                  + diagnostics.conjugate_logdet(grad, sigma, lam)
                  - frob_inner(x, grad))
        if gap > 1e-9 * (1 + abs(lam * n)):
            out.append(f"Fenchel-Young gap {gap:.3e} at n={n}")
    return out


def _check_conjugate_identity(rng) -> List[str]:
    out = []
    for kind, n in ((problems.KIND_BC_PRIVATE, 4),
                    (problems.KIND_BC_COMMON, 3),
                    (problems.KIND_BRASCAMP_LIEB, 2)):
        inst = problems.gen_synthetic(kind, n, seed=5, cond=3.0)
        hspec = diagnostics.h_conjugate_for(inst)
        prog = problems.build_program(inst)
        for trial in range(3):
            a = tuple(0.3 * random_psd(rng, b.shape[0]) + 0.05 * np.eye(b.shape[0])
                      for b in prog.feasible_start())
            b = tuple(0.3 * random_psd(rng, blk.shape[0]) + 0.05 * np.eye(blk.shape[0])
                      for blk in prog.feasible_start())
            dh = abs(hspec.eval(b) - hspec.eval(a))
            err = diagnostics.check_bregman_identity(hspec, a, b)
            if err > 1e-8 * (1.0 + dh):
                out.append(f"conjugate identity error {err:.3e} for {kind}")
                break
    return out


def _check_projection_sampling_oracle(rng) -> List[str]:
    out = []
    n = 4
    m = random_sym(rng, n, 2.0)
    proj = cones.project_psd(m)
    dist = np.linalg.norm(proj - m, "fro")
    for _ in range(1000):
        cand = random_psd(rng, n, scale=rng.uniform(0.2, 2.0))
        if np.linalg.norm(cand - m, "fro") < dist - 1e-10:
            out.append("found PSD point closer than project_psd output")
            break
    return out


def _check_gradients_fd(rng) -> List[str]:
    out = []
    step = 1e-5
    for kind in problems.KINDS:
        inst = problems.gen_synthetic(kind, 4, seed=3, cond=3.0)
        prog = problems.build_program(inst)
        x = prog.feasible_start()
        for fn, grad_fn, tag in ((prog.eval_g, prog.grad_g, "g"),
                                 (prog.eval_h, prog.grad_h, "h")):
            g = grad_fn(x)
            for _ in range(4):
                d = tuple(random_sym(rng, b.shape[0], 1.0) for b in x)
                scale = math.sqrt(sum(float(np.tensordot(b, b, axes=2)) for b in d))
                d = tuple(b / scale for b in d)
                fp = fn(tuple(xb + step * db for xb, db in zip(x, d)))
                fm = fn(tuple(xb - step * db for xb, db in zip(x, d)))
                fd = (fp - fm) / (2 * step)
                an = sum(frob_inner(gb, db) for gb, db in zip(g, d))
                if abs(fd - an) > 1e-5 * (1.0 + abs(an)):
                    out.append(f"finite-difference mismatch for grad_{tag} of "
                               f"{kind}: {abs(fd - an):.3e}")
                    break
    return out


def _check_dca_descent_small(rng) -> List[str]:
    out = []
    for kind in problems.KINDS:
        inst = problems.gen_synthetic(kind, 6, seed=7, cond=3.0)
        prog = problems.build_program(inst)
        trace = dca_solve(prog, outer_tol=1e-8, max_outer=60,
                          inner_cfg=PdhgConfig(tol=1e-8, max_iters=30000))
        if trace.status not in ("Converged", "Flagged"):
            out.append(f"{kind} n=6 did not converge: {trace.status}")
            continue
        for k in range(len(trace.objectives) - 1):
            slack = 10.0 * trace.inner_tols[k]
            if trace.objectives[k + 1] > trace.objectives[k] + slack:
                out.append(f"{kind}: objective rose at step {k}")
                break
            gap = diagnostics.sufficient_decrease_gap(
                prog, trace.iterates[k], trace.iterates[k + 1])
            if gap < -slack:
                out.append(f"{kind}: sufficient decrease violated at step {k} "
                           f"by {-gap:.3e}")
                break
        if not prog.feasibility_check(trace.iterates[-1], 1e-6):
            out.append(f"{kind}: final iterate infeasible beyond 1e-6")
    return out


def _check_dual_signs_small(rng) -> List[str]:
    out = []
    for kind in problems.KINDS:
        inst = problems.gen_synthetic(kind, 8, seed=9, cond=3.0)
        prog = problems.build_program(inst)
        trace = dca_solve(prog, outer_tol=1e-7, max_outer=40,
                          inner_cfg=PdhgConfig(tol=1e-7, max_iters=20000,
                                               debug=True))
        if trace.status not in ("Converged", "Flagged"):
            out.append(f"{kind} n=8 debug solve: {trace.status}")
    return out


def _check_rate_small(rng) -> List[str]:
    out = []
    inst = problems.gen_synthetic(problems.KIND_BC_PRIVATE, 10, seed=2, cond=4.0)
    prog = problems.build_program(inst)
    trace = dca_solve(prog, outer_tol=1e-9, max_outer=80,
                      inner_cfg=PdhgConfig(tol=1e-9, max_iters=40000))
    ref = dca_solve(prog, outer_tol=1e-12, max_outer=200,
                    inner_cfg=PdhgConfig(tol=1e-10, max_iters=80000),
                    start=trace.iterates[-1], warm=trace.final_state)
    f_star = min(ref.objectives[-1], trace.objectives[-1])
    try:
        rho = diagnostics.fit_rate(trace.objectives, f_star)
        if not rho < 1.0:
            out.append(f"fitted rate {rho:.4f} not below 1")
    except diagnostics.InsufficientData:
        out.append("rate fit had insufficient data")
    return out


def _check_serialization_roundtrip(rng) -> List[str]:
    out = []
    for kind in problems.KINDS:
        inst = problems.gen_synthetic(kind, 4, seed=13, cond=2.0)
        text = problems.dumps_instance(inst)
        again = problems.dumps_instance(
            problems.instance_from_dict(json.loads(text)))
        if text != again:
            out.append(f"serialization round-trip not byte-identical for {kind}")
    return out


FAST_CHECKS: Dict[str, Callable] = {
    "symmat-eig-reconstruction": _check_eig_reconstruction,
    "symmat-logdet-inverse": _check_logdet_inverse,
    "symmat-sqrt-square": _check_sqrt_square,
    "cones-projection-idempotence": _check_projection_idempotence,
    "cones-obtuse-angle": _check_obtuse_angle,
    "cones-moreau-identity": _check_moreau_identity,
    "cones-prox-oracles": _check_prox_oracles_fast,
    "cones-cap-large-limit": _check_cap_large_limit,
    "cones-bregman-lower-bound": _check_bregman_lower_bound,
    "pdhg-adjoint-consistency": _check_adjoints,
    "pdhg-stepsize-examples": _check_stepsize_examples,
    "pdhg-intersection-projection": _check_intersection_projection,
    "dca-scalar-examples": _check_dca_scalar,
    "diagnostics-fenchel-young": _check_fenchel_young,
    "diagnostics-conjugate-identity": _check_conjugate_identity,
}

FULL_CHECKS: Dict[str, Callable] = {
    **FAST_CHECKS,
    "cones-prox-oracles-full": _check_prox_oracles_full,
    "cones-projection-sampling-oracle": _check_projection_sampling_oracle,
    "problems-gradient-finite-differences": _check_gradients_fd,
    "problems-serialization-roundtrip": _check_serialization_roundtrip,
    "dca-descent-small": _check_dca_descent_small,
    "pdhg-dual-signs-small": _check_dual_signs_small,
    "diagnostics-rate-small": _check_rate_small,
}


def run_checks(level: str = "fast", printer=print) -> int:
    """Run the named invariant suite; returns the number of failing checks."""
    table = FAST_CHECKS if level == "fast" else FULL_CHECKS
    if level not in ("fast", "full"):
        raise ValueError(f"unknown check level {level!r}")
    failures = 0
    for name, fn in table.items():
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        try:
            violations = fn(rng)
        except Exception as exc:  # a crash is a failure with a name attached
            violations = [f"check raised {type(exc).__name__}: {exc}"]
        if violations:
            failures += 1
            printer(f"FAIL {name}")
            for v in violations:
                printer(f"     {v}")
        else:
            printer(f"ok   {name}")
    return failures
