"""Difference-of-convex outer loop.

At iterate ``x_k`` the concave part ``-h`` is replaced by its tangent and
the convex surrogate ``g(x) - <grad h(x_k), x>`` is minimized over the
constraint set by the PDHG engine, warm-started from the previous
subproblem's primal/dual pair.  The inner tolerance tightens geometrically
(factor 0.2 per outer step, floor at the configured tolerance) and a
monotonicity guard re-solves at 0.1x tolerance whenever the inexact inner
solve breaks descent.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .symmat import frob_inner
from .pdhg import (
    Blocks,
    InnerStats,
    NoConvergence,
    PdhgConfig,
    PdhgState,
    SubproblemSpec,
    pdhg_solve,
    stepsize_init,
)

#: First inner tolerance of the tightening schedule.
INNER_TOL_START = 1e-4
#: Geometric tightening factor applied after every outer iteration.
INNER_TOL_FACTOR = 0.2
#: Objective-increase slack allowed per outer step, in units of the inner tol.
DESCENT_SLACK = 10.0


@dataclass
class DcProgram:
    """A DC program min g(x) - h(x) over x in C, with its subproblem builder.

    All handles take and return block tuples of symmetric matrices.
    ``build_subproblem(x_k)`` freezes the linearization of h at ``x_k`` and
    returns the :class:`SubproblemSpec` the inner solver consumes.
    ``feasibility_check(x, tol)`` tests membership in C with eigenvalue
    tolerance ``tol``; ``feasibility_residual(x)`` returns the worst
    eigenvalue violation (0 when feasible).  ``post_flags(x)``, when
    present, reports solution-quality caveats (e.g. the PSD residual of a
    recovered block) as human-readable strings.
    """

    eval_g: Callable[[Blocks], float]
    eval_h: Callable[[Blocks], float]
    grad_g: Callable[[Blocks], Blocks]
    grad_h: Callable[[Blocks], Blocks]
    build_subproblem: Callable[[Blocks], SubproblemSpec]
    feasible_start: Callable[[], Blocks]
    feasibility_check: Callable[[Blocks, float], bool]
    feasibility_residual: Callable[[Blocks], float]
    name: str = ""
    post_flags: Optional[Callable[[Blocks], list]] = None


def objective(prog: DcProgram, x: Blocks) -> float:
    return prog.eval_g(x) - prog.eval_h(x)


def linearized_objective(prog: DcProgram, x_k: Blocks, u: Blocks) -> float:
    """Surrogate value g(u) - h(x_k) - <grad h(x_k), u - x_k>.

    A global overestimator of f = g - h (by convexity of h) that touches f
    at u = x_k.
    """
    gh = prog.grad_h(x_k)
    lin = prog.eval_h(x_k) + sum(frob_inner(g, ub - xb)
                                 for g, ub, xb in zip(gh, u, x_k))
    return prog.eval_g(u) - lin


@dataclass
class DcaTrace:
    """Per-outer-iteration record of a DCA run.

    ``iterates[0]`` is the starting point; entry k+1 corresponds to the
    k-th subproblem solve, whose inner iteration count, final residual,
    wall time, and inner tolerance are stored at index k of the parallel
    lists.  ``y_hat`` is the full dual certificate recovered at the final
    iterate (dual variable plus primal-cone multiplier).
    """

    iterates: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)
    inner_residuals: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    inner_tols: list = field(default_factory=list)
    status: str = "MaxIters"
    flags: list = field(default_factory=list)
    y_hat: Optional[Blocks] = None
    final_state: Optional[PdhgState] = None
    final_tau: float = 0.0
    sign_violations: int = 0

    @property
    def outer_iterations(self) -> int:
        return len(self.objectives) - 1


def dca_solve(prog: DcProgram, outer_tol: float = 1e-8, max_outer: int = 100,
              inner_cfg: Optional[PdhgConfig] = None,
              start: Optional[Blocks] = None,
              warm: Optional[PdhgState] = None) -> DcaTrace:
    """Run DCA until the relative objective change drops below outer_tol.

    Stops when ``|f(x_{k+1}) - f(x_k)| / max(1, |f(x_k)|) <= outer_tol`` or
    after ``max_outer`` subproblems.  ``start``/``warm`` allow continuing a
    previous run (used by the reference solves in the diagnostics layer).
    A subproblem that diverges despite the stepsize safeguards aborts the
    run with status "Failed" and a partial trace.
    """
    if outer_tol <= 0:
        raise ValueError("outer_tol must be positive")
    cfg = inner_cfg if inner_cfg is not None else PdhgConfig()
    tol_floor = cfg.tol

    x = tuple(start) if start is not None else prog.feasible_start()
    f_x = objective(prog, x)
    if not math.isfinite(f_x):
        raise ValueError("objective not finite at the starting point")

    trace = DcaTrace(iterates=[x], objectives=[f_x])
    eps = max(INNER_TOL_START, tol_floor)
    tau, sigma = cfg.tau, cfg.sigma
    state = warm
    spec = None
    converged = False

    for _ in range(max_outer):
        spec = prog.build_subproblem(x)
        if tau is None or sigma is None:
            tau, sigma = stepsize_init(spec, spec.box_upper)

        t0 = time.monotonic()
        inner_total = 0
        stats: Optional[InnerStats] = None
        while True:
            run_cfg = replace(cfg, tau=tau, sigma=sigma, tol=eps)
            try:
                state, stats = pdhg_solve(spec, run_cfg, warm=state)
            except NoConvergence as exc:
                trace.status = "Failed"
                trace.flags.append(f"inner solver diverged at outer step "
                                   f"{trace.outer_iterations}: {exc}")
                trace.final_state = state
                trace.final_tau = tau
                return trace
            inner_total += stats.iterations
            trace.sign_violations += stats.sign_violations
            u_rec = spec.repair(state.u) if spec.repair is not None else state.u
            x_new = spec.from_subproblem_vars(u_rec)
            f_new = objective(prog, x_new)
            if f_new <= f_x + DESCENT_SLACK * eps:
                break
            if eps <= tol_floor * (1.0 + 1e-12):
                trace.flags.append(
                    f"descent violated at floor tolerance: objective rose by "
                    f"{f_new - f_x:.3e} at outer step {trace.outer_iterations}")
                break
            eps = max(tol_floor, 0.1 * eps)

        trace.iterates.append(x_new)
        trace.objectives.append(f_new)
        trace.inner_iters.append(inner_total)
        trace.inner_residuals.append(state.residual)
        trace.wall_times.append(time.monotonic() - t0)
        trace.inner_tols.append(eps)

        rel_change = abs(f_new - f_x) / max(1.0, abs(f_x))
        x, f_x = x_new, f_new
        if rel_change <= outer_tol:
            converged = True
            break
        eps = max(tol_floor, INNER_TOL_FACTOR * eps)

    if prog.post_flags is not None:
        trace.flags.extend(prog.post_flags(x))

    if trace.flags:
        trace.status = "Flagged"
    elif converged:
        trace.status = "Converged"
    else:
        trace.status = "MaxIters"

    trace.final_state = state
    trace.final_tau = tau if tau is not None else 0.0
    if spec is not None and spec.kkt_certificate is not None and state is not None:
        trace.y_hat = spec.kkt_certificate(state.u, state.v, trace.final_tau)
    return trace
