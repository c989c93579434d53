"""Generic Bregman primal-dual hybrid-gradient engine.

Solves ``min F(u) + G(A u)`` over block tuples of symmetric matrices by
alternating a Bregman prox of F (supplied as a handle by the problem
module) and a Euclidean prox of G* evaluated at the over-relaxed primal
point ``2 u^{t+1} - u^t``.  The engine is agnostic to the problem; all
structure lives in :class:`SubproblemSpec`.

Stepsizes follow the product rule ``tau * sigma * ||A||^2 <= m`` where m
is the primal kernel's strong-convexity estimate over the feasible box
(m = 1 for Euclidean kernels).  Since iterates may transiently leave the
box, a divergence safeguard shrinks both stepsizes and restarts from the
best iterate when the fixed-point residual grows sharply.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .cones import KernelSpec, strong_convexity_bound


class NoConvergence(RuntimeError):
    """Inner solver failed to converge after all safeguard restarts."""


Blocks = tuple  # tuple of ndarray blocks; primal and dual live in such tuples


def tuple_norm(blocks: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.tensordot(b, b, axes=2)) for b in blocks))


def tuple_sub(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> Blocks:
    return tuple(x - y for x, y in zip(a, b))


@dataclass
class LinearMapSpec:
    """Linear map between primal and dual block tuples, with its adjoint.

    ``norm_bound`` is an upper bound on the operator norm in the Frobenius
    norms (exact for the maps used here).
    """

    forward: Callable[[Blocks], Blocks]
    adjoint: Callable[[Blocks], Blocks]
    norm_bound: float


def identity_map() -> LinearMapSpec:
    return LinearMapSpec(forward=lambda u: tuple(u),
                         adjoint=lambda v: tuple(v),
                         norm_bound=1.0)


@dataclass
class PdhgConfig:
    """Inner-solver configuration.

    ``tau``/``sigma`` default to None, meaning "derive from the spec via
    :func:`stepsize_init`".  ``tol`` is the normalized fixed-point
    residual threshold.  The safeguard shrinks both stepsizes by
    ``shrink`` and restarts from the best iterate whenever the residual
    exceeds ``growth_factor`` times the smallest residual in the last
    ``growth_window`` iterations; after ``max_restarts`` failed restarts
    the solve raises :class:`NoConvergence`.
    """

    tau: Optional[float] = None
    sigma: Optional[float] = None
    max_iters: int = 20000
    tol: float = 1e-7
    shrink: float = 0.5
    growth_window: int = 50
    growth_factor: float = 10.0
    max_restarts: int = 5
    debug: bool = False


@dataclass
class PdhgState:
    """Primal/dual iterate pair with the iteration count that produced it."""

    u: Blocks
    v: Blocks
    iter: int = 0
    residual: float = math.inf


@dataclass
class SubproblemSpec:
    """Everything the engine needs to run one convex subproblem.

    primal_prox(u, astar_v, tau, cache) -> (u_next, cache_next) implements
    the Bregman prox of the linearized objective over the primal component
    set; ``cache`` is opaque solver state (typically the kernel-gradient
    inverses of the previous iterate) and may be None.  dual_prox(z, sigma)
    evaluates the prox of sigma * G* at z = v + sigma * A(2 u+ - u).

    ``dual_signs`` gives the semidefinite sign each dual block must keep
    (+1 for >= 0, -1 for <= 0, 0 unchecked); the engine verifies it each
    iteration when debugging is enabled.  ``kkt_certificate(u, v, tau)``
    returns the full normal-cone element of the subproblem optimality
    condition, including the primal-cone multiplier recovered from the
    prox (see the problem builders).

    ``repair``, when set, maps a near-feasible primal tuple to a feasible
    one (a few alternating-projection sweeps).  The outer loop applies it
    to the point it records: dual-handled constraints hold only in the
    limit, and evaluating the objective at slightly infeasible points
    would understate it by far more than the inner tolerance.
    """

    primal_prox: Callable[[Blocks, Blocks, float, object], tuple]
    dual_prox: Callable[[Blocks, float], Blocks]
    map: LinearMapSpec
    objective: Callable[[Blocks], float]
    kernels: tuple[KernelSpec, ...]
    box_upper: Blocks
    initial_primal: Blocks
    dual_signs: tuple[int, ...]
    feasibility: Callable[[Blocks, float], bool]
    kkt_certificate: Optional[Callable[[Blocks, Blocks, float], Blocks]] = None
    from_subproblem_vars: Callable[[Blocks], Blocks] = lambda u: tuple(u)
    repair: Optional[Callable[[Blocks], Blocks]] = None


@dataclass
class InnerStats:
    iterations: int
    residual: float
    restarts: int
    converged: bool
    sign_violations: int = 0
    tau: float = 0.0
    sigma: float = 0.0


def stepsize_init(spec: SubproblemSpec, domain_bound: Blocks,
                  safety: float = 0.95) -> tuple[float, float]:
    """Stepsizes tau = sigma = safety * sqrt(m) / ||A|| from the kernel moduli.

    m is the smallest strong-convexity estimate over the feasible box
    among the primal blocks' kernels; the product then satisfies
    ``tau * sigma * ||A||^2 = safety^2 * m < m``.
    """
    m = min(strong_convexity_bound(k, b)
            for k, b in zip(spec.kernels, domain_bound))
    step = safety * math.sqrt(m) / spec.map.norm_bound
    return step, step


def residual(state: PdhgState, prev: PdhgState, config: PdhgConfig) -> float:
    """Normalized fixed-point residual between consecutive iterates."""
    du = tuple_norm(tuple_sub(state.u, prev.u)) / config.tau
    dv = tuple_norm(tuple_sub(state.v, prev.v)) / config.sigma
    return (du + dv) / (1.0 + tuple_norm(prev.u) + tuple_norm(prev.v))


def _sign_violations(v: Blocks, signs: tuple[int, ...]) -> int:
    count = 0
    for block, sign in zip(v, signs):
        if sign == 0:
            continue
        lam = np.linalg.eigvalsh(0.5 * (block + block.T))
        tol = 1e-9 * (1.0 + float(np.abs(lam).max(initial=0.0)))
        if sign > 0 and lam.min(initial=0.0) < -tol:
            count += 1
        elif sign < 0 and lam.max(initial=0.0) > tol:
            count += 1
    return count


def pdhg_solve(spec: SubproblemSpec, config: PdhgConfig,
               warm: Optional[PdhgState] = None) -> tuple[PdhgState, InnerStats]:
    """Run Bregman PDHG until the fixed-point residual drops below tol.

    Returns the last iterate (not an ergodic average) together with
    iteration statistics.  ``warm`` seeds both primal and dual blocks;
    otherwise the primal starts from the spec's initial point and the dual
    from zero, which satisfies every dual sign pattern.
    """
    tau, sigma = config.tau, config.sigma
    if tau is None or sigma is None:
        tau, sigma = stepsize_init(spec, spec.box_upper)
    cfg = replace(config, tau=tau, sigma=sigma)

    if warm is not None:
        u, v = tuple(warm.u), tuple(warm.v)
    else:
        u = tuple(np.array(b, dtype=float) for b in spec.initial_primal)
        v = tuple(np.zeros_like(b) for b in spec.map.forward(u))

    best_res = math.inf
    best_uv = (u, v)
    window: deque[float] = deque(maxlen=cfg.growth_window)
    cache = None
    restarts = 0
    violations = 0
    res = math.inf
    it = 0

    while it < cfg.max_iters:
        it += 1
        astar_v = spec.map.adjoint(v)
        u_next, cache = spec.primal_prox(u, astar_v, cfg.tau, cache)
        ubar = tuple(2.0 * un - uo for un, uo in zip(u_next, u))
        au = spec.map.forward(ubar)
        z = tuple(vb + cfg.sigma * ab for vb, ab in zip(v, au))
        v_next = spec.dual_prox(z, cfg.sigma)

        res = residual(PdhgState(u_next, v_next), PdhgState(u, v), cfg)
        if cfg.debug:
            violations += _sign_violations(v_next, spec.dual_signs)
            if not spec.feasibility(u_next, 1e-9):
                violations += 1

        if res < best_res:
            best_res = res
            best_uv = (u_next, v_next)

        u, v = u_next, v_next
        if res < cfg.tol:
            state = PdhgState(u, v, iter=it, residual=res)
            return state, InnerStats(it, res, restarts, True, violations,
                                     tau=cfg.tau, sigma=cfg.sigma)

        window.append(res)
        if (len(window) == cfg.growth_window
                and res > cfg.growth_factor * min(window)):
            restarts += 1
            if restarts > cfg.max_restarts:
                raise NoConvergence(
                    f"residual {res:.3e} still growing after {cfg.max_restarts} "
                    f"stepsize restarts")
            cfg = replace(cfg, tau=cfg.tau * cfg.shrink, sigma=cfg.sigma * cfg.shrink)
            u, v = best_uv
            cache = None
            window.clear()

    state = PdhgState(u, v, iter=it, residual=res)
    return state, InnerStats(it, res, restarts, False, violations,
                             tau=cfg.tau, sigma=cfg.sigma)
