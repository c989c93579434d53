"""Empirical verification of the convergence theory.

Three tools live here:

* closed-form convex conjugates of the concave parts (and a Newton-based
  numeric conjugate for the block-coupled class, whose conjugate has no
  closed form), used to verify the conjugate Bregman identity
  ``d_{h*}(grad h(a), grad h(b)) = d_h(b, a)`` with both sides evaluated
  independently;
* an estimator of the gradient-dominance constant mu from a solver
  trace, via ``mu_hat = min_k d_h(x_{k+1}, x_k) / (f(x_{k+1}) - f*)``,
  together with the per-step contraction ratios and the implied rate
  bound ``1 / (1 + mu_hat)``;
* a geometric-rate fit of the objective gaps and the first-order
  optimality residual assembled from the recovered dual certificate.

All rate quantities are relative to a reference optimum ``f*`` supplied
by the caller (in practice a tighter continuation solve), never to an
analytic optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse.linalg

from .symmat import NotPd, frob_inner, inv_pd, logdet_pd, symmetrize
from .dca import DcProgram, DcaTrace
from .problems import BcCommonInstance, BcPrivateInstance, BrascampLiebInstance


class OutOfDomain(ValueError):
    """Argument outside the conjugate's (or kernel's) domain."""


class InsufficientData(ValueError):
    """Not enough usable trace entries for the requested estimate."""


# ---------------------------------------------------------------------------
# conjugates


def conjugate_logdet(y: np.ndarray, sigma_shift: np.ndarray, lam: float) -> float:
    """Convex conjugate of h(X) = -lam log det(X + shift), at Y < 0.

    h*(Y) = -lam n - <shift, Y> + lam log det(-lam Y^-1); the supremum is
    attained at X = -lam Y^-1 - shift and is infinite unless Y is negative
    definite.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    y = symmetrize(y)
    n = y.shape[0]
    try:
        ld = logdet_pd(-y)
    except NotPd as exc:
        raise OutOfDomain("conjugate is finite only for negative definite Y") from exc
    return float(-lam * n - frob_inner(sigma_shift, y)
                 + lam * (n * math.log(lam) - ld))


@dataclass
class HConjugate:
    """Concave-part handles: h, grad h, h*, grad h* on block tuples."""

    eval: Callable[[tuple], float]
    grad: Callable[[tuple], tuple]
    conj_eval: Callable[[tuple], float]
    conj_grad: Callable[[tuple], tuple]


def h_conjugate_bc_private(inst: BcPrivateInstance) -> HConjugate:
    s2, lam = inst.sigma2, inst.lam

    def h_eval(x):
        return -lam * logdet_pd(x[0] + s2)

    def h_grad(x):
        return (-lam * inv_pd(x[0] + s2),)

    def conj_eval(y):
        return conjugate_logdet(y[0], s2, lam)

    def conj_grad(y):
        # grad h*(Y) = -lam Y^-1 - shift, the argmax of <X, Y> - h(X)
        yn = symmetrize(y[0])
        return (lam * inv_pd(-yn) - s2,)

    return HConjugate(h_eval, h_grad, conj_eval, conj_grad)


def h_conjugate_bc_common(inst: BcCommonInstance) -> HConjugate:
    """Conjugate of h(X, Y) = -alpha log det(X+Y+S1) - lam log det(X+S2).

    Through the substitution S = X + Y the conjugate splits:
    h*(P, Q) = h2*(P - Q) + h1*(Q) with h1 = -alpha log det(. + S1) and
    h2 = -lam log det(. + S2).  Requires alpha > 0, otherwise h is not
    strictly convex in S and the conjugate is degenerate.
    """
    if inst.alpha <= 0.0:
        raise ValueError("the closed-form conjugate needs alpha > 0")
    s1, s2, alpha, lam = inst.sigma1, inst.sigma2, inst.alpha, inst.lam

    def h_eval(x):
        return (-alpha * logdet_pd(x[0] + x[1] + s1)
                - lam * logdet_pd(x[0] + s2))

    def h_grad(x):
        si = alpha * inv_pd(x[0] + x[1] + s1)
        return (-si - lam * inv_pd(x[0] + s2), -si)

    def conj_eval(y):
        p, q = y
        return (conjugate_logdet(symmetrize(p) - symmetrize(q), s2, lam)
                + conjugate_logdet(q, s1, alpha))

    def conj_grad(y):
        p, q = symmetrize(y[0]), symmetrize(y[1])
        x = lam * inv_pd(-(p - q)) - s2
        s = alpha * inv_pd(-q) - s1
        return (x, s - x)

    return HConjugate(h_eval, h_grad, conj_eval, conj_grad)


def h_conjugate_brascamp_lieb(inst: BrascampLiebInstance,
                              grad_tol: float = 1e-11,
                              max_newton: int = 200) -> HConjugate:
    """Numeric conjugate of the block-coupled concave part.

    h(X) = -sum_j alpha_j log det(sum_i A_ij X_i A_ij^T + rho I) has no
    closed-form conjugate; h*(y) and grad h*(y) are computed by a damped
    Newton maximization of <X, y> - h(X) started from the box centroid
    (independent of the query point).  Results are memoized per query.
    """
    from .problems import _gram_matrices, gbl_program

    prog = gbl_program(inst, kernel="bregman")
    p = inst.p
    rows = inst.row_dims

    def in_domain(x):
        for g in _gram_matrices(inst, x):
            try:
                np.linalg.cholesky(g)
            except np.linalg.LinAlgError:
                return False
        return True

    def hessp(x, d):
        grams = _gram_matrices(inst, x)
        inv_grams = [inv_pd(g) for g in grams]
        mids = []
        for j in range(inst.q):
            acc = np.zeros((rows[j], rows[j]))
            for i in range(p):
                a = inst.maps[i][j]
                acc = acc + a @ d[i] @ a.T
            mids.append(inv_grams[j] @ (0.5 * (acc + acc.T)) @ inv_grams[j])
        out = []
        for i in range(p):
            acc = np.zeros_like(d[i])
            for j in range(inst.q):
                if inst.alpha[j] > 0.0:
                    a = inst.maps[i][j]
                    acc = acc + float(inst.alpha[j]) * (a.T @ mids[j] @ a)
            out.append(0.5 * (acc + acc.T))
        return tuple(out)

    shapes = [(ni, ni) for ni in inst.block_dims]
    sizes = [ni * ni for ni in inst.block_dims]

    def flatten(t):
        return np.concatenate([b.ravel() for b in t])

    def unflatten(vec):
        out, ofs = [], 0
        for (sh, sz) in zip(shapes, sizes):
            out.append(vec[ofs:ofs + sz].reshape(sh))
            ofs += sz
        return tuple(out)

    def argmax(y):
        x = prog.feasible_start()
        target = flatten(y)
        scale = 1.0 + float(np.linalg.norm(target))
        for _ in range(max_newton):
            grad = flatten(prog.grad_h(x)) - target
            gnorm = float(np.linalg.norm(grad))
            if gnorm <= grad_tol * scale:
                break
            hop = scipy.sparse.linalg.LinearOperator(
                (target.size, target.size),
                matvec=lambda v: flatten(hessp(x, unflatten(v))) + 1e-14 * v)
            d, _ = scipy.sparse.linalg.cg(hop, -grad, rtol=1e-12, atol=0.0,
                                          maxiter=10 * target.size)
            step = unflatten(d)
            slope = float(grad @ d)
            if slope >= 0.0:
                step = unflatten(-grad)
                slope = -float(grad @ grad)
            base = prog.eval_h(x) - float(target @ flatten(x))
            t = 1.0
            while t > 1e-14:
                cand = tuple(xb + t * sb for xb, sb in zip(x, step))
                cand = tuple(0.5 * (c + c.T) for c in cand)
                if in_domain(cand):
                    val = prog.eval_h(cand) - float(target @ flatten(cand))
                    if val <= base + 0.25 * t * slope:
                        x = cand
                        break
                t *= 0.5
            else:
                break
        return x

    cache: dict = {}

    def _solve(y):
        key = tuple(b.tobytes() for b in y)
        if key not in cache:
            x = argmax(y)
            val = sum(frob_inner(xb, yb) for xb, yb in zip(x, y)) - prog.eval_h(x)
            cache[key] = (float(val), x)
            if len(cache) > 64:
                cache.pop(next(iter(cache)))
        return cache[key]

    return HConjugate(
        eval=prog.eval_h,
        grad=prog.grad_h,
        conj_eval=lambda y: _solve(y)[0],
        conj_grad=lambda y: _solve(y)[1])


def check_bregman_identity(hspec: HConjugate, a: tuple, b: tuple) -> float:
    """|d_{h*}(grad h(a), grad h(b)) - d_h(b, a)| with independent sides.

    The left side is assembled from the conjugate handles alone; the right
    side from h and its gradient.  The identity is an exact consequence of
    convex duality, so the discrepancy measures only evaluation error.
    """
    p = hspec.grad(a)
    q = hspec.grad(b)
    conj_grad_q = hspec.conj_grad(q)
    lhs = (hspec.conj_eval(p) - hspec.conj_eval(q)
           - sum(frob_inner(g, pb - qb)
                 for g, pb, qb in zip(conj_grad_q, p, q)))
    rhs = (hspec.eval(b) - hspec.eval(a)
           - sum(frob_inner(g, bb - ab)
                 for g, ab, bb in zip(hspec.grad(a), a, b)))
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# rate estimation


@dataclass
class PlEstimate:
    """Trajectory-restricted estimate of the gradient-dominance constant.

    ``mu_hat`` is an upper bound on the constant restricted to the visited
    iterates (the condition quantifies over the whole feasible set, which
    a trace cannot probe); ``rate_bound = 1 / (1 + mu_hat)`` is the
    implied contraction factor.
    """

    mu_hat: float
    per_step_ratios: list = field(default_factory=list)
    f_star_hat: float = 0.0
    rate_bound: float = 1.0


def _d_h(prog: DcProgram, b: tuple, a: tuple) -> float:
    grad_a = prog.grad_h(a)
    return (prog.eval_h(b) - prog.eval_h(a)
            - sum(frob_inner(g, bb - ab) for g, ab, bb in zip(grad_a, a, b)))


def _d_g(prog: DcProgram, b: tuple, a: tuple) -> float:
    grad_a = prog.grad_g(a)
    return (prog.eval_g(b) - prog.eval_g(a)
            - sum(frob_inner(g, bb - ab) for g, ab, bb in zip(grad_a, a, b)))


def sufficient_decrease_gap(prog: DcProgram, x_k: tuple, x_next: tuple) -> float:
    """f(x_k) - f(x_{k+1}) - d_h(x_{k+1}, x_k) - d_g(x_k, x_{k+1}).

    Nonnegative (up to inner-solve slack) along any DCA trajectory.
    """
    f_k = prog.eval_g(x_k) - prog.eval_h(x_k)
    f_n = prog.eval_g(x_next) - prog.eval_h(x_next)
    return (f_k - f_n) - _d_h(prog, x_next, x_k) - _d_g(prog, x_k, x_next)


def estimate_pl(trace: DcaTrace, prog: DcProgram, f_star_hat: float) -> PlEstimate:
    """Estimate mu from a trace: min_k d_h(x_{k+1}, x_k) / (f(x_{k+1}) - f*).

    Steps whose gap to the reference optimum is below the division guard
    ``1e-10 (1 + |f*|)`` are excluded.  Raises :class:`InsufficientData`
    with fewer than three iterates or no usable step.
    """
    if len(trace.iterates) < 3:
        raise InsufficientData("need at least 3 iterates to estimate mu")
    guard = 1e-10 * (1.0 + abs(f_star_hat))
    objs = trace.objectives
    ratios = []
    mus = []
    for k in range(len(objs) - 1):
        gap_k = objs[k] - f_star_hat
        gap_next = objs[k + 1] - f_star_hat
        if gap_k > guard:
            ratios.append(max(gap_next, 0.0) / gap_k)
        if gap_next > guard:
            dh = _d_h(prog, trace.iterates[k + 1], trace.iterates[k])
            mus.append(dh / gap_next)
    if not ratios:
        raise InsufficientData("no step with a usable gap to the reference optimum")
    # All usable steps may land below the guard (single-step convergence),
    # in which case no finite estimate binds and the rate bound collapses.
    mu_hat = max(0.0, min(mus)) if mus else math.inf
    rate_bound = 1.0 / (1.0 + mu_hat) if math.isfinite(mu_hat) else 0.0
    return PlEstimate(mu_hat=mu_hat, per_step_ratios=ratios,
                      f_star_hat=f_star_hat, rate_bound=rate_bound)


def fit_rate(objectives, f_star_hat: float) -> float:
    """Geometric rate from the last half of the usable objective gaps.

    Least-squares slope of log(f_k - f*) against k over the trailing half
    of the entries that sit above the guard ``1e-12 (1 + |f*|)``,
    exponentiated.
    """
    guard = 1e-12 * (1.0 + abs(f_star_hat))
    ks, logs = [], []
    for k, f in enumerate(objectives):
        gap = f - f_star_hat
        if gap > guard:
            ks.append(k)
            logs.append(math.log(gap))
    if len(ks) < 3:
        raise InsufficientData("need at least 3 objectives above the reference "
                               "optimum to fit a rate")
    half = len(ks) // 2
    ks_fit, logs_fit = ks[half:], logs[half:]
    if len(ks_fit) < 2:
        raise InsufficientData("not enough points in the trailing half")
    slope = np.polyfit(ks_fit, logs_fit, 1)[0]
    return float(math.exp(slope))


def kkt_residual(prog: DcProgram, x: tuple, y_recovered: tuple,
                 x_lin: Optional[tuple] = None) -> float:
    """First-order optimality residual ||grad g(x) + y - grad h(x_lin)||_F,
    normalized by the gradient scale.

    ``x_lin`` defaults to ``x`` (the fixed-point reading).  Passing the
    linearization point of the final subproblem instead measures the
    subproblem-optimality certificate, which is what the recovered dual
    actually satisfies at finite outer tolerance.
    """
    gg = prog.grad_g(x)
    gh = prog.grad_h(x if x_lin is None else x_lin)
    num = math.sqrt(sum(
        float(np.tensordot(r, r, axes=2))
        for r in (g + y - h for g, y, h in zip(gg, y_recovered, gh))))
    scale = 1.0 + max(
        math.sqrt(sum(float(np.tensordot(g, g, axes=2)) for g in gg)),
        math.sqrt(sum(float(np.tensordot(h, h, axes=2)) for h in gh)))
    return num / scale


def h_conjugate_for(inst) -> Optional[HConjugate]:
    """Conjugate handles for an instance, or None when alpha degenerates."""
    if isinstance(inst, BcPrivateInstance):
        return h_conjugate_bc_private(inst)
    if isinstance(inst, BcCommonInstance):
        if inst.alpha <= 0.0:
            return None
        return h_conjugate_bc_common(inst)
    if isinstance(inst, BrascampLiebInstance):
        return h_conjugate_brascamp_lieb(inst)
    raise TypeError(f"unknown instance type {type(inst).__name__}")
