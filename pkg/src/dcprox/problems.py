"""Concrete DC programs: builders, gradients, splittings, synthetic data.

Three problem classes are supported, all constrained log-det programs
over symmetric matrices:

* ``bc-private``: min -log det(X + S1) + lam log det(X + S2) over
  0 <= X <= C.
* ``bc-common``: the two-block generalization over (X, Y) with
  X >= 0, Y >= 0, X + Y <= C; the subproblem is solved in the variables
  (U, W) = (X, X + Y) with the coupling W - U >= 0 moved to the dual.
* ``brascamp-lieb``: p diagonal blocks X_i with 0 <= X_i <= C_i and a
  concave part coupling the blocks through congruences A_ij X_i A_ij^T;
  the subproblem is fully block-separable.

Each builder returns a :class:`~dcprox.dca.DcProgram` whose
``build_subproblem`` produces the prox handles for the inner solver,
either with log-det Bregman kernels (closed-form generalized
projections) or with Euclidean kernels (eigendecomposition plus scalar
quadratics; set constraints that no longer align with the primal prox
move to extra dual blocks).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import cones
from .symmat import frob_inner, inv_pd, is_pd, logdet_pd, symmetrize
from .pdhg import LinearMapSpec, SubproblemSpec, identity_map
from .dca import DcProgram

KIND_BC_PRIVATE = "bc-private"
KIND_BC_COMMON = "bc-common"
KIND_BRASCAMP_LIEB = "brascamp-lieb"
KINDS = (KIND_BC_PRIVATE, KIND_BC_COMMON, KIND_BRASCAMP_LIEB)

VARIANT_BREGMAN = "bregman"
VARIANT_EUCLIDEAN = "euclidean"
VARIANTS = (VARIANT_BREGMAN, VARIANT_EUCLIDEAN)

#: Default ridge added to the Gram matrices of the brascamp-lieb class.
DEFAULT_RHO = 0.1


# ---------------------------------------------------------------------------
# instances


@dataclass
class BcPrivateInstance:
    sigma1: np.ndarray
    sigma2: np.ndarray
    cap: np.ndarray
    lam: float
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.sigma1.shape[0]

    def validate(self) -> None:
        self.sigma1 = symmetrize(self.sigma1)
        self.sigma2 = symmetrize(self.sigma2)
        self.cap = symmetrize(self.cap)
        if not (is_pd(self.sigma1) and is_pd(self.sigma2)):
            raise ValueError("sigma1 and sigma2 must be positive definite")
        if np.linalg.eigvalsh(self.cap).min() < -1e-10 * (1 + np.abs(self.cap).max()):
            raise ValueError("cap must be positive semidefinite")
        if not self.lam > 1.0:
            raise ValueError("lam must exceed 1")


@dataclass
class BcCommonInstance:
    sigma1: np.ndarray
    sigma2: np.ndarray
    cap: np.ndarray
    alpha: float
    beta: float
    lam: float
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.sigma1.shape[0]

    def validate(self) -> None:
        self.sigma1 = symmetrize(self.sigma1)
        self.sigma2 = symmetrize(self.sigma2)
        self.cap = symmetrize(self.cap)
        if not (is_pd(self.sigma1) and is_pd(self.sigma2)):
            raise ValueError("sigma1 and sigma2 must be positive definite")
        if np.linalg.eigvalsh(self.cap).min() < -1e-10 * (1 + np.abs(self.cap).max()):
            raise ValueError("cap must be positive semidefinite")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not self.beta > 0.0:
            raise ValueError("beta must be positive")
        if not self.lam > 1.0:
            raise ValueError("lam must exceed 1")


@dataclass
class BrascampLiebInstance:
    """Block instance: maps[i][j] is the m_j x n_i matrix applied to block i."""

    block_dims: list
    row_dims: list
    maps: list
    caps: list
    alpha: np.ndarray
    beta: np.ndarray
    rho: float
    meta: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return len(self.block_dims)

    @property
    def q(self) -> int:
        return len(self.row_dims)

    @property
    def n(self) -> int:
        return max(self.block_dims)

    def validate(self) -> None:
        if len(self.caps) != self.p or len(self.maps) != self.p:
            raise ValueError("caps and maps must have one entry per block")
        self.caps = [symmetrize(c) for c in self.caps]
        for i, ni in enumerate(self.block_dims):
            if self.caps[i].shape != (ni, ni):
                raise ValueError(f"cap {i} has wrong shape")
            if np.linalg.eigvalsh(self.caps[i]).min() < -1e-10 * (1 + np.abs(self.caps[i]).max()):
                raise ValueError(f"cap {i} must be positive semidefinite")
            for j, mj in enumerate(self.row_dims):
                a = np.asarray(self.maps[i][j], dtype=float)
                if a.shape != (mj, ni):
                    raise ValueError(f"map ({i},{j}) has wrong shape")
                sv = np.linalg.svd(a, compute_uv=False)
                if sv.min() <= 1e-10 * max(1.0, sv.max()):
                    raise ValueError(f"map ({i},{j}) is not full row rank")
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.alpha.shape != (self.q,) or np.any(self.alpha < 0):
            raise ValueError("alpha must be a nonnegative length-q vector")
        if self.beta.shape != (self.p,) or np.any(self.beta < 0):
            raise ValueError("beta must be a nonnegative length-p vector")
        if not self.rho > 0:
            raise ValueError("rho must be positive")


# ---------------------------------------------------------------------------
# shared feasibility helpers


def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())


def _max_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.T)).max())


def _box_residual(x: np.ndarray, cap: np.ndarray) -> float:
    """Worst eigenvalue violation of 0 <= x <= cap (0 when feasible)."""
    return max(0.0, -_min_eig(x), _max_eig(x - cap))


def _project_box(x: np.ndarray, cap: np.ndarray, sweeps: int = 50,
                 tol: float = 1e-12) -> np.ndarray:
    """Dykstra projection onto {0 <= X <= cap}, cheap for near-feasible x."""
    y = np.array(x, dtype=float)
    p = np.zeros_like(y)
    q = np.zeros_like(y)
    scale = 1.0 + float(np.abs(cap).max())
    for _ in range(sweeps):
        z = cones.project_psd(y + p)
        p = y + p - z
        y = cones.project_cap(z + q, cap)
        q = z + q - y
        if -_min_eig(y) <= tol * scale:
            break
    return y


def _repair_cap_interior(x: np.ndarray, cap: np.ndarray) -> np.ndarray:
    """Enforce x <= cap exactly while keeping x strictly PD.

    Used where the objective carries a log-det barrier on x itself: the
    raw iterate is PD by construction and only the dual-handled cap side
    is loose, but the cap projection may graze the PSD boundary, which a
    tiny diagonal lift undoes.
    """
    y = cones.project_cap(x, cap)
    lam_min = _min_eig(y)
    if lam_min <= 0.0:
        y = y + (1e-12 * (1.0 + float(np.abs(y).max())) - lam_min) * np.eye(y.shape[0])
    return y


# ---------------------------------------------------------------------------
# bc-private


def bc_private_program(inst: BcPrivateInstance,
                       kernel: str = VARIANT_BREGMAN) -> DcProgram:
    """DC program for min -log det(X+S1) + lam log det(X+S2), 0 <= X <= C."""
    inst.validate()
    s1, s2, cap, lam = inst.sigma1, inst.sigma2, inst.cap, inst.lam
    cap_scale = 1.0 + _max_eig(cap)

    def eval_g(x):
        return -logdet_pd(x[0] + s1)

    def eval_h(x):
        return -lam * logdet_pd(x[0] + s2)

    def grad_g(x):
        return (-inv_pd(x[0] + s1),)

    def grad_h(x):
        return (-lam * inv_pd(x[0] + s2),)

    def feasible_start():
        return (0.5 * cap,)

    def feas_residual(x):
        return _box_residual(x[0], cap)

    def feas_check(x, tol):
        return feas_residual(x) <= tol * cap_scale

    if kernel == VARIANT_BREGMAN:
        build = _bc_private_bregman_builder(inst)
    elif kernel == VARIANT_EUCLIDEAN:
        build = _bc_private_euclidean_builder(inst)
    else:
        raise ValueError(f"unknown kernel variant {kernel!r}")

    return DcProgram(eval_g=eval_g, eval_h=eval_h, grad_g=grad_g, grad_h=grad_h,
                     build_subproblem=build, feasible_start=feasible_start,
                     feasibility_check=feas_check,
                     feasibility_residual=feas_residual,
                     name=f"{KIND_BC_PRIVATE}/{kernel}")


def _bc_private_bregman_builder(inst: BcPrivateInstance):
    s1, s2, cap, lam = inst.sigma1, inst.sigma2, inst.cap, inst.lam
    psd_prox = cones.PsdLogDetProx(s1)
    kernels = (cones.logdet_shifted(s1),)

    def build(x_k):
        frozen = lam * inv_pd(x_k[0] + s2)  # = -grad h(x_k)

        def primal_prox(u, astar_v, tau, cache):
            inv_prev = cache[0] if cache is not None else inv_pd(u[0] + s1)
            c = 1.0 + 1.0 / tau
            operand = astar_v[0] + frozen + inv_prev / tau
            x_new, inv_new = psd_prox.solve(operand, c, want_inverse=True)
            return (x_new,), (inv_new,)

        def dual_prox(z, sigma):
            return (cones.prox_conj_indicator(
                z[0], sigma, lambda m: cones.project_cap(m, cap)),)

        def sub_objective(u):
            return -logdet_pd(u[0] + s1) + frob_inner(frozen, u[0])

        def feasibility(u, tol):
            return _min_eig(u[0]) >= -tol * (1.0 + _max_eig(u[0]))

        def certificate(u, v, tau):
            # One extra prox evaluation recovers the PSD-cone multiplier
            # from the prox KKT; at a fixed point the assembled element
            # satisfies grad g(u) + y = grad h(x_k) up to the residual.
            c = 1.0 + 1.0 / tau
            operand = v[0] + frozen + inv_pd(u[0] + s1) / tau
            _, inv_plus = psd_prox.solve(operand, c, want_inverse=True)
            normal = c * inv_plus - operand
            return (v[0] + normal,)

        return SubproblemSpec(primal_prox=primal_prox, dual_prox=dual_prox,
                              map=identity_map(), objective=sub_objective,
                              kernels=kernels, box_upper=(cap,),
                              initial_primal=(x_k[0].copy(),),
                              dual_signs=(1,), feasibility=feasibility,
                              kkt_certificate=certificate,
                              repair=lambda u: (_project_box(u[0], cap),))

    return build


def _bc_private_euclidean_builder(inst: BcPrivateInstance):
    # Euclidean primal prox of the shifted log-det has no closed form over
    # the PSD cone, so both component sets live in the dual: A u = (u, u).
    s1, s2, cap, lam = inst.sigma1, inst.sigma2, inst.cap, inst.lam
    lmap = LinearMapSpec(forward=lambda u: (u[0], u[0]),
                         adjoint=lambda v: (v[0] + v[1],),
                         norm_bound=math.sqrt(2.0))
    kernels = (cones.EUCLIDEAN,)

    def build(x_k):
        frozen = lam * inv_pd(x_k[0] + s2)

        def primal_prox(u, astar_v, tau, cache):
            p = u[0] - tau * (astar_v[0] + frozen)
            return (cones.prox_logdet_quadratic(p, c=1.0, t=tau, shift=s1),), None

        def dual_prox(z, sigma):
            v_psd = z[0] - cones.project_psd(z[0])
            v_cap = cones.prox_conj_indicator(
                z[1], sigma, lambda m: cones.project_cap(m, cap))
            return (v_psd, v_cap)

        def sub_objective(u):
            return -logdet_pd(u[0] + s1) + frob_inner(frozen, u[0])

        def feasibility(u, tol):
            return _min_eig(u[0] + s1) > 0.0

        def certificate(u, v, tau):
            # The primal prox is unconstrained, so the dual blocks carry
            # the whole normal element.
            return (v[0] + v[1],)

        return SubproblemSpec(primal_prox=primal_prox, dual_prox=dual_prox,
                              map=lmap, objective=sub_objective,
                              kernels=kernels, box_upper=(cap,),
                              initial_primal=(x_k[0].copy(),),
                              dual_signs=(-1, 1), feasibility=feasibility,
                              kkt_certificate=certificate,
                              repair=lambda u: (_project_box(u[0], cap),))

    return build


# ---------------------------------------------------------------------------
# bc-common


def bc_common_program(inst: BcCommonInstance,
                      kernel: str = VARIANT_BREGMAN) -> DcProgram:
    """Two-block DC program over (X, Y) with X >= 0, Y >= 0, X + Y <= C."""
    inst.validate()
    s1, s2, cap = inst.sigma1, inst.sigma2, inst.cap
    alpha, beta, lam = inst.alpha, inst.beta, inst.lam
    cap_scale = 1.0 + _max_eig(cap)

    def eval_g(x):
        xm, ym = x
        return -beta * logdet_pd(xm + ym + s2) - logdet_pd(xm + s1)

    def eval_h(x):
        xm, ym = x
        val = -lam * logdet_pd(xm + s2)
        if alpha > 0.0:
            val -= alpha * logdet_pd(xm + ym + s1)
        return val

    def grad_g(x):
        xm, ym = x
        si = inv_pd(xm + ym + s2)
        return (-beta * si - inv_pd(xm + s1), -beta * si)

    def grad_h(x):
        xm, ym = x
        si = alpha * inv_pd(xm + ym + s1) if alpha > 0.0 else np.zeros_like(xm)
        return (-si - lam * inv_pd(xm + s2), -si)

    def feasible_start():
        return (0.5 * cap, 0.25 * cap)

    def feas_residual(x):
        xm, ym = x
        return max(0.0, -_min_eig(xm), -_min_eig(ym), _max_eig(xm + ym - cap))

    def feas_check(x, tol):
        return feas_residual(x) <= tol * cap_scale

    def post_flags(x):
        lam_min = _min_eig(x[1])
        if lam_min < -1e-6:
            return [f"recovered Y block not PSD within 1e-6 "
                    f"(min eigenvalue {lam_min:.3e})"]
        return []

    if kernel == VARIANT_BREGMAN:
        build = _bc_common_bregman_builder(inst)
    elif kernel == VARIANT_EUCLIDEAN:
        build = _bc_common_euclidean_builder(inst)
    else:
        raise ValueError(f"unknown kernel variant {kernel!r}")

    return DcProgram(eval_g=eval_g, eval_h=eval_h, grad_g=grad_g, grad_h=grad_h,
                     build_subproblem=build, feasible_start=feasible_start,
                     feasibility_check=feas_check,
                     feasibility_residual=feas_residual,
                     name=f"{KIND_BC_COMMON}/{kernel}",
                     post_flags=post_flags)


def _bc_common_to_uw(x):
    return (x[0].copy(), x[0] + x[1])


def _bc_common_from_uw(u):
    return (u[0], u[1] - u[0])


def _bc_common_frozen(inst, x_k):
    """Linearization terms -grad h(x_k) in the (U, W) coordinates."""
    xm, ym = x_k
    fro_u = inst.lam * inv_pd(xm + inst.sigma2)
    if inst.alpha > 0.0:
        fro_w = inst.alpha * inv_pd(xm + ym + inst.sigma1)
    else:
        fro_w = np.zeros_like(xm)
    return fro_u, fro_w


def _bc_common_bregman_builder(inst: BcCommonInstance):
    s1, s2, cap, beta = inst.sigma1, inst.sigma2, inst.cap, inst.beta
    psd_prox = cones.PsdLogDetProx(s1)
    cap_prox = cones.CapLogDetProx(s2, cap)
    kernels = (cones.logdet_shifted(s1), cones.logdet_shifted(s2))
    lmap = LinearMapSpec(forward=lambda u: (u[1] - u[0],),
                         adjoint=lambda v: (-v[0], v[0]),
                         norm_bound=math.sqrt(2.0))

    def build(x_k):
        fro_u, fro_w = _bc_common_frozen(inst, x_k)

        def primal_prox(u, astar_v, tau, cache):
            if cache is None:
                cache = (inv_pd(u[0] + s1), inv_pd(u[1] + s2))
            cu = 1.0 + 1.0 / tau
            cw = beta + 1.0 / tau
            op_u = astar_v[0] + fro_u + cache[0] / tau
            op_w = astar_v[1] + fro_w + cache[1] / tau
            u_new, inv_u = psd_prox.solve(op_u, cu, want_inverse=True)
            w_new, inv_w = cap_prox.solve(op_w, cw, want_inverse=True)
            return (u_new, w_new), (inv_u, inv_w)

        def dual_prox(z, sigma):
            return (z[0] - cones.project_psd(z[0]),)

        def sub_objective(u):
            return (-logdet_pd(u[0] + s1) + frob_inner(fro_u, u[0])
                    - beta * logdet_pd(u[1] + s2) + frob_inner(fro_w, u[1]))

        def feasibility(u, tol):
            scale = 1.0 + max(_max_eig(u[0]), _max_eig(cap))
            return (_min_eig(u[0]) >= -tol * scale
                    and _max_eig(u[1] - cap) <= tol * scale)

        def certificate(u, v, tau):
            cu = 1.0 + 1.0 / tau
            cw = beta + 1.0 / tau
            op_u = -v[0] + fro_u + inv_pd(u[0] + s1) / tau
            op_w = v[0] + fro_w + inv_pd(u[1] + s2) / tau
            _, inv_u = psd_prox.solve(op_u, cu, want_inverse=True)
            _, inv_w = cap_prox.solve(op_w, cw, want_inverse=True)
            n_u = cu * inv_u - op_u
            n_w = cw * inv_w - op_w
            # Pull the (U, W)-space element back to (X, Y) coordinates
            # through the inverse-adjoint of (U, W) = (X, X + Y).
            return (n_u + n_w, v[0] + n_w)

        return SubproblemSpec(primal_prox=primal_prox, dual_prox=dual_prox,
                              map=lmap, objective=sub_objective,
                              kernels=kernels, box_upper=(cap, cap),
                              initial_primal=_bc_common_to_uw(x_k),
                              dual_signs=(-1,), feasibility=feasibility,
                              kkt_certificate=certificate,
                              from_subproblem_vars=_bc_common_from_uw)

    return build


def _bc_common_euclidean_builder(inst: BcCommonInstance):
    # Constraints U >= 0 and W <= C join W - U >= 0 on the dual side;
    # the primal proxes are plain shifted log-det quadratics.
    s1, s2, cap, beta = inst.sigma1, inst.sigma2, inst.cap, inst.beta
    kernels = (cones.EUCLIDEAN, cones.EUCLIDEAN)
    lmap = LinearMapSpec(
        forward=lambda u: (u[1] - u[0], u[0], u[1]),
        adjoint=lambda v: (-v[0] + v[1], v[0] + v[2]),
        norm_bound=math.sqrt(3.0))

    def build(x_k):
        fro_u, fro_w = _bc_common_frozen(inst, x_k)

        def primal_prox(u, astar_v, tau, cache):
            p_u = u[0] - tau * (astar_v[0] + fro_u)
            p_w = u[1] - tau * (astar_v[1] + fro_w)
            u_new = cones.prox_logdet_quadratic(p_u, c=1.0, t=tau, shift=s1)
            w_new = cones.prox_logdet_quadratic(p_w, c=beta, t=tau, shift=s2)
            return (u_new, w_new), None

        def dual_prox(z, sigma):
            v1 = z[0] - cones.project_psd(z[0])
            v2 = z[1] - cones.project_psd(z[1])
            v3 = cones.prox_conj_indicator(
                z[2], sigma, lambda m: cones.project_cap(m, cap))
            return (v1, v2, v3)

        def sub_objective(u):
            return (-logdet_pd(u[0] + s1) + frob_inner(fro_u, u[0])
                    - beta * logdet_pd(u[1] + s2) + frob_inner(fro_w, u[1]))

        def feasibility(u, tol):
            return _min_eig(u[0] + s1) > 0.0 and _min_eig(u[1] + s2) > 0.0

        def certificate(u, v, tau):
            return (v[1] + v[2], v[0] + v[2])

        return SubproblemSpec(primal_prox=primal_prox, dual_prox=dual_prox,
                              map=lmap, objective=sub_objective,
                              kernels=kernels, box_upper=(cap, cap),
                              initial_primal=_bc_common_to_uw(x_k),
                              dual_signs=(-1, -1, 1), feasibility=feasibility,
                              kkt_certificate=certificate,
                              from_subproblem_vars=_bc_common_from_uw,
                              repair=lambda u: (cones.project_psd(u[0]),
                                                cones.project_cap(u[1], cap)))

    return build


# ---------------------------------------------------------------------------
# brascamp-lieb


def _gram_matrices(inst: BrascampLiebInstance, x):
    grams = []
    for j in range(inst.q):
        g = inst.rho * np.eye(inst.row_dims[j])
        for i in range(inst.p):
            a = inst.maps[i][j]
            g = g + a @ x[i] @ a.T
        grams.append(0.5 * (g + g.T))
    return grams


def gbl_program(inst: BrascampLiebInstance,
                kernel: str = VARIANT_BREGMAN) -> DcProgram:
    """Block-separable DC program for the generalized inequality constant."""
    inst.validate()
    p = inst.p
    beta = inst.beta
    alpha = inst.alpha
    caps = inst.caps
    cap_scale = 1.0 + max(_max_eig(c) for c in caps)

    def eval_g(x):
        return -sum(float(b) * logdet_pd(xi) for b, xi in zip(beta, x) if b > 0.0)

    def eval_h(x):
        grams = _gram_matrices(inst, x)
        return -sum(float(a) * logdet_pd(g) for a, g in zip(alpha, grams) if a > 0.0)

    def grad_g(x):
        return tuple(-float(b) * inv_pd(xi) if b > 0.0 else np.zeros_like(xi)
                     for b, xi in zip(beta, x))

    def grad_h(x):
        grams = _gram_matrices(inst, x)
        inv_grams = [inv_pd(g) for g in grams]
        out = []
        for i in range(p):
            acc = np.zeros((inst.block_dims[i], inst.block_dims[i]))
            for j in range(inst.q):
                if alpha[j] > 0.0:
                    a = inst.maps[i][j]
                    acc = acc + float(alpha[j]) * (a.T @ inv_grams[j] @ a)
            out.append(-0.5 * (acc + acc.T))
        return tuple(out)

    def feasible_start():
        return tuple(0.5 * c + 1e-8 * np.eye(c.shape[0]) for c in caps)

    def feas_residual(x):
        return max(_box_residual(xi, c) for xi, c in zip(x, caps))

    def feas_check(x, tol):
        return feas_residual(x) <= tol * cap_scale

    if kernel == VARIANT_BREGMAN:
        build = _gbl_bregman_builder(inst)
    elif kernel == VARIANT_EUCLIDEAN:
        if np.any(beta <= 0.0):
            raise ValueError("the euclidean variant requires beta > 0 for every "
                             "block (nothing else enforces the PSD constraint)")
        build = _gbl_euclidean_builder(inst)
    else:
        raise ValueError(f"unknown kernel variant {kernel!r}")

    return DcProgram(eval_g=eval_g, eval_h=eval_h, grad_g=grad_g, grad_h=grad_h,
                     build_subproblem=build, feasible_start=feasible_start,
                     feasibility_check=feas_check,
                     feasibility_residual=feas_residual,
                     name=f"{KIND_BRASCAMP_LIEB}/{kernel}")


def _gbl_frozen(inst: BrascampLiebInstance, x_k):
    """Per-block linearization terms M_i = -grad_i h(x_k) (PSD)."""
    grams = _gram_matrices(inst, x_k)
    inv_grams = [inv_pd(g) for g in grams]
    frozen = []
    for i in range(inst.p):
        acc = np.zeros((inst.block_dims[i], inst.block_dims[i]))
        for j in range(inst.q):
            if inst.alpha[j] > 0.0:
                a = inst.maps[i][j]
                acc = acc + float(inst.alpha[j]) * (a.T @ inv_grams[j] @ a)
        frozen.append(0.5 * (acc + acc.T))
    return frozen


def _gbl_bregman_builder(inst: BrascampLiebInstance):
    p, beta, caps = inst.p, inst.beta, inst.caps
    kernels = tuple(cones.logdet_barrier() for _ in range(p))

    def build(x_k):
        frozen = _gbl_frozen(inst, x_k)

        def primal_prox(u, astar_v, tau, cache):
            if cache is None:
                cache = tuple(inv_pd(ui) for ui in u)
            out, new_cache = [], []
            for i in range(p):
                c = float(beta[i]) + 1.0 / tau
                operand = frozen[i] + astar_v[i] + cache[i] / tau
                ui = cones.prox_logdet_barrier(operand, c)
                out.append(ui)
                new_cache.append(operand / c)  # = ui^-1, exactly
            return tuple(out), tuple(new_cache)

        def dual_prox(z, sigma):
            return tuple(cones.prox_conj_indicator(
                zi, sigma, lambda m, c=caps[i]: cones.project_cap(m, c))
                for i, zi in enumerate(z))

        def sub_objective(u):
            val = 0.0
            for i in range(p):
                if beta[i] > 0.0:
                    val -= float(beta[i]) * logdet_pd(u[i])
                val += frob_inner(frozen[i], u[i])
            return val

        def feasibility(u, tol):
            return all(_min_eig(ui) > -tol for ui in u)

        def certificate(u, v, tau):
            # The barrier absorbs the PSD constraint and the prox
            # stationarity is exact, so the dual blocks are the full
            # normal element.
            return tuple(v)

        return SubproblemSpec(primal_prox=primal_prox, dual_prox=dual_prox,
                              map=identity_map(), objective=sub_objective,
                              kernels=kernels, box_upper=tuple(caps),
                              initial_primal=tuple(x.copy() for x in x_k),
                              dual_signs=(1,) * p, feasibility=feasibility,
                              kkt_certificate=certificate,
                              repair=lambda u: tuple(
                                  _repair_cap_interior(ui, caps[i])
                                  for i, ui in enumerate(u)))

    return build


def _gbl_euclidean_builder(inst: BrascampLiebInstance):
    p, beta, caps = inst.p, inst.beta, inst.caps
    kernels = tuple(cones.EUCLIDEAN for _ in range(p))

    def build(x_k):
        frozen = _gbl_frozen(inst, x_k)

        def primal_prox(u, astar_v, tau, cache):
            out = []
            for i in range(p):
                pi = u[i] - tau * (frozen[i] + astar_v[i])
                out.append(cones.prox_logdet_quadratic(pi, c=float(beta[i]), t=tau))
            return tuple(out), None

        def dual_prox(z, sigma):
            return tuple(cones.prox_conj_indicator(
                zi, sigma, lambda m, c=caps[i]: cones.project_cap(m, c))
                for i, zi in enumerate(z))

        def sub_objective(u):
            val = 0.0
            for i in range(p):
                if beta[i] > 0.0:
                    val -= float(beta[i]) * logdet_pd(u[i])
                val += frob_inner(frozen[i], u[i])
            return val

        def feasibility(u, tol):
            return all(_min_eig(ui) > -tol for ui in u)

        def certificate(u, v, tau):
            return tuple(v)

        return SubproblemSpec(primal_prox=primal_prox, dual_prox=dual_prox,
                              map=identity_map(), objective=sub_objective,
                              kernels=kernels, box_upper=tuple(caps),
                              initial_primal=tuple(x.copy() for x in x_k),
                              dual_signs=(1,) * p, feasibility=feasibility,
                              kkt_certificate=certificate,
                              repair=lambda u: tuple(
                                  _repair_cap_interior(ui, caps[i])
                                  for i, ui in enumerate(u)))

    return build


def build_program(inst, kernel: str = VARIANT_BREGMAN) -> DcProgram:
    """Dispatch an instance of any kind to its program builder."""
    if isinstance(inst, BcPrivateInstance):
        return bc_private_program(inst, kernel)
    if isinstance(inst, BcCommonInstance):
        return bc_common_program(inst, kernel)
    if isinstance(inst, BrascampLiebInstance):
        return gbl_program(inst, kernel)
    raise TypeError(f"unknown instance type {type(inst).__name__}")


# ---------------------------------------------------------------------------
# synthetic instances


def _random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    m = rng.standard_normal((n, n))
    q, r = np.linalg.qr(m)
    return q * np.sign(np.diag(r))


def _random_spd(rng: np.random.Generator, n: int, cond: float) -> np.ndarray:
    """SPD matrix with eigenvalues log-spaced between 1 and cond."""
    eigs = np.logspace(0.0, math.log10(cond), n) if cond > 1.0 else np.ones(n)
    q = _random_orthogonal(rng, n)
    return symmetrize(q @ (eigs[:, None] * q.T))

def _random_cap(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random PSD cap, trace-normalized then rescaled to average eigenvalue
    in [0.5, 2].

    Cap eigenvalues are drawn from a bounded range: caps with near-zero
    eigenvalues crush the iterates against the barrier boundary, blow up
    the dual multipliers, and stall every first-order inner solver.
    """
    eigs = rng.uniform(0.3, 1.0, size=n)
    q = _random_orthogonal(rng, n)
    m = symmetrize(q @ (eigs[:, None] * q.T))
    m = m / np.trace(m)
    c = rng.uniform(0.5, 2.0)
    return c * n * m


def _random_full_row_rank(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    while True:
        a = rng.standard_normal((m, n))
        sv = np.linalg.svd(a, compute_uv=False)
        if sv.min() > 1e-8 * max(1.0, sv.max()):
            return a


def gen_synthetic(kind: str, n: int, seed: int, cond: float = 10.0):
    """Deterministic synthetic instance for the given problem kind.

    The same (kind, n, seed, cond) always produces bit-identical data.
    Covariance-like matrices have condition number exactly ``cond``;
    scalar parameters are drawn inside the ranges the problem classes
    require, bounded away from their degenerate endpoints.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if cond < 1.0:
        raise ValueError("cond must be at least 1")
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    rng = np.random.default_rng(seed)
    meta = {"kind": kind, "n": int(n), "seed": int(seed), "cond": float(cond)}

    if kind == KIND_BC_PRIVATE:
        inst = BcPrivateInstance(
            sigma1=_random_spd(rng, n, cond),
            sigma2=_random_spd(rng, n, cond),
            cap=_random_cap(rng, n),
            lam=float(1.0 + rng.uniform(0.25, 2.0)),
            meta=meta)
    elif kind == KIND_BC_COMMON:
        inst = BcCommonInstance(
            sigma1=_random_spd(rng, n, cond),
            sigma2=_random_spd(rng, n, cond),
            cap=_random_cap(rng, n),
            alpha=float(rng.uniform(0.1, 1.0)),
            beta=float(rng.uniform(0.25, 2.0)),
            lam=float(1.0 + rng.uniform(0.25, 2.0)),
            meta=meta)
    else:
        p = q = 3 if n > 1 else 1
        block_dims = [n] * p
        row_dims = [max(1, (n + 1) // 2)] * q
        maps = [[_random_full_row_rank(rng, row_dims[j], block_dims[i])
                 for j in range(q)] for i in range(p)]
        caps = [_random_cap(rng, ni) for ni in block_dims]
        inst = BrascampLiebInstance(
            block_dims=block_dims, row_dims=row_dims, maps=maps, caps=caps,
            alpha=rng.uniform(0.2, 1.0, size=q),
            beta=rng.uniform(0.25, 1.5, size=p),
            rho=DEFAULT_RHO,
            meta=meta)
    inst.validate()
    return inst


# ---------------------------------------------------------------------------
# serialization

INSTANCE_SCHEMA_VERSION = 1


def instance_to_dict(inst) -> dict:
    """JSON-ready document; floats round-trip exactly through json."""
    meta = dict(inst.meta) if inst.meta else {}
    doc = {"schema_version": INSTANCE_SCHEMA_VERSION, "meta": meta}
    if isinstance(inst, BcPrivateInstance):
        doc.update(kind=KIND_BC_PRIVATE, n=inst.n,
                   sigma1=inst.sigma1.tolist(), sigma2=inst.sigma2.tolist(),
                   cap=inst.cap.tolist(), lam=inst.lam)
    elif isinstance(inst, BcCommonInstance):
        doc.update(kind=KIND_BC_COMMON, n=inst.n,
                   sigma1=inst.sigma1.tolist(), sigma2=inst.sigma2.tolist(),
                   cap=inst.cap.tolist(), alpha=inst.alpha, beta=inst.beta,
                   lam=inst.lam)
    elif isinstance(inst, BrascampLiebInstance):
        doc.update(kind=KIND_BRASCAMP_LIEB, n=inst.n,
                   block_dims=list(inst.block_dims), row_dims=list(inst.row_dims),
                   maps=[[a.tolist() for a in row] for row in inst.maps],
                   caps=[c.tolist() for c in inst.caps],
                   alpha=inst.alpha.tolist(), beta=inst.beta.tolist(),
                   rho=inst.rho)
    else:
        raise TypeError(f"unknown instance type {type(inst).__name__}")
    return doc


def instance_from_dict(doc: dict):
    kind = doc.get("kind")
    meta = dict(doc.get("meta", {}))
    if kind == KIND_BC_PRIVATE:
        inst = BcPrivateInstance(
            sigma1=np.array(doc["sigma1"], dtype=float),
            sigma2=np.array(doc["sigma2"], dtype=float),
            cap=np.array(doc["cap"], dtype=float),
            lam=float(doc["lam"]), meta=meta)
    elif kind == KIND_BC_COMMON:
        inst = BcCommonInstance(
            sigma1=np.array(doc["sigma1"], dtype=float),
            sigma2=np.array(doc["sigma2"], dtype=float),
            cap=np.array(doc["cap"], dtype=float),
            alpha=float(doc["alpha"]), beta=float(doc["beta"]),
            lam=float(doc["lam"]), meta=meta)
    elif kind == KIND_BRASCAMP_LIEB:
        inst = BrascampLiebInstance(
            block_dims=[int(d) for d in doc["block_dims"]],
            row_dims=[int(d) for d in doc["row_dims"]],
            maps=[[np.array(a, dtype=float) for a in row] for row in doc["maps"]],
            caps=[np.array(c, dtype=float) for c in doc["caps"]],
            alpha=np.array(doc["alpha"], dtype=float),
            beta=np.array(doc["beta"], dtype=float),
            rho=float(doc["rho"]), meta=meta)
    else:
        raise ValueError(f"unknown instance kind {kind!r}")
    inst.validate()
    return inst


def dumps_instance(inst) -> str:
    return json.dumps(instance_to_dict(inst), indent=2, sort_keys=True) + "\n"


def save_instance(inst, path) -> None:
    Path(path).write_text(dumps_instance(inst))


def load_instance(path):
    return instance_from_dict(json.loads(Path(path).read_text()))
