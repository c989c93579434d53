"""Euclidean projections and closed-form proximal operators.

This module contains the per-iteration workhorses of the inner solver:
projections onto the PSD cone and the matrix cap set ``{X <= C}``, the
Moreau-decomposition prox of indicator conjugates, and closed-form
minimizers of ``-c log det(X + S) + <A, X>`` over the PSD cone, the cap
set, and the open PD cone.  The log-det proxes reduce to scalar problems
after a congruence transform by the square root of the shift (or of
``C + S`` for the cap set) and are exact up to eigendecomposition
round-off.

Bregman kernels are described by :class:`KernelSpec`; the distances they
generate are evaluated by :func:`bregman_distance` and their
strong-convexity modulus over a bounded box is estimated by
:func:`strong_convexity_bound` (used for stepsize selection).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .symmat import (
    NotPd,
    frob_inner,
    inv_pd,
    is_pd,
    logdet_pd,
    sym_eig,
    sym_sqrt,
    symmetrize,
)


class Unbounded(ValueError):
    """The prox objective has no finite minimizer (operand eigenvalue <= 0)."""


class OutOfDomain(ValueError):
    """Argument lies outside the kernel/function domain."""


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class KernelSpec:
    """Bregman kernel descriptor.

    kind: "euclidean" for phi(X) = ||X||_F^2 / 2, "logdet_shifted" for
    phi(X) = -log det(X + shift) with shift > 0, or "logdet_barrier" for
    phi(X) = -log det X.
    """

    kind: str
    shift: Optional[np.ndarray] = None


EUCLIDEAN = KernelSpec("euclidean")


def logdet_shifted(shift: np.ndarray) -> KernelSpec:
    shift = symmetrize(shift)
    if not is_pd(shift):
        raise NotPd("log-det kernel shift must be positive definite")
    return KernelSpec("logdet_shifted", shift)


def logdet_barrier() -> KernelSpec:
    return KernelSpec("logdet_barrier")


def bregman_distance(kernel: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    """Bregman distance d(x, y) = phi(x) - phi(y) - <grad phi(y), x - y>."""
    x = symmetrize(x)
    y = symmetrize(y)
    if kernel.kind == "euclidean":
        d = x - y
        return 0.5 * float(np.tensordot(d, d, axes=2))
    if kernel.kind == "logdet_shifted":
        xs, ys = x + kernel.shift, y + kernel.shift
    elif kernel.kind == "logdet_barrier":
        xs, ys = x, y
    else:
        raise ValueError(f"unknown kernel kind {kernel.kind!r}")
    try:
        ld_x = logdet_pd(xs)
        ys_inv = inv_pd(ys)
        ld_y = logdet_pd(ys)
    except NotPd as exc:
        raise OutOfDomain("point outside the log-det kernel domain") from exc
    return -ld_x + ld_y + frob_inner(ys_inv, x - y)


def strong_convexity_bound(kernel: KernelSpec, box_upper: np.ndarray) -> float:
    """Lower bound on the kernel's strong-convexity modulus over 0 <= X <= box.

    For the log-det kernels the Hessian satisfies
    ``<D, (X+S)^-1 D (X+S)^-1> >= ||D||_F^2 / lam_max(box + S)^2`` on the
    box, so the modulus is ``1 / lam_max(box + S)^2``; the Euclidean
    kernel is 1-strongly convex everywhere.
    """
    if kernel.kind == "euclidean":
        return 1.0
    if kernel.kind == "logdet_shifted":
        top = symmetrize(box_upper) + kernel.shift
    elif kernel.kind == "logdet_barrier":
        top = symmetrize(box_upper)
    else:
        raise ValueError(f"unknown kernel kind {kernel.kind!r}")
    lam_max = float(np.linalg.eigvalsh(top).max())
    if lam_max <= 0.0:
        raise OutOfDomain("box upper bound must have a positive top eigenvalue")
    return 1.0 / lam_max**2


# ---------------------------------------------------------------------------
# projections


def project_psd(m: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix (eigenvalues clipped at zero)."""
    q, lam = sym_eig(m)
    pos = np.clip(lam, 0.0, None)
    out = (q * pos) @ q.T
    return 0.5 * (out + out.T)


def project_cap(m: np.ndarray, cap: np.ndarray) -> np.ndarray:
    """Frobenius-nearest point of the cap set {X | X <= cap}."""
    m = np.asarray(m, dtype=float)
    cap = np.asarray(cap, dtype=float)
    if m.shape != cap.shape:
        raise ValueError(f"dimension mismatch: {m.shape} vs {cap.shape}")
    return cap - project_psd(cap - m)


def prox_conj_indicator(z: np.ndarray, sigma: float,
                        proj: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Prox of sigma * (indicator conjugate) via the Moreau decomposition.

    ``prox_{sigma f*}(z) = z - sigma * proj(z / sigma)`` where ``proj`` is
    the Euclidean projection onto the indicator's set.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return z - sigma * proj(z / sigma)


# ---------------------------------------------------------------------------
# closed-form log-det proxes
#
# The prepared classes factor the shift (or cap + shift) square root once
# and are reused across thousands of inner iterations; the plain functions
# below them are one-shot conveniences with the same semantics.


class PsdLogDetProx:
    """Minimizer of -c log det(X + shift) + <A, X> over X >= 0.

    With ``shift^{1/2} (A/c) shift^{1/2} = Q diag(gam) Q^T`` the solution is
    ``shift^{1/2} Q diag(psi(gam)) Q^T shift^{1/2}`` where
    ``psi(gam) = max((1 - gam) / gam, 0)``.  Requires all ``gam > 0``
    (otherwise the objective is unbounded below along the offending
    eigendirection).
    """

    def __init__(self, shift: np.ndarray):
        self.shift = symmetrize(shift)
        q, lam = sym_eig(self.shift)
        if lam.min() <= 0.0:
            raise NotPd("shift must be positive definite")
        self.root = symmetrize(q @ (np.sqrt(lam)[:, None] * q.T))
        self.root_inv = symmetrize(q @ ((1.0 / np.sqrt(lam))[:, None] * q.T))

    def solve(self, a: np.ndarray, c: float = 1.0, want_inverse: bool = False):
        if c <= 0:
            raise ValueError("coefficient c must be positive")
        s = self.root @ (np.asarray(a, dtype=float) / c) @ self.root
        q, gam = sym_eig(0.5 * (s + s.T))
        if gam.min() <= 0.0:
            raise Unbounded(f"operand eigenvalue {gam.min():.3e} <= 0 after scaling: "
                            "objective unbounded below over the PSD cone")
        psi = np.maximum((1.0 - gam) / gam, 0.0)
        b = self.root @ q
        x = (b * psi) @ b.T
        x = 0.5 * (x + x.T)
        if not want_inverse:
            return x
        # (x + shift)^-1 from the same eigendecomposition: psi + 1 > 0.
        bi = self.root_inv @ q
        inv = (bi * (1.0 / (psi + 1.0))) @ bi.T
        return x, 0.5 * (inv + inv.T)


class CapLogDetProx:
    """Minimizer of -c log det(X + shift) + <A, X> over X <= cap.

    With ``R = (cap + shift)^{1/2}`` and ``R (A/c) R = Q diag(gam) Q^T`` the
    solution is ``R Q diag(psi(gam)) Q^T R - shift`` where ``psi(gam) = 1``
    for ``gam <= 1`` and ``1/gam`` otherwise.  The feasible region of the
    scalar reduction is (0, 1], so the formula covers indefinite operands
    (gam <= 0) as well: the minimizer sits at the cap.
    """

    def __init__(self, shift: np.ndarray, cap: np.ndarray):
        self.shift = symmetrize(shift)
        self.cap = symmetrize(cap)
        if not is_pd(self.shift):
            raise NotPd("shift must be positive definite")
        q, lam = sym_eig(self.cap + self.shift)
        if lam.min() <= 0.0:
            raise NotPd("cap + shift must be positive definite")
        self.root = symmetrize(q @ (np.sqrt(lam)[:, None] * q.T))
        self.root_inv = symmetrize(q @ ((1.0 / np.sqrt(lam))[:, None] * q.T))

    def solve(self, a: np.ndarray, c: float = 1.0, want_inverse: bool = False):
        if c <= 0:
            raise ValueError("coefficient c must be positive")
        s = self.root @ (np.asarray(a, dtype=float) / c) @ self.root
        q, gam = sym_eig(0.5 * (s + s.T))
        psi = np.where(gam > 1.0, 1.0 / np.maximum(gam, 1.0), 1.0)
        b = self.root @ q
        x = (b * psi) @ b.T - self.shift
        x = 0.5 * (x + x.T)
        if not want_inverse:
            return x
        bi = self.root_inv @ q
        inv = (bi * (1.0 / psi)) @ bi.T
        return x, 0.5 * (inv + inv.T)


def prox_logdet_psd(a: np.ndarray, sigma_shift: np.ndarray, c: float = 1.0) -> np.ndarray:
    """One-shot minimizer of -c log det(X + sigma_shift) + <A, X> over X >= 0."""
    return PsdLogDetProx(sigma_shift).solve(symmetrize(a), c)


def prox_logdet_cap(a: np.ndarray, sigma_shift: np.ndarray, cap: np.ndarray,
                    c: float = 1.0) -> np.ndarray:
    """One-shot minimizer of -c log det(X + sigma_shift) + <A, X> over X <= cap."""
    return CapLogDetProx(sigma_shift, cap).solve(symmetrize(a), c)


def prox_logdet_barrier(b: np.ndarray, c: float = 1.0) -> np.ndarray:
    """Minimizer of -c log det(U) + <B, U> over U > 0, namely c * B^-1."""
    if c <= 0:
        raise ValueError("coefficient c must be positive")
    try:
        return c * inv_pd(b)
    except NotPd as exc:
        raise Unbounded("operand not positive definite: objective unbounded "
                        "below over the PD cone") from exc


def prox_logdet_quadratic(p: np.ndarray, c: float, t: float,
                          shift: Optional[np.ndarray] = None) -> np.ndarray:
    """Euclidean prox: argmin -c log det(X + shift) + ||X - p||_F^2 / (2 t).

    Unconstrained in X (the log-det domain is enforced implicitly).  One
    eigendecomposition of ``p + shift`` plus n scalar quadratics
    ``z^2 - z p_i - c t = 0`` solved in closed form.  ``c = 0`` degenerates
    to the identity map.
    """
    if t <= 0:
        raise ValueError("stepsize t must be positive")
    if c < 0:
        raise ValueError("coefficient c must be nonnegative")
    p = symmetrize(p)
    if c == 0.0:
        return p
    base = p if shift is None else p + shift
    q, lam = sym_eig(base)
    z = 0.5 * (lam + np.sqrt(lam**2 + 4.0 * c * t))
    x = (q * z) @ q.T
    if shift is not None:
        x = x - shift
    return 0.5 * (x + x.T)
