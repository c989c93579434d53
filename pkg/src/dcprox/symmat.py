"""Dense symmetric-matrix primitives shared by every solver component.

All routines operate on plain ``numpy.ndarray`` values.  A "symmetric
matrix" here is a square float array whose skew part is negligible;
:func:`symmetrize` is the canonical constructor and every public
operation symmetrizes defensively, so downstream code never has to
worry about round-off asymmetry accumulating through matrix products.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg


class InvalidInput(ValueError):
    """Input is not a valid symmetric matrix (non-finite, non-square, skew)."""


class NotPd(ValueError):
    """Matrix is not positive definite (Cholesky factorization failed)."""


class NotPsd(ValueError):
    """Matrix has an eigenvalue too negative to be round-off noise."""


#: Relative skew tolerance accepted at construction.
SKEW_TOL = 1e-12


def symmetrize(m: np.ndarray, tol: float = SKEW_TOL) -> np.ndarray:
    """Validate and return the exactly symmetrized copy ``(m + m.T) / 2``.

    Raises :class:`InvalidInput` if ``m`` is not square, contains
    non-finite entries, or its skew part exceeds ``tol * (1 + max|m|)``.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInput("matrix contains non-finite entries")
    scale = 1.0 + (np.abs(m).max() if m.size else 0.0)
    skew = np.abs(m - m.T).max() if m.size else 0.0
    if skew > tol * scale:
        raise InvalidInput(f"matrix is not symmetric: max skew {skew:.3e} exceeds "
                           f"{tol:.1e} * (1 + max|entry|)")
    return 0.5 * (m + m.T)


class SpectralDecomp(NamedTuple):
    """Eigendecomposition ``Q @ diag(lam) @ Q.T`` with ``lam`` sorted descending."""

    Q: np.ndarray
    lam: np.ndarray


def sym_eig(m: np.ndarray) -> SpectralDecomp:
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending."""
    m = symmetrize(m)
    lam, q = np.linalg.eigh(m)
    return SpectralDecomp(Q=np.ascontiguousarray(q[:, ::-1]), lam=lam[::-1].copy())


def sym_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root ``R`` with ``R @ R == m``.

    Eigenvalues down to ``-1e-10 * ||m||_F`` are treated as round-off and
    clamped to zero; anything below ``-1e-6 * ||m||_F`` raises
    :class:`NotPsd`.
    """
    m = symmetrize(m)
    q, lam = sym_eig(m)
    fro = np.linalg.norm(m, "fro")
    if lam.min(initial=0.0) < -1e-6 * fro:
        raise NotPsd(f"matrix is not PSD: min eigenvalue {lam.min():.3e} "
                     f"vs Frobenius norm {fro:.3e}")
    root = q @ (np.sqrt(np.clip(lam, 0.0, None))[:, None] * q.T)
    return 0.5 * (root + root.T)


def logdet_pd(m: np.ndarray) -> float:
    """log det of a positive definite matrix via Cholesky factorization."""
    m = symmetrize(m)
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPd("matrix is not positive definite") from exc
    return float(2.0 * np.sum(np.log(np.diag(chol))))


def inv_pd(m: np.ndarray) -> np.ndarray:
    """Inverse of a positive definite matrix via Cholesky solves."""
    m = symmetrize(m)
    try:
        c, low = scipy.linalg.cho_factor(m, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPd("matrix is not positive definite") from exc
    inv = scipy.linalg.cho_solve((c, low), np.eye(m.shape[0]), check_finite=False)
    return 0.5 * (inv + inv.T)


def is_pd(m: np.ndarray) -> bool:
    """Cheap positive-definiteness probe (Cholesky success)."""
    try:
        np.linalg.cholesky(0.5 * (m + m.T))
    except np.linalg.LinAlgError:
        return False
    return True


def frob_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Trace inner product ``<a, b> = sum_ij a_ij b_ij``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidInput(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.tensordot(a, b, axes=2))
