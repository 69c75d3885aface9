"""Symmetric-matrix helpers: eigenvalue bounds, inertia and Schur complements.

All routines accept stacks of matrices (shape ``(..., n, n)``) unless noted and
rely on the symmetric eigensolver, so eigenvalues come back real and sorted.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMatrix, SingularBlock

__all__ = [
    "BlockPartition",
    "sym",
    "as_sym",
    "min_eigenvalue",
    "max_eigenvalue",
    "signature",
    "schur_lower",
    "inverse_with_inertia",
    "psd_floor",
]


@dataclass(frozen=True)
class BlockPartition:
    """Split of the control dimension ``m = m1 + m2`` (maximizer, minimizer)."""

    m1: int
    m2: int

    def __post_init__(self):
        if int(self.m1) < 1 or int(self.m2) < 1:
            raise ValueError(f"block sizes must be >= 1, got m1={self.m1}, m2={self.m2}")

    @property
    def m(self):
        return self.m1 + self.m2

    def split(self, S):
        """Return ``(S11, S12, S22)`` of a stack of ``m x m`` matrices."""
        k = self.m1
        return S[..., :k, :k], S[..., :k, k:], S[..., k:, k:]

    def columns(self, B):
        """Return ``(B[..., :m1], B[..., m1:])``."""
        return B[..., : self.m1], B[..., self.m1 :]


def sym(S):
    """Symmetric part ``(S + S') / 2`` of a (stack of) square matrix."""
    S = np.asarray(S, dtype=float)
    return 0.5 * (S + np.swapaxes(S, -1, -2))


def _collapse(S):
    """Drop a node axis (axis -3) along which every member is identical.

    Grid-sampled data of constant problems repeat one matrix at every node;
    decomposing it once is exact and much cheaper.
    """
    if S.ndim < 3 or S.shape[-3] < 8 or not np.array_equal(S, np.broadcast_to(S[..., :1, :, :], S.shape)):
        return S, False
    return S[..., :1, :, :], True


def _eigvalsh(S):
    U, same = _collapse(S)
    w = np.linalg.eigvalsh(U)
    return np.broadcast_to(w, S.shape[:-1]).copy() if same else w


def _eigh(S):
    U, same = _collapse(S)
    w, V = np.linalg.eigh(U)
    if same:
        return np.broadcast_to(w, S.shape[:-1]).copy(), np.broadcast_to(V, S.shape).copy()
    return w, V


def _check(S):
    S = np.asarray(S, dtype=float)
    if S.ndim < 2 or S.shape[-1] != S.shape[-2] or S.shape[-1] < 1:
        raise InvalidMatrix(f"expected square matrices, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise InvalidMatrix("matrix has non-finite entries")
    return S


def as_sym(S, rtol=1e-8):
    """Validate near-symmetry and return the symmetrized matrix."""
    S = _check(S)
    skew = np.abs(S - np.swapaxes(S, -1, -2)).max(initial=0.0)
    scale = 1.0 + np.abs(S).max(initial=0.0)
    if skew > rtol * scale:
        raise InvalidMatrix(f"matrix is not symmetric (max |S - S'| = {skew:.3g})")
    return sym(S)


def min_eigenvalue(S):
    """Smallest eigenvalue of a symmetric matrix (or of each in a stack)."""
    w = _eigvalsh(sym(_check(S)))
    return w[..., 0] if w.ndim > 1 else float(w[0])


def max_eigenvalue(S):
    """Largest eigenvalue of a symmetric matrix (or of each in a stack)."""
    w = _eigvalsh(sym(_check(S)))
    return w[..., -1] if w.ndim > 1 else float(w[-1])


def signature(S, tol=1e-9):
    """Inertia ``(n_pos, n_neg, n_zero)`` with a symmetric ``[-tol, tol]`` dead band."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    w = _eigvalsh(sym(_check(S)))
    n_pos = np.count_nonzero(w > tol, axis=-1)
    n_neg = np.count_nonzero(w < -tol, axis=-1)
    n_zero = w.shape[-1] - n_pos - n_neg
    if w.ndim == 1:
        return int(n_pos), int(n_neg), int(n_zero)
    return n_pos, n_neg, n_zero


def _singular_threshold(S22):
    return 1e-12 * (1.0 + np.linalg.norm(S22, axis=(-2, -1)))


def schur_lower(S, p):
    """Schur complement ``S11 - S12 S22^{-1} S12'`` of the lower-right block.

    Raises
    ------
    SingularBlock
        If ``min |eig(S22)| < 1e-12 (1 + ||S22||_F)``.
    """
    S = sym(_check(S))
    if S.shape[-1] != p.m:
        raise InvalidMatrix(f"matrix size {S.shape[-1]} does not match partition m={p.m}")
    S11, S12, S22 = p.split(S)
    w, V = _eigh(S22)
    if np.any(np.abs(w).min(axis=-1) < _singular_threshold(S22)):
        raise SingularBlock("lower-right block is singular")
    # S12 V diag(1/w) V' S12'
    T = S12 @ V
    return sym(S11 - (T / w[..., None, :]) @ np.swapaxes(T, -1, -2))


def inverse_with_inertia(S, rtol=1e-12):
    """Inverse and inertia of a stack of symmetric (possibly indefinite) matrices.

    The spectral factorization is computed once; the inertia is read off the
    eigenvalues before anything is inverted, so callers can gate on it.

    Returns
    -------
    inv : ndarray
        Stack of inverses; entries for singular members are ``nan``.
    n_pos, n_neg : ndarray of int
        Eigenvalue counts above ``+thr`` / below ``-thr`` where
        ``thr = rtol * (1 + ||S||_F)``.
    singular : ndarray of bool
        Members with an eigenvalue inside ``[-thr, thr]``.
    """
    S = sym(np.asarray(S, dtype=float))
    w, V = _eigh(S)
    thr = rtol * (1.0 + np.linalg.norm(S, axis=(-2, -1)))
    thr = np.asarray(thr)[..., None]
    n_pos = np.count_nonzero(w > thr, axis=-1)
    n_neg = np.count_nonzero(w < -thr, axis=-1)
    singular = (n_pos + n_neg) < S.shape[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = (V / w[..., None, :]) @ np.swapaxes(V, -1, -2)
    if np.any(singular):
        inv = np.where(singular[..., None, None], np.nan, inv)
    return sym(inv), n_pos, n_neg, singular


def psd_floor(S, rel=1e-10):
    """Tolerance ``-rel (1 + ||S||_F)`` below which ``S`` is not PSD."""
    return -rel * (1.0 + np.linalg.norm(np.asarray(S, dtype=float), axis=(-2, -1)))
