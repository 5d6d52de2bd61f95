"""Deterministic numeric kernels shared by both codecs.

All transforms are orthonormal, so energy (and therefore PSNR budgets)
can be reasoned about in whichever domain is convenient. The SVD is a
fixed-sweep one-sided Jacobi: dependency-free and bit-reproducible for
the tiny 4x4/8x8 tiles the codecs use.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    BadBlockSizeError,
    DimensionMismatchError,
    EmptyPlaneError,
    NonFiniteInputError,
)

_JACOBI_SWEEPS = 12
_JACOBI_EPS = 1e-30


@dataclass(frozen=True)
class Subbands:
    """One level of 2-D Haar output. Odd tail row/column (if any) is kept
    aside untouched so the inverse can reattach it."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    tail_row: np.ndarray | None = None
    tail_col: np.ndarray | None = None


def dwt2_haar(plane: np.ndarray) -> Subbands:
    """Orthonormal one-level 2-D Haar transform.

    Odd inputs have the last row/column split off before the transform and
    reattached by :func:`idwt2_haar`.
    """
    a = np.asarray(plane, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise EmptyPlaneError("dwt2_haar requires a nonempty 2-D plane")
    h, w = a.shape
    tail_row = a[h - 1 :, :].copy() if h % 2 else None
    if h % 2:
        a = a[: h - 1, :]
    tail_col = a[:, w - 1 :].copy() if w % 2 else None
    if w % 2:
        a = a[:, : w - 1]
    if a.size == 0:
        raise EmptyPlaneError("plane too small for one Haar level")

    # Rows then columns; each step is the 2-tap orthonormal pair
    # (x0+x1)/sqrt2, (x0-x1)/sqrt2.
    s = np.sqrt(0.5)
    lo_r = (a[0::2, :] + a[1::2, :]) * s
    hi_r = (a[0::2, :] - a[1::2, :]) * s
    ll = (lo_r[:, 0::2] + lo_r[:, 1::2]) * s
    hl = (lo_r[:, 0::2] - lo_r[:, 1::2]) * s
    lh = (hi_r[:, 0::2] + hi_r[:, 1::2]) * s
    hh = (hi_r[:, 0::2] - hi_r[:, 1::2]) * s
    return Subbands(ll=ll, lh=lh, hl=hl, hh=hh, tail_row=tail_row, tail_col=tail_col)


def idwt2_haar(s: Subbands) -> np.ndarray:
    """Exact inverse of :func:`dwt2_haar`."""
    ll, lh, hl, hh = s.ll, s.lh, s.hl, s.hh
    if not (ll.shape == lh.shape == hl.shape == hh.shape):
        raise DimensionMismatchError("subband shapes differ")
    sh, sw = ll.shape
    sq = np.sqrt(0.5)
    lo_r = np.empty((sh, 2 * sw))
    hi_r = np.empty((sh, 2 * sw))
    lo_r[:, 0::2] = (ll + hl) * sq
    lo_r[:, 1::2] = (ll - hl) * sq
    hi_r[:, 0::2] = (lh + hh) * sq
    hi_r[:, 1::2] = (lh - hh) * sq
    out = np.empty((2 * sh, 2 * sw))
    out[0::2, :] = (lo_r + hi_r) * sq
    out[1::2, :] = (lo_r - hi_r) * sq
    if s.tail_col is not None:
        out = np.concatenate([out, s.tail_col], axis=1)
    if s.tail_row is not None:
        out = np.concatenate([out, s.tail_row], axis=0)
    return out


@lru_cache(maxsize=None)
def _dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis matrix."""
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * x + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0, :] = np.sqrt(1.0 / n)
    return m


def _check_block(tile: np.ndarray) -> np.ndarray:
    t = np.asarray(tile, dtype=np.float64)
    n = t.shape[-1]
    if t.ndim < 2 or t.shape[-2] != n or n not in (4, 8):
        raise BadBlockSizeError(f"tiles must be 4x4 or 8x8, got shape {t.shape}")
    return t


def dct2_block(tile: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D DCT-II of a 4x4/8x8 tile (or a stack of tiles)."""
    t = _check_block(tile)
    c = _dct_matrix(t.shape[-1])
    return np.einsum("ij,...jk,lk->...il", c, t, c)


def idct2_block(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dct2_block`."""
    t = _check_block(coeffs)
    c = _dct_matrix(t.shape[-1])
    return np.einsum("ji,...jk,kl->...il", c, t, c)


def svd_block(tile: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD of a square tile (or stack of tiles) by one-sided Jacobi.

    Returns (U, S, V) with singular values sorted nonincreasing and
    U @ diag(S) @ V.T reconstructing the input. A fixed sweep count keeps
    the routine deterministic; 12 sweeps is far past convergence for 8x8.
    """
    t = np.asarray(tile, dtype=np.float64)
    if t.ndim < 2 or t.shape[-1] != t.shape[-2]:
        raise DimensionMismatchError("svd_block requires square tiles")
    if not np.all(np.isfinite(t)):
        raise NonFiniteInputError("svd_block input must be finite")

    squeeze = t.ndim == 2
    a = t[None, :, :].copy() if squeeze else t.reshape(-1, t.shape[-2], t.shape[-1]).copy()
    m, n = a.shape[-2], a.shape[-1]
    v = np.broadcast_to(np.eye(n), a.shape).copy()

    for _ in range(_JACOBI_SWEEPS):
        for p in range(n - 1):
            for q in range(p + 1, n):
                ap = a[:, :, p]
                aq = a[:, :, q]
                alpha = np.einsum("bi,bi->b", ap, ap)
                beta = np.einsum("bi,bi->b", aq, aq)
                gamma = np.einsum("bi,bi->b", ap, aq)
                active = np.abs(gamma) > _JACOBI_EPS
                if not np.any(active):
                    continue
                zeta = np.where(active, (beta - alpha) / (2.0 * np.where(active, gamma, 1.0)), 0.0)
                zeta = np.clip(zeta, -1e150, 1e150)
                # t = sign(z)/(|z|+sqrt(1+z^2)); the z=0 case rotates by 45 deg
                tan = np.where(
                    zeta == 0.0, 1.0, np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                )
                tan = np.where(active, tan, 0.0)
                cos = 1.0 / np.sqrt(1.0 + tan * tan)
                sin = cos * tan
                new_p = cos[:, None] * ap - sin[:, None] * aq
                new_q = sin[:, None] * ap + cos[:, None] * aq
                a[:, :, p] = new_p
                a[:, :, q] = new_q
                vp = v[:, :, p].copy()
                vq = v[:, :, q]
                v[:, :, p] = cos[:, None] * vp - sin[:, None] * vq
                v[:, :, q] = sin[:, None] * vp + cos[:, None] * vq

    sing = np.sqrt(np.einsum("bij,bij->bj", a, a))
    order = np.argsort(-sing, axis=1, kind="stable")
    sing_sorted = np.take_along_axis(sing, order, axis=1)
    a_sorted = np.take_along_axis(a, order[:, None, :], axis=2)
    v_sorted = np.take_along_axis(v, order[:, None, :], axis=2)
    safe = np.where(sing_sorted > _JACOBI_EPS, sing_sorted, 1.0)
    u = a_sorted / safe[:, None, :]
    # Columns with zero singular value contribute nothing to the product;
    # fill them with unit basis vectors so U stays well-formed.
    dead = sing_sorted <= _JACOBI_EPS
    if np.any(dead):
        eye = np.eye(m)
        for b, j in zip(*np.nonzero(dead)):
            u[b, :, j] = eye[:, j % m]

    if squeeze:
        return u[0], sing_sorted[0], v_sorted[0]
    lead = t.shape[:-2]
    return (
        u.reshape(*lead, m, n),
        sing_sorted.reshape(*lead, n),
        v_sorted.reshape(*lead, n, n),
    )
