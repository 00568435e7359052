"""Arithmetic on N x N complex blocks and on blocks with a base-2 exponent.

A *block* is a plain ``(N, N)`` complex ndarray. A :class:`ScaledBlock`
carries a separate integer exponent so that values far outside the double
range (the fundamental solutions grow geometrically) stay representable.
Products add exponents exactly; sums align to the largest exponent.

The array helpers at the bottom (``normalize_arrays``, ``scaled_dot``,
``scaled_sum``) work on stacks of mantissas shaped ``(..., N, N)`` with
integer exponents shaped ``(...)`` and are what the hot paths use.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularBlock

DEFAULT_COND_CAP = 1e8

# sentinel exponent for zero mantissas when taking maxima
_EMIN = np.iinfo(np.int64).min // 4


def block_norm(b) -> float:
    """Frobenius norm of a block."""
    return float(np.linalg.norm(np.asarray(b), "fro"))


def block_inverse(b, cond_cap=DEFAULT_COND_CAP, return_cond=False):
    """Invert a block, refusing if its 2-norm condition number exceeds `cond_cap`.

    Parameters
    ----------
    b : array_like, shape (N, N)
    cond_cap : float
        Largest acceptable condition estimate.
    return_cond : bool
        Also return the condition estimate.

    Raises
    ------
    SingularBlock
        If the block is singular or worse conditioned than `cond_cap`.
    """
    b = np.asarray(b, dtype=complex)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"block must be square, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise SingularBlock("block has non-finite entries", cond=np.inf)
    cond = float(np.linalg.cond(b))
    if not np.isfinite(cond) or cond > cond_cap:
        raise SingularBlock(f"block condition {cond:.3g} exceeds cap {cond_cap:.3g}", cond=cond)
    inv = np.linalg.inv(b)
    return (inv, cond) if return_cond else inv


@dataclass(frozen=True)
class ScaledBlock:
    """Block value ``mantissa * 2**exponent``.

    After :func:`normalize` the mantissa is zero or has Frobenius norm in
    ``[1, 2)``, which lies inside the documented band ``[1/2, 2)``.
    """

    mantissa: np.ndarray
    exponent: int = 0

    @classmethod
    def from_block(cls, b):
        return normalize(cls(np.array(b, dtype=complex), 0))

    @property
    def n(self):
        return self.mantissa.shape[0]

    def value(self):
        """Unscaled block; may overflow to inf for huge exponents."""
        return from_scaled_arrays(self.mantissa, self.exponent)

    def log2_norm(self):
        nrm = block_norm(self.mantissa)
        return -np.inf if nrm == 0 else np.log2(nrm) + self.exponent

    def is_zero(self):
        return not np.any(self.mantissa)

    def __matmul__(self, other):
        if isinstance(other, ScaledBlock):
            return normalize(ScaledBlock(self.mantissa @ other.mantissa, self.exponent + other.exponent))
        return normalize(ScaledBlock(self.mantissa @ np.asarray(other), self.exponent))

    def __rmatmul__(self, other):
        return normalize(ScaledBlock(np.asarray(other) @ self.mantissa, self.exponent))

    def __neg__(self):
        return ScaledBlock(-self.mantissa, self.exponent)

    def __add__(self, other):
        return scaled_add(self, other)

    def __sub__(self, other):
        return scaled_add(self, -other)


def normalize(x: ScaledBlock) -> ScaledBlock:
    """Move the magnitude of the mantissa into the exponent (exact)."""
    m, e = normalize_arrays(np.asarray(x.mantissa, dtype=complex), np.int64(x.exponent))
    return ScaledBlock(m, int(e))


def scaled_add(a: ScaledBlock, b: ScaledBlock) -> ScaledBlock:
    if a.is_zero():
        return normalize(b)
    if b.is_zero():
        return normalize(a)
    e = max(a.exponent, b.exponent)
    m = np.ldexp(1.0, a.exponent - e) * a.mantissa + np.ldexp(1.0, b.exponent - e) * b.mantissa
    return normalize(ScaledBlock(m, e))


# ----------------------------------------------------------------------------
# vectorised helpers on mantissa/exponent stacks


def _pow2(e):
    return np.ldexp(1.0, np.asarray(e, dtype=np.int64).clip(-2000, 2000).astype(np.int32))


def nonzero_mask(m):
    return np.any(m != 0, axis=(-2, -1))


def _ldexp(m, sh):
    return np.ldexp(m.real, sh) + 1j * np.ldexp(m.imag, sh)


def normalize_arrays(m, e):
    """Normalise a stack of mantissas; returns new ``(m, e)`` arrays.

    The block is first rescaled by the exponent of its largest entry, so
    the norm is computed without overflow or underflow.
    """
    m = np.asarray(m, dtype=complex)
    amax = np.maximum(np.abs(m.real).max(axis=(-2, -1)), np.abs(m.imag).max(axis=(-2, -1)))
    _, pre = np.frexp(amax)
    pre = np.where(amax > 0, pre, 0).astype(np.int32)
    m = _ldexp(m, -pre[..., None, None])
    nrm = np.linalg.norm(m, axis=(-2, -1))
    _, fe = np.frexp(nrm)
    shift = np.where(nrm > 0, fe.astype(np.int64) - 1, 0)
    m = _ldexp(m, (-shift).astype(np.int32)[..., None, None])
    e = np.where(nrm > 0, np.asarray(e, dtype=np.int64) + shift + pre, 0)
    return m, e


def log2_norms(m, e):
    """``log2`` of the Frobenius norms of ``m * 2**e``; ``-inf`` for zeros."""
    nrm = np.linalg.norm(m, axis=(-2, -1))
    with np.errstate(divide="ignore"):
        return np.where(nrm > 0, np.log2(np.where(nrm > 0, nrm, 1.0)) + e, -np.inf)


def scaled_dot(am, ae, bm, be, return_scale=False):
    """Contract ``sum_c a_c @ b_c`` over the axis just before the block axes.

    ``am``/``bm`` have shapes ``(..., c, N, N)`` and broadcast against each
    other; ``ae``/``be`` have the matching ``(..., c)`` shapes. Returns the
    normalised ``(mantissa, exponent)`` and, optionally, ``log2`` of
    ``sum_c |a_c| |b_c|`` (the rounding scale of the sum).
    """
    e = np.asarray(ae, dtype=np.int64) + np.asarray(be, dtype=np.int64)
    nz = nonzero_mask(am) & nonzero_mask(bm)
    e = np.where(nz, e, _EMIN)
    emax = e.max(axis=-1)
    emax = np.where(emax == _EMIN, 0, emax)
    w = np.where(nz, _pow2(e - emax[..., None]), 0.0)
    m = np.einsum("...cab,...cbd,...c->...ad", am, bm, w)
    out = normalize_arrays(m, emax)
    if not return_scale:
        return out
    na = np.linalg.norm(am, axis=(-2, -1))
    nb = np.linalg.norm(bm, axis=(-2, -1))
    s = np.sum(na * nb * w, axis=-1)
    with np.errstate(divide="ignore"):
        scale = np.where(s > 0, np.log2(np.where(s > 0, s, 1.0)) + emax, -np.inf)
    return out[0], out[1], scale


def scaled_sum(m, e, axis=0):
    """Sum a stack of scaled blocks along `axis` (not a block axis)."""
    m = np.moveaxis(np.asarray(m, dtype=complex), axis, 0)
    e = np.moveaxis(np.asarray(e, dtype=np.int64), axis, 0)
    nz = nonzero_mask(m)
    ee = np.where(nz, e, _EMIN)
    emax = ee.max(axis=0)
    emax = np.where(emax == _EMIN, 0, emax)
    w = np.where(nz, _pow2(ee - emax), 0.0)
    return normalize_arrays(np.sum(m * w[..., None, None], axis=0), emax)


def to_scaled_arrays(values):
    """Plain block stack -> normalised ``(mantissa, exponent)`` stack."""
    v = np.asarray(values, dtype=complex)
    return normalize_arrays(v, np.zeros(v.shape[:-2], dtype=np.int64))


def from_scaled_arrays(m, e):
    """Inverse of :func:`to_scaled_arrays`; overflows to inf where it must."""
    m = np.asarray(m, dtype=complex)
    sh = np.broadcast_to(np.asarray(e).clip(-2200, 2200).astype(np.int32), m.shape[:-2])
    with np.errstate(over="ignore", invalid="ignore"):
        return _ldexp(m, sh[..., None, None])
