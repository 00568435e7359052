"""Resolvent kernel assembled from the solution families and a Weyl matrix.

For an ``r x s`` block matrix ``W`` (any choice), put

    R_k  = Q_k W - P_k          (row of s blocks, index k >= -s)
    R+_n = W Q+_n - P+_n        (column of r blocks, index n >= -r)

and define ``R[k, n] = Q_k R+_n`` for ``k < n + r`` and ``R_k Q+_n`` for
``n < k + s``; on the strip ``n - s < k < n + r`` both apply and agree. This
module always evaluates ``Q_k R+_n`` when ``k <= n`` and ``R_k Q+_n``
otherwise, and measures the disagreement of the two on the strip.

When ``W`` is the Weyl matrix, ``R_k`` and ``R+_n`` decay geometrically while
``Q_k`` and ``P_k`` grow, so ``Q_k W - P_k`` cancels catastrophically once
``|Q_k|`` passes roughly ``1/eps``. A :class:`WeylMatrix` produced from a
finite section therefore carries the decaying families themselves (the
leading block columns and rows of the section inverse), and those are used
in place of the cancelling difference wherever they are available.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .blockalg import (
    ScaledBlock,
    from_scaled_arrays,
    log2_norms,
    scaled_dot,
    to_scaled_arrays,
)
from .errors import OverlapMismatch

DEFAULT_OVERLAP_TOL = 1e-9


@dataclass
class DecayingSolutions:
    """Decaying families tied to a Weyl estimate.

    ``rows[k + s, j]`` is ``R_k^{j+1}`` for ``k = -s..L`` and
    ``cols[n + r, i]`` is ``R+_n^{i+1}`` for ``n = -r..L``, as plain blocks.
    """

    rows: np.ndarray
    cols: np.ndarray
    L: int


@dataclass
class WeylMatrix:
    """An ``r x s`` array of ``N x N`` blocks plus provenance.

    ``source`` is ``'finite_section'`` or ``'user'``; ``convergence_gap`` is
    ``-1`` when no convergence test was run.
    """

    blocks: np.ndarray
    source: str = "user"
    M_used: int = 0
    convergence_gap: float = -1.0
    decaying: DecayingSolutions | None = field(default=None, repr=False)

    def __post_init__(self):
        self.blocks = np.asarray(self.blocks, dtype=complex)
        if self.blocks.ndim != 4 or self.blocks.shape[2] != self.blocks.shape[3]:
            raise ValueError(f"Weyl blocks must have shape (r, s, N, N), got {self.blocks.shape}")

    @classmethod
    def from_dense(cls, mat, r, s):
        """Build from a dense ``(r N, s N)`` matrix."""
        mat = np.atleast_2d(np.asarray(mat, dtype=complex))
        N = mat.shape[0] // r
        if mat.shape != (r * N, s * N):
            raise ValueError(f"dense Weyl matrix has shape {mat.shape}, expected ({r}N, {s}N)")
        return cls(mat.reshape(r, N, s, N).swapaxes(1, 2).copy())

    @property
    def r(self):
        return self.blocks.shape[0]

    @property
    def s(self):
        return self.blocks.shape[1]

    @property
    def N(self):
        return self.blocks.shape[2]

    def dense(self):
        r, s, N = self.r, self.s, self.N
        return self.blocks.swapaxes(1, 2).reshape(r * N, s * N)

    def perturbed(self, i, j, delta, a=0, b=0):
        """Copy with ``delta`` added to scalar entry ``(a, b)`` of block ``(i, j)``.

        The result is user-supplied: it carries no decaying families.
        """
        blocks = self.blocks.copy()
        blocks[i, j, a, b] += delta
        return WeylMatrix(blocks, source="user")

    def without_decaying(self):
        return replace(self, decaying=None)


def _check_shape(basis, weyl):
    if weyl.blocks.shape[:3] != (basis.r, basis.s, basis.N):
        raise ValueError(
            f"Weyl matrix shape {weyl.blocks.shape[:3]} does not match (r, s, N) = "
            f"({basis.r}, {basis.s}, {basis.N})"
        )


def _stored(weyl, k1):
    dec = weyl.decaying
    if dec is None:
        return None
    if k1 > dec.L:
        raise ValueError(
            f"decaying solutions stored through index {dec.L}, requested {k1}; "
            "estimate the Weyl matrix from a larger section"
        )
    return dec


def _with_scale(out, return_scale):
    if return_scale:
        return out[0], out[1], log2_norms(out[0], out[1])
    return out


def decaying_rows(basis, weyl: WeylMatrix, k0, k1, return_scale=False):
    """``(mant, exp)`` of ``R_k`` for ``k = k0..k1``, shapes ``(n, s, N, N)``/``(n, s)``.

    With `return_scale` the ``log2`` rounding scale of each block is
    returned as well: ``|Q_k| |W| + |P_k|`` when ``R_k`` is formed from the
    definition (where it cancels), its own norm when it is stored.
    """
    _check_shape(basis, weyl)
    dec = _stored(weyl, k1)
    s = basis.s
    if dec is not None:
        return _with_scale(to_scaled_arrays(dec.rows[k0 + s:k1 + s + 1]), return_scale)
    Qm, Qe = basis.Q.natural(k0, k1)
    Pm, Pe = basis.P.natural(k0, k1)
    n, r, N = Qm.shape[0], basis.r, basis.N
    Wm, We = to_scaled_arrays(weyl.blocks)  # (r, s, N, N)
    am = np.empty((n, s, r + 1, N, N), dtype=complex)
    ae = np.empty((n, s, r + 1), dtype=np.int64)
    am[:, :, :r] = Qm[:, None]
    ae[:, :, :r] = Qe[:, None]
    am[:, :, r] = Pm
    ae[:, :, r] = Pe
    bm = np.empty((1, s, r + 1, N, N), dtype=complex)
    be = np.zeros((1, s, r + 1), dtype=np.int64)
    bm[0, :, :r] = Wm.swapaxes(0, 1)
    be[0, :, :r] = We.T
    bm[0, :, r] = -np.eye(N)
    return scaled_dot(am, ae, bm, be, return_scale=return_scale)


def decaying_cols(basis, weyl: WeylMatrix, n0, n1, return_scale=False):
    """``(mant, exp)`` of ``R+_n`` for ``n = n0..n1``, shapes ``(n, r, N, N)``/``(n, r)``.

    `return_scale` as in :func:`decaying_rows`.
    """
    _check_shape(basis, weyl)
    dec = _stored(weyl, n1)
    r = basis.r
    if dec is not None:
        return _with_scale(to_scaled_arrays(dec.cols[n0 + r:n1 + r + 1]), return_scale)
    Qm, Qe = basis.Qplus.natural(n0, n1)
    Pm, Pe = basis.Pplus.natural(n0, n1)
    n, s, N = Qm.shape[0], basis.s, basis.N
    Wm, We = to_scaled_arrays(weyl.blocks)
    am = np.empty((1, r, s + 1, N, N), dtype=complex)
    ae = np.zeros((1, r, s + 1), dtype=np.int64)
    am[0, :, :s] = Wm
    ae[0, :, :s] = We
    am[0, :, s] = -np.eye(N)
    bm = np.empty((n, r, s + 1, N, N), dtype=complex)
    be = np.empty((n, r, s + 1), dtype=np.int64)
    bm[:, :, :s] = Qm[:, None]
    be[:, :, :s] = Qe[:, None]
    bm[:, :, s] = Pm
    be[:, :, s] = Pe
    return scaled_dot(am, ae, bm, be, return_scale=return_scale)


def _as_blocks(m, e):
    return [ScaledBlock(m[c].copy(), int(e[c])) for c in range(m.shape[0])]


def weyl_row(basis, weyl: WeylMatrix, k):
    """``R_k = Q_k W - P_k`` as a list of ``s`` ScaledBlocks."""
    m, e = decaying_rows(basis, weyl, k, k)
    return _as_blocks(m[0], e[0])


def weyl_col(basis, weyl: WeylMatrix, n):
    """``R+_n = W Q+_n - P+_n`` as a list of ``r`` ScaledBlocks."""
    m, e = decaying_cols(basis, weyl, n, n)
    return _as_blocks(m[0], e[0])


def _log2_diff(m1, e1, m2, e2):
    emax = np.maximum(e1, e2)
    d1 = np.ldexp(1.0, np.clip(e1 - emax, -2000, 0).astype(np.int32))[..., None, None]
    d2 = np.ldexp(1.0, np.clip(e2 - emax, -2000, 0).astype(np.int32))[..., None, None]
    return log2_norms(m1 * d1 - m2 * d2, emax)


@dataclass
class KernelWindow:
    """Kernel entries ``R[k, n]`` for ``k`` in `k_range`, ``n`` in `n_range` (inclusive)."""

    lam: complex
    weyl: WeylMatrix
    k_range: tuple
    n_range: tuple
    mant: np.ndarray  # (nk, nn, N, N)
    exp: np.ndarray  # (nk, nn)
    overlap_gap: float = 0.0

    @property
    def ks(self):
        return np.arange(self.k_range[0], self.k_range[1] + 1)

    @property
    def ns(self):
        return np.arange(self.n_range[0], self.n_range[1] + 1)

    def log2_norms(self):
        return log2_norms(self.mant, self.exp)

    def entry(self, k, n) -> ScaledBlock:
        i, j = k - self.k_range[0], n - self.n_range[0]
        return ScaledBlock(self.mant[i, j].copy(), int(self.exp[i, j]))

    def values(self):
        return from_scaled_arrays(self.mant, self.exp)

    @classmethod
    def from_values(cls, lam, weyl, values, k0=0, n0=0):
        """Window from plain block values, e.g. entries of a dense inverse."""
        values = np.asarray(values, dtype=complex)
        m, e = to_scaled_arrays(values)
        nk, nn = values.shape[:2]
        return cls(complex(lam), weyl, (k0, k0 + nk - 1), (n0, n0 + nn - 1), m, e)


def kernel_window(basis, weyl: WeylMatrix, k_range, n_range, tol=DEFAULT_OVERLAP_TOL, strict=False):
    """Evaluate the kernel on a rectangle of indices.

    ``overlap_gap`` on the result is the largest branch disagreement on the
    strip ``n - s < k < n + r``, relative to
    ``max(1 + |R[k, n]|, |Q_k| |R+_n|, |R_k| |Q+_n|)`` (the rounding scale of
    either product), where ``|R_k|`` and ``|R+_n|`` stand for the rounding
    scales of the decaying solutions. With `strict` set, a gap above `tol` raises
    :class:`OverlapMismatch`.
    """
    k0, k1 = k_range
    n0, n1 = n_range
    if min(k0, n0) < 0:
        raise ValueError("kernel indices start at 0")
    Qm, Qe = basis.Q.natural(k0, k1)
    Qpm, Qpe = basis.Qplus.natural(n0, n1)
    Rm, Re, Rs = decaying_rows(basis, weyl, k0, k1, return_scale=True)
    Rpm, Rpe, Rps = decaying_cols(basis, weyl, n0, n1, return_scale=True)

    m1, e1 = scaled_dot(Qm[:, None], Qe[:, None], Rpm[None], Rpe[None])
    m2, e2 = scaled_dot(Rm[:, None], Re[:, None], Qpm[None], Qpe[None])
    # rounding scales of the two products, using the scales of R and R+
    # themselves so that cancellation in Q W - P is not mistaken for accuracy
    with np.errstate(divide="ignore"):
        sc1 = np.logaddexp2.reduce(log2_norms(Qm, Qe)[:, None] + Rps[None], axis=-1)
        sc2 = np.logaddexp2.reduce(Rs[:, None] + log2_norms(Qpm, Qpe)[None], axis=-1)

    ks = np.arange(k0, k1 + 1)[:, None]
    ns = np.arange(n0, n1 + 1)[None, :]
    first = ks <= ns
    mant = np.where(first[..., None, None], m1, m2)
    exp = np.where(first, e1, e2)

    strip = (ks > ns - basis.s) & (ks < ns + basis.r)
    gap = 0.0
    if np.any(strip):
        diff = _log2_diff(m1, e1, m2, e2)
        val = log2_norms(mant, exp)
        one_plus = np.log2(1.0 + np.exp2(np.minimum(val, 1000.0)))
        one_plus = np.where(val > 1000.0, val, one_plus)
        denom = np.maximum(np.maximum(one_plus, sc1), sc2)
        rel = np.where(strip, diff - denom, -np.inf)
        worst = float(np.max(rel))
        gap = float(np.exp2(worst)) if worst > -np.inf else 0.0
        if strict and gap > tol:
            i, j = np.unravel_index(np.argmax(rel), rel.shape)
            raise OverlapMismatch(
                f"kernel branches disagree by {gap:.3g} at (k, n) = ({k0 + i}, {n0 + j})",
                k=int(k0 + i), n=int(n0 + j), gap=gap,
            )
    return KernelWindow(basis.lam, weyl, (k0, k1), (n0, n1), mant, exp, overlap_gap=gap)


def kernel_entry(basis, weyl: WeylMatrix, k, n, tol=DEFAULT_OVERLAP_TOL) -> ScaledBlock:
    """Single kernel block ``R[k, n]``; raises :class:`OverlapMismatch` on the strip."""
    win = kernel_window(basis, weyl, (k, k), (n, n), tol=tol, strict=True)
    return win.entry(k, n)


def resolvent_residual(op, basis, weyl: WeylMatrix, W, relative=False):
    """Largest ``|sum_l (lam delta_kl E - A[k, l]) R[l, n] - delta_kn E|`` over ``0 <= k, n <= W``.

    With `relative` set each entry is divided by ``max(1, rounding scale of
    the row sum)``, which separates genuine failures from round-off in
    rows whose terms are huge.
    """
    r, s, N = op.r, op.s, op.N
    win = kernel_window(basis, weyl, (0, W + r), (0, W))
    lam = basis.lam
    band = op.band_rows(0, W + 1)  # [k, d] = A[k, k - s + d]
    c = r + s + 2
    am = np.zeros((W + 1, 1, c, N, N), dtype=complex)
    bm = np.zeros((W + 1, W + 1, c, N, N), dtype=complex)
    be = np.zeros((W + 1, W + 1, c), dtype=np.int64)
    for d in range(r + s + 1):
        rows = np.arange(W + 1)
        ell = rows - s + d
        ok = ell >= 0
        am[ok, 0, d] = -band[ok, d]
        if d == s:
            am[:, 0, d] += lam * np.eye(N)
        bm[ok, :, d] = win.mant[ell[ok]]
        be[ok, :, d] = win.exp[ell[ok]]
    am[:, 0, c - 1] = -np.eye(N)
    idx = np.arange(W + 1)
    bm[idx, idx, c - 1] = np.eye(N)
    ae = np.zeros((W + 1, 1, c), dtype=np.int64)
    m, e, scale = scaled_dot(am, ae, bm, be, return_scale=True)
    res = log2_norms(m, e)
    if relative:
        res = res - np.maximum(scale, 0.0)
    worst = float(np.max(res))
    return float(np.exp2(worst)) if worst < 1020 else float("inf")


def kernel_dense(win: KernelWindow):
    """Window values as a dense ``(nk N, nn N)`` matrix (may overflow)."""
    v = win.values()
    nk, nn, N, _ = v.shape
    return v.swapaxes(1, 2).reshape(nk * N, nn * N)


__all__ = [
    "DecayingSolutions",
    "KernelWindow",
    "WeylMatrix",
    "decaying_cols",
    "decaying_rows",
    "kernel_dense",
    "kernel_entry",
    "kernel_window",
    "resolvent_residual",
    "weyl_col",
    "weyl_row",
]
