"""Polynomial solution systems Q, P (forward) and Q+, P+ (dual) at fixed lambda.

Forward families solve ``sum_l A[k, l] Y_l = lam Y_k`` (``k >= 0``) with
block *rows* ``Q_k = (Q_k^1 .. Q_k^r)`` and ``P_k = (P_k^1 .. P_k^s)``
starting from the stacked-identity frames

    Q_{0:r-1} = I_r,  Q_{-s:-1} = 0,  P_{-s:-1} = I_s,  P_{0:r-1} = 0.

Dual families solve ``sum_j Y+_j A[j, k] = lam Y+_k`` with block *columns*
``Q+_k`` (s components) and ``P+_k`` (r components) starting from

    Q+_{0:s-1} = I_s,  Q+_{-r:-1} = 0,  P+_{-r:-1} = I_r,  P+_{0:s-1} = 0.

Every component block is stored as mantissa and base-2 exponent because the
solutions grow geometrically on the resolvent set. Dual families are stored
transposed so both directions share one sweep kernel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .blockalg import ScaledBlock, from_scaled_arrays, to_scaled_arrays


@dataclass
class Family:
    """One solution family: ``ncol`` component blocks per index.

    ``mant[k + offset, c]`` / ``exp[k + offset, c]`` hold component ``c`` at
    index ``k``; indices ``-offset..top`` are filled. When `transposed` is set
    the stored mantissas are the transposes of the actual blocks.
    """

    mant: np.ndarray
    exp: np.ndarray
    offset: int
    top: int
    transposed: bool = False

    @property
    def ncol(self):
        return self.mant.shape[1]

    @property
    def lo(self):
        return -self.offset

    def _check(self, k):
        if not self.lo <= k <= self.top:
            raise IndexError(f"index {k} outside computed range [{self.lo}, {self.top}]")

    def block(self, k, c) -> ScaledBlock:
        """Component `c` (0-based) at index `k` as a ScaledBlock."""
        self._check(k)
        m = self.mant[k + self.offset, c]
        return ScaledBlock(m.T.copy() if self.transposed else m.copy(), int(self.exp[k + self.offset, c]))

    def natural(self, k0=None, k1=None):
        """``(mant, exp)`` for indices ``k0..k1`` in actual (untransposed) orientation."""
        k0 = self.lo if k0 is None else k0
        k1 = self.top if k1 is None else k1
        self._check(k0)
        self._check(k1)
        sl = slice(k0 + self.offset, k1 + self.offset + 1)
        m = self.mant[sl]
        return (np.swapaxes(m, -1, -2) if self.transposed else m), self.exp[sl]

    def values(self, k0=None, k1=None):
        """Unscaled component blocks ``(n, ncol, N, N)``; overflows to inf if huge."""
        m, e = self.natural(k0, k1)
        return from_scaled_arrays(m, e)

    def log2_norms(self, k0=None, k1=None):
        from .blockalg import log2_norms

        m, e = self.natural(k0, k1)
        return log2_norms(m, e)

    def _reserve(self, top):
        need = top + self.offset + 1
        if need <= self.mant.shape[0]:
            return
        size = max(need, 2 * self.mant.shape[0])
        mant = np.zeros((size,) + self.mant.shape[1:], dtype=complex)
        exp = np.zeros((size, self.ncol), dtype=np.int64)
        mant[: self.mant.shape[0]] = self.mant
        exp[: self.exp.shape[0]] = self.exp
        self.mant, self.exp = mant, exp


def _initial_family(N, ncol, n_before, n_after, identity_first, transposed, capacity):
    """Family with indices ``-n_before..n_after-1`` holding a stacked identity frame.

    The identity occupies the negative indices when `identity_first` is set,
    otherwise the non-negative ones.
    """
    L = max(capacity, n_before + n_after)
    vals = np.zeros((L, ncol, N, N), dtype=complex)
    start = 0 if identity_first else n_before
    for c in range(ncol):
        vals[start + c, c] = np.eye(N)
    m, e = to_scaled_arrays(vals)
    return Family(m, e, offset=n_before, top=n_after - 1, transposed=transposed)


@dataclass
class SolutionBasis:
    """The four fundamental families at one value of lambda."""

    lam: complex
    N: int
    r: int
    s: int
    Q: Family
    P: Family
    Qplus: Family
    Pplus: Family

    @property
    def K(self):
        """Highest index computed for every family."""
        return min(self.Q.top, self.Qplus.top)

    @property
    def K_forward(self):
        return self.Q.top

    @property
    def K_dual(self):
        return self.Qplus.top

    def family(self, name) -> Family:
        return {"Q": self.Q, "P": self.P, "Qplus": self.Qplus, "Pplus": self.Pplus}[name]

    def row(self, name, k):
        """Block row ``Q_k`` or ``P_k`` as an unscaled ``(N, ncol N)`` array."""
        fam = self.family(name)
        v = fam.values(k, k)[0]
        return np.concatenate(list(v), axis=1)

    def column(self, name, k):
        """Block column ``Q+_k`` or ``P+_k`` as an unscaled ``(ncol N, N)`` array."""
        fam = self.family(name)
        v = fam.values(k, k)[0]
        return np.concatenate(list(v), axis=0)


def init_basis(op, lam, capacity=0) -> SolutionBasis:
    """Basis holding only the initial frames (``Q``/``P`` through ``r-1``, duals through ``s-1``)."""
    N, r, s = op.N, op.r, op.s
    Q = _initial_family(N, r, s, r, False, False, capacity + s + 1)
    P = _initial_family(N, s, s, r, True, False, capacity + s + 1)
    Qp = _initial_family(N, s, r, s, False, True, capacity + r + 1)
    Pp = _initial_family(N, r, r, s, True, True, capacity + r + 1)
    return SolutionBasis(complex(lam), N, r, s, Q, P, Qp, Pp)


def _advance(fams, coef, inv, lam, nb, start, stop, sweep):
    for fam in fams:
        sweep(coef, inv, lam, fam.mant, fam.exp, nb, start, stop)
        fam.top = stop - 1 + (coef.shape[1] - 1 - nb)


def step_forward(op, basis: SolutionBasis, k, sweep=None):
    """Extend ``Q`` and ``P`` to index ``k + r`` using recurrence row `k`."""
    if basis.Q.top != k + op.r - 1:
        raise ValueError(f"forward families hold indices through {basis.Q.top}, need {k + op.r - 1}")
    coef, inv = op.forward_table(k)
    for fam in (basis.Q, basis.P):
        fam._reserve(k + op.r)
    _advance((basis.Q, basis.P), coef, inv, basis.lam, op.s, k, k + 1, sweep or _backend.sweep)
    return basis


def step_dual(op, basis: SolutionBasis, k, sweep=None):
    """Extend ``Q+`` and ``P+`` to index ``k + s`` using recurrence column `k`."""
    if basis.Qplus.top != k + op.s - 1:
        raise ValueError(f"dual families hold indices through {basis.Qplus.top}, need {k + op.s - 1}")
    coef, inv = op.dual_table(k)
    for fam in (basis.Qplus, basis.Pplus):
        fam._reserve(k + op.s)
    _advance((basis.Qplus, basis.Pplus), coef, inv, basis.lam, op.r, k, k + 1, sweep or _backend.sweep)
    return basis


def extend(op, lam, K, basis=None, sweep=None) -> SolutionBasis:
    """Compute all four families through index `K` (at least the initial frames).

    Raises
    ------
    SingularBlock
        If an extreme diagonal block fails the condition cap; its ``index``
        attribute names the recurrence row.
    """
    sweep = sweep or _backend.sweep
    if basis is None:
        basis = init_basis(op, lam, capacity=K)
    r, s = op.r, op.s
    k0 = basis.Q.top - r + 1
    if K - r >= k0:
        coef, inv = op.forward_table(K - r)
        for fam in (basis.Q, basis.P):
            fam._reserve(K)
        _advance((basis.Q, basis.P), coef, inv, basis.lam, s, k0, K - r + 1, sweep)
    k0 = basis.Qplus.top - s + 1
    if K - s >= k0:
        coef, inv = op.dual_table(K - s)
        for fam in (basis.Qplus, basis.Pplus):
            fam._reserve(K)
        _advance((basis.Qplus, basis.Pplus), coef, inv, basis.lam, r, k0, K - s + 1, sweep)
    return basis


def recurrence_residual(op, basis: SolutionBasis, name, k):
    """Relative residual of the defining recurrence at row/column `k` for one family.

    The residual is measured against the largest term of the stencil so
    that geometric growth does not mask or inflate it.
    """
    fam = basis.family(name)
    lam = basis.lam
    forward = name in ("Q", "P")
    nb, nf = (op.s, op.r) if forward else (op.r, op.s)
    if k < 0 or k + nf > fam.top:
        raise IndexError(f"need indices through {k + nf}, have {fam.top}")
    m, e = fam.natural(k - nb, k + nf)
    worst = 0.0
    for c in range(fam.ncol):
        emax = int(np.max(e[:, c]))
        vals = m[:, c] * np.ldexp(1.0, np.clip(e[:, c] - emax, -2000, 0).astype(np.int32))[:, None, None]
        total = -lam * vals[nb]
        scale = abs(lam) * np.linalg.norm(vals[nb])
        for d in range(nb + nf + 1):
            idx = k - nb + d
            if forward:
                term = op.coeff(k, idx) @ vals[d]
            else:
                term = vals[d] @ op.coeff(idx, k)
            total = total + term
            scale += np.linalg.norm(term)
        if scale > 0:
            worst = max(worst, float(np.linalg.norm(total) / scale))
    return worst
