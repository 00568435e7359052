"""Structural identities of the solution families and the decay classification.

Identity checks report residuals relative to the rounding scale of the
terms involved (``sum |a| |b| |c|`` over the products that are added). The
families grow like ``mu^k``, so products of a forward and a dual solution
reach ``mu^(2k)`` while the identities themselves stay of order one; an
absolute tolerance would only measure how far double precision reaches.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .blockalg import log2_norms, scaled_dot
from .errors import DegenerateWindow, NoConvergence, SingularBlock, SingularSection
from .kernel import decaying_cols, decaying_rows, kernel_window
from .recurrence import extend
from .weyl import DEFAULT_TOL, weyl_converged

EPS_CLASS = 0.02
FIT_TOL = 0.5
MIN_SPAN_PER_BAND = 12

RESOLVENT = "resolvent"
NOT_RESOLVENT = "not_resolvent"
INCONCLUSIVE = "inconclusive"


def _triple(terms, N):
    """Scaled ``sum left @ coef @ right`` for ``terms = [((lm, le), coef, (rm, re)), ...]``.

    Returns ``(mant, exp, log2 scale)``.
    """
    if not terms:
        return np.zeros((N, N), dtype=complex), 0, -np.inf
    am = np.array([lm @ c for (lm, _), c, _ in terms])
    ae = np.array([le for (_, le), _, _ in terms], dtype=np.int64)
    bm = np.array([rm for _, _, (rm, _) in terms])
    be = np.array([re for _, _, (_, re) in terms], dtype=np.int64)
    # rounding scale uses |left| |coef| |right|, not |left @ coef| |right|
    cn = np.array([np.linalg.norm(c) for _, c, _ in terms])
    lm_n = np.array([np.linalg.norm(lm) for (lm, _), _, _ in terms])
    m, e = scaled_dot(am, ae, bm, be)
    rn = np.linalg.norm(bm, axis=(-2, -1))
    with np.errstate(divide="ignore"):
        logs = np.log2(lm_n * cn * rn) + ae + be
    scale = float(np.logaddexp2.reduce(logs)) if np.any(np.isfinite(logs)) else -np.inf
    return m, int(e), scale


def _comp(fam, k, c):
    m, e = fam.natural(k, k)
    return m[0, c], int(e[0, c])


# ---------------------------------------------------------------------------
# bilinear invariant


def f_invariant(op, Y, Yplus, basis, k, return_scale=False):
    """The bilinear invariant ``F(k)`` pairing a forward and a dual solution.

    ``F(k) = sum_{i<s} sum_{i<j<=s} Y+_{k+i} A[k+i, k+i-j] Y_{k+i-j}
    - sum_{i<r} sum_{i<j<=r} Y+_{k+i-j} A[k+i-j, k+i] Y_{k+i}``,
    with the boundary coefficients at negative indices.

    Parameters
    ----------
    Y : tuple
        ``(name, j)`` with name ``'Q'`` or ``'P'`` and 0-based component `j`.
    Yplus : tuple
        ``(name, i)`` with name ``'Qplus'`` or ``'Pplus'``.
    return_scale : bool
        Also return ``log2`` of the sum of term magnitudes.

    Returns
    -------
    ndarray
        The ``N x N`` value (and the scale when requested).
    """
    r, s = op.r, op.s
    fy = basis.family(Y[0])
    fp = basis.family(Yplus[0])
    if Y[0] not in ("Q", "P") or Yplus[0] not in ("Qplus", "Pplus"):
        raise ValueError("Y must name a forward family and Yplus a dual one")
    if k < 0:
        raise ValueError("k must be nonnegative")
    terms = []
    for i in range(s):
        for j in range(i + 1, s + 1):
            a, b = k + i, k + i - j
            terms.append((_comp(fp, a, Yplus[1]), op.coeff(a, b), _comp(fy, b, Y[1])))
    for i in range(r):
        for j in range(i + 1, r + 1):
            a, b = k + i - j, k + i
            lm, le = _comp(fp, a, Yplus[1])
            terms.append(((-lm, le), op.coeff(a, b), _comp(fy, b, Y[1])))
    m, e, scale = _triple(terms, op.N)
    val = np.ldexp(m.real, e) + 1j * np.ldexp(m.imag, e)
    return (val, scale) if return_scale else val


def f_spread(op, Y, Yplus, basis, kmax):
    """Largest deviation of ``F(k)`` from ``F(0)`` over ``k <= kmax``.

    Each deviation is divided by ``max(1 + |F(0)|, term scale at k)``.
    """
    f0 = f_invariant(op, Y, Yplus, basis, 0)
    base = 1.0 + np.linalg.norm(f0)
    worst = 0.0
    for k in range(1, kmax + 1):
        fk, scale = f_invariant(op, Y, Yplus, basis, k, return_scale=True)
        denom = max(base, 2.0 ** min(scale, 1023.0))
        worst = max(worst, float(np.linalg.norm(fk - f0) / denom))
    return worst


def solution_pairs(op):
    """Every ``(Y, Yplus)`` choice: columns of Q, P against rows of Q+, P+."""
    fw = [("Q", j) for j in range(op.r)] + [("P", j) for j in range(op.s)]
    du = [("Qplus", i) for i in range(op.s)] + [("Pplus", i) for i in range(op.r)]
    return [(y, yp) for y in fw for yp in du]


# ---------------------------------------------------------------------------
# block identity


def _middle(op, k):
    """Coupling matrix between dual indices ``k-r..k+s-1`` and forward ``k-s..k+r-1``."""
    r, s, N = op.r, op.s, op.N
    mid = np.zeros((r + s, r + s, N, N), dtype=complex)
    for j in range(r + s):
        jj = k - r + j
        for l in range(r + s):
            ll = k - s + l
            if j < r and l >= s:
                mid[j, l] = -op.coeff(jj, ll)
            elif j >= r and l < s:
                mid[j, l] = op.coeff(jj, ll)
    return mid


def _sandwich_residual(left, mid, right, target):
    """``max_ab |sum_jl left[a,j] mid[j,l] right[l,b] - target[a,b]| / max(1, scale)``.

    `left` and `right` are ``(mant, exp)`` pairs of shape ``(p, q, N, N)``;
    `target` holds plain blocks.
    """
    lm, le = left
    rm, re = right
    p, q, N = lm.shape[0], lm.shape[1], lm.shape[2]
    t = rm.shape[1]
    lmid = np.einsum("ajxy,jlyz->ajlxz", lm, mid)  # (p, q, q, N, N)
    c = q * q + 1
    am = np.zeros((p, t, c, N, N), dtype=complex)
    ae = np.zeros((p, t, c), dtype=np.int64)
    bm = np.zeros((p, t, c, N, N), dtype=complex)
    be = np.zeros((p, t, c), dtype=np.int64)
    am[:, :, :-1] = lmid.reshape(p, 1, q * q, N, N)
    ae[:, :, :-1] = np.repeat(le, q, axis=1)[:, None, :]
    bm[:, :, :-1] = np.tile(rm.swapaxes(0, 1), (1, q, 1, 1))[None]  # [b, j q + l] = right[l, b]
    be[:, :, :-1] = np.tile(re.T, (1, q))[None]
    am[:, :, -1] = -np.asarray(target)
    bm[:, :, -1] = np.eye(N)
    m, e, scale = scaled_dot(am, ae, bm, be, return_scale=True)
    res = log2_norms(m, e) - np.maximum(scale, 0.0)
    return float(np.exp2(np.max(res)))


def lemma2_residual(op, basis, k):
    """Relative residual of the ``(r+s) x (r+s)`` block identity at index `k`.

    The stacked dual rows ``[P+; Q+]`` at indices ``k-r..k+s-1``, the
    coupling matrix of the extreme band coefficients and the stacked forward
    columns ``[Q, -P]`` at ``k-s..k+r-1`` multiply to the identity. The
    return value is the largest blockwise deviation divided by
    ``max(1, rounding scale)``.
    """
    r, s, N = op.r, op.s, op.N
    if k < 0:
        raise ValueError("k must be nonnegative")
    Ppm, Ppe = basis.Pplus.natural(k - r, k + s - 1)  # (r+s, r, N, N)
    Qpm, Qpe = basis.Qplus.natural(k - r, k + s - 1)  # (r+s, s, N, N)
    lm = np.concatenate([Ppm, Qpm], axis=1).swapaxes(0, 1)  # [a, j]
    le = np.concatenate([Ppe, Qpe], axis=1).T
    Qm, Qe = basis.Q.natural(k - s, k + r - 1)  # (r+s, r, N, N)
    Pm, Pe = basis.P.natural(k - s, k + r - 1)
    rm = np.concatenate([Qm, -Pm], axis=1)  # [l, b]
    re = np.concatenate([Qe, Pe], axis=1)
    target = np.zeros((r + s, r + s, N, N), dtype=complex)
    target[np.arange(r + s), np.arange(r + s)] = np.eye(N)
    return _sandwich_residual((lm, le), _middle(op, k), (rm, re), target)


def jump_residual(op, basis, n):
    """Relative residual of ``A[n, n-s] (Q_{n-s} P+_n - P_{n-s} Q+_n) = E``.

    This is the diagonal row of the resolvent identity. It does not involve
    the Weyl matrix, so it holds at every lambda.
    """
    s, N = op.s, op.N
    c = op.coeff(n, n - s)
    Qm, Qe = basis.Q.natural(n - s, n - s)
    Pm, Pe = basis.P.natural(n - s, n - s)
    Qpm, Qpe = basis.Qplus.natural(n, n)
    Ppm, Ppe = basis.Pplus.natural(n, n)
    am = np.concatenate([c @ Qm[0], -(c @ Pm[0]), [-np.eye(N)]])
    ae = np.concatenate([Qe[0], Pe[0], [0]])
    bm = np.concatenate([Ppm[0], Qpm[0], [np.eye(N)]])
    be = np.concatenate([Ppe[0], Qpe[0], [0]])
    m, e, scale = scaled_dot(am, ae, bm, be, return_scale=True)
    return float(np.exp2(log2_norms(m, e) - max(scale, 0.0)))


def decaying_identity_residual(op, basis, weyl, k):
    """Residual of the block identity specialised to the decaying solutions.

    Multiplying the block identity by the Weyl matrix gives
    ``Q+ . mid . R = I_s`` (stacked ``Q+`` rows against the columns
    ``R_{k-s..k+r-1}``) and ``-R+ . mid . Q = I_r``. Both products are
    formed directly; the larger relative residual is returned.
    """
    r, s, N = op.r, op.s, op.N
    mid = _middle(op, k)
    Qpm, Qpe = basis.Qplus.natural(k - r, k + s - 1)
    Rm, Re = decaying_rows(basis, weyl, k - s, k + r - 1)  # (r+s, s, N, N)
    eye_s = np.zeros((s, s, N, N), dtype=complex)
    eye_s[np.arange(s), np.arange(s)] = np.eye(N)
    res_s = _sandwich_residual((Qpm.swapaxes(0, 1), Qpe.T), mid, (Rm, Re), eye_s)
    Rpm, Rpe = decaying_cols(basis, weyl, k - r, k + s - 1)  # (r+s, r, N, N)
    Qm, Qe = basis.Q.natural(k - s, k + r - 1)
    eye_r = np.zeros((r, r, N, N), dtype=complex)
    eye_r[np.arange(r), np.arange(r)] = np.eye(N)
    res_r = _sandwich_residual((-Rpm.swapaxes(0, 1), Rpe.T), mid, (Qm, Qe), eye_r)
    return max(res_s, res_r)


# ---------------------------------------------------------------------------
# decay fit and classification


@dataclass
class DecayFit:
    """Geometric fit ``|R[k, n]| ~ C_hat q_hat^|n-k|`` and the resulting class.

    ``weyl_gap`` and ``error`` are filled in by :func:`classify`; ``error``
    is a short tag when the pipeline could not reach a fit.
    """

    lam: complex
    q_hat: float
    C_hat: float
    rms_residual: float
    classification: str
    weyl_gap: float = float("nan")
    error: str | None = None
    notes: list = field(default_factory=list)


def _decide(q, rms, eps_class, fit_tol):
    if q <= 1 - eps_class and rms <= fit_tol:
        return RESOLVENT
    if q >= 1 + eps_class:
        return NOT_RESOLVENT
    return INCONCLUSIVE


def decay_fit(window, eps_class=EPS_CLASS, fit_tol=FIT_TOL) -> DecayFit:
    """Fit the anti-diagonal maxima of a square kernel window.

    With the window covering ``0 <= k, n <= W``, ``m(d)`` is the largest
    ``|R[k, n]|`` with ``|n - k| = d`` and ``log m(d)`` is fitted linearly
    over ``W/6 <= d <= W/2``. For bandwidths above one, ``m(d)`` falls in
    steps of ``p = max(r, s)``, so consecutive runs of `p` distances are
    pooled (maximum, placed at the first distance of the run) before the fit. Distances above ``W/2`` are left out because
    their maxima come from pairs close to the boundary of the half-line,
    where the reflected component distorts the decay.

    Raises
    ------
    DegenerateWindow
        When every norm in the fit range underflows to zero.
    ValueError
        When the window is not square from 0 or ``W < 12 (r + s)``.
    """
    k0, k1 = window.k_range
    n0, n1 = window.n_range
    if (k0, n0) != (0, 0) or k1 != n1:
        raise ValueError("decay_fit needs a square window starting at index 0")
    W = k1
    r, s = window.weyl.r, window.weyl.s
    if W < MIN_SPAN_PER_BAND * (r + s):
        raise ValueError(f"window width {W} below {MIN_SPAN_PER_BAND} (r + s) = {MIN_SPAN_PER_BAND * (r + s)}")
    lg = window.log2_norms()
    diff = np.abs(np.subtract.outer(np.arange(W + 1), np.arange(W + 1)))
    d_lo, d_hi = math.ceil(W / 6), W // 2
    ds = np.arange(d_lo, d_hi + 1)
    md = np.array([np.max(lg[diff == d]) for d in ds])
    # m(d) is a staircase with steps of width max(r, s); pool each step
    p = max(r, s)
    n = len(ds) // p
    ds, md = ds[: n * p : p], md[: n * p].reshape(n, p).max(axis=1)
    ok = np.isfinite(md)
    if ok.sum() < 2:
        raise DegenerateWindow(f"kernel norms underflow on the fit range at lambda={window.lam}")
    x, y = ds[ok], md[ok] * math.log(2.0)
    slope, icpt = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    q, C = float(math.exp(slope)), float(math.exp(icpt))
    return DecayFit(complex(window.lam), q, C, rms, _decide(q, rms, eps_class, fit_tol))


def fit_width(op, K):
    """Kernel window width used by :func:`classify`: ``min(K, 24 (r + s))``."""
    return min(K, 2 * MIN_SPAN_PER_BAND * (op.r + op.s))


def classify(op, lam, K=150, M0=100, tol=DEFAULT_TOL, eps_class=EPS_CLASS, fit_tol=FIT_TOL,
             return_parts=False):
    """Classify `lam` as resolvent, not_resolvent or inconclusive.

    Runs the recurrences through `K`, a converged finite-section Weyl
    estimate and a decay fit on the kernel window ``[0, W]^2`` with
    ``W = min(K, 24 (r + s))``. Failures of any stage are reported as
    inconclusive with an error tag instead of raised.

    With `return_parts` the basis, Weyl estimate and window are returned
    too (``None`` where not reached).
    """
    lam = complex(lam)
    parts = {"basis": None, "weyl": None, "window": None}

    def done(fit):
        return (fit, parts) if return_parts else fit

    def failed(tag, gap=float("nan"), note=None):
        f = DecayFit(lam, float("nan"), float("nan"), float("nan"), INCONCLUSIVE, weyl_gap=gap, error=tag)
        if note:
            f.notes.append(note)
        return done(f)

    W = fit_width(op, K)
    if W < MIN_SPAN_PER_BAND * (op.r + op.s):
        msg = f"fit window {W} below minimum {MIN_SPAN_PER_BAND * (op.r + op.s)}; increase K"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        return failed("fit_window_too_small", note=msg)
    try:
        basis = extend(op, lam, max(K, W + op.r + op.s))
        parts["basis"] = basis
        weyl = weyl_converged(op, lam, M0, tol=tol, depth=W + op.r + op.s)
    except NoConvergence as exc:
        return failed("no_convergence", gap=exc.gap, note=str(exc))
    except SingularSection as exc:
        return failed("singular_section", note=str(exc))
    except SingularBlock as exc:
        return failed("singular_block", note=str(exc))
    parts["weyl"] = weyl
    win = kernel_window(basis, weyl, (0, W), (0, W))
    parts["window"] = win
    try:
        fit = decay_fit(win, eps_class, fit_tol)
    except DegenerateWindow as exc:
        fit = DecayFit(lam, 0.0, 0.0, 0.0, RESOLVENT, notes=[str(exc)])
    fit.weyl_gap = weyl.convergence_gap
    return done(fit)


# ---------------------------------------------------------------------------
# growth rates


@dataclass
class GrowthReport:
    """Tail-window maxima of ``|Y_k|^(1/k)`` for each solution component."""

    K: int
    k_window: tuple
    rho_Q: np.ndarray
    rho_R: np.ndarray
    rho_Qplus: np.ndarray
    rho_Rplus: np.ndarray
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {
            "K": self.K,
            "k_window": list(self.k_window),
            "rho_Q": self.rho_Q.tolist(),
            "rho_R": self.rho_R.tolist(),
            "rho_Qplus": self.rho_Qplus.tolist(),
            "rho_Rplus": self.rho_Rplus.tolist(),
            "flags": list(self.flags),
        }


def _rho(log2n, ks):
    """``max_k 2^(log2n[k] / k)`` ignoring zero blocks; 0 if all vanish."""
    vals = np.where(np.isfinite(log2n), log2n / ks[:, None], -np.inf)
    best = np.max(vals, axis=0)
    return np.where(np.isfinite(best), np.exp2(best), 0.0)


def growth_report(basis, weyl, tail_fraction=0.2, classification=None, margin=0.0) -> GrowthReport:
    """Finite-K growth rates of the polynomial and decaying solutions.

    The tail window is the last ``tail_fraction * K`` indices up to ``K``
    (the computed depth of the basis). Decaying solutions are clipped to
    the depth stored with the Weyl estimate. When `classification` is
    ``'resolvent'`` the report flags ``rho_R >= 1 - margin`` and
    ``rho_Q <= 1 + margin`` (and the dual analogues).
    """
    K = basis.K
    if K < 1:
        raise ValueError("basis must be computed past index 0")
    k0 = max(1, K - int(round(tail_fraction * K)))
    ks = np.arange(k0, K + 1, dtype=float)
    rho_Q = _rho(basis.Q.log2_norms(k0, K), ks)
    rho_Qp = _rho(basis.Qplus.log2_norms(k0, K), ks)
    Kr = K if weyl.decaying is None else min(K, weyl.decaying.L)
    kr0 = max(1, min(k0, Kr))
    ksr = np.arange(kr0, Kr + 1, dtype=float)
    rho_R = _rho(log2_norms(*decaying_rows(basis, weyl, kr0, Kr)), ksr)
    rho_Rp = _rho(log2_norms(*decaying_cols(basis, weyl, kr0, Kr)), ksr)
    rep = GrowthReport(K, (k0, K), rho_Q, rho_R, rho_Qp, rho_Rp)
    if classification == RESOLVENT:
        for name, arr in (("rho_R", rho_R), ("rho_Rplus", rho_Rp)):
            rep.flags += [f"{name}[{j}]={v:.4g} >= 1" for j, v in enumerate(arr) if v >= 1 - margin]
        for name, arr in (("rho_Q", rho_Q), ("rho_Qplus", rho_Qp)):
            rep.flags += [f"{name}[{j}]={v:.4g} <= 1" for j, v in enumerate(arr) if v <= 1 + margin]
    return rep


__all__ = [
    "DecayFit",
    "GrowthReport",
    "INCONCLUSIVE",
    "NOT_RESOLVENT",
    "RESOLVENT",
    "classify",
    "decay_fit",
    "decaying_identity_residual",
    "f_invariant",
    "f_spread",
    "fit_width",
    "growth_report",
    "jump_residual",
    "lemma2_residual",
    "solution_pairs",
]
