"""Weyl matrix estimates from finite sections of ``lam I - A``.

The Weyl matrix is the leading ``r x s`` block array of the resolvent. It is
estimated here by solving the ``M``-block section with a banded LU solve
(first ``s`` block columns and first ``r`` block rows of its inverse) and
checked for convergence by doubling ``M``.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NoConvergence, SingularSection
from .kernel import DecayingSolutions, WeylMatrix

DEFAULT_TOL = 1e-8
DEFAULT_CAP_FACTOR = 16


def banded_section(op, lam, M, transpose=False):
    """Section of ``lam I - A`` (or its transpose) in LAPACK banded storage.

    Returns ``((l, u), ab)`` for :func:`scipy.linalg.solve_banded`.
    """
    N, r, s = op.N, op.r, op.s
    lo, up = s * N + N - 1, r * N + N - 1
    if transpose:
        lo, up = up, lo
    n = M * N
    ab = np.zeros((lo + up + 1, n), dtype=complex)
    band = op.band_rows(0, M)
    ks = np.arange(M)
    for d in range(r + s + 1):
        ls = ks - s + d
        ok = (ls >= 0) & (ls < M)
        blocks = -band[ok, d]
        if d == s:
            blocks = blocks + lam * np.eye(N)
        for a in range(N):
            for b in range(N):
                i = ks[ok] * N + a
                j = ls[ok] * N + b
                if transpose:
                    i, j = j, i
                ab[up + i - j, j] = blocks[:, a, b]
    return (lo, up), ab


def _solve(op, lam, M, ncols, transpose):
    N = op.N
    lu, ab = banded_section(op, lam, M, transpose=transpose)
    rhs = np.zeros((M * N, ncols * N), dtype=complex)
    rhs[: ncols * N] = np.eye(ncols * N)
    try:
        with np.errstate(all="ignore"):
            x = scipy.linalg.solve_banded(lu, ab, rhs, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSection(f"section of size {M} at lambda={lam} is singular: {exc}") from None
    if not np.all(np.isfinite(x)):
        raise SingularSection(f"section of size {M} at lambda={lam} produced non-finite entries")
    return x


def weyl_finite_section(op, lam, M, depth=None) -> WeylMatrix:
    """Weyl estimate from the ``M``-block section.

    Parameters
    ----------
    op : BandOperator
    lam : complex
    M : int
        Section size in blocks, at least ``4 (r + s)``.
    depth : int, optional
        Last index of the decaying families to keep; defaults to ``M // 2``.
        Entries close to the truncation edge are polluted by it, so keep
        `depth` well inside the section.

    Raises
    ------
    SingularSection
    """
    N, r, s = op.N, op.r, op.s
    if M < 4 * (r + s):
        raise ValueError(f"section size {M} below 4 (r + s) = {4 * (r + s)}")
    L = M // 2 if depth is None else int(depth)
    if not 0 <= L < M:
        raise ValueError(f"depth {L} must lie in [0, {M})")
    x = _solve(op, lam, M, s, transpose=False)  # columns 0..s-1 of the inverse
    y = _solve(op, lam, M, r, transpose=True)  # rows 0..r-1, transposed

    # R_k^j = inv[k, j]; R_{-s:-1} = -I_s
    xb = x[: (L + 1) * N].reshape(L + 1, N, s, N).swapaxes(1, 2)
    rows = np.zeros((L + s + 1, s, N, N), dtype=complex)
    rows[np.arange(s), np.arange(s)] = -np.eye(N)
    rows[s:] = xb
    # R+_n^i = inv[i, n] = y[n, i].T; R+_{-r:-1} = -I_r
    yb = y[: (L + 1) * N].reshape(L + 1, N, r, N).swapaxes(1, 2)
    cols = np.zeros((L + r + 1, r, N, N), dtype=complex)
    cols[np.arange(r), np.arange(r)] = -np.eye(N)
    cols[r:] = np.swapaxes(yb, -1, -2)

    blocks = x[: r * N].reshape(r, N, s, N).swapaxes(1, 2).copy()
    return WeylMatrix(
        blocks,
        source="finite_section",
        M_used=M,
        convergence_gap=-1.0,
        decaying=DecayingSolutions(rows=rows, cols=cols, L=L),
    )


def weyl_gap(a: WeylMatrix, b: WeylMatrix) -> float:
    """Largest blockwise Frobenius distance between two Weyl matrices."""
    return float(np.max(np.linalg.norm(a.blocks - b.blocks, axis=(-2, -1))))


def weyl_converged(op, lam, M0, tol=DEFAULT_TOL, cap_factor=DEFAULT_CAP_FACTOR, depth=None) -> WeylMatrix:
    """Weyl estimate whose value is stable under doubling the section size.

    Sections of size ``M0, 2 M0, ...`` are compared pairwise; the first
    larger estimate within `tol` of its predecessor is returned with
    ``convergence_gap`` set. `depth` requests decaying families through that
    index; if the converged section is too small for it, a section of size
    ``2 depth`` is solved for the returned estimate.

    Raises
    ------
    NoConvergence
        If the gap still exceeds `tol` at section size ``cap_factor * M0``.
    SingularSection
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = M0
    prev = weyl_finite_section(op, lam, M, depth=min(M // 2, depth or M // 2))
    gap = np.inf
    while M < cap_factor * M0:
        M *= 2
        cur = weyl_finite_section(op, lam, M)
        gap = weyl_gap(prev, cur)
        if gap <= tol:
            if depth is not None and depth > cur.decaying.L:
                cur = weyl_finite_section(op, lam, 2 * depth + 2 * (op.r + op.s), depth=depth)
            cur.convergence_gap = gap
            return cur
        prev = cur
    raise NoConvergence(
        f"Weyl estimate gap {gap:.3g} exceeds tol {tol:.3g} at section size {M}", gap=gap, M=M
    )
