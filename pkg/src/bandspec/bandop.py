"""Infinite band matrices with N x N block entries.

Entries ``A[k, l]`` vanish unless ``k - s <= l <= k + r``; diagonals are
described by one of three deterministic rules:

``constant``
    one block per diagonal offset.
``periodic``
    a list of blocks per offset, entry for row ``k`` is ``blocks[k % len]``.
``prefix_tail``
    a list per offset; rows ``k < len - 1`` use ``blocks[k]``, all later rows
    repeat the last block.

Diagonals are indexed by offset ``d = l - k`` and by the *row* ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blockalg import DEFAULT_COND_CAP, block_inverse
from .errors import ParseError, SingularBlock, SingularSection

KINDS = ("constant", "periodic", "prefix_tail")


class BandOperator:
    """Band operator with ``r`` superdiagonals and ``s`` subdiagonals of blocks.

    Parameters
    ----------
    N, r, s : int
        Block order, upper and lower bandwidth (both at least 1).
    kind : {'constant', 'periodic', 'prefix_tail'}
    diagonals : dict
        Maps offset in ``[-s, r]`` to a block (``constant``) or a sequence of
        blocks. Missing offsets are zero; ``-s`` and ``r`` are required.
    cond_cap : float
        Condition cap used whenever an extreme diagonal block is inverted.
    """

    def __init__(self, N, r, s, kind, diagonals, cond_cap=DEFAULT_COND_CAP):
        if N < 1 or r < 1 or s < 1:
            raise ValueError(f"need N, r, s >= 1, got N={N}, r={r}, s={s}")
        if kind not in KINDS:
            raise ValueError(f"unknown kind {kind!r}")
        self.N, self.r, self.s, self.kind = int(N), int(r), int(s), kind
        self.cond_cap = cond_cap
        diags = {}
        for off, blocks in diagonals.items():
            off = int(off)
            if not -s <= off <= r:
                raise ValueError(f"offset {off} outside band [-{s}, {r}]")
            arr = np.array(blocks, dtype=complex)
            if arr.ndim == 2:
                arr = arr[None]
            if arr.ndim != 3 or arr.shape[1:] != (N, N) or arr.shape[0] == 0:
                raise ValueError(f"offset {off}: expected blocks of shape ({N}, {N}), got {arr.shape}")
            if kind == "constant" and arr.shape[0] != 1:
                raise ValueError(f"offset {off}: constant kind takes a single block")
            arr.setflags(write=False)
            diags[off] = arr
        for off in (-s, r):
            if off not in diags:
                raise ValueError(f"offset {off} is mandatory")
        self.diagonals = diags
        self._tables = {}

    def __repr__(self):
        return f"BandOperator(N={self.N}, r={self.r}, s={self.s}, kind={self.kind!r})"

    def __eq__(self, other):
        if not isinstance(other, BandOperator):
            return NotImplemented
        return (
            (self.N, self.r, self.s, self.kind) == (other.N, other.r, other.s, other.kind)
            and self.diagonals.keys() == other.diagonals.keys()
            and all(np.array_equal(self.diagonals[o], other.diagonals[o]) for o in self.diagonals)
        )

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_tables"] = {}
        return state

    # -- entries ---------------------------------------------------------

    def _rows_index(self, blocks, k):
        k = np.asarray(k)
        m = blocks.shape[0]
        if self.kind == "constant":
            return np.zeros_like(k)
        if self.kind == "periodic":
            return k % m
        return np.minimum(k, m - 1)

    def diagonal(self, offset, rows):
        """Blocks ``A[k, k + offset]`` for an array of rows; zero where the column is negative."""
        rows = np.asarray(rows, dtype=np.int64)
        out = np.zeros(rows.shape + (self.N, self.N), dtype=complex)
        blocks = self.diagonals.get(offset)
        if blocks is None:
            return out
        valid = (rows >= 0) & (rows + offset >= 0)
        out[valid] = blocks[self._rows_index(blocks, rows[valid])]
        return out

    def entry(self, k, l):
        """Block ``A[k, l]`` of the operator itself (zero outside the band)."""
        if k < 0 or l < 0 or not -self.s <= l - k <= self.r:
            return np.zeros((self.N, self.N), dtype=complex)
        return self.diagonal(l - k, np.array([k]))[0]

    def coeff(self, j, l):
        """Coefficient ``A[j, l]`` as used by the recurrences.

        For a non-negative row and negative column this is ``-E`` at
        ``l = j - s`` (rows ``j < s``) and zero otherwise; symmetrically for a
        negative row and non-negative column, ``-E`` at ``j = l - r``
        (columns ``l < r``). Both negative gives zero.
        """
        N = self.N
        if j >= 0 and l >= 0:
            return self.entry(j, l)
        if j >= 0 > l:
            return -np.eye(N, dtype=complex) if (j < self.s and l == j - self.s) else np.zeros((N, N), complex)
        if l >= 0 > j:
            return -np.eye(N, dtype=complex) if (l < self.r and j == l - self.r) else np.zeros((N, N), complex)
        return np.zeros((N, N), dtype=complex)

    def band_rows(self, k0, k1):
        """Array ``(k1 - k0, r + s + 1, N, N)`` with ``[k, d] = A[k, k - s + d]``."""
        rows = np.arange(k0, k1)
        out = np.empty((len(rows), self.r + self.s + 1, self.N, self.N), dtype=complex)
        for d in range(self.r + self.s + 1):
            out[:, d] = self.diagonal(d - self.s, rows)
        return out

    @property
    def bound(self):
        """Largest Frobenius norm among the declared blocks."""
        return max(
            float(np.max(np.linalg.norm(b, axis=(1, 2)))) for b in self.diagonals.values()
        )

    @property
    def period(self):
        """Rows after which the entry pattern repeats (or becomes constant)."""
        lens = [b.shape[0] for b in self.diagonals.values()]
        if self.kind == "constant":
            return 1
        if self.kind == "periodic":
            return int(np.lcm.reduce(lens))
        return max(lens)

    # -- recurrence tables (lambda independent, cached) ------------------

    def forward_table(self, kmax):
        """Coefficients for advancing the forward recurrence at rows ``0..kmax``.

        Returns ``(coef, inv_top)`` with ``coef[k, d] = coeff(k, k - s + d)``
        and ``inv_top[k] = A[k, k + r]^{-1}``.
        """
        return self._table("fwd", kmax)

    def dual_table(self, kmax):
        """Transposed coefficients for the dual recurrence at columns ``0..kmax``.

        ``coef[k, d] = coeff(k - r + d, k).T`` and ``inv_top[k]`` is the
        transpose of ``A[k + s, k]^{-1}``.
        """
        return self._table("dual", kmax)

    def _table(self, which, kmax):
        cached = self._tables.get(which)
        if cached is not None and cached[0].shape[0] > kmax:
            return cached[0][: kmax + 1], cached[1][: kmax + 1]
        size = max(64, 1 << int(kmax).bit_length())
        builder = self._build_forward if which == "fwd" else self._build_dual
        coef, inv = builder(size)
        coef.setflags(write=False)
        inv.setflags(write=False)
        self._tables[which] = (coef, inv)
        return coef[: kmax + 1], inv[: kmax + 1]

    def _invert_tops(self, tops, transpose):
        # the entry pattern repeats with the period, so invert one period only
        p = self.period
        inv = np.empty_like(tops)
        for k in range(tops.shape[0]):
            if k >= 2 * p + self.r + self.s:
                inv[k] = inv[k - p]
                continue
            try:
                b = block_inverse(tops[k], self.cond_cap)
            except SingularBlock as exc:
                raise SingularBlock(str(exc), cond=exc.cond, index=k) from None
            inv[k] = b.T if transpose else b
        return inv

    def _build_forward(self, size):
        r, s, N = self.r, self.s, self.N
        coef = self.band_rows(0, size)
        for k in range(min(s, size)):
            coef[k, 0] = -np.eye(N)
        return coef, self._invert_tops(coef[:, r + s].copy(), transpose=False)

    def _build_dual(self, size):
        r, s, N = self.r, self.s, self.N
        cols = np.arange(size)
        coef = np.zeros((size, r + s + 1, N, N), dtype=complex)
        for d in range(r + s + 1):
            # row j = k - r + d, diagonal offset k - j = r - d
            coef[:, d] = self.diagonal(r - d, cols - r + d)
        for k in range(min(r, size)):
            coef[k, 0] = -np.eye(N)
        tops = coef[:, r + s].copy()
        coef = np.ascontiguousarray(np.swapaxes(coef, -1, -2))
        return coef, self._invert_tops(tops, transpose=True)

    # -- serialisation ----------------------------------------------------

    def to_dict(self):
        def enc(b):
            return [[float(z.real), float(z.imag)] for z in b.reshape(-1)]

        diags = {}
        for off, blocks in sorted(self.diagonals.items()):
            if self.kind == "constant":
                diags[str(off)] = enc(blocks[0])
            else:
                diags[str(off)] = [enc(b) for b in blocks]
        return {"N": self.N, "r": self.r, "s": self.s, "kind": self.kind, "diagonals": diags}

    @classmethod
    def from_dict(cls, obj, cond_cap=DEFAULT_COND_CAP):
        """Build an operator from the JSON schema; raises :class:`ParseError`."""
        if not isinstance(obj, dict):
            raise ParseError("operator spec must be a JSON object")
        vals = {}
        for key in ("N", "r", "s"):
            v = obj.get(key)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ParseError("expected a positive integer", field=key)
            vals[key] = v
        N, r, s = vals["N"], vals["r"], vals["s"]
        kind = obj.get("kind")
        if kind not in KINDS:
            raise ParseError(f"kind must be one of {KINDS}", field="kind")
        diags_in = obj.get("diagonals")
        if not isinstance(diags_in, dict):
            raise ParseError("expected an object keyed by offset", field="diagonals")
        diags = {}
        for key, val in diags_in.items():
            fld = f"diagonals.{key}"
            try:
                off = int(key)
            except (TypeError, ValueError):
                raise ParseError("offset keys must be integers", field=fld) from None
            if not -s <= off <= r:
                raise ParseError(f"offset outside band [-{s}, {r}]", field=fld)
            diags[off] = _parse_blocks(val, N, kind, fld)
        for off in (-s, r):
            if off not in diags:
                raise ParseError("mandatory offset missing", field=f"diagonals.{off}")
        return cls(N, r, s, kind, diags, cond_cap=cond_cap)


def _parse_block(val, N, fld):
    if not isinstance(val, list) or len(val) != N * N:
        raise ParseError(f"block must list {N * N} [re, im] pairs", field=fld)
    out = np.empty(N * N, dtype=complex)
    for i, pair in enumerate(val):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)
        ):
            raise ParseError("entries must be [re, im] number pairs", field=f"{fld}[{i}]")
        out[i] = complex(pair[0], pair[1])
    if not np.all(np.isfinite(out)):
        raise ParseError("non-finite entry", field=fld)
    return out.reshape(N, N)


def _parse_blocks(val, N, kind, fld):
    # a block is a list of pairs, a list of blocks is one level deeper
    is_single = isinstance(val, list) and val and isinstance(val[0], list) and val[0] and not isinstance(val[0][0], list)
    if is_single:
        return _parse_block(val, N, fld)[None]
    if kind == "constant":
        raise ParseError("constant kind takes a single block", field=fld)
    if not isinstance(val, list) or not val:
        raise ParseError("expected a block or a non-empty list of blocks", field=fld)
    return np.stack([_parse_block(b, N, f"{fld}[{i}]") for i, b in enumerate(val)])


@dataclass
class ValidationReport:
    """Outcome of :func:`validate`."""

    K: int
    bound: float
    failures: list = field(default_factory=list)  # (k, 'upper'|'lower', cond)

    @property
    def ok(self):
        return not self.failures

    def to_dict(self):
        return {
            "K": self.K,
            "bound": self.bound,
            "ok": self.ok,
            "failures": [{"k": k, "entry": w, "cond": c} for k, w, c in self.failures],
        }


def validate(op: BandOperator, K: int) -> ValidationReport:
    """Check invertibility of ``A[k, k+r]`` and ``A[k+s, k]`` for ``k <= K``."""
    if K < op.r + op.s:
        raise ValueError(f"K must be at least r + s = {op.r + op.s}")
    rows = np.arange(K + 1)
    upper = op.diagonal(op.r, rows)
    lower = op.diagonal(-op.s, rows + op.s)
    failures = []
    for k in range(K + 1):
        for which, b in (("upper", upper[k]), ("lower", lower[k])):
            cond = float(np.linalg.cond(b)) if np.any(b) else np.inf
            if not np.isfinite(cond) or cond > op.cond_cap:
                failures.append((k, which, cond))
    band = op.band_rows(0, K + 1)
    bound = float(np.max(np.linalg.norm(band, axis=(-2, -1))))
    return ValidationReport(K=K, bound=bound, failures=failures)


@dataclass
class FiniteSection:
    """Principal ``M``-block truncation of ``lam I - A``, stored densely."""

    lam: complex
    M: int
    N: int
    dense: np.ndarray  # (M N, M N)

    def block(self, k, l):
        N = self.N
        return self.dense[k * N:(k + 1) * N, l * N:(l + 1) * N]

    def blocks(self):
        """View as an ``(M, M, N, N)`` array of blocks."""
        M, N = self.M, self.N
        return self.dense.reshape(M, N, M, N).swapaxes(1, 2)


def finite_section(op: BandOperator, lam, M: int) -> FiniteSection:
    """Dense ``M``-block section of ``lam I - A``."""
    if M < 1:
        raise ValueError("section size must be positive")
    N = op.N
    band = op.band_rows(0, M)
    blocks = np.zeros((M, M, N, N), dtype=complex)
    rows = np.arange(M)
    for d in range(op.r + op.s + 1):
        cols = rows + d - op.s
        ok = (cols >= 0) & (cols < M)
        blocks[rows[ok], cols[ok]] = -band[ok, d]
    blocks[rows, rows] += lam * np.eye(N)
    dense = np.ascontiguousarray(blocks.swapaxes(1, 2).reshape(M * N, M * N))
    return FiniteSection(lam=complex(lam), M=M, N=N, dense=dense)


def section_inverse(sec: FiniteSection, cond_cap=1e14):
    """Block-partitioned inverse ``(M, M, N, N)`` of a finite section.

    Raises
    ------
    SingularSection
        If the section's condition number exceeds `cond_cap`.
    """
    cond = np.linalg.cond(sec.dense)
    if not np.isfinite(cond) or cond > cond_cap:
        raise SingularSection(f"finite section is numerically singular (cond {cond:.3g})")
    inv = np.linalg.inv(sec.dense)
    M, N = sec.M, sec.N
    return inv.reshape(M, N, M, N).swapaxes(1, 2).copy()
