"""Seeded operator generators and a brute-force dense oracle.

The oracle builds the section entry by entry through ``BandOperator.entry``
and inverts it with plain dense Gaussian elimination. It shares no code
with the recurrence, kernel or banded Weyl solver, so comparisons against
it are not circular.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bandop import BandOperator
from .errors import SingularSection

PERIOD = 8

# off-spectrum test points, in units of the operator bound
TEST_LAMBDAS = (3.0, -3.0, 2.5 + 1.0j, -1.0 + 2.0j, 4.0j, 100.0)

BLOCK_ORDERS = (1, 2, 3)
BANDWIDTHS = ((1, 1), (2, 1), (1, 2), (2, 2))


@dataclass(frozen=True)
class OperatorSeed:
    seed: int
    N: int = 1
    r: int = 1
    s: int = 1
    shift: float = 2.0


def random_operator(seed: OperatorSeed) -> BandOperator:
    """Periodic operator (period 8) with entries uniform in ``[0,1) + i[0,1)``.

    The extreme diagonals get ``shift * E`` added so they stay invertible.
    """
    rng = np.random.default_rng(seed.seed)
    N, r, s = seed.N, seed.r, seed.s
    diags = {}
    for off in range(-s, r + 1):
        blocks = rng.random((PERIOD, N, N)) + 1j * rng.random((PERIOD, N, N))
        if off in (-s, r):
            blocks = blocks + seed.shift * np.eye(N)
        diags[off] = blocks
    return BandOperator(N, r, s, "periodic", diags)


def seeded_operators(count=10):
    """Fixed seeded operators; seed ``i`` gets ``N = BLOCK_ORDERS[i % 3]`` and ``(r, s) = BANDWIDTHS[i % 4]``."""
    ops = []
    for i in range(count):
        r, s = BANDWIDTHS[i % len(BANDWIDTHS)]
        ops.append(random_operator(OperatorSeed(i, BLOCK_ORDERS[i % len(BLOCK_ORDERS)], r, s)))
    return ops


def probe_lambdas(op, count=len(TEST_LAMBDAS)):
    """The first `count` off-spectrum points scaled by the operator bound."""
    return [complex(z) * op.bound for z in TEST_LAMBDAS[:count]]


def free_jacobi(N=1):
    """Discrete Laplacian ``A[k, k+1] = A[k+1, k] = E``, zero diagonal."""
    E = np.eye(N)
    return BandOperator(N, 1, 1, "constant", {-1: E, 0: 0 * E, 1: E})


def dense_section(op: BandOperator, lam, M):
    """``lam I - A`` restricted to blocks ``0..M-1``, built entry by entry."""
    N = op.N
    T = np.zeros((M * N, M * N), dtype=complex)
    for k in range(M):
        for l in range(M):
            T[k * N:(k + 1) * N, l * N:(l + 1) * N] = -op.entry(k, l)
        T[k * N:(k + 1) * N, k * N:(k + 1) * N] += lam * np.eye(N)
    return T


def _gauss_inverse(T, pivot):
    n = T.shape[0]
    a = np.concatenate([T.astype(complex), np.eye(n, dtype=complex)], axis=1)
    for j in range(n):
        if pivot:
            p = j + int(np.argmax(np.abs(a[j:, j])))
            if p != j:
                a[[j, p]] = a[[p, j]]
        piv = a[j, j]
        if piv == 0:
            raise SingularSection("zero pivot in dense elimination")
        a[j] /= piv
        col = a[:, j].copy()
        col[j] = 0
        a -= np.outer(col, a[j])
    return a[:, n:]


def oracle_section_inverse(op: BandOperator, lam, M, cond_cap=1e14):
    """Dense inverse of the ``M``-block section as ``(M, M, N, N)`` blocks.

    Unpivoted Gauss-Jordan elimination is tried first; if its residual is
    poor the elimination is repeated with partial pivoting.
    """
    T = dense_section(op, lam, M)
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > cond_cap:
        raise SingularSection(f"oracle section is numerically singular (cond {cond:.3g})")
    eye = np.eye(T.shape[0])
    try:
        with np.errstate(all="ignore"):
            inv = _gauss_inverse(T, pivot=False)
        ok = np.all(np.isfinite(inv)) and np.linalg.norm(T @ inv - eye) <= 1e-12 * cond * T.shape[0]
    except SingularSection:
        ok = False
    if not ok:
        inv = _gauss_inverse(T, pivot=True)
    N = op.N
    return inv.reshape(M, N, M, N).swapaxes(1, 2).copy()


def oracle_inverse_entry(op: BandOperator, lam, M, k, n):
    """Block ``(k, n)`` of the dense section inverse; requires ``k, n < M/2``."""
    if not (0 <= k < M / 2 and 0 <= n < M / 2):
        raise ValueError("oracle entries must lie in the leading half of the section")
    return oracle_section_inverse(op, lam, M)[k, n]
