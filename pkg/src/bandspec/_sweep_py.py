"""Pure-Python (numpy) recurrence sweep; reference for the compiled kernel."""
import numpy as np

_EMIN = np.iinfo(np.int64).min // 4


def sweep(coef, inv_top, lam, mant, expo, nb, start, stop):
    """Advance a scaled solution family through recurrence rows ``start..stop-1``.

    Storage index ``t`` holds solution index ``t - nb``. At row ``k`` the
    window ``mant[k : k + w]`` (``w = coef.shape[1] - 1``) holds the known
    values and ``mant[k + w]`` receives

        inv_top[k] @ (lam * Y_k - sum_d coef[k, d] @ Y_{k - nb + d})

    for every column of the family independently, renormalised so that each
    mantissa has Frobenius norm in [1, 2).

    Parameters
    ----------
    coef : ndarray, (rows, w + 1, N, N) complex
    inv_top : ndarray, (rows, N, N) complex
    lam : complex
    mant : ndarray, (L, ncol, N, N) complex, modified in place
    expo : ndarray, (L, ncol) int64, modified in place
    nb : int
        Number of trailing (backward) terms in the stencil.
    start, stop : int
    """
    w = coef.shape[1] - 1
    lam = complex(lam)
    for k in range(start, stop):
        win_m = mant[k:k + w]
        win_e = expo[k:k + w]
        nz = np.any(win_m != 0, axis=(2, 3))
        ee = np.where(nz, win_e, _EMIN)
        emax = ee.max(axis=0)
        emax = np.where(emax == _EMIN, 0, emax)
        scale = np.where(nz, np.ldexp(1.0, np.clip(ee - emax, -2000, 0).astype(np.int32)), 0.0)
        acc = lam * scale[nb][:, None, None] * win_m[nb]
        acc -= np.einsum("dab,dcbe,dc->cae", coef[k, :w], win_m, scale)
        out = inv_top[k] @ acc
        nrm = np.linalg.norm(out, axis=(1, 2))
        _, fe = np.frexp(nrm)
        shift = np.where(nrm > 0, fe.astype(np.int64) - 1, 0)
        sh = (-shift).astype(np.int32)[:, None, None]
        mant[k + w] = np.ldexp(out.real, sh) + 1j * np.ldexp(out.imag, sh)
        expo[k + w] = np.where(nrm > 0, emax + shift, 0)
