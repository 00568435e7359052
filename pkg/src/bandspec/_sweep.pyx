# cython: language_level=3
"""Compiled recurrence sweep; same contract as ``bandspec._sweep_py.sweep``."""
import numpy as np

from libc.math cimport frexp, ldexp, sqrt


cdef inline double _abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double complex _cscale(double complex z, int e) nogil:
    cdef double complex u
    u.real = ldexp(z.real, e)
    u.imag = ldexp(z.imag, e)
    return u


def sweep(const double complex[:, :, :, ::1] coef,
          const double complex[:, :, ::1] inv_top,
          double complex lam,
          double complex[:, :, :, ::1] mant,
          long long[:, ::1] expo,
          Py_ssize_t nb, Py_ssize_t start, Py_ssize_t stop):
    cdef Py_ssize_t w = coef.shape[1] - 1
    cdef Py_ssize_t ncol = mant.shape[1]
    cdef Py_ssize_t N = mant.shape[2]
    cdef Py_ssize_t k, c, d, a, b, e, t
    cdef long long emax, ex
    cdef bint found, nz
    cdef double sc, nrm
    cdef int fe
    cdef double complex s
    cdef double complex[:, ::1] acc = np.empty((N, N), dtype=complex)
    cdef double complex[:, ::1] tmp = np.empty((N, N), dtype=complex)
    cdef double complex[:, ::1] out = np.empty((N, N), dtype=complex)

    with nogil:
        for k in range(start, stop):
            for c in range(ncol):
                # largest exponent among nonzero blocks of the window
                found = False
                emax = 0
                for d in range(w):
                    nz = False
                    for a in range(N):
                        for b in range(N):
                            if mant[k + d, c, a, b] != 0:
                                nz = True
                    if nz and (not found or expo[k + d, c] > emax):
                        emax = expo[k + d, c]
                        found = True

                for a in range(N):
                    for b in range(N):
                        acc[a, b] = 0
                for d in range(w):
                    ex = expo[k + d, c] - emax
                    # ex > 0 only for zero blocks (exponent 0 above a negative emax)
                    if ex < -2000 or ex > 0:
                        continue
                    sc = ldexp(1.0, <int>ex)
                    if d == nb:
                        for a in range(N):
                            for b in range(N):
                                acc[a, b] = acc[a, b] + lam * sc * mant[k + d, c, a, b]
                    for a in range(N):
                        for b in range(N):
                            s = 0
                            for e in range(N):
                                s = s + coef[k, d, a, e] * mant[k + d, c, e, b]
                            acc[a, b] = acc[a, b] - sc * s

                nrm = 0.0
                for a in range(N):
                    for b in range(N):
                        s = 0
                        for e in range(N):
                            s = s + inv_top[k, a, e] * acc[e, b]
                        out[a, b] = s
                        nrm += _abs2(s)
                nrm = sqrt(nrm)
                t = k + w
                if nrm > 0:
                    frexp(nrm, &fe)
                    fe = fe - 1
                    for a in range(N):
                        for b in range(N):
                            mant[t, c, a, b] = _cscale(out[a, b], -fe)
                    expo[t, c] = emax + fe
                else:
                    for a in range(N):
                        for b in range(N):
                            mant[t, c, a, b] = 0
                    expo[t, c] = 0
