# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte Carlo kernels (see ``_fallback`` for the reference)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

def sample_categorical(probs, uniforms):
    cdef const double[:, ::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef const double[::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], m = p.shape[1], i, j, k
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] o = out
    cdef double acc, target
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(m):
                acc = acc + p[i, j]
            target = u[i] * acc
            acc = 0.0
            k = m - 1
            for j in range(m):
                acc = acc + p[i, j]
                if acc > target:
                    k = j
                    break
            while k > 0 and p[i, k] <= 0.0:
                k -= 1
            o[i] = k
    return out


def unlock_bell_probs(unitary, states):
    # complex products are spelled out in real arithmetic: the C99 complex
    # multiply goes through a slow inf/nan-safe helper
    cdef const double[:, :, ::1] u = np.ascontiguousarray(
        unitary, dtype=np.complex128).view(np.float64).reshape(8, 8, 2)
    cdef const double[:, :, ::1] psi = np.ascontiguousarray(
        states, dtype=np.complex128).view(np.float64).reshape(-1, 8, 2)
    cdef Py_ssize_t n = psi.shape[0], i, r, c, k
    out = np.zeros((n, 4), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double re[8]
    cdef double im[8]
    cdef double ar, ai, xr, xi, yr, yi
    with nogil:
        for i in range(n):
            for r in range(8):
                ar = 0.0
                ai = 0.0
                for c in range(8):
                    xr = u[r, c, 0]
                    xi = u[r, c, 1]
                    yr = psi[i, c, 0]
                    yi = psi[i, c, 1]
                    ar = ar + xr * yr - xi * yi
                    ai = ai + xr * yi + xi * yr
                re[r] = ar
                im[r] = ai
            for k in range(0, 8, 4):
                # |(a00 +- a11)/sqrt2|^2 and |(a01 +- a10)/sqrt2|^2
                xr = re[k] + re[k + 3]
                xi = im[k] + im[k + 3]
                o[i, 0] += 0.5 * (xr * xr + xi * xi)
                xr = re[k] - re[k + 3]
                xi = im[k] - im[k + 3]
                o[i, 1] += 0.5 * (xr * xr + xi * xi)
                xr = re[k + 1] + re[k + 2]
                xi = im[k + 1] + im[k + 2]
                o[i, 2] += 0.5 * (xr * xr + xi * xi)
                xr = re[k + 1] - re[k + 2]
                xi = im[k + 1] - im[k + 2]
                o[i, 3] += 0.5 * (xr * xr + xi * xi)
    return out


def qubit_probs(states, bases):
    cdef const double[:, :, ::1] psi = np.ascontiguousarray(
        states, dtype=np.complex128).view(np.float64).reshape(-1, 2, 2)
    cdef const double[:, :, :, ::1] b = np.ascontiguousarray(
        bases, dtype=np.complex128).view(np.float64).reshape(-1, 2, 2, 2)
    cdef Py_ssize_t n = psi.shape[0], i, j
    out = np.empty((n, 2), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double ar, ai
    with nogil:
        for i in range(n):
            for j in range(2):
                # conj(b) . psi
                ar = b[i, j, 0, 0] * psi[i, 0, 0] + b[i, j, 0, 1] * psi[i, 0, 1] \
                    + b[i, j, 1, 0] * psi[i, 1, 0] + b[i, j, 1, 1] * psi[i, 1, 1]
                ai = b[i, j, 0, 0] * psi[i, 0, 1] - b[i, j, 0, 1] * psi[i, 0, 0] \
                    + b[i, j, 1, 0] * psi[i, 1, 1] - b[i, j, 1, 1] * psi[i, 1, 0]
                o[i, j] = ar * ar + ai * ai
    return out
