# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels (hot path of the energy/gradient sweeps).

Same contract as pykernels: nodal-difference element gradients, zero-base
weight defined as 0.
"""

from libc.math cimport pow

import numpy as np


def p_energy_raw(const long[:, ::1] conn, const double[:, :, ::1] bgrads,
                 const double[::1] meas, const double[::1] u, double p):
    cdef Py_ssize_t ne = conn.shape[0]
    cdef Py_ssize_t nv = conn.shape[1]
    cdef Py_ssize_t dim = bgrads.shape[2]
    cdef Py_ssize_t e, i, d
    cdef double g0, g1, du, g2, acc = 0.0
    cdef double half_p = 0.5 * p

    for e in range(ne):
        g0 = 0.0
        g1 = 0.0
        for i in range(nv - 1):
            du = u[conn[e, i + 1]] - u[conn[e, 0]]
            g0 += du * bgrads[e, i, 0]
            if dim == 2:
                g1 += du * bgrads[e, i, 1]
        g2 = g0 * g0 + g1 * g1
        acc += meas[e] * pow(g2, half_p)
    return acc


def p2_gradient(const long[:, ::1] conn, const double[:, :, ::1] bgrads,
                const double[::1] meas, const double[::1] u, double p,
                double eps, double alpha_p, double alpha_2,
                double[::1] out):
    cdef Py_ssize_t ne = conn.shape[0]
    cdef Py_ssize_t nv = conn.shape[1]
    cdef Py_ssize_t dim = bgrads.shape[2]
    cdef Py_ssize_t e, i
    cdef double g0, g1, du, base, w, coef, s, s_sum
    cdef double eps2 = eps * eps
    cdef double half_pm2 = 0.5 * (p - 2.0)

    for e in range(ne):
        g0 = 0.0
        g1 = 0.0
        for i in range(nv - 1):
            du = u[conn[e, i + 1]] - u[conn[e, 0]]
            g0 += du * bgrads[e, i, 0]
            if dim == 2:
                g1 += du * bgrads[e, i, 1]
        base = g0 * g0 + g1 * g1 + eps2
        if base == 0.0:
            w = 0.0
        else:
            w = pow(base, half_pm2)
        coef = (alpha_p * w + alpha_2) * meas[e]
        s_sum = 0.0
        for i in range(nv - 1):
            s = g0 * bgrads[e, i, 0]
            if dim == 2:
                s += g1 * bgrads[e, i, 1]
            out[conn[e, i + 1]] += coef * s
            s_sum += s
        out[conn[e, 0]] -= coef * s_sum
