# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled batch evaluation of constant-coefficient forms on frame fields."""

import numpy as np


cdef inline double _det2(double a, double b, double c, double d) nogil:
    return a * d - b * c


cdef inline double _det3(double[4][4] m) nogil:
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


cdef inline double _minor3(double[4][4] m, int skip) nogil:
    # 3x3 minor of rows 1..3 with column `skip` removed
    cdef double[4][4] s
    cdef int r, c, cc
    for r in range(3):
        cc = 0
        for c in range(4):
            if c != skip:
                s[r][cc] = m[r + 1][c]
                cc += 1
    return _det3(s)


cdef inline double _det4(double[4][4] m) nogil:
    return (m[0][0] * _minor3(m, 0) - m[0][1] * _minor3(m, 1)
            + m[0][2] * _minor3(m, 2) - m[0][3] * _minor3(m, 3))


def eval_form_on_frames(const int[:, ::1] idx, const double[::1] coef,
                        const double[:, :, ::1] frames):
    """Evaluate sum_t coef[t] * det(frames[p][:, idx[t]]) for every point p.

    ``frames`` has shape (npoints, k, 7) and ``idx`` has shape (nterms, k)
    with 0-based columns; k must be between 1 and 4.
    """
    cdef Py_ssize_t npts = frames.shape[0]
    cdef Py_ssize_t k = frames.shape[1]
    cdef Py_ssize_t nterms = idx.shape[0]
    if idx.shape[1] != k:
        raise ValueError("index table and frames disagree on degree")
    if k < 1 or k > 4:
        raise ValueError("compiled kernel supports degrees 1..4")
    out = np.zeros(npts, dtype=np.float64)
    cdef double[::1] o = out
    cdef double[4][4] m
    cdef double acc, d
    cdef Py_ssize_t p, t, r, c
    with nogil:
        for p in range(npts):
            acc = 0.0
            for t in range(nterms):
                for r in range(k):
                    for c in range(k):
                        m[r][c] = frames[p, r, idx[t, c]]
                if k == 1:
                    d = m[0][0]
                elif k == 2:
                    d = _det2(m[0][0], m[0][1], m[1][0], m[1][1])
                elif k == 3:
                    d = _det3(m)
                else:
                    d = _det4(m)
                acc = acc + coef[t] * d
            o[p] = acc
    return out
