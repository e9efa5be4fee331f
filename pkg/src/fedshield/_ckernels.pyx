# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled client-MLP kernels.

Loop implementations of the reference kernels in kernels.py. At desk-scale
matrix sizes (batch 32, width 32) per-call dispatch overhead dominates numpy,
so plain C loops win; see benchmarks/bench_kernels.py.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

DEF LOG_FLOOR = 1e-300


cdef void _hidden(double[:, ::1] x, double[:, ::1] w1, double[::1] b1,
                  double[:, ::1] h_pre, double[:, ::1] h) nogil:
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], m = w1.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(n):
        for j in range(m):
            s = b1[j]
            for k in range(d):
                s += x[i, k] * w1[k, j]
            h_pre[i, j] = s
            h[i, j] = s if s > 0.0 else 0.0


cdef void _logits_softmax(double[:, ::1] h, double[:, ::1] w2, double[::1] b2,
                          double[:, ::1] probs) nogil:
    cdef Py_ssize_t n = h.shape[0], m = h.shape[1], c = w2.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, mx, tot
    for i in range(n):
        for k in range(c):
            s = b2[k]
            for j in range(m):
                s += h[i, j] * w2[j, k]
            probs[i, k] = s
        mx = probs[i, 0]
        for k in range(1, c):
            if probs[i, k] > mx:
                mx = probs[i, k]
        tot = 0.0
        for k in range(c):
            probs[i, k] = exp(probs[i, k] - mx)
            tot += probs[i, k]
        for k in range(c):
            probs[i, k] /= tot


def forward_probs(w1, b1, w2, b2, x):
    cdef double[:, ::1] w1v = np.ascontiguousarray(w1, dtype=np.float64)
    cdef double[::1] b1v = np.ascontiguousarray(b1, dtype=np.float64)
    cdef double[:, ::1] w2v = np.ascontiguousarray(w2, dtype=np.float64)
    cdef double[::1] b2v = np.ascontiguousarray(b2, dtype=np.float64)
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = w1v.shape[1], c = w2v.shape[1]
    h_pre_arr = np.empty((n, m), dtype=np.float64)
    h_arr = np.empty((n, m), dtype=np.float64)
    probs_arr = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] h_pre = h_pre_arr, h = h_arr, probs = probs_arr
    with nogil:
        _hidden(xv, w1v, b1v, h_pre, h)
        _logits_softmax(h, w2v, b2v, probs)
    return probs_arr


def loss_grad(w1, b1, w2, b2, x, y):
    cdef double[:, ::1] w1v = np.ascontiguousarray(w1, dtype=np.float64)
    cdef double[::1] b1v = np.ascontiguousarray(b1, dtype=np.float64)
    cdef double[:, ::1] w2v = np.ascontiguousarray(w2, dtype=np.float64)
    cdef double[::1] b2v = np.ascontiguousarray(b2, dtype=np.float64)
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef long[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1]
    cdef Py_ssize_t m = w1v.shape[1], c = w2v.shape[1]
    h_pre_arr = np.empty((n, m), dtype=np.float64)
    h_arr = np.empty((n, m), dtype=np.float64)
    probs_arr = np.empty((n, c), dtype=np.float64)
    gw1_arr = np.zeros((d, m), dtype=np.float64)
    gb1_arr = np.zeros(m, dtype=np.float64)
    gw2_arr = np.zeros((m, c), dtype=np.float64)
    gb2_arr = np.zeros(c, dtype=np.float64)
    dh_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] h_pre = h_pre_arr, h = h_arr, probs = probs_arr
    cdef double[:, ::1] gw1 = gw1_arr, gw2 = gw2_arr, dh = dh_arr
    cdef double[::1] gb1 = gb1_arr, gb2 = gb2_arr
    cdef Py_ssize_t i, j, k
    cdef double loss = 0.0, p, s
    with nogil:
        _hidden(xv, w1v, b1v, h_pre, h)
        _logits_softmax(h, w2v, b2v, probs)
        for i in range(n):
            p = probs[i, yv[i]]
            if p < LOG_FLOOR:
                p = LOG_FLOOR
            loss -= log(p)
            probs[i, yv[i]] -= 1.0
            for k in range(c):
                probs[i, k] /= n
        loss /= n
        for i in range(n):
            for j in range(m):
                s = 0.0
                for k in range(c):
                    gw2[j, k] += h[i, j] * probs[i, k]
                    s += probs[i, k] * w2v[j, k]
                dh[i, j] = s if h_pre[i, j] > 0.0 else 0.0
            for k in range(c):
                gb2[k] += probs[i, k]
        for i in range(n):
            for k in range(d):
                for j in range(m):
                    gw1[k, j] += xv[i, k] * dh[i, j]
            for j in range(m):
                gb1[j] += dh[i, j]
    return loss, gw1_arr, gb1_arr, gw2_arr, gb2_arr


def predict(w1, b1, w2, b2, x):
    cdef double[:, ::1] w1v = np.ascontiguousarray(w1, dtype=np.float64)
    cdef double[::1] b1v = np.ascontiguousarray(b1, dtype=np.float64)
    cdef double[:, ::1] w2v = np.ascontiguousarray(w2, dtype=np.float64)
    cdef double[::1] b2v = np.ascontiguousarray(b2, dtype=np.float64)
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = w1v.shape[1], c = w2v.shape[1]
    h_pre_arr = np.empty((n, m), dtype=np.float64)
    h_arr = np.empty((n, m), dtype=np.float64)
    out_arr = np.empty(n, dtype=np.int64)
    cdef double[:, ::1] h_pre = h_pre_arr, h = h_arr
    cdef long[::1] out = out_arr
    cdef Py_ssize_t i, j, k, best
    cdef double s, best_val, logit
    with nogil:
        _hidden(xv, w1v, b1v, h_pre, h)
        for i in range(n):
            best = 0
            best_val = -1e308
            for k in range(c):
                s = b2v[k]
                for j in range(m):
                    s += h[i, j] * w2v[j, k]
                if s > best_val:
                    best_val = s
                    best = k
            out[i] = best
    return out_arr
