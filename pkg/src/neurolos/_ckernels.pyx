# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled split-scan kernels.

Mirror of :mod:`neurolos._kernels_py` with the same accumulation order and
first-maximum tie-breaking, so both backends return the same splits.  The
only tolerated divergence is the last ulp of ``log2`` in the entropy
criterion, where libm and numpy may round differently.

The ``*_multi`` variants scan every column of an unsorted matrix in one
call (sorting each column internally with the same stable argsort the
NumPy backend uses), which keeps the per-node cost of tree fitting out of
the Python interpreter.
"""
import numpy as np

from libc.math cimport INFINITY, NAN, log2
from libc.stdint cimport int64_t

BACKEND_NAME = "cython"

CRITERION_GINI = 0
CRITERION_ENTROPY = 1


cdef struct SplitResult:
    double gain
    double threshold
    Py_ssize_t n_left


cdef void _scan_cls(double[::1] values, int64_t[::1] labels, Py_ssize_t n,
                    int n_classes, int criterion, int min_leaf,
                    double[::1] cnt_l, double[::1] total,
                    SplitResult* out):
    cdef Py_ssize_t i, c, n_l, n_r, best_i = -1
    cdef double p, q, s_l, s_r, imp_l, imp_r, parent, gain
    cdef double best_gain = -INFINITY

    for c in range(n_classes):
        cnt_l[c] = 0.0
        total[c] = 0.0
    for i in range(n):
        total[labels[i]] += 1.0

    if criterion == CRITERION_GINI:
        s_l = 0.0
        for c in range(n_classes):
            p = total[c] / (<double>n)
            s_l += p * p
        parent = 1.0 - s_l
    else:
        parent = 0.0
        for c in range(n_classes):
            p = total[c] / (<double>n)
            if p > 0.0:
                parent -= p * log2(p)

    for i in range(n - 1):
        cnt_l[labels[i]] += 1.0
        n_l = i + 1
        n_r = n - n_l
        if values[i + 1] <= values[i]:
            continue
        if n_l < min_leaf or n_r < min_leaf:
            continue
        if criterion == CRITERION_GINI:
            s_l = 0.0
            s_r = 0.0
            for c in range(n_classes):
                p = cnt_l[c] / (<double>n_l)
                s_l += p * p
                q = (total[c] - cnt_l[c]) / (<double>n_r)
                s_r += q * q
            imp_l = 1.0 - s_l
            imp_r = 1.0 - s_r
        else:
            imp_l = 0.0
            imp_r = 0.0
            for c in range(n_classes):
                p = cnt_l[c] / (<double>n_l)
                if p > 0.0:
                    imp_l -= p * log2(p)
                q = (total[c] - cnt_l[c]) / (<double>n_r)
                if q > 0.0:
                    imp_r -= q * log2(q)
        gain = parent - ((<double>n_l) / (<double>n)) * imp_l \
            - ((<double>n_r) / (<double>n)) * imp_r
        if gain > best_gain:
            best_gain = gain
            best_i = i

    if best_i < 0:
        out.gain = -INFINITY
        out.threshold = NAN
        out.n_left = 0
    else:
        out.gain = best_gain
        out.threshold = (values[best_i] + values[best_i + 1]) / 2.0
        out.n_left = best_i + 1


def scan_split_classification(double[::1] values, int64_t[::1] labels,
                              int n_classes, int criterion, int min_leaf):
    """Best impurity-decrease split over a sorted feature column."""
    cdef Py_ssize_t n = values.shape[0]
    if n < 2 * min_leaf:
        return -INFINITY, NAN, 0
    if criterion != CRITERION_GINI and criterion != CRITERION_ENTROPY:
        raise ValueError(f"unknown criterion code {criterion}")

    cnt_l_arr = np.zeros(n_classes, dtype=np.float64)
    total_arr = np.zeros(n_classes, dtype=np.float64)
    cdef SplitResult res
    _scan_cls(values, labels, n, n_classes, criterion, min_leaf,
              cnt_l_arr, total_arr, &res)
    if res.n_left == 0:
        return -INFINITY, NAN, 0
    return res.gain, res.threshold, res.n_left


def scan_split_classification_multi(double[:, ::1] X, int64_t[::1] labels,
                                    int n_classes, int criterion, int min_leaf):
    """Best split over every column of an unsorted matrix.

    Returns ``(column, gain, threshold, n_left)``; ties between columns
    resolve to the lowest column index.  ``(-1, -inf, nan, 0)`` when no
    column admits a split.
    """
    cdef Py_ssize_t n = X.shape[0], m = X.shape[1]
    if criterion != CRITERION_GINI and criterion != CRITERION_ENTROPY:
        raise ValueError(f"unknown criterion code {criterion}")
    if n < 2 * min_leaf:
        return -1, -INFINITY, NAN, 0

    vals_arr = np.empty(n, dtype=np.float64)
    labs_arr = np.empty(n, dtype=np.int64)
    cnt_l_arr = np.zeros(n_classes, dtype=np.float64)
    total_arr = np.zeros(n_classes, dtype=np.float64)
    cdef double[::1] vals = vals_arr
    cdef int64_t[::1] labs = labs_arr
    cdef int64_t[::1] order
    cdef SplitResult res
    cdef Py_ssize_t f, i, best_f = -1, best_nl = 0
    cdef double best_gain = -INFINITY, best_thr = NAN

    X_nd = np.asarray(X)
    for f in range(m):
        order = np.argsort(X_nd[:, f], kind="stable").astype(np.int64, copy=False)
        for i in range(n):
            vals[i] = X[order[i], f]
            labs[i] = labels[order[i]]
        _scan_cls(vals, labs, n, n_classes, criterion, min_leaf,
                  cnt_l_arr, total_arr, &res)
        if res.n_left > 0 and res.gain > best_gain:
            best_gain = res.gain
            best_thr = res.threshold
            best_nl = res.n_left
            best_f = f

    if best_f < 0:
        return -1, -INFINITY, NAN, 0
    return best_f, best_gain, best_thr, best_nl


cdef inline double _grad_score(double g, double h, double lam, double alpha) nogil:
    cdef double denom = h + lam
    cdef double t
    if denom <= 0.0:
        return 0.0
    if alpha > 0.0:
        if g > alpha:
            t = g - alpha
        elif g < -alpha:
            t = g + alpha
        else:
            t = 0.0
    else:
        t = g
    return t * t / denom


cdef void _scan_grad(double[::1] values, double[::1] grad, double[::1] hess,
                     Py_ssize_t n, double lam, double alpha, int min_leaf,
                     double min_child_weight, SplitResult* out):
    cdef Py_ssize_t i, n_l, best_i = -1
    cdef double g_total = 0.0, h_total = 0.0
    cdef double g_l = 0.0, h_l = 0.0, g_r, h_r
    cdef double score_parent, gain
    cdef double best_gain = -INFINITY

    for i in range(n):
        g_total += grad[i]
        h_total += hess[i]
    score_parent = _grad_score(g_total, h_total, lam, alpha)

    for i in range(n - 1):
        g_l += grad[i]
        h_l += hess[i]
        n_l = i + 1
        if values[i + 1] <= values[i]:
            continue
        if n_l < min_leaf or n - n_l < min_leaf:
            continue
        g_r = g_total - g_l
        h_r = h_total - h_l
        if h_l < min_child_weight or h_r < min_child_weight:
            continue
        gain = 0.5 * (_grad_score(g_l, h_l, lam, alpha)
                      + _grad_score(g_r, h_r, lam, alpha) - score_parent)
        if gain > best_gain:
            best_gain = gain
            best_i = i

    if best_i < 0:
        out.gain = -INFINITY
        out.threshold = NAN
        out.n_left = 0
    else:
        out.gain = best_gain
        out.threshold = (values[best_i] + values[best_i + 1]) / 2.0
        out.n_left = best_i + 1


def scan_split_grad(double[::1] values, double[::1] grad, double[::1] hess,
                    double lam, double alpha, int min_leaf,
                    double min_child_weight):
    """Best second-order gain split over a sorted feature column."""
    cdef Py_ssize_t n = values.shape[0]
    if n < 2 * min_leaf:
        return -INFINITY, NAN, 0
    cdef SplitResult res
    _scan_grad(values, grad, hess, n, lam, alpha, min_leaf, min_child_weight, &res)
    if res.n_left == 0:
        return -INFINITY, NAN, 0
    return res.gain, res.threshold, res.n_left


def scan_split_grad_multi(double[:, ::1] X, double[::1] grad, double[::1] hess,
                          double lam, double alpha, int min_leaf,
                          double min_child_weight):
    """Best second-order gain split over every column of an unsorted matrix.

    Returns ``(column, gain, threshold, n_left)`` with lowest-column
    tie-breaking, or ``(-1, -inf, nan, 0)``.
    """
    cdef Py_ssize_t n = X.shape[0], m = X.shape[1]
    if n < 2 * min_leaf:
        return -1, -INFINITY, NAN, 0

    vals_arr = np.empty(n, dtype=np.float64)
    g_arr = np.empty(n, dtype=np.float64)
    h_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] vals = vals_arr
    cdef double[::1] g_s = g_arr
    cdef double[::1] h_s = h_arr
    cdef int64_t[::1] order
    cdef SplitResult res
    cdef Py_ssize_t f, i, best_f = -1, best_nl = 0
    cdef double best_gain = -INFINITY, best_thr = NAN

    X_nd = np.asarray(X)
    for f in range(m):
        order = np.argsort(X_nd[:, f], kind="stable").astype(np.int64, copy=False)
        for i in range(n):
            vals[i] = X[order[i], f]
            g_s[i] = grad[order[i]]
            h_s[i] = hess[order[i]]
        _scan_grad(vals, g_s, h_s, n, lam, alpha, min_leaf, min_child_weight, &res)
        if res.n_left > 0 and res.gain > best_gain:
            best_gain = res.gain
            best_thr = res.threshold
            best_nl = res.n_left
            best_f = f

    if best_f < 0:
        return -1, -INFINITY, NAN, 0
    return best_f, best_gain, best_thr, best_nl
