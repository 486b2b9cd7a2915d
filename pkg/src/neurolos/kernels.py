"""Split-scan kernels with a compiled fast path.

The tree learners spend nearly all their time scanning sorted feature
columns for the best split, so that scan lives behind this module with two
interchangeable backends: a Cython extension (``neurolos._ckernels``) and a
NumPy fallback (``neurolos._kernels_py``).  The compiled backend is used
when importable; set ``NEUROLOS_KERNELS=python`` or ``cython`` to force a
choice (forcing ``cython`` raises if the extension was not built).

Both kernels take a feature column already sorted ascending together with
aligned per-row statistics and return ``(gain, threshold, n_left)`` where
rows ``[0, n_left)`` go left, or ``(-inf, nan, 0)`` when no admissible
split exists.
"""
import os

import numpy as np

from .errors import ValidationError

from . import _kernels_py

_FORCED = os.environ.get("NEUROLOS_KERNELS", "").strip().lower()

if _FORCED == "python":
    _backend = _kernels_py
elif _FORCED == "cython":
    from . import _ckernels as _backend
elif _FORCED == "":
    try:
        from . import _ckernels as _backend
    except ImportError:
        _backend = _kernels_py
else:
    raise ImportError(
        f"NEUROLOS_KERNELS must be 'python' or 'cython', got {_FORCED!r}"
    )

BACKEND = _backend.BACKEND_NAME

_CRITERIA = {"gini": _kernels_py.CRITERION_GINI, "entropy": _kernels_py.CRITERION_ENTROPY}


def best_split_classification(values, labels, n_classes, criterion="gini", min_leaf=1):
    """Scan a sorted column for the split with the largest impurity decrease.

    ``values`` must be sorted ascending and ``labels`` (integer classes in
    ``[0, n_classes)``) aligned with it.  Splits that would leave fewer
    than ``min_leaf`` rows on either side, or that fall between equal
    values, are not considered.
    """
    if criterion not in _CRITERIA:
        raise ValidationError(f"criterion must be one of {sorted(_CRITERIA)}, got {criterion!r}")
    if min_leaf < 1:
        raise ValidationError(f"min_leaf must be >= 1, got {min_leaf}")
    values = np.ascontiguousarray(values, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if values.shape != labels.shape or values.ndim != 1:
        raise ValidationError("values and labels must be 1-d arrays of equal length")
    return _backend.scan_split_classification(values, labels, int(n_classes),
                                              _CRITERIA[criterion], int(min_leaf))


def best_split_classification_multi(X, labels, n_classes, criterion="gini",
                                    min_leaf=1):
    """Scan every column of an unsorted matrix for the best impurity split.

    Columns need not be sorted; each is ordered internally.  Returns
    ``(column, gain, threshold, n_left)``; ties between columns resolve to
    the lowest column index, and ``column`` is ``-1`` when nothing splits.
    """
    if criterion not in _CRITERIA:
        raise ValidationError(f"criterion must be one of {sorted(_CRITERIA)}, got {criterion!r}")
    if min_leaf < 1:
        raise ValidationError(f"min_leaf must be >= 1, got {min_leaf}")
    X = np.ascontiguousarray(X, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if X.ndim != 2 or labels.ndim != 1 or X.shape[0] != labels.shape[0]:
        raise ValidationError("X must be (n, m) with labels of length n")
    if X.shape[1] < 1:
        raise ValidationError("X must have at least one column")
    return _backend.scan_split_classification_multi(X, labels, int(n_classes),
                                                    _CRITERIA[criterion],
                                                    int(min_leaf))


def best_split_grad_multi(X, grad, hess, lam=1.0, alpha=0.0, min_leaf=1,
                          min_child_weight=0.0):
    """Scan every column of an unsorted matrix for the best gain split.

    The gradient-statistics analogue of
    :func:`best_split_classification_multi`; same return convention.
    """
    if min_leaf < 1:
        raise ValidationError(f"min_leaf must be >= 1, got {min_leaf}")
    X = np.ascontiguousarray(X, dtype=np.float64)
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    hess = np.ascontiguousarray(hess, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != grad.shape[0] or grad.shape != hess.shape:
        raise ValidationError("X must be (n, m) with grad and hess of length n")
    if X.shape[1] < 1:
        raise ValidationError("X must have at least one column")
    return _backend.scan_split_grad_multi(X, grad, hess, float(lam), float(alpha),
                                          int(min_leaf), float(min_child_weight))


def best_split_grad(values, grad, hess, lam=1.0, alpha=0.0, min_leaf=1,
                    min_child_weight=0.0):
    """Scan a sorted column for the split maximizing the second-order gain.

    ``grad`` and ``hess`` hold per-row first and second derivatives of the
    loss, aligned with the ascending ``values``.  ``lam`` is the L2 leaf
    penalty, ``alpha`` the L1 soft threshold on the gradient sum; children
    must carry at least ``min_leaf`` rows and ``min_child_weight`` hessian
    mass.
    """
    if min_leaf < 1:
        raise ValidationError(f"min_leaf must be >= 1, got {min_leaf}")
    values = np.ascontiguousarray(values, dtype=np.float64)
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    hess = np.ascontiguousarray(hess, dtype=np.float64)
    if not (values.shape == grad.shape == hess.shape) or values.ndim != 1:
        raise ValidationError("values, grad and hess must be 1-d arrays of equal length")
    return _backend.scan_split_grad(values, grad, hess, float(lam), float(alpha),
                                    int(min_leaf), float(min_child_weight))
