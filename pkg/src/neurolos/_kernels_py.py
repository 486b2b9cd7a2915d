"""NumPy implementations of the split-scan kernels.

Selected by :mod:`neurolos.kernels` when the compiled extension is absent.
Both backends must agree on results: prefix statistics are accumulated
left-to-right (``cumsum``), per-position formulas are written in the same
operation order as the C loop, and ties resolve to the first maximum.
"""
import numpy as np

BACKEND_NAME = "python"

CRITERION_GINI = 0
CRITERION_ENTROPY = 1

_NO_SPLIT = (-np.inf, np.nan, 0)


def scan_split_classification(values, labels, n_classes, criterion, min_leaf):
    """Best impurity-decrease split over a sorted feature column.

    ``values`` must be sorted ascending with ``labels`` aligned.  A split
    position i sends rows [0..i] left; only positions where the adjacent
    values differ are candidates.  Returns ``(gain, threshold, n_left)``
    with gain = parent impurity minus size-weighted child impurity, or
    ``(-inf, nan, 0)`` when no candidate is valid.
    """
    n = values.shape[0]
    if n < 2 * min_leaf:
        return _NO_SPLIT

    onehot = labels[:, None] == np.arange(n_classes)[None, :]
    prefix = np.cumsum(onehot, axis=0).astype(np.float64)
    total = prefix[-1]

    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    left = prefix[:-1]
    right = total[None, :] - left

    if criterion == CRITERION_GINI:
        sum_left = np.zeros(n - 1)
        sum_right = np.zeros(n - 1)
        for c in range(n_classes):
            pl = left[:, c] / n_left
            pr = right[:, c] / n_right
            sum_left += pl * pl
            sum_right += pr * pr
        imp_left = 1.0 - sum_left
        imp_right = 1.0 - sum_right
        parent = _gini(total, float(n))
    elif criterion == CRITERION_ENTROPY:
        imp_left = np.zeros(n - 1)
        imp_right = np.zeros(n - 1)
        for c in range(n_classes):
            pl = left[:, c] / n_left
            pr = right[:, c] / n_right
            imp_left -= np.where(pl > 0.0, pl * np.log2(pl, where=pl > 0.0), 0.0)
            imp_right -= np.where(pr > 0.0, pr * np.log2(pr, where=pr > 0.0), 0.0)
        parent = _entropy(total, float(n))
    else:
        raise ValueError(f"unknown criterion code {criterion}")

    gains = parent - (n_left / n) * imp_left - (n_right / n) * imp_right

    valid = values[1:] > values[:-1]
    valid &= n_left >= min_leaf
    valid &= n_right >= min_leaf
    if not valid.any():
        return _NO_SPLIT

    gains = np.where(valid, gains, -np.inf)
    best = int(np.argmax(gains))
    threshold = (values[best] + values[best + 1]) / 2.0
    return float(gains[best]), float(threshold), best + 1


def scan_split_classification_multi(X, labels, n_classes, criterion, min_leaf):
    """Best impurity split over every column of an unsorted matrix.

    Each column is sorted with the same stable argsort the compiled backend
    uses, then scanned.  Returns ``(column, gain, threshold, n_left)`` with
    ties between columns resolving to the lowest index, or
    ``(-1, -inf, nan, 0)`` when no column splits.
    """
    n, m = X.shape
    if n < 2 * min_leaf:
        return (-1,) + _NO_SPLIT
    best = (-1,) + _NO_SPLIT
    for f in range(m):
        order = np.argsort(X[:, f], kind="stable")
        gain, threshold, n_left = scan_split_classification(
            np.ascontiguousarray(X[order, f]),
            np.ascontiguousarray(labels[order]),
            n_classes, criterion, min_leaf)
        if n_left > 0 and gain > best[1]:
            best = (f, gain, threshold, n_left)
    return best


def scan_split_grad_multi(X, grad, hess, lam, alpha, min_leaf, min_child_weight):
    """Best second-order gain split over every column of an unsorted matrix.

    Returns ``(column, gain, threshold, n_left)`` with lowest-column
    tie-breaking, or ``(-1, -inf, nan, 0)``.
    """
    n, m = X.shape
    if n < 2 * min_leaf:
        return (-1,) + _NO_SPLIT
    best = (-1,) + _NO_SPLIT
    for f in range(m):
        order = np.argsort(X[:, f], kind="stable")
        gain, threshold, n_left = scan_split_grad(
            np.ascontiguousarray(X[order, f]),
            np.ascontiguousarray(grad[order]),
            np.ascontiguousarray(hess[order]),
            lam, alpha, min_leaf, min_child_weight)
        if n_left > 0 and gain > best[1]:
            best = (f, gain, threshold, n_left)
    return best


def _gini(counts, n):
    s = 0.0
    for c in range(counts.shape[0]):
        p = counts[c] / n
        s += p * p
    return 1.0 - s


def _entropy(counts, n):
    s = 0.0
    for c in range(counts.shape[0]):
        p = counts[c] / n
        if p > 0.0:
            s -= p * np.log2(p)
    return s


def scan_split_grad(values, grad, hess, lam, alpha, min_leaf, min_child_weight):
    """Best second-order gain split over a sorted feature column.

    ``grad``/``hess`` are per-row first/second derivatives aligned with the
    sorted ``values``.  Gain is 0.5 * (score_L + score_R - score_parent)
    where score(G, H) = T(G)^2 / (H + lam) and T soft-thresholds G by
    ``alpha``.  Candidates need distinct adjacent values, ``min_leaf`` rows
    and ``min_child_weight`` hessian mass on both sides.  Returns
    ``(gain, threshold, n_left)`` or ``(-inf, nan, 0)``.
    """
    n = values.shape[0]
    if n < 2 * min_leaf:
        return _NO_SPLIT

    g_prefix = np.cumsum(grad)
    h_prefix = np.cumsum(hess)
    g_total = g_prefix[-1]
    h_total = h_prefix[-1]

    gl = g_prefix[:-1]
    hl = h_prefix[:-1]
    gr = g_total - gl
    hr = h_total - hl

    score_parent = _grad_score_scalar(float(g_total), float(h_total), lam, alpha)
    gains = 0.5 * (_grad_score(gl, hl, lam, alpha) + _grad_score(gr, hr, lam, alpha) - score_parent)

    n_left = np.arange(1, n)
    valid = values[1:] > values[:-1]
    valid &= n_left >= min_leaf
    valid &= (n - n_left) >= min_leaf
    valid &= hl >= min_child_weight
    valid &= hr >= min_child_weight
    if not valid.any():
        return _NO_SPLIT

    gains = np.where(valid, gains, -np.inf)
    best = int(np.argmax(gains))
    threshold = (values[best] + values[best + 1]) / 2.0
    return float(gains[best]), float(threshold), best + 1


def _grad_score(g, h, lam, alpha):
    denom = h + lam
    if alpha > 0.0:
        t = np.where(g > alpha, g - alpha, np.where(g < -alpha, g + alpha, 0.0))
    else:
        t = g
    return np.where(denom > 0.0, t * t / np.where(denom > 0.0, denom, 1.0), 0.0)


def _grad_score_scalar(g, h, lam, alpha):
    denom = h + lam
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
