"""Hot numeric kernels: tree-program evaluation, threshold search, Pareto
ranking, and Viterbi decoding.

Each kernel has two implementations with identical results: a numba-jitted
scalar-loop version (default) and a vectorized pure-numpy fallback. Set the
environment variable ``ACTISEQ_NO_NUMBA=1`` before import to force the numpy
path; it is also selected automatically when numba is not installed.
"""

import os

import numpy as np

# opcodes for the postfix tree programs
OP_NEG = 0
OP_ADD = 1
OP_SUB = 2
OP_MUL = 3
OP_AQ = 4
OP_VAR = 5
OP_CONST = 6


def _numba_disabled() -> bool:
    return os.environ.get("ACTISEQ_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def eval_program_numpy(ops, args, vals, stack_need, x, huge):
    """Run a postfix tree program over a (n, d) feature matrix.

    Binary-op results are clamped to [-huge, huge] so that overflowing
    intermediates stay finite; the analytic quotient a / sqrt(1 + b*b) has
    denominator >= 1 and never needs the clamp.
    """
    n = x.shape[0]
    stack = np.empty((stack_need, n))
    sp = 0
    with np.errstate(over="ignore"):
        for t in range(ops.shape[0]):
            op = ops[t]
            if op == OP_VAR:
                stack[sp] = x[:, args[t]]
                sp += 1
            elif op == OP_CONST:
                stack[sp] = vals[t]
                sp += 1
            elif op == OP_NEG:
                np.negative(stack[sp - 1], out=stack[sp - 1])
            elif op == OP_AQ:
                a = stack[sp - 2]
                b = stack[sp - 1]
                np.divide(a, np.sqrt(1.0 + b * b), out=a)
                sp -= 1
            else:
                a = stack[sp - 2]
                b = stack[sp - 1]
                if op == OP_ADD:
                    np.add(a, b, out=a)
                elif op == OP_SUB:
                    np.subtract(a, b, out=a)
                else:
                    np.multiply(a, b, out=a)
                np.clip(a, -huge, huge, out=a)
                sp -= 1
    return stack[0].copy()


def fit_threshold_numpy(y, labels):
    """Best decision threshold for the rule ``predict 1 iff y > t``.

    Scans every response value as a candidate threshold and returns
    (index of the argmin response, misclassification count), breaking error
    ties toward the smallest data index.
    """
    n = y.shape[0]
    order = np.argsort(y, kind="mergesort")
    ys = y[order]
    ls = labels[order]
    c1 = np.cumsum(ls)
    total1 = int(c1[-1])
    total0 = n - total1
    # threshold at value v classifies every response <= v as 0; group
    # duplicates so each candidate uses the last position of its value run
    last = np.searchsorted(ys, ys, side="right") - 1
    ones_below = c1[last]
    zeros_below = (last + 1) - ones_below
    mis_sorted = (total0 - zeros_below) + ones_below
    mis = np.empty(n, np.int64)
    mis[order] = mis_sorted
    best = int(np.argmin(mis))
    return best, int(mis[best])


def pareto_ranks_numpy(err, size):
    """Non-dominated sorting of (error, size) pairs, both minimized.

    Staircase sweep over points sorted by (error, size): the set of ranks
    whose frontier dominates a point is always a prefix, so the rank is
    found by binary search. O(n log n).
    """
    n = err.shape[0]
    order = np.lexsort((size, err))
    ranks = np.zeros(n, np.int64)
    min_size = np.empty(n)
    first_err = np.empty(n)
    n_ranks = 0
    for t in range(n):
        i = order[t]
        e = err[i]
        s = size[i]
        lo, hi = 0, n_ranks
        while lo < hi:
            mid = (lo + hi) // 2
            if min_size[mid] < s or (min_size[mid] == s and first_err[mid] < e):
                lo = mid + 1
            else:
                hi = mid
        ranks[i] = lo + 1
        if lo == n_ranks:
            min_size[lo] = s
            first_err[lo] = e
            n_ranks += 1
        elif s < min_size[lo]:
            min_size[lo] = s
            first_err[lo] = e
    return ranks


def viterbi_numpy(log_pi, log_a, log_b, obs):
    """Most probable state path for 0-based observation indices.

    Returns (path, delta, backpointer); all argmax ties resolve to the
    smallest state index.
    """
    n = obs.shape[0]
    k = log_pi.shape[0]
    delta = np.empty((n, k))
    back = np.zeros((n, k), np.int64)
    delta[0] = log_pi + log_b[:, obs[0]]
    for t in range(1, n):
        scores = delta[t - 1][:, None] + log_a
        best = np.argmax(scores, axis=0)
        delta[t] = scores[best, np.arange(k)] + log_b[:, obs[t]]
        back[t] = best
    path = np.empty(n, np.int64)
    path[n - 1] = int(np.argmax(delta[n - 1]))
    for t in range(n - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, delta, back


# ---------------------------------------------------------------------------
# numba implementations (scalar loops; same arithmetic, same results)
# ---------------------------------------------------------------------------

def _eval_program_loops(ops, args, vals, stack_need, x, huge):
    n = x.shape[0]
    stack = np.empty((stack_need, n))
    sp = 0
    for t in range(ops.shape[0]):
        op = ops[t]
        if op == OP_VAR:
            j = args[t]
            for i in range(n):
                stack[sp, i] = x[i, j]
            sp += 1
        elif op == OP_CONST:
            v = vals[t]
            for i in range(n):
                stack[sp, i] = v
            sp += 1
        elif op == OP_NEG:
            for i in range(n):
                stack[sp - 1, i] = -stack[sp - 1, i]
        elif op == OP_AQ:
            for i in range(n):
                b = stack[sp - 1, i]
                stack[sp - 2, i] = stack[sp - 2, i] / np.sqrt(1.0 + b * b)
            sp -= 1
        else:
            for i in range(n):
                a = stack[sp - 2, i]
                b = stack[sp - 1, i]
                if op == OP_ADD:
                    r = a + b
                elif op == OP_SUB:
                    r = a - b
                else:
                    r = a * b
                if r > huge:
                    r = huge
                elif r < -huge:
                    r = -huge
                stack[sp - 2, i] = r
            sp -= 1
    return stack[0].copy()


def _fit_threshold_loops(y, labels):
    n = y.shape[0]
    order = np.argsort(y, kind="mergesort")
    total1 = 0
    for i in range(n):
        total1 += labels[i]
    total0 = n - total1
    mis = np.empty(n, np.int64)
    ones_so_far = 0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and y[order[j + 1]] == y[order[i]]:
            j += 1
        cnt1 = ones_so_far
        for t in range(i, j + 1):
            cnt1 += labels[order[t]]
        cnt0 = (j + 1) - cnt1
        m = (total0 - cnt0) + cnt1
        for t in range(i, j + 1):
            mis[order[t]] = m
        ones_so_far = cnt1
        i = j + 1
    best = 0
    best_m = mis[0]
    for i in range(1, n):
        if mis[i] < best_m:
            best_m = mis[i]
            best = i
    return best, best_m


def _pareto_ranks_loops(err, size):
    n = err.shape[0]
    by_size = np.argsort(size, kind="mergesort")
    order = by_size[np.argsort(err[by_size], kind="mergesort")]
    ranks = np.zeros(n, np.int64)
    min_size = np.empty(n, np.int64)
    first_err = np.empty(n)
    n_ranks = 0
    for t in range(n):
        i = order[t]
        e = err[i]
        s = size[i]
        lo = 0
        hi = n_ranks
        while lo < hi:
            mid = (lo + hi) // 2
            if min_size[mid] < s or (min_size[mid] == s and first_err[mid] < e):
                lo = mid + 1
            else:
                hi = mid
        ranks[i] = lo + 1
        if lo == n_ranks:
            min_size[lo] = s
            first_err[lo] = e
            n_ranks += 1
        elif s < min_size[lo]:
            min_size[lo] = s
            first_err[lo] = e
    return ranks


def _viterbi_loops(log_pi, log_a, log_b, obs):
    n = obs.shape[0]
    k = log_pi.shape[0]
    delta = np.empty((n, k))
    back = np.zeros((n, k), np.int64)
    for i in range(k):
        delta[0, i] = log_pi[i] + log_b[i, obs[0]]
    for t in range(1, n):
        for j in range(k):
            bi = 0
            bv = delta[t - 1, 0] + log_a[0, j]
            for i in range(1, k):
                v = delta[t - 1, i] + log_a[i, j]
                if v > bv:
                    bv = v
                    bi = i
            delta[t, j] = bv + log_b[j, obs[t]]
            back[t, j] = bi
    zi = 0
    zv = delta[n - 1, 0]
    for i in range(1, k):
        if delta[n - 1, i] > zv:
            zv = delta[n - 1, i]
            zi = i
    path = np.empty(n, np.int64)
    path[n - 1] = zi
    for t in range(n - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, delta, back


HAVE_NUMBA = False
if not _numba_disabled():
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False

if HAVE_NUMBA:
    eval_program_numba = njit(cache=True)(_eval_program_loops)
    fit_threshold_numba = njit(cache=True)(_fit_threshold_loops)
    pareto_ranks_numba = njit(cache=True)(_pareto_ranks_loops)
    viterbi_numba = njit(cache=True)(_viterbi_loops)

    eval_program = eval_program_numba
    fit_threshold_counts = fit_threshold_numba
    pareto_ranks = pareto_ranks_numba
    viterbi_path = viterbi_numba
    BACKEND = "numba"
else:
    eval_program = eval_program_numpy
    fit_threshold_counts = fit_threshold_numpy
    pareto_ranks = pareto_ranks_numpy
    viterbi_path = viterbi_numpy
    BACKEND = "numpy"


def warmup():
    """Trigger jit compilation of every kernel on tiny inputs."""
    if BACKEND != "numba":
        return
    ops = np.array([OP_VAR, OP_CONST, OP_ADD], np.int64)
    args = np.array([0, -1, -1], np.int64)
    vals = np.array([0.0, 1.0, 0.0])
    x = np.zeros((2, 1))
    eval_program(ops, args, vals, 2, x, 1e300)
    fit_threshold_counts(np.array([0.0, 1.0]), np.array([0, 1], np.int64))
    pareto_ranks(np.array([0.1, 0.2]), np.array([3, 2], np.int64))
    viterbi_path(
        np.zeros(2), np.zeros((2, 2)), np.zeros((2, 2)), np.array([0, 1], np.int64)
    )
