"""Numba inner loops for trajectory iteration."""

import numpy as np
from numba import njit

AFFINE = 0
REFLECTED_AFFINE = 1
REFLECTED_RW = 2
AFFINE_LOG = 3


@njit(cache=True, nogil=True)
def iterate_paths(family, x0, a, b, out):
    """Iterate every starting point through one common map sequence.

    x0: (n_pts,) current states; a, b: (n_steps,) map parameters;
    out: (n_pts, n_steps) receives the states after each step.
    x0 is updated in place to the terminal states (carry across chunks).

    AFFINE_LOG iterates a nonnegative affine system entirely in log space:
    x0/out hold log-states and a/b hold log-parameters, so the recursion
    log x' = logaddexp(log a + log x, log b) never overflows even when the
    linear state exceeds float range.
    """
    n_pts = x0.shape[0]
    n = a.shape[0]
    for i in range(n_pts):
        cur = x0[i]
        if family == AFFINE:
            for k in range(n):
                cur = a[k] * cur + b[k]
                out[i, k] = cur
        elif family == AFFINE_LOG:
            for k in range(n):
                u = a[k] + cur
                v = b[k]
                if u < v:
                    u, v = v, u
                if v == -np.inf:
                    cur = u
                else:
                    cur = u + np.log1p(np.exp(v - u))
                out[i, k] = cur
        elif family == REFLECTED_AFFINE:
            for k in range(n):
                cur = abs(a[k] * cur - b[k])
                out[i, k] = cur
        else:
            for k in range(n):
                cur = abs(cur - b[k])
                out[i, k] = cur
        x0[i] = cur
