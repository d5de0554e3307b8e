"""Independent reference computations used by the tests."""

import math

import numpy as np

EPS = np.finfo(float).eps


def adaptive_simpson(f, a, b, tol=1e-13, depth=40):
    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        diff = left + right - whole
        # the second test stops refinement once the difference is pure rounding
        if depth <= 0 or abs(diff) <= 15.0 * tol or abs(diff) <= 64 * EPS * (abs(left) + abs(right)):
            return left + right + diff / 15.0
        return rec(a, m, fa, flm, fm, left, tol / 2, depth - 1) + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1)

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)


def kernel_entry_integral(kernel, i, j, tol=1e-13):
    total = 0.0
    for p in kernel.pieces:
        def f(t, p=p):
            return sum(term.coeff[i, j] * math.exp(term.alpha * t) * t**term.power for term in p.terms)
        total += adaptive_simpson(f, p.a, p.b, tol)
    return total


def static_gain(A, E, C, F):
    """C (-A)^-1 E + F with numpy's dense solver."""
    return C @ np.linalg.solve(-A, E) + F


def pnorm(M, p):
    M = np.atleast_2d(M)
    if p == 1:
        return float(np.abs(M).sum(axis=0).max())
    if p == 2:
        return float(np.linalg.norm(M, 2))
    return float(np.abs(M).sum(axis=1).max())
