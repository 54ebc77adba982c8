"""Certified quadrature helpers shared across the package.

All routines return a value together with an error estimate obtained by
comparing two resolutions (Richardson-style), so callers can assert the
tolerance they were promised instead of trusting a rule blindly.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_nodes(n):
    """Cached Gauss-Legendre nodes/weights on [-1, 1]."""
    if n not in _GL_CACHE:
        _GL_CACHE[n] = leggauss(n)
    return _GL_CACHE[n]


def gauss_panel(f, a, b, n=32):
    """Integrate f over [a, b] with an n-point Gauss-Legendre rule."""
    x, w = gauss_nodes(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * np.sum(w * f(mid + half * x))


def integrate_panels(f, edges, n=32):
    """Sum of Gauss panels over consecutive [edges[i], edges[i+1]]."""
    edges = np.asarray(edges, dtype=float)
    return sum(gauss_panel(f, a, b, n) for a, b in zip(edges[:-1], edges[1:]))


def integrate_certified(f, a, b, tol=1e-10, n=24, max_splits=14, breakpoints=()):
    """Adaptive panel integration of a smooth callable.

    Splits at the supplied breakpoints first, then bisects any panel whose
    n-point and 2n-point Gauss values disagree by more than its share of tol.
    Returns (value, error_estimate).
    """
    pts = [a, b] + [p for p in breakpoints if a < p < b]
    pts = sorted(set(pts))
    stack = list(zip(pts[:-1], pts[1:], [0] * (len(pts) - 1)))
    total, err = 0.0, 0.0
    while stack:
        lo, hi, depth = stack.pop()
        coarse = gauss_panel(f, lo, hi, n)
        fine = gauss_panel(f, lo, hi, 2 * n)
        local = abs(fine - coarse)
        if local <= tol * max(1.0, (hi - lo) / (b - a)) or depth >= max_splits:
            total += fine
            err += local
        else:
            mid = 0.5 * (lo + hi)
            stack.append((lo, mid, depth + 1))
            stack.append((mid, hi, depth + 1))
    return total, err


def integrate_power_kink(f, a, power, n=32):
    """Integrate f over [0, a] when f(z) ~ z**power * smooth near 0.

    Substitutes z = a*v**m with m chosen so the transformed integrand is
    smooth, restoring Gauss accuracy despite the algebraic kink at 0.
    """
    if a <= 0:
        return 0.0
    # z = a v^m, dz = a m v^{m-1} dv; z^p -> a^p v^{mp}: need m*p integer-ish.
    # power 1/12 -> m = 12 makes v^{m p} = v exactly.
    m = max(2, int(round(1.0 / power))) if 0 < power < 1 else 2

    def g(v):
        z = a * v**m
        return f(z) * a * m * v ** (m - 1)

    return gauss_panel(g, 0.0, 1.0, n)


def simpson_certified(dense, lo, hi, tol=1e-9, n0=64, max_doublings=12):
    """Composite Simpson with step-halving certificate.

    dense: vectorized callable on [lo, hi] (e.g. an ODE dense output).
    Returns (value, error_estimate); the estimate is |S_h - S_{h/2}|/15.
    """
    if hi <= lo:
        return 0.0, 0.0

    def simpson(n):
        x = np.linspace(lo, hi, n + 1)
        y = dense(x)
        h = (hi - lo) / n
        return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())

    n = n0
    prev = simpson(n)
    for _ in range(max_doublings):
        n *= 2
        cur = simpson(n)
        est = abs(cur - prev) / 15.0
        if est <= tol:
            return cur + (cur - prev) / 15.0, est
        prev = cur
    return cur, est


def cumulative_weights(n, dx):
    """Matrix C with (C @ f)[i] ~ integral of f from x_0 to x_i, O(dx^4).

    Integrates the local cubic through the four samples nearest each cell.
    """
    C = np.zeros((n, n))
    # Integral over cell [j, j+1] of the cubic through samples j-1..j+2
    # (shifted at the ends): weights from exact monomial integration.
    inner = np.array([-1.0, 13.0, 13.0, -1.0]) / 24.0
    first = np.array([9.0, 19.0, -5.0, 1.0]) / 24.0  # cell [0,1] from samples 0..3
    cell = np.zeros((n - 1, n))
    for j in range(n - 1):
        if j == 0:
            cell[j, 0:4] = first
        elif j == n - 2:
            cell[j, n - 4 : n] = first[::-1]
        else:
            cell[j, j - 1 : j + 3] = inner
    np.cumsum(cell, axis=0, out=cell)
    C[1:] = cell * dx
    return C
