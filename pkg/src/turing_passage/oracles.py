"""Brute-force reference computations used to cross-check the fast paths.

Nothing here shares code with the routines it checks: index sets, cubic
expansions and integrals are recomputed from their definitions.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np
from scipy import integrate


def ansatz_indices(N: int) -> list:
    """(m, j) pairs of the order N + 1 ansatz, built from the definition."""
    out = []
    for m in range(-N, N + 1):
        a = abs(abs(m) - 1)
        top = N - a - (2 if abs(m) == 1 else 0)
        out.extend((m, j) for j in range(1, top + 1))
    return out


def _power(m, j):
    return abs(abs(m) - 1) + j


def cube_expansion(values: dict, N: int) -> dict:
    """Coefficients of (sum r^p A e^{imx})^3 keyed by (m, p).

    Expands the product of three copies of the truncated series term by
    term over all ordered triples.
    """
    idx = ansatz_indices(N)
    out = {}
    for a, b, c in itertools.product(idx, repeat=3):
        key = (a[0] + b[0] + c[0], _power(*a) + _power(*b) + _power(*c))
        out[key] = out.get(key, 0) + values[a] * values[b] * values[c]
    return out


def monomial_counts(m: int, power: int, N: int) -> Counter:
    """Multiset of factors -> number of ordered triples producing it."""
    idx = ansatz_indices(N)
    cnt = Counter()
    for a, b, c in itertools.product(idx, repeat=3):
        if a[0] + b[0] + c[0] == m and _power(*a) + _power(*b) + _power(*c) == power:
            cnt[tuple(sorted((a, b, c)))] += 1
    return cnt


def window_integral_quad(alpha: float, beta: float, gamma: float, t: float) -> float:
    val, _ = integrate.quad(lambda s: math.exp(-alpha * s) * (1.0 + beta * s) ** (-gamma),
                            0.0, t, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def upper_gamma_quad(a: float, z: float) -> float:
    val, _ = integrate.quad(lambda s: s ** (a - 1.0) * math.exp(-s), z, np.inf,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def fast_time_quad(r_of_t, t: float) -> float:
    """int_0^t r(s)^-2 ds"""
    val, _ = integrate.quad(lambda s: r_of_t(s) ** -2, 0.0, t, epsabs=0.0, epsrel=1e-12,
                            limit=200)
    return val


def linear_mode_ode(lam, source: complex, a0: complex, t_end: float) -> complex:
    """Solve a' = lam(t) a + source for a scalar complex amplitude."""
    def f(t, y):
        a = y[0] + 1j * y[1]
        d = lam(t) * a + source
        return [d.real, d.imag]
    sol = integrate.solve_ivp(f, (0.0, t_end), [a0.real, a0.imag], rtol=1e-11, atol=1e-14,
                              method="DOP853")
    return sol.y[0, -1] + 1j * sol.y[1, -1]
