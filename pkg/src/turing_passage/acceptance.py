"""Acceptance checks shared by the test suite and ``turing-passage verify``.

Each check returns a ``Check`` with a pass flag and a one-line summary of
what was measured.
"""
from __future__ import annotations

import itertools
import math
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import oracles
from .charts import (K1Flow, K2Flow, K3Flow, SectionSpec, full_passage, kappa12,
                     kappa12_inverse, kappa23, kappa23_inverse)
from .hierarchy import (ChartScalars, enumerate_cubic, evaluate_cubic, gl_graph_eval,
                        mode_indices, new_modset)
from .numerics import Grid1D, gamma_window_integral
from .sh import dispersion
from .validation import (delay_experiment, dynamic_error_experiment, exponential_rate,
                         mid_amplitude_check, residual_order_experiment,
                         static_error_experiment)

R_LIST = (0.4, 0.3, 0.2, 0.15, 0.1)
DELTAS = (0.2, 0.15, 0.1, 0.07)
EPS_LIST = (4e-3, 2e-3, 1e-3, 5e-4)
GAMMA_ALPHAS = (0.0, 0.5, 1.0, 2.0, 5.0)
GAMMA_BETAS = (-0.05, -0.01, 0.0, 0.01, 0.05)
GAMMA_GAMMAS = (-1.0, -0.5, 0.0, 0.5, 0.75)
GAMMA_TIMES = (0.1, 1.0, 3.0, 7.0, 12.0)


@dataclass
class Check:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} [{self.number:2d}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(number, name, fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return Check(number, name, bool(passed), detail, time.perf_counter() - t0)


# 1 ---------------------------------------------------------------------------

def _dispersion():
    grid = Grid1D(8, 256)
    k = grid.k
    lam = dispersion(k, 0.0)
    crit = np.abs(np.abs(k) - 1.0) == 0.0
    ok = crit.sum() == 2 and np.all(lam[crit] == 0.0) and np.all(lam[~crit] < 0.0)
    return ok, f"lambda(+-1,0) = {lam[crit].tolist()}, max off-critical {lam[~crit].max():.3g}"


def check_dispersion() -> Check:
    return _timed(1, "dispersion sanity", _dispersion)


# 2 ---------------------------------------------------------------------------

def _cubic_oracle_agrees(N: int, rng) -> tuple[bool, float]:
    idx = oracles.ansatz_indices(N)
    if sorted(idx) != list(mode_indices(N)):
        return False, math.inf
    vals = {i: complex(rng.normal(), rng.normal()) for i in idx}
    expansion = oracles.cube_expansion(vals, N)
    counts = {}
    for a, b, c in itertools.product(idx, repeat=3):
        key = (a[0] + b[0] + c[0], sum(abs(abs(f[0]) - 1) + f[1] for f in (a, b, c)))
        counts.setdefault(key, Counter())[tuple(sorted((a, b, c)))] += 1
    worst = 0.0
    ok = True
    arr = {i: np.array([v]) for i, v in vals.items()}
    for (m, j) in idx:
        terms = enumerate_cubic(m, j, N)
        p = abs(abs(m) - 1) + j + (2 if abs(m) == 1 else 0)
        got = {t.factors: t.multiplicity for t in terms}
        if got != dict(counts.get((m, p), {})):
            ok = False
        value = evaluate_cubic(terms, arr, (1,))[0]
        ref = expansion.get((m, p), 0.0)
        worst = max(worst, abs(value - ref) / max(1.0, abs(ref)))
    return ok and worst < 1e-12, worst


def _hierarchy():
    a, a2 = 0.7 - 0.2j, 0.3 + 0.4j
    f = {(1, 1): a, (-1, 1): np.conj(a), (1, 2): a2, (-1, 2): np.conj(a2)}
    f = {k: np.array([v]) for k, v in f.items()}
    a11 = evaluate_cubic(enumerate_cubic(1, 1, 4), f, (1,))[0]
    a12 = evaluate_cubic(enumerate_cubic(1, 2, 4), f, (1,))[0]
    ok11 = abs(a11 - 3 * a * abs(a) ** 2) < 1e-14
    ok12 = abs(a12 - (3 * a * a * np.conj(a2) + 6 * abs(a) ** 2 * a2)) < 1e-14
    grid = Grid1D(1, 8, fast=False)
    ms = new_modset(4, grid, {(1, 1): a})
    ev = gl_graph_eval(ms, ChartScalars(2, 0.3, 0.2, 1.0, 0.0))
    v = ev.values
    zeros = max(np.max(np.abs(v[i])) for i in [(0, 1), (2, 1), (-2, 1)])
    d31 = np.max(np.abs(v[(3, 1)] + a ** 3 / 64))
    dm31 = np.max(np.abs(v[(-3, 1)] + np.conj(a) ** 3 / 64))
    rng = np.random.default_rng(1)
    oracle = [_cubic_oracle_agrees(N, rng) for N in range(2, 7)]
    ok = ok11 and ok12 and zeros == 0.0 and d31 < 1e-15 and dm31 < 1e-15 and all(o[0] for o in oracle)
    worst = max(o[1] for o in oracle)
    return ok, (f"a11 {ok11}, a12 {ok12}, |A01|,|A21| max {zeros:.1e}, A31 err {d31:.1e}, "
                f"oracle N<=6 worst {worst:.1e}")


def check_hierarchy() -> Check:
    return _timed(2, "hierarchy golden values", _hierarchy)


# 3 ---------------------------------------------------------------------------

def _residual():
    fits = {n: residual_order_experiment(R_LIST, n) for n in (4, 5)}
    ok = all(abs(f.slope - n) <= 0.4 and f.residual < 0.15 for n, f in fits.items())
    return ok, ", ".join(f"n={n} slope {f.slope:.3f} fit residual {f.residual:.3f}"
                         for n, f in fits.items())


def check_residual_order() -> Check:
    return _timed(3, "residual order", _residual)


# 4 ---------------------------------------------------------------------------

def _static(workers=None):
    res = static_error_experiment(DELTAS, 4, workers=workers)
    ok = res.gl_fit.slope >= 1.3 and res.ansatz_fit.slope >= 1.6
    ok = ok and res.gl_fit.residual < 0.15 and res.ansatz_fit.residual < 0.15
    return ok, (f"GL slope {res.gl_fit.slope:.3f} (res {res.gl_fit.residual:.3f}), "
                f"n=4 slope {res.ansatz_fit.slope:.3f} (res {res.ansatz_fit.residual:.3f})")


def check_static(workers=None) -> Check:
    return _timed(4, "static validity", lambda: _static(workers))


# 5 ---------------------------------------------------------------------------

def _dynamic(workers=None):
    res = dynamic_error_experiment(EPS_LIST, 5, workers=workers)
    f = res.fit
    ok = abs(f.slope - 0.75) <= 0.3 and f.residual < 0.15
    return ok, f"n=5 slope {f.slope:.3f} (target 0.75 +- 0.3), fit residual {f.residual:.3f}"


def check_dynamic(workers=None) -> Check:
    return _timed(5, "dynamic validity", lambda: _dynamic(workers))


# 6 ---------------------------------------------------------------------------

def _mid(workers=None):
    rows = mid_amplitude_check(EPS_LIST, 0.002, workers=workers)
    small = sorted(rows, key=lambda r: r.eps)[:2]
    var = abs(small[0].ratio - small[1].ratio) / max(small[0].ratio, small[1].ratio)
    zero = mid_amplitude_check(EPS_LIST, 0.0, workers=workers)
    kappa, _ = exponential_rate(zero)
    x = np.array([1.0 / r.eps for r in zero])
    slope = np.polyfit(x, [r.log_ratio for r in zero], 1)[0]
    ok = var < 0.2 and slope < 0.0
    return ok, (f"ratio variation {var:.3%} (ratios {small[0].ratio:.4g}, {small[1].ratio:.4g}); "
                f"nu=0 log-ratio slope vs 1/eps {slope:.4f}, kappa {kappa:.4f}")


def check_mid_amplitude(workers=None) -> Check:
    return _timed(6, "mid-section rolls", lambda: _mid(workers))


# 7 ---------------------------------------------------------------------------

def _delay_linear():
    recs = delay_experiment([1e-3, 2e-3, 1e-2, 5e-2], rho_in=1.0, threshold=1e-3,
                            mode="linearized-log")
    worst = max(abs(r.v_exit - 1.0) for r in recs)
    return worst <= 1e-10, f"max |v_exit - rho_in| = {worst:.1e}"


def check_delay_linear() -> Check:
    return _timed(7, "delay, linearized oracle", _delay_linear)


# 8 ---------------------------------------------------------------------------

def _delay_full():
    rec = delay_experiment([2e-3], rho_in=1.0, mode="full")[0]
    ok = (not rec.censored and 0.5 < rec.kappa_minus < 1.1 and rec.v_exit >= 0.55)
    return ok, (f"kappa_minus {rec.kappa_minus:.4f}, kappa_plus {rec.kappa_plus:.4f}, "
                f"v_exit {rec.v_exit}")


def check_delay_full() -> Check:
    return _timed(8, "delay, full system", _delay_full)


# 9 ---------------------------------------------------------------------------

def _charts():
    sec = SectionSpec()
    eps = 1e-3
    e1 = eps / sec.rho_in ** 2
    f1 = K1Flow(e1, sec.zeta, math.sqrt(sec.rho_in))
    ts = np.linspace(0.0, f1.T, 7)
    c1 = f1.r1(ts) ** 4 * f1.eps1(ts)
    cons = float(np.max(np.abs(c1 / eps - 1.0)))
    r3s = eps ** 0.25 * sec.zeta ** -0.25
    f3 = K3Flow(r3s, sec.zeta, sec.rho_out)
    ts3 = np.linspace(0.0, f3.T, 7)
    c3 = f3.r3(ts3) ** 4 * f3.eps3(ts3)
    cons = max(cons, float(np.max(np.abs(c3 / c3[0] - 1.0))))

    grid = Grid1D(4, 16, fast=False)
    rng = np.random.default_rng(5)
    ms = new_modset(5, grid, {(1, 1): rng.normal(size=16) + 1j * rng.normal(size=16),
                              (1, 2): rng.normal(size=16) + 1j * rng.normal(size=16)}, chart=1)
    trip = 0.0
    for t in (0.0, 0.3 * f1.T, f1.T):
        s1 = f1.state(t)
        s2, m2 = kappa12(s1, ms)
        b1, bm = kappa12_inverse(s2, m2)
        trip = max(trip, max(abs(x / y - 1) for x, y in zip(b1.scalars, s1.scalars)))
        trip = max(trip, max(float(np.max(np.abs(bm.fields[i] - ms.fields[i])))
                             for i in ms.fields))
    flow2 = K2Flow(sec.zeta, sec.rho_mid, eps ** 0.25)
    for t in (0.6 * flow2.T, 0.8 * flow2.T, flow2.T):
        s2 = flow2.state(t)
        s3, m3 = kappa23(s2, ms)
        c2, cm = kappa23_inverse(s3, m3)
        trip = max(trip, max(abs(x / y - 1) for x, y in zip(c2.scalars, s2.scalars)))
        trip = max(trip, max(float(np.max(np.abs(cm.fields[i] - ms.fields[i])))
                             for i in ms.fields))

    # passage at a larger eps with a coarse chart step keeps the check fast
    eps = 1e-2
    grid1 = Grid1D(1, 32)
    env1 = Grid1D(1, 8, fast=False)
    rec = full_passage(new_modset(5, env1, {(1, 1): 0.2}, chart=1), eps, sec, grid1,
                       {1: 0.01}, stop_at="out", h=0.1, trace_every=1)
    g1 = K1Flow(eps / sec.rho_in ** 2, sec.zeta, math.sqrt(sec.rho_in))
    g2 = K2Flow(sec.zeta, sec.rho_mid, eps ** 0.25)
    g3 = K3Flow(eps ** 0.25 * sec.zeta ** -0.25, sec.zeta, sec.rho_out)
    t1 = oracles.fast_time_quad(g1.r1, g1.T)
    t2 = oracles.fast_time_quad(lambda s: g2.r2, g2.T)
    t3 = oracles.fast_time_quad(g3.r3, g3.T)
    quad_total = t1 + t2 + t3
    gt = abs(rec.total_time / quad_total - 1.0)
    bd = 0.0
    for state, t_glob in rec.trace:
        v, e = state.blow_down()
        bd = max(bd, abs(v - (-sec.rho_in + eps * t_glob)) / max(1.0, abs(v)), abs(e / eps - 1))
    ok = cons <= 1e-14 and trip <= 1e-12 and gt <= 1e-6 and bd <= 1e-6
    return ok, (f"conservation {cons:.1e}, round trips {trip:.1e}, "
                f"global time vs quadrature {gt:.1e}, blow-down {bd:.1e}")


def check_charts() -> Check:
    return _timed(9, "chart machinery", _charts)


# 10 --------------------------------------------------------------------------

def _gamma():
    worst = 0.0
    mono = True
    for a, b, g in itertools.product(GAMMA_ALPHAS, GAMMA_BETAS, GAMMA_GAMMAS):
        prev = 0.0
        for t in GAMMA_TIMES:
            val = gamma_window_integral(a, b, g, t)
            ref = oracles.window_integral_quad(a, b, g, t)
            worst = max(worst, abs(val - ref) / abs(ref))
            mono = mono and val > prev
            prev = val
    return worst <= 1e-9 and mono, f"worst relative error {worst:.2e}, increasing in t: {mono}"


def check_gamma() -> Check:
    return _timed(10, "special functions", _gamma)


ALL = (check_dispersion, check_hierarchy, check_residual_order, check_static, check_dynamic,
       check_mid_amplitude, check_delay_linear, check_delay_full, check_charts, check_gamma)
PARALLEL = {check_static, check_dynamic, check_mid_amplitude}


def run_all(workers=None, select=None, echo=print) -> list:
    out = []
    for fn in ALL:
        number = ALL.index(fn) + 1
        if select and number not in select:
            continue
        chk = fn(workers) if fn in PARALLEL else fn()
        if echo:
            echo(chk.line())
        out.append(chk)
    return out
