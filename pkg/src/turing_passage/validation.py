"""Experiments comparing the SH solver with the envelope approximation.

Every experiment returns plain records plus a log-log ``ScalingFit``.  Runs
for different parameter values are independent and can be spread over worker
processes; results are always merged in sorted parameter order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .charts import K2Flow, SectionSpec, StaticFlow, f21, f22, full_passage
from .hierarchy import assemble_psi, new_modset, solve_modulation
from .numerics import ConfigurationError, DomainError, Grid1D, SpectralField, hul_norm
from .sh import SHParams, initial_state, integrate, random_band, residual_of, roll


def weighted_error(u: SpectralField, psi: SpectralField, r: float, beta: float,
                   theta: int = 1) -> float:
    if r <= 0:
        raise DomainError("r must be positive")
    return hul_norm(u - psi, theta) / r ** beta


@dataclass
class ScalingFit:
    abscissa: np.ndarray
    ordinate: np.ndarray
    slope: float
    intercept: float
    residual: float  # rms misfit of the log-log line

    def predict(self, x):
        return np.exp(self.intercept) * np.asarray(x) ** self.slope


def fit_scaling(x: Sequence[float], y: Sequence[float]) -> ScalingFit:
    """Ordinary least squares of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ConfigurationError("abscissa and ordinate lengths differ")
    if len(x) < 4:
        raise ConfigurationError("a scaling fit needs at least 4 points")
    if len(np.unique(x)) != len(x):
        raise ConfigurationError("duplicate abscissa values in scaling fit")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("scaling fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, icpt = np.polyfit(lx, ly, 1)
    rms = float(np.sqrt(np.mean((ly - (slope * lx + icpt)) ** 2)))
    return ScalingFit(x, y, float(slope), float(icpt), rms)


def _check_distinct(values, name):
    if len(set(values)) != len(values):
        raise ConfigurationError(f"duplicate {name} values")


def _fan_out(fn: Callable, items: Sequence, workers: int | None) -> list:
    items = sorted(items)
    if not workers or workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _fast_points(periods: int) -> int:
    return 1 << int(math.ceil(math.log2(8 * periods)))


# ---------------------------------------------------------------------------
# residual order

@dataclass(frozen=True)
class ResidualConfig:
    cells: float = 6.0          # r * periods, fixes the slow domain length
    fast_points: int = 4096
    envelope_points: int = 64
    v2_start: float = 0.5
    horizon: float = 0.1
    tau: float = 0.002
    nu1: complex = 0.3
    theta: int = 1


def _envelope(x2):
    return 0.6 + 0.3 * np.cos(x2 / 3.0) + 0.2j * np.sin(x2 / 2.0)


def residual_norm(r: float, n: int, cfg: ResidualConfig = ResidualConfig(),
                  manifold: bool = True) -> float:
    """Residual of r*psi_n in chart 2 at the end of a short envelope run.

    With ``manifold=False`` only the leading critical envelope is assembled.
    """
    P = int(round(cfg.cells / r))
    env = Grid1D(P, cfg.envelope_points, fast=False)
    fast = Grid1D(P, cfg.fast_points)
    ms = new_modset(n, env, {(1, 1): _envelope(r * env.x)}, chart=2)
    flow = K2Flow(0.1, 1.0, r, v2_start=cfg.v2_start)
    T, tau = cfg.horizon, cfg.tau
    nu = {1: cfg.nu1}
    traj = solve_modulation(ms, flow, T, tau, nu, record_times=[T - 2 * tau, T - tau])
    snaps = []
    for t, m in traj[-3:]:
        if not manifold:
            m = new_modset(n, env, {(1, 1): m.fields[(1, 1)]}, chart=2)
        snaps.append((flow.global_time(t), assemble_psi(m, r, fast)))
    params = SHParams(eps=r ** 4, grid=fast, nu=nu)
    v_of_t = lambda t: r * r * cfg.v2_start + r ** 4 * t
    return residual_of(snaps, params, v_of_t, cfg.theta)[0][1]


def residual_order_experiment(r_list: Sequence[float], n: int,
                              cfg: ResidualConfig = ResidualConfig(),
                              manifold: bool = True) -> ScalingFit:
    _check_distinct(list(r_list), "r")
    res = [residual_norm(r, n, cfg, manifold) for r in r_list]
    return fit_scaling(r_list, res)


# ---------------------------------------------------------------------------
# static validity

@dataclass(frozen=True)
class StaticConfig:
    cells: float = 21.0
    envelope_points: int = 64
    horizon: float = 1.0        # in slow time, i.e. T0 / delta^2 fast time
    samples: int = 10
    h: float = 0.05
    tau: float = 0.005
    theta: int = 1


@dataclass
class StaticResult:
    deltas: list
    gl_errors: list
    ansatz_errors: list
    gl_fit: ScalingFit
    ansatz_fit: ScalingFit


def _static_envelope(X, cells):
    return 0.5 + 0.25 * np.cos(6 * X / cells) + 0.15j * np.sin(10 * X / cells)


def _static_run(args):
    delta, n, cfg = args
    P = int(round(cfg.cells / delta))
    fast = Grid1D(P, _fast_points(P))
    env = Grid1D(P, cfg.envelope_points, fast=False)
    ms = new_modset(n, env, {(1, 1): _static_envelope(delta * env.x, cfg.cells)}, chart=3)
    flow = StaticFlow(delta)
    times = list(np.linspace(0.0, cfg.horizon, cfg.samples + 1))
    traj = solve_modulation(ms, flow, cfg.horizon, cfg.tau, {}, record_times=times)
    full = [assemble_psi(m, delta, fast) for _, m in traj]
    leading = [assemble_psi(new_modset(n, env, {(1, 1): m.fields[(1, 1)]}, chart=3), delta, fast)
               for _, m in traj]
    fast_times = [flow.global_time(t) for t, _ in traj]
    params = SHParams(eps=0.0, grid=fast)
    errs = []
    for approx in (leading, full):
        st = initial_state(approx[0], delta ** 2, 0.0)
        worst = 0.0
        for k in range(1, len(fast_times)):
            st = integrate(st, params, fast_times[k], cfg.h).states[-1]
            worst = max(worst, hul_norm(st.physical_field() - approx[k], cfg.theta))
        errs.append(worst)
    return delta, errs[0], errs[1]


def static_error_experiment(delta_list: Sequence[float], n: int = 4,
                            cfg: StaticConfig = StaticConfig(),
                            workers: int | None = None) -> StaticResult:
    """Sup-in-time errors of the GL and order-n approximations at eps = 0.

    v = delta^2 is frozen.  The SH run starts from each approximation at
    slow time 0 and is compared over slow times [0, horizon].
    """
    _check_distinct(list(delta_list), "delta")
    if len(delta_list) < 4:
        raise ConfigurationError("a scaling fit needs at least 4 points")
    rows = _fan_out(_static_run, [(d, n, cfg) for d in delta_list], workers)
    ds = [r[0] for r in rows]
    gl = [r[1] for r in rows]
    an = [r[2] for r in rows]
    return StaticResult(ds, gl, an, fit_scaling(ds, gl), fit_scaling(ds, an))


# ---------------------------------------------------------------------------
# dynamic validity

@dataclass(frozen=True)
class DynamicConfig:
    sections: SectionSpec = SectionSpec()
    fast_points: int = 32
    envelope_points: int = 8
    amplitude: complex = 0.3    # chart 1 envelope at the entry section
    nu1: complex = 0.002
    perturbation: float = 0.0
    h: float = 0.02
    chart_h: float = 0.01
    theta: int = 1
    convention: str = "consistent"


@dataclass
class DynamicRow:
    eps: float
    n: int
    seed: int
    t_mid: float
    error: float
    norm_u: float
    norm_psi: float


def _dynamic_run(args):
    eps, n, seed, cfg = args
    fast = Grid1D(1, cfg.fast_points)
    env = Grid1D(1, cfg.envelope_points, fast=False)
    nu = {1: cfg.nu1}
    ms = new_modset(n, env, {(1, 1): cfg.amplitude}, chart=1)
    rec = full_passage(ms, eps, cfg.sections, fast, nu, stop_at="mid", h=cfg.chart_h,
                       theta=cfg.theta, convention=cfg.convention)
    u0 = rec.fields["in"]
    if cfg.perturbation > 0:
        u0 = u0 + random_band(fast, cfg.perturbation, seed)
    params = SHParams(eps=eps, grid=fast, nu=nu)
    tr = integrate(initial_state(u0, -cfg.sections.rho_in, eps), params, rec.total_time, cfg.h)
    u = tr.states[-1].physical_field()
    psi = rec.fields["mid"]
    return DynamicRow(eps, n, seed, rec.total_time, hul_norm(u - psi, cfg.theta),
                      hul_norm(u, cfg.theta), hul_norm(psi, cfg.theta))


@dataclass
class DynamicResult:
    rows: list
    fit: ScalingFit


def dynamic_error_experiment(eps_list: Sequence[float], n: int = 5,
                             seeds: Sequence[int] = (0,),
                             cfg: DynamicConfig = DynamicConfig(),
                             workers: int | None = None) -> DynamicResult:
    """Error between SH and the passage approximation at the mid section.

    The SH run starts at v = -rho_in from the assembled entry approximation,
    optionally perturbed by a seeded random field.  Errors are averaged over
    seeds before fitting against eps.
    """
    _check_distinct(list(eps_list), "eps")
    for eps in eps_list:
        if eps / cfg.sections.rho_in ** 2 > cfg.sections.zeta:
            raise DomainError("eps too large for the entry section")
    jobs = [(e, n, s, cfg) for e in eps_list for s in seeds]
    rows = _fan_out(_dynamic_run, jobs, workers)
    by_eps = {}
    for row in rows:
        by_eps.setdefault(row.eps, []).append(row.error)
    xs = sorted(by_eps)
    fit = fit_scaling(xs, [float(np.mean(by_eps[e])) for e in xs])
    return DynamicResult(rows, fit)


# ---------------------------------------------------------------------------
# mid-section amplitude

@dataclass
class MidRow:
    eps: float
    mode1: float
    log_mode1: float
    ratio: float          # mode1 / sqrt(eps)
    log_ratio: float
    predicted_ratio: float


@dataclass(frozen=True)
class MidConfig:
    sections: SectionSpec = SectionSpec()
    fast_points: int = 32
    amplitude: float = 1e-3     # initial roll amplitude at v = -rho_in
    nu2: complex = 0.0
    h: float = 0.02
    convention: str = "consistent"


def predicted_mid_ratio(nu1: complex, sections: SectionSpec, eps: float,
                        convention: str = "consistent") -> float:
    """Linear estimate of |mode 1| / sqrt(eps) at the mid section."""
    if nu1 == 0:
        return 0.0
    z = sections.zeta
    c21 = f21(eps / sections.rho_in ** 2, z, convention).exact
    c22 = f22(sections.rho_mid, z).statement
    return abs(nu1) * (c22 + z ** -0.5 * c21)


def _mid_run(args):
    eps, nu1, cfg = args
    fast = Grid1D(1, cfg.fast_points)
    nu = {1: nu1} if nu1 != 0 else {}
    if cfg.nu2 != 0:
        nu[2] = cfg.nu2
    params = SHParams(eps=eps, grid=fast, nu=nu)
    sec = cfg.sections
    t_mid = sec.t_mid(eps)
    tr = integrate(initial_state(roll(fast, cfg.amplitude), -sec.rho_in, eps), params, t_mid,
                   cfg.h, track_log=True)
    st = tr.states[-1]
    c = abs(st.u.coefficient(1.0))
    log_m1 = math.log(c) + st.log_scale if c > 0 else -math.inf
    m1 = math.exp(log_m1) if log_m1 > -700 else 0.0
    half_log = 0.5 * math.log(eps)
    return MidRow(eps, m1, log_m1, m1 / math.sqrt(eps), log_m1 - half_log,
                  predicted_mid_ratio(nu1, sec, eps, cfg.convention))


def mid_amplitude_check(eps_list: Sequence[float], nu1: complex,
                        cfg: MidConfig = MidConfig(), workers: int | None = None) -> list:
    _check_distinct(list(eps_list), "eps")
    return _fan_out(_mid_run, [(e, nu1, cfg) for e in eps_list], workers)


def exponential_rate(rows: Sequence[MidRow], rho_in: float = 1.0) -> tuple[float, float]:
    """Fit log(mode1) = c - kappa * rho_in^2 / (2 eps); returns (kappa, c)."""
    x = np.array([1.0 / r.eps for r in rows])
    y = np.array([r.log_mode1 for r in rows])
    slope, c = np.polyfit(x, y, 1)
    return float(-2.0 * slope / rho_in ** 2), float(c)


# ---------------------------------------------------------------------------
# delayed loss of stability

@dataclass
class DelayRecord:
    eps: float
    rho_in: float
    threshold: float
    v_exit: float | None
    censored: bool
    trace_v: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    trace_log: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    kappa_minus: float = math.nan
    kappa_plus: float = math.nan


@dataclass(frozen=True)
class DelayConfig:
    amplitude: float = 1e-3
    threshold_factor: float = 10.0
    wavenumber: float = 1.0
    fast_points: int = 32
    h: float = 0.05
    theta: int = 1
    trace_points: int = 401


def linear_log_amplitude(v, k: float, v0: float, eps: float, a0: float):
    """log|mode k| of the linearized equation after drifting from v0 to v."""
    c = (1.0 - k * k) ** 2
    v = np.asarray(v, dtype=float)
    return math.log(a0) + (0.5 * (v * v - v0 * v0) - c * (v - v0)) / eps


def _delay_linear(eps, rho_in, threshold, cfg):
    a0 = cfg.amplitude
    v0 = -rho_in
    k = cfg.wavenumber
    vs = np.linspace(v0, 2 * rho_in, cfg.trace_points)
    trace = linear_log_amplitude(vs, k, v0, eps, a0)
    if threshold < a0:
        return DelayRecord(eps, rho_in, threshold, v0, False, vs, trace)
    c = (1.0 - k * k) ** 2
    # 0.5 (v^2 - v0^2) - c (v - v0) = eps * log(threshold / a0), larger root
    v_exit = c + math.sqrt((v0 - c) ** 2 + 2.0 * eps * math.log(threshold / a0))
    if v_exit > 2 * rho_in:
        return DelayRecord(eps, rho_in, threshold, None, True, vs, trace)
    return DelayRecord(eps, rho_in, threshold, v_exit, False, vs, trace)


def _delay_full(args):
    eps, rho_in, threshold, cfg = args
    if eps < rho_in ** 2 / 600.0:
        raise DomainError("eps too small: the trough would underflow (need eps >= rho_in^2/600)")
    fast = Grid1D(1, cfg.fast_points)
    params = SHParams(eps=eps, grid=fast)
    u0 = roll(fast, cfg.amplitude)
    n0 = hul_norm(u0, cfg.theta)
    thr = cfg.threshold_factor * n0 if threshold is None else threshold
    v0 = -rho_in
    if thr < n0:
        return DelayRecord(eps, rho_in, thr, v0, False)
    t_end = 3.0 * rho_in / eps
    tr = integrate(initial_state(u0, v0, eps), params, t_end, cfg.h, record_every=1,
                   theta=cfg.theta, track_log=True)
    v = np.array([o["v"] for o in tr.observables])
    lg = np.array([o["log_hul_norm"] for o in tr.observables])
    above = np.nonzero((v > 0) & (lg >= math.log(thr)))[0]
    rec = DelayRecord(eps, rho_in, thr, None, True, v, lg)
    decay = v <= 0
    s_minus = (v[decay] ** 2 - rho_in ** 2) / (2 * eps)
    rec.kappa_minus = float(np.polyfit(s_minus, lg[decay], 1)[0])
    if above.size:
        i = int(above[0])
        # linear interpolation of the crossing between samples i-1 and i
        f = (math.log(thr) - lg[i - 1]) / (lg[i] - lg[i - 1])
        rec.v_exit = float(v[i - 1] + f * (v[i] - v[i - 1]))
        rec.censored = False
        grow = (v > 0) & (v < rec.v_exit)
        if np.count_nonzero(grow) >= 3:
            rec.kappa_plus = float(np.polyfit(v[grow] ** 2 / (2 * eps), lg[grow], 1)[0])
    return rec


def delay_experiment(eps_list: Sequence[float], rho_in: float = 1.0,
                     threshold: float | None = None, mode: str = "full",
                     cfg: DelayConfig = DelayConfig(), workers: int | None = None) -> list:
    """Parameter value at which the solution leaves the trough, per eps.

    ``threshold`` defaults to ``threshold_factor`` times the initial norm
    (full mode) or initial amplitude (linearized-log mode).  Runs that do not
    cross before v = 2 rho_in are censored.
    """
    if rho_in <= 0:
        raise DomainError("rho_in must be positive")
    _check_distinct(list(eps_list), "eps")
    if mode == "linearized-log":
        thr = cfg.threshold_factor * cfg.amplitude if threshold is None else threshold
        return [_delay_linear(e, rho_in, thr, cfg) for e in sorted(eps_list)]
    if mode != "full":
        raise ConfigurationError("mode must be 'full' or 'linearized-log'")
    return _fan_out(_delay_full, [(e, rho_in, threshold, cfg) for e in eps_list], workers)
