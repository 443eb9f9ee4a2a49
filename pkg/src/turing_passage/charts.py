"""Base flows in the three blow-up charts, chart changes, explicit constants
and the composed passage from the entry section to the mid or exit section.

Charts (v, eps) in terms of local variables:

    chart 1:  v = -r1^2,       eps = r1^4 eps1      (approach, v < 0)
    chart 2:  v = r2^2 v2,     eps = r2^4           (scaling regime)
    chart 3:  v = r3^2,        eps = r3^4 eps3      (departure, v > 0)

Fast time relates to chart time through dt = r^-2 dt_l.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .hierarchy import (ChartFlow, ChartScalars, ModulationSet, assemble_psi,
                        fill_graph, scale_envelopes, solve_modulation)
from .numerics import (DomainError, Grid1D, SpectralField, erf, hul_norm,
                       upper_gamma_scaled)


@dataclass(frozen=True)
class SectionSpec:
    rho_in: float = 1.0
    rho_mid: float | None = None
    rho_out: float = 0.5
    zeta: float = 0.1
    K: float = 0.1

    def __post_init__(self):
        for name in ("rho_in", "rho_out", "zeta", "K"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.rho_mid is None:
            object.__setattr__(self, "rho_mid", self.zeta ** -0.5)
        elif self.rho_mid <= 0:
            raise DomainError("rho_mid must be positive")

    def t_mid(self, eps: float) -> float:
        return (self.rho_in + math.sqrt(eps) * self.rho_mid) / eps

    def t_out(self, eps: float) -> float:
        return (self.rho_in + self.rho_out) / eps

    def delay_margin(self) -> float:
        """omega in rho_out / rho_in <= 1 - omega."""
        return 1.0 - self.rho_out / self.rho_in


@dataclass(frozen=True)
class ChartState:
    chart: int
    scalars: tuple
    t_local: float = 0.0

    def blow_down(self) -> tuple[float, float]:
        return blow_down(self.chart, self.scalars)

    @property
    def r(self) -> float:
        if self.chart == 1:
            return self.scalars[0]
        if self.chart == 2:
            return self.scalars[1]
        return self.scalars[0]


def blow_down(chart: int, scalars: tuple) -> tuple[float, float]:
    """(v, eps) from chart variables: (r1, eps1) | (v2, r2) | (r3, eps3)."""
    if chart == 1:
        r1, eps1 = scalars
        return -r1 ** 2, r1 ** 4 * eps1
    if chart == 2:
        v2, r2 = scalars
        return r2 ** 2 * v2, r2 ** 4
    if chart == 3:
        r3, eps3 = scalars
        return r3 ** 2, r3 ** 4 * eps3
    raise DomainError(f"unknown chart {chart}")


# ---------------------------------------------------------------------------
# base flows

class K1Flow(ChartFlow):
    chart = 1

    def __init__(self, eps1_star: float, zeta: float, r1_star: float):
        if not 0.0 < eps1_star <= zeta:
            raise DomainError("chart 1 needs 0 < eps1_star <= zeta")
        self.eps1_star = eps1_star
        self.zeta = zeta
        self.r1_star = r1_star
        self.T = (1.0 - eps1_star / zeta) / (2.0 * eps1_star)

    def r1(self, t):
        return self.r1_star * (1.0 - 2.0 * self.eps1_star * np.asarray(t)) ** 0.25

    def eps1(self, t):
        return self.eps1_star / (1.0 - 2.0 * self.eps1_star * np.asarray(t))

    def scalars(self, t: float) -> ChartScalars:
        e1 = float(self.eps1(t))
        return ChartScalars(1, float(self.r1(t)), -1.0, e1, -0.5 * e1)

    def state(self, t: float) -> ChartState:
        return ChartState(1, (float(self.r1(t)), float(self.eps1(t))), t)

    def global_time(self, t: float) -> float:
        """Fast time elapsed after chart time t (closed-form integral of r1^-2)."""
        s = self.eps1_star
        return (1.0 - math.sqrt(1.0 - 2.0 * s * t)) / (s * self.r1_star ** 2)


class K2Flow(ChartFlow):
    chart = 2

    def __init__(self, zeta: float, rho_mid: float, r2: float, v2_start: float | None = None):
        if zeta <= 0:
            raise DomainError("zeta must be positive")
        self.zeta = zeta
        self.rho_mid = rho_mid
        self.r2 = r2
        self.v2_start = -zeta ** -0.5 if v2_start is None else v2_start
        self.T = rho_mid - self.v2_start

    def v2(self, t):
        return self.v2_start + np.asarray(t)

    def scalars(self, t: float) -> ChartScalars:
        return ChartScalars(2, self.r2, float(self.v2(t)), 1.0, 0.0)

    def state(self, t: float) -> ChartState:
        return ChartState(2, (float(self.v2(t)), self.r2), t)

    def global_time(self, t: float) -> float:
        return t / self.r2 ** 2


class K3Flow(ChartFlow):
    chart = 3

    def __init__(self, r3_star: float, zeta: float, rho_out: float):
        if r3_star ** 4 > rho_out ** 2:
            raise DomainError("chart 3 needs r3_star^4 <= rho_out^2")
        self.r3_star = r3_star
        self.zeta = zeta
        self.rho_out = rho_out
        self.T = (rho_out ** 2 - r3_star ** 4) / (2.0 * zeta * r3_star ** 4)

    def r3(self, t):
        return self.r3_star * (1.0 + 2.0 * self.zeta * np.asarray(t)) ** 0.25

    def eps3(self, t):
        return self.zeta / (1.0 + 2.0 * self.zeta * np.asarray(t))

    def scalars(self, t: float) -> ChartScalars:
        e3 = float(self.eps3(t))
        return ChartScalars(3, float(self.r3(t)), 1.0, e3, 0.5 * e3)

    def state(self, t: float) -> ChartState:
        return ChartState(3, (float(self.r3(t)), float(self.eps3(t))), t)

    def global_time(self, t: float) -> float:
        z = self.zeta
        return (math.sqrt(1.0 + 2.0 * z * t) - 1.0) / (z * self.r3_star ** 2)


class StaticFlow(ChartFlow):
    """Chart 3 restricted to eps3 = 0: frozen v = r^2, no drift."""

    chart = 3

    def __init__(self, r: float):
        self.r = r
        self.T = math.inf

    def scalars(self, t: float) -> ChartScalars:
        return ChartScalars(3, self.r, 1.0, 0.0, 0.0)

    def global_time(self, t: float) -> float:
        return t / self.r ** 2


def k1_flow(eps1_star: float, zeta: float, r1_star: float) -> K1Flow:
    return K1Flow(eps1_star, zeta, r1_star)


def k2_flow(zeta: float, rho_mid: float, r2: float = 1.0) -> K2Flow:
    return K2Flow(zeta, rho_mid, r2)


def k3_flow(r3_star: float, zeta: float, rho_out: float) -> K3Flow:
    return K3Flow(r3_star, zeta, rho_out)


# ---------------------------------------------------------------------------
# chart changes

def kappa12(state: ChartState, modset: ModulationSet | None = None):
    if state.chart != 1:
        raise DomainError("kappa12 maps from chart 1")
    r1, eps1 = state.scalars
    if eps1 <= 0:
        raise DomainError("kappa12 needs eps1 > 0")
    v2 = -eps1 ** -0.5
    r2 = r1 * eps1 ** 0.25
    new_state = ChartState(2, (v2, r2), 0.0)
    if modset is None:
        return new_state, None
    return new_state, scale_envelopes(modset, lambda e: eps1 ** (-e / 4.0), 2)


def kappa12_inverse(state: ChartState, modset: ModulationSet | None = None):
    if state.chart != 2:
        raise DomainError("inverse of kappa12 maps from chart 2")
    v2, r2 = state.scalars
    if v2 >= 0:
        raise DomainError("inverse of kappa12 needs v2 < 0")
    r1 = (-v2) ** 0.5 * r2
    eps1 = v2 ** -2
    new_state = ChartState(1, (r1, eps1), 0.0)
    if modset is None:
        return new_state, None
    return new_state, scale_envelopes(modset, lambda e: (-v2) ** (-e / 2.0), 1)


def kappa23(state: ChartState, modset: ModulationSet | None = None):
    if state.chart != 2:
        raise DomainError("kappa23 maps from chart 2")
    v2, r2 = state.scalars
    if v2 <= 0:
        raise DomainError("kappa23 needs v2 > 0")
    eps3 = v2 ** -2
    r3 = r2 * v2 ** 0.5
    new_state = ChartState(3, (r3, eps3), 0.0)
    if modset is None:
        return new_state, None
    return new_state, scale_envelopes(modset, lambda e: eps3 ** (e / 4.0), 3)


def kappa23_inverse(state: ChartState, modset: ModulationSet | None = None):
    if state.chart != 3:
        raise DomainError("inverse of kappa23 maps from chart 3")
    r3, eps3 = state.scalars
    if eps3 <= 0:
        raise DomainError("inverse of kappa23 needs eps3 > 0")
    v2 = eps3 ** -0.5
    r2 = eps3 ** 0.25 * r3
    new_state = ChartState(2, (v2, r2), 0.0)
    if modset is None:
        return new_state, None
    return new_state, scale_envelopes(modset, lambda e: eps3 ** (-e / 4.0), 2)


# ---------------------------------------------------------------------------
# explicit constants

@dataclass(frozen=True)
class F21:
    exact: float
    leading: float
    convention: str


def f21(eps1_star: float, zeta: float, convention: str = "printed") -> F21:
    """Size of the source-driven second critical envelope at the chart 1 exit.

    Solves A' = (-1 + w * eps1 / 2) A + eps1 with A(0) = 0 along the chart 1
    flow, w = 1 ("printed") or w = 2 ("consistent"), and returns A(T1)
    together with its eps1_star -> 0 limit.  The integrating-factor integral
    reduces to upper incomplete gamma functions of order a = 1 - w / 4.
    """
    if not 0.0 < eps1_star <= zeta:
        raise DomainError("f21 needs 0 < eps1_star <= zeta")
    a = {"printed": 0.25, "consistent": 0.5}[convention]
    T1 = (1.0 - eps1_star / zeta) / (2.0 * eps1_star)
    pref = 2.0 ** (a - 1.0) * zeta ** a
    lead = upper_gamma_scaled(a, 1.0 / (2.0 * zeta))
    tail = 0.0
    if T1 < 745.0:
        tail = math.exp(-T1) * upper_gamma_scaled(a, 1.0 / (2.0 * eps1_star))
    exact = pref * (lead - tail) if T1 > 0 else 0.0
    return F21(exact=exact, leading=pref * lead, convention=convention)


def f21_integral_form(eps1_star: float, zeta: float, convention: str = "printed") -> float:
    """The same constant through the generic window integral (moderate T1 only)."""
    from .numerics import gamma_window_integral
    g = {"printed": 0.75, "consistent": 0.5}[convention]
    T1 = (1.0 - eps1_star / zeta) / (2.0 * eps1_star)
    q = gamma_window_integral(-1.0, -2.0 * eps1_star, g, T1)
    return (zeta / eps1_star) ** (1.0 - g) * eps1_star * math.exp(-T1) * q


@dataclass(frozen=True)
class F22:
    statement: float
    proof_variant: float


def f22(rho_mid: float, zeta: float) -> F22:
    """Constant multiplying nu_1 in the chart 2 envelope at the mid section.

    ``statement`` carries exp(rho_mid^2 / 2); ``proof_variant`` carries
    exp(1 / (2 zeta)).  They agree when rho_mid = zeta^-1/2.
    """
    if rho_mid <= 0 or zeta <= 0:
        raise DomainError("f22 needs positive arguments")
    bracket = erf(rho_mid / math.sqrt(2.0)) + erf(1.0 / math.sqrt(2.0 * zeta))
    c = math.sqrt(math.pi / 2.0)
    big = lambda z: math.exp(z) if z < 709.0 else math.inf
    return F22(statement=c * big(0.5 * rho_mid ** 2) * bracket,
               proof_variant=c * big(0.5 / zeta) * bracket)


def a12_prediction(t2: float, zeta: float, nu1: complex, f210: float) -> complex:
    """Closed-form linear guess for the chart 2 roll envelope."""
    return nu1 * zeta ** -0.5 * (f210 + t2) * math.exp(-t2 / math.sqrt(zeta) + 0.5 * t2 ** 2)


def a12_linear_solution(t2: float, zeta: float, nu1: complex, a_start: complex) -> complex:
    """Spatially homogeneous solution of A' = v2(t) A + nu1, v2 = -zeta^-1/2 + t."""
    s = zeta ** -0.5
    phi = -t2 * s + 0.5 * t2 ** 2
    integral = math.exp(0.5 / zeta) * math.sqrt(math.pi / 2.0) * (
        erf((t2 - s) / math.sqrt(2.0)) + erf(s / math.sqrt(2.0)))
    return math.exp(phi) * a_start + nu1 * math.exp(phi) * integral


# ---------------------------------------------------------------------------
# composed passage

@dataclass
class PassageRow:
    epsilon: float
    section: str
    t_global: float
    v: float
    r_chart: float
    norm_theta: float
    mode1_abs: float
    chart_id: int

    def as_tuple(self):
        return (self.epsilon, self.section, self.t_global, self.v, self.r_chart,
                self.norm_theta, self.mode1_abs, self.chart_id)


PASSAGE_COLUMNS = ("epsilon", "section", "t_global", "v", "r_chart", "norm_theta",
                   "mode1_abs", "chart_id")


@dataclass
class PassageRecord:
    rows: list = field(default_factory=list)
    fields: dict = field(default_factory=dict)
    modsets: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    total_time: float = 0.0


def full_passage(modset_in: ModulationSet, eps: float, sections: SectionSpec,
                 fast_grid: Grid1D, nu: Mapping[int, complex] | None = None,
                 stop_at: str = "mid", h: float = 0.05, theta: int = 1,
                 convention: str = "consistent", trace_every: int = 0) -> PassageRecord:
    """Envelope approximation from v = -rho_in to the mid (or exit) section.

    ``modset_in`` holds the chart 1 critical envelopes at the entry section.
    ``h`` is the chart-time step used in every chart.
    """
    nu = dict(nu or {})
    rec = PassageRecord()
    eps1_star = eps / sections.rho_in ** 2
    if eps1_star > sections.zeta:
        raise DomainError("eps must not exceed rho_in^2 * zeta")
    flow1 = K1Flow(eps1_star, sections.zeta, math.sqrt(sections.rho_in))

    def add_row(name, flow, t, modset, offset):
        sc = flow.scalars(t)
        psi = assemble_psi(modset, sc.r, fast_grid)
        t_glob = offset + flow.global_time(t)
        st = flow.state(t)
        v, _ = st.blow_down()
        rec.rows.append(PassageRow(eps, name, t_glob, v, sc.r, hul_norm(psi, theta),
                                   abs(psi.coefficient(1.0)), flow.chart))
        rec.fields[name] = psi
        rec.modsets[name] = modset

    def run(flow, start, offset):
        times = None
        if trace_every:
            n = max(1, int(math.ceil(flow.T / h)))
            times = list(np.linspace(0.0, flow.T, min(n, 50) + 1))
        traj = solve_modulation(start, flow, flow.T, h, nu, convention, record_times=times)
        if trace_every:
            for t, _ in traj:
                rec.trace.append((flow.state(t), offset + flow.global_time(t)))
        return traj[-1][1]

    start = fill_graph(modset_in, flow1.scalars(0.0), nu, convention)
    add_row("in", flow1, 0.0, start, 0.0)
    end1 = run(flow1, start, 0.0)
    add_row("k1_exit", flow1, flow1.T, end1, 0.0)
    offset = flow1.global_time(flow1.T)

    state2, set2 = kappa12(flow1.state(flow1.T), end1)
    v2_0, r2 = state2.scalars
    flow2 = K2Flow(sections.zeta, sections.rho_mid, r2, v2_start=v2_0)
    set2 = fill_graph(set2, flow2.scalars(0.0), nu, convention)
    end2 = run(flow2, set2, offset)
    add_row("mid", flow2, flow2.T, end2, offset)
    offset += flow2.global_time(flow2.T)
    rec.total_time = offset
    if stop_at == "mid":
        return rec
    if stop_at != "out":
        raise DomainError("stop_at must be 'mid' or 'out'")

    state3, set3 = kappa23(flow2.state(flow2.T), end2)
    r3, eps3 = state3.scalars
    flow3 = K3Flow(r3, eps3, sections.rho_out)
    set3 = fill_graph(set3, flow3.scalars(0.0), nu, convention)
    end3 = run(flow3, set3, offset)
    add_row("out", flow3, flow3.T, end3, offset)
    offset += flow3.global_time(flow3.T)
    rec.total_time = offset
    return rec
