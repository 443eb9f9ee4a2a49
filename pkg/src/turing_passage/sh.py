"""Dynamic Swift-Hohenberg equation with a slowly drifting parameter.

    u_t = -(1 + d_x^2)^2 u + v u - u^3 + eps * mu(x),    v_t = eps,

with mu(x) = sum_m nu_m exp(i m x).  The linear symbol is diagonal in
Fourier space and its integral along the drift is closed form, so the
stepper advances the linear part exactly and treats only u^3 and the
source with an exponential midpoint rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .numerics import (ConfigurationError, DomainError, Grid1D, SpectralField,
                       cube_modes, hul_norm, phi1, spectral_derivative,
                       symmetrize, to_modes, to_physical)


class IntegrationFailure(RuntimeError):
    def __init__(self, message: str, t: float, diagnostics: dict | None = None,
                 last_state: "SHState | None" = None):
        super().__init__(f"{message} at t={t:.6g}")
        self.t = t
        self.diagnostics = diagnostics or {}
        self.last_state = last_state


def dispersion(k, v):
    """Growth rate of exp(ikx) for the frozen linear problem."""
    k = np.asarray(k, dtype=float)
    return -(1.0 - k * k) ** 2 + v


def linear_phase(k, v0: float, eps: float, h: float):
    """Integral of the growth rate over [0, h] while v drifts from v0 at rate eps."""
    if h < 0:
        raise DomainError("h must be nonnegative")
    return dispersion(k, v0) * h + 0.5 * eps * h * h


@dataclass(frozen=True)
class SHParams:
    eps: float
    grid: Grid1D
    nu: Mapping[int, complex] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0 and self.eps != 0.0:
            raise ConfigurationError("eps must be in (0,1)")
        nu = {int(m): complex(c) for m, c in dict(self.nu).items()}
        for m, c in nu.items():
            partner = nu.get(-m)
            if partner is None:
                continue
            if abs(partner - np.conj(c)) > 1e-14 * max(1.0, abs(c)):
                raise ConfigurationError(
                    f"source coefficients violate reality: nu[{-m}] != conj(nu[{m}])")
        if 0 in nu and abs(nu[0].imag) > 0:
            raise ConfigurationError("nu[0] must be real")
        # complete the reality pairing
        full = dict(nu)
        for m, c in nu.items():
            full.setdefault(-m, complex(np.conj(c)))
        object.__setattr__(self, "nu", full)

    def source_modes(self) -> np.ndarray:
        out = np.zeros(self.grid.n_points, dtype=complex)
        for m, c in self.nu.items():
            out[self.grid.mode_position(m * self.grid.periods)] += c
        return out

    @property
    def has_source(self) -> bool:
        return any(c != 0 for c in self.nu.values())


@dataclass(frozen=True)
class SHState:
    """Solution u = exp(log_scale) * field at fast time t.

    ``v0`` is the parameter value at t = 0 so that v = v0 + eps * t holds
    exactly.  ``log_scale`` lets amplitudes far below the floating point
    range be tracked when the source vanishes.
    """

    u: SpectralField
    t: float
    v0: float
    eps: float
    log_scale: float = 0.0

    @property
    def v(self) -> float:
        return self.v0 + self.eps * self.t

    def physical_field(self) -> SpectralField:
        if self.log_scale == 0.0:
            return self.u
        return self.u.scale(math.exp(self.log_scale))


def initial_state(u: SpectralField, v: float, eps: float) -> SHState:
    return SHState(u=u, t=0.0, v0=v, eps=eps)


class _Stepper:
    """Precomputed pieces of the exponential midpoint rule for one grid."""

    def __init__(self, params: SHParams, cubic: bool = True):
        self.params = params
        self.k = params.grid.k
        self.base = -(1.0 - self.k ** 2) ** 2
        self.source = params.eps * params.source_modes()
        self.cubic = cubic

    def nonlinear(self, w: np.ndarray, log_scale: float) -> np.ndarray:
        out = np.zeros_like(w)
        if self.cubic:
            factor = math.exp(2.0 * log_scale) if log_scale < 350 else math.inf
            if factor > 0.0:
                out -= factor * cube_modes(w)
        if self.params.has_source:
            out += self.source * math.exp(-log_scale)
        return out

    def advance(self, w: np.ndarray, v0: float, h: float, log_scale: float) -> np.ndarray:
        eps = self.params.eps
        lam_q = self.base + v0 + eps * h / 4.0
        lam_m = self.base + v0 + eps * h / 2.0
        e_half = np.exp(self.base * (h / 2) + v0 * (h / 2) + eps * h * h / 8.0)
        e_full = np.exp(self.base * h + v0 * h + eps * h * h / 2.0)
        n0 = self.nonlinear(w, log_scale)
        w_half = e_half * w + (h / 2) * phi1(lam_q * (h / 2)) * n0
        n_half = self.nonlinear(w_half, log_scale)
        return e_full * w + h * phi1(lam_m * h) * n_half


def _rescale(state_w: np.ndarray, log_scale: float, enabled: bool) -> tuple[np.ndarray, float]:
    if not enabled:
        return state_w, log_scale
    peak = float(np.max(np.abs(state_w)))
    if peak == 0.0 or not math.isfinite(peak):
        return state_w, log_scale
    if peak < 1e-100 or (log_scale != 0.0 and peak > 1e100):
        return state_w / peak, log_scale + math.log(peak)
    return state_w, log_scale


def step(state: SHState, params: SHParams, h: float, *, cubic: bool = True,
         track_log: bool = False, _stepper: _Stepper | None = None) -> SHState:
    """One exponential midpoint step of size h."""
    if h < 0:
        raise DomainError("h must be nonnegative")
    stepper = _stepper or _Stepper(params, cubic=cubic)
    w = stepper.advance(state.u.modes, state.v, h, state.log_scale)
    if not np.all(np.isfinite(w)):
        raise IntegrationFailure("non-finite solution", state.t,
                                 {"max_abs_before": float(np.max(np.abs(state.u.modes)))},
                                 last_state=state)
    w = symmetrize(w)
    w, log_scale = _rescale(w, state.log_scale, track_log and not params.has_source)
    return SHState(u=SpectralField(state.u.grid, w), t=state.t + h, v0=state.v0,
                   eps=state.eps, log_scale=log_scale)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    observables: list = field(default_factory=list)
    sections: dict = field(default_factory=dict)
    saturated: bool = False


def observe(state: SHState, theta: int = 1) -> dict:
    """Observables of a state: norms in linear and logarithmic form."""
    norm = hul_norm(state.u, theta)
    peak = float(np.max(np.abs(to_physical(state.u))))
    m1 = abs(state.u.coefficient(1.0)) if state.u.grid.n_points > 2 * state.u.grid.periods else 0.0
    s = state.log_scale
    def lg(x):
        return math.log(x) + s if x > 0 else -math.inf
    return {
        "t": state.t, "v": state.v,
        "hul_norm": norm * math.exp(s) if s > -700 else 0.0,
        "max_abs": peak * math.exp(s) if s > -700 else 0.0,
        "mode1_abs": m1 * math.exp(s) if s > -700 else 0.0,
        "log_hul_norm": lg(norm), "log_mode1_abs": lg(m1),
    }


def integrate(state0: SHState, params: SHParams, t_end: float, h: float,
              sections: Sequence[float] = (), *, record_every: int = 0,
              theta: int = 1, cubic: bool = True, track_log: bool = False,
              callback: Callable[[SHState], None] | None = None) -> Trajectory:
    """Step from state0 until t_end.

    ``sections`` are values of v.  Because v is affine in t, the crossing time
    of each section is found exactly by linear interpolation of v, and the
    step sequence is shortened so that a state is produced exactly there.
    Section states are stored in ``trajectory.sections`` keyed by v.
    """
    if t_end < state0.t:
        raise DomainError("t_end must not precede the initial time")
    if h <= 0:
        raise DomainError("h must be positive")
    traj = Trajectory()
    stops = []
    eps = params.eps
    for v_sec in sections:
        if eps == 0.0:
            continue
        t_sec = (v_sec - state0.v0) / eps
        if state0.t <= t_sec <= t_end:
            stops.append((t_sec, v_sec))
    stops.sort()
    stepper = _Stepper(params, cubic=cubic)
    state = state0
    traj.times.append(state.t)
    if record_every:
        traj.observables.append(observe(state, theta))
    for t_sec, v_sec in stops:
        if t_sec == state.t:
            traj.sections[v_sec] = state
    targets = [t for t, _ in stops] + [t_end]
    n_steps = 0
    for target in targets:
        while state.t < target - 1e-12 * max(1.0, abs(target)):
            dt = min(h, target - state.t)
            new = step(state, params, dt, cubic=cubic, track_log=track_log, _stepper=stepper)
            if abs(target - new.t) <= 1e-12 * max(1.0, abs(target)):
                new = replace(new, t=target)
            state = new
            n_steps += 1
            if record_every and n_steps % record_every == 0:
                traj.observables.append(observe(state, theta))
            if callback is not None:
                callback(state)
        for t_sec, v_sec in stops:
            if t_sec == target:
                traj.sections[v_sec] = state
    traj.times.append(state.t)
    traj.states.append(state)
    if record_every and (not traj.observables or traj.observables[-1]["t"] != state.t):
        traj.observables.append(observe(state, theta))
    return traj


def sh_rhs_linear(u: SpectralField, v: float) -> np.ndarray:
    return (-(1.0 - u.grid.k ** 2) ** 2 + v) * u.modes


def residual_field(psi_prev: SpectralField, psi_mid: SpectralField, psi_next: SpectralField,
                   dt: float, params: SHParams, v: float) -> SpectralField:
    """Defect of the SH equation for a candidate with centered time difference."""
    dpsi = (psi_next.modes - psi_prev.modes) / (2.0 * dt)
    rhs = sh_rhs_linear(psi_mid, v) - cube_modes(psi_mid.modes) + params.eps * params.source_modes()
    return SpectralField(psi_mid.grid, symmetrize(-dpsi + rhs))


def residual_of(snapshots: Sequence[tuple[float, SpectralField]], params: SHParams,
                v_of_t: Callable[[float], float], theta: int = 1) -> list[tuple[float, float]]:
    """Residual norms at interior snapshot times.

    ``snapshots`` is a sequence of (t, field) pairs with equal spacing.
    """
    if len(snapshots) < 3:
        raise ConfigurationError("residual_of needs at least three snapshots")
    times = np.array([t for t, _ in snapshots])
    spacing = np.diff(times)
    if np.max(np.abs(spacing - spacing[0])) > 1e-9 * max(1.0, abs(spacing[0])):
        raise ConfigurationError("snapshots must be equally spaced")
    dt = float(spacing[0])
    out = []
    for i in range(1, len(snapshots) - 1):
        t = snapshots[i][0]
        res = residual_field(snapshots[i - 1][1], snapshots[i][1], snapshots[i + 1][1],
                             dt, params, v_of_t(t))
        out.append((t, hul_norm(res, theta)))
    return out


# ---------------------------------------------------------------------------
# initial data

def roll(grid: Grid1D, amplitude: float, phase: float = 0.0) -> SpectralField:
    """amplitude * (exp(i(x+phase)) + c.c.)"""
    x = grid.x
    return to_modes(2.0 * amplitude * np.cos(x + phase), grid)


def windowed_roll(grid: Grid1D, amplitude: float, width: float) -> SpectralField:
    x = grid.x
    center = 0.5 * grid.length
    env = np.exp(-0.5 * ((x - center) / width) ** 2)
    return to_modes(2.0 * amplitude * env * np.cos(x), grid)


def random_band(grid: Grid1D, amplitude: float, seed: int, halfwidth: float = 0.5) -> SpectralField:
    """Seeded random field with modes supported in |k -+ 1| < halfwidth."""
    rng = np.random.default_rng(seed)
    k = grid.k
    modes = np.zeros(grid.n_points, dtype=complex)
    band = (np.abs(k - 1.0) < halfwidth)
    coeffs = rng.normal(size=band.sum()) + 1j * rng.normal(size=band.sum())
    modes[band] = coeffs
    modes = symmetrize(modes)
    field_ = SpectralField(grid, modes)
    norm = hul_norm(field_, 0)
    return field_.scale(amplitude / norm if norm > 0 else 0.0)


def shift(f: SpectralField, dx: float) -> SpectralField:
    """f(x - dx)"""
    return SpectralField(f.grid, f.modes * np.exp(-1j * f.grid.k * dx))
