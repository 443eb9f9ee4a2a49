"""Periodic spectral fields, mode-wise propagators, uniformly local norms and
the special functions used by the chart constants.

Fields live on a periodic domain of length L = 2*pi*P.  Fourier coefficients
are normalised so that a real field u(x) = sum_j c_j exp(i k_j x) has
c_j = mean(u * exp(-i k_j x)); with this choice cos(x) has coefficients 1/2
at k = +-1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class ConfigurationError(ValueError):
    """Raised for malformed inputs such as length mismatches."""


class DomainError(ValueError):
    """Raised when an argument lies outside the documented domain."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid1D:
    """Collocation grid on [0, 2*pi*periods).

    ``fast=True`` enforces the pattern-scale resolution rule (at least eight
    points per basic 2*pi cell).  Envelope grids use ``fast=False``.
    """

    periods: int
    n_points: int
    fast: bool = True

    def __post_init__(self):
        if int(self.periods) != self.periods or self.periods < 1:
            raise ConfigurationError("periods must be a positive integer")
        if not _is_power_of_two(int(self.n_points)):
            raise ConfigurationError("n_points must be a power of two")
        if self.fast and self.n_points < 8 * self.periods:
            raise ConfigurationError("n_points must be at least 8 * periods")

    @property
    def length(self) -> float:
        return 2.0 * math.pi * self.periods

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dx

    @property
    def index(self) -> np.ndarray:
        """Integer wavenumber indices j in numpy FFT order."""
        return np.fft.fftfreq(self.n_points, d=1.0 / self.n_points).round().astype(int)

    @property
    def k(self) -> np.ndarray:
        return self.index / self.periods

    def mode_position(self, j: int) -> int:
        """Array position of integer wavenumber index j."""
        half = self.n_points // 2
        if not -half < j < half:
            raise ConfigurationError(f"wavenumber index {j} not representable")
        return j % self.n_points


@dataclass(frozen=True)
class SpectralField:
    """A real periodic field held as conjugate-symmetric Fourier modes."""

    grid: Grid1D
    modes: np.ndarray

    def physical(self) -> np.ndarray:
        return to_physical(self)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.modes + other.modes)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.modes - other.modes)

    def scale(self, c: float) -> "SpectralField":
        return SpectralField(self.grid, c * self.modes)

    def coefficient(self, k: float) -> complex:
        """Coefficient at wavenumber k (must be a multiple of 1/periods)."""
        j = int(round(k * self.grid.periods))
        return complex(self.modes[self.grid.mode_position(j)])


@dataclass(frozen=True)
class ComplexField:
    """Complex samples on an envelope grid."""

    grid: Grid1D
    values: np.ndarray


def symmetrize(modes: np.ndarray) -> np.ndarray:
    """Project onto conjugate-symmetric coefficient arrays (real fields)."""
    mirrored = np.conj(np.roll(modes[::-1], 1))
    return 0.5 * (modes + mirrored)


def is_conjugate_symmetric(modes: np.ndarray, tol: float = 1e-12) -> bool:
    mirrored = np.conj(np.roll(modes[::-1], 1))
    scale = max(1.0, float(np.max(np.abs(modes))) if modes.size else 1.0)
    return bool(np.max(np.abs(modes - mirrored)) <= tol * scale)


def to_modes(samples, grid: Grid1D) -> SpectralField:
    samples = np.asarray(samples)
    if samples.shape != (grid.n_points,):
        raise ConfigurationError(
            f"expected {grid.n_points} samples, got shape {samples.shape}")
    modes = np.fft.fft(samples) / grid.n_points
    if not np.iscomplexobj(samples):
        modes = symmetrize(modes)
    return SpectralField(grid, modes)


def to_physical(field: SpectralField) -> np.ndarray:
    return np.fft.ifft(field.modes * field.grid.n_points).real


def _odd_nyquist_mask(grid: Grid1D, order: int) -> np.ndarray:
    mask = np.ones(grid.n_points)
    if order % 2 == 1:
        mask[grid.n_points // 2] = 0.0
    return mask


def spectral_derivative(field: SpectralField, order: int) -> SpectralField:
    if order < 0:
        raise ConfigurationError("derivative order must be nonnegative")
    symbol = (1j * field.grid.k) ** order
    # the Nyquist mode has no real odd derivative
    symbol = symbol * _odd_nyquist_mask(field.grid, order)
    return SpectralField(field.grid, field.modes * symbol)


def apply_propagator(field: SpectralField,
                     phase: Callable[[np.ndarray], np.ndarray]) -> tuple[SpectralField, bool]:
    """Multiply mode j by exp(phase(k_j)).

    Returns the new field and a flag that is True when the exponential
    saturated (overflow) and was clipped.
    """
    p = np.asarray(phase(field.grid.k), dtype=complex)
    if not np.all(np.isfinite(p)):
        raise DomainError("propagator phase must be finite")
    limit = 700.0
    saturated = bool(np.any(p.real > limit))
    p = np.where(p.real > limit, limit + 1j * p.imag, p)
    return SpectralField(field.grid, field.modes * np.exp(p)), saturated


def _pad(modes: np.ndarray, n_big: int) -> np.ndarray:
    n = modes.size
    half = n // 2
    out = np.zeros(n_big, dtype=complex)
    out[:half] = modes[:half]
    out[n_big - half + 1:] = modes[half + 1:]
    # split the Nyquist coefficient so the padded field stays real
    out[half] = 0.5 * modes[half]
    out[n_big - half] = 0.5 * modes[half]
    return out


def _truncate(modes_big: np.ndarray, n: int) -> np.ndarray:
    n_big = modes_big.size
    half = n // 2
    out = np.zeros(n, dtype=complex)
    out[:half] = modes_big[:half]
    out[half + 1:] = modes_big[n_big - half + 1:]
    out[half] = modes_big[half] + modes_big[n_big - half]
    return out


def cube_modes(modes: np.ndarray, real: bool = True) -> np.ndarray:
    """Dealiased cube of a coefficient array by 2x zero padding."""
    n = modes.size
    n_big = 2 * n
    big = _pad(modes, n_big)
    phys = np.fft.ifft(big * n_big)
    if real:
        phys = phys.real
    cubed = np.fft.fft(phys ** 3) / n_big
    return _truncate(cubed, n)


def dealiased_cube(field: SpectralField) -> SpectralField:
    return SpectralField(field.grid, symmetrize(cube_modes(field.modes)))


def window_integrals(g: np.ndarray, grid: Grid1D, window: float,
                     stride: float | None = None) -> np.ndarray:
    """Integrals of the periodic samples g over [y - w/2, y + w/2].

    Centers y are spaced by ``stride`` (default dx).  Integrals use the
    trapezoid rule on the collocation grid; window endpoints between grid
    points are handled by linear interpolation of the cumulative integral.
    """
    if window > grid.length:
        raise ConfigurationError("window must not exceed the domain length")
    n = grid.n_points
    dx = grid.dx
    # three periods of samples so that every window fits
    ext = np.concatenate([g, g, g, g[:1]])
    xe = (np.arange(ext.size) - n) * dx
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (ext[1:] + ext[:-1]) * dx)])
    stride = dx if stride is None else stride
    centers = np.arange(0.0, grid.length, stride)
    hi = np.interp(centers + 0.5 * window, xe, cum)
    lo = np.interp(centers - 0.5 * window, xe, cum)
    return hi - lo


def hul_norm(field: SpectralField, theta: int = 1, window: float = 1.0,
             stride: float | None = None) -> float:
    """Uniformly local H^theta norm: sup over windows of the local H^theta norm."""
    if theta < 0 or theta > 4:
        raise ConfigurationError("theta must be an integer in [0, 4]")
    scale = float(np.max(np.abs(field.modes))) if field.modes.size else 0.0
    if scale == 0.0 or not math.isfinite(scale):
        return scale
    # normalise first so tiny (or huge) fields do not under/overflow when squared
    unit = SpectralField(field.grid, field.modes / scale)
    total = np.zeros(field.grid.n_points)
    for order in range(theta + 1):
        d = to_physical(spectral_derivative(unit, order)) if order else to_physical(unit)
        total += d * d
    local = window_integrals(total, field.grid, window, stride)
    return scale * float(math.sqrt(max(float(np.max(local)), 0.0)))


# --------------------------------------------------------------------------
# special functions

_EPS = 1e-17
_TINY = 1e-300


def _lower_series_scaled(a: float, z: float) -> float:
    """e^z * gamma_lower(a, z) / z^a via the standard power series."""
    term = 1.0 / a
    total = term
    k = 0
    while True:
        k += 1
        term *= z / (a + k)
        total += term
        if abs(term) < _EPS * abs(total) or k > 10000:
            return total


def _upper_cf_scaled(a: float, z: float) -> float:
    """e^z * Gamma(a, z) by the modified Lentz continued fraction."""
    b = z + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0.0 else 1.0 / _TINY
    h = d
    for i in range(1, 20000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(a * math.log(z)) * h


def _upper_asymptotic_scaled(a: float, z: float, min_terms: int = 3) -> float:
    """e^z * Gamma(a, z) ~ z^(a-1) * sum_k (a-1)...(a-k) / z^k."""
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = term * (a - k) / z
        if k > min_terms and abs(nxt) >= abs(term):
            break
        term = nxt
        total += term
        if term == 0.0 or (k >= min_terms and abs(term) < _EPS * abs(total)):
            break
        if k > 200:
            break
    return z ** (a - 1.0) * total


ASYMPTOTIC_SWITCH = 30.0


def upper_gamma_scaled(a: float, z: float) -> float:
    """Return e^z * Gamma(a, z) for z > 0 (any real a) or z = 0 with a > 0."""
    a = float(a)
    z = float(z)
    if z < 0.0:
        raise DomainError("upper_gamma requires z >= 0")
    if z == 0.0:
        if a <= 0.0:
            raise DomainError("Gamma(a, 0) diverges for a <= 0")
        return math.gamma(a)
    if z > ASYMPTOTIC_SWITCH:
        return _upper_asymptotic_scaled(a, z)
    if a <= 0.0:
        if z >= 1.0:
            return _upper_cf_scaled(a, z)
        # upward recurrence: Gamma(a, z) = (Gamma(a+1, z) - z^a e^-z) / a
        if a == 0.0:
            return math.exp(z) * _exp_integral_e1(z)
        return (upper_gamma_scaled(a + 1.0, z) - z ** a) / a
    if z < a + 1.0:
        lower = _lower_series_scaled(a, z) * z ** a  # e^z * gamma_lower
        return math.exp(z) * math.gamma(a) - lower
    return _upper_cf_scaled(a, z)


def _exp_integral_e1(z: float) -> float:
    total = 0.0
    term = 1.0
    k = 0
    while True:
        k += 1
        term *= -z / k
        contrib = term / k
        total += contrib
        if abs(contrib) < _EPS * max(1.0, abs(total)):
            break
    return -0.5772156649015329 - math.log(z) - total


def upper_gamma(a: float, z: float) -> float:
    """Upper incomplete gamma function Gamma(a, z) = int_z^inf s^(a-1) e^-s ds."""
    scaled = upper_gamma_scaled(a, z)
    if z > 700.0:
        return math.exp(math.log(scaled) - z) if scaled > 0 else 0.0
    return math.exp(-z) * scaled


def _exp_moment_scaled(a: float, x: float) -> float:
    """e^-x * int_0^x e^w w^(a-1) dw for a > 0 and x > 0."""
    if a <= 0.0:
        raise DomainError("exponential moment requires a > 0")
    if x == 0.0:
        return 0.0
    if x <= 50.0:
        term = 1.0
        total = 1.0 / a
        k = 0
        while True:
            k += 1
            term *= x / k
            contrib = term / (a + k)
            total += contrib
            if contrib < _EPS * total or k > 10000:
                break
        return math.exp(a * math.log(x) - x) * total
    # integration by parts: e^x x^(a-1) sum_k (-1)^k (a-1)...(a-k) / x^k
    term = 1.0
    total = 1.0
    k = 0
    while k < 200:
        k += 1
        nxt = -term * (a - k) / x
        if abs(nxt) >= abs(term) and k > 3:
            break
        term = nxt
        total += term
        if abs(term) < _EPS * abs(total):
            break
    return x ** (a - 1.0) * total


def gamma_window_integral(alpha: float, beta: float, gamma: float, t: float) -> float:
    """Q(t) = int_0^t exp(-alpha s) (1 + beta s)^(-gamma) ds.

    Closed forms: elementary when alpha = 0 or beta = 0; otherwise the
    incomplete gamma identity, written with scaled functions so that large
    values of alpha/beta do not overflow.  When alpha/beta < 0 the analytic
    continuation is expressed through the real exponential moment
    int_0^X e^w w^(a-1) dw.
    """
    alpha, beta, gamma, t = float(alpha), float(beta), float(gamma), float(t)
    if t < 0.0:
        raise DomainError("t must be nonnegative")
    if beta != 0.0 and t >= 1.0 / abs(beta):
        raise DomainError("t must lie in [0, 1/|beta|)")
    if t == 0.0:
        return 0.0
    if beta == 0.0:
        if alpha == 0.0:
            return t
        return -math.expm1(-alpha * t) / alpha
    w = 1.0 + beta * t
    if alpha == 0.0:
        if gamma == 1.0:
            return math.log1p(beta * t) / beta
        return math.expm1((1.0 - gamma) * math.log(w)) / (beta * (1.0 - gamma))
    a = 1.0 - gamma
    z0 = alpha / beta
    decay = math.exp(-alpha * t)
    if z0 > 0.0:
        pref = (beta / alpha) ** a / beta
        return pref * (upper_gamma_scaled(a, z0) - decay * upper_gamma_scaled(a, z0 * w))
    w0 = -z0
    pref = w0 ** gamma / alpha
    return pref * (_exp_moment_scaled(a, w0) - decay * _exp_moment_scaled(a, w0 * w))


def erf(z: float) -> float:
    return math.erf(z)


def phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z with the removable singularity filled in."""
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    small = np.abs(z) < 1e-8
    zs = z[~small]
    out[~small] = np.expm1(zs) / zs
    out[small] = 1.0 + 0.5 * z[small] + z[small] ** 2 / 6.0
    return out
