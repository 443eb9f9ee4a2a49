import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from turing_passage.numerics import (ConfigurationError, DomainError, Grid1D, SpectralField,
                                     apply_propagator, dealiased_cube, erf,
                                     gamma_window_integral, hul_norm, is_conjugate_symmetric,
                                     phi1, spectral_derivative, to_modes, to_physical,
                                     upper_gamma, upper_gamma_scaled)
from turing_passage.oracles import upper_gamma_quad, window_integral_quad
from turing_passage.sh import dispersion


def band_limited(grid, rng, kmax=6):
    modes = np.zeros(grid.n_points, dtype=complex)
    for j in range(1, kmax + 1):
        c = rng.normal() + 1j * rng.normal()
        modes[j] = c
        modes[-j] = np.conj(c)
    modes[0] = rng.normal()
    return SpectralField(grid, modes)


def test_grid_rules():
    with pytest.raises(ConfigurationError):
        Grid1D(1, 24)
    with pytest.raises(ConfigurationError):
        Grid1D(8, 32)
    g = Grid1D(8, 32, fast=False)
    assert g.dx == pytest.approx(2 * math.pi * 8 / 32)
    assert np.allclose(Grid1D(4, 64).k[:3], [0, 0.25, 0.5])


def test_transform_examples():
    g = Grid1D(1, 32)
    f = to_modes(np.ones(32), g)
    assert f.modes[0] == pytest.approx(1.0)
    assert np.max(np.abs(f.modes[1:])) < 1e-15
    c = to_modes(np.cos(g.x), g)
    assert c.modes[1] == pytest.approx(0.5)
    assert c.modes[-1] == pytest.approx(0.5)
    with pytest.raises(ConfigurationError):
        to_modes(np.ones(16), g)


@given(st.integers(0, 2 ** 32 - 1))
def test_round_trip(seed):
    g = Grid1D(2, 64)
    u = np.random.default_rng(seed).normal(size=64)
    f = to_modes(u, g)
    assert is_conjugate_symmetric(f.modes)
    assert np.max(np.abs(to_physical(f) - u)) < 1e-12


@given(st.integers(0, 2 ** 32 - 1))
def test_parseval(seed):
    g = Grid1D(2, 64)
    u = np.random.default_rng(seed).normal(size=64)
    f = to_modes(u, g)
    lhs = np.sum(np.abs(f.modes) ** 2) * g.length
    rhs = np.sum(u * u) * g.dx
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_derivative_examples():
    g = Grid1D(1, 32)
    s = to_modes(np.sin(g.x), g)
    assert np.max(np.abs(to_physical(spectral_derivative(s, 1)) - np.cos(g.x))) < 1e-10
    e = SpectralField(g, np.eye(32)[1].astype(complex))
    assert np.allclose(spectral_derivative(e, 2).modes, -e.modes)
    c = to_modes(np.cos(g.x), g)
    op = c.modes + 2 * spectral_derivative(c, 2).modes + spectral_derivative(c, 4).modes
    assert np.max(np.abs(op)) < 1e-10


def test_odd_derivative_drops_nyquist():
    g = Grid1D(1, 16)
    u = np.cos(8 * g.x)  # pure Nyquist mode
    d = spectral_derivative(to_modes(u, g), 1)
    assert np.max(np.abs(d.modes)) == 0.0


def test_propagator_examples():
    g = Grid1D(1, 32)
    c = to_modes(2 * np.cos(g.x), g)
    same, sat = apply_propagator(c, lambda k: 0 * k)
    assert np.array_equal(same.modes, c.modes) and not sat
    crit, _ = apply_propagator(c, lambda k: dispersion(k, 0.0) * 3.7)
    assert np.allclose(crit.modes, c.modes, rtol=0, atol=1e-15)
    two = to_modes(2 * np.cos(2 * g.x), g)
    out, _ = apply_propagator(two, lambda k: dispersion(k, 0.0))
    assert abs(out.modes[2]) == pytest.approx(math.exp(-9), rel=1e-14)


def test_propagator_saturates():
    g = Grid1D(1, 32)
    c = to_modes(np.cos(g.x), g)
    out, sat = apply_propagator(c, lambda k: 800.0 + 0 * k)
    assert sat and np.all(np.isfinite(out.modes))
    with pytest.raises(DomainError):
        apply_propagator(c, lambda k: np.full_like(k, np.inf))


@given(st.floats(0, 3), st.floats(0, 3))
def test_propagator_composition(t1, t2):
    g = Grid1D(2, 64)
    f = band_limited(g, np.random.default_rng(3), 10)
    a, _ = apply_propagator(f, lambda k: dispersion(k, 0.2) * t1)
    ab, _ = apply_propagator(a, lambda k: dispersion(k, 0.2) * t2)
    c, _ = apply_propagator(f, lambda k: dispersion(k, 0.2) * (t1 + t2))
    nz = np.abs(c.modes) > 1e-200
    assert np.max(np.abs(ab.modes[nz] / c.modes[nz] - 1)) < 1e-12


def test_cube_examples(rng):
    g = Grid1D(1, 32)
    c = dealiased_cube(to_modes(np.cos(g.x), g))
    expected = 0.75 * np.cos(g.x) + 0.25 * np.cos(3 * g.x)
    assert np.max(np.abs(to_physical(c) - expected)) < 1e-14
    k = dealiased_cube(to_modes(np.full(32, 1.7), g))
    assert k.modes[0] == pytest.approx(1.7 ** 3)


def test_cube_against_oversampled(rng):
    g = Grid1D(1, 64)
    f = band_limited(g, rng, 30)
    # direct cube on a 4x grid, then keep the retained modes
    big = np.zeros(256, dtype=complex)
    big[:32] = f.modes[:32]
    big[-31:] = f.modes[-31:]
    phys = np.fft.ifft(big * 256).real
    cubed = np.fft.fft(phys ** 3) / 256
    ref = np.zeros(64, dtype=complex)
    ref[:32] = cubed[:32]
    ref[-31:] = cubed[-31:]
    out = dealiased_cube(f).modes
    out[32] = 0.0  # Nyquist bin is not a retained mode
    assert np.max(np.abs(out - ref)) / np.max(np.abs(ref)) < 1e-12


def test_hul_norm_examples():
    g = Grid1D(1, 1024)
    s = to_modes(np.sin(g.x), g)
    assert hul_norm(SpectralField(g, np.zeros(1024, dtype=complex)), 0) == 0.0
    assert hul_norm(s, 0) == pytest.approx(math.sqrt(0.5 + math.sin(1) / 2), abs=1e-3)
    assert hul_norm(s, 1) == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ConfigurationError):
        hul_norm(s, 0, window=100.0)


@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 3))
def test_hul_norm_monotone_in_theta(seed, theta):
    g = Grid1D(4, 128)
    f = band_limited(g, np.random.default_rng(seed), 20)
    assert hul_norm(f, theta) <= hul_norm(f, theta + 1) + 1e-12


@pytest.mark.parametrize("a,z", [(0.25, 0.5), (0.25, 5.0), (0.5, 2.0), (1.25, 10.0),
                                 (1.75, 29.0), (0.5, 0.0), (2.0, 3.0)])
def test_upper_gamma_vs_quadrature(a, z):
    assert upper_gamma(a, z) == pytest.approx(upper_gamma_quad(a, z), rel=1e-10)


def test_upper_gamma_examples():
    assert upper_gamma(1.0, 2.0) == pytest.approx(math.exp(-2), rel=1e-14)
    assert upper_gamma(0.5, 0.0) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    with pytest.raises(DomainError):
        upper_gamma(0.0, 0.0)
    # asymptotic branch against the continued fraction near the switch
    a, z = 0.25, 45.0
    assert upper_gamma_scaled(a, z) == pytest.approx(
        upper_gamma_quad(a, z) * math.exp(z), rel=1e-10)


def test_gamma_window_examples():
    for t in (0.1, 0.5, 0.9):
        assert gamma_window_integral(1, 1, 0, t) == pytest.approx(1 - math.exp(-t), rel=1e-14)
        assert gamma_window_integral(0, 1, 1, t) == pytest.approx(math.log1p(t), rel=1e-14)
    ref = window_integral_quad(1.0, -0.02, -0.5, 10.0)
    assert gamma_window_integral(1.0, -0.02, -0.5, 10.0) == pytest.approx(ref, rel=1e-9)
    with pytest.raises(DomainError):
        gamma_window_integral(1.0, 0.5, 0.5, 2.0)


@given(st.sampled_from([0.0, 0.5, 1.0, 2.0, 5.0]), st.sampled_from([-0.05, -0.01, 0.0, 0.01, 0.05]),
       st.sampled_from([-1.0, -0.5, 0.0, 0.5, 0.75]), st.floats(0.01, 19.0), st.floats(0.01, 0.9))
def test_gamma_window_increasing(alpha, beta, gamma, t, frac):
    q1 = gamma_window_integral(alpha, beta, gamma, t * frac)
    q2 = gamma_window_integral(alpha, beta, gamma, t)
    assert q1 <= q2
    # strict whenever the added mass is resolvable in double precision
    # lower bound on the integral over [t * frac, t]
    weight = min((1 + beta * t * frac) ** -gamma, (1 + beta * t) ** -gamma)
    added = math.exp(-alpha * t) * t * (1 - frac) * weight
    if added > 1e-13 * q2:
        assert q1 < q2


def test_erf_examples():
    assert erf(0.0) == 0.0
    assert abs(erf(10.0) - 1.0) < 1e-12
    assert erf(1 / math.sqrt(2)) == pytest.approx(0.6826894921370859, abs=1e-12)


def test_phi1_small_argument():
    z = np.array([0.0, 1e-12, 1e-3, -2.0, 1j])
    ref = np.array([1.0, 1.0 + 5e-13, np.expm1(1e-3) / 1e-3, np.expm1(-2.0) / -2.0,
                    np.expm1(1j) / 1j])
    assert np.allclose(phi1(z), ref, rtol=1e-12, atol=0)
