import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from turing_passage import oracles
from turing_passage.charts import K1Flow, K2Flow, StaticFlow
from turing_passage.hierarchy import (ChartFlow, ChartScalars, SingularOperatorError,
                                      assemble_psi, enumerate_cubic, evaluate_cubic,
                                      gl_graph_eval, hierarchy_document, linear_op_apply,
                                      mode_indices, new_modset, solve_modulation)
from turing_passage.numerics import (ConfigurationError, Grid1D, hul_norm,
                                     is_conjugate_symmetric)
from turing_passage.validation import ResidualConfig, fit_scaling, residual_norm

A, A2 = 0.7 - 0.2j, 0.3 + 0.4j


def _point_fields(values):
    out = {}
    for (m, j), v in values.items():
        out[(m, j)] = np.array([v])
        out[(-m, j)] = np.array([np.conj(v)])
    return out


def test_first_cubic_coefficients():
    f = _point_fields({(1, 1): A, (1, 2): A2})
    a11 = evaluate_cubic(enumerate_cubic(1, 1, 4), f, (1,))[0]
    a12 = evaluate_cubic(enumerate_cubic(1, 2, 4), f, (1,))[0]
    assert abs(a11 - 3 * A * abs(A) ** 2) < 1e-14
    assert abs(a12 - (3 * A * A * np.conj(A2) + 6 * abs(A) ** 2 * A2)) < 1e-14


@pytest.mark.parametrize("N", [2, 3, 4, 5, 6])
def test_index_set_and_terms_match_brute_force(N):
    assert list(mode_indices(N)) == sorted(oracles.ansatz_indices(N))
    for m, j in mode_indices(N):
        power = abs(abs(m) - 1) + j + (2 if abs(m) == 1 else 0)
        got = {t.factors: t.multiplicity for t in enumerate_cubic(m, j, N)}
        assert got == dict(oracles.monomial_counts(m, power, N))


@given(st.integers(2, 6), st.integers(0, 2 ** 32 - 1))
def test_cubic_values_match_expansion(N, seed):
    rng = np.random.default_rng(seed)
    idx = oracles.ansatz_indices(N)
    vals = {i: complex(rng.normal(), rng.normal()) for i in idx}
    ref = oracles.cube_expansion(vals, N)
    arr = {i: np.array([v]) for i, v in vals.items()}
    for m, j in idx:
        power = abs(abs(m) - 1) + j + (2 if abs(m) == 1 else 0)
        got = evaluate_cubic(enumerate_cubic(m, j, N), arr, (1,))[0]
        want = ref.get((m, power), 0.0)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


@given(st.floats(-3, 3), st.integers(0, 1000))
def test_cubic_coefficients_are_homogeneous(s, seed):
    rng = np.random.default_rng(seed)
    idx = mode_indices(4)
    vals = {i: np.array([complex(rng.normal(), rng.normal())]) for i in idx}
    scaled = {i: s * v for i, v in vals.items()}
    for m, j in idx:
        terms = enumerate_cubic(m, j, 4)
        a = evaluate_cubic(terms, vals, (1,))
        b = evaluate_cubic(terms, scaled, (1,))
        assert np.allclose(b, s ** 3 * a, atol=1e-12)


def test_bad_index_rejected():
    with pytest.raises(ConfigurationError):
        enumerate_cubic(1, 3, 4)
    with pytest.raises(ConfigurationError):
        new_modset(5, Grid1D(1, 8, fast=False), {(2, 1): 1.0})
    with pytest.raises(ConfigurationError):
        new_modset(7, Grid1D(1, 8, fast=False), {})


def test_graph_at_order_four():
    grid = Grid1D(1, 8, fast=False)
    v = gl_graph_eval(new_modset(4, grid, {(1, 1): A}), ChartScalars(2, 0.3, 0.2, 1.0, 0.0)).values
    for idx in [(0, 1), (2, 1), (-2, 1)]:
        assert np.all(v[idx] == 0)
    assert np.max(np.abs(v[(3, 1)] + A ** 3 / 64)) < 1e-15
    assert np.max(np.abs(v[(-3, 1)] + np.conj(A) ** 3 / 64)) < 1e-15


def test_constant_critical_field_two():
    grid = Grid1D(1, 8, fast=False)
    v = gl_graph_eval(new_modset(4, grid, {(1, 1): 2.0}), ChartScalars(1, 0.5, -1, 0.1, -0.05)).values
    assert np.allclose(v[(3, 1)], -1 / 8, atol=1e-15)


def test_zero_critical_fields_give_zero_graph():
    grid = Grid1D(1, 8, fast=False)
    v = gl_graph_eval(new_modset(6, grid, {}), ChartScalars(2, 0.5, 0.3, 1.0, 0.0)).values
    assert all(np.all(a == 0) for a in v.values())


def test_source_enters_affinely():
    grid = Grid1D(1, 16, fast=False)
    x = grid.x
    ms = new_modset(5, grid, {(1, 1): 0.4 + 0.1 * np.cos(x), (1, 2): 0.2j})
    sc = ChartScalars(2, 0.4, 0.3, 1.0, 0.0)
    nu = {0: 0.3, 2: 0.1 - 0.2j, 1: 0.05}
    ev = [gl_graph_eval(ms, sc, {m: s * c for m, c in nu.items()}).values for s in (0, 1, 2)]
    for idx in ev[0]:
        assert np.max(np.abs(ev[2][idx] - 2 * ev[1][idx] + ev[0][idx])) < 1e-13


def test_linear_operator_examples():
    grid = Grid1D(1, 8, fast=False)
    sc = ChartScalars(2, 0.5, 0.0, 1.0, 0.0)
    ones = np.ones(8, dtype=complex)
    assert np.allclose(linear_op_apply(0, 3, ones, grid, sc), -64)
    assert np.allclose(linear_op_apply(0, 0, ones, grid, sc), -1)
    wave = np.exp(1j * grid.x)
    for m in (1, -1):
        assert np.max(np.abs(linear_op_apply(1, m, wave, grid, sc))) < 1e-15
    assert np.allclose(linear_op_apply(0, 2, ones, grid, sc, invert=True), -1 / 9)
    with pytest.raises(SingularOperatorError):
        linear_op_apply(0, 1, ones, grid, sc, invert=True)
    with pytest.raises(ConfigurationError):
        linear_op_apply(2, 1, ones, grid, sc)


class _Frozen(ChartFlow):
    chart = 2

    def __init__(self, v2):
        self.v2 = v2

    def scalars(self, t):
        return ChartScalars(2, 1.0, self.v2, 1.0, 0.0)


def test_homogeneous_envelope_settles_on_roll_amplitude():
    grid = Grid1D(1, 8, fast=False)
    out = solve_modulation(new_modset(4, grid, {(1, 1): 0.05}), _Frozen(0.6), 40.0, 0.05)
    assert np.allclose(out[-1][1].fields[(1, 1)], math.sqrt(0.2), rtol=1e-10)


def test_static_flow_fixed_point():
    grid = Grid1D(1, 8, fast=False)
    out = solve_modulation(new_modset(4, grid, {(1, 1): 0.9}), StaticFlow(0.1), 30.0, 0.05)
    assert np.allclose(out[-1][1].fields[(1, 1)], math.sqrt(1 / 3), rtol=1e-10)


def test_chart_one_envelope_matches_scalar_ode():
    grid = Grid1D(1, 8, fast=False)
    flow = K1Flow(0.02, 0.1, 1.0)
    a0 = 0.5
    out = solve_modulation(new_modset(4, grid, {(1, 1): a0}), flow, flow.T, 0.01)
    from scipy.integrate import solve_ivp
    ref = solve_ivp(lambda t, y: (-1 + 0.5 * float(flow.eps1(t))) * y - 3 * y ** 3,
                    (0, flow.T), [a0], rtol=1e-12, atol=1e-15).y[0, -1]
    assert out[-1][0] == flow.T
    assert np.allclose(out[-1][1].fields[(1, 1)].real, ref, rtol=1e-6)


def test_chart_two_source_row_matches_linear_ode():
    grid = Grid1D(1, 8, fast=False)
    flow = K2Flow(0.1, 1.0, 1.0)
    nu1 = 0.3 - 0.2j
    out = solve_modulation(new_modset(5, grid, {}), flow, flow.T, 0.0025, nu={1: nu1})
    ref = oracles.linear_mode_ode(lambda t: float(flow.v2(t)), nu1, 0j, flow.T)
    got = out[-1][1].fields[(1, 2)]
    assert np.allclose(got, ref, rtol=1e-6)
    assert np.all(out[-1][1].fields[(1, 1)] == 0)


def test_assembly_examples():
    grid = Grid1D(2, 8, fast=False)
    fast = Grid1D(2, 64)
    x = fast.x
    psi = assemble_psi(new_modset(3, grid, {}), 0.5, fast)
    assert np.all(psi.modes == 0)
    ms = new_modset(4, grid, {(1, 1): 0.1})
    assert np.allclose(assemble_psi(ms, 1.0, fast).physical(), 0.2 * np.cos(x), atol=1e-15)
    assert np.all(assemble_psi(ms, 0.0, fast).modes == 0)
    r = 0.3
    filled = gl_graph_eval(ms, ChartScalars(2, r, 0.0, 1.0, 0.0)).values
    ms.fields = dict(filled)
    ms.fields[(1, 1)] = np.full(8, 1.0 + 0j)
    ms.fields[(-1, 1)] = np.full(8, 1.0 + 0j)
    ms.fields[(3, 1)] = np.full(8, -1 / 64 + 0j)
    ms.fields[(-3, 1)] = np.full(8, -1 / 64 + 0j)
    want = 2 * r * np.cos(x) - (2 * r ** 3 / 64) * np.cos(3 * x)
    assert np.allclose(assemble_psi(ms, r, fast).physical(), want, atol=1e-15)


def test_assembly_is_real_and_guards_grid():
    grid = Grid1D(2, 16, fast=False)
    ms = new_modset(5, grid, {(1, 1): np.exp(1j * grid.x / 2), (1, 2): 0.3})
    psi = assemble_psi(ms, 0.4, Grid1D(2, 128))
    assert is_conjugate_symmetric(psi.modes)
    assert hul_norm(psi, 0) > 0
    with pytest.raises(ConfigurationError):
        assemble_psi(ms, 0.4, Grid1D(4, 128))


def test_hierarchy_document():
    doc = hierarchy_document(4)
    assert "A[3,1] = -1/64 * A[1,1]*A[1,1]*A[1,1]" in doc
    assert "FLAG" in doc
    assert "A[0,1]" in doc and "A[2,1]" in doc


@pytest.mark.slow
def test_leading_only_residual_drops_an_order():
    cfg = ResidualConfig()
    rs = [0.08, 0.06, 0.045, 0.035]
    norms = [residual_norm(r, 5, cfg, manifold=False) for r in rs]
    assert abs(fit_scaling(rs, norms).slope - 3) <= 0.4
