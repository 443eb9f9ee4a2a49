"""Modulation hierarchy for the blown-up ansatz

    Psi_n = sum_{m, j} r^(alpha(m) + j) A_mj exp(i m x),

with alpha(m) = ||m| - 1|.  Envelopes at |m| = 1 (critical) evolve by
Ginzburg-Landau type equations; all others are slaved through algebraic
relations solved level by level in the power of r.

Envelopes are stored as complex samples against the physical coordinate x
on a coarse grid spanning the same periodic domain as the pattern field.
Slow derivatives are then d/dx_l = r^-1 d/dx, which keeps the envelope
grid fixed while r changes along a chart flow.

Bookkeeping conventions used throughout:

* The power of r carried by A_mj is ``order(m, j) = alpha(m) + j``.
* The equation that determines A_mj sits at power ``order`` for |m| != 1
  (algebraic) and at power ``order + 2`` for |m| = 1 (evolution).  The
  cubic coefficient a_mj is the coefficient of that power in Psi^3.
* A term r^e A in Psi contributes r^(e+2) (dA/dt_l + e * rho * A) to the
  time derivative, where rho = r^-1 dr/dt_l.  ``convention="consistent"``
  uses this weight e; ``convention="printed"`` uses weight 1 for every
  field (and a plus sign on the first critical row in chart 3), which is
  an alternative unit-weight form of these equations.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Callable, Mapping, Sequence

import numpy as np

from .numerics import (ConfigurationError, DomainError, Grid1D, SpectralField,
                       phi1, symmetrize)

CONVENTIONS = ("consistent", "printed")
MAX_ORDER = 6


class SingularOperatorError(ValueError):
    """The zeroth order operator vanishes at |m| = 1 and cannot be inverted."""


def alpha(m: int) -> int:
    return abs(abs(m) - 1)


def tilde_alpha(m: int, N: int) -> int:
    return N - alpha(m) - 2 * (abs(m) == 1)


def is_critical(m: int) -> bool:
    return abs(m) == 1


def order(m: int, j: int) -> int:
    return alpha(m) + j


def equation_order(m: int, j: int) -> int:
    return order(m, j) + (2 if is_critical(m) else 0)


@lru_cache(maxsize=None)
def mode_indices(N: int) -> tuple:
    """All (m, j) in the truncated ansatz of order n = N + 1."""
    out = []
    for m in range(-N, N + 1):
        for j in range(1, tilde_alpha(m, N) + 1):
            out.append((m, j))
    return tuple(sorted(out))


def index_at(m: int, e: int, N: int):
    """The index (m, j) whose field carries power e, or None."""
    j = e - alpha(m)
    if 1 <= j <= tilde_alpha(m, N):
        return (m, j)
    return None


@dataclass(frozen=True)
class CubicTerm:
    factors: tuple
    multiplicity: int

    def evaluate(self, fields: Mapping) -> np.ndarray:
        a, b, c = self.factors
        return self.multiplicity * fields[a] * fields[b] * fields[c]

    def derivative(self, fields: Mapping, dfields: Mapping) -> np.ndarray:
        a, b, c = self.factors
        return self.multiplicity * (dfields[a] * fields[b] * fields[c]
                                    + fields[a] * dfields[b] * fields[c]
                                    + fields[a] * fields[b] * dfields[c])

    def label(self) -> str:
        return "*".join(f"A[{m},{j}]" for m, j in self.factors)


@lru_cache(maxsize=None)
def cubic_terms_at(m: int, power: int, N: int) -> tuple:
    """Monomials of Psi^3 at r^power exp(imx), with multinomial counts."""
    terms = []
    for combo in combinations_with_replacement(mode_indices(N), 3):
        if sum(f[0] for f in combo) != m:
            continue
        if sum(order(*f) for f in combo) != power:
            continue
        counts = Counter(combo)
        mult = 6
        for c in counts.values():
            mult //= math.factorial(c)
        terms.append(CubicTerm(tuple(combo), mult))
    return tuple(terms)


def enumerate_cubic(m: int, j: int, N: int) -> list:
    """Terms of a_mj: the Psi^3 coefficient in the equation fixing A_mj."""
    if not 1 <= j <= tilde_alpha(m, N) or abs(m) > N:
        raise ConfigurationError(f"({m},{j}) is not a mode index for N={N}")
    return list(cubic_terms_at(m, equation_order(m, j), N))


def evaluate_cubic(terms: Sequence[CubicTerm], fields: Mapping, shape) -> np.ndarray:
    total = np.zeros(shape, dtype=complex)
    for t in terms:
        total = total + t.evaluate(fields)
    return total


# ---------------------------------------------------------------------------
# linear operators

def l0(m: int) -> float:
    return -float((1 - m * m) ** 2)


def operator_symbol(i: int, m: int, dsym: np.ndarray) -> np.ndarray:
    """Symbol of the i-th spatial operator at mode m; dsym is the slow d/dx."""
    if i == 0:
        return np.full(dsym.shape, l0(m), dtype=complex)
    if i == 1:
        return -4j * m * (1 - m * m) * dsym
    if i == 2:
        return -2.0 * (1 - 3 * m * m) * dsym ** 2
    if i == 3:
        return -4j * m * dsym ** 3
    if i == 4:
        return -(dsym ** 4)
    raise ConfigurationError("operator index must be 0..4")


@dataclass(frozen=True)
class ChartScalars:
    """Base-flow values seen by the envelope equations in one chart.

    r: blow-up radius; vbar, epsbar: blown-up parameter and drift rate;
    rho: r^-1 dr/dt_l along the chart flow.
    """

    chart: int
    r: float
    vbar: float
    epsbar: float
    rho: float


def drift_weight(e: int, convention: str) -> int:
    if convention == "consistent":
        return e
    if convention == "printed":
        return 1
    raise ConfigurationError(f"unknown convention {convention!r}")


def critical_damping(j: int, scalars: ChartScalars, convention: str) -> float:
    """Scalar part vbar - w * rho of the linear operator on A_{1,j}."""
    if convention == "printed" and scalars.chart == 3 and j == 1:
        return scalars.vbar + scalars.rho
    return scalars.vbar - drift_weight(j, convention) * scalars.rho


class EnvelopeOps:
    """Spectral calculus on an envelope grid."""

    def __init__(self, grid: Grid1D):
        self.grid = grid
        self.k = grid.k
        self.n = grid.n_points

    def dsym(self, r: float) -> np.ndarray:
        return 1j * self.k / r

    def fft(self, a: np.ndarray) -> np.ndarray:
        return np.fft.fft(a)

    def ifft(self, a: np.ndarray) -> np.ndarray:
        return np.fft.ifft(a)


def linear_op_apply(i: int, m: int, f: np.ndarray, grid: Grid1D, scalars: ChartScalars,
                    dfdt: np.ndarray | None = None, weight: int = 1,
                    invert: bool = False) -> np.ndarray:
    """Apply L^(i) at mode m to samples f (i = 2 means the full tilde operator)."""
    if i == 0 and invert:
        if is_critical(m):
            raise SingularOperatorError("L0 vanishes at |m| = 1")
        return f / l0(m)
    ops = EnvelopeOps(grid)
    sym = operator_symbol(i, m, ops.dsym(scalars.r))
    out = ops.ifft(sym * ops.fft(f))
    if i == 2:
        if dfdt is None:
            raise ConfigurationError("the tilde operator needs the time derivative of f")
        out = out - dfdt - weight * scalars.rho * f + scalars.vbar * f
    return out


# ---------------------------------------------------------------------------
# modulation sets

@dataclass
class ModulationSet:
    n: int
    grid: Grid1D
    fields: dict
    chart: int = 0

    @property
    def N(self) -> int:
        return self.n - 1

    def critical(self) -> dict:
        return {(m, j): a for (m, j), a in self.fields.items() if m == 1}

    def copy(self) -> "ModulationSet":
        return ModulationSet(self.n, self.grid, {k: v.copy() for k, v in self.fields.items()}, self.chart)


def critical_indices(N: int) -> list:
    return [(1, j) for j in range(1, N - 1)]


def new_modset(n: int, grid: Grid1D, critical: Mapping, chart: int = 0) -> ModulationSet:
    """Modulation set with the given critical fields A_{1,j}; others zero."""
    if not 3 <= n <= MAX_ORDER:
        raise ConfigurationError(f"order n must lie in 3..{MAX_ORDER}")
    N = n - 1
    fields = {}
    for idx in mode_indices(N):
        fields[idx] = np.zeros(grid.n_points, dtype=complex)
    for (m, j), a in critical.items():
        if m != 1 or not 1 <= j <= N - 2:
            raise ConfigurationError(f"({m},{j}) is not a critical index for n={n}")
        arr = np.broadcast_to(np.asarray(a, dtype=complex), (grid.n_points,)).copy()
        fields[(1, j)] = arr
        fields[(-1, j)] = np.conj(arr)
    return ModulationSet(n, grid, fields, chart)


def _with_pairs(values: dict) -> dict:
    out = dict(values)
    for (m, j), a in values.items():
        if m > 0:
            out[(-m, j)] = np.conj(a)
    return out


@dataclass
class GraphEvaluation:
    values: dict
    derivatives: dict


def gl_graph_eval(modset: ModulationSet, scalars: ChartScalars,
                  nu: Mapping[int, complex] | None = None,
                  convention: str = "consistent",
                  max_power: int | None = None) -> GraphEvaluation:
    """Fill every non-critical envelope from the critical ones.

    Works upward in the power of r.  Time derivatives that enter through
    the tilde operator are obtained by substituting the evolution right-hand
    side of the critical fields and differentiating the lower algebraic
    relations once (forward tangent sweep).
    """
    nu = dict(nu or {})
    N = modset.N
    grid = modset.grid
    shape = (grid.n_points,)
    zero = np.zeros(shape, dtype=complex)
    top = N if max_power is None else min(N, max_power)
    ops = EnvelopeOps(grid)
    dsym = ops.dsym(scalars.r)

    values = {}
    derivs = {}
    for (m, j), a in modset.fields.items():
        if is_critical(m):
            values[(m, j)] = a
    for idx in mode_indices(N):
        values.setdefault(idx, zero)

    hats = {}

    def hat(idx):
        if idx not in hats:
            hats[idx] = ops.fft(values[idx])
        return hats[idx]

    def dhat(idx):
        key = ("d",) + idx
        if key not in hats:
            hats[key] = ops.fft(derivs[idx])
        return hats[key]

    for e in range(1, top + 1):
        # (a) algebraic fields at power e
        for m in range(0, N + 1):
            if is_critical(m):
                continue
            idx = index_at(m, e, N)
            if idx is None:
                continue
            spec = np.zeros(shape, dtype=complex)
            extra = np.zeros(shape, dtype=complex)
            for i in (1, 3, 4):
                low = index_at(m, e - i, N)
                if low is not None:
                    spec += operator_symbol(i, m, dsym) * hat(low)
            low2 = index_at(m, e - 2, N)
            if low2 is not None:
                spec += operator_symbol(2, m, dsym) * hat(low2)
                w = drift_weight(e - 2, convention)
                extra += -derivs[low2] - w * scalars.rho * values[low2] + scalars.vbar * values[low2]
            total = ops.ifft(spec) + extra
            total -= evaluate_cubic(cubic_terms_at(m, e, N), values, shape)
            if e == 4:
                total += scalars.epsbar * nu.get(m, 0.0)
            a = -total / l0(m)
            if m == 0:
                a = a.real.astype(complex)
            values[idx] = a
            if m > 0:
                values[(-m, idx[1])] = np.conj(a)
        # (b) time derivative of the critical field at power e
        if e <= N - 2:
            rhs = critical_rhs(e, values, scalars, nu, convention, N, ops, hat)
            derivs[(1, e)] = rhs
            derivs[(-1, e)] = np.conj(rhs)
        # (c) time derivatives of algebraic fields at power e
        if e <= N - 2:
            for m in range(0, N + 1):
                if is_critical(m):
                    continue
                idx = index_at(m, e, N)
                if idx is None:
                    continue
                if index_at(m, e - 2, N) is not None or e == 4:
                    raise NotImplementedError("second time derivatives are not supported (n > 6)")
                spec = np.zeros(shape, dtype=complex)
                for i in (1, 3, 4):
                    low = index_at(m, e - i, N)
                    if low is not None:
                        spec += operator_symbol(i, m, dsym) * dhat(low)
                total = ops.ifft(spec)
                for term in cubic_terms_at(m, e, N):
                    total -= term.derivative(values, derivs)
                da = -total / l0(m)
                if m == 0:
                    da = da.real.astype(complex)
                derivs[idx] = da
                if m > 0:
                    derivs[(-m, idx[1])] = np.conj(da)
    return GraphEvaluation(values, derivs)


def critical_rhs(j: int, values: Mapping, scalars: ChartScalars, nu: Mapping,
                 convention: str, N: int, ops: EnvelopeOps, hat: Callable) -> np.ndarray:
    shape = values[(1, j)].shape
    dsym = ops.dsym(scalars.r)
    spec = operator_symbol(2, 1, dsym) * hat((1, j))
    if j >= 2:
        spec = spec + operator_symbol(3, 1, dsym) * hat((1, j - 1))
    if j >= 3:
        spec = spec + operator_symbol(4, 1, dsym) * hat((1, j - 2))
    out = ops.ifft(spec) + critical_damping(j, scalars, convention) * values[(1, j)]
    out = out - evaluate_cubic(cubic_terms_at(1, j + 2, N), values, shape)
    if j == 2:
        out = out + scalars.epsbar * nu.get(1, 0.0)
    return out


def modulation_rhs(modset: ModulationSet, scalars: ChartScalars,
                   nu: Mapping[int, complex] | None = None,
                   convention: str = "consistent") -> dict:
    """d/dt_l of A_{1,j}, j = 1..N-2 (the -1 partners are conjugates)."""
    N = modset.N
    ev = gl_graph_eval(modset, scalars, nu, convention, max_power=N - 2)
    return {(1, j): ev.derivatives[(1, j)] for j in range(1, N - 1)}


def fill_graph(modset: ModulationSet, scalars: ChartScalars,
               nu: Mapping[int, complex] | None = None,
               convention: str = "consistent") -> ModulationSet:
    ev = gl_graph_eval(modset, scalars, nu, convention)
    return ModulationSet(modset.n, modset.grid, dict(ev.values), modset.chart)


# ---------------------------------------------------------------------------
# time stepping of the critical cascade

class ChartFlow:
    """Interface: a base flow in one chart, evaluated in closed form."""

    chart: int = 0

    def scalars(self, t: float) -> ChartScalars:  # pragma: no cover - interface
        raise NotImplementedError


class ModulationFailure(RuntimeError):
    pass


def _linear_symbols(ops: EnvelopeOps, scalars: ChartScalars, N: int, convention: str) -> dict:
    lap = -4.0 * ops.k ** 2 / scalars.r ** 2
    return {j: lap + critical_damping(j, scalars, convention) for j in range(1, N - 1)}


def solve_modulation(modset0: ModulationSet, flow: ChartFlow, T: float, h: float,
                     nu: Mapping[int, complex] | None = None,
                     convention: str = "consistent",
                     record_every: int | None = None,
                     record_times: Sequence[float] | None = None) -> list:
    """Exponential midpoint integration of the critical envelopes over [0, T].

    Returns a list of (t, ModulationSet) with non-critical entries filled.
    The last entry is always at t = T.
    """
    if T < 0:
        raise DomainError("horizon must be nonnegative")
    if h <= 0:
        raise DomainError("step must be positive")
    N = modset0.N
    ops = EnvelopeOps(modset0.grid)
    crit = [(1, j) for j in range(1, N - 1)]
    state = {idx: ops.fft(modset0.fields[idx]) for idx in crit}

    def to_set(st: dict) -> ModulationSet:
        critical = {idx: ops.ifft(a) for idx, a in st.items()}
        return new_modset(modset0.n, modset0.grid, critical, modset0.chart)

    def nonlinear(st: dict, t: float, symbols: dict) -> dict:
        sc = flow.scalars(t)
        rhs = modulation_rhs(to_set(st), sc, nu, convention)
        return {idx: ops.fft(rhs[idx]) - symbols[idx[1]] * st[idx] for idx in crit}

    def record(st, t):
        out.append((t, fill_graph(to_set(st), flow.scalars(t), nu, convention)))

    out = []
    stops = sorted(set([float(x) for x in (record_times or []) if 0.0 <= x <= T] + [T]))
    t = 0.0
    if record_every or (record_times and 0.0 in stops):
        record(state, t)
    n_steps = 0
    for target in stops:
        while t < target - 1e-12 * max(1.0, target):
            dt = min(h, target - t)
            s0 = flow.scalars(t)
            sym0 = _linear_symbols(ops, s0, N, convention)
            n0 = nonlinear(state, t, sym0)
            sq = flow.scalars(t + dt / 4)
            symq = _linear_symbols(ops, sq, N, convention)
            half = {}
            for idx in crit:
                z = symq[idx[1]] * (dt / 2)
                half[idx] = np.exp(z) * state[idx] + (dt / 2) * phi1(z) * n0[idx]
            tm = t + dt / 2
            symm = _linear_symbols(ops, flow.scalars(tm), N, convention)
            nm = nonlinear(half, tm, symm)
            new = {}
            for idx in crit:
                z = symm[idx[1]] * dt
                new[idx] = np.exp(z) * state[idx] + dt * phi1(z) * nm[idx]
                if not np.all(np.isfinite(new[idx])):
                    raise ModulationFailure(f"non-finite envelope at t={t:.6g}")
            state = new
            t = t + dt
            if abs(t - target) <= 1e-12 * max(1.0, target):
                t = target
            n_steps += 1
            if record_every and n_steps % record_every == 0 and t != target:
                record(state, t)
        if record_times is not None or record_every or target == T:
            if not out or out[-1][0] != t:
                record(state, t)
    return out


# ---------------------------------------------------------------------------
# assembly

def assemble_psi(modset: ModulationSet, r: float, fast_grid: Grid1D) -> SpectralField:
    """Psi = sum r^order * A_mj(x) exp(imx) on the fast grid (real)."""
    if r < 0:
        raise DomainError("r must be nonnegative")
    env = modset.grid
    if env.periods != fast_grid.periods:
        raise ConfigurationError("envelope and pattern grids must span the same domain")
    P = fast_grid.periods
    M = env.n_points
    n = fast_grid.n_points
    out = np.zeros(n, dtype=complex)
    if r == 0.0:
        return SpectralField(fast_grid, out)
    jidx = env.index
    keep = np.abs(jidx) < M // 2  # drop the envelope Nyquist mode
    for (m, j), a in modset.fields.items():
        if not np.any(a):
            continue
        coeff = np.fft.fft(a) / M
        q = jidx[keep] + m * P
        if np.any(np.abs(q) >= n // 2):
            raise ConfigurationError("pattern grid too coarse for the assembled modes")
        np.add.at(out, q % n, r ** order(m, j) * coeff[keep])
    return SpectralField(fast_grid, symmetrize(out))


def scale_envelopes(modset: ModulationSet, factor_of_order: Callable[[int], float],
                    chart: int) -> ModulationSet:
    fields = {idx: factor_of_order(order(*idx)) * a for idx, a in modset.fields.items()}
    return ModulationSet(modset.n, modset.grid, fields, chart)


# ---------------------------------------------------------------------------
# human-readable hierarchy

def _fmt_coeff(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def hierarchy_document(n: int, convention: str = "consistent") -> str:
    """Text description of the truncated hierarchy of order n."""
    N = n - 1
    lines = [f"# modulation hierarchy, order n = {n} (N = {N})",
             f"# convention: {convention}",
             "# power(A[m,j]) = ||m|-1| + j ; critical fields A[+-1,j], j <= N-2",
             ""]
    lines.append("## critical evolution equations (per chart: rho = r^-1 dr/dt)")
    for j in range(1, N - 1):
        terms = cubic_terms_at(1, j + 2, N)
        cubic = " + ".join(f"{t.multiplicity}*{t.label()}" for t in terms) or "0"
        stencil = f"4*D^2 A[1,{j}] + (vbar - {drift_weight(j, convention)}*rho) A[1,{j}]"
        if j >= 2:
            stencil += f" - 4i*D^3 A[1,{j - 1}]"
        if j >= 3:
            stencil += f" - D^4 A[1,{j - 2}]"
        src = " + epsbar*nu[1]" if j == 2 else ""
        lines.append(f"d/dt A[1,{j}] = {stencil} - ({cubic}){src}")
        lines.append(f"  cubic terms a[1,{j}]: " + "; ".join(
            f"({t.multiplicity}) {t.label()}" for t in terms))
    lines.append("")
    lines.append("## chart damping of the critical rows")
    for chart, (vbar, rho) in {1: ("-1", "-eps1/2"), 2: ("v2", "0"), 3: ("1", "+eps3/2")}.items():
        for conv in CONVENTIONS:
            rows = []
            for j in range(1, N - 1):
                if conv == "printed" and chart == 3 and j == 1:
                    rows.append(f"j={j}: 1 + eps3/2")
                elif chart == 2:
                    rows.append(f"j={j}: v2")
                else:
                    w = drift_weight(j, conv)
                    sign = "+" if chart == 1 else "-"
                    var = "eps1" if chart == 1 else "eps3"
                    rows.append(f"j={j}: {vbar} {sign} {w}*{var}/2")
            lines.append(f"chart {chart} [{conv}]: " + ", ".join(rows))
    if N - 2 >= 2:
        lines.append("FLAG: in chart 3 the printed first row carries 1 + eps3/2 while "
                     "the printed higher rows carry 1 - eps3/2; the consistent weighting "
                     "gives 1 - j*eps3/2 on row j.")
    else:
        lines.append("FLAG: in chart 3 the printed first row carries 1 + eps3/2; "
                     "the consistent weighting gives 1 - eps3/2.")
    lines.append("")
    lines.append("## algebraic (slaved) fields, A[m,j] = -(1/L0)(sum_i L_i A[m,j-i] - a[m,j] + source)")
    for (m, j) in mode_indices(N):
        if m < 0 or is_critical(m):
            continue
        e = order(m, j)
        terms = cubic_terms_at(m, e, N)
        L0 = Fraction(-(1 - m * m) ** 2)
        parts = []
        for i in (1, 2, 3, 4):
            low = index_at(m, e - i, N)
            if low is not None and not (m == 0 and i in (1, 3)):
                parts.append(f"L{i}[m={m}] A[{low[0]},{low[1]}]")
        src = f" + epsbar*nu[{m}]" if e == 4 else ""
        lines.append(f"A[{m},{j}] (power {e}, L0 = {_fmt_coeff(L0)}): "
                     f"{' + '.join(parts) or '0'} ; cubic: "
                     + ("; ".join(f"({t.multiplicity}) {t.label()}" for t in terms) or "none")
                     + src)
        # closed form when the only contribution is a single cubic monomial
        if not parts and not src and len(terms) == 1:
            c = Fraction(terms[0].multiplicity) / L0
            lines.append(f"  => A[{m},{j}] = {_fmt_coeff(c)} * {terms[0].label()}")
        elif not parts and not src and not terms:
            lines.append(f"  => A[{m},{j}] = 0")
    lines.append("")
    return "\n".join(lines)
