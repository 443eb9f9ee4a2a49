"""Command line entry point ``turing-passage``."""
from __future__ import annotations

import json
import logging
import os
import struct
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .acceptance import run_all
from .charts import PASSAGE_COLUMNS, full_passage
from .config import ExperimentSpec, parse_config
from .hierarchy import hierarchy_document, new_modset
from .numerics import ConfigurationError, DomainError, hul_norm
from .sh import SHParams, initial_state, integrate, observe, random_band
from .validation import (delay_experiment, dynamic_error_experiment, exponential_rate,
                         mid_amplitude_check, residual_order_experiment,
                         static_error_experiment, DynamicConfig, MidConfig)

log = logging.getLogger("turing_passage")

OBS_COLUMNS = ("t", "v", "hul_norm", "max_abs", "mode1_abs")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    if x is None:
        return ""
    return str(x)


def write_csv(path: Path, columns, rows, comments=()) -> Path:
    with open(path, "w", newline="\n") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return path


def write_snapshots(path: Path, states) -> list:
    """Binary records (t, v, re0, im0, re1, im1, ...) as little-endian doubles."""
    states = list(states)
    with open(path, "wb") as fh:
        for st in states:
            modes = st.physical_field().modes
            fh.write(struct.pack("<2d", st.t, st.v))
            inter = np.empty(2 * modes.size, dtype="<f8")
            inter[0::2] = modes.real
            inter[1::2] = modes.imag
            fh.write(inter.tobytes())
    side = path.with_suffix(".json")
    grid = states[0].u.grid if states else None
    meta = {
        "format": "per record: t, v, then n_points complex Fourier coefficients as "
                  "interleaved (re, im); all float64 little-endian",
        "records": len(states),
        "n_points": grid.n_points if grid else 0,
        "periods": grid.periods if grid else 0,
        "coefficient_convention": "fft(samples) / n_points",
        "record_bytes": 8 * (2 + 2 * grid.n_points) if grid else 0,
    }
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return [path, side]


def read_snapshots(path: Path):
    meta = json.loads(Path(path).with_suffix(".json").read_text())
    n = meta["n_points"]
    raw = np.fromfile(path, dtype="<f8").reshape(meta["records"], 2 + 2 * n)
    return [(row[0], row[1], row[2::2] + 1j * row[3::2]) for row in raw]


class Run:
    """Output directory, emitted file list and manifest for one command."""

    def __init__(self, spec: ExperimentSpec, out: str | None):
        env = os.environ.get("TP_OUT_DIR")
        self.out = Path(env or out or spec.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.spec = spec
        self.files = []
        self.status = {}
        self.start = time.time()

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def add(self, paths):
        for p in paths:
            if p not in self.files:
                self.files.append(p)

    def finish(self):
        manifest = {
            "command": self.spec.command,
            "spec_hash": self.spec.spec_hash(),
            "spec": json.loads(self.spec.canonical()),
            "code_version": __version__,
            "start_wall_time": self.start,
            "end_wall_time": time.time(),
            "status": self.status,
            "files": sorted(p.name for p in self.files),
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load(config, command, seed):
    try:
        spec, warnings = parse_config(config, command)
    except (ConfigurationError, DomainError) as exc:
        raise click.ClickException(str(exc))
    if seed is not None:
        spec.seed = seed
    for w in warnings:
        click.echo(f"warning: {w}", err=True)
    return spec


def _workers(workers, members):
    if workers is None:
        workers = os.cpu_count() or 1
    return max(1, min(workers, members))


def _entry_modset(spec):
    return new_modset(spec.order, spec.envelope_grid(), {(1, 1): spec.amplitude}, chart=1)


def _passage(spec):
    return full_passage(_entry_modset(spec), spec.eps, spec.sections, spec.grid(), spec.nu,
                        stop_at=spec.stop_at, h=spec.chart_h, theta=spec.theta,
                        convention=spec.convention)


def _simulate(spec, u0=None, t_end=None):
    grid = spec.grid()
    sec = spec.sections
    if u0 is None:
        u0 = _passage(spec).fields["in"]
        if spec.perturbation > 0:
            u0 = u0 + random_band(grid, spec.perturbation, spec.seed)
    params = SHParams(eps=spec.eps, grid=grid, nu=spec.nu)
    if t_end is None:
        t_end = sec.t_out(spec.eps) if spec.stop_at == "out" else sec.t_mid(spec.eps)
    v_mid = sec.rho_mid * spec.eps ** 0.5
    sections = [-sec.rho_in, v_mid] + ([sec.rho_out] if spec.stop_at == "out" else [])
    track = not params.has_source
    return integrate(initial_state(u0, -sec.rho_in, spec.eps), params, t_end, spec.h,
                     sections, record_every=spec.record_every, theta=spec.theta,
                     track_log=track)


def _common(fn):
    fn = click.option("--config", "config", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="INI configuration file")(fn)
    fn = click.option("--out", default=None, help="output directory (TP_OUT_DIR overrides)")(fn)
    fn = click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None)(fn)
    fn = click.option("--workers", type=click.IntRange(1, None), default=None)(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    """Slow passage through a Turing bifurcation in the Swift-Hohenberg equation."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@_common
def simulate(config, out, seed, workers):
    """Run the SH solver from the entry section and record observables."""
    spec = _load(config, "simulate", seed)
    run = Run(spec, out)
    tr = _simulate(spec)
    rows = [[o[c] for c in OBS_COLUMNS] for o in tr.observables]
    write_csv(run.path("observables.csv"), OBS_COLUMNS, rows)
    sec_rows = []
    for v in sorted(tr.sections):
        o = observe(tr.sections[v], spec.theta)
        sec_rows.append([v] + [o[c] for c in OBS_COLUMNS])
    write_csv(run.path("sections.csv"), ("section_v",) + OBS_COLUMNS, sec_rows)
    states = [tr.sections[v] for v in sorted(tr.sections)]
    run.add(write_snapshots(run.out / "snapshots.bin", states))
    write_csv(run.path("plot_norm_vs_v.csv"), ("x", "y"),
              [[o["v"], o["hul_norm"]] for o in tr.observables])
    run.status["simulate"] = "ok"
    run.finish()
    click.echo(f"wrote {len(rows)} observable rows to {run.out}")


@main.command()
@_common
def approx(config, out, seed, workers):
    """Run the envelope approximation through the charts."""
    spec = _load(config, "approx", seed)
    run = Run(spec, out)
    rec = _passage(spec)
    write_csv(run.path("passage.csv"), PASSAGE_COLUMNS, [r.as_tuple() for r in rec.rows])
    write_csv(run.path("plot_passage.csv"), ("x", "y"),
              [[r.v, r.norm_theta] for r in rec.rows])
    run.status["approx"] = "ok"
    run.finish()
    click.echo(f"passage rows: {len(rec.rows)} -> {run.out}")


@main.command()
@_common
def compare(config, out, seed, workers):
    """Compare SH and the approximation at the passage sections."""
    spec = _load(config, "compare", seed)
    run = Run(spec, out)
    rec = _passage(spec)
    u0 = rec.fields["in"]
    if spec.perturbation > 0:
        u0 = u0 + random_band(spec.grid(), spec.perturbation, spec.seed)
    tr = _simulate(spec, u0=u0, t_end=rec.total_time)
    final = tr.states[-1].physical_field()
    rows = []
    for r in rec.rows:
        if r.section == "in":
            u = u0
        elif r.section == rec.rows[-1].section:
            u = final
        else:
            continue
        psi = rec.fields[r.section]
        rows.append([r.section, r.t_global, r.v, hul_norm(u, spec.theta),
                     hul_norm(psi, spec.theta), hul_norm(u - psi, spec.theta)])
    write_csv(run.path("compare.csv"), ("section", "t", "v", "norm_u", "norm_psi", "error"), rows)
    run.status["compare"] = "ok"
    run.finish()
    for row in rows:
        click.echo(f"{row[0]}: error {row[5]:.6g}")


_CLAIMS = {
    "dynamic": "error at the mid section scales like eps^((n-2)/4)",
    "static": "static GL error scales at least like delta^(3/2); order-n error like delta^(n-2)",
    "mid": "mode-1 amplitude at the mid section is of size eps^(1/2) when nu_1 != 0",
    "delay": "loss of stability is delayed to v = rho_in (symmetric crossing)",
    "residual": "residual of the order-n approximation scales like r^n",
}


@main.command()
@_common
def sweep(config, out, seed, workers):
    """Run one validation experiment over a parameter list."""
    spec = _load(config, "sweep", seed)
    run = Run(spec, out)
    exp = spec.experiment
    lst = list(spec.eps_list)
    k = _workers(workers, len(lst))
    claim = f"claim: {_CLAIMS[exp]}"
    name = f"sweep_{exp}.csv"
    if exp == "dynamic":
        cfg = DynamicConfig(sections=spec.sections, fast_points=spec.n_points,
                            envelope_points=spec.envelope_points, amplitude=spec.amplitude,
                            nu1=spec.nu.get(1, 0.0), perturbation=spec.perturbation,
                            h=spec.h, chart_h=spec.chart_h, theta=spec.theta,
                            convention=spec.convention)
        res = dynamic_error_experiment(lst, spec.order, seeds=(spec.seed,), cfg=cfg, workers=k)
        f = res.fit
        write_csv(run.path(name), ("eps", "n", "seed", "t_mid", "error", "norm_u", "norm_psi"),
                  [[r.eps, r.n, r.seed, r.t_mid, r.error, r.norm_u, r.norm_psi] for r in res.rows],
                  [claim, f"fit: slope={f.slope!r} intercept={f.intercept!r} residual={f.residual!r}"])
        plot = [[r.eps, r.error] for r in res.rows]
    elif exp == "static":
        res = static_error_experiment(lst, spec.order, workers=k)
        write_csv(run.path(name), ("delta", "gl_error", "ansatz_error"),
                  list(zip(res.deltas, res.gl_errors, res.ansatz_errors)),
                  [claim, f"fit GL: slope={res.gl_fit.slope!r} residual={res.gl_fit.residual!r}",
                   f"fit order n: slope={res.ansatz_fit.slope!r} residual={res.ansatz_fit.residual!r}"])
        plot = list(zip(res.deltas, res.ansatz_errors))
    elif exp == "mid":
        cfg = MidConfig(sections=spec.sections, fast_points=spec.n_points, h=spec.h,
                        convention=spec.convention, nu2=spec.nu.get(2, 0.0))
        rows = mid_amplitude_check(lst, spec.nu.get(1, 0.0), cfg, workers=k)
        comments = [claim]
        if spec.nu.get(1, 0.0) == 0:
            kappa, c = exponential_rate(rows, spec.rho_in)
            comments.append(f"fit: log mode1 = c - kappa rho_in^2 / (2 eps), kappa={kappa!r} c={c!r}")
        write_csv(run.path(name), ("eps", "mode1", "log_mode1", "ratio", "log_ratio",
                                   "predicted_ratio"),
                  [[r.eps, r.mode1, r.log_mode1, r.ratio, r.log_ratio, r.predicted_ratio]
                   for r in rows], comments)
        plot = [[r.eps, r.ratio] for r in rows]
    elif exp == "delay":
        recs = delay_experiment(lst, spec.rho_in, mode="full", workers=k)
        write_csv(run.path(name), ("eps", "rho_in", "threshold", "v_exit", "censored",
                                   "kappa_minus", "kappa_plus"),
                  [[r.eps, r.rho_in, r.threshold, r.v_exit, r.censored, r.kappa_minus,
                    r.kappa_plus] for r in recs], [claim])
        plot = [[v, lg] for r in recs for v, lg in zip(r.trace_v, r.trace_log)]
    else:
        fit = residual_order_experiment(lst, spec.order)
        write_csv(run.path(name), ("r", "residual"), list(zip(fit.abscissa, fit.ordinate)),
                  [claim, f"fit: slope={fit.slope!r} residual={fit.residual!r}"])
        plot = list(zip(fit.abscissa, fit.ordinate))
    write_csv(run.path(f"plot_{exp}.csv"), ("x", "y"), plot)
    run.status[exp] = "ok"
    run.finish()
    click.echo(f"{exp} sweep over {len(lst)} values -> {run.out}")


@main.command()
@_common
@click.option("--order", "order_", type=click.IntRange(4, 6), default=None)
@click.option("--convention", type=click.Choice(["consistent", "printed"]), default=None)
def derive(config, out, seed, workers, order_, convention):
    """Print the envelope equations of the requested order."""
    spec = _load(config, "derive", seed)
    n = order_ or spec.order
    doc = hierarchy_document(n, convention or spec.convention)
    run = Run(spec, out)
    run.path(f"hierarchy_n{n}.txt").write_text(doc)
    run.status["derive"] = "ok"
    run.finish()
    click.echo(doc, nl=False)


@main.command()
@_common
@click.option("--only", default=None, help="comma separated criterion numbers")
def verify(config, out, seed, workers, only):
    """Run the acceptance checks and print a PASS/FAIL table."""
    spec = _load(config, "verify", seed)
    run = Run(spec, out)
    select = {int(s) for s in only.split(",")} if only else None
    checks = run_all(workers=_workers(workers, 4), select=select, echo=click.echo)
    write_csv(run.path("verify.csv"), ("criterion", "name", "passed", "detail"),
              [[c.number, c.name, c.passed, c.detail.replace(",", ";")] for c in checks])
    run.status.update({str(c.number): "pass" if c.passed else "fail" for c in checks})
    run.finish()
    n_fail = sum(not c.passed for c in checks)
    click.echo(f"{len(checks) - n_fail}/{len(checks)} criteria passed")
    sys.exit(1 if n_fail else 0)


if __name__ == "__main__":  # pragma: no cover
    main()
