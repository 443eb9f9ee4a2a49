"""INI-style run configuration.

    [physics]   eps, nu            (nu = "1:0.002, 2:0.001+0.5j")
    [sections]  rho_in, rho_mid, rho_out, zeta, K
    [grid]      periods, n_points, envelope_points, h, chart_h
    [run]       order, theta, seed, amplitude, perturbation, convention,
                stop_at, record_every, experiment, eps_list, delay

Keys given before any section header are read as [run] keys.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .charts import SectionSpec
from .hierarchy import CONVENTIONS
from .numerics import ConfigurationError, DomainError, Grid1D

COMMANDS = ("simulate", "approx", "compare", "sweep", "derive", "verify")
EXPERIMENTS = ("dynamic", "static", "mid", "delay", "residual")

_SCHEMA = {
    "physics": {"eps": float, "nu": str},
    "sections": {"rho_in": float, "rho_mid": float, "rho_out": float, "zeta": float, "K": float},
    "grid": {"periods": int, "n_points": int, "envelope_points": int, "h": float, "chart_h": float},
    "run": {"order": int, "theta": int, "seed": int, "amplitude": float, "perturbation": float,
            "convention": str, "stop_at": str, "record_every": int, "experiment": str,
            "eps_list": str, "delay": bool},
}


def parse_nu(text: str) -> dict:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            m, c = part.split(":")
            out[int(m)] = complex(c.strip().replace(" ", ""))
        except ValueError:
            raise ConfigurationError(f"cannot parse source entry {part!r}") from None
    return out


def format_nu(nu: dict) -> str:
    return ", ".join(f"{m}:{complex(c)!r}".replace("(", "").replace(")", "")
                     for m, c in sorted(nu.items()))


@dataclass
class ExperimentSpec:
    command: str = "simulate"
    eps: float = 1e-3
    nu: dict = field(default_factory=dict)
    rho_in: float = 1.0
    rho_mid: float | None = None
    rho_out: float = 0.5
    zeta: float = 0.1
    K: float = 0.1
    periods: int = 1
    n_points: int = 32
    envelope_points: int = 8
    h: float = 0.05
    chart_h: float = 0.01
    order: int = 5
    theta: int = 1
    seed: int = 0
    amplitude: float = 0.3
    perturbation: float = 0.0
    convention: str = "consistent"
    stop_at: str = "mid"
    record_every: int = 20
    experiment: str = "dynamic"
    eps_list: tuple = (4e-3, 2e-3, 1e-3, 5e-4)
    delay: bool = False
    out_dir: str = "out"

    @property
    def sections(self) -> SectionSpec:
        return SectionSpec(self.rho_in, self.rho_mid, self.rho_out, self.zeta, self.K)

    def grid(self) -> Grid1D:
        return Grid1D(self.periods, self.n_points)

    def envelope_grid(self) -> Grid1D:
        return Grid1D(self.periods, self.envelope_points, fast=False)

    def canonical(self) -> str:
        d = asdict(self)
        d.pop("out_dir")
        d.pop("command")
        d["nu"] = format_nu(self.nu)
        d["eps_list"] = list(self.eps_list)
        return json.dumps(d, sort_keys=True)

    def spec_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def validate(spec: ExperimentSpec) -> list:
    """Raise on out-of-domain values; return warnings."""
    if not 0.0 < spec.eps < 1.0:
        raise DomainError("eps must be in (0,1)")
    for e in spec.eps_list:
        if not 0.0 < e < 1.0:
            raise DomainError("eps must be in (0,1)")
    if not 4 <= spec.order <= 6:
        raise DomainError("order must be in 4..6")
    if spec.theta < 0:
        raise DomainError("theta must be a nonnegative integer")
    if spec.h <= 0 or spec.chart_h <= 0:
        raise DomainError("step sizes must be positive")
    if spec.convention not in CONVENTIONS:
        raise DomainError(f"convention must be one of {CONVENTIONS}")
    if spec.stop_at not in ("mid", "out"):
        raise DomainError("stop_at must be 'mid' or 'out'")
    if spec.experiment not in EXPERIMENTS:
        raise DomainError(f"experiment must be one of {EXPERIMENTS}")
    if not 0 <= spec.seed < 2 ** 64:
        raise DomainError("seed must be an unsigned 64-bit integer")
    if spec.command not in COMMANDS:
        raise DomainError(f"command must be one of {COMMANDS}")
    for m, c in spec.nu.items():
        if m == 0 and c.imag != 0:
            raise DomainError("nu[0] must be real")
    sec = spec.sections  # validates positivity
    spec.grid()
    spec.envelope_grid()
    if spec.eps / spec.rho_in ** 2 > spec.zeta:
        raise DomainError("eps must not exceed rho_in^2 * zeta")
    warnings = []
    if spec.delay or spec.experiment == "delay":
        omega = sec.delay_margin()
        if omega < 0.1 + 1e-12:
            msg = (f"rho_out/rho_in = {spec.rho_out / spec.rho_in:.3g}: delay margin "
                   f"omega = 1 - rho_out/rho_in is {omega:.3g}, at or below 0.1 (thin)")
            warnings.append(msg)
    return warnings


def _convert(key, typ, raw):
    try:
        if typ is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return typ(raw)
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from None


def parse_config_text(text: str, command: str = "simulate") -> ExperimentSpec:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.DuplicateSectionError:
        # an explicit [run] header after top-level keys
        cp = configparser.ConfigParser(interpolation=None, strict=False)
        cp.optionxform = str
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigurationError(str(exc)) from None
    spec = ExperimentSpec(command=command)
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigurationError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigurationError(f"unknown key '{key}' in [{section}]")
            typ = _SCHEMA[section][key]
            if key == "nu":
                spec.nu = parse_nu(raw)
            elif key == "eps_list":
                spec.eps_list = tuple(_convert(key, float, p) for p in raw.split(",") if p.strip())
            else:
                setattr(spec, key, _convert(key, typ, raw))
    return spec


def parse_config(path: str | Path | None, command: str = "simulate") -> tuple[ExperimentSpec, list]:
    text = "" if path is None else Path(path).read_text()
    spec = parse_config_text(text, command)
    return spec, validate(spec)
