"""Command-line front end: ``qmengine {sweep,cycle,axioms,lindblad}``.

Configuration is a plain text file of ``key = value`` lines (``#`` starts a
comment); ``--set key=value`` overrides individual keys. Numbers may be
written as fractions, e.g. ``beta_e_p = 1/30``.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Iterable, TextIO

import numpy as np

from qmengine.engine import SwapRule
from qmengine.measurement import OutcomeProjectors, Scheme, axiom_report, build_u_corr, correlate
from qmengine.model import DensityOp, SpecError, purity_to_beta, thermal_state, build_h_loc
from qmengine.scenario import (
    DIMS,
    ENGINES,
    I01,
    I10,
    NthMode,
    SweepRow,
    TcmeBathConfig,
    TwoQubitConfig,
    engine_states,
    evaluate_point,
    lindblad_evolve,
    sweep,
    tcme_state,
)

CSV_HEADER = ("scheme", "engine", "P", "beta_prime", "E_prep", "E_cool", "E_corr", "W",
              "E_reset", "E_reset_clamped", "E_meas", "eta", "C_max", "error")
LEDGER_COLUMNS = ("e_prep", "e_cool", "e_corr", "w", "e_reset", "e_reset_clamped", "e_meas",
                  "eta", "c_max")
LINDBLAD_HEADER = ("t", "p00", "p01", "p10", "p11", "coh", "trace")

ENGINE_CHOICES = ("eme", "tcme", "both")
START_CHOICES = ("gibbs", "fixed_point", "tcme", "eme")


class ConfigError(ValueError):
    def __init__(self, key: str, constraint: str):
        super().__init__(f"config key '{key}': {constraint}")
        self.key = key


@dataclass
class RunConfig:
    omega_a: float = 10.0
    delta: float = 50.0
    theta_over_pi: float = 0.2
    q: float = 0.05
    beta_e_p: float = 1.0 / 30.0
    e_p: float = 1.0
    n_th_mode: str = NthMode.MATCH_EME.value
    gamma: float = 1.0
    gamma_prime: float = 1.0
    engine: str = "both"
    scheme: str = Scheme.NONINVASIVE.value
    swap_rule: str = SwapRule.RAW_INDEX.value
    p_min: float = 0.501
    p_max: float = 0.999
    p_steps: int = 499
    p: float = 0.9
    output: str = ""
    rk4_dt: float = 1e-3
    rk4_tmax: float = 10.0
    sample_every: int = 100
    lindblad_start: str = "gibbs"

    @property
    def beta(self) -> float:
        return self.beta_e_p / self.e_p

    def two_qubit(self) -> TwoQubitConfig:
        return TwoQubitConfig(
            omega_a=self.omega_a,
            delta=self.delta,
            theta=self.theta_over_pi * math.pi,
            q=self.q,
            beta=self.beta,
            e_p=self.e_p,
            scheme=Scheme(self.scheme),
            swap_rule=SwapRule(self.swap_rule),
        )

    def bath(self) -> TcmeBathConfig:
        return TcmeBathConfig(NthMode(self.n_th_mode), self.gamma, self.gamma_prime)

    def engines(self) -> tuple[str, ...]:
        return ENGINES if self.engine == "both" else (self.engine,)

    def p_grid(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.p_steps)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CHOICES = {
    "n_th_mode": tuple(m.value for m in NthMode),
    "engine": ENGINE_CHOICES,
    "scheme": tuple(s.value for s in Scheme),
    "swap_rule": tuple(r.value for r in SwapRule),
    "lindblad_start": START_CHOICES,
}


def _parse_number(key: str, text: str) -> float:
    try:
        value = float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(key, f"cannot parse number {text.strip()!r}") from None
    return value


def _set_value(values: dict, key: str, raw: str) -> None:
    key = key.strip()
    if key not in _FIELD_TYPES:
        raise ConfigError(key, "unknown key")
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind == "float":
        values[key] = _parse_number(key, raw)
    elif kind == "int":
        x = _parse_number(key, raw)
        if x != int(x):
            raise ConfigError(key, f"expected an integer, got {raw!r}")
        values[key] = int(x)
    else:
        if key in _CHOICES and raw not in _CHOICES[key]:
            raise ConfigError(key, f"must be one of {', '.join(_CHOICES[key])}; got {raw!r}")
        values[key] = raw


def parse_config(text: str, overrides: Iterable[str] = ()) -> RunConfig:
    """Parse and validate configuration text; defaults are the reference two-qubit settings."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"<line {lineno}>", f"expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        _set_value(values, key, raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        _set_value(values, key, raw)
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def _require(ok: bool, key: str, constraint: str) -> None:
    if not ok:
        raise ConfigError(key, constraint)


def validate_config(cfg: RunConfig) -> None:
    _require(0 < cfg.q <= 1, "q", "must lie in (0, 1] (full-rank invariant of the initial state)")
    _require(cfg.delta > 0, "delta", "must be > 0 (positive detuning, ordering constraint)")
    _require(cfg.omega_a >= 0, "omega_a", "must be >= 0 (ordering constraint)")
    _require(0 <= cfg.theta_over_pi < 0.5, "theta_over_pi", "must lie in [0, 0.5)")
    _require(cfg.e_p > 0, "e_p", "pointer gap must be > 0")
    _require(cfg.beta_e_p > 0, "beta_e_p", "must be > 0")
    _require(cfg.gamma > 0, "gamma", "must be > 0")
    _require(cfg.gamma_prime > 0, "gamma_prime", "must be > 0")
    _require(0.5 < cfg.p_min < 1, "p_min", "pointer ground probability must lie in (0.5, 1)")
    _require(0.5 < cfg.p_max < 1, "p_max", "pointer ground probability must lie in (0.5, 1)")
    _require(cfg.p_min <= cfg.p_max, "p_max", "must be >= p_min")
    _require(cfg.p_steps >= 1, "p_steps", "must be >= 1")
    _require(cfg.p_steps == 1 or cfg.p_max > cfg.p_min, "p_steps",
             "several grid points need p_max > p_min")
    _require(0.5 < cfg.p < 1, "p", "pointer ground probability must lie in (0.5, 1)")
    _require(cfg.rk4_dt > 0, "rk4_dt", "must be > 0")
    _require(cfg.rk4_tmax >= 0, "rk4_tmax", "must be >= 0")
    _require(cfg.sample_every >= 1, "sample_every", "must be >= 1")
    tq = cfg.two_qubit()
    try:
        tq.system_spec().validate()
    except SpecError as exc:
        raise ConfigError("omega_a", str(exc)) from None
    if cfg.n_th_mode == NthMode.MATCH_EME.value and ("tcme" in cfg.engines()):
        _require(cfg.theta_over_pi < 0.25, "theta_over_pi",
                 "match_eme needs theta < pi/4 so that tan^2(theta) = n_th/(n_th+1) is solvable")


def fmt(x: float | None) -> str:
    """Scientific notation with 12 significant digits; ``None`` becomes empty."""
    if x is None:
        return ""
    x = float(x)
    if x == 0.0:
        x = 0.0  # drop the sign of negative zero
    return f"{x:.11e}"


def row_fields(row: SweepRow) -> list[str]:
    out = [row.scheme, row.engine, fmt(row.p), fmt(row.beta_prime)]
    if row.ledger is None:
        out += [""] * len(LEDGER_COLUMNS)
    else:
        out += [fmt(getattr(row.ledger, c)) for c in LEDGER_COLUMNS]
    out.append(row.error)
    return out


def write_sweep_csv(rows: Iterable[SweepRow], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row_fields(row))


def _open_output(path: str):
    if not path or path == "-":
        return _NoClose(sys.stdout)
    return open(path, "w", encoding="utf-8", newline="")


class _NoClose:
    def __init__(self, stream):
        self.stream = stream

    def __enter__(self):
        return self.stream

    def __exit__(self, *exc):
        self.stream.flush()


def cmd_sweep(cfg: RunConfig) -> int:
    rows = sweep(cfg.two_qubit(), cfg.bath(), cfg.p_grid(), cfg.engines())
    with _open_output(cfg.output) as out:
        write_sweep_csv(rows, out)
    failed = [r for r in rows if not r.ok]
    if failed:
        print(f"{len(failed)} of {len(rows)} rows carry an error tag; first: {failed[0].error}",
              file=sys.stderr)
        return 1
    return 0


def cmd_cycle(cfg: RunConfig) -> int:
    tq, bath = cfg.two_qubit(), cfg.bath()
    status = 0
    buf = io.StringIO()
    for engine in cfg.engines():
        row = evaluate_point(engine, engine_states(engine, tq, bath), tq, cfg.p)
        print(f"[{engine}]", file=buf)
        print(f"scheme = {row.scheme}", file=buf)
        print(f"P = {fmt(row.p)}", file=buf)
        print(f"beta_prime = {fmt(row.beta_prime)}", file=buf)
        if row.ledger is None:
            print(f"error = {row.error}", file=buf)
            status = 1
        else:
            for name in LEDGER_COLUMNS:
                value = getattr(row.ledger, name)
                print(f"{name} = {'null' if value is None else fmt(value)}", file=buf)
            if row.ledger.cooling_extrapolated:
                print("note = cooling cost extrapolated beyond a qubit pointer", file=buf)
        print(file=buf)
    with _open_output(cfg.output) as out:
        out.write(buf.getvalue())
    return status


def cmd_axioms(cfg: RunConfig) -> int:
    tq, bath = cfg.two_qubit(), cfg.bath()
    spec = tq.system_spec()
    pspec = tq.pointer_spec(purity_to_beta(cfg.p, tq.e_p))
    u = build_u_corr(tq.correlation_scheme(), spec, pspec)
    projs = OutcomeProjectors.for_specs(spec, pspec)
    buf = io.StringIO()
    for engine in cfg.engines():
        rho_s = engine_states(engine, tq, bath).rho_work
        rho_sp, _ = correlate(rho_s, spec, pspec, u)
        rep = axiom_report(rho_s, rho_sp, projs)
        print(f"[{engine}]", file=buf)
        print(f"scheme = {tq.scheme.value}", file=buf)
        print(f"P = {fmt(cfg.p)}", file=buf)
        print(f"bias_residual = {fmt(rep.bias_residual)}", file=buf)
        print(f"invasive_residual = {fmt(rep.invasive_residual)}", file=buf)
        print(f"c_max = {fmt(rep.c_max)}", file=buf)
        print(file=buf)
    with _open_output(cfg.output) as out:
        out.write(buf.getvalue())
    return 0


def lindblad_start_state(cfg: RunConfig) -> DensityOp:
    tq, bath = cfg.two_qubit(), cfg.bath()
    if cfg.lindblad_start == "gibbs":
        return thermal_state(build_h_loc(tq.system_spec()), tq.beta, DIMS)
    if cfg.lindblad_start == "fixed_point":
        th = bath.theta(tq)
        m = np.zeros((4, 4), dtype=complex)
        m[I10, I10] = math.cos(th) ** 2
        m[I01, I01] = math.sin(th) ** 2
        return DensityOp(m, DIMS)
    if cfg.lindblad_start == "tcme":
        return tcme_state(tq, bath)
    return engine_states("eme", tq, bath).rho_work


def cmd_lindblad(cfg: RunConfig) -> int:
    tq, bath = cfg.two_qubit(), cfg.bath()
    traj = lindblad_evolve(lindblad_start_state(cfg), tq, bath, cfg.rk4_dt, cfg.rk4_tmax,
                           cfg.sample_every)
    with _open_output(cfg.output) as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(LINDBLAD_HEADER)
        for t, rho in zip(traj.times, traj.states):
            pops = np.real(np.diag(rho))
            writer.writerow([fmt(t), *(fmt(p) for p in pops), fmt(abs(rho[I01, I10])),
                             fmt(np.real(np.trace(rho)))])
    return 0


COMMANDS = {
    "sweep": cmd_sweep,
    "cycle": cmd_cycle,
    "axioms": cmd_axioms,
    "lindblad": cmd_lindblad,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmengine", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="path to a key = value configuration file")
        p.add_argument("--output", help="output path (default: stdout)")
        p.add_argument("--engine", choices=ENGINE_CHOICES)
        p.add_argument("--scheme", choices=_CHOICES["scheme"])
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one configuration key")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    for key in ("output", "engine", "scheme"):
        value = getattr(args, key)
        if value is not None:
            overrides.append(f"{key}={value}")
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(text, overrides)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
