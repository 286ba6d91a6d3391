"""Command-line entry point: closed-form tables (``analyze``) and seeded runs (``simulate``).

Run configs are flat ``key = value`` text files; ``#`` starts a comment.
``lambda`` and ``p_e`` accept comma-separated lists, which expand into a sweep.

    n = 32              segments (default: min(32, largest n with H_n <= M))
    M = 7               content channels (required)
    R = 1               redundancy channels
    lambda = 1,2,4      subchannels per channel
    k = 8               packets per subsegment
    payload_bytes = 8
    content_rate = 2000000
    content_duration = 7200
    seed = 1
    loss = uniform      uniform | burst
    p_e = 0.1           uniform loss probability
    p_gb, p_bg, loss_good, loss_bad   burst chain parameters
    clients = 8
    fec = on            on | off
    systematic = false
    max_fec_equations = none
    out = results       output directory
    name = run          output file stem
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import harmonic
from .channel import Burst, LossModel, Uniform
from .harmonic import ScheduleInfeasible, SystemConfig
from .metrics import sweep, write_csv, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3


class ConfigError(ValueError):
    pass


def _int(v):
    return int(v, 0)


def _bool(v):
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_int(v):
    return None if v.lower() in ("none", "") else _int(v)


def _ints(v):
    return [_int(x) for x in v.split(",")]


def _floats(v):
    return [float(x) for x in v.split(",")]


def _loss(v):
    if v not in ("uniform", "burst"):
        raise ValueError("loss must be 'uniform' or 'burst'")
    return v


SCHEMA = {
    "n": _int,
    "M": _int,
    "R": _int,
    "lambda": _ints,
    "k": _int,
    "payload_bytes": _int,
    "content_rate": float,
    "content_duration": float,
    "seed": _int,
    "loss": _loss,
    "p_e": _floats,
    "p_gb": float,
    "p_bg": float,
    "loss_good": float,
    "loss_bad": float,
    "clients": _int,
    "fec": _bool,
    "systematic": _bool,
    "max_fec_equations": _opt_int,
    "out": str,
    "name": str,
}

DEFAULTS = {
    "R": 0,
    "lambda": [1],
    "k": 8,
    "payload_bytes": 8,
    "content_rate": 2e6,
    "content_duration": 7200.0,
    "seed": 1,
    "loss": "uniform",
    "p_e": [0.1],
    "clients": 8,
    "fec": True,
    "systematic": False,
    "max_fec_equations": None,
    "out": "results",
    "name": "run",
}

PRESETS = {
    10: """\
# lambda sweep at fixed loss
name = figure10
M = 7
R = 1
n = 32
lambda = 1,2,4,8,16
k = 8
payload_bytes = 8
loss = uniform
p_e = 0.1
clients = 8
fec = on
""",
    11: """\
# loss sweep above the first-slot bound
name = figure11
M = 7
R = 1
n = 32
lambda = 4
k = 8
payload_bytes = 8
loss = uniform
p_e = 0.15,0.20,0.25
clients = 8
fec = on
""",
}


@dataclass
class RunConfig:
    values: dict

    def grid(self) -> list[tuple[SystemConfig, LossModel]]:
        v = self.values
        points = []
        for lam in v["lambda"]:
            base = SystemConfig(
                n=v["n"],
                M=v["M"],
                R=v["R"],
                lam=lam,
                k=v["k"],
                payload_bytes=v["payload_bytes"],
                content_rate=v["content_rate"],
                content_duration=v["content_duration"],
                seed=v["seed"],
                systematic=v["systematic"],
            )
            for model in self.models():
                points.append((base, model))
        return points

    def models(self) -> list[LossModel]:
        v = self.values
        if v["loss"] == "uniform":
            return [Uniform(p) for p in v["p_e"]]
        missing = [key for key in ("p_gb", "p_bg", "loss_good", "loss_bad") if key not in v]
        if missing:
            raise ConfigError(f"burst loss needs {', '.join(missing)}")
        return [Burst(v["p_gb"], v["p_bg"], v["loss_good"], v["loss_bad"])]

    def render(self) -> str:
        lines = []
        for key in SCHEMA:
            if key not in self.values:
                continue
            value = self.values[key]
            if isinstance(value, list):
                value = ",".join(repr(x) if isinstance(x, float) else str(x) for x in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            elif value is None:
                value = "none"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def parse_config(text: str, seed: int | None = None, out: str | None = None) -> RunConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = SCHEMA[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if "M" not in values:
        raise ConfigError("M is required")
    for key, default in DEFAULTS.items():
        values.setdefault(key, default)
    if seed is not None:
        values["seed"] = seed
    if out is not None:
        values["out"] = out
    values.setdefault("n", min(32, harmonic.max_segments(values["M"])))
    if values["n"] < values["M"]:
        raise ConfigError(f"n={values['n']} cannot fill M={values['M']} channels per slot")
    cfg = RunConfig(values)
    try:
        cfg.grid()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def cmd_simulate(args) -> int:
    try:
        if args.figure is not None:
            if args.figure not in PRESETS:
                raise ConfigError(f"no preset for figure {args.figure}; have {sorted(PRESETS)}")
            text = PRESETS[args.figure]
        elif args.config:
            text = Path(args.config).read_text(encoding="utf-8")
        else:
            raise ConfigError("simulate needs --config or --figure")
        cfg = parse_config(text, seed=args.seed, out=args.out)
        grid = cfg.grid()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    v = cfg.values
    reports = sweep(grid, clients=v["clients"], fec=v["fec"], max_fec_equations=v["max_fec_equations"])
    out_dir = Path(v["out"])
    path = write_outputs(out_dir, v["name"], reports, extra={"run_config": cfg.render()})
    (out_dir / f"{v['name']}.cfg").write_text(cfg.render(), encoding="utf-8")
    infeasible = [r for r in reports if r.error and r.error.startswith(ScheduleInfeasible.__name__)]
    failed = [r for r in reports if r.error]
    for rep in failed:
        print(f"lambda={rep.config.lam}: {rep.error}", file=sys.stderr)
    print(path)
    if infeasible:
        return EXIT_INFEASIBLE
    return EXIT_OK if not failed else 1


def _analysis_tables(args) -> list[tuple[list[str], list[list]]]:
    tables = []
    if args.delay:
        rows = []
        for R in range(0, min(args.channels, 3)):
            rows.append(
                [
                    R,
                    harmonic.max_segments(args.channels - R),
                    harmonic.admissible_loss(harmonic.max_segments(args.channels - R), 1, R),
                    harmonic.initial_delay(args.duration, args.channels, R),
                    harmonic.redundancy_delay_factor(R),
                ]
            )
        tables.append((["R", "n", "admissible_b1", "initial_delay_s", "exp_R"], rows))
    if args.admissible:
        n = args.n or harmonic.max_segments(args.M)
        rows = [[b, harmonic.admissible_loss(n, b, args.R)] for b in range(1, n + 1)]
        tables.append((["b", "admissible_loss"], rows))
    if args.success:
        pe = args.pe
        rows = [
            [lam, harmonic.first_slot_success_prob(args.M, args.R, lam, pe)]
            for lam in range(1, args.lambda_max + 1)
        ]
        limit = float(harmonic.asymptotic_success(args.M, args.R, pe))
        rows = [r + [limit] for r in rows]
        tables.append((["lambda", "first_slot_success", "asymptotic_limit"], rows))
    if args.overlay:
        rows = [list(r) for r in harmonic.equivalence_overlay(args.channels, args.R)]
        tables.append((["b_redundant", "b_plain", "admissible_redundant", "admissible_plain"], rows))
    return tables


def cmd_analyze(args) -> int:
    if not (args.delay or args.admissible or args.success or args.overlay):
        print("analyze: pick at least one of --delay --admissible --success --overlay", file=sys.stderr)
        return EXIT_CONFIG
    if (args.admissible or args.success) and args.M is None:
        print("analyze: --M is required for --admissible/--success", file=sys.stderr)
        return EXIT_CONFIG
    try:
        tables = _analysis_tables(args)
    except ValueError as exc:
        print(f"analyze: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        for i, (header, rows) in enumerate(tables):
            if i:
                out.write("\n")
            write_csv(out, header, rows)
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def _probability(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a probability: {text!r}") from None
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError("probability must lie in [0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iecs", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    an = sub.add_parser("analyze", help="print closed-form tables as CSV")
    an.add_argument("--delay", action="store_true", help="initial delay vs redundancy table (R = 0..2)")
    an.add_argument("--admissible", action="store_true", help="admissible loss per slot b")
    an.add_argument("--success", action="store_true", help="first-slot success probability per lambda")
    an.add_argument("--overlay", action="store_true", help="plain vs redundant admissible curves, e^R mapped")
    an.add_argument("--duration", type=float, default=7200.0, help="content duration in seconds")
    an.add_argument("--channels", type=int, default=8, help="total channels I")
    an.add_argument("--M", type=int, help="content channels")
    an.add_argument("--R", type=int, default=0, help="redundancy channels")
    an.add_argument("--n", type=int, help="segment count (default: largest with H_n <= M)")
    an.add_argument("--pe", type=_probability, default=Fraction(1, 10), help="loss probability, e.g. 0.1 or 1/8")
    an.add_argument("--lambda-max", type=int, default=64, help="largest subchannel count for --success")
    an.add_argument("--out", help="write CSV here instead of stdout")
    an.set_defaults(func=cmd_analyze)

    sim = sub.add_parser("simulate", help="run seeded simulations, write CSV + manifest")
    src = sim.add_mutually_exclusive_group()
    src.add_argument("--config", help="flat key = value run config")
    src.add_argument("--figure", type=int, help=f"built-in preset, one of {sorted(PRESETS)}")
    sim.add_argument("--seed", type=_int, help="override the config seed (u64)")
    sim.add_argument("--out", help="output directory (overrides the config)")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must fit in 64 bits")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
