"""Command-line entry point.

``spherebot ramp|circle|run|check``; see ``spherebot --help``. Exit status is
0 on success, 1 on a configuration or usage error and 2 when the simulation
fails (for example by leaving the terrain domain).
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from typing import Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as tomli
else:
    import tomli

from . import config as config_mod
from .checks import run_checks
from .config import ConfigError
from .frames import EulerPose
from .sim import SimConfig, SimTrace, run, scenario_circle, scenario_ramp

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SIM = 2


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not simulation errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _triple(text: str) -> list[float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected a,b,g, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spherebot", description="Spherical rolling robot simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sim_options(p):
        p.add_argument("-o", "--output", default="trace.csv",
                       help="trace CSV destination (default: trace.csv)")
        p.add_argument("--model", choices=("3rsr", "2rsr", "rtsr"), help="dynamics mode")
        p.add_argument("--dt", type=float, help="integration step, seconds")
        p.add_argument("--t-end", type=float, dest="t_end", help="simulated duration, seconds")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override any config key (value is a TOML literal); repeatable")
        p.add_argument("--dump-config", nargs="?", const="-", metavar="PATH",
                       help="write the effective config as TOML (stdout by default) and exit")

    p = sub.add_parser("ramp", help="climb the pi/8 ramp")
    p.add_argument("--pose", type=_triple, default=[0.0, 0.0, 0.0], metavar="a,b,g",
                   help="initial yaw, pitch, roll in radians")
    p.add_argument("--config", help="TOML file layered over the scenario")
    sim_options(p)

    p = sub.add_parser("circle", help="track the circle on the cosine terrain")
    p.add_argument("--config", help="TOML file layered over the scenario")
    sim_options(p)

    p = sub.add_parser("run", help="run a user configuration")
    p.add_argument("--config", required=True, help="TOML configuration file")
    p.add_argument("--pose", type=_triple, metavar="a,b,g",
                   help="initial yaw, pitch, roll in radians")
    sim_options(p)

    p = sub.add_parser("check", help="run the randomized invariant self-tests")
    p.add_argument("--seed", type=int, default=0, help="seed for the randomized suites")
    return parser


def _read_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("--config", f"invalid TOML in {path}: {exc}") from None


def _layer(base: dict, top: dict) -> dict:
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in base.items()}
    for section, body in top.items():
        if isinstance(body, dict) and isinstance(out.get(section), dict):
            if section in ("terrain", "path") and "kind" in body:
                out[section] = dict(body)   # a new kind replaces the whole table
            else:
                out[section].update(body)
        else:
            out[section] = body
    return out


def resolve_config(args: argparse.Namespace) -> SimConfig:
    """Scenario defaults, then the config file, then command-line overrides."""
    if args.command == "ramp":
        data = config_mod.config_to_dict(scenario_ramp(EulerPose(*args.pose)))
    elif args.command == "circle":
        data = config_mod.config_to_dict(scenario_circle())
    else:
        data = {}
    if args.config:
        data = _layer(data, _read_toml(args.config))
    if args.command == "run" and args.pose is not None:
        data.setdefault("initial", {})["pose"] = args.pose
    for key, value in (("model", args.model), ("dt", args.dt), ("t_end", args.t_end)):
        if value is not None:
            data.setdefault("sim", {})[key] = value
    for assignment in args.set:
        config_mod.apply_override(data, assignment)
    return config_mod.config_from_dict(data)


def summarize(trace: SimTrace, config: SimConfig, wall: float) -> dict[str, str]:
    arr = trace.array()
    e = arr[:, 14] if len(arr) else np.array([])
    finite = e[np.isfinite(e)]
    if finite.size:
        rms = math.sqrt(float(np.mean(finite ** 2)))
        tail = finite[len(finite) // 2:]
        rms_tail = math.sqrt(float(np.mean(tail ** 2)))
        rms_text, tail_text = f"{rms:.6g}", f"{rms_tail:.6g}"
    else:
        rms_text = tail_text = "n/a"
    last = arr[-1] if len(arr) else np.full(len(arr.T) or 17, math.nan)
    return {
        "status": "ok" if trace.error is None else f"error: {trace.error}",
        "model": config.model_kind,
        "rows": str(len(arr)),
        "simulated_time_s": f"{last[0]:.6g}",
        "final_position": f"{last[1]:.6f} {last[2]:.6f} {last[3]:.6f}",
        "rms_tracking_error": rms_text,
        "rms_tracking_error_second_half": tail_text,
        "max_constraint_defect": f"{trace.max_surface_defect:.3e}",
        "max_orthonormality_defect": f"{trace.max_ortho_defect:.3e}",
        "wall_time_s": f"{wall:.3f}",
    }


def _simulate(args: argparse.Namespace) -> int:
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.dump_config is not None:
        text = config_mod.dumps(config)
        if args.dump_config == "-":
            sys.stdout.write(text)
        else:
            try:
                with open(args.dump_config, "w", encoding="utf-8") as fh:
                    fh.write(text)
            except OSError as exc:
                print(f"config error: --dump-config: {exc.strerror}", file=sys.stderr)
                return EXIT_CONFIG
        return EXIT_OK

    start = time.perf_counter()
    trace = run(config)
    wall = time.perf_counter() - start
    try:
        trace.write_csv(args.output)
    except OSError as exc:
        print(f"config error: --output: cannot write {args.output}: {exc.strerror}",
              file=sys.stderr)
        return EXIT_CONFIG
    summary = summarize(trace, config, wall)
    summary["trace"] = args.output
    for key, value in summary.items():
        print(f"{key}: {value}")
    if trace.error is not None:
        print(f"simulation error: {trace.error}", file=sys.stderr)
        return EXIT_SIM
    return EXIT_OK


def _check(args: argparse.Namespace) -> int:
    results = run_checks(args.seed)
    for result in results:
        print(result.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed (seed {args.seed})")
    return EXIT_OK if failed == 0 else EXIT_SIM


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check":
        return _check(args)
    return _simulate(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
