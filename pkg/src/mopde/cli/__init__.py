"""Command-line entry point: ``mopde <subcommand> --config <path> [--out <dir>] [--seed <n>]``.

Exit status: 0 when every invariant passes, 2 for configuration errors,
3 when a time step fails, 4 when an invariant fails.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from importlib import resources

from ..solver import InvariantViolation, StepFailure
from .config import ConfigError, RunConfig, config_echo, parse_config, print_config
from .io import ensure_dir, write_report
from .pipelines import PIPELINES

EXIT_OK, EXIT_CONFIG, EXIT_SOLVE, EXIT_INVARIANT = 0, 2, 3, 4

__all__ = ["main", "run", "load_config", "parse_config", "print_config", "RunConfig", "ConfigError"]

log = logging.getLogger("mopde")


def preset_names():
    return sorted(p.name[:-4] for p in resources.files("mopde.presets").iterdir() if p.name.endswith(".ini"))


def load_config(path: str) -> RunConfig:
    """Read a config file, or a bundled preset when no file of that name exists."""
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read(), source_name=path)
    name = os.path.basename(path)
    name = name[:-4] if name.endswith(".ini") else name
    if name in preset_names():
        text = resources.files("mopde.presets").joinpath(f"{name}.ini").read_text(encoding="utf-8")
        return parse_config(text, source_name=f"preset:{name}")
    raise ConfigError(f"no config file or preset named {path!r} (presets: {', '.join(preset_names())})")


def run(subcommand: str, cfg: RunConfig, out_dir: str, seed: int):
    """Execute one pipeline and write ``report.json``; returns ``(exit_code, report)``."""
    ensure_dir(out_dir)
    start = time.perf_counter()
    code = EXIT_OK
    try:
        report = PIPELINES[subcommand](cfg, seed, out_dir)
    except StepFailure as exc:
        report = {"invariants": {}, "curves": {}, "energy": [], "error": str(exc)}
        code = EXIT_SOLVE
    except InvariantViolation as exc:
        report = {"invariants": {"solver_invariant": {"pass": False, "worst": float("nan"), "tol": 0.0}},
                  "curves": {}, "energy": [], "error": str(exc)}
        code = EXIT_INVARIANT
    if code == EXIT_OK and not all(v["pass"] for v in report["invariants"].values()):
        code = EXIT_INVARIANT
    report["config_echo"] = {"subcommand": subcommand, "seed": seed, **config_echo(cfg)}
    report["timing"] = {"seconds": time.perf_counter() - start}
    write_report(os.path.join(out_dir, "report.json"), report)
    return code, report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mopde", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=sorted(PIPELINES))
    parser.add_argument("--config", required=True, help="config file, or the name of a bundled preset")
    parser.add_argument("--out", default=None, help="output directory (created if missing)")
    parser.add_argument("--seed", type=int, default=None, help="sampling seed (overrides the config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        cfg = load_config(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        out_dir = args.out or cfg["output"]["dir"]
        code, report = run(args.subcommand, cfg, out_dir, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, inv in sorted(report["invariants"].items()):
        status = "ok  " if inv["pass"] else "FAIL"
        print(f"{status} {name}: worst={inv['worst']:.6g} tol={inv['tol']:.3g}")
    if "error" in report:
        print(f"error: {report['error']}", file=sys.stderr)
    print(f"report: {os.path.join(out_dir, 'report.json')} (exit {code})")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
