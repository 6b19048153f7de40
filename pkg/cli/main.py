"""
Command-line front end.

    python -m cli.main steady run.cfg
    python -m cli.main sweep run.cfg --workers 8
    python -m cli.main reproduce fig4 --pdf
"""

from __future__ import annotations

import argparse
import sys

from cli.config import RunConfig, parse_config
from src.pipeline import (
    FIGURES, reproduce, run_fit, run_g2tau, run_spectrum, run_steady, run_sweep, write_outputs,
)
from src.utils.errors import EXIT_OK, EXIT_SOLVER, ConfigError, WGMError
from src.utils.logger import configure, get_logger

log = get_logger(__name__)

COMMANDS = {
    "spectrum": run_spectrum,
    "steady": run_steady,
    "g2tau": run_g2tau,
    "sweep": run_sweep,
    "fit": run_fit,
}


# ───────────────────────────── ARGUMENTS ─────────────────────────────

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", nargs="?", help="run configuration file (defaults when omitted)")
    parser.add_argument("--workers", type=int, help="worker processes for sweeps (overrides WGM_WORKERS)")
    parser.add_argument("--output", help="output directory (overrides WGM_OUTPUT_DIR)")
    parser.add_argument("--n-trunc", type=int, help="photon truncation N per mode")
    parser.add_argument("--allow-large", action="store_true", help="lift the Liouville-space memory cap")
    parser.add_argument("--no-convergence-check", action="store_true", help="skip the N+1 truncation check")
    parser.add_argument("--pdf", action="store_true", help="also render the panels into a PDF report")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wgm-sim", description="Two-atom spinning WGM cavity QED simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _common(sub.add_parser(name))
    rep = sub.add_parser("reproduce", help="recompute the data behind one figure")
    rep.add_argument("figure", choices=FIGURES)
    _common(rep)
    rep.add_argument("--quick", action="store_true", help="coarse grids for smoke runs")
    return parser


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return parse_config("")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return parse_config(text)


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.n_trunc is not None:
        if args.n_trunc < 1:
            raise ConfigError(f"--n-trunc must be >= 1, got {args.n_trunc}")
        cfg = cfg.with_n_trunc(args.n_trunc)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {args.workers}")
        cfg.run.workers = args.workers
    if args.output:
        cfg.run.output = args.output
    if args.allow_large:
        cfg.run.allow_large = True
    if args.no_convergence_check:
        cfg.run.check_convergence = False
    return cfg


# ───────────────────────────── MAIN ─────────────────────────────

def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure(args.log_level.upper() if args.log_level else None)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        if args.command == "reproduce":
            out = reproduce(cfg, args.figure, quick=args.quick)
        else:
            out = COMMANDS[args.command](cfg)
        paths = write_outputs(out, cfg, pdf=args.pdf)
    except WGMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code

    for line in out.summary:
        print(line)
    for path in paths:
        print(f"wrote {path}")
    if out.flagged:
        print(f"{out.flagged} flagged rows", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
