"""Command line entry point: ``misocoal {thresholds,formation,sweep,complexity}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import (AmbiguousSNRError, BlowupGuardError, InvalidDeviationError,
                     InvalidNoiseError, InvalidScenarioError)
from .experiments import (COMPLEXITY_COLUMNS, FORMATION_COLUMNS, SWEEP_COLUMNS, ConfigError,
                          SweepConfig, cmd_complexity, cmd_formation, cmd_thresholds,
                          formation_row, load_config, rows_to_csv, rows_to_json, run_sweep)

log = logging.getLogger("misocoal")

_USER_ERRORS = (ConfigError, InvalidScenarioError, AmbiguousSNRError, BlowupGuardError,
                InvalidNoiseError, InvalidDeviationError, ValueError, OSError)


def _read_config(args) -> dict:
    if args.config is None:
        return {}
    cfg = load_config(args.config)
    cfg["_base_dir"] = Path(args.config).resolve().parent
    return cfg


def _seed(args, cfg) -> int:
    return int(args.seed if args.seed is not None else cfg.get("seed", 0))


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
        log.info("wrote %s", out)


def _thresholds(args):
    cfg = _read_config(args)
    report = cmd_thresholds(cfg, _seed(args, cfg))
    if args.format == "json":
        return rows_to_json(report["rows"], report["columns"])
    return rows_to_csv(report["rows"], report["columns"])


def _formation(args):
    cfg = _read_config(args)
    for key in ("q", "scheme", "snr_db"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    if args.overhead is not None:
        cfg["overhead"] = args.overhead
    snr_db, result = cmd_formation(cfg, _seed(args, cfg))
    if args.format == "csv":
        return rows_to_csv([formation_row(snr_db, result)], FORMATION_COLUMNS)
    return json.dumps({"snr_db": snr_db, **result.to_dict()}, indent=1)


def _sweep(args):
    cfg = _read_config(args)
    if not cfg:
        raise ConfigError("sweep needs --config")
    config = SweepConfig.from_dict(cfg, seed=args.seed)
    rows = run_sweep(config, jobs=args.jobs)
    if args.format == "json":
        return rows_to_json(rows, SWEEP_COLUMNS)
    return rows_to_csv(rows, SWEEP_COLUMNS)


def _complexity(args):
    rows = cmd_complexity(args.k_min, args.k_max, args.q)
    if args.format == "json":
        return rows_to_json(rows, COMPLEXITY_COLUMNS)
    return rows_to_csv(rows, COMPLEXITY_COLUMNS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="misocoal",
        description="Coalitional beamforming games in the MISO interference channel.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_format):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="base seed (overrides the config)")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=default_format)
        p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("thresholds", help="epsilon-core thresholds over an overhead grid")
    common(p, "csv")
    p.set_defaults(func=_thresholds)

    p = sub.add_parser("formation", help="one coalition-formation run with its message trace")
    common(p, "json")
    p.add_argument("--q", type=int)
    p.add_argument("--scheme", choices=("ZF", "WF"))
    p.add_argument("--snr-db", dest="snr_db", type=float)
    p.add_argument("--overhead", choices=("zero", "size", "uniform"))
    p.set_defaults(func=_formation)

    p = sub.add_parser("sweep", help="Monte-Carlo SNR sweep")
    common(p, "csv")
    p.set_defaults(func=_sweep)

    p = sub.add_parser("complexity", help="merge/split/iteration counts")
    common(p, "csv")
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=20)
    p.add_argument("--q", type=int, nargs="+", default=[2, 3, 4])
    p.set_defaults(func=_complexity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        text = args.func(args)
    except _USER_ERRORS as exc:
        print(f"misocoal {args.command}: error: {exc}", file=sys.stderr)
        return 2
    _emit(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
