"""Config loading and the batch drivers behind the command line."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .beamforming import BfScheme
from .combinatorics import complexity_rows
from .core_analysis import (coalition_terms, singleton_threshold, strong_core_report,
                            weak_core_report, zero_overhead_threshold)
from .errors import BlowupGuardError
from .formation import Game, OverheadModel, run_formation
from .scenario import (ChannelSet, Scenario, builtin_topology, db_to_linear,
                       sample_channels, snr_to_sigma2)

MAX_SWEEP_LINKS = 16


class ConfigError(ValueError):
    pass


def fmt(v) -> str:
    """Fixed 12-significant-digit rendering used in every CSV."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else "-inf"
    return f"{float(v):.12g}"


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}:1:1: top level must be a JSON object")
    return cfg


def scenario_from(spec, base_dir: Optional[Path] = None) -> Scenario:
    """``"builtin"``, a path to a scenario JSON file, or an inline dict."""
    if spec is None or spec == "builtin":
        return builtin_topology()
    if isinstance(spec, str):
        path = Path(spec)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return Scenario.load(path)
    return Scenario.from_dict(spec)


def channels_from(cfg: dict, scenario: Scenario, seed: int) -> ChannelSet:
    if "channels" in cfg:
        return ChannelSet.from_dict(cfg["channels"])
    return sample_channels(scenario, seed, int(cfg.get("realization", 0)))


def _grid(spec, name) -> list:
    if isinstance(spec, dict):
        return list(np.linspace(spec["start"], spec["stop"], int(spec["num"])))
    if not isinstance(spec, list) or not spec:
        raise ConfigError(f"{name} must be a nonempty list or a start/stop/num object")
    return [float(x) for x in spec]


# -- thresholds ---------------------------------------------------------------

THRESHOLD_COLUMNS = [
    "eps", "weak_sigma2_upper", "weak_sigma2_lower", "strong_sigma2_upper",
    "strong_sigma2_lower", "weak_summary_exact", "strong_summary_exact",
    "weak_snr_db_low", "weak_snr_db_high", "strong_snr_db_low", "strong_snr_db_high",
    "weak_global", "strong_global", "sigma2_hat", "sigma2_check",
]


def _snr_db(gain: float, sigma2: float) -> float:
    if sigma2 == 0:
        return math.inf
    if sigma2 == math.inf:
        return -math.inf
    return 10.0 * math.log10(gain / sigma2)


def threshold_rows(ch: ChannelSet, eps_grid, snr_gain: float = 1.0) -> list:
    """One row per uniform overhead with weak/strong thresholds.

    The core is empty for noise powers strictly between ``*_sigma2_upper`` and
    ``*_sigma2_lower`` (or above ``*_sigma2_upper`` when the lower value is 0);
    the matching SNR band is ``(*_snr_db_low, *_snr_db_high)``.
    """
    k = ch.n_links
    s_hat = zero_overhead_threshold(ch)
    s_check = singleton_threshold(ch)
    terms = coalition_terms(ch)
    rows = []
    for e in eps_grid:
        weak = weak_core_report(ch, [e] * k, terms=terms)
        strong = strong_core_report(ch, [e] * k, terms=terms)
        row = {"eps": float(e)}
        for name, rep in (("weak", weak), ("strong", strong)):
            row[f"{name}_sigma2_upper"] = rep.sigma_upper
            row[f"{name}_sigma2_lower"] = rep.sigma_lower
            row[f"{name}_summary_exact"] = rep.summary_exact
            row[f"{name}_snr_db_low"] = _snr_db(snr_gain, rep.sigma_upper)
            row[f"{name}_snr_db_high"] = (_snr_db(snr_gain, rep.sigma_lower)
                                          if rep.sigma_lower > 0 else math.inf)
            row[f"{name}_global"] = rep.globally_nonempty
        row["sigma2_hat"] = s_hat
        row["sigma2_check"] = s_check
        rows.append(row)
    return rows


def cmd_thresholds(cfg: dict, seed: int) -> dict:
    scenario = scenario_from(cfg.get("scenario"), cfg.get("_base_dir"))
    ch = channels_from(cfg, scenario, seed)
    eps_grid = _grid(cfg.get("eps_grid", {"start": 0.0, "stop": 3.0, "num": 31}), "eps_grid")
    gain = snr_to_sigma2(scenario, 1.0)
    return {"columns": THRESHOLD_COLUMNS, "rows": threshold_rows(ch, eps_grid, gain)}


# -- single formation run ------------------------------------------------------

FORMATION_COLUMNS = ["snr_db", "scheme", "q", "overhead", "final", "n_coalitions",
                     "theta", "n_iter", "avg_rate"]


def cmd_formation(cfg: dict, seed: int):
    scenario = scenario_from(cfg.get("scenario"), cfg.get("_base_dir"))
    ch = channels_from(cfg, scenario, seed)
    snr_db = float(cfg.get("snr_db", 25.0))
    q = int(cfg.get("q", ch.n_links))
    scheme = BfScheme(cfg.get("scheme", "ZF"))
    model = OverheadModel.from_dict(cfg.get("overhead", "zero"))
    sigma2 = snr_to_sigma2(scenario, db_to_linear(snr_db))
    result = run_formation(ch, sigma2, model, q, scheme)
    return snr_db, result


def formation_row(snr_db, result) -> dict:
    return {
        "snr_db": snr_db, "scheme": result.scheme, "q": result.q,
        "overhead": result.overhead,
        "final": " ".join("{" + ",".join(str(i) for i in c) + "}" for c in result.final),
        "n_coalitions": result.n_coalitions, "theta": result.theta,
        "n_iter": result.n_iter, "avg_rate": float(np.mean(result.rates)),
    }


# -- Monte-Carlo sweep ---------------------------------------------------------

SWEEP_COLUMNS = ["snr_db", "scheme", "q", "overhead", "avg_user_rate", "avg_num_coalitions",
                 "avg_theta", "avg_n_iter", "avg_ne_rate", "realizations"]


@dataclass(frozen=True)
class SweepConfig:
    scenario: Scenario
    snr_db: tuple
    realizations: int = 100
    seed: int = 0
    schemes: tuple = ("ZF", "WF")
    q_values: tuple = (2, 3, 8)
    overheads: tuple = field(default_factory=lambda: (OverheadModel.zero(),))

    def __post_init__(self):
        if not self.snr_db or not self.schemes or not self.q_values or not self.overheads:
            raise ConfigError("sweep grids must be nonempty")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if min(self.q_values) < 2:
            raise ConfigError("q values must be >= 2")
        if self.scenario.n_links > MAX_SWEEP_LINKS:
            raise BlowupGuardError(
                f"K={self.scenario.n_links} exceeds the sweep cap of {MAX_SWEEP_LINKS}")

    @classmethod
    def from_dict(cls, cfg: dict, seed: Optional[int] = None) -> "SweepConfig":
        scenario = scenario_from(cfg.get("scenario"), cfg.get("_base_dir"))
        try:
            return cls(
                scenario=scenario,
                snr_db=tuple(_grid(cfg["snr_db"], "snr_db")),
                realizations=int(cfg.get("realizations", 100)),
                seed=int(cfg.get("seed", 0) if seed is None else seed),
                schemes=tuple(BfScheme(s).value for s in cfg.get("schemes", ["ZF", "WF"])),
                q_values=tuple(int(q) for q in cfg.get("q_values", [2, 3, 8])),
                overheads=tuple(OverheadModel.from_dict(o)
                                for o in cfg.get("overheads", ["zero"])),
            )
        except KeyError as exc:
            raise ConfigError(f"missing sweep key {exc}") from None

    def combos(self) -> list:
        return [(s, q, o) for s in self.schemes for q in self.q_values for o in self.overheads]


def _one_realization(args):
    config, snr_index, realization = args
    ch = sample_channels(config.scenario, config.seed, realization)
    sigma2 = snr_to_sigma2(config.scenario, db_to_linear(config.snr_db[snr_index]))
    out = []
    games = {}
    for scheme, q, overhead in config.combos():
        game = games.setdefault(scheme, Game(ch, sigma2, scheme))
        res = run_formation(ch, sigma2, overhead, min(q, ch.n_links), scheme,
                            record=False, game=game)
        out.append((float(np.mean(res.rates)), res.n_coalitions, res.theta, res.n_iter))
    ne = float(np.mean(games[config.schemes[0]].nash_rates()))
    return snr_index, realization, out, ne


def run_sweep(config: SweepConfig, jobs: int = 1) -> list:
    """Average formation outcomes over realizations for every grid point.

    Every ``(snr, realization)`` task is independent and lands in its own
    slot, so serial and parallel runs give identical rows.
    """
    tasks = [(config, si, r) for si in range(len(config.snr_db))
             for r in range(config.realizations)]
    slots = {}
    if jobs <= 1:
        results = map(_one_realization, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=jobs)
        results = pool.map(_one_realization, tasks, chunksize=max(1, len(tasks) // (4 * jobs)))
    for si, r, out, ne in results:
        slots[si, r] = (out, ne)
    if jobs > 1:
        pool.shutdown()

    rows = []
    n = config.realizations
    for si, snr in enumerate(config.snr_db):
        per = [slots[si, r] for r in range(n)]
        ne_avg = math.fsum(p[1] for p in per) / n
        for c, (scheme, q, overhead) in enumerate(config.combos()):
            vals = [p[0][c] for p in per]
            rows.append({
                "snr_db": snr, "scheme": scheme, "q": q, "overhead": overhead.tag,
                "avg_user_rate": math.fsum(v[0] for v in vals) / n,
                "avg_num_coalitions": math.fsum(v[1] for v in vals) / n,
                "avg_theta": math.fsum(v[2] for v in vals) / n,
                "avg_n_iter": math.fsum(v[3] for v in vals) / n,
                "avg_ne_rate": ne_avg,
                "realizations": n,
            })
    return rows


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in (row[c] for c in columns)])
    return buf.getvalue()


def rows_to_json(rows, columns) -> str:
    def clean(v):
        if isinstance(v, (bool, np.bool_)):
            return bool(v)
        if isinstance(v, float) and not math.isfinite(v):
            return "inf" if v > 0 else "-inf"
        return v
    return json.dumps({"columns": columns,
                       "rows": [{c: clean(r[c]) for c in columns} for r in rows]}, indent=1)


# -- complexity table ----------------------------------------------------------

COMPLEXITY_COLUMNS = ["K", "q", "D", "T", "W"]


def cmd_complexity(k_min: int, k_max: int, q_values) -> list:
    if k_min < 2 or k_max < k_min:
        raise ConfigError("need 2 <= k_min <= k_max")
    return [dict(zip(COMPLEXITY_COLUMNS, row))
            for row in complexity_rows(range(k_min, k_max + 1), q_values)]
