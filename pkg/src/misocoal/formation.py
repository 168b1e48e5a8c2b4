"""Merge-only coalition formation in partition form.

Starting from all-singleton coalitions, sets of at most ``q`` coalitions are
tried in lexicographic order and merged whenever every member of the merge
weakly prefers the new structure (after deducting its overhead) and at least
one member strictly prefers it.  Each tried candidate is one iteration; the
number of utility comparisons ``theta`` grows by the number of players in the
candidate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .beamforming import BfScheme, canonical_structure, singletons, zf, wf
from .combinatorics import worst_case_iters
from .errors import BlowupGuardError, InvalidDeviationError, InvalidNoiseError
from .rates import rates_from_gains
from .scenario import ChannelSet

# Utility differences within this relative band count as "unchanged".
TIE_RTOL = 1e-12
DEFAULT_MAX_COALITIONS = 16


class Message(IntEnum):
    """Two-bit signals exchanged between transmitters."""

    M1 = 0  # utility improves
    M2 = 1  # utility unchanged
    M3 = 2  # utility decreases
    M4 = 3  # coalition forms


@dataclass(frozen=True)
class OverheadModel:
    """How deviation overheads are assigned.

    ``zero``: no overhead.  ``explicit``: fixed per-player values.
    ``size``: ``|S| / K`` times the grand-coalition rate, where ``S`` is the
    coalition the player would join.  ``uniform``: ``1 / K`` times the
    grand-coalition rate.
    """

    kind: str = "zero"
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("zero", "explicit", "size", "uniform"):
            raise ValueError(f"unknown overhead model {self.kind!r}")
        if self.kind == "explicit":
            if self.values is None or min(self.values) < 0:
                raise ValueError("explicit overheads must be non-negative")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def explicit(cls, values: Sequence[float]):
        return cls("explicit", tuple(values))

    @classmethod
    def size_proportional(cls):
        return cls("size")

    @classmethod
    def uniform(cls):
        return cls("uniform")

    @property
    def needs_grand_rates(self) -> bool:
        return self.kind in ("size", "uniform")

    @property
    def tag(self) -> str:
        return self.kind

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.values is not None:
            out["values"] = list(self.values)
        return out

    @classmethod
    def from_dict(cls, cfg) -> "OverheadModel":
        if isinstance(cfg, str):
            return cls(cfg)
        values = cfg.get("values")
        return cls(cfg["kind"], None if values is None else tuple(values))


class Game:
    """Utilities of coalition structures for one channel and noise level.

    Beamformers are cached per ``(player, coalition)`` and utility vectors per
    structure, so repeated candidates cost a dictionary lookup.
    """

    def __init__(self, ch: ChannelSet, sigma2: float, scheme="ZF"):
        if not sigma2 > 0:
            raise InvalidNoiseError("sigma2 must be positive")
        self.ch = ch
        self.sigma2 = float(sigma2)
        self.scheme = BfScheme(scheme)
        self._h_conj = [h.conj() for h in ch.h]
        self._rows = {}
        self._utils = {}

    @property
    def n_links(self) -> int:
        return self.ch.n_links

    def beamformer(self, i: int, coalition: tuple) -> np.ndarray:
        if self.scheme is BfScheme.ZF:
            return zf(i, coalition, self.ch)
        return wf(i, coalition, self.ch, self.sigma2)

    def _gain_row(self, i: int, coalition: tuple) -> np.ndarray:
        key = (i, coalition)
        row = self._rows.get(key)
        if row is None:
            w = self.beamformer(i, coalition)
            row = np.abs(self._h_conj[i] @ w) ** 2
            self._rows[key] = row
        return row

    def utilities(self, cs: tuple) -> np.ndarray:
        """Rates of all links when ``cs`` (canonical) forms."""
        u = self._utils.get(cs)
        if u is None:
            rows = [None] * self.n_links
            for coalition in cs:
                for i in coalition:
                    rows[i] = self._gain_row(i, coalition)
            u = rates_from_gains(np.stack(rows), self.sigma2)
            self._utils[cs] = u
        return u

    def grand_rates(self) -> np.ndarray:
        return self.utilities((tuple(range(self.n_links)),))

    def nash_rates(self) -> np.ndarray:
        return self.utilities(singletons(self.n_links))


def resolve_overheads(model: OverheadModel, ch: ChannelSet, sigma2: float, scheme="ZF",
                      merged_size: Optional[int] = None,
                      grand_rates: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-player overhead vector.

    ``merged_size`` is the size of the coalition the players would belong to
    after the contemplated merge (needed by the size-proportional model).
    """
    k = ch.n_links
    if model.kind == "zero":
        return np.zeros(k)
    if model.kind == "explicit":
        if len(model.values) != k:
            raise ValueError(f"expected {k} overheads, got {len(model.values)}")
        return np.array(model.values)
    if grand_rates is None:
        grand_rates = Game(ch, sigma2, scheme).grand_rates()
    if model.kind == "uniform":
        return np.asarray(grand_rates) / k
    if merged_size is None:
        raise ValueError("size-proportional overhead needs the merged coalition size")
    return merged_size / k * np.asarray(grand_rates)


def q_deviate(cs, merging) -> tuple:
    """Replace the coalitions in ``merging`` by their union."""
    cs = canonical_structure(cs)
    merging = [tuple(sorted(c)) for c in merging]
    if len(merging) < 2:
        raise InvalidDeviationError("a merge needs at least two coalitions")
    if len(set(merging)) != len(merging) or any(c not in cs for c in merging):
        raise InvalidDeviationError(f"{merging} is not a set of coalitions of {cs}")
    union = tuple(sorted(i for c in merging for i in c))
    rest = [c for c in cs if c not in merging]
    return canonical_structure(rest + [union])


def lex_r_combinations(m: int, r: int) -> list:
    """All ``r``-subsets of ``1..m`` in lexicographic order."""
    if r > m:
        return []
    if r < 1:
        raise ValueError("r must be positive")
    return [tuple(x + 1 for x in c) for c in combinations(range(m), r)]


def compare(before: float, after: float, eps: float) -> Message:
    """Message a player sends after comparing ``before - eps`` with ``after``."""
    diff = after - (before - eps)
    tol = TIE_RTOL * max(1.0, abs(before))
    if diff > tol:
        return Message.M1
    if diff < -tol:
        return Message.M3
    return Message.M2


def admissible(messages) -> bool:
    msgs = list(messages)
    return all(m in (Message.M1, Message.M2) for m in msgs) and Message.M1 in msgs


def _candidate_messages(game: Game, cs0, cs1, members, eps) -> dict:
    u0 = game.utilities(cs0)
    u1 = game.utilities(cs1)
    return {i: compare(u0[i], u1[i], eps[i]) for i in members}


def pareto_dominates(cs0, cs1, merging, eps, ch: ChannelSet, sigma2: float, scheme="ZF",
                     game: Optional[Game] = None) -> bool:
    """Whether the merging players prefer ``cs1`` to ``cs0``.

    Only members of the merged coalitions are consulted.
    """
    game = game or Game(ch, sigma2, scheme)
    cs0 = canonical_structure(cs0, ch.n_links)
    cs1 = canonical_structure(cs1, ch.n_links)
    members = sorted(i for c in merging for i in c)
    return admissible(_candidate_messages(game, cs0, cs1, members, eps).values())


@dataclass
class CandidateRecord:
    """One iteration: a tried merge and the members' replies."""

    iteration: int
    merging: tuple
    messages: dict
    merged: bool

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "merging": [list(c) for c in self.merging],
            "messages": {str(i): m.name for i, m in self.messages.items()},
            "merged": self.merged,
        }


@dataclass
class DeviationEvent:
    """An accepted merge."""

    step: int
    merging: tuple
    structure: tuple
    messages: dict
    utility_before: dict
    utility_after: dict
    notified: tuple

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "merging": [list(c) for c in self.merging],
            "structure": [list(c) for c in self.structure],
            "messages": {str(i): m.name for i, m in self.messages.items()},
            "utility_before": {str(i): v for i, v in self.utility_before.items()},
            "utility_after": {str(i): v for i, v in self.utility_after.items()},
            "m4_to": list(self.notified),
        }


@dataclass
class FormationResult:
    final: tuple
    theta: int
    n_iter: int
    trace: list = field(default_factory=list)
    log: list = field(default_factory=list)
    n_links: int = 0
    q: int = 2
    scheme: str = "ZF"
    overhead: str = "zero"
    rates: Optional[np.ndarray] = None

    @property
    def n_coalitions(self) -> int:
        return len(self.final)

    def to_dict(self) -> dict:
        return {
            "n_links": self.n_links,
            "q": self.q,
            "scheme": self.scheme,
            "overhead": self.overhead,
            "final": [list(c) for c in self.final],
            "theta": self.theta,
            "n_iter": self.n_iter,
            "rates": None if self.rates is None else [float(x) for x in self.rates],
            "merges": [e.to_dict() for e in self.trace],
            "messages": [r.to_dict() for r in self.log],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "FormationResult":
        def structure(x):
            return tuple(tuple(c) for c in x)

        trace = [DeviationEvent(
            step=e["step"], merging=structure(e["merging"]),
            structure=structure(e["structure"]),
            messages={int(i): Message[m] for i, m in e["messages"].items()},
            utility_before={int(i): v for i, v in e["utility_before"].items()},
            utility_after={int(i): v for i, v in e["utility_after"].items()},
            notified=tuple(e["m4_to"])) for e in d["merges"]]
        log = [CandidateRecord(
            iteration=r["iteration"], merging=structure(r["merging"]),
            messages={int(i): Message[m] for i, m in r["messages"].items()},
            merged=r["merged"]) for r in d["messages"]]
        rates = d.get("rates")
        return cls(final=structure(d["final"]), theta=d["theta"], n_iter=d["n_iter"],
                   trace=trace, log=log, n_links=d["n_links"], q=d["q"],
                   scheme=d["scheme"], overhead=d["overhead"],
                   rates=None if rates is None else np.array(rates))


def run_formation(ch: ChannelSet, sigma2: float, model: OverheadModel = OverheadModel(),
                  q: int = 2, scheme="ZF", record: bool = True,
                  game: Optional[Game] = None) -> FormationResult:
    """Run the merge algorithm from all-singleton coalitions.

    For each ``r`` from ``min(q, |CS|)`` down to 2 the ``r``-combinations of
    the current coalitions are tried in lexicographic order; after a merge the
    scan restarts at ``r = min(q, |CS|)``.  Stops when the grand coalition has
    formed or no merge of any admissible size is accepted.
    """
    k = ch.n_links
    if k < 2 or q < 2:
        raise ValueError("need K >= 2 and q >= 2")
    game = game or Game(ch, sigma2, scheme)
    grand = game.grand_rates() if model.needs_grand_rates else None
    fixed_eps = None
    if model.kind != "size":
        fixed_eps = resolve_overheads(model, ch, sigma2, scheme, grand_rates=grand)

    cs = singletons(k)
    r = min(q, len(cs))
    theta = 0
    n_iter = 0
    trace, log = [], []
    while r >= 2 and len(cs) >= 2:
        for idx in combinations(range(len(cs)), r):
            n_iter += 1
            merging = tuple(cs[j] for j in idx)
            members = sorted(i for c in merging for i in c)
            cs1 = q_deviate(cs, merging)
            eps = fixed_eps if fixed_eps is not None else resolve_overheads(
                model, ch, sigma2, scheme, merged_size=len(members), grand_rates=grand)
            msgs = _candidate_messages(game, cs, cs1, members, eps)
            theta += len(members)
            accepted = admissible(msgs.values())
            if record:
                log.append(CandidateRecord(n_iter, merging, msgs, accepted))
            if accepted:
                if record:
                    u0, u1 = game.utilities(cs), game.utilities(cs1)
                    trace.append(DeviationEvent(
                        step=len(trace) + 1, merging=merging, structure=cs1, messages=msgs,
                        utility_before={i: float(u0[i]) for i in members},
                        utility_after={i: float(u1[i]) for i in members},
                        notified=tuple(i for i in range(k) if i not in members)))
                cs = cs1
                r = min(q, len(cs))
                break
        else:
            r -= 1
    return FormationResult(final=cs, theta=theta, n_iter=n_iter, trace=trace, log=log,
                           n_links=k, q=q, scheme=BfScheme(scheme).value,
                           overhead=model.tag, rates=game.utilities(cs).copy())


def replay_counts(merges: Sequence[tuple], n_links: int, q: int) -> tuple:
    """Recount ``(theta, n_iter)`` from the accepted merges alone.

    Re-walks the lexicographic scan, accepting exactly the recorded merges.
    """
    pending = [tuple(tuple(c) for c in m) for m in merges]
    cs = singletons(n_links)
    r = min(q, len(cs))
    theta = n_iter = 0
    while r >= 2 and len(cs) >= 2:
        for idx in combinations(range(len(cs)), r):
            n_iter += 1
            merging = tuple(cs[j] for j in idx)
            theta += sum(len(c) for c in merging)
            if pending and merging == pending[0]:
                pending.pop(0)
                cs = q_deviate(cs, merging)
                r = min(q, len(cs))
                break
        else:
            r -= 1
    if pending:
        raise ValueError("recorded merges are not reachable by the scan")
    return theta, n_iter


def verify_stable(cs, q: int, model: OverheadModel, ch: ChannelSet, sigma2: float,
                  scheme="ZF", max_coalitions: int = DEFAULT_MAX_COALITIONS,
                  game: Optional[Game] = None) -> bool:
    """True iff no merge of 2..q coalitions of ``cs`` is accepted by its members."""
    cs = canonical_structure(cs, ch.n_links)
    if len(cs) > max_coalitions:
        raise BlowupGuardError(
            f"{len(cs)} coalitions exceed the exhaustive-check cap of {max_coalitions}")
    game = game or Game(ch, sigma2, scheme)
    grand = game.grand_rates() if model.needs_grand_rates else None
    for r in range(2, min(q, len(cs)) + 1):
        for merging in combinations(cs, r):
            members = sorted(i for c in merging for i in c)
            eps = resolve_overheads(model, ch, sigma2, scheme, merged_size=len(members),
                                    grand_rates=grand)
            cs1 = q_deviate(cs, merging)
            if admissible(_candidate_messages(game, cs, cs1, members, eps).values()):
                return False
    return True


def iteration_bound(n_links: int, q: int) -> int:
    return worst_case_iters(n_links, q)
