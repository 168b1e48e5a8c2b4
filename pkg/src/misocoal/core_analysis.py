"""Closed-form emptiness conditions for the weak and strong epsilon-core.

For a player ``i`` in a deviating coalition ``S`` (zero-forcing cooperation,
outsiders on MRT) staying in the grand coalition is preferred iff

    f(s) = (2^e - 1) s^2 + Psi s + 2^e C B >= 0,   s = sigma2 > 0,

with ``Psi = 2^e (B + C) - (B + A)`` and discriminant
``Delta = Psi^2 - 4 (2^e - 1) 2^e C B``.  Depending on ``e`` and the signs of
``Delta`` and ``Psi`` the admissible noise powers form one of four shapes
(cases I-IV below).  The core is nonempty at ``sigma2`` iff every
``(i, S)`` pair admits it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np

from .beamforming import mrt, mrt_profile, profile_for_coalition, zf
from .errors import BlowupGuardError, InvalidNoiseError
from .rates import gain_matrix, rates_from_gains
from .scenario import ChannelSet

DEFAULT_MAX_LINKS = 16
# Discriminant treated as a double root when |Delta| <= this * Psi^2.
DOUBLE_ROOT_RTOL = 1e-12
# Singleton-threshold pairs with ||h||^2 - A below this fraction of ||h||^2 are costless ZF.
COSTLESS_ZF_RTOL = 1e-12


@dataclass(frozen=True)
class CoalitionParams:
    """Power terms of one (player, coalition) pair.

    ``A``: direct gain under ZF toward ``S``; ``B``: MRT interference from
    links outside ``S``; ``C``: direct gain under ZF toward everyone.
    ``psi`` and ``delta`` use the overhead ``eps`` stored alongside.
    """

    A: float
    B: float
    C: float
    eps: float
    psi: float
    delta: float


@dataclass(frozen=True)
class SigmaBounds:
    """Set of noise powers at which one pair does not want to deviate.

    ``complement=False``: ``lower <= sigma2 <= upper``.
    ``complement=True`` (case IV): ``sigma2 <= upper or sigma2 >= lower``.
    """

    case: str
    lower: float
    upper: float
    complement: bool = False

    def holds(self, sigma2: float) -> bool:
        if self.complement:
            return sigma2 <= self.upper or sigma2 >= self.lower
        return self.lower <= sigma2 <= self.upper

    @property
    def unconditional(self) -> bool:
        return not self.complement and self.lower == 0.0 and self.upper == math.inf

    def excluded(self) -> Optional[tuple]:
        """Open interval of positive noise powers where the pair deviates."""
        if self.complement:
            return (self.upper, self.lower)
        if self.upper < math.inf:
            return (self.upper, math.inf)
        return None


def _pow2m1(eps: float) -> float:
    return math.expm1(eps * math.log(2.0))


def quadratic_terms(A: float, B: float, C: float, eps: float) -> tuple:
    """``(psi, delta)`` of the deviation quadratic."""
    t = 2.0 ** eps
    psi = t * (B + C) - (B + A)
    delta = psi * psi - 4.0 * _pow2m1(eps) * t * C * B
    return psi, delta


def make_params(A: float, B: float, C: float, eps: float) -> CoalitionParams:
    psi, delta = quadratic_terms(A, B, C, eps)
    return CoalitionParams(A=A, B=B, C=C, eps=eps, psi=psi, delta=delta)


def per_pair_condition_set(params: CoalitionParams, eps: Optional[float] = None) -> SigmaBounds:
    """Classify the quadratic into cases I-IV and return its admissible set."""
    if eps is None:
        eps = params.eps
    elif eps != params.eps:
        params = make_params(params.A, params.B, params.C, eps)
    if eps < 0:
        raise ValueError("overhead must be non-negative")
    A, B, C = params.A, params.B, params.C
    if eps == 0:
        if A > C:
            return SigmaBounds("I", 0.0, C * B / (A - C))
        return SigmaBounds("I", 0.0, math.inf)

    psi, delta = params.psi, params.delta
    if abs(delta) <= DOUBLE_ROOT_RTOL * psi * psi:
        delta = 0.0
    if delta < 0:
        return SigmaBounds("II", 0.0, math.inf)
    if psi >= 0:
        return SigmaBounds("III", 0.0, math.inf)
    a = _pow2m1(eps)
    c = (2.0 ** eps) * C * B
    # -psi + sqrt(delta) has no cancellation for psi < 0.  The small root
    # comes from the product of roots without dividing by a, which
    # underflows for tiny eps (big then correctly tends to infinity).
    q = -psi + math.sqrt(delta)
    big = q / (2.0 * a) if a > 0 else math.inf
    small = 2.0 * c / q
    return SigmaBounds("IV", big, small, complement=True)


def proper_subsets(n_links: int) -> Iterable[tuple]:
    """Nonempty proper subsets of ``0..K-1``, by size then lexicographic."""
    for size in range(1, n_links):
        yield from combinations(range(n_links), size)


def all_subsets_min2(n_links: int) -> Iterable[tuple]:
    for size in range(2, n_links + 1):
        yield from combinations(range(n_links), size)


def _check_size(n_links: int, max_links: int):
    if n_links > max_links:
        raise BlowupGuardError(
            f"K={n_links} exceeds the exhaustive-enumeration cap of {max_links}")


def _direct_gain(ch: ChannelSet, i: int, w: np.ndarray) -> float:
    return abs(np.vdot(ch.direct(i), w)) ** 2


def _mrt_interference(ch: ChannelSet) -> np.ndarray:
    """``I[j, i] = |h_ji^H w_j^MRT|^2``."""
    g = gain_matrix(mrt_profile(ch), ch)
    np.fill_diagonal(g, 0.0)
    return g


def coalition_params(i: int, coalition, ch: ChannelSet, eps_i: float = 0.0) -> CoalitionParams:
    """``A``, ``B``, ``C``, ``Psi`` and ``Delta`` for player ``i`` in ``coalition``."""
    members = tuple(sorted(set(coalition)))
    if i not in members:
        raise ValueError(f"link {i} not in {members}")
    k = ch.n_links
    A = _direct_gain(ch, i, zf(i, members, ch))
    C = _direct_gain(ch, i, zf(i, tuple(range(k)), ch))
    B = float(sum(abs(np.vdot(ch.h[j][i], mrt(ch.direct(j)))) ** 2
                  for j in range(k) if j not in members))
    return make_params(A, B, C, eps_i)


@dataclass(frozen=True)
class PairEntry:
    player: int
    coalition: tuple
    params: CoalitionParams
    bounds: SigmaBounds

    @property
    def mask(self) -> int:
        return sum(1 << j for j in self.coalition)


@dataclass(frozen=True)
class CoreReport:
    """Per-pair conditions and their aggregate for one channel realization.

    ``sigma_upper`` is the minimum of the per-pair upper thresholds and
    ``sigma_lower`` the maximum of the lower ones.  :meth:`nonempty_at` is the
    exact verdict (every pair admits ``sigma2``); :meth:`threshold_verdict`
    uses only the two aggregate numbers, which is exact whenever
    :attr:`summary_exact` is true.
    """

    flavor: str
    eps: tuple
    entries: tuple
    sigma_upper: float
    sigma_lower: float

    def nonempty_at(self, sigma2: float) -> bool:
        return all(e.bounds.holds(sigma2) for e in self.entries)

    def threshold_verdict(self, sigma2: float) -> bool:
        if self.sigma_lower > 0:
            return sigma2 <= self.sigma_upper or sigma2 >= self.sigma_lower
        return sigma2 <= self.sigma_upper

    @property
    def globally_nonempty(self) -> bool:
        """Nonempty for every positive noise power (no pair ever deviates)."""
        return all(e.bounds.unconditional for e in self.entries)

    def excluded_intervals(self) -> list:
        """Merged open intervals of noise power where the core is empty."""
        spans = sorted(x for x in (e.bounds.excluded() for e in self.entries)
                       if x is not None and x[0] < x[1])
        merged = []
        for lo, hi in spans:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        return merged

    @property
    def summary_exact(self) -> bool:
        merged = self.excluded_intervals()
        if not merged:
            return self.sigma_upper == math.inf
        if len(merged) != 1:
            return False
        lo, hi = merged[0]
        expected_hi = self.sigma_lower if self.sigma_lower > 0 else math.inf
        return lo == self.sigma_upper and hi == expected_hi

    def thresholds(self) -> list:
        """Every finite positive per-pair boundary."""
        out = set()
        for e in self.entries:
            for v in (e.bounds.lower, e.bounds.upper):
                if 0 < v < math.inf:
                    out.add(v)
        return sorted(out)

    def to_dict(self) -> dict:
        return {
            "flavor": self.flavor,
            "eps": list(self.eps),
            "sigma_upper": _json_float(self.sigma_upper),
            "sigma_lower": _json_float(self.sigma_lower),
            "globally_nonempty": self.globally_nonempty,
            "excluded_intervals": [[_json_float(a), _json_float(b)]
                                   for a, b in self.excluded_intervals()],
            "pairs": [
                {
                    "player": e.player,
                    "coalition": list(e.coalition),
                    "mask": e.mask,
                    **{k: _json_float(v) for k, v in asdict(e.params).items()},
                    "case": e.bounds.case,
                    "lower": _json_float(e.bounds.lower),
                    "upper": _json_float(e.bounds.upper),
                    "complement": e.bounds.complement,
                }
                for e in self.entries
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["i", "S_mask", "A", "B", "C", "Psi", "Delta",
                         "lower", "upper", "case", "complement"])
        for e in self.entries:
            p, b = e.params, e.bounds
            writer.writerow([e.player, e.mask] + [_fmt(v) for v in
                            (p.A, p.B, p.C, p.psi, p.delta, b.lower, b.upper)]
                            + [b.case, int(b.complement)])
        return buf.getvalue()


def _json_float(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def coalition_terms(ch: ChannelSet, max_links: int = DEFAULT_MAX_LINKS) -> list:
    """``(i, S, A, B, C)`` for every proper coalition and member, in report order."""
    k = ch.n_links
    _check_size(k, max_links)
    interference = _mrt_interference(ch)
    grand = tuple(range(k))
    C = [_direct_gain(ch, i, zf(i, grand, ch)) for i in range(k)]
    terms = []
    for coalition in proper_subsets(k):
        outside = [j for j in range(k) if j not in coalition]
        for i in coalition:
            A = _direct_gain(ch, i, zf(i, coalition, ch))
            B = float(interference[outside, i].sum())
            terms.append((i, coalition, A, B, C[i]))
    return terms


def _core_report(ch: ChannelSet, eps: Sequence[float], flavor: str,
                 max_links: int, terms: Optional[list]) -> CoreReport:
    k = ch.n_links
    eps = tuple(float(e) for e in eps)
    if len(eps) != k or min(eps) < 0:
        raise ValueError("need one non-negative overhead per link")
    if terms is None:
        terms = coalition_terms(ch, max_links)
    entries = []
    for i, coalition, A, B, C in terms:
        e_i = eps[i] / len(coalition) if flavor == "strong" else eps[i]
        params = make_params(A, B, C, e_i)
        entries.append(PairEntry(i, coalition, params, per_pair_condition_set(params)))
    upper = min((e.bounds.upper for e in entries), default=math.inf)
    lower = max((e.bounds.lower for e in entries), default=0.0)
    return CoreReport(flavor, eps, tuple(entries), upper, lower)


def weak_core_report(ch: ChannelSet, eps: Sequence[float],
                     max_links: int = DEFAULT_MAX_LINKS, terms: Optional[list] = None) -> CoreReport:
    return _core_report(ch, eps, "weak", max_links, terms)


def strong_core_report(ch: ChannelSet, eps: Sequence[float],
                       max_links: int = DEFAULT_MAX_LINKS, terms: Optional[list] = None) -> CoreReport:
    """Like :func:`weak_core_report` with overhead ``eps_i / |S|`` per pair."""
    return _core_report(ch, eps, "strong", max_links, terms)


def zero_overhead_threshold(ch: ChannelSet, max_links: int = DEFAULT_MAX_LINKS) -> float:
    """Largest noise power with a nonempty core when no overhead is charged.

    Computed directly as ``min B C / (A - C)`` over pairs with ``A > C``.
    """
    k = ch.n_links
    _check_size(k, max_links)
    interference = _mrt_interference(ch)
    grand = tuple(range(k))
    best = math.inf
    for coalition in proper_subsets(k):
        outside = [j for j in range(k) if j not in coalition]
        for i in coalition:
            A = _direct_gain(ch, i, zf(i, coalition, ch))
            C = _direct_gain(ch, i, zf(i, grand, ch))
            if A > C:
                B = float(interference[outside, i].sum())
                best = min(best, B * C / (A - C))
    return best


def deviation_gains(ch: ChannelSet, scheme="ZF", sigma2: float = 1.0,
                    max_links: int = DEFAULT_MAX_LINKS) -> dict:
    """Gain matrix of ``V(S)`` for every nonempty subset, keyed by coalition.

    For ZF the profiles do not depend on ``sigma2``.
    """
    k = ch.n_links
    _check_size(k, max_links)
    out = {}
    for size in range(1, k + 1):
        for coalition in combinations(range(k), size):
            out[coalition] = gain_matrix(profile_for_coalition(coalition, ch, sigma2, scheme), ch)
    return out


def bruteforce_verdicts(ch: ChannelSet, eps: Sequence[float], sigma2_grid: Sequence[float],
                        flavor: str = "weak", gains: Optional[dict] = None,
                        max_links: int = DEFAULT_MAX_LINKS) -> np.ndarray:
    """Direct rate comparison of every deviation at each grid point (ZF)."""
    k = ch.n_links
    if gains is None:
        gains = deviation_gains(ch, "ZF", max_links=max_links)
    eps = np.asarray(eps, dtype=float)
    grand = tuple(range(k))
    verdicts = []
    for s2 in sigma2_grid:
        if not s2 > 0:
            raise InvalidNoiseError("sigma2 must be positive")
        u_grand = rates_from_gains(gains[grand], s2)
        ok = True
        for coalition, g in gains.items():
            if coalition == grand:
                continue
            u = rates_from_gains(g, s2)
            members = list(coalition)
            charge = eps[members] / len(members) if flavor == "strong" else eps[members]
            if np.any(u[members] - charge > u_grand[members]):
                ok = False
                break
        verdicts.append(ok)
    return np.array(verdicts, dtype=bool)


def weak_core_nonempty_bruteforce(ch: ChannelSet, eps: Sequence[float], sigma2: float,
                                  max_links: int = DEFAULT_MAX_LINKS) -> bool:
    """True iff no proper coalition gains more than its overhead by deviating."""
    return bool(bruteforce_verdicts(ch, eps, [sigma2], "weak", max_links=max_links)[0])


def strong_core_nonempty_bruteforce(ch: ChannelSet, eps: Sequence[float], sigma2: float,
                                    max_links: int = DEFAULT_MAX_LINKS) -> bool:
    return bool(bruteforce_verdicts(ch, eps, [sigma2], "strong", max_links=max_links)[0])


def singleton_threshold(ch: ChannelSet, max_links: int = DEFAULT_MAX_LINKS) -> float:
    """Noise power above which no player gains from any coalition (ZF).

    Pairs where zero forcing costs player ``i`` nothing (``A = ||h_ii||^2``)
    impose no bound.  The result is clamped at 0, meaning "any noise power".
    """
    k = ch.n_links
    if k < 2:
        raise ValueError("need at least two links")
    _check_size(k, max_links)
    interference = _mrt_interference(ch)
    best = 0.0
    for coalition in all_subsets_min2(k):
        outside = [j for j in range(k) if j not in coalition]
        for i in coalition:
            h2 = float(np.vdot(ch.direct(i), ch.direct(i)).real)
            A = _direct_gain(ch, i, zf(i, coalition, ch))
            denom = h2 - A
            if denom <= COSTLESS_ZF_RTOL * h2:
                continue
            b_single = float(interference[:, i].sum())
            b_coal = float(interference[outside, i].sum())
            best = max(best, (A * b_single - h2 * b_coal) / denom)
    return best


def cost_of_stability(ch: ChannelSet, sigma2: float, tol: float = 1e-6,
                      eps_max: Optional[float] = None,
                      max_links: int = DEFAULT_MAX_LINKS) -> float:
    """Smallest uniform overhead making the weak epsilon-core nonempty.

    Bisection on the brute-force verdict; the returned value is on the
    nonempty side and within ``tol`` of the boundary.
    """
    if not sigma2 > 0:
        raise InvalidNoiseError("sigma2 must be positive")
    k = ch.n_links
    gains = deviation_gains(ch, "ZF", max_links=max_links)

    def nonempty(e):
        return bool(bruteforce_verdicts(ch, [e] * k, [sigma2], gains=gains)[0])

    if nonempty(0.0):
        return 0.0
    hi = 1.0 if eps_max is None else float(eps_max)
    while not nonempty(hi):
        if eps_max is not None:
            raise ValueError(f"weak core still empty at eps_max={eps_max}")
        hi *= 2.0
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if nonempty(mid):
            hi = mid
        else:
            lo = mid
    return hi
