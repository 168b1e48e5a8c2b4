"""MRT, zero-forcing and Wiener-filter beamformers and strategy profiles.

A coalition is a sorted tuple of link indices; a coalition structure is a
tuple of coalitions in canonical order (sorted by smallest member).
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable

import numpy as np
import scipy.linalg

from .errors import DegenerateChannelError, InvalidNoiseError, InvalidScenarioError
from .scenario import ChannelSet

# Projection norm at or below this fraction of ||h_ii|| counts as "switched off".
SWITCH_OFF_RTOL = 1e-12


class BfScheme(str, Enum):
    ZF = "ZF"
    WF = "WF"


def canonical_structure(blocks: Iterable[Iterable[int]], n_links: int | None = None) -> tuple:
    """Sort members and coalitions; check disjointness and coverage."""
    cs = tuple(sorted((tuple(sorted(set(b))) for b in blocks), key=lambda c: c[0] if c else -1))
    members = [i for c in cs for i in c]
    if any(len(c) == 0 for c in cs):
        raise InvalidScenarioError("empty coalition in structure")
    if len(members) != len(set(members)):
        raise InvalidScenarioError("coalitions overlap")
    if n_links is not None and sorted(members) != list(range(n_links)):
        raise InvalidScenarioError(f"structure does not partition 0..{n_links - 1}")
    return cs


def singletons(n_links: int) -> tuple:
    return tuple((i,) for i in range(n_links))


def mrt(h_ii: np.ndarray) -> np.ndarray:
    """Maximum ratio transmission ``h / ||h||``."""
    h_ii = np.asarray(h_ii, dtype=complex)
    norm = np.linalg.norm(h_ii)
    if norm == 0:
        raise DegenerateChannelError("MRT undefined for a zero channel")
    return h_ii / norm


def null_space_component(h: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Project ``h`` onto the orthogonal complement of the columns of ``z``.

    An orthonormal basis for ``range(z)`` comes from the SVD, so collinear
    columns (rank-deficient ``z``) are handled.
    """
    if z.shape[1] == 0:
        return h.copy()
    u, s, _ = np.linalg.svd(z, full_matrices=False)
    tol = s[0] * max(z.shape) * np.finfo(float).eps if s.size else 0.0
    basis = u[:, s > tol]
    return h - basis @ (basis.conj().T @ h)


def _members(i: int, coalition) -> list:
    members = sorted(set(coalition))
    if i not in members:
        raise ValueError(f"link {i} is not in coalition {tuple(members)}")
    return members


def zf(i: int, coalition, ch: ChannelSet) -> np.ndarray:
    """Zero-forcing beamformer of transmitter ``i`` toward its partners.

    Returns MRT for a singleton coalition and the exact zero vector when the
    transmitter has fewer antennas than the coalition size or ``h_ii`` lies
    (numerically) in the span of the cross channels.
    """
    members = _members(i, coalition)
    h_ii = ch.direct(i)
    if len(members) == 1:
        return mrt(h_ii)
    n_i = ch.antennas(i)
    if n_i < len(members):
        return np.zeros(n_i, dtype=complex)
    others = [j for j in members if j != i]
    z = ch.h[i][others].T
    p = null_space_component(h_ii, z)
    norm = np.linalg.norm(p)
    if norm <= SWITCH_OFF_RTOL * np.linalg.norm(h_ii):
        return np.zeros(n_i, dtype=complex)
    return p / norm


def wf(i: int, coalition, ch: ChannelSet, sigma2: float) -> np.ndarray:
    """Wiener-filter precoder ``(sigma2 I + sum_j h_ij h_ij^H)^-1 h_ii``, normalized."""
    if not sigma2 > 0:
        raise InvalidNoiseError("WF needs sigma2 > 0; use zf() for the noiseless limit")
    members = _members(i, coalition)
    h_ii = ch.direct(i)
    if len(members) == 1:
        return mrt(h_ii)
    others = [j for j in members if j != i]
    z = ch.h[i][others].T
    gram = z @ z.conj().T
    gram[np.diag_indices_from(gram)] += sigma2
    x = scipy.linalg.solve(gram, h_ii, assume_a="pos")
    return x / np.linalg.norm(x)


def beamformer(i: int, coalition, ch: ChannelSet, sigma2: float, scheme) -> np.ndarray:
    if BfScheme(scheme) is BfScheme.ZF:
        return zf(i, coalition, ch)
    return wf(i, coalition, ch, sigma2)


def mrt_profile(ch: ChannelSet) -> tuple:
    """Joint MRT, the Nash equilibrium of the noncooperative game."""
    return tuple(mrt(ch.direct(i)) for i in range(ch.n_links))


def profile_for_coalition(coalition, ch: ChannelSet, sigma2: float, scheme) -> tuple:
    """Members of ``coalition`` cooperate with ``scheme``; outsiders play MRT."""
    members = set(coalition)
    if not members:
        raise ValueError("coalition must be nonempty")
    return tuple(
        beamformer(i, tuple(sorted(members)), ch, sigma2, scheme) if i in members
        else mrt(ch.direct(i))
        for i in range(ch.n_links))


def profile_for_structure(cs, ch: ChannelSet, sigma2: float, scheme) -> tuple:
    """Every link cooperates with ``scheme`` inside its own coalition."""
    cs = canonical_structure(cs, ch.n_links)
    profile = [None] * ch.n_links
    for coalition in cs:
        for i in coalition:
            profile[i] = beamformer(i, coalition, ch, sigma2, scheme)
    return tuple(profile)
