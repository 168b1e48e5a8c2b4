"""Topologies, channel sampling and SNR conversion.

Links are indexed ``0 .. K-1``.  ``ChannelSet.h[i][j]`` is the channel from
transmitter ``i`` to receiver ``j`` (a complex vector of length ``N_i``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import AmbiguousSNRError, InvalidScenarioError

# Relative tolerance when checking that all direct links share one distance.
_DIRECT_DISTANCE_RTOL = 1e-9


@dataclass(frozen=True)
class Scenario:
    """Static description of a K-link MISO interference channel.

    Parameters
    ----------
    n_links : int
        Number of transmitter/receiver pairs ``K``.
    antennas : tuple of int
        Antenna count per transmitter, each at least 2.
    tx_positions, rx_positions : ndarray, optional
        ``(K, 2)`` planar coordinates in meters.  Either both or neither.
    pathloss_exponent : float
        Path-loss exponent used with positions.
    direct_distance : float, optional
        Reference distance for the SNR definition.  When omitted it is taken
        from the positions (all direct links must agree) or set to 1.
    """

    n_links: int
    antennas: tuple
    tx_positions: Optional[np.ndarray] = field(default=None, compare=False)
    rx_positions: Optional[np.ndarray] = field(default=None, compare=False)
    pathloss_exponent: float = 3.0
    direct_distance: Optional[float] = None

    def __post_init__(self):
        if self.n_links < 1:
            raise InvalidScenarioError("need at least one link")
        ants = self.antennas
        if np.isscalar(ants):
            ants = (int(ants),) * self.n_links
        ants = tuple(int(a) for a in ants)
        if len(ants) != self.n_links:
            raise InvalidScenarioError(
                f"expected {self.n_links} antenna counts, got {len(ants)}")
        if min(ants) < 2:
            raise InvalidScenarioError("every transmitter needs N_i >= 2 antennas")
        object.__setattr__(self, "antennas", ants)

        if self.pathloss_exponent <= 0:
            raise InvalidScenarioError("path-loss exponent must be positive")
        if (self.tx_positions is None) != (self.rx_positions is None):
            raise InvalidScenarioError("give both tx and rx positions or neither")
        if self.tx_positions is not None:
            tx = np.asarray(self.tx_positions, dtype=float)
            rx = np.asarray(self.rx_positions, dtype=float)
            if tx.shape != (self.n_links, 2) or rx.shape != (self.n_links, 2):
                raise InvalidScenarioError("positions must have shape (K, 2)")
            tx.setflags(write=False)
            rx.setflags(write=False)
            object.__setattr__(self, "tx_positions", tx)
            object.__setattr__(self, "rx_positions", rx)
            if np.any(self.distances() <= 0):
                raise InvalidScenarioError("a transmitter coincides with a receiver")
        if self.direct_distance is not None and self.direct_distance <= 0:
            raise InvalidScenarioError("direct distance must be positive")

    @property
    def has_positions(self) -> bool:
        return self.tx_positions is not None

    def distances(self) -> np.ndarray:
        """``d[k, l]``: distance from transmitter ``k`` to receiver ``l``."""
        if not self.has_positions:
            raise InvalidScenarioError("scenario has no positions")
        diff = self.tx_positions[:, None, :] - self.rx_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def reference_distance(self) -> float:
        """Distance ``d_ref`` entering ``SNR = d_ref**-delta / sigma2``."""
        if self.has_positions:
            direct = np.diag(self.distances())
            d0 = direct[0]
            if np.any(np.abs(direct - d0) > _DIRECT_DISTANCE_RTOL * d0):
                raise AmbiguousSNRError(
                    "direct-link distances differ; SNR is not uniquely defined")
            if (self.direct_distance is not None
                    and abs(self.direct_distance - d0) > _DIRECT_DISTANCE_RTOL * d0):
                raise AmbiguousSNRError(
                    "direct_distance disagrees with the positions")
            return float(d0)
        if self.direct_distance is not None:
            return float(self.direct_distance)
        return 1.0

    @classmethod
    def iid(cls, n_links: int, antennas: int) -> "Scenario":
        """Position-free scenario with i.i.d. Rayleigh channels."""
        return cls(n_links=n_links, antennas=antennas)

    @classmethod
    def from_dict(cls, cfg: dict) -> "Scenario":
        try:
            k = int(cfg["n_links"])
            antennas = cfg["antennas"]
        except KeyError as exc:
            raise InvalidScenarioError(f"missing scenario key {exc}") from None
        tx = cfg.get("tx_positions")
        rx = cfg.get("rx_positions")
        return cls(
            n_links=k,
            antennas=antennas,
            tx_positions=None if tx is None else np.asarray(tx, dtype=float),
            rx_positions=None if rx is None else np.asarray(rx, dtype=float),
            pathloss_exponent=float(cfg.get("pathloss_exponent", 3.0)),
            direct_distance=cfg.get("direct_distance"),
        )

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = {
            "n_links": self.n_links,
            "antennas": list(self.antennas),
            "pathloss_exponent": self.pathloss_exponent,
            "direct_distance": self.direct_distance,
        }
        if self.has_positions:
            out["tx_positions"] = self.tx_positions.tolist()
            out["rx_positions"] = self.rx_positions.tolist()
        return out


def builtin_topology() -> Scenario:
    """The shipped 8-link planar topology (8 antennas per transmitter)."""
    return Scenario.load(Path(__file__).with_name("data") / "topology8.json")


@dataclass(frozen=True)
class ChannelSet:
    """All channel vectors of one realization.

    ``h[i]`` is an ``(K, N_i)`` complex array whose row ``j`` is ``h_ij``.
    """

    h: tuple

    def __post_init__(self):
        hs = tuple(np.asarray(x, dtype=complex) for x in self.h)
        k = len(hs)
        for i, hi in enumerate(hs):
            if hi.ndim != 2 or hi.shape[0] != k:
                raise InvalidScenarioError(f"h[{i}] must have shape (K, N_i)")
            if not np.any(hi[i]):
                raise InvalidScenarioError(f"direct channel h[{i}][{i}] is zero")
            hi.setflags(write=False)
        object.__setattr__(self, "h", hs)

    @property
    def n_links(self) -> int:
        return len(self.h)

    def antennas(self, i: int) -> int:
        return self.h[i].shape[1]

    def direct(self, i: int) -> np.ndarray:
        return self.h[i][i]

    @classmethod
    def from_vectors(cls, vectors: Sequence[Sequence]) -> "ChannelSet":
        """Build from a nested ``vectors[i][j] = h_ij`` sequence."""
        return cls(tuple(np.array(row, dtype=complex) for row in vectors))

    def to_dict(self) -> dict:
        return {
            "real": [hi.real.tolist() for hi in self.h],
            "imag": [hi.imag.tolist() for hi in self.h],
        }

    @classmethod
    def from_dict(cls, cfg: dict) -> "ChannelSet":
        return cls(tuple(np.asarray(re) + 1j * np.asarray(im)
                         for re, im in zip(cfg["real"], cfg["imag"])))


def realization_rng(seed: int, realization: int) -> np.random.Generator:
    """Independent PCG64 stream for one ``(seed, realization)`` pair."""
    if seed < 0 or realization < 0:
        raise ValueError("seed and realization must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, realization])))


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    # CN(0, 1): independent real/imag parts with variance 1/2 each
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(scenario: Scenario, seed: int, realization: int) -> ChannelSet:
    """Draw one channel realization.

    With positions, ``h_kl = d_kl**(-delta/2) * g / ||g||`` with
    ``g ~ CN(0, I)``; without positions ``h_kl ~ CN(0, I)`` directly.
    """
    rng = realization_rng(seed, realization)
    k = scenario.n_links
    hs = []
    for i, n in enumerate(scenario.antennas):
        hs.append(_complex_normal(rng, (k, n)))
    if scenario.has_positions:
        gain = scenario.distances() ** (-scenario.pathloss_exponent / 2.0)
        for i in range(k):
            hs[i] = hs[i] / np.linalg.norm(hs[i], axis=1, keepdims=True) * gain[i][:, None]
    return ChannelSet(tuple(hs))


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def snr_to_sigma2(scenario: Scenario, snr: float) -> float:
    """Noise power for a linear SNR, ``sigma2 = d_ref**-delta / snr``."""
    if snr <= 0:
        raise ValueError("SNR must be positive")
    d_ref = scenario.reference_distance()
    if d_ref == 1.0:
        return 1.0 / snr
    return d_ref ** (-scenario.pathloss_exponent) / snr
