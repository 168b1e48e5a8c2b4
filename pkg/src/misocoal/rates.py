"""Achievable rates under single-user decoding."""

from __future__ import annotations

import numpy as np

from .errors import InvalidNoiseError
from .scenario import ChannelSet


def gain_matrix(profile, ch: ChannelSet) -> np.ndarray:
    """``G[j, i] = |h_ji^H w_j|^2``: power from transmitter j at receiver i."""
    return np.stack([np.abs(ch.h[j].conj() @ w) ** 2 for j, w in enumerate(profile)])


def rates_from_gains(gains: np.ndarray, sigma2: float) -> np.ndarray:
    if not sigma2 > 0:
        raise InvalidNoiseError("sigma2 must be positive")
    signal = np.diag(gains)
    interference = gains.sum(axis=0) - signal
    return np.log2(1.0 + signal / (interference + sigma2))


def rate(i: int, profile, ch: ChannelSet, sigma2: float) -> float:
    """Rate of link ``i`` in bits per channel use."""
    if not sigma2 > 0:
        raise InvalidNoiseError("sigma2 must be positive")
    signal = abs(np.vdot(ch.h[i][i], profile[i])) ** 2
    interference = sum(abs(np.vdot(ch.h[j][i], profile[j])) ** 2
                       for j in range(ch.n_links) if j != i)
    return float(np.log2(1.0 + signal / (interference + sigma2)))


def rates_all(profile, ch: ChannelSet, sigma2: float) -> np.ndarray:
    """Per-link :func:`rate` for every link of the profile."""
    return np.array([rate(i, profile, ch, sigma2) for i in range(ch.n_links)])
