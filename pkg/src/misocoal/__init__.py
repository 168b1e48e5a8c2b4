"""Coalitional beamforming games in the K-user MISO interference channel."""

from .beamforming import (BfScheme, canonical_structure, mrt, profile_for_coalition,
                          profile_for_structure, wf, zf)
from .combinatorics import merge_count, split_count, stirling2, worst_case_iters
from .core_analysis import (coalition_params, cost_of_stability, per_pair_condition_set,
                            singleton_threshold, strong_core_report, weak_core_report,
                            weak_core_nonempty_bruteforce)
from .formation import (Message, OverheadModel, pareto_dominates, q_deviate, run_formation,
                        verify_stable)
from .rates import rate, rates_all
from .scenario import ChannelSet, Scenario, db_to_linear, sample_channels, snr_to_sigma2

__version__ = "0.1.0"
