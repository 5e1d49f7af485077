"""Consensus over noisy broadcast channels: structure, capacity, codes, decoders and error estimation."""

from .channel import (
    Alphabet,
    BroadcastChannel,
    PointToPointChannel,
    load_channel,
    make_fig3_channel,
    make_identity_channel,
    make_independent_bec,
    make_two_step_bec,
    marginal,
    validate_channel,
)
from .common import build_common_structure, find_mixing_kernel
from .errors import ConsensusLabError

__all__ = [
    "Alphabet",
    "BroadcastChannel",
    "ConsensusLabError",
    "PointToPointChannel",
    "build_common_structure",
    "find_mixing_kernel",
    "load_channel",
    "make_fig3_channel",
    "make_identity_channel",
    "make_independent_bec",
    "make_two_step_bec",
    "marginal",
    "validate_channel",
]
