"""Two-user erasure broadcast channel with intermittent feedback: channel
model, outer bounds, transmission protocols and a Monte Carlo harness."""

from .bounds import RatePoint, RateRegion, beta, case2_corner, outer_region, reference_regions, thm3_points
from .channel import ChannelParams, FeedbackJoint, blind_index_channel, preset
from .protocols import ProtocolConfig, SimReport, run_case2, run_dn, run_thm3, run_timesharing

__all__ = [
    "ChannelParams",
    "FeedbackJoint",
    "ProtocolConfig",
    "RatePoint",
    "RateRegion",
    "SimReport",
    "beta",
    "blind_index_channel",
    "case2_corner",
    "outer_region",
    "preset",
    "reference_regions",
    "run_case2",
    "run_dn",
    "run_thm3",
    "run_timesharing",
    "thm3_points",
]
