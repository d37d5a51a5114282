"""Transmission protocols for the two-user erasure broadcast channel."""

from .blind import run_thm3
from .case2 import run_case2
from .common import ProtocolConfig, SimReport
from .one_sided import run_dn
from .timesharing import run_timesharing

PROTOCOLS = {
    "case2": run_case2,
    "thm3": run_thm3,
    "dn": run_dn,
    "timesharing": run_timesharing,
}

__all__ = ["PROTOCOLS", "ProtocolConfig", "SimReport", "run_case2", "run_dn", "run_thm3", "run_timesharing"]
