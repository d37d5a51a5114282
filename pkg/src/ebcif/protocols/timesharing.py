"""Baseline: split 2m slots between the users, each running its own erasure code.

No feedback is used.  User i gets n_i slots and sends the largest message
such a block can carry.
"""

from __future__ import annotations

import math

import numpy as np

from ..channel import ChannelParams
from .common import Link, ProtocolConfig, RealCoder, SimReport, finish_report, guarded_block, split_rng


def _largest_message(n: int, erasure: float, cfg: ProtocolConfig) -> int:
    """Largest k whose guarded block fits in n slots."""
    if n <= 0 or erasure >= 1:
        return 0
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if guarded_block(mid, erasure, cfg) <= n:
            lo = mid
        else:
            hi = mid - 1
    return lo


def run_timesharing(params: ChannelParams, cfg: ProtocolConfig, rng: np.random.Generator | None = None, scramble=None) -> SimReport:
    total = 2 * cfg.m
    n1 = int(round(cfg.share1 * total))
    n = (n1, total - n1)
    d = (params.delta1, params.delta2)
    phases = {"user1": n[0], "user2": n[1]}
    if cfg.mode == "expected_flow":
        k = tuple(int(math.floor(n[i] * (1 - d[i]) + 1e-9)) for i in range(2))
        return finish_report("timesharing", cfg, phases, k, (True, True))
    if rng is None:
        raise ValueError("monte_carlo mode needs an rng")

    k = tuple(_largest_message(n[i], d[i], cfg) for i in range(2))
    chan_rng, code_rng = split_rng(rng)
    link = Link(params, chan_rng, scramble)
    coder = RealCoder(k[0], k[1], cfg, code_rng) if cfg.real_coding and max(k) <= cfg.max_real_m else None
    ok = []
    detail = []
    for i in range(2):
        block, _ = link.send(n[i])
        link.record(f"user{i + 1}", n[i], k[i])
        got = getattr(block, f"s{i + 1}")
        ok.append(int(got.sum()) >= k[i])
        if not ok[-1]:
            detail.append(f"rx{i + 1}: received {int(got.sum())} of {k[i]}")
        if coder is not None and k[i]:
            packets = coder.coded(coder.unit_rows(i + 1), n[i])
            coder.deliver(1, packets, block.s1 == 1)
            coder.deliver(2, packets, block.s2 == 1)
    genie_ok = tuple(ok)
    if coder is not None:
        res = [coder.decode(1), coder.decode(2)]
        ok = [r[0] for r in res]
        detail = [r[1] for r in res if r[1]]
    return finish_report(
        "timesharing",
        cfg,
        phases,
        k,
        tuple(ok),
        decode_failure_detail=detail,
        extra={"genie_ok": genie_ok},
        tx_log=link.log,
    )
