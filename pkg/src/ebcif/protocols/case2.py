"""Recursive scheme for equal forward erasures and fully correlated feedback.

Each iteration sends coded packets for user 1, then for user 2, recording
from feedback the packets that only the unintended receiver got (``v12`` /
``v21``).  Slots without feedback are recycled: random combinations of
their packets become the next iteration's messages.  A XOR phase serves
v12 and v21 simultaneously.  Once both messages fall below the
termination threshold they are sent with two single-user erasure codes.
Decoding runs backwards from the termination blocks to iteration one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..bounds import TOL, is_fully_correlated
from ..channel import ChannelParams
from ..errors import DegenerateChannel, PreconditionViolated
from .common import (
    Link,
    ProtocolConfig,
    RealCoder,
    SimReport,
    ceil_frac,
    exact,
    expected_block,
    finish_report,
    guarded_block,
    split_rng,
)


def _check(params: ChannelParams) -> None:
    if abs(params.delta1 - params.delta2) > TOL:
        raise PreconditionViolated(f"needs delta1 == delta2, got {params.delta1} and {params.delta2}")
    if not is_fully_correlated(params.feedback):
        raise PreconditionViolated("needs fully correlated feedback (all four links on or off together)")
    if params.delta1 >= 1:
        raise DegenerateChannel("forward links always erased")


def run_case2(params: ChannelParams, cfg: ProtocolConfig, rng: np.random.Generator | None = None, scramble=None) -> SimReport:
    _check(params)
    if cfg.mode == "expected_flow":
        return _expected_flow(params, cfg)
    if rng is None:
        raise ValueError("monte_carlo mode needs an rng")
    return _monte_carlo(params, cfg, rng, scramble)


def _expected_flow(params: ChannelParams, cfg: ProtocolConfig) -> SimReport:
    d = exact(params.delta1)
    d12 = exact(params.delta12)
    df = exact(params.feedback.pmf[0])
    frac_v = (1 - df) * (d - d12) / (1 - d12)
    frac_nofb = df * (d - d12) / (1 - d12)

    phases: dict[str, int] = {}
    iterations = []
    msg = cfg.m
    thr = cfg.threshold(cfg.m)
    it = 0
    while msg > thr:
        n = ceil_frac(Fraction(msg) / (1 - d12))
        v = ceil_frac(frac_v * msg)
        nofb = ceil_frac(frac_nofb * msg)
        it += 1
        phases[f"iter{it}.phase1"] = n
        phases[f"iter{it}.phase2"] = n
        phases[f"iter{it}.xor"] = expected_block(v, d)
        iterations.append({"message": msg, "v": v, "nofb": nofb})
        if nofb >= msg:
            msg = nofb
            break
        msg = nofb
    if msg > 0:
        phases["termination.rx1"] = expected_block(msg, d)
        phases["termination.rx2"] = expected_block(msg, d)
    generated = sum(x["nofb"] for x in iterations)
    return finish_report(
        "case2",
        cfg,
        phases,
        (cfg.m, cfg.m),
        (True, True),
        extra={
            "iterations": iterations,
            "equations_generated": (generated, generated),
            "equal_xor_queues": True,
            "residual": (msg, msg),
        },
        audits={"equation_budget": generated <= cfg.m},
    )


@dataclass
class _Level:
    """Per-iteration decode context for the genie accounting."""

    message: list[int]
    dof: list[int] = field(default_factory=lambda: [0, 0])
    v: list[int] = field(default_factory=lambda: [0, 0])
    nofb: list[int] = field(default_factory=lambda: [0, 0])
    xor_received: list[int] = field(default_factory=lambda: [0, 0])


def _phase(link: Link, coder: RealCoder | None, rows, user: int, msg: int, params: ChannelParams, cfg: ProtocolConfig, tag: str):
    """Send coded packets for ``user``; return bookkeeping for the iteration."""
    own, oth = (user, 3 - user)
    d_own = float(getattr(params, f"delta{own}"))
    n0 = int(math.ceil(msg / (1.0 - params.delta12)))
    blocks = []
    n_total = 0
    # top up until the pool that feedback cannot rule out covers the message
    need = n0
    while True:
        block, tv = link.send(need)
        blocks.append((block, tv))
        n_total += need
        fb = np.concatenate([b[1]["f1t"] for b in blocks]) == 1
        s_own = np.concatenate([b[1][f"s{own}"] for b in blocks])
        s_oth = np.concatenate([b[1][f"s{oth}"] for b in blocks])
        useful = int(np.sum(fb & ((s_own == 1) | (s_oth == 1))))
        n_nofb = int(np.sum(~fb))
        short = msg - useful - n_nofb
        if short <= 0:
            break
        need = int(math.ceil(short / (1.0 - params.delta12))) + 1
    full_own = np.concatenate([getattr(b[0], f"s{own}") for b in blocks])
    full_oth = np.concatenate([getattr(b[0], f"s{oth}") for b in blocks])

    v_ids = np.flatnonzero(fb & (s_own == 0) & (s_oth == 1))
    nofb_ids = np.flatnonzero(~fb)
    mean_own = n_nofb * (1.0 - d_own)
    var_own = n_nofb * d_own * (1.0 - d_own)
    k = int(math.ceil(msg - useful - mean_own + cfg.z * math.sqrt(var_own)))
    k = min(max(k, 0), n_nofb)
    link.record(tag, n_total, v_ids, nofb_ids, k)

    out = {
        "slots": n_total,
        "v_ids": v_ids,
        "k": k,
        "dof_own": int(np.sum(full_own == 1)) + len(v_ids) + min(k, int(np.sum(full_own[nofb_ids] == 0))),
        "side_info_ok": bool(np.all(full_oth[v_ids] == 1) and np.all(full_own[v_ids] == 0)),
    }
    if coder is not None:
        packets = coder.coded(rows, n_total)
        coder.deliver(1, packets, np.concatenate([b[0].s1 for b in blocks]) == 1)
        coder.deliver(2, packets, np.concatenate([b[0].s2 for b in blocks]) == 1)
        out["v_rows"] = packets[v_ids]
        out["next_rows"] = coder.random_combos(packets[nofb_ids], k)
        link.record(tag + ".coeffs", packets, out["next_rows"])
    return out


def _xor_phase(link, coder, p1, p2, params, cfg, tag):
    k = max(len(p1["v_ids"]), len(p2["v_ids"]))
    n = guarded_block(k, params.delta1, cfg)
    if n == 0:
        return 0, (0, 0)
    block, _ = link.send(n)
    link.record(tag, n)
    if coder is not None:
        packets = coder.random_combos(p1["v_rows"], n) ^ coder.random_combos(p2["v_rows"], n)
        coder.deliver(1, packets, block.s1 == 1)
        coder.deliver(2, packets, block.s2 == 1)
        link.record(tag + ".coeffs", packets)
    return n, (int(block.s1.sum()), int(block.s2.sum()))


def _monte_carlo(params: ChannelParams, cfg: ProtocolConfig, rng, scramble) -> SimReport:
    chan_rng, code_rng = split_rng(rng)
    link = Link(params, chan_rng, scramble)
    coder = RealCoder(cfg.m, cfg.m, cfg, code_rng) if cfg.real_coding else None
    rows = [coder.unit_rows(1), coder.unit_rows(2)] if coder else [None, None]

    phases: dict[str, int] = {}
    levels: list[_Level] = []
    msg = [cfg.m, cfg.m]
    thr = cfg.threshold(cfg.m)
    side_ok = True
    equal_queues = True
    it = 0
    while max(msg) > thr:
        it += 1
        lvl = _Level(message=list(msg))
        p = []
        for user in (1, 2):
            out = _phase(link, coder, rows[user - 1], user, msg[user - 1], params, cfg, f"iter{it}.phase{user}")
            phases[f"iter{it}.phase{user}"] = out["slots"]
            side_ok &= out["side_info_ok"]
            lvl.dof[user - 1] = out["dof_own"]
            lvl.v[user - 1] = len(out["v_ids"])
            lvl.nofb[user - 1] = out["k"]
            p.append(out)
        equal_queues &= lvl.v[0] == lvl.v[1]
        n, recv = _xor_phase(link, coder, p[0], p[1], params, cfg, f"iter{it}.xor")
        phases[f"iter{it}.xor"] = n
        lvl.xor_received = list(recv)
        levels.append(lvl)
        new_msg = [p[0]["k"], p[1]["k"]]
        if coder is not None:
            rows = [p[0]["next_rows"], p[1]["next_rows"]]
        stalled = max(new_msg) >= max(msg)
        msg = new_msg
        if stalled:
            break

    term_ok = [True, True]
    for user in (1, 2):
        k = msg[user - 1]
        if k <= 0:
            continue
        d_u = getattr(params, f"delta{user}")
        n = guarded_block(k, d_u, cfg)
        block, _ = link.send(n)
        link.record(f"termination.rx{user}", n)
        phases[f"termination.rx{user}"] = n
        got = getattr(block, f"s{user}")
        term_ok[user - 1] = int(got.sum()) >= k
        if coder is not None:
            packets = coder.coded(rows[user - 1], n)
            coder.deliver(1, packets, block.s1 == 1)
            coder.deliver(2, packets, block.s2 == 1)

    # backward pass over the stack of decode contexts
    detail = []
    ok = list(term_ok)
    for u in (0, 1):
        if not term_ok[u]:
            detail.append(f"rx{u + 1}: termination block short")
    for j in range(len(levels) - 1, -1, -1):
        lvl = levels[j]
        for u in (0, 1):
            if not ok[u]:
                continue
            if lvl.xor_received[u] < lvl.v[u]:
                ok[u] = False
                detail.append(f"rx{u + 1}: iteration {j + 1} XOR block short ({lvl.xor_received[u]} < {lvl.v[u]})")
            elif lvl.dof[u] < lvl.message[u]:
                ok[u] = False
                detail.append(f"rx{u + 1}: iteration {j + 1} has {lvl.dof[u]} of {lvl.message[u]} dimensions")

    genie_ok = tuple(ok)
    if coder is not None:
        res = [coder.decode(1), coder.decode(2)]
        ok = [r[0] for r in res]
        detail += [r[1] for r in res if r[1]]

    generated = tuple(sum(l.nofb[u] for l in levels) for u in (0, 1))
    return finish_report(
        "case2",
        cfg,
        phases,
        (cfg.m, cfg.m),
        tuple(ok),
        decode_failure_detail=detail,
        audits={"side_info": side_ok, "equation_budget": max(generated) <= cfg.m},
        extra={
            "iterations": [vars(l) for l in levels],
            "equations_generated": generated,
            "genie_ok": genie_ok,
            "equal_xor_queues": equal_queues,
            "residual": tuple(msg),
        },
        tx_log=link.log,
    )
