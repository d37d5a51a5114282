"""Blind-index-coding scheme for symmetric channels with per-receiver feedback.

Each receiver's two feedback links share one on/off state, so in every slot
of a user's phase the transmitter sees one of four feedback realizations:

(a) both receivers reported:  packets only the other receiver got join the
    XOR queue directly;
(b) only the intended receiver reported:  packets it missed form the blind
    pool (the transmitter cannot tell whether the other receiver has them);
(c) only the other receiver reported:  random combinations of the packets
    it got join the XOR queue;
(d) neither reported:  nothing is tracked.

After both phases, a XOR phase serves the two queues at once, and a final
blind-index-coding phase sends random combinations over the union of the
two pools.  Each receiver treats the part of the other pool it lacks as
interference to be eliminated.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from ..bounds import TOL
from ..channel import ChannelParams, blind_index_channel, feedback_bits
from ..errors import DegenerateChannel, InvalidProbability, PreconditionViolated
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
    for i, p in enumerate(params.feedback.pmf):
        f1t, f12, f2t, f21 = feedback_bits(i)
        if p > TOL and (f1t != f12 or f2t != f21):
            raise PreconditionViolated("needs per-receiver correlated feedback (each receiver's two links on or off together)")
    if params.delta1 >= 1:
        raise DegenerateChannel("forward links always erased")


def _realization_probs(params: ChannelParams, own: int, as_exact: bool):
    """P(a), P(b), P(c), P(d) for the phase of user ``own``."""
    conv = exact if as_exact else float
    out = [conv(0)] * 4
    for i, p in enumerate(params.feedback.pmf):
        bits = feedback_bits(i)
        fo, fx = (bits[0], bits[2]) if own == 1 else (bits[2], bits[0])
        k = {(1, 1): 0, (1, 0): 1, (0, 1): 2, (0, 0): 3}[(fo, fx)]
        out[k] = out[k] + conv(p)
    return out


def _conditionals(d_own, d_oth, d12):
    """q1 = P(s_own = 1 | s_oth = 1), q0 = P(s_own = 1 | s_oth = 0)."""
    q1 = (1 - d_own - d_oth + d12) / (1 - d_oth) if d_oth < 1 else 0 * d_own
    q0 = (d_oth - d12) / d_oth if d_oth > 0 else 0 * d_own
    return q1, q0


def run_thm3(
    params: ChannelParams | float,
    cfg: ProtocolConfig,
    rng: np.random.Generator | None = None,
    scramble=None,
) -> SimReport:
    """Run the scheme; a bare erasure probability builds the symmetric channel."""
    if not isinstance(params, ChannelParams):
        if not 0 <= float(params) < 1:
            raise InvalidProbability(f"delta={params!r} must lie in [0, 1)")
        params = blind_index_channel(float(params))
    _check(params)
    if cfg.mode == "expected_flow":
        return _expected_flow(params, cfg)
    if rng is None:
        raise ValueError("monte_carlo mode needs an rng")
    return _monte_carlo(params, cfg, rng, scramble)


def _expected_flow(params: ChannelParams, cfg: ProtocolConfig) -> SimReport:
    d = [None, exact(params.delta1), exact(params.delta2)]
    d12 = exact(params.delta12)
    m = cfg.m
    phases: dict[str, int] = {}
    info = {}
    for own in (1, 2):
        oth = 3 - own
        pa, pb, pc, pd = _realization_probs(params, own, True)
        q1, q0 = _conditionals(d[own], d[oth], d12)
        # expected own-receiver dimensions per slot, by feedback realization
        per_case = (pa * (1 - d12), pb, pc * (1 - d[oth]) + pc * d[oth] * q0, pd * (1 - d[own]))
        per_slot = sum(per_case)
        n_fluid = Fraction(m) / per_slot
        n = ceil_frac(n_fluid)
        phases[f"phase{own}"] = n
        info[own] = {
            "slots": n,
            "queue": ceil_frac(n * (pa + pc) * (d[own] - d12)),
            "pool": ceil_frac(n * pb * d[own]),
            "dims_per_slot": per_slot,
            "case_dims": tuple(c * n_fluid for c in per_case),
        }
    phases["xor"] = expected_block(max(info[1]["queue"], info[2]["queue"]), max(d[1], d[2]))
    bic = 0
    for own in (1, 2):
        oth = 3 - own
        _, q0 = _conditionals(d[own], d[oth], d12)
        interference = ceil_frac(info[oth]["pool"] * (1 - q0))
        info[own]["interference"] = interference
        bic = max(bic, expected_block(info[own]["pool"] + interference, d[own]))
    phases["bic"] = bic
    conservation = all(
        sum(info[u]["case_dims"]) == m and info[u]["slots"] * info[u]["dims_per_slot"] >= m for u in (1, 2)
    )
    return finish_report(
        "thm3",
        cfg,
        phases,
        (m, m),
        (True, True),
        audits={"conservation": conservation},
        extra={"users": {u: {k: v for k, v in i.items() if k != "dims_per_slot"} for u, i in info.items()}},
    )


def _phase(link: Link, coder: RealCoder | None, rows, own: int, m: int, params: ChannelParams, cfg: ProtocolConfig, tag: str):
    oth = 3 - own
    d_own = float(getattr(params, f"delta{own}"))
    d_oth = float(getattr(params, f"delta{oth}"))
    q1, q0 = _conditionals(d_own, d_oth, params.delta12)
    z = cfg.z

    blocks = []
    need = int(math.ceil(m / (1.0 - params.delta12)))
    while True:
        blocks.append(link.send(need))
        tv = {k: np.concatenate([b[1][k] for b in blocks]) for k in ("f1t", "f2t", "s1", "s2")}
        fo, fx = tv[f"f{own}t"] == 1, tv[f"f{oth}t"] == 1
        so, sx = tv[f"s{own}"], tv[f"s{oth}"]
        ra, rb, rc, rd = fo & fx, fo & ~fx, ~fo & fx, ~fo & ~fx
        known = int(np.sum(ra & ((so == 1) | (sx == 1)))) + int(rb.sum())
        n_c1 = int(np.sum(rc & (sx == 1)))
        n_c0 = int(np.sum(rc & (sx == 0)))
        n_d = int(rd.sum())
        mean = known + n_c1 + n_c0 * q0 + n_d * (1 - d_own)
        var = n_c0 * q0 * (1 - q0) + n_d * d_own * (1 - d_own)
        short = m - (mean - z * math.sqrt(var))
        if short <= 0:
            break
        need = int(math.ceil(short / (1.0 - params.delta12))) + 1
    n_total = len(fo)
    full = [None, np.concatenate([b[0].s1 for b in blocks]), np.concatenate([b[0].s2 for b in blocks])]

    direct_ids = np.flatnonzero(ra & (so == 0) & (sx == 1))
    c1_ids = np.flatnonzero(rc & (sx == 1))
    pool_ids = np.flatnonzero(rb & (so == 0))
    k_c = 0
    if n_c1:
        k_c = int(math.ceil(n_c1 * (1 - q1) + z * math.sqrt(n_c1 * q1 * (1 - q1))))
        k_c = min(n_c1, max(k_c, 0))
    link.record(tag, n_total, direct_ids, c1_ids, k_c, pool_ids)

    s_own, s_oth = full[own], full[oth]
    out = {
        "slots": n_total,
        "counts": {"a": int(ra.sum()), "b": int(rb.sum()), "c": int(rc.sum()), "d": n_d},
        "queue": len(direct_ids) + k_c,
        "direct": int(np.sum(s_own == 1)),
        # dimensions the XOR queue can still add at the intended receiver
        "queue_unknown": len(direct_ids) + min(k_c, int(np.sum(s_own[c1_ids] == 0))),
        "pool": len(pool_ids),
        # pool packets the other receiver lacks: its interference in the last phase
        "pool_missing_at_other": int(np.sum(s_oth[pool_ids] == 0)),
        "side_info_ok": bool(
            np.all(s_own[direct_ids] == 0) and np.all(s_oth[direct_ids] == 1) and np.all(s_oth[c1_ids] == 1)
        ),
    }
    if coder is not None:
        packets = coder.coded(rows, n_total)
        coder.deliver(1, packets, full[1] == 1)
        coder.deliver(2, packets, full[2] == 1)
        out["queue_rows"] = np.concatenate([packets[direct_ids], coder.random_combos(packets[c1_ids], k_c)], axis=0)
        out["pool_rows"] = packets[pool_ids]
        link.record(tag + ".coeffs", packets, out["queue_rows"])
    return out


def _send_mixed(link, coder, parts, n, tag):
    """Transmit n random combinations over the union of ``parts`` (real coding only)."""
    block, _ = link.send(n)
    link.record(tag, n)
    if coder is not None:
        rows = np.concatenate(parts, axis=0)
        packets = coder.random_combos(rows, n)
        coder.deliver(1, packets, block.s1 == 1)
        coder.deliver(2, packets, block.s2 == 1)
        link.record(tag + ".coeffs", packets)
    return int(block.s1.sum()), int(block.s2.sum())


def _monte_carlo(params: ChannelParams, cfg: ProtocolConfig, rng, scramble) -> SimReport:
    chan_rng, code_rng = split_rng(rng)
    link = Link(params, chan_rng, scramble)
    m = cfg.m
    coder = RealCoder(m, m, cfg, code_rng) if cfg.real_coding else None
    d = [None, params.delta1, params.delta2]

    phases: dict[str, int] = {}
    ph = {}
    for own in (1, 2):
        rows = coder.unit_rows(own) if coder else None
        ph[own] = _phase(link, coder, rows, own, m, params, cfg, f"phase{own}")
        phases[f"phase{own}"] = ph[own]["slots"]

    xor_len = guarded_block(max(ph[1]["queue"], ph[2]["queue"]), max(d[1], d[2]), cfg)
    xor_recv = (0, 0)
    if xor_len:
        parts = [ph[1]["queue_rows"], ph[2]["queue_rows"]] if coder else None
        if coder:
            # one combination per user, summed: each receiver already holds the other queue
            block, _ = link.send(xor_len)
            link.record("xor", xor_len)
            packets = coder.random_combos(parts[0], xor_len) ^ coder.random_combos(parts[1], xor_len)
            coder.deliver(1, packets, block.s1 == 1)
            coder.deliver(2, packets, block.s2 == 1)
            link.record("xor.coeffs", packets)
            xor_recv = (int(block.s1.sum()), int(block.s2.sum()))
        else:
            xor_recv = _send_mixed(link, None, None, xor_len, "xor")
    phases["xor"] = xor_len

    bic_len = 0
    for own in (1, 2):
        oth = 3 - own
        _, q0 = _conditionals(d[own], d[oth], params.delta12)
        p_oth = ph[oth]["pool"]
        bic_len = max(
            bic_len,
            guarded_block(ph[own]["pool"] + p_oth * (1 - q0), d[own], cfg, need_var=p_oth * q0 * (1 - q0)),
        )
    bic_recv = (0, 0)
    if bic_len:
        parts = [ph[1]["pool_rows"], ph[2]["pool_rows"]] if coder else None
        bic_recv = _send_mixed(link, coder, parts, bic_len, "bic")
    phases["bic"] = bic_len

    ok = []
    detail = []
    dims = []
    for own in (1, 2):
        oth = 3 - own
        p = ph[own]
        u = ph[oth]["pool_missing_at_other"]
        gained_xor = min(xor_recv[own - 1], p["queue_unknown"])
        gained_bic = min(p["pool"], max(0, bic_recv[own - 1] - u))
        total = p["direct"] + gained_xor + gained_bic
        dims.append(total)
        ok.append(total >= m)
        if total < m:
            detail.append(f"rx{own}: {total} of {m} dimensions (direct {p['direct']}, xor {gained_xor}, bic {gained_bic})")
    genie_ok = tuple(ok)
    if coder is not None:
        res = [coder.decode(1), coder.decode(2)]
        ok = [r[0] for r in res]
        detail = [r[1] for r in res if r[1]]

    counts = {u: ph[u]["counts"] for u in (1, 2)}
    return finish_report(
        "thm3",
        cfg,
        phases,
        (m, m),
        tuple(ok),
        decode_failure_detail=detail,
        audits={
            "side_info": ph[1]["side_info_ok"] and ph[2]["side_info_ok"],
            "conservation": all(sum(counts[u].values()) == ph[u]["slots"] for u in (1, 2)),
        },
        extra={
            "genie_ok": genie_ok,
            "dimensions": tuple(dims),
            "realizations": counts,
            "queues": (ph[1]["queue"], ph[2]["queue"]),
            "pools": (ph[1]["pool"], ph[2]["pool"]),
        },
        tx_log=link.log,
    )
