"""Scheme for feedback from receiver 1 only.

Receiver 1's acknowledgements reach both the transmitter and receiver 2,
while receiver 2 never reports.  The transmitter:

1. sends the m bits of user 1 uncoded;
2. sends L2 coded packets for user 2, learning which of them receiver 1
   overheard (``v21``);
3. retransmits every bit receiver 1 missed until it is acknowledged, each
   time adding a fresh random combination of ``v21``.

Receiver 1 strips the combination (it holds ``v21``).  Receiver 2 turns the
retransmissions into equations about its own packets: every reception of a
bit it already had, and every reception after the first of a bit it lacked,
gives one equation free of user 1's data.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from ..bounds import TOL
from ..channel import ChannelParams, feedback_bits
from ..errors import DegenerateChannel, PreconditionViolated
from .common import (
    Link,
    ProtocolConfig,
    RealCoder,
    SimReport,
    ceil_frac,
    exact,
    finish_report,
    guarded_block,
    split_rng,
)


def _check(params: ChannelParams) -> None:
    for i, p in enumerate(params.feedback.pmf):
        f1t, f12, _, _ = feedback_bits(i)
        if p > TOL and (f1t, f12) != (1, 1):
            raise PreconditionViolated("needs receiver 1's feedback links always on")
    if params.delta1 >= 1:
        raise DegenerateChannel("receiver 1 never hears the transmitter")


def equation_moments(params: ChannelParams) -> tuple[float, float]:
    """Mean and variance of the equations receiver 2 extracts from one retransmitted bit.

    During one bit's retransmissions, the receptions at receiver 2 are
    Y + Z: Y counts slots before the acknowledgement (geometric with ratio
    r = (d1 - d12)/(1 - d12)) and Z is the acknowledged slot itself, heard by
    receiver 2 w.p. b = P(s2 = 1 | s1 = 1).  A bit receiver 2 lacked loses
    its first reception.
    """
    d1, d2, d12 = params.delta1, params.delta2, params.delta12
    if d1 <= 0:
        return 0.0, 0.0
    known = (d1 - d12) / d1
    r = (d1 - d12) / (1 - d12)
    b = (1 - d1 - d2 + d12) / (1 - d1)
    ymax = 1 if r <= 0 else max(1, int(math.ceil(math.log(1e-18) / math.log(r))) + 2)
    y = np.arange(ymax + 1)
    py = (1 - r) * r**y
    j = np.concatenate([y, y + 1])
    pj = np.concatenate([py * (1 - b), py * b])
    x_known = j
    x_unknown = np.maximum(j - 1, 0)
    ex = known * np.dot(pj, x_known) + (1 - known) * np.dot(pj, x_unknown)
    ex2 = known * np.dot(pj, x_known**2) + (1 - known) * np.dot(pj, x_unknown**2)
    return float(ex), float(ex2 - ex * ex)


def run_dn(params: ChannelParams, cfg: ProtocolConfig, rng: np.random.Generator | None = None, scramble=None) -> SimReport:
    _check(params)
    if cfg.mode == "expected_flow":
        return _expected_flow(params, cfg)
    if rng is None:
        raise ValueError("monte_carlo mode needs an rng")
    return _monte_carlo(params, cfg, rng, scramble)


def _expected_flow(params: ChannelParams, cfg: ProtocolConfig) -> SimReport:
    m = cfg.m
    d1, d2, d12 = exact(params.delta1), exact(params.delta2), exact(params.delta12)
    m2 = 0 if d2 >= 1 else m
    t3 = ceil_frac(d1 * m / (1 - d1))
    if d1 > 0 and m2:
        known = (d1 - d12) / d1
        mean_j = (1 - d2) / (1 - d1)
        p_silent = (d2 - d12) / (1 - d12)
        per_bit = mean_j - (1 - known) * (1 - p_silent)
    else:
        per_bit = Fraction(0)
    equations = d1 * m * per_bit
    if cfg.dn_phase2 is not None:
        l2 = int(cfg.dn_phase2)
    elif m2 == 0:
        l2 = 0
    else:
        l2 = max(ceil_frac((m - equations) / (1 - d2)), ceil_frac(Fraction(m) / (1 - d12)))
    phases = {"phase1": m, "phase2": l2, "phase3": t3}
    ok2 = True
    if m2:
        ok2 = l2 * (1 - d2) + min(equations, l2 * (d2 - d12)) >= m
    return finish_report(
        "dn",
        cfg,
        phases,
        (m, m2),
        (True, ok2),
        extra={"equations_per_bit": per_bit, "equations": equations},
    )


def _arq(link: Link, n_missing: int, d1: float, cfg: ProtocolConfig):
    """Retransmit n_missing bits in order until each is acknowledged.

    Slots are drawn in batches; the bit carried in slot t is fixed by the
    acknowledgements seen before t, and unused slots are handed back.
    """
    s1_parts, s2_parts, bit_parts = [], [], []
    done = 0
    while done < n_missing:
        left = n_missing - done
        n = guarded_block(left, d1, cfg)
        block, tv = link.send(n)
        acks = tv["s1"] == 1
        before = np.cumsum(acks) - acks
        used = before < left
        k = int(used.sum())
        link.rewind(n - k)
        s1_parts.append(block.s1[:k])
        s2_parts.append(block.s2[:k])
        bit_parts.append(done + before[:k])
        done += int(acks[:k].sum())
    link.record("phase3", n_missing, *(len(b) for b in bit_parts))
    if not bit_parts:
        e = np.zeros(0, dtype=np.int64)
        return e, e, e
    return np.concatenate(s1_parts), np.concatenate(s2_parts), np.concatenate(bit_parts)


def _monte_carlo(params: ChannelParams, cfg: ProtocolConfig, rng, scramble) -> SimReport:
    chan_rng, code_rng = split_rng(rng)
    link = Link(params, chan_rng, scramble)
    m = cfg.m
    m2 = 0 if params.delta2 >= 1 else m
    coder = RealCoder(m, m2, cfg, code_rng) if cfg.real_coding else None

    block1, tv1 = link.send(m)
    missing = np.flatnonzero(tv1["s1"] == 0)
    link.record("phase1", m, missing)
    if coder is not None:
        rows = coder.unit_rows(1)
        coder.deliver(1, rows, block1.s1 == 1)
        coder.deliver(2, rows, block1.s2 == 1)

    ex, vx = equation_moments(params)
    if cfg.dn_phase2 is not None:
        l2 = int(cfg.dn_phase2)
    elif m2 == 0:
        l2 = 0
    else:
        n_miss = len(missing)
        l2 = max(
            guarded_block(m - n_miss * ex, params.delta2, cfg, need_var=n_miss * vx),
            guarded_block(m, params.delta12, cfg),
        )
    block2, tv2 = link.send(l2)
    heard1 = np.flatnonzero(tv2["s1"] == 1)
    link.record("phase2", l2, heard1)
    if coder is not None and l2:
        packets2 = coder.coded(coder.unit_rows(2), l2)
        coder.deliver(1, packets2, block2.s1 == 1)
        coder.deliver(2, packets2, block2.s2 == 1)
        v21 = packets2[heard1]

    s1_3, s2_3, bit = _arq(link, len(missing), params.delta1, cfg)
    n3 = len(bit)
    if coder is not None and n3:
        packets3 = coder.unit_rows(1)[missing[bit]]
        if l2:
            packets3 = packets3 ^ coder.random_combos(v21, n3)
        coder.deliver(1, packets3, s1_3 == 1)
        coder.deliver(2, packets3, s2_3 == 1)
        link.record("phase3.coeffs", packets3)

    phases = {"phase1": m, "phase2": l2, "phase3": n3}
    detail = []
    ok1 = bool(np.all(np.bincount(bit[s1_3 == 1], minlength=len(missing)) >= 1)) if len(missing) else True
    ok2 = True
    equations = 0
    dims2 = 0
    if m2:
        j = np.bincount(bit, weights=s2_3, minlength=len(missing)).astype(np.int64)
        had = block1.s2[missing] == 1
        equations = int(np.sum(j[had]) + np.sum(np.maximum(j[~had] - 1, 0)))
        overheard_missing = int(np.sum((block2.s1 == 1) & (block2.s2 == 0)))
        dims2 = int(block2.s2.sum()) + min(equations, overheard_missing)
        ok2 = dims2 >= m2
        if not ok2:
            detail.append(f"rx2: {dims2} of {m2} dimensions")
    if not ok1:
        detail.append("rx1: retransmissions incomplete")
    genie_ok = (ok1, ok2)
    ok = genie_ok
    if coder is not None:
        res = [coder.decode(1), coder.decode(2)]
        ok = tuple(r[0] for r in res)
        detail = [r[1] for r in res if r[1]]
    return finish_report(
        "dn",
        cfg,
        phases,
        (m, m2),
        ok,
        decode_failure_detail=detail,
        extra={"genie_ok": genie_ok, "equations": equations, "dimensions2": dims2, "missing": len(missing)},
        tx_log=link.log,
    )
