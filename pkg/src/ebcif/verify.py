"""Small-scale invariant suites behind ``ebcif verify``.

Each check returns (ok, detail) and an exception counts as a failure, so a
broken module shows up as a failed line rather than a crash.
"""

from __future__ import annotations

import itertools
import math
import time
from fractions import Fraction
from typing import Callable

import numpy as np

from . import bounds, gf
from .channel import ChannelParams, FeedbackJoint, blind_index_channel, preset, sample_slots
from .protocols import ProtocolConfig, run_case2, run_dn, run_thm3, run_timesharing

REFERENCE = dict(delta1=0.5, delta2=0.5, delta12=0.25)


def _reference(fb=None) -> ChannelParams:
    return ChannelParams(**REFERENCE, feedback=fb or preset("fully_correlated", 0.5))


def random_params(rng: np.random.Generator) -> ChannelParams:
    """A valid channel with a random feedback pmf."""
    d1, d2 = rng.uniform(0, 0.95, size=2)
    lo, hi = max(d1 + d2 - 1, 0.0), min(d1, d2)
    d12 = float(rng.uniform(lo, hi))
    pmf = rng.dirichlet(np.full(16, 0.5))
    return ChannelParams(float(d1), float(d2), d12, FeedbackJoint(list(pmf / pmf.sum())))


def _region_inside(inner: bounds.RateRegion, outer: bounds.RateRegion, tol=1e-9) -> bool:
    return all(outer.contains(p, tol=tol) for p in inner.corners())


def check_reference_values():
    p = _reference()
    got = {
        "outer max sum": bounds.outer_region(p, exact=True).max_sum(),
        "no feedback": bounds.reference_regions(p, exact=True)["no_feedback"].max_sum(),
        "global dd": bounds.reference_regions(p, exact=True)["global_dd"].max_sum(),
        "beta": bounds.beta(p, exact=True)[0],
        "case2 corner": bounds.case2_corner(p, exact=True).r1,
        "thm3 inner": bounds.thm3_points(0.5, exact=True)["inner"].r1,
        "thm3 outer": bounds.thm3_points(0.5, exact=True)["outer_corner"].r1,
        "thm3 beta": bounds.beta(blind_index_channel(0.5), exact=True)[0],
    }
    want = {
        "outer max sum": Fraction(5, 9),
        "no feedback": Fraction(1, 2),
        "global dd": Fraction(3, 5),
        "beta": Fraction(5, 4),
        "case2 corner": Fraction(5, 18),
        "thm3 inner": Fraction(2, 7),
        "thm3 outer": Fraction(11, 38),
        "thm3 beta": Fraction(11, 8),
    }
    bad = [f"{k}: {got[k]} != {want[k]}" for k in want if got[k] != want[k]]
    return not bad, "; ".join(bad)


def check_sandwich(n=50, seed=11):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        p = random_params(rng)
        ref = bounds.reference_regions(p)
        outer = bounds.outer_region(p)
        if not _region_inside(ref["no_feedback"], outer):
            return False, f"no_feedback not inside outer at {p}"
        if not _region_inside(outer, ref["global_dd"]):
            return False, f"outer not inside global_dd at {p}"
    return True, f"{n} random channels"


def check_monotone(n=50, seed=12):
    rng = np.random.default_rng(seed)
    grid = np.linspace(0, 1, 11)
    for _ in range(n):
        p = random_params(rng)
        regions = [bounds.outer_region(p, dff=float(x)) for x in grid]
        for a, b in zip(regions, regions[1:]):
            if not _region_inside(b, a):
                return False, f"enlarged with dFF at {p}"
    return True, f"{n} random channels on an 11-point dFF grid"


def check_thm3_inside():
    for d in np.arange(0, 0.96, 0.05):
        inner = bounds.thm3_points(float(d))["inner"]
        if not bounds.outer_region(blind_index_channel(float(d))).contains(inner):
            return False, f"delta={d}"
    return True, "delta grid 0..0.95"


def check_case2_boundary():
    for df in (0.0, 0.25, 0.5, 0.9):
        p = _reference(preset("fully_correlated", df))
        c = bounds.case2_corner(p)
        b1, b2 = bounds.beta(p)
        if abs(c.r1 + b2 * c.r2 - b2 * 0.5) > 1e-12 or abs(b1 * c.r1 + c.r2 - b1 * 0.5) > 1e-12:
            return False, f"dF={df}"
    return True, ""


def check_super_timesharing():
    p = _reference()
    dff = bounds.delta_ff(p)
    best = bounds.outer_region(p).max_sum()
    avg = (1 - dff) * 0.6 + dff * 0.5
    return best > avg, f"{best:.6f} vs {avg:.6f}"


def _span_gf2(rows) -> int:
    """Rank over GF(2) by enumerating the row space."""
    vecs = {0}
    for r in rows:
        bits = int("".join(str(int(x)) for x in r), 2)
        vecs |= {v ^ bits for v in vecs}
    return int(round(math.log2(len(vecs))))


def check_gf2_bruteforce():
    for entries in itertools.product((0, 1), repeat=9):
        m = np.array(entries).reshape(3, 3)
        if gf.rank(gf.FieldMatrix(m, 1)) != _span_gf2(m):
            return False, f"{m.tolist()}"
    return True, "all 512 matrices"


def check_gf_solve(seed=13):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        a = gf.random_mds_like(6, 6, rng)
        x = gf.field(8).random(rng, (6, 3))
        if not np.array_equal(gf.solve(a, a @ x), x):
            return False, "round trip"
    return True, ""


def check_channel_frequencies(n=200_000, seed=14):
    p = ChannelParams(0.3, 0.6, 0.2, preset("per_receiver_correlated", 0.4, 0.5, 0.3))
    t = sample_slots(p, np.random.default_rng(seed), n)
    emp = [np.mean((t.s1 == a) & (t.s2 == b)) for a, b in ((0, 0), (0, 1), (1, 0), (1, 1))]
    for e, q in zip(emp, p.forward):
        if abs(e - q) > 4 * math.sqrt(q * (1 - q) / n) + 1e-12:
            return False, f"{e} vs {q}"
    return True, ""


def check_causality():
    runs = [
        (run_case2, _reference()),
        (run_thm3, blind_index_channel(0.5)),
        (run_dn, _reference(preset("one_sided", 1))),
    ]
    for fn, p in runs:
        for seed in range(3):
            cfg = ProtocolConfig(m=2000, mode="monte_carlo", genie_mds=True)
            a = fn(p, cfg, np.random.default_rng(seed))
            b = fn(p, cfg, np.random.default_rng(seed), scramble=np.random.default_rng(seed + 100))
            if a.tx_log != b.tx_log:
                return False, f"{fn.__name__} seed {seed}: transmit decisions depend on hidden states"
            if not a.audits.get("side_info", True):
                return False, f"{fn.__name__} seed {seed}: side information audit"
    return True, ""


def check_expected_flow():
    checks = [
        ("case2", run_case2(_reference(), ProtocolConfig(m=100_000)).sum_rate, 5 / 9, 2e-3),
        ("thm3", run_thm3(0.5, ProtocolConfig(m=1200)).rate_pair.r1, 2 / 7, 1e-9),
        ("dn", run_dn(_reference(preset("one_sided", 1)), ProtocolConfig(m=1200)).sum_rate, 0.6, 1e-9),
        ("timesharing", run_timesharing(_reference(), ProtocolConfig(m=1000)).sum_rate, 0.5, 1e-9),
    ]
    bad = [f"{n}: {g} vs {w}" for n, g, w, tol in checks if abs(g - w) > tol]
    return not bad, "; ".join(bad)


def check_real_decoding():
    runs = [
        (run_case2, _reference()),
        (run_thm3, blind_index_channel(0.5)),
        (run_dn, _reference(preset("one_sided", 1))),
        (run_timesharing, _reference()),
    ]
    for fn, p in runs:
        r = fn(p, ProtocolConfig(m=24, mode="monte_carlo"), np.random.default_rng(5))
        if not r.ok:
            return False, f"{fn.__name__}: {r.decode_failure_detail}"
    return True, "GF(256) bit-exact at m=24"


SUITES: list[tuple[str, Callable]] = [
    ("bounds.reference_values", check_reference_values),
    ("bounds.sandwich", check_sandwich),
    ("bounds.dff_monotone", check_monotone),
    ("bounds.thm3_inner_inside", check_thm3_inside),
    ("bounds.case2_on_boundary", check_case2_boundary),
    ("bounds.super_timesharing", check_super_timesharing),
    ("gf.rank_gf2_bruteforce", check_gf2_bruteforce),
    ("gf.solve_roundtrip", check_gf_solve),
    ("channel.frequencies", check_channel_frequencies),
    ("protocols.causality", check_causality),
    ("protocols.expected_flow", check_expected_flow),
    ("protocols.real_decoding", check_real_decoding),
]


def run_all(out=print) -> bool:
    all_ok = True
    for name, fn in SUITES:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed invariant
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        dt = time.perf_counter() - t0
        out(f"{'PASS' if ok else 'FAIL'} {name} ({dt:.2f}s){': ' + detail if detail else ''}")
    return all_ok
