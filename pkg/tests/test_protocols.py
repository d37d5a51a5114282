from fractions import Fraction
import math

import numpy as np
import pytest

from ebcif import bounds
from ebcif.channel import ChannelParams, FeedbackJoint, blind_index_channel, feedback_bits, preset
from ebcif.errors import InvalidProbability, PreconditionViolated
from ebcif.protocols import ProtocolConfig, run_case2, run_dn, run_thm3, run_timesharing
from ebcif.protocols.common import Link, guarded_block, icbrt_ceil
from ebcif.protocols.one_sided import equation_moments

MC_GENIE = dict(mode="monte_carlo", genie_mds=True)
MC_REAL = dict(mode="monte_carlo", genie_mds=False)


def thm3_phase_oracle(d: Fraction, m: int) -> dict[str, Fraction]:
    """Closed-form phase lengths of the blind-index scheme (fluid, no ceilings)."""
    d12 = d * d
    return {
        "phase1+2": 2 * m / (1 - d12),
        "xor": (d - d12) / (1 - d12) * m,
        "bic": d * (1 + d) * (d - d12) / ((1 - d) * (1 - d12)) * m,
        "total": (2 + d + d**3) / (1 - d * d) * m,
    }


# ---- configuration helpers -------------------------------------------------


def test_icbrt_ceil():
    assert [icbrt_ceil(m) for m in (1, 7, 8, 9, 1000, 1001, 10**6)] == [1, 2, 2, 3, 10, 11, 100]


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(m=0)
    with pytest.raises(ValueError):
        ProtocolConfig(mode="fluid")
    with pytest.raises(ValueError):
        ProtocolConfig(termination_threshold=lambda m: 0)
    assert ProtocolConfig(mode="monte_carlo").eps == 0.02
    assert ProtocolConfig().eps == 0.0


def test_guarded_block_covers_need():
    cfg = ProtocolConfig(mode="monte_carlo")
    n = guarded_block(1000, 0.5, cfg)
    assert n >= 1000 * 1.02 / 0.5
    assert guarded_block(0, 0.5, cfg) == 0
    # the guard shrinks relative to the need as the need grows
    assert guarded_block(10**6, 0.5, cfg) / 10**6 < n / 1000


def test_link_rewind_drops_unsent_slots(ref_channel, rng):
    link = Link(ref_channel, rng)
    link.send(10)
    link.rewind(4)
    assert link.slots == 6


# ---- case 2 recursion ------------------------------------------------------


def test_case2_expected_flow_reaches_corner(ref_channel):
    r = run_case2(ref_channel, ProtocolConfig(m=10**6))
    assert abs(r.sum_rate - 5 / 9) <= 1e-3
    assert r.ok and r.audits["equation_budget"]


def test_case2_first_iteration_counts(ref_channel):
    # phase length m/(1 - d12) = 4m/3; XOR serves (1 - dF)(d - d12)/(1 - d12) m = m/6 per user
    m = 1200
    r = run_case2(ref_channel, ProtocolConfig(m=m))
    assert r.slots_per_phase["iter1.phase1"] == 1600
    assert r.extra["iterations"][0]["v"] == 200
    assert r.slots_per_phase["iter1.xor"] == 400
    assert r.extra["iterations"][0]["nofb"] == 200


def test_case2_perfect_feedback_single_iteration(ref_channel):
    p = ref_channel.with_feedback(preset("fully_correlated", 0.0))
    r = run_case2(p, ProtocolConfig(m=1200))
    assert len(r.extra["iterations"]) == 1
    assert "termination.rx1" not in r.slots_per_phase
    dd = bounds.reference_regions(p)["global_dd"].max_sum()
    assert r.sum_rate == pytest.approx(dd, abs=1e-12)


def test_case2_convergence_rate(ref_channel):
    # measured: |rate - 5/9| * m^(1/3) stays below 0.016 from m = 1e3 to 1e6
    errs = []
    for m in (10**3, 10**4, 10**5, 10**6):
        err = abs(run_case2(ref_channel, ProtocolConfig(m=m)).sum_rate - 5 / 9)
        assert err <= 0.02 * m ** (-1 / 3)
        errs.append(err)
    assert errs == sorted(errs, reverse=True)


def test_case2_equation_budget(ref_channel):
    for mode in ({}, MC_GENIE):
        r = run_case2(ref_channel, ProtocolConfig(m=20_000, **mode), np.random.default_rng(1))
        assert max(r.extra["equations_generated"]) <= 20_000
        assert r.audits["equation_budget"]


def test_case2_preconditions(ref_channel):
    with pytest.raises(PreconditionViolated):
        run_case2(ChannelParams(0.5, 0.4, 0.2, preset("fully_correlated", 0.5)), ProtocolConfig())
    with pytest.raises(PreconditionViolated):
        run_case2(ref_channel.with_feedback(preset("per_receiver_correlated", 0.5, 0.5)), ProtocolConfig())


def test_case2_monte_carlo_genie(ref_channel):
    r = run_case2(ref_channel, ProtocolConfig(m=50_000, **MC_GENIE), np.random.default_rng(2))
    assert r.ok
    assert r.audits["side_info"]
    assert abs(r.sum_rate - 5 / 9) / (5 / 9) < 0.03


@pytest.mark.parametrize("seed", range(3))
def test_case2_real_coding_bit_exact(ref_channel, seed):
    r = run_case2(ref_channel, ProtocolConfig(m=40, **MC_REAL), np.random.default_rng(seed))
    assert r.ok, r.decode_failure_detail
    assert r.extra["genie_ok"] == (True, True)


# ---- blind index coding ----------------------------------------------------


def test_thm3_expected_flow_rate():
    r = run_thm3(0.5, ProtocolConfig(m=120_000))
    assert abs(r.rate_pair.r1 - 2 / 7) <= 1e-9
    assert abs(r.rate_pair.r2 - 2 / 7) <= 1e-9


def test_thm3_slot_split_at_half():
    m = 1200
    r = run_thm3(0.5, ProtocolConfig(m=m))
    oracle = thm3_phase_oracle(Fraction(1, 2), m)
    s = r.slots_per_phase
    assert s["phase1"] + s["phase2"] == oracle["phase1+2"] == Fraction(8 * m, 3)
    assert s["xor"] == oracle["xor"] == Fraction(m, 3)
    assert s["bic"] == oracle["bic"] == Fraction(m, 2)
    assert r.slots_total == oracle["total"] == Fraction(7 * m, 2)


@pytest.mark.parametrize("d", [0.1, 0.3, 0.7, 0.9])
def test_thm3_phases_match_closed_forms(d):
    m = 100_000
    r = run_thm3(d, ProtocolConfig(m=m))
    oracle = thm3_phase_oracle(Fraction(str(d)), m)
    s = r.slots_per_phase
    assert abs(s["phase1"] + s["phase2"] - oracle["phase1+2"]) <= 2
    assert abs(s["xor"] - oracle["xor"]) <= 2
    # ceilings on the pool and interference counts are stretched by 1/(1 - d)
    assert abs(s["bic"] - oracle["bic"]) <= 2 + 2 / (1 - d)
    inner = bounds.thm3_points(d)["inner"].r1
    assert r.rate_pair.r1 == pytest.approx(inner, abs=1e-4)


def test_thm3_conservation():
    r = run_thm3(0.5, ProtocolConfig(m=120))
    assert r.audits["conservation"]
    for user in (1, 2):
        assert sum(r.extra["users"][user]["case_dims"]) == 120


def test_thm3_noiseless():
    r = run_thm3(0.0, ProtocolConfig(m=500))
    assert r.slots_total == 1000
    assert r.rate_pair.r1 == 0.5


def test_thm3_rejects_bad_delta():
    with pytest.raises(InvalidProbability):
        run_thm3(1.0, ProtocolConfig())
    # receiver 1's report reaches the transmitter but not receiver 2
    assert feedback_bits(11) == (1, 0, 1, 1)
    split = FeedbackJoint([0.0] * 11 + [1.0] + [0.0] * 4)
    with pytest.raises(PreconditionViolated):
        run_thm3(ChannelParams(0.5, 0.5, 0.25, split), ProtocolConfig())


def test_thm3_monte_carlo_genie(symmetric):
    r = run_thm3(symmetric, ProtocolConfig(m=50_000, **MC_GENIE), np.random.default_rng(3))
    assert r.ok and r.audits["side_info"] and r.audits["conservation"]
    assert abs(r.rate_pair.r1 - 2 / 7) / (2 / 7) < 0.03


@pytest.mark.parametrize("seed", range(3))
def test_thm3_real_coding_bit_exact(symmetric, seed):
    r = run_thm3(symmetric, ProtocolConfig(m=40, **MC_REAL), np.random.default_rng(seed))
    assert r.ok, r.decode_failure_detail


# ---- one-sided feedback ----------------------------------------------------


def test_dn_equation_moments_against_simulation(one_sided):
    # oracle: replay the per-bit retransmission process directly
    rng = np.random.default_rng(8)
    d1, d2, d12 = 0.5, 0.5, 0.25
    samples = []
    for _ in range(40_000):
        known = rng.random() < (d1 - d12) / d1
        j = 0
        while True:
            u = rng.random()
            s1, s2 = (0, 0) if u < d12 else (0, 1) if u < d1 else (1, 0) if u < d1 + d2 - d12 else (1, 1)
            j += s2
            if s1:
                break
        samples.append(j if known else max(j - 1, 0))
    mean, var = equation_moments(one_sided)
    assert mean == pytest.approx(np.mean(samples), abs=0.02)
    assert var == pytest.approx(np.var(samples), abs=0.05)
    assert mean == pytest.approx(2 / 3, abs=1e-12)


def test_dn_expected_flow_reaches_dd_corner(one_sided):
    r = run_dn(one_sided, ProtocolConfig(m=1200))
    assert r.sum_rate == pytest.approx(0.6, abs=1e-12)
    assert r.slots_per_phase == {"phase1": 1200, "phase2": 1600, "phase3": 1200}


def test_dn_no_rx1_erasures():
    p = ChannelParams(0.0, 0.5, 0.0, preset("one_sided", 1))
    r = run_dn(p, ProtocolConfig(m=1000))
    assert r.slots_per_phase["phase3"] == 0
    r = run_dn(p, ProtocolConfig(m=1000, **MC_GENIE), np.random.default_rng(0))
    assert r.slots_per_phase["phase3"] == 0 and r.ok


def test_dn_silent_rx2_is_single_user_arq():
    p = ChannelParams(0.4, 1.0, 0.4, preset("one_sided", 1))
    r = run_dn(p, ProtocolConfig(m=10_000))
    assert r.rate_pair.r1 == pytest.approx(0.6, abs=1e-4) and r.rate_pair.r2 == 0
    r = run_dn(p, ProtocolConfig(m=10_000, **MC_GENIE), np.random.default_rng(0))
    assert r.ok and r.rate_pair.r1 == pytest.approx(0.6, abs=0.02)


def test_dn_requires_rx1_feedback(ref_channel):
    with pytest.raises(PreconditionViolated):
        run_dn(ref_channel, ProtocolConfig())


def test_dn_short_phase2_reports_failure(one_sided):
    r = run_dn(one_sided, ProtocolConfig(m=40, dn_phase2=10, **MC_REAL), np.random.default_rng(0))
    assert r.decode_ok == (True, False)
    assert r.decode_failure_detail
    assert r.rate_pair.r2 == 0


@pytest.mark.parametrize("seed", range(3))
def test_dn_real_coding_bit_exact(one_sided, seed):
    r = run_dn(one_sided, ProtocolConfig(m=40, **MC_REAL), np.random.default_rng(seed))
    assert r.ok, r.decode_failure_detail


# ---- time sharing ----------------------------------------------------------


def test_timesharing_examples():
    assert run_timesharing(ChannelParams(0.5, 0.5, 0.25), ProtocolConfig(m=1000)).sum_rate == 0.5
    r = run_timesharing(ChannelParams(0.3, 0.5, 0.15), ProtocolConfig(m=1000, share1=1.0))
    assert (r.rate_pair.r1, r.rate_pair.r2) == pytest.approx((0.7, 0.0))
    r = run_timesharing(ChannelParams(0.0, 0.0, 0.0), ProtocolConfig(m=1000))
    assert (r.rate_pair.r1, r.rate_pair.r2) == (0.5, 0.5)


def test_timesharing_on_no_feedback_boundary():
    p = ChannelParams(0.2, 0.6, 0.1)
    r = run_timesharing(p, ProtocolConfig(m=10_000, share1=0.3))
    nofb = bounds.reference_regions(p)["no_feedback"]
    a, b, c = nofb.halfplanes[0]
    assert a * r.rate_pair.r1 + b * r.rate_pair.r2 == pytest.approx(c, abs=1e-4)


def test_timesharing_real_coding(ref_channel):
    r = run_timesharing(ref_channel, ProtocolConfig(m=40, **MC_REAL), np.random.default_rng(0))
    assert r.ok


# ---- cross-cutting audits --------------------------------------------------

CAUSAL_CASES = [
    ("case2", run_case2, lambda: ChannelParams(0.5, 0.5, 0.25, preset("fully_correlated", 0.5))),
    ("thm3", run_thm3, lambda: blind_index_channel(0.5)),
    ("dn", run_dn, lambda: ChannelParams(0.5, 0.5, 0.25, preset("one_sided", 1))),
]


@pytest.mark.parametrize("name,fn,make", CAUSAL_CASES, ids=[c[0] for c in CAUSAL_CASES])
@pytest.mark.parametrize("real", [False, True])
def test_transmit_decisions_ignore_hidden_states(name, fn, make, real):
    cfg = ProtocolConfig(m=30 if real else 3000, mode="monte_carlo", genie_mds=not real)
    for seed in range(3):
        plain = fn(make(), cfg, np.random.default_rng(seed))
        scrambled = fn(make(), cfg, np.random.default_rng(seed), scramble=np.random.default_rng(seed + 50))
        assert plain.tx_log == scrambled.tx_log


def test_scrambling_changes_hidden_states(ref_channel):
    # guard against a vacuous audit: the scrambler must actually alter the trace
    a = Link(ref_channel, np.random.default_rng(0))
    b = Link(ref_channel, np.random.default_rng(0), scramble=np.random.default_rng(1))
    a.send(1000)
    b.send(1000)
    hidden = a.trace.f1t == 0
    assert not np.array_equal(a.trace.s1[hidden], b.trace.s1[hidden])
    assert np.array_equal(a.trace.s1[~hidden], b.trace.s1[~hidden])


def test_rate_accounting(ref_channel):
    r = run_case2(ref_channel, ProtocolConfig(m=5000, **MC_GENIE), np.random.default_rng(4))
    assert r.slots_total == sum(r.slots_per_phase.values())
    assert r.rate_pair.r1 == r.delivered_bits[0] / r.slots_total


def test_real_decoding_failure_rate(ref_channel):
    # over GF(2) random combinations are often dependent; failures must be reported, not raised
    m, trials = 30, 20
    for q, must_fail in ((1, True), (8, False)):
        reps = [run_case2(ref_channel, ProtocolConfig(m=m, field_q=q, **MC_REAL), np.random.default_rng(s)) for s in range(trials)]
        failed = [r for r in reps if not r.ok]
        assert all(r.decode_failure_detail for r in failed)
        assert all(r.extra["genie_ok"] == (True, True) for r in reps)
        if must_fail:
            assert failed
        else:
            assert len(failed) / trials <= 10 * m * 2.0**-q


def test_dn_equation_moments_asymmetric():
    p = ChannelParams(0.4, 0.6, 0.3, preset("one_sided", 1))
    ex, vx = equation_moments(p)
    r = run_dn(p, ProtocolConfig(m=20_000, **MC_GENIE), np.random.default_rng(8))
    n = r.extra["missing"]
    assert abs(r.extra["equations"] - n * ex) <= 5 * math.sqrt(n * vx)
    assert r.ok
