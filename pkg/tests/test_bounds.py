from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebcif import bounds
from ebcif.bounds import RatePoint, RateRegion
from ebcif.channel import ChannelParams, FeedbackJoint, blind_index_channel, preset
from ebcif.errors import DegenerateChannel, InvalidProbability, PreconditionViolated


def inside(inner: RateRegion, outer: RateRegion, tol=1e-9) -> bool:
    return all(outer.contains(p, tol=tol) for p in inner.corners())


@st.composite
def channels(draw):
    d1 = draw(st.floats(0, 0.95))
    d2 = draw(st.floats(0, 0.95))
    lo, hi = max(d1 + d2 - 1, 0), min(d1, d2)
    d12 = lo + draw(st.floats(0, 1)) * (hi - lo)
    w = np.array(draw(st.lists(st.floats(0.01, 1), min_size=16, max_size=16)))
    return ChannelParams(d1, d2, d12, FeedbackJoint(list(w / w.sum())))


def test_beta_at_reference_point(ref_channel):
    assert bounds.beta(ref_channel, exact=True) == (Fraction(5, 4), Fraction(5, 4))
    assert bounds.beta(ref_channel) == pytest.approx((1.25, 1.25), abs=1e-12)


def test_beta_without_feedback_loss_is_global_value(ref_channel):
    p = ref_channel.with_feedback(preset("always_on"))
    b1, b2 = bounds.beta(p, exact=True)
    assert b1 == Fraction(3, 4) / Fraction(1, 2)


def test_beta_symmetric_setting():
    assert bounds.beta(blind_index_channel(0.5), exact=True)[0] == Fraction(11, 8)


def test_beta_degenerate():
    with pytest.raises(DegenerateChannel):
        bounds.beta(ChannelParams(1.0, 0.5, 0.5))


def test_outer_region_exact_max_sum(ref_channel):
    region = bounds.outer_region(ref_channel, exact=True)
    assert region.max_sum() == Fraction(5, 9)
    assert abs(bounds.outer_region(ref_channel).max_sum() - 5 / 9) <= 1e-12


def test_outer_region_contains():
    p = ChannelParams(0.5, 0.5, 0.25, preset("fully_correlated", 0.5))
    region = bounds.outer_region(p)
    assert region.contains(RatePoint(5 / 18, 5 / 18))
    assert not region.contains(RatePoint(0.3, 0.3))


def test_noiseless_outer_region():
    region = bounds.outer_region(ChannelParams(0.0, 0.0, 0.0), exact=True)
    assert region.max_sum() == 1


def test_reference_regions(ref_channel):
    ref = bounds.reference_regions(ref_channel, exact=True)
    assert ref["no_feedback"].max_sum() == Fraction(1, 2)
    assert ref["global_dd"].max_sum() == Fraction(3, 5)
    asym = bounds.reference_regions(ChannelParams(0.0, 0.5, 0.0), exact=True)["no_feedback"]
    corners = {(p.r1, p.r2) for p in asym.corners()}
    assert {(1, 0), (0, Fraction(1, 2))} <= corners


def test_region_ops_simplex():
    one, zero = Fraction(1), Fraction(0)
    region = RateRegion(((one, one, one), (one, zero, one), (zero, one, one)))
    assert [(p.r1, p.r2) for p in region.corners()] == [(0, 0), (1, 0), (0, 1)]
    with pytest.raises(ValueError):
        RateRegion(((-1, 1, 1),))


def test_case2_corner(ref_channel):
    assert bounds.case2_corner(ref_channel, exact=True) == RatePoint(Fraction(5, 18), Fraction(5, 18))
    perfect = bounds.case2_corner(ref_channel.with_feedback(preset("fully_correlated", 0.0)), exact=True)
    dd = bounds.reference_regions(ref_channel, exact=True)["global_dd"].max_weighted(1, 1)
    assert perfect == dd
    same = bounds.case2_corner(ChannelParams(0.4, 0.4, 0.4, preset("fully_correlated", 0.3)))
    assert same.r1 == pytest.approx(0.3)


def test_case2_corner_preconditions(ref_channel):
    with pytest.raises(PreconditionViolated):
        bounds.case2_corner(ChannelParams(0.5, 0.4, 0.2, preset("fully_correlated", 0.5)))
    with pytest.raises(PreconditionViolated):
        bounds.case2_corner(ref_channel.with_feedback(preset("per_receiver_correlated", 0.5, 0.5)))


@pytest.mark.parametrize("df", [0.0, 0.2, 0.5, 0.8, 1.0])
def test_case2_corner_on_outer_boundary(df):
    p = ChannelParams(0.5, 0.5, 0.25, preset("fully_correlated", df))
    c = bounds.case2_corner(p)
    b1, b2 = bounds.beta(p)
    assert c.r1 + b2 * c.r2 == pytest.approx(b2 * 0.5, abs=1e-12)
    assert b1 * c.r1 + c.r2 == pytest.approx(b1 * 0.5, abs=1e-12)


def test_thm3_points():
    pts = bounds.thm3_points(0.5, exact=True)
    assert pts["inner"].r1 == Fraction(2, 7)
    assert pts["outer_corner"].r1 == Fraction(11, 38)
    zero = bounds.thm3_points(0.0)
    assert zero["inner"] == zero["outer_corner"] == RatePoint(0.5, 0.5)
    near_one = bounds.thm3_points(0.999)
    assert near_one["inner"].r1 < 1e-3 and near_one["outer_corner"].r1 < 1e-3
    with pytest.raises(InvalidProbability):
        bounds.thm3_points(1.0)


def test_thm3_outer_corner_matches_region():
    # the closed-form outer corner is the max-sum vertex of the outer region
    for d in np.arange(0.05, 0.96, 0.05):
        region = bounds.outer_region(blind_index_channel(float(d)))
        best = region.max_weighted(1, 1)
        assert best.r1 == pytest.approx(bounds.thm3_points(float(d))["outer_corner"].r1, abs=1e-12)


@pytest.mark.parametrize("d", [round(0.05 * k, 2) for k in range(20)])
def test_thm3_inner_inside_outer(d):
    inner = bounds.thm3_points(d)["inner"]
    assert bounds.outer_region(blind_index_channel(d)).contains(inner)


@settings(max_examples=50, deadline=None)
@given(channels())
def test_sandwich(p):
    ref = bounds.reference_regions(p)
    outer = bounds.outer_region(p)
    assert inside(ref["no_feedback"], outer)
    assert inside(outer, ref["global_dd"])


@settings(max_examples=50, deadline=None)
@given(channels())
def test_monotone_in_dff(p):
    grid = np.linspace(0, 1, 11)
    regions = [bounds.outer_region(p, dff=float(x)) for x in grid]
    for bigger, smaller in zip(regions, regions[1:]):
        assert inside(smaller, bigger)


def test_super_time_sharing(ref_channel):
    dff = bounds.delta_ff(ref_channel, exact=True)
    best = bounds.outer_region(ref_channel, exact=True).max_sum()
    assert best > (1 - dff) * Fraction(3, 5) + dff * Fraction(1, 2)


def test_region_rows_format(ref_channel):
    rows = bounds.region_rows("outer", bounds.outer_region(ref_channel, exact=True))
    corners = [(r["r1"], r["r2"]) for r in rows if r["kind"] == "corner"]
    assert ("5/18", "5/18") in corners
    assert rows[-1]["kind"] == "max_sum" and rows[-1]["c"] == "5/9"
