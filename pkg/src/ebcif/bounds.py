"""Closed-form rate regions: the intermittent-feedback outer bound, reference
regions, and the analytic corner points the protocols are meant to reach.

Every function takes ``exact=True`` to evaluate in rational arithmetic.
Floats are converted through their shortest repr, so ``0.25`` becomes 1/4
and ``0.1`` becomes 1/10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .channel import ChannelParams, FeedbackJoint, feedback_bits, feedback_index
from .errors import DegenerateChannel, InvalidProbability, PreconditionViolated

TOL = 1e-12

Number = Union[float, Fraction]


def as_number(x, exact: bool) -> Number:
    if exact:
        if isinstance(x, Fraction):
            return x
        if isinstance(x, int):
            return Fraction(x)
        return Fraction(repr(float(x)))
    return float(x)


def fmt(x: Number) -> str:
    """CSV-friendly text: ``5/18`` for fractions, repr for floats."""
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return repr(float(x) + 0.0)  # + 0.0 folds -0.0 into 0.0


@dataclass(frozen=True)
class RatePoint:
    r1: Number
    r2: Number

    def __post_init__(self):
        if self.r1 < -TOL or self.r2 < -TOL:
            raise ValueError(f"rates must be nonnegative, got ({self.r1}, {self.r2})")

    @property
    def total(self) -> Number:
        return self.r1 + self.r2


@dataclass(frozen=True)
class RateRegion:
    """{(R1, R2) >= 0 : a*R1 + b*R2 <= c for every (a, b, c)}."""

    halfplanes: tuple[tuple[Number, Number, Number], ...]

    def __post_init__(self):
        hp = tuple(tuple(h) for h in self.halfplanes)
        object.__setattr__(self, "halfplanes", hp)
        for a, b, c in hp:
            if a < 0 or b < 0 or c < 0:
                raise ValueError(f"halfplane {(a, b, c)} needs a, b, c >= 0")

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for h in self.halfplanes for v in h)

    def _tol(self):
        return 0 if self.exact else TOL

    def contains(self, p: RatePoint | tuple, tol: float | None = None) -> bool:
        r1, r2 = (p.r1, p.r2) if isinstance(p, RatePoint) else p
        tol = self._tol() if tol is None else tol
        if r1 < -tol or r2 < -tol:
            return False
        return all(a * r1 + b * r2 <= c + tol for a, b, c in self.halfplanes)

    def corners(self) -> list[RatePoint]:
        zero = Fraction(0) if self.exact else 0.0
        one = Fraction(1) if self.exact else 1.0
        lines = [h for h in self.halfplanes if h[0] != 0 or h[1] != 0]
        lines += [(one, zero, zero), (zero, one, zero)]
        tol = self._tol()
        pts: list[tuple[Number, Number]] = []
        for i in range(len(lines)):
            a1, b1, c1 = lines[i]
            for j in range(i + 1, len(lines)):
                a2, b2, c2 = lines[j]
                det = a1 * b2 - a2 * b1
                if det == 0 or (not self.exact and abs(det) < 1e-15):
                    continue
                r1 = (c1 * b2 - c2 * b1) / det
                r2 = (a1 * c2 - a2 * c1) / det
                if not self.contains((r1, r2), tol=tol if self.exact else 1e-9):
                    continue
                r1 = max(r1, zero)
                r2 = max(r2, zero)
                if any(abs(r1 - q1) <= tol and abs(r2 - q2) <= tol for q1, q2 in pts):
                    continue
                pts.append((r1, r2))
        pts.sort(key=lambda p: (0 if p == (zero, zero) else 1, math.atan2(float(p[1]), float(p[0])), -float(p[0])))
        return [RatePoint(r1, r2) for r1, r2 in pts]

    def max_weighted(self, w1: Number, w2: Number) -> RatePoint:
        return max(self.corners(), key=lambda p: w1 * p.r1 + w2 * p.r2)

    def max_sum(self) -> Number:
        return self.max_weighted(1, 1).total


def _exact_feedback_ff(fb: FeedbackJoint, exact: bool) -> Number:
    vals = [as_number(p, exact) for i, p in enumerate(fb.pmf) if feedback_bits(i)[0] == 0 and feedback_bits(i)[2] == 0]
    return sum(vals, Fraction(0)) if exact else math.fsum(vals)


def delta_ff(params: ChannelParams, exact: bool = False) -> Number:
    return _exact_feedback_ff(params.feedback, exact)


def _beta_pair(d1, d2, d12, dff):
    if d1 >= 1 or d2 >= 1:
        raise DegenerateChannel("a forward link with erasure probability 1 has no bound coefficient")
    num = dff * (1 - min(d1, d2)) + (1 - dff) * (1 - d12)
    return num / (1 - d1), num / (1 - d2)


def beta(params: ChannelParams, exact: bool = False, dff: Number | None = None) -> tuple[Number, Number]:
    """Bound coefficients (beta1, beta2); ``dff`` overrides the feedback-derived value."""
    d1 = as_number(params.delta1, exact)
    d2 = as_number(params.delta2, exact)
    d12 = as_number(params.delta12, exact)
    dff = delta_ff(params, exact) if dff is None else as_number(dff, exact)
    return _beta_pair(d1, d2, d12, dff)


def _unit(exact: bool) -> tuple[Number, Number]:
    return (Fraction(0), Fraction(1)) if exact else (0.0, 1.0)


def _region_from_beta(d1, d2, b1, b2, exact: bool) -> RateRegion:
    zero, one = _unit(exact)
    return RateRegion(
        (
            (one, b2, b2 * (1 - d2)),
            (b1, one, b1 * (1 - d1)),
            (one, zero, 1 - d1),
            (zero, one, 1 - d2),
        )
    )


def outer_region(params: ChannelParams, exact: bool = False, dff: Number | None = None) -> RateRegion:
    """Outer bound with the two weighted-sum constraints plus single-user caps."""
    d1 = as_number(params.delta1, exact)
    d2 = as_number(params.delta2, exact)
    b1, b2 = beta(params, exact, dff)
    return _region_from_beta(d1, d2, b1, b2, exact)


def reference_regions(params: ChannelParams, exact: bool = False) -> dict[str, RateRegion]:
    """``no_feedback`` (R1/(1-d1) + R2/(1-d2) <= 1) and ``global_dd`` (outer bound at dFF = 0)."""
    d1 = as_number(params.delta1, exact)
    d2 = as_number(params.delta2, exact)
    if d1 >= 1 or d2 >= 1:
        raise DegenerateChannel("a forward link with erasure probability 1 has no bound coefficient")
    zero, one = _unit(exact)
    no_fb = RateRegion(
        (
            (1 - d2, 1 - d1, (1 - d1) * (1 - d2)),
            (one, zero, 1 - d1),
            (zero, one, 1 - d2),
        )
    )
    dd = outer_region(params, exact, dff=Fraction(0) if exact else 0.0)
    return {"no_feedback": no_fb, "global_dd": dd}


def is_fully_correlated(fb: FeedbackJoint) -> bool:
    allowed = {feedback_index(0, 0, 0, 0), feedback_index(1, 1, 1, 1)}
    return all(p <= TOL for i, p in enumerate(fb.pmf) if i not in allowed)


def case2_corner(params: ChannelParams, exact: bool = False) -> RatePoint:
    """Symmetric max-sum corner for equal forward erasures and fully correlated feedback."""
    if abs(params.delta1 - params.delta2) > TOL:
        raise PreconditionViolated(f"needs delta1 == delta2, got {params.delta1} and {params.delta2}")
    if not is_fully_correlated(params.feedback):
        raise PreconditionViolated("needs fully correlated feedback (all four links on or off together)")
    d = as_number(params.delta1, exact)
    if d >= 1:
        raise DegenerateChannel("forward links always erased")
    d12 = as_number(params.delta12, exact)
    df = as_number(params.feedback.pmf[0], exact)
    a = (1 - d12) - df * (d - d12)
    r = a / (1 + a / (1 - d))
    return RatePoint(r, r)


def thm3_points(delta: Number, exact: bool = False) -> dict[str, RatePoint]:
    """Inner point reached by the blind-index-coding scheme and the outer max-sum corner,
    under equal forward/feedback erasure delta with dFF = d12 = delta**2."""
    if not (0 <= float(delta) <= 1):
        raise InvalidProbability(f"delta={delta!r} is not a probability")
    if float(delta) >= 1:
        raise InvalidProbability("delta must be < 1")
    d = as_number(delta, exact)
    inner = (1 - d * d) / (2 + d + d**3)
    outer = (1 + d - d**3) * (1 - d) / (2 + d - d**3)
    return {"inner": RatePoint(inner, inner), "outer_corner": RatePoint(outer, outer)}


def region_rows(name: str, region: RateRegion) -> list[dict[str, str]]:
    """CSV rows: one per constraint (a, b, c), one per corner (r1, r2), one max-sum row."""
    rows = []
    for a, b, c in region.halfplanes:
        rows.append({"region": name, "kind": "constraint", "a": fmt(a), "b": fmt(b), "c": fmt(c), "r1": "", "r2": ""})
    for p in region.corners():
        rows.append({"region": name, "kind": "corner", "a": "", "b": "", "c": "", "r1": fmt(p.r1), "r2": fmt(p.r2)})
    best = region.max_weighted(1, 1)
    rows.append({"region": name, "kind": "max_sum", "a": "", "b": "", "c": fmt(best.total), "r1": fmt(best.r1), "r2": fmt(best.r2)})
    return rows
