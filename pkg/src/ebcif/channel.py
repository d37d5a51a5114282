"""Forward erasure states, intermittent feedback states, and node knowledge sets.

Per slot the forward pair (s1, s2) is drawn from a 4-atom law fixed by
(delta1, delta2, delta12); independently, the four feedback indicators
(sF1T, sF12, sF2T, sF21) are drawn from an arbitrary 16-atom pmf.
``sFiT`` carries receiver i's state to the transmitter and ``sFij`` carries
it to the other receiver j, each with unit delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InfeasibleForwardJoint, InvalidPmf, InvalidProbability

TOL = 1e-12

FEEDBACK_FIELDS = ("f1t", "f12", "f2t", "f21")
SLOT_FIELDS = ("s1", "s2") + FEEDBACK_FIELDS
NODES = ("tx", "rx1", "rx2")

HIDDEN = -1  # marker for an entry a node cannot see
ERASED = -1  # marker for an erased received symbol


def _check_prob(name: str, p: float) -> float:
    if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0) or math.isnan(p):
        raise InvalidProbability(f"{name}={p!r} is not a probability in [0, 1]")
    return float(p)


def feedback_index(f1t: int, f12: int, f2t: int, f21: int) -> int:
    """Index into the 16-entry feedback pmf; f1t is the most significant bit."""
    return (f1t << 3) | (f12 << 2) | (f2t << 1) | f21


def feedback_bits(index: int) -> tuple[int, int, int, int]:
    return ((index >> 3) & 1, (index >> 2) & 1, (index >> 1) & 1, index & 1)


@dataclass(frozen=True)
class FeedbackJoint:
    """Joint law of the four feedback indicators as 16 probabilities."""

    pmf: tuple[float, ...]
    label: str = "custom"

    def __post_init__(self):
        pmf = tuple(float(p) for p in self.pmf)
        object.__setattr__(self, "pmf", pmf)
        if len(pmf) != 16:
            raise InvalidPmf(f"feedback pmf needs 16 entries, got {len(pmf)}")
        if any(math.isnan(p) or p < 0 for p in pmf):
            raise InvalidPmf("feedback pmf has a negative or NaN entry")
        if abs(math.fsum(pmf) - 1.0) > TOL:
            raise InvalidPmf(f"feedback pmf sums to {math.fsum(pmf)!r}, not 1")

    def prob(self, f1t: int, f12: int, f2t: int, f21: int) -> float:
        return self.pmf[feedback_index(f1t, f12, f2t, f21)]

    def support(self) -> list[tuple[int, int, int, int]]:
        return [feedback_bits(i) for i, p in enumerate(self.pmf) if p > 0]


def derived_feedback_deltas(fb: FeedbackJoint) -> tuple[float, float, float]:
    """(dF1, dF2, dFF): P(sF1T*sF12 = 0), P(sF2T*sF21 = 0), P(sF1T = sF2T = 0)."""
    d1, d2, dff = [], [], []
    for i, p in enumerate(fb.pmf):
        f1t, f12, f2t, f21 = feedback_bits(i)
        if f1t * f12 == 0:
            d1.append(p)
        if f2t * f21 == 0:
            d2.append(p)
        if f1t == 0 and f2t == 0:
            dff.append(p)
    return math.fsum(d1), math.fsum(d2), math.fsum(dff)


def _pmf_from_atoms(atoms: dict[tuple[int, int, int, int], float]) -> list[float]:
    pmf = [0.0] * 16
    for bits, p in atoms.items():
        pmf[feedback_index(*bits)] += p
    return pmf


def preset(kind: str, *args: float, **kwargs: float) -> FeedbackJoint:
    """Build a structured feedback law.

    kinds:
      ``always_on``                      every feedback link always delivers;
      ``fully_correlated(dF)``           all four links on together w.p. 1 - dF;
      ``per_receiver_correlated(dF1, dF2, delta_ff=None)``
                                         each receiver's two links share one
                                         state; the receivers are independent
                                         unless ``delta_ff`` = P(both off) is given;
      ``one_sided(i, other=1.0)``        receiver i's links always on, the other
                                         receiver's links off w.p. ``other``.
    """
    if kind == "always_on":
        return FeedbackJoint(_pmf_from_atoms({(1, 1, 1, 1): 1.0}), "always_on")

    if kind == "fully_correlated":
        (d,) = args or (kwargs["delta_f"],)
        d = _check_prob("delta_f", d)
        pmf = _pmf_from_atoms({(1, 1, 1, 1): 1.0 - d, (0, 0, 0, 0): d})
        return FeedbackJoint(pmf, f"fully_correlated({d:g})")

    if kind == "per_receiver_correlated":
        d1, d2 = (args[:2] if len(args) >= 2 else (kwargs["delta_f1"], kwargs["delta_f2"]))
        d1 = _check_prob("delta_f1", d1)
        d2 = _check_prob("delta_f2", d2)
        dff = args[2] if len(args) > 2 else kwargs.get("delta_ff")
        if dff is None:
            dff = d1 * d2
        dff = _check_prob("delta_ff", dff)
        lo, hi = max(d1 + d2 - 1.0, 0.0), min(d1, d2)
        if dff < lo - TOL or dff > hi + TOL:
            raise InvalidProbability(
                f"delta_ff={dff!r} outside [{lo!r}, {hi!r}] allowed by delta_f1, delta_f2"
            )
        # receiver 1 state a, receiver 2 state b; a = 0 means both of Rx1's links off
        p00 = dff
        p01 = d1 - dff
        p10 = d2 - dff
        p11 = 1.0 - d1 - d2 + dff
        atoms = {
            (0, 0, 0, 0): p00,
            (0, 0, 1, 1): max(p01, 0.0),
            (1, 1, 0, 0): max(p10, 0.0),
            (1, 1, 1, 1): max(p11, 0.0),
        }
        total = math.fsum(atoms.values())
        atoms = {k: v / total for k, v in atoms.items()}
        return FeedbackJoint(_pmf_from_atoms(atoms), f"per_receiver_correlated({d1:g},{d2:g},{dff:g})")

    if kind == "one_sided":
        i = int(args[0]) if args else int(kwargs["receiver"])
        other = args[1] if len(args) > 1 else kwargs.get("other", 1.0)
        other = _check_prob("other", other)
        if i not in (1, 2):
            raise InvalidProbability(f"one_sided receiver must be 1 or 2, got {i}")
        if i == 1:
            atoms = {(1, 1, 1, 1): 1.0 - other, (1, 1, 0, 0): other}
        else:
            atoms = {(1, 1, 1, 1): 1.0 - other, (0, 0, 1, 1): other}
        return FeedbackJoint(_pmf_from_atoms(atoms), f"one_sided({i},{other:g})")

    raise ValueError(f"unknown feedback preset {kind!r}")


def forward_pmf(delta1: float, delta2: float, delta12: float) -> tuple[float, float, float, float]:
    """Probabilities of (s1, s2) = (0,0), (0,1), (1,0), (1,1)."""
    return (delta12, delta1 - delta12, delta2 - delta12, 1.0 - delta1 - delta2 + delta12)


@dataclass(frozen=True)
class ChannelParams:
    """Forward erasure probabilities plus the feedback law; validated on construction."""

    delta1: float
    delta2: float
    delta12: float
    feedback: FeedbackJoint = field(default_factory=lambda: preset("always_on"))

    def __post_init__(self):
        validate(self)

    @property
    def forward(self) -> tuple[float, float, float, float]:
        return tuple(max(p, 0.0) for p in forward_pmf(self.delta1, self.delta2, self.delta12))

    @property
    def feedback_deltas(self) -> tuple[float, float, float]:
        return derived_feedback_deltas(self.feedback)

    def with_feedback(self, fb: FeedbackJoint) -> ChannelParams:
        return ChannelParams(self.delta1, self.delta2, self.delta12, fb)


def validate(params: ChannelParams) -> None:
    """Raise if the forward joint law or the feedback pmf is infeasible."""
    d1 = _check_prob("delta1", params.delta1)
    d2 = _check_prob("delta2", params.delta2)
    d12 = _check_prob("delta12", params.delta12)
    lo = max(d1 + d2 - 1.0, 0.0)
    hi = min(d1, d2)
    if d12 < lo - TOL:
        raise InfeasibleForwardJoint(
            f"delta12={d12!r} is below the lower bound max(delta1 + delta2 - 1, 0) = {lo!r}"
        )
    if d12 > hi + TOL:
        raise InfeasibleForwardJoint(
            f"delta12={d12!r} exceeds the upper bound min(delta1, delta2) = {hi!r}"
        )
    if not isinstance(params.feedback, FeedbackJoint):
        raise InvalidPmf("feedback must be a FeedbackJoint")


@dataclass(frozen=True)
class SlotState:
    s1: int
    s2: int
    f1t: int
    f12: int
    f2t: int
    f21: int


@dataclass
class Trace:
    """Per-slot states as parallel uint8 arrays; ``x`` optionally holds sent symbols."""

    s1: np.ndarray
    s2: np.ndarray
    f1t: np.ndarray
    f12: np.ndarray
    f2t: np.ndarray
    f21: np.ndarray
    x: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.s1)

    def __getitem__(self, t: int) -> SlotState:
        return SlotState(*(int(getattr(self, k)[t]) for k in SLOT_FIELDS))

    @classmethod
    def from_slots(cls, slots: Sequence[SlotState]) -> Trace:
        cols = {k: np.array([getattr(s, k) for s in slots], dtype=np.uint8) for k in SLOT_FIELDS}
        return cls(**cols)

    @classmethod
    def concat(cls, parts: Iterable[Trace]) -> Trace:
        parts = list(parts)
        if not parts:
            return cls(*(np.zeros(0, dtype=np.uint8) for _ in SLOT_FIELDS))
        cols = {k: np.concatenate([getattr(p, k) for p in parts]) for k in SLOT_FIELDS}
        xs = [p.x for p in parts]
        x = np.concatenate(xs) if all(v is not None for v in xs) else None
        return cls(**cols, x=x)

    def slice(self, start: int, stop: int) -> Trace:
        cols = {k: getattr(self, k)[start:stop] for k in SLOT_FIELDS}
        x = None if self.x is None else self.x[start:stop]
        return Trace(**cols, x=x)


def sample_slots(params: ChannelParams, rng: np.random.Generator, n: int) -> Trace:
    """Draw n i.i.d. slots; forward and feedback draws are independent."""
    fwd = np.asarray(params.forward, dtype=float)
    fwd = fwd / fwd.sum()
    fb = np.asarray(params.feedback.pmf, dtype=float)
    fb = fb / fb.sum()
    fi = rng.choice(4, size=n, p=fwd)
    bi = rng.choice(16, size=n, p=fb)
    return Trace(
        s1=((fi >> 1) & 1).astype(np.uint8),
        s2=(fi & 1).astype(np.uint8),
        f1t=((bi >> 3) & 1).astype(np.uint8),
        f12=((bi >> 2) & 1).astype(np.uint8),
        f2t=((bi >> 1) & 1).astype(np.uint8),
        f21=(bi & 1).astype(np.uint8),
    )


def sample_slot(params: ChannelParams, rng: np.random.Generator) -> SlotState:
    return sample_slots(params, rng, 1)[0]


@dataclass
class NodeView:
    """What one node knows about a trace.

    Every field is an int8 array over slots, with HIDDEN where the node has no
    access.  For the transmitter, entry t is learned at the start of slot t+1;
    the ``before(t)`` helper returns exactly what is usable when choosing X[t].
    """

    node: str
    fields: dict[str, np.ndarray]

    def __getitem__(self, key: str) -> np.ndarray:
        return self.fields[key]

    def before(self, t: int) -> NodeView:
        return NodeView(self.node, {k: v[:t] for k, v in self.fields.items()})

    def __len__(self) -> int:
        return len(next(iter(self.fields.values()))) if self.fields else 0


# Fields each node may see and the feedback indicator gating each masked one.
VIEW_RULES = {
    "tx": {"f1t": None, "f2t": None, "s1": "f1t", "s2": "f2t"},
    "rx1": {"s1": None, "f1t": None, "f21": None, "s2": "f21", "y1": "s1"},
    "rx2": {"s2": None, "f2t": None, "f12": None, "s1": "f12", "y2": "s2"},
}


def project_view(trace: Trace, node: str) -> NodeView:
    """Restrict a trace to the information set of ``node``.

    The transmitter sees its two feedback indicators and s_i only when
    sFiT = 1.  Receiver i sees its own state, the feedback indicators of its
    own link to the transmitter and from the other receiver, the other
    receiver's state when that cross link delivered, and its received
    symbols if ``trace.x`` is set.
    """
    if node not in VIEW_RULES:
        raise ValueError(f"unknown node {node!r}; expected one of {NODES}")
    out: dict[str, np.ndarray] = {}
    for name, gate in VIEW_RULES[node].items():
        if name in ("y1", "y2"):
            if trace.x is None:
                continue
            own = trace.s1 if name == "y1" else trace.s2
            out[name] = np.where(own == 1, trace.x, ERASED).astype(np.int64)
            continue
        vals = getattr(trace, name).astype(np.int8)
        if gate is not None:
            vals = np.where(getattr(trace, gate) == 1, vals, HIDDEN).astype(np.int8)
        out[name] = vals
    return NodeView(node, out)


def blind_index_channel(delta: float) -> ChannelParams:
    """Symmetric channel used by the blind-index-coding scheme: forward and
    feedback erasure ``delta`` on both sides, erasures independent across
    receivers (delta12 = delta_ff = delta**2)."""
    d = _check_prob("delta", delta)
    return ChannelParams(d, d, d * d, preset("per_receiver_correlated", d, d, d * d))
