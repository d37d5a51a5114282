"""Shared machinery for the transmission protocols.

A protocol talks to the channel only through :class:`Link`, which samples
slots and hands back the transmitter's view of them; receiver-side
bookkeeping reads the full trace.  Two decoding back ends exist:

* genie accounting: counts degrees of freedom, treating every random
  combination as innovative while the receiver still lacks dimensions in
  its pool (the usual large-field idealisation); this scales to m ~ 1e5.
* :class:`RealCoder`: carries actual coefficient vectors over GF(2^q) and
  random payloads, then decodes by Gaussian elimination and compares with
  the transmitted messages.  Only practical for small m.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist
from typing import Callable

import numpy as np

from .. import gf
from ..bounds import RatePoint
from ..channel import ChannelParams, NodeView, Trace, project_view, sample_slots
from ..errors import DegenerateChannel, PreconditionViolated, RankDeficient

MODES = ("expected_flow", "monte_carlo")


def icbrt_ceil(m: int) -> int:
    """Smallest k with k**3 >= m."""
    k = max(1, round(m ** (1 / 3)))
    while k**3 < m:
        k += 1
    while k > 1 and (k - 1) ** 3 >= m:
        k -= 1
    return k


@dataclass
class ProtocolConfig:
    m: int = 1000
    field_q: int = 8
    mode: str = "expected_flow"
    termination_threshold: Callable[[int], int] | None = None
    genie_mds: bool = False
    # erasure-code overhead; None means 0.02 in monte_carlo and 0 in expected_flow
    slack: float | None = None
    # design failure probability of each guard-sized block in monte_carlo
    fail_prob: float = 1e-6
    payload_len: int = 2
    max_real_m: int = 2000
    # timesharing: fraction of slots given to user 1
    share1: float = 0.5
    # one-sided scheme: override for the second phase length
    dn_phase2: int | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 1 <= self.field_q <= 16:
            raise ValueError("field_q must be in [1, 16]")
        if not 0 < self.fail_prob < 0.5:
            raise ValueError("fail_prob must be in (0, 0.5)")
        if not 0 <= self.share1 <= 1:
            raise ValueError("share1 must be in [0, 1]")
        if self.threshold(self.m) < 1:
            raise ValueError("termination threshold must be >= 1")

    def threshold(self, m: int) -> int:
        if self.termination_threshold is None:
            return icbrt_ceil(m)
        return int(self.termination_threshold(m))

    @property
    def eps(self) -> float:
        if self.slack is not None:
            return self.slack
        return 0.02 if self.mode == "monte_carlo" else 0.0

    @property
    def z(self) -> float:
        return NormalDist().inv_cdf(1.0 - self.fail_prob)

    @property
    def real_coding(self) -> bool:
        return self.mode == "monte_carlo" and not self.genie_mds


@dataclass
class SimReport:
    protocol: str
    m: int
    mode: str
    slots_total: int
    slots_per_phase: dict[str, int]
    delivered_bits: tuple[int, int]
    decode_ok: tuple[bool, bool]
    rate_pair: RatePoint
    seed: str = ""
    decode_failure_detail: list[str] = field(default_factory=list)
    audits: dict[str, bool] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    tx_log: list = field(default_factory=list, repr=False)

    @property
    def sum_rate(self) -> float:
        return float(self.rate_pair.total)

    @property
    def ok(self) -> bool:
        return all(self.decode_ok)


def finish_report(
    protocol: str,
    cfg: ProtocolConfig,
    phases: dict[str, int],
    messages: tuple[int, int],
    ok: tuple[bool, bool],
    **kw,
) -> SimReport:
    total = int(sum(phases.values()))
    delivered = tuple(int(mi) if oki else 0 for mi, oki in zip(messages, ok))
    if total > 0:
        rate = RatePoint(delivered[0] / total, delivered[1] / total)
    else:
        rate = RatePoint(0.0, 0.0)
    return SimReport(
        protocol=protocol,
        m=cfg.m,
        mode=cfg.mode,
        slots_total=total,
        slots_per_phase={k: int(v) for k, v in phases.items()},
        delivered_bits=delivered,
        decode_ok=tuple(bool(b) for b in ok),
        rate_pair=rate,
        **kw,
    )


def exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


def ceil_frac(x: Fraction) -> int:
    return int(math.ceil(x))


def expected_block(k: int, erasure) -> int:
    """Length of a rate-(1 - erasure) code for k symbols, by expectation."""
    if k <= 0:
        return 0
    e = exact(erasure)
    if e >= 1:
        raise DegenerateChannel("cannot code over a link that always erases")
    return ceil_frac(Fraction(k) / (1 - e))


def guarded_block(
    need_mean: float,
    erasure: float,
    cfg: ProtocolConfig,
    need_var: float = 0.0,
) -> int:
    """Smallest fixed block length n >= need_mean (1 + eps) / (1 - erasure) whose
    reception count falls short of the need with (normal-approx.) probability
    at most cfg.fail_prob."""
    if need_mean <= 0:
        return 0
    p = 1.0 - float(erasure)
    if p <= 0:
        raise DegenerateChannel("cannot code over a link that always erases")
    z = cfg.z
    n = max(int(math.ceil(need_mean * (1 + cfg.eps) / p)), int(math.ceil(need_mean)))

    def short(n: int) -> bool:
        return n * p - need_mean < z * math.sqrt(n * p * (1 - p) + need_var)

    if not short(n):
        return n
    hi = n
    while short(hi):
        hi *= 2
    lo = n
    while lo < hi:
        mid = (lo + hi) // 2
        if short(mid):
            lo = mid + 1
        else:
            hi = mid
    return lo


def digest(*arrays) -> str:
    h = hashlib.sha1()
    for a in arrays:
        a = np.ascontiguousarray(np.asarray(a, dtype=np.int64))
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


class Link:
    """The broadcast channel as the transmitter experiences it.

    ``send(n)`` transmits n slots and returns (full block, transmitter view).
    The full block is for receiver-side bookkeeping only.  With ``scramble``
    set, forward states the transmitter cannot see are re-randomised; a
    causal protocol must make identical transmit decisions either way.
    """

    def __init__(self, params: ChannelParams, rng: np.random.Generator, scramble: np.random.Generator | None = None):
        self.params = params
        self.rng = rng
        self.scramble = scramble
        self.parts: list[Trace] = []
        self.log: list[tuple] = []

    def send(self, n: int) -> tuple[Trace, NodeView]:
        block = sample_slots(self.params, self.rng, int(n))
        if self.scramble is not None and n:
            for s, f in (("s1", "f1t"), ("s2", "f2t")):
                hidden = getattr(block, f) == 0
                noise = self.scramble.integers(0, 2, size=int(n), dtype=np.uint8)
                setattr(block, s, np.where(hidden, noise, getattr(block, s)).astype(np.uint8))
        self.parts.append(block)
        return block, project_view(block, "tx")

    def rewind(self, k: int) -> None:
        """Discard the last k slots of the most recent block (never transmitted)."""
        if k <= 0:
            return
        last = self.parts[-1]
        self.parts[-1] = last.slice(0, len(last) - k)

    def record(self, label: str, *items) -> None:
        out = []
        for it in items:
            if isinstance(it, (int, float, str, bool)):
                out.append(it)
            else:
                out.append(digest(it))
        self.log.append((label, *out))

    @property
    def trace(self) -> Trace:
        return Trace.concat(self.parts)

    @property
    def slots(self) -> int:
        return sum(len(p) for p in self.parts)


class RealCoder:
    """Coefficient-vector bookkeeping over GF(2^q) for bit-exact decoding.

    Unknowns are the m1 + m2 message symbols (user 1 first); each symbol is a
    length-``payload_len`` vector of field elements.
    """

    def __init__(self, m1: int, m2: int, cfg: ProtocolConfig, rng: np.random.Generator):
        if max(m1, m2) > cfg.max_real_m:
            raise PreconditionViolated(
                f"real GF coding is limited to m <= {cfg.max_real_m}; set genie_mds=true for larger runs"
            )
        self.q = cfg.field_q
        self.f = gf.field(self.q)
        self.rng = rng
        self.m1, self.m2 = m1, m2
        self.n = m1 + m2
        self.messages = self.f.random(rng, (self.n, cfg.payload_len))
        self.received: dict[int, list[np.ndarray]] = {1: [], 2: []}

    def unit_rows(self, user: int) -> np.ndarray:
        eye = np.eye(self.n, dtype=np.int64)
        return eye[: self.m1] if user == 1 else eye[self.m1 :]

    def random(self, shape) -> np.ndarray:
        return self.f.random(self.rng, shape)

    def mix(self, coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
        if rows.shape[0] == 0 or coeffs.shape[0] == 0:
            return np.zeros((coeffs.shape[0], self.n), dtype=np.int64)
        return gf.matmul(coeffs, rows, self.q)

    def random_combos(self, rows: np.ndarray, k: int) -> np.ndarray:
        return self.mix(self.random((k, rows.shape[0])), rows)

    def coded(self, rows: np.ndarray, k: int) -> np.ndarray:
        """k packets from an MDS-like code over the given message rows."""
        if rows.shape[0] == 0:
            return np.zeros((k, self.n), dtype=np.int64)
        g = gf.random_mds_like(k, rows.shape[0], self.rng, self.q).data
        return self.mix(g, rows)

    def deliver(self, rx: int, packets: np.ndarray, mask: np.ndarray) -> None:
        got = packets[np.asarray(mask, dtype=bool)]
        if got.shape[0]:
            self.received[rx].append(got)

    def decode(self, rx: int) -> tuple[bool, str]:
        wanted = range(0, self.m1) if rx == 1 else range(self.m1, self.n)
        if len(wanted) == 0:
            return True, ""
        if not self.received[rx]:
            return False, f"rx{rx}: nothing received"
        a = np.concatenate(self.received[rx], axis=0)
        y = gf.matmul(a, self.messages, self.q)
        try:
            x = gf.solve_partial(gf.FieldMatrix(a, self.q), y, list(wanted))
        except RankDeficient as exc:
            return False, f"rx{rx}: {exc}"
        if not np.array_equal(x, self.messages[list(wanted)]):
            return False, f"rx{rx}: decoded symbols differ from transmitted message"
        return True, ""


def split_rng(rng: np.random.Generator) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent channel and coding streams."""
    chan, code = rng.spawn(2)
    return chan, code
