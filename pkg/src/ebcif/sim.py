"""Trial orchestration: seeded experiments, rate estimates and parameter sweeps."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import bounds
from .bounds import RatePoint
from .channel import ChannelParams, blind_index_channel, preset
from .errors import EBCError
from .protocols import PROTOCOLS, ProtocolConfig, SimReport

SIMULATE_HEADER = (
    "kind",
    "protocol",
    "m",
    "mode",
    "seed",
    "trial",
    "slots_total",
    "phase_slots",
    "r1",
    "r2",
    "decode_ok1",
    "decode_ok2",
    "failures",
)
SWEEP_HEADER = ("axis_value", "r1_sim", "r2_sim", "stderr", "r_sum_outer", "r_sum_inner", "failures", "status")
SWEEP_AXES = ("delta", "deltaF", "deltaFF", "m")


@dataclass(frozen=True)
class Experiment:
    protocol: str
    params: ChannelParams
    cfg: ProtocolConfig
    trials: int = 20
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; choose from {sorted(PROTOCOLS)}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit value")


@dataclass(frozen=True)
class Estimate:
    mean_rate_pair: RatePoint
    stderr_pair: tuple[float, float]
    stderr_sum: float
    trial_count: int
    failure_count: int

    @property
    def mean_sum(self) -> float:
        return float(self.mean_rate_pair.total)


def trial_rng(master_seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, i]))


def _run_one(protocol: str, params: ChannelParams, cfg: ProtocolConfig, master_seed: int, i: int) -> SimReport:
    rng = trial_rng(master_seed, i) if cfg.mode == "monte_carlo" else None
    report = PROTOCOLS[protocol](params, cfg, rng)
    report.seed = f"{master_seed}:{i}"
    report.tx_log = []
    return report


def estimate(reports: Sequence[SimReport]) -> Estimate:
    """Mean and standard error over the trials that decoded; failures counted apart."""
    good = [r for r in reports if r.ok]
    fails = len(reports) - len(good)
    if not good:
        return Estimate(RatePoint(0.0, 0.0), (math.nan, math.nan), math.nan, len(reports), fails)
    r = np.array([[float(g.rate_pair.r1), float(g.rate_pair.r2)] for g in good])
    mean = r.mean(axis=0)
    if len(good) > 1:
        se = r.std(axis=0, ddof=1) / math.sqrt(len(good))
        se_sum = float(r.sum(axis=1).std(ddof=1) / math.sqrt(len(good)))
    else:
        se = np.zeros(2)
        se_sum = 0.0
    return Estimate(RatePoint(float(mean[0]), float(mean[1])), (float(se[0]), float(se[1])), se_sum, len(reports), fails)


def run_experiment(e: Experiment) -> tuple[Estimate, list[SimReport]]:
    # expected_flow is deterministic, so one evaluation stands for every trial
    n = e.trials if e.cfg.mode == "monte_carlo" else 1
    args = [(e.protocol, e.params, e.cfg, e.master_seed, i) for i in range(n)]
    if e.workers > 1 and n > 1 and e.cfg.termination_threshold is None:
        with ProcessPoolExecutor(max_workers=e.workers) as pool:
            reports = list(pool.map(_run_one, *zip(*args)))
    else:
        reports = [_run_one(*a) for a in args]
    return estimate(reports), reports


def _num(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return bounds.fmt(x)


def report_row(r: SimReport, trial: int) -> dict[str, str]:
    return {
        "kind": "trial",
        "protocol": r.protocol,
        "m": str(r.m),
        "mode": r.mode,
        "seed": r.seed,
        "trial": str(trial),
        "slots_total": str(r.slots_total),
        "phase_slots": ";".join(f"{k}={v}" for k, v in r.slots_per_phase.items()),
        "r1": _num(float(r.rate_pair.r1)),
        "r2": _num(float(r.rate_pair.r2)),
        "decode_ok1": str(r.decode_ok[0]).lower(),
        "decode_ok2": str(r.decode_ok[1]).lower(),
        "failures": "" if r.ok else "1",
    }


def simulate_rows(e: Experiment, est: Estimate, reports: Sequence[SimReport]) -> list[dict[str, str]]:
    rows = [report_row(r, i) for i, r in enumerate(reports)]
    base = {k: "" for k in SIMULATE_HEADER}
    base.update(protocol=e.protocol, m=str(e.cfg.m), mode=e.cfg.mode, seed=str(e.master_seed))
    rows.append(
        dict(
            base,
            kind="mean",
            trial=str(est.trial_count),
            r1=_num(float(est.mean_rate_pair.r1)),
            r2=_num(float(est.mean_rate_pair.r2)),
            failures=str(est.failure_count),
        )
    )
    rows.append(
        dict(
            base,
            kind="stderr",
            trial=str(est.trial_count),
            r1=_num(est.stderr_pair[0]),
            r2=_num(est.stderr_pair[1]),
            failures=str(est.failure_count),
        )
    )
    return rows


def write_csv(rows: Iterable[dict[str, str]], header: Sequence[str], out=None) -> str:
    """Render rows as CSV text; also write it to ``out`` (a path) when given."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(header), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


# ---- sweeps ---------------------------------------------------------------


def _vary(e: Experiment, axis: str, value) -> Experiment:
    p = e.params
    fb = p.feedback
    full = bounds.is_fully_correlated(fb)
    if axis == "m":
        return replace(e, cfg=replace(e.cfg, m=int(value)))
    v = float(value)
    if axis == "delta":
        if e.protocol == "thm3":
            return replace(e, params=blind_index_channel(v))
        return replace(e, params=ChannelParams(v, v, v * v, fb))
    if axis == "deltaF":
        new = preset("fully_correlated", v) if full else preset("per_receiver_correlated", v, v)
        return replace(e, params=p.with_feedback(new))
    if axis == "deltaFF":
        if full:
            new = preset("fully_correlated", v)
        else:
            df1, df2, _ = p.feedback_deltas
            new = preset("per_receiver_correlated", df1, df2, v)
        return replace(e, params=p.with_feedback(new))
    raise ValueError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")


def analytic_sum(protocol: str, params: ChannelParams) -> float | None:
    """Sum rate the protocol is designed to reach, from the closed forms."""
    try:
        if protocol == "case2":
            return float(bounds.case2_corner(params).total)
        if protocol == "thm3":
            return float(bounds.thm3_points(params.delta1)["inner"].total)
        if protocol == "dn":
            return float(bounds.reference_regions(params)["global_dd"].max_sum())
        return float(bounds.reference_regions(params)["no_feedback"].max_sum())
    except EBCError:
        return None


def sweep(template: Experiment, axis: str, values: Sequence) -> list[dict[str, str]]:
    if axis not in SWEEP_AXES:
        raise ValueError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    rows = []
    for value in values:
        row = {k: "" for k in SWEEP_HEADER}
        row["axis_value"] = _num(int(value) if axis == "m" else float(value))
        try:
            e = _vary(template, axis, value)
            est, _ = run_experiment(e)
        except (EBCError, ValueError) as exc:
            row["status"] = f"skipped: {exc}"
            rows.append(row)
            continue
        outer = bounds.outer_region(e.params).max_sum()
        inner = analytic_sum(e.protocol, e.params)
        row.update(
            r1_sim=_num(float(est.mean_rate_pair.r1)),
            r2_sim=_num(float(est.mean_rate_pair.r2)),
            stderr=_num(est.stderr_sum),
            r_sum_outer=_num(float(outer)),
            r_sum_inner=_num(inner),
            failures=str(est.failure_count),
            status="ok",
        )
        rows.append(row)
    return rows
