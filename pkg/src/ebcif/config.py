"""INI-style run configuration.

Example::

    [channel]
    delta1 = 0.5
    delta2 = 0.5
    delta12 = 0.25
    feedback.preset = fully_correlated
    feedback.delta = 0.5

    [protocol]
    name = case2
    m = 100000
    mode = monte_carlo
    genie_mds = true

    [experiment]
    trials = 20
    seed = 1

A lone ``delta = d`` in [channel] stands for delta1 = delta2 = d with
delta12 = d**2.  ``feedback.preset`` is one of always_on, fully_correlated
(feedback.delta), per_receiver_correlated (feedback.delta1, feedback.delta2,
optional feedback.delta_ff), one_sided (feedback.receiver, optional
feedback.other) or pmf (feedback.pmf: 16 comma-separated values, index
bits ordered F1T, F12, F2T, F21 with F1T most significant).
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

from .channel import ChannelParams, FeedbackJoint, blind_index_channel, preset
from .errors import EBCError
from .protocols import PROTOCOLS, ProtocolConfig
from .sim import SWEEP_AXES, Experiment


class ConfigError(EBCError, ValueError):
    pass


@dataclass
class RunConfig:
    experiment: Experiment
    output: str | None = None
    sweep_axis: str | None = None
    sweep_values: list[float] = field(default_factory=list)


class _Reader:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.cp = configparser.ConfigParser(interpolation=None)
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None

    def where(self, section: str, key: str | None = None) -> str:
        """``file:line [section] key`` for error messages."""
        line = None
        in_section = False
        for i, raw in enumerate(self.text.splitlines(), start=1):
            s = raw.strip()
            m = re.fullmatch(r"\[(.+)\]", s)
            if m:
                in_section = m.group(1).strip() == section
                if in_section and key is None:
                    line = i
                    break
                continue
            if in_section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s):
                line = i
                break
        loc = f"{self.source}:{line}" if line else self.source
        return f"{loc} [{section}]" + (f" {key}" if key else "")

    def has(self, section: str, key: str) -> bool:
        return self.cp.has_option(section, key)

    def get(self, section: str, key: str, kind=str, default=None, required=False):
        if not self.has(section, key):
            if required:
                raise ConfigError(f"{self.where(section)}: missing required key {key!r}")
            return default
        raw = self.cp.get(section, key).strip()
        try:
            if kind is bool:
                return self.cp.getboolean(section, key)
            return kind(raw)
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: cannot parse {raw!r} as {kind.__name__}") from None


def _feedback(r: _Reader) -> FeedbackJoint:
    name = r.get("channel", "feedback.preset", default="always_on")
    try:
        if name == "always_on":
            return preset("always_on")
        if name == "fully_correlated":
            return preset("fully_correlated", r.get("channel", "feedback.delta", float, required=True))
        if name == "per_receiver_correlated":
            d1 = r.get("channel", "feedback.delta1", float, required=True)
            d2 = r.get("channel", "feedback.delta2", float, required=True)
            return preset("per_receiver_correlated", d1, d2, r.get("channel", "feedback.delta_ff", float))
        if name == "one_sided":
            return preset(
                "one_sided", r.get("channel", "feedback.receiver", int, default=1), r.get("channel", "feedback.other", float, default=1.0)
            )
        if name == "pmf":
            raw = r.get("channel", "feedback.pmf", required=True)
            try:
                vals = [float(x) for x in raw.replace(",", " ").split()]
            except ValueError:
                raise ConfigError(f"{r.where('channel', 'feedback.pmf')}: values must be numbers") from None
            return FeedbackJoint(vals, "pmf")
    except ConfigError:
        raise
    except (EBCError, ValueError) as exc:
        key = "feedback.pmf" if name == "pmf" else "feedback.preset"
        raise ConfigError(f"{r.where('channel', key)}: {exc}") from None
    raise ConfigError(f"{r.where('channel', 'feedback.preset')}: unknown preset {name!r}")


def _channel(r: _Reader, protocol: str) -> ChannelParams:
    if not r.cp.has_section("channel"):
        raise ConfigError(f"{r.source}: missing [channel] section")
    try:
        if r.has("channel", "delta") and not r.has("channel", "delta1"):
            d = r.get("channel", "delta", float)
            if protocol == "thm3" and not r.has("channel", "feedback.preset"):
                return blind_index_channel(d)
            return ChannelParams(d, d, d * d, _feedback(r))
        d1 = r.get("channel", "delta1", float, required=True)
        d2 = r.get("channel", "delta2", float, required=True)
        d12 = r.get("channel", "delta12", float, required=True)
        return ChannelParams(d1, d2, d12, _feedback(r))
    except ConfigError:
        raise
    except (EBCError, ValueError) as exc:
        key = "delta12" if r.has("channel", "delta12") else "delta"
        raise ConfigError(f"{r.where('channel', key)}: {exc}") from None


def parse(text: str, source: str = "<config>") -> RunConfig:
    r = _Reader(text, source)
    protocol = r.get("protocol", "name", default="case2")
    if protocol not in PROTOCOLS:
        raise ConfigError(f"{r.where('protocol', 'name')}: unknown protocol {protocol!r}; choose from {sorted(PROTOCOLS)}")
    params = _channel(r, protocol)
    kw = {}
    for key, kind in (
        ("m", int),
        ("field_q", int),
        ("mode", str),
        ("genie_mds", bool),
        ("slack", float),
        ("fail_prob", float),
        ("share1", float),
        ("dn_phase2", int),
    ):
        v = r.get("protocol", key, kind)
        if v is not None:
            kw[key] = v
    try:
        cfg = ProtocolConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"{r.where('protocol')}: {exc}") from None
    try:
        exp = Experiment(
            protocol,
            params,
            cfg,
            trials=r.get("experiment", "trials", int, default=20),
            master_seed=r.get("experiment", "seed", int, default=0),
            workers=r.get("experiment", "workers", int, default=1),
        )
    except ValueError as exc:
        raise ConfigError(f"{r.where('experiment')}: {exc}") from None
    axis = r.get("sweep", "axis")
    if axis is not None and axis not in SWEEP_AXES:
        raise ConfigError(f"{r.where('sweep', 'axis')}: must be one of {SWEEP_AXES}")
    values = parse_values(r.get("sweep", "values", default=""), r.where("sweep", "values"))
    return RunConfig(exp, r.get("output", "path"), axis, values)


def parse_values(raw: str, where: str = "values") -> list[float]:
    try:
        return [float(x) for x in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{where}: values must be numbers") from None


def load(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return parse(text, path)
