"""Command-line front end: ``ebcif {bounds,simulate,sweep,verify}``.

Exit codes: 0 success, 1 invariant failure (verify), 2 configuration error,
3 every simulated trial failed to decode.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import bounds, sim, verify
from .config import ConfigError, RunConfig, load, parse_values
from .errors import EBCError

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_ALL_FAILED = 0, 1, 2, 3
BOUNDS_HEADER = ("region", "kind", "a", "b", "c", "r1", "r2")


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _load(args) -> RunConfig:
    rc = load(args.config)
    exp = rc.experiment
    if getattr(args, "seed", None) is not None:
        exp = replace(exp, master_seed=args.seed)
    if getattr(args, "trials", None) is not None:
        exp = replace(exp, trials=args.trials)
    cfg = exp.cfg
    if getattr(args, "m", None) is not None:
        cfg = replace(cfg, m=args.m)
    if getattr(args, "mode", None) is not None:
        cfg = replace(cfg, mode=args.mode)
    rc.experiment = replace(exp, cfg=cfg)
    return rc


def cmd_bounds(args) -> int:
    rc = _load(args)
    p = rc.experiment.params
    rows = bounds.region_rows("outer", bounds.outer_region(p, exact=args.exact))
    for name, region in bounds.reference_regions(p, exact=args.exact).items():
        rows += bounds.region_rows(name, region)
    _emit(sim.write_csv(rows, BOUNDS_HEADER), args.out or rc.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    rc = _load(args)
    est, reports = sim.run_experiment(rc.experiment)
    _emit(sim.write_csv(sim.simulate_rows(rc.experiment, est, reports), sim.SIMULATE_HEADER), args.out or rc.output)
    if est.failure_count == est.trial_count:
        print(f"all {est.trial_count} trials failed to decode", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


def cmd_sweep(args) -> int:
    rc = _load(args)
    axis = args.axis or rc.sweep_axis
    values = parse_values(args.values, "--values") if args.values else rc.sweep_values
    if axis is None or not values:
        raise ConfigError("sweep needs an axis and values (--axis/--values or a [sweep] section)")
    if axis not in sim.SWEEP_AXES:
        raise ConfigError(f"--axis must be one of {sim.SWEEP_AXES}")
    rows = sim.sweep(rc.experiment, axis, values)
    _emit(sim.write_csv(rows, sim.SWEEP_HEADER), args.out or rc.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    return EXIT_OK if verify.run_all() else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ebcif", description="Erasure broadcast channel with intermittent feedback.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, sim_flags=True):
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", help="write CSV here instead of stdout")
        if sim_flags:
            p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
            p.add_argument("--trials", type=int)
            p.add_argument("--m", type=int, help="message size per user")
            p.add_argument("--mode", choices=("expected_flow", "monte_carlo"))

    b = sub.add_parser("bounds", help="outer bound and reference regions as CSV")
    common(b, sim_flags=False)
    b.add_argument("--exact", action="store_true", help="rational arithmetic")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("simulate", help="run a protocol over seeded trials")
    common(s)
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="simulated and analytic sum rates along one parameter")
    common(w)
    w.add_argument("--axis", choices=sim.SWEEP_AXES)
    w.add_argument("--values", help="comma-separated axis values")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the invariant suites")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EBCError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
