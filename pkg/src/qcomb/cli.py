"""Command-line entry point: ``qcomb snr | scan | validate``."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .comb import CombSpec, ConstraintKind, PowerConstraint, carrier_from_wavelength
from .config import ConfigError, RunConfig, load_config, preset
from .oracle import OracleConfig, cross_validate
from .receivers import Protocol
from .sample import SampleSpec, thermal_occupation
from .snr import constrained_optimal_snr
from .squeezing import db_to_gain

SCAN_COLUMNS = ("protocol", "constraint", "lines", "power_W", "kappa", "gain_a_dB", "gain_b_dB",
                "split", "local_snr2", "global_snr2", "advantage_dB", "advantage_best_dB",
                "method")


def _thermal(config):
    if config.thermal is not None:
        return config.thermal
    if config.temperature_k is not None:
        return thermal_occupation(carrier_from_wavelength(config.wavelength_m),
                                  config.temperature_k)
    return 0.0


def evaluate_point(config, protocol, constraint, n_lines, kappa, gain_a_db, gain_b_db, split,
                   asymptotic=False):
    """One SnrReport for a fully specified grid point."""
    return constrained_optimal_snr(
        protocol, PowerConstraint(ConstraintKind(constraint), config.power_w),
        float(db_to_gain(gain_a_db)), kappa, n_lines, config.duration_s,
        carrier_from_wavelength(config.wavelength_m),
        method="asymptotic" if asymptotic else "exact", objective=config.objective,
        line=config.line, gain_b=float(db_to_gain(gain_b_db)), split=split, lo=config.lo,
        theta=config.theta_rad, thermal=_thermal(config))


# snr ------------------------------------------------------------------------

def _fmt6(x):
    if x is None:
        return "-"
    if isinstance(x, complex):
        return f"{x.real:.6g}{x.imag:+.6g}j"
    return f"{x:.6g}"


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def cmd_snr(config, out=None, asymptotic=False):
    reports = []
    for protocol in config.protocols:
        rep = evaluate_point(config, protocol, config.constraint, config.n_lines, config.kappa,
                             config.gain_a_db, config.gain_b_db, config.split, asymptotic)
        reports.append(rep)
        print(f"protocol            {rep.protocol}")
        print(f"constraint          {rep.constraint} ({_fmt6(config.power_w)} W)")
        print(f"kappa               {_fmt6(rep.kappa)}  (line {rep.m})")
        print(f"split               {_fmt6(rep.split)}")
        print(f"mean                {_fmt6(rep.mean)}")
        print(f"variance            {_fmt6(rep.variance)}")
        print(f"local SNR^2         {_fmt6(rep.local_snr2)}")
        print(f"global SNR^2        {_fmt6(rep.global_snr2)}")
        print(f"advantage dB        {_fmt6(rep.advantage_db)}  (same receiver, classical)")
        print(f"advantage dB        {_fmt6(rep.advantage_best_db)}  "
              f"(best classical: {rep.best_classical_protocol})")
        if rep.note:
            print(f"note                {rep.note}")
        print()
    if out:
        payload = {"config": config.to_sections(),
                   "reports": [_json_safe(r.to_dict()) for r in reports]}
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return 0


# scan -----------------------------------------------------------------------

def scan_grid(config):
    """Grid points in output order: constraint, protocol, lines, gain, split, kappa."""
    constraints = config.scan_constraint or (config.constraint,)
    lines = config.scan_lines or (config.n_lines,)
    gains = [(g, g) for g in config.scan_gain_db] or [(config.gain_a_db, config.gain_b_db)]
    splits = config.scan_split or (config.split,)
    kappas = config.scan_kappa or (config.kappa,)
    for c, p, m, (ga, gb), f, k in itertools.product(constraints, config.protocols, lines, gains,
                                                     splits, kappas):
        yield c, p.name, m, k, ga, gb, f


def _scan_task(args):
    config, asymptotic, (constraint, name, m, kappa, ga, gb, split) = args
    rep = evaluate_point(config, Protocol.parse(name), constraint, m, kappa, ga, gb, split,
                         asymptotic)
    return (name, constraint, m, config.power_w, kappa, ga, gb, rep.split, rep.local_snr2,
            rep.global_snr2, rep.advantage_db, rep.advantage_best_db, rep.method)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "%.10g" % v
    return str(v)


def cmd_scan(config, out, asymptotic=False, jobs=None):
    if not config.has_scan:
        raise ConfigError("scan", "at least one scan axis must be nonempty")
    tasks = [(config, asymptotic, point) for point in scan_grid(config)]
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1:
        rows = list(map(_scan_task, tasks))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_scan_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCAN_COLUMNS)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    print(f"wrote {len(rows)} rows to {out}")
    return 0


# validate -------------------------------------------------------------------

def validation_battery(n_half, seed):
    """Named oracle scenarios, all with real amplitudes so every closed form applies."""
    rng = np.random.default_rng([seed, n_half])
    size = 2 * n_half + 1

    def combs():
        return (CombSpec(n_half, rng.uniform(0.5, 2.0, size)),
                CombSpec(n_half, rng.uniform(0.5, 2.0, size)))

    def gains():
        half = rng.uniform(1.5, 30.0, n_half + 1)
        return np.concatenate([half[:0:-1], half])

    def single(kappa):
        k = np.ones(size)
        k[n_half + 1] = kappa
        return SampleSpec(n_half, k)

    asym = rng.uniform(0.1, 1.0, size)
    asym[n_half] = 0.8
    scenarios = [
        ("lossless", SampleSpec.transparent(n_half)),
        ("single-line kappa=0", single(0.0)),
        ("single-line kappa=0.3", single(0.3)),
        ("single-line kappa=0.7", single(0.7)),
        ("asymmetric kappa", SampleSpec(n_half, asym)),
        ("thermal", SampleSpec(n_half, rng.uniform(0.2, 1.0, size), 0.0, 0.05)),
        ("phase mismatch", SampleSpec(n_half, rng.uniform(0.2, 1.0, size),
                                      rng.uniform(-0.3, 0.3, size))),
    ]
    for label, sample in scenarios:
        a, b = combs()
        yield OracleConfig(a, b, sample, gains(), gains(), label)


def cmd_validate(config, out=None, negative_control=False, jobs=1):
    reports = []
    for scenario in validation_battery(config.oracle_n_half, config.seed):
        rep = cross_validate(scenario, config.tolerance_rel, config.mc_samples or None,
                             config.seed, config.protocols, negative_control=negative_control,
                             mc_sigma_limit=config.mc_sigma_limit, jobs=jobs)
        reports.append(rep)
        mc = [e.mc_sigmas for e in rep.entries if e.mc_sigmas is not None]
        mc_text = f", max MC deviation {max(mc):.2f} SE" if mc else ""
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status}  {rep.label:<24} max relative deviation {rep.max_relative_deviation:.3e}"
              f"{mc_text}  ({len(rep.failures())}/{len(rep.entries)} failed)")
        for e in rep.failures():
            note = f"  {e.note}" if e.note else ""
            dev = "-" if e.relative_deviation is None else f"{e.relative_deviation:.3e}"
            print(f"      {e.protocol:<10} m={e.m:+d} rel dev {dev}{note}")
    passed = all(r.passed for r in reports)
    if negative_control:
        print("negative control: " + ("perturbation NOT detected" if passed
                                      else "perturbation detected (failures expected)"))
    print("validation " + ("passed" if passed else "FAILED"))
    if out:
        payload = {"passed": passed, "negative_control": negative_control,
                   "n_half": config.oracle_n_half, "seed": config.seed,
                   "reports": [_json_safe(r.to_dict()) for r in reports]}
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return 0 if passed else 1


# argument handling ----------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI or JSON run configuration")
    common.add_argument("--preset", choices=("fig2", "fig3"), help="figure parameter preset")
    common.add_argument("--out", help="output path (JSON for snr/validate, CSV for scan)")
    common.add_argument("--asymptotic", action="store_true",
                        help="use the large-M asymptotic formulas instead of the exact path")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--mc-samples", type=int, help="Monte-Carlo samples per entry (0 = off)")
    common.add_argument("--jobs", type=int, help="worker processes (default: all hardware threads)")
    common.add_argument("--negative-control", action="store_true",
                        help="validate with a deliberately wrong formula; must fail")

    parser = argparse.ArgumentParser(prog="qcomb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("snr", parents=[common], help="SNR report for one scenario point")
    sub.add_parser("scan", parents=[common], help="parameter scan written as CSV")
    sub.add_parser("validate", parents=[common], help="closed form vs oracle battery")
    return parser


def resolve_config(args):
    base = preset(args.preset) if args.preset else RunConfig()
    config = load_config(args.config, base) if args.config else base
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mc_samples is not None:
        overrides["mc_samples"] = args.mc_samples
    if args.out is not None:
        overrides["output"] = args.out
    return replace(config, **overrides) if overrides else config


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs", "must be >= 1")
        if args.command == "snr":
            return cmd_snr(config, config.output, args.asymptotic)
        if args.command == "scan":
            if not config.output:
                raise ConfigError("output.path", "scan needs an output file (--out)")
            return cmd_scan(config, config.output, args.asymptotic, args.jobs)
        return cmd_validate(config, config.output, args.negative_control, args.jobs or 1)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
