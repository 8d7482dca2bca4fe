"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 a budget would be exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from dataclasses import fields
from fractions import Fraction
from typing import Optional, Sequence

from . import coprime, generators, hardness_lab, interval_ptas, lp_rounding, nested
from .core import (
    Budgets,
    InputError,
    Instance,
    Mode,
    ResourceError,
    average_space_bound,
    cycle_length,
    make_rng,
    random_regime_check,
    randbelow,
    substream,
)
from .peak import brute_optimum, peak_events, peak_ip, peak_scan
from .serialization import (
    dumps,
    fmt,
    instance_to_dict,
    load_instance,
    load_shifts,
    parse_rational,
    shifts_to_list,
    write_text,
)

ALGORITHMS = ("lp-rounding", "interval", "nested", "coprime", "brute")
ENGINES = {"scan": peak_scan, "events": peak_events, "ip": peak_ip}
FAMILIES = ("sample-complexity", "groupsync", "random", "nested", "coprime")
EXPERIMENTS = ("sampling", "groupsync-gap")


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except InputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _budgets(args) -> Budgets:
    overrides = {f.name: getattr(args, f"budget_{f.name}") for f in fields(Budgets)
                 if getattr(args, f"budget_{f.name}", None) is not None}
    return Budgets.from_env(**overrides)


def _report(algorithm: str, args, instance: Instance, peak, shifts, lower: dict,
            flags: Sequence[str], details: dict, started: float) -> dict:
    best = max(lower.values())
    return {
        "algorithm": algorithm,
        "eps": None if getattr(args, "eps", None) is None else fmt(args.eps),
        "seed": getattr(args, "seed", None),
        "mode": instance.mode.value,
        "peak": fmt(peak.value),
        "argmax_time": fmt(peak.argmax_time),
        "engine": peak.engine.value,
        "shifts": shifts_to_list(shifts),
        "lower_bounds": {k: fmt(v) for k, v in lower.items()},
        "ratio": fmt(peak.value / best),
        "flags": sorted(flags),
        "details": details,
        "timing": {"seconds": round(time.perf_counter() - started, 6)},
    }


def cmd_solve(args) -> dict:
    started = time.perf_counter()
    instance = load_instance(args.input)
    budgets = _budgets(args)
    eps = args.eps
    lower = {"average_space": average_space_bound(instance)}
    flags: list[str] = []
    if args.alg != "brute" and eps is None:
        raise InputError(f"--eps is required for --alg {args.alg}")
    if args.alg == "brute":
        res = brute_optimum(instance, budgets, jobs=args.jobs)
        shifts = res.shifts
        peak = (peak_events if instance.mode is Mode.CONTINUOUS else peak_scan)(instance, shifts, budgets)
        details = {}
        if res.heuristic:
            flags.append("heuristic-grid")
    elif args.alg == "lp-rounding":
        res = lp_rounding.lp_rounding_solve(instance, eps, args.seed, args.repeats, budgets)
        shifts, peak, details = res.shifts, res.peak, res.report
        if res.report["heavy_capped"]:
            flags.append("heuristic-heavy-cap")
    elif args.alg == "interval":
        res = interval_ptas.interval_ptas_solve(instance, eps, budgets)
        shifts, peak, details = res.shifts, res.peak, res.report
    elif args.alg == "nested":
        res = nested.nested_solve(instance, eps, budgets)
        shifts, peak, details = res.shifts, res.peak, res.report
    else:
        res = coprime.coprime_solve(instance, eps, budgets)
        shifts, peak, details = res.shifts, res.peak, res.report
        lower["coprime_witness"] = res.lower_bound
        if res.report["saturated"]:
            flags.append("saturation")
    return _report(args.alg, args, instance, peak, shifts, lower, flags, details, started)


def cmd_peak(args) -> dict:
    started = time.perf_counter()
    instance = load_instance(args.input)
    shifts = load_shifts(args.shifts, instance)
    if args.engine in ("scan", "ip") and instance.mode is not Mode.DISCRETE:
        raise InputError(f"engine {args.engine} needs a discrete instance")
    peak = ENGINES[args.engine](instance, shifts, _budgets(args))
    lower = {"average_space": average_space_bound(instance)}
    out = _report(f"peak-{args.engine}", args, instance, peak, shifts, lower, [], {}, started)
    out.update(value=fmt(peak.value), argmax=fmt(peak.argmax_time))
    return out


def cmd_bounds(args) -> dict:
    instance = load_instance(args.input)
    out = {
        "average_space": fmt(average_space_bound(instance)),
        "h_sum": instance.h_sum,
        "cycle_length": str(cycle_length(instance)),
    }
    if args.eps is not None:
        rc = random_regime_check(instance, args.eps)
        out["random_regime"] = {"holds": rc.holds, "log_cycle_length": rc.log_lhs, "rhs": fmt(rc.rhs)}
    if instance.mode is Mode.CONTINUOUS and coprime.coprime_violation(instance) is None:
        out["coprime_witness"] = fmt(coprime.coprime_lower_bound(instance))
    return out


def cmd_gen(args) -> str:
    budgets = _budgets(args)
    mode = Mode(args.mode) if args.mode else None
    if args.family == "sample-complexity":
        inst = hardness_lab.gen_sample_complexity(_need(args, "n"), budgets)
    elif args.family == "groupsync":
        gs = hardness_lab.gen_groupsync(_need(args, "q"), args.count, args.eps, budgets)
        return dumps({
            "format": "groupsync", "q": gs.family.q, "r": gs.family.r,
            "primes": list(gs.primes), "subsets": [list(s) for s in gs.family.subsets],
            "flags": ["override"] if args.count is not None else [],
            "unmet": list(gs.unmet),
        })
    elif args.family == "random":
        inst = generators.random_instance(make_rng(args.seed), _need(args, "n"), args.t_max,
                                          args.h_max, args.lam_max, mode=mode or Mode.DISCRETE)
    elif args.family == "nested":
        inst = generators.random_nested_instance(make_rng(args.seed), _need(args, "n"), args.h_max,
                                                 mode=mode or Mode.DISCRETE)
    else:
        inst = generators.random_coprime_instance(make_rng(args.seed), _need(args, "n"), args.t_max,
                                                  args.h_max, mode=mode or Mode.CONTINUOUS)
    return dumps(instance_to_dict(inst))


def _need(args, name):
    v = getattr(args, name)
    if v is None:
        raise InputError(f"--{name.replace('_', '-')} is required for this family")
    return v


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_exp(args) -> str:
    budgets = _budgets(args)
    if args.name == "sampling":
        n, eps, M = _need(args, "n"), _need(args, "eps"), args.M
        inst = hardness_lab.gen_sample_complexity(n, budgets)
        threshold = (Fraction(1, 2) + eps) * n
        res = hardness_lab.sampling_estimate(inst, [0] * n, M, make_rng(args.seed), threshold,
                                             exact_levels=True)
        rows, count = [], 0
        for m, lev in enumerate(res.levels, start=1):
            hit = lev >= threshold
            count += hit
            rows.append([m, fmt(lev), int(hit), fmt(Fraction(count, m))])
        return _csv(["sample", "level", "exceeds", "exceed_fraction"], rows)
    q = _need(args, "q")
    gs = hardness_lab.gen_groupsync(q, args.count, args.eps, budgets)
    size = args.subset_size or max(1, q // 2)
    rows = []
    for probe in range(args.probes):
        rng = substream(args.seed, probe)
        subset = sorted(int(i) for i in rng.choice(len(gs), size=size, replace=False))
        taus = [randbelow(rng, gs.interval(i)) for i in subset]
        res = hardness_lab.subset_gap_probe(gs, subset, taus)
        rows.append([probe, " ".join(map(str, subset)), res.t, fmt(res.level), fmt(res.bound),
                     int(res.level >= res.bound)])
    return _csv(["probe", "subset", "t", "level", "bound", "holds"], rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="staggerlab", description="Inventory staggering toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def budgets(p):
        for f in fields(Budgets):
            p.add_argument(f"--budget-{f.name.replace('_', '-')}", dest=f"budget_{f.name}", type=int)

    p = sub.add_parser("solve", help="compute a shift vector")
    p.add_argument("--input", required=True)
    p.add_argument("--alg", choices=ALGORITHMS, required=True)
    p.add_argument("--eps", type=_rational)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output")
    budgets(p)

    p = sub.add_parser("peak", help="evaluate the peak of a given shift vector")
    p.add_argument("--input", required=True)
    p.add_argument("--shifts", required=True)
    p.add_argument("--engine", choices=sorted(ENGINES), default="scan")
    p.add_argument("--output")
    budgets(p)

    p = sub.add_parser("bounds", help="report lower bounds")
    p.add_argument("--input", required=True)
    p.add_argument("--eps", type=_rational)
    p.add_argument("--output")

    p = sub.add_parser("gen", help="generate an instance")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--eps", type=_rational)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-max", dest="t_max", type=int, default=12)
    p.add_argument("--h-max", dest="h_max", type=int, default=10)
    p.add_argument("--lam-max", dest="lam_max", type=int)
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--output")
    budgets(p)

    p = sub.add_parser("exp", help="run an experiment and write CSV")
    p.add_argument("--name", choices=EXPERIMENTS, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=_rational)
    p.add_argument("--M", type=int, default=1000)
    p.add_argument("--q", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--subset-size", dest="subset_size", type=int)
    p.add_argument("--probes", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    budgets(p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            text = dumps(cmd_solve(args))
        elif args.command == "peak":
            text = dumps(cmd_peak(args))
        elif args.command == "bounds":
            text = dumps(cmd_bounds(args))
        elif args.command == "gen":
            text = cmd_gen(args)
        else:
            text = cmd_exp(args)
        write_text(text, args.output)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
