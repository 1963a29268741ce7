"""Command line entry point: ``localft {layout,compile,run,fit,report}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from .circuit import GateKind, ScheduleError
from .ec import LOGICAL_PLUS, LOGICAL_ZERO, ProtocolError, build_ec_round, prepare_ancilla
from .harness import (CapacityError, ConfigError, ExperimentConfig, read_points, run_experiment, summarize)
from .layout import LayoutError, build_layout, validate
from .routing import (RoutingError, column_grid, cul_de_sac_move, ft_swap, interaction_schedule,
                      interleave_blocks_1d, rotation_schedule)
from .steane import N
from .threshold import FitError, fit_effective_C, fit_recursion


def _cmd_layout(a: argparse.Namespace) -> int:
    lay = build_layout(a.dim, a.level, a.K, a.N_o, a.N_t, a.mode)
    if a.format == "json":
        sys.stdout.write(lay.to_json())
    elif a.format == "summary":
        sys.stdout.write(json.dumps(lay.summary(), indent=1, sort_keys=True) + "\n")
    else:
        sys.stdout.write(lay.to_text(a.max_sites))
    if a.validate:
        rep = validate(lay)
        for line in rep.violations:
            print(f"violation: {line}", file=sys.stderr)
        return 0 if rep.ok else 3
    return 0


def _ec_round_schedule(level: int, repeats: int):
    n = N**level
    data = list(range(n))
    nxt = n
    prep, pairs = None, []
    for _ in range(repeats):
        blocks = []
        for kind in (LOGICAL_ZERO, LOGICAL_PLUS):
            q = list(range(nxt, nxt + n))
            partner = [list(range(nxt + n, nxt + 2 * n))] if level else []
            nxt += 2 * n if level else n
            s = prepare_ancilla(kind, level, q, partner)
            prep = s if prep is None else prep.merge(s)
            blocks.append(q)
        pairs.append(tuple(blocks))
    return prep + build_ec_round(level, data, pairs, repeats)


def _cmd_compile(a: argparse.Namespace) -> int:
    what = a.what
    if what == "ec-round":
        sched = _ec_round_schedule(a.level, a.repeats)
    elif what == "rotation":
        sched = rotation_schedule(list(range(a.distance + 1)))
    elif what == "interaction":
        sched = interaction_schedule(0, a.distance + 1, GateKind.CNOT)
    elif what == "ft-swap":
        sched = ft_swap(0, 1, 2)
    elif what == "cul-de-sac":
        grid = column_grid(2 * a.distance + 2)
        sched = cul_de_sac_move(grid, (0, 0), a.distance)
    elif what == "interleave":
        sched = interleave_blocks_1d(a.slots, a.slots).interleave
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(what)
    if a.stats:
        print(json.dumps({"depth": sched.depth, "events": sched.count(),
                          "swaps": sched.count(GateKind.SWAP)}, sort_keys=True))
    else:
        sys.stdout.write(sched.to_text())
    return 0


def _cmd_run(a: argparse.Namespace) -> int:
    cfg = ExperimentConfig.load(a.config)
    over = {k: v for k, v in (("seed", a.seed), ("trials", a.trials)) if v is not None}
    if over:
        cfg = ExperimentConfig.from_dict(cfg.to_dict() | over)
    out = run_experiment(cfg, a.output)
    print(f"wrote {out['csv']} and {out['json']}")
    return 0


def _results_csv(path: str) -> str:
    return os.path.join(path, "rates.csv") if os.path.isdir(path) else path


def _cmd_fit(a: argparse.Namespace) -> int:
    pts = read_points(_results_csv(a.results))
    modes = sorted({p.sample.mode for p in pts})
    doc = {}
    for m in modes:
        samples = [p.sample for p in pts if p.sample.mode == m]
        entry: dict = {}
        try:
            fit = fit_recursion(samples, a.fix_exponent)
            entry.update(C=fit.params.C, r=fit.params.r, exponent=fit.exponent, threshold=fit.threshold)
        except FitError as exc:
            entry["recursion_error"] = str(exc)
        try:
            c = fit_effective_C(samples, 1)
            entry.update(level1_C=c, level1_threshold=1.0 / c)
        except FitError as exc:
            entry["level1_error"] = str(exc)
        doc[m] = entry
    print(json.dumps(doc, indent=1, sort_keys=True))
    return 0


def _cmd_report(a: argparse.Namespace) -> int:
    pts = read_points(_results_csv(a.results))
    print(f"{'mode':<9}{'level':>6}{'p':>12}{'rate':>13}{'95% CI':>27}{'trials':>10}{'depth':>10}")
    for pt in pts:
        s = pt.sample
        ci = f"[{s.ci_lo:.3e}, {s.ci_hi:.3e}]"
        print(f"{s.mode:<9}{s.level:>6}{s.p:>12.3e}{s.rate:>13.4e}{ci:>27}{s.trials:>10}{pt.depth:>10}")
    summ = summarize(pts)
    print()
    for mode, e in summ["modes"].items():
        thr = e.get("level1_threshold")
        ps = e["pseudo_threshold"]
        line = f"{mode}: level-1 threshold {thr:.3e}" if thr else f"{mode}: level-1 threshold n/a"
        if ps["bracketed"]:
            lo, hi = ps["ci"]
            line += f"; P1 = p crossing {ps['p_star']:.3e}"
            if lo is not None:
                line += f" [{lo:.3e}, {hi:.3e}]"
        else:
            line += f"; {ps['note']}"
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="localft", description="Concatenated Steane-code fault tolerance under local gates.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    lp = sub.add_parser("layout", help="print a hierarchical layout")
    lp.add_argument("--dim", type=int, choices=(1, 2, 3), required=True)
    lp.add_argument("--level", type=int, default=1)
    lp.add_argument("--K", type=int, default=1, help="number of level-L data qubits")
    lp.add_argument("--N-o", dest="N_o", type=int, default=4)
    lp.add_argument("--N-t", dest="N_t", type=int, default=8)
    lp.add_argument("--mode", choices=("nn", "nnn"))
    lp.add_argument("--format", choices=("text", "json", "summary"), default="text")
    lp.add_argument("--max-sites", type=int, default=2_000_000)
    lp.add_argument("--validate", action="store_true", help="check the proximity invariants; exit 3 on violation")
    lp.set_defaults(func=_cmd_layout)

    cp = sub.add_parser("compile", help="print a compiled schedule")
    cp.add_argument("what", choices=("ec-round", "rotation", "interaction", "ft-swap", "cul-de-sac", "interleave"))
    cp.add_argument("--level", type=int, default=1)
    cp.add_argument("--repeats", type=int, default=3)
    cp.add_argument("--distance", type=int, default=3)
    cp.add_argument("--slots", type=int, default=4)
    cp.add_argument("--stats", action="store_true", help="print depth and gate counts instead")
    cp.set_defaults(func=_cmd_compile)

    rp = sub.add_parser("run", help="run a Monte Carlo sweep from a YAML/JSON config")
    rp.add_argument("config")
    rp.add_argument("--output")
    rp.add_argument("--seed", type=int)
    rp.add_argument("--trials", type=int)
    rp.set_defaults(func=_cmd_run)

    fp = sub.add_parser("fit", help="fit the level recursion to a results CSV")
    fp.add_argument("results")
    fp.add_argument("--fix-exponent", type=float)
    fp.set_defaults(func=_cmd_fit)

    rep = sub.add_parser("report", help="tabulate results and thresholds")
    rep.add_argument("results")
    rep.set_defaults(func=_cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CapacityError, LayoutError, RoutingError, ScheduleError, ProtocolError, FitError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
