"""Command-line interface.

Subcommands: moments, mse, pre, simulate, reproduce-kk2009. Every command
is a pure function of its inputs and flags: rerunning with the same inputs
produces byte-identical output (no timestamps, fixed float rendering).
Text mode renders numbers to 6 significant digits; csv and json carry full
precision. Exit codes: 0 success, 2 input error, 3 numerical error,
4 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from typing import Optional, Sequence

from .data_model import (
    InputError,
    Microdata,
    NumericalError,
    PopulationSummary,
    SampleDesign,
    ValidationError,
    parse_microdata,
    parse_summary,
    reconcile_covariances,
    summarize,
)
from .efficiency import dominance_report, pre_table, reproduce_kk2009
from .estimators import ESTIMATOR_ORDER
from .moments import moment_set
from .monte_carlo import (
    GENERATOR_NAME,
    generate_population,
    parse_generator_config,
    run_simulation,
)
from .mse_theory import classic_breakdown, min_mse_tp, mse_tp, optimal_m, tp_diagnostics

_FORMATS = ("text", "csv", "json")
_POLICIES = ("prefer-correlation", "prefer-covariance", "strict")


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def _csv_block(header: list[str], rows: list[list[object]], footer: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if c is None else c for c in row])
    for k, v in footer.items():
        buf.write(f"# {k}: {v}\n")
    return buf.getvalue()


def _read_file(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from None


def _parse_design(text: str) -> SampleDesign:
    try:
        values = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise InputError(
            f"bad --design {text!r}: expected comma-separated integers"
        ) from None
    return SampleDesign(n=values)


def _load_summary(path: str, policy: str) -> tuple[PopulationSummary, int]:
    """Read microdata csv or summary json, reconcile, return repair count."""
    text = _read_file(path)
    if text.lstrip().startswith("{"):
        summary = parse_summary(text)
    else:
        summary = summarize(parse_microdata(text))
    reconciled, report = reconcile_covariances(summary, policy)
    return reconciled, len(report.repaired)


def _provenance(args, extra: Optional[dict] = None) -> dict:
    out = {"policy": getattr(args, "policy", "prefer-correlation")}
    out["formulas"] = "implemented (as-printed variants appear only under diagnostics)"
    if extra:
        out.update(extra)
    return out


def _emit_footer(footer: dict) -> str:
    return "\n".join(f"# {k}: {v}" for k, v in footer.items())


def _cmd_moments(args) -> int:
    pop, repaired = _load_summary(args.input, args.policy)
    design = _parse_design(args.design)
    m = moment_set(pop, design)
    footer = _provenance(args, {"repaired_pairs": repaired})
    if args.format == "json":
        print(json.dumps({"command": "moments", "moments": asdict(m),
                          "provenance": footer}, indent=2))
        return 0
    names = ("v200", "v020", "v002", "v110", "v101", "v011",
             "ybar", "xbar", "zbar", "b1", "b2")
    rows = [[n, getattr(m, n)] for n in names]
    rows.append(["census", m.census])
    if args.format == "csv":
        print(_csv_block(["quantity", "value"], rows, footer), end="")
        return 0
    print(_table(["quantity", "value"], [[n, _fmt(v)] for n, v in rows]))
    for w in m.warnings:
        print(f"warning: {w}")
    print(_emit_footer(footer))
    return 0


def _cmd_mse(args) -> int:
    pop, repaired = _load_summary(args.input, args.policy)
    design = _parse_design(args.design)
    m = moment_set(pop, design)
    m1s, m2s = optimal_m(m)
    breakdowns = []
    for e in ESTIMATOR_ORDER:
        if e == "exp_regression":
            breakdowns.append(min_mse_tp(m))
        else:
            breakdowns.append(classic_breakdown(e, m))
    if args.m1 is not None or args.m2 is not None:
        if args.m1 is None or args.m2 is None:
            raise InputError("--m1 and --m2 must be given together")
        breakdowns.append(mse_tp(m, args.m1, args.m2))
    diag = tp_diagnostics(
        m,
        args.m1 if args.m1 is not None else m1s,
        args.m2 if args.m2 is not None else m2s,
    )
    footer = _provenance(args, {"repaired_pairs": repaired})
    if args.format == "json":
        print(json.dumps({
            "command": "mse",
            "rows": [asdict(b) for b in breakdowns],
            "optimal": {"m1": m1s, "m2": m2s},
            "diagnostics": asdict(diag),
            "provenance": footer,
        }, indent=2))
        return 0
    header = ["estimator", "mse", "m1", "m2", "bias", "warning"]
    rows = [[b.estimator, b.mse, b.m1, b.m2, b.bias, b.warning or ""] for b in breakdowns]
    if args.format == "csv":
        footer = dict(footer, m1_opt=m1s, m2_opt=m2s)
        print(_csv_block(header, rows, footer), end="")
        return 0
    print(_table(header, [[_fmt(c) if not isinstance(c, str) else c for c in r] for r in rows]))
    print(f"optimal tuning: m1* = {_fmt(m1s)}, m2* = {_fmt(m2s)}")
    print("diagnostics (implemented vs as-printed):")
    print(f"  at m1 = {_fmt(diag.m1)}, m2 = {_fmt(diag.m2)}")
    print(f"  mse implemented {_fmt(diag.implemented_mse)}  as-printed {_fmt(diag.printed_mse)}")
    print(f"  p1 implemented {_fmt(diag.p1)}  as-printed {_fmt(diag.printed_p1)}")
    print(f"  p2 implemented {_fmt(diag.p2)}  as-printed {_fmt(diag.printed_p2)}")
    print(f"  p3 implemented {_fmt(diag.p3)}  as-printed {_fmt(diag.printed_p3)}")
    print(f"  optimum solved ({_fmt(diag.solved_m1)}, {_fmt(diag.solved_m2)})"
          f"  as-printed closed form ({_fmt(diag.printed_m1)}, {_fmt(diag.printed_m2)})")
    print(_emit_footer(footer))
    return 0


def _cmd_pre(args) -> int:
    pop, repaired = _load_summary(args.input, args.policy)
    design = _parse_design(args.design)
    m = moment_set(pop, design)
    report = pre_table(m, provenance=f"policy={args.policy}")
    dom = dominance_report(m) if not m.census else ()
    footer = _provenance(args, {
        "repaired_pairs": repaired,
        "m1_opt": _fmt(report.m1_opt),
        "m2_opt": _fmt(report.m2_opt),
    })
    if args.format == "json":
        print(json.dumps({
            "command": "pre",
            "rows": [asdict(r) for r in report.rows],
            "dominance": [asdict(d) for d in dom],
            "m1_opt": report.m1_opt, "m2_opt": report.m2_opt,
            "provenance": footer,
        }, indent=2))
        return 0
    header = ["estimator", "mse", "pre", "rank", "delta_vs_tuned", "warning"]
    rows = [
        [r.estimator, r.mse, r.pre, r.rank, r.delta_vs_tuned, r.warning]
        for r in report.rows
    ]
    if args.format == "csv":
        print(_csv_block(header, rows, footer), end="")
        return 0
    print(_table(header, [[_fmt(c) if not isinstance(c, str) else c for c in r] for r in rows]))
    print(_emit_footer(footer))
    return 0


def _load_simulation_population(path: str) -> tuple[Microdata, tuple[str, ...]]:
    text = _read_file(path)
    if text.lstrip().startswith("{"):
        head = json.loads(text) if text.lstrip().startswith("{") else {}
        strata = head.get("strata") if isinstance(head, dict) else None
        if isinstance(strata, list) and strata and isinstance(strata[0], dict) \
                and "mean_y" in strata[0]:
            cfg = parse_generator_config(text)
            micro, _ = generate_population(cfg)
            return micro, (f"population generated from config, seed {cfg.seed}",)
        raise InputError(
            "simulate needs microdata (csv) or a generator config (json with "
            "mean/sd/rho targets); a summary document cannot be sampled from"
        )
    return parse_microdata(text), ()


def _cmd_simulate(args) -> int:
    micro, notes = _load_simulation_population(args.input)
    design = _parse_design(args.design)
    estimators = None
    if args.estimators:
        estimators = tuple(e.strip() for e in args.estimators.split(","))
    report = run_simulation(
        micro, design, R=args.R, master_seed=args.seed,
        estimators=estimators, m1=args.m1 if args.m1 is not None else 1.0,
        m2=args.m2 if args.m2 is not None else 1.0, workers=args.workers,
    )
    footer = _provenance(args, {
        "seed": report.seed, "R": report.R, "generator": report.generator,
        "fingerprint": report.fingerprint,
    })
    if args.format == "json":
        print(json.dumps({
            "command": "simulate",
            "report": asdict(report),
            "pre_notes": list(notes),
            "provenance": footer,
        }, indent=2))
        return 0
    header = ["estimator", "m1", "m2", "emp_mean", "emp_bias", "emp_mse",
              "theory_mse", "rel_gap", "nonfinite"]
    rows = [
        [r.estimator, r.m1, r.m2, r.emp_mean, r.emp_bias, r.emp_mse,
         r.theory_mse, r.rel_gap, r.nonfinite]
        for r in report.rows
    ]
    if args.format == "csv":
        print(_csv_block(header, rows, footer), end="")
        return 0
    for note in notes:
        print(f"note: {note}")
    print(_table(header, [[_fmt(c) if not isinstance(c, str) else c for c in r] for r in rows]))
    print(f"true mean: {_fmt(report.ybar)}  design: {','.join(map(str, report.design))}")
    for note in report.notes:
        print(f"note: {note}")
    print(_emit_footer(footer))
    return 0


def _cmd_reproduce(args) -> int:
    report = reproduce_kk2009()
    footer = {
        "policy": "prefer-correlation (headline) and prefer-covariance (side column)",
        "formulas": "implemented (as-printed variants appear only under diagnostics)",
    }
    if args.format == "json":
        print(json.dumps({
            "command": "reproduce-kk2009",
            "rows": [asdict(r) for r in report.rows],
            "repairs_correlation": [asdict(e) for e in report.repairs_correlation.repaired],
            "repairs_covariance": [asdict(e) for e in report.repairs_covariance.repaired],
            "published_ranking": list(report.published_ranking),
            "computed_ranking": list(report.computed_ranking),
            "m1_opt": report.m1_opt, "m2_opt": report.m2_opt,
            "notes": list(report.notes),
            "provenance": footer,
        }, indent=2))
        return 0
    header = ["estimator", "published", "computed", "delta", "pub_rank",
              "rank", "flag", "pre_covariance", "note"]
    rows = []
    for r in report.rows:
        rows.append([
            r.estimator, r.published_pre, r.pre, r.delta, r.published_rank,
            r.rank, "RANK-MISMATCH" if r.rank_mismatch else "",
            r.pre_covariance, r.covariance_note,
        ])
    if args.format == "csv":
        print(_csv_block(header, rows, footer), end="")
        return 0
    print("PRE reproduction, embedded six-stratum dataset")
    print(_table(header, [[_fmt(c) if not isinstance(c, str) else c for c in r] for r in rows]))
    print(f"tuned optimum: m1* = {_fmt(report.m1_opt)}, m2* = {_fmt(report.m2_opt)}")
    print("published ranking: " + " > ".join(report.published_ranking))
    print("computed ranking:  " + " > ".join(report.computed_ranking))
    for title, rep in (
        ("prefer-correlation", report.repairs_correlation),
        ("prefer-covariance", report.repairs_covariance),
    ):
        entries = rep.repaired + tuple(e for e in rep.flagged if not e.repaired)
        print(f"repair log ({title}): {len(entries)} entr{'y' if len(entries) == 1 else 'ies'}")
        for e in entries:
            what = (
                f"cov {_fmt(e.cov_before)} -> {_fmt(e.cov_after)}"
                if e.cov_before != e.cov_after
                else f"rho {_fmt(e.rho_before)} -> {_fmt(e.rho_after)}"
            )
            tail = f" ({e.note})" if e.note else ""
            print(f"  stratum {e.h} {e.pair}: {what}, discrepancy {_fmt(e.discrepancy)}{tail}")
    for note in report.notes:
        print(f"note: {note}")
    print(_emit_footer(footer))
    return 0


def _add_common(p: argparse.ArgumentParser, need_input: bool = True) -> None:
    if need_input:
        p.add_argument("--input", required=True, help="microdata csv or summary json")
        p.add_argument("--design", required=True,
                       help="per-stratum sample sizes, e.g. 31,21,29,38,22,39")
    p.add_argument("--policy", choices=_POLICIES, default="prefer-correlation")
    p.add_argument("--format", choices=_FORMATS, default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strataux",
        description="Stratified-sampling mean estimation with two auxiliary variables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="aggregated relative moments and slopes")
    _add_common(p)
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("mse", help="first-order MSE table, optimum and diagnostics")
    _add_common(p)
    p.add_argument("--m1", type=float, default=None)
    p.add_argument("--m2", type=float, default=None)
    p.set_defaults(func=_cmd_mse)

    p = sub.add_parser("pre", help="percent relative efficiency table")
    _add_common(p)
    p.set_defaults(func=_cmd_pre)

    p = sub.add_parser("simulate", help="SRSWOR Monte Carlo validation")
    _add_common(p)
    p.add_argument("--R", type=int, default=1000, help="replication count")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--m1", type=float, default=None, help="fixed tuning for exp_regression")
    p.add_argument("--m2", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--estimators", default="",
                   help="comma list, default all: " + ",".join(ESTIMATOR_ORDER))
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reproduce-kk2009",
                       help="reproduce the embedded dataset's efficiency table")
    _add_common(p, need_input=False)
    p.set_defaults(func=_cmd_reproduce)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 3
    except ValidationError as e:
        print(f"validation failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
