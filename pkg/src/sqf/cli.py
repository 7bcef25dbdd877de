"""Command-line driver: run or explain queries, benchmark the shipped suite.

Reports are JSON with stable key order and floats printed with 9 significant
digits; everything outside the `meta` section is byte-deterministic for a
fixed --seed. `SQF_LOG=debug|info|warn` controls diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import suite as suite_mod
from .engine.exec import execute_pipeline, result_checksum
from .errors import SqfError
from .fabric import FabricState, allocate, load_device_profile, reconfigure
from .frontend import bind, parse_query
from .library import load_library
from .oracle import first_multiset_diff, multisets_equal, reference_execute
from .planner import (
    full_estimate,
    enumerate_pipelines,
    select_best,
    software_baseline,
)
from .relcore import load_csv, table_stats

log = logging.getLogger("sqf")

_JOIN_FILTER = {
    "hash": "hash_fpga",
    "merge": "merge_fpga",
    "codesign": "hash_codesign",
}

BENCH_STRATEGIES = ("auto", "hash", "merge", "codesign")


def _setup_logging():
    level = {"debug": logging.DEBUG, "info": logging.INFO, "warn": logging.WARNING}.get(
        os.environ.get("SQF_LOG", "warn").lower(), logging.WARNING
    )
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def _round9(value):
    """Limit floats to 9 significant digits, recursively, for stable reports."""
    if isinstance(value, float):
        return float(f"{value:.9g}")
    if isinstance(value, dict):
        return {k: _round9(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round9(v) for v in value]
    return value


def _write_report(path, report: dict):
    text = json.dumps(_round9(report), indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")


class _Prepared:
    def __init__(self, args, query_path: Path):
        self.query_text = query_path.read_text(encoding="utf-8").strip()
        plan = parse_query(self.query_text)
        tables_dir = Path(args.tables)
        names = [plan.source] + ([plan.join.table] if plan.join else [])
        self.tables = {}
        self.table_paths = {}
        for name in names:
            path = tables_dir / f"{name}.csv"
            self.tables[name] = load_csv(path)
            self.table_paths[name] = str(path)
        catalog = {name: t.schema for name, t in self.tables.items()}
        self.bound = bind(plan, catalog)
        self.stats = {name: table_stats(t) for name, t in self.tables.items()}
        self.library = load_library(args.library)
        self.device = load_device_profile(args.device)
        self.candidates = enumerate_pipelines(self.bound, self.library, self.device)
        self.filtered = _apply_filters(self.candidates, args)

    def estimates(self):
        """Every enumerated candidate with its estimate (filters only narrow
        what select_best may choose, not what the report shows)."""
        return [
            (cand, full_estimate(cand, self.stats, self.device))
            for cand in self.candidates
        ]


def _apply_filters(candidates, args):
    from .errors import NoCandidates

    layout = getattr(args, "layout", "auto")
    join = getattr(args, "join", "auto")
    out = list(candidates)
    if layout != "auto":
        out = [c for c in out if c.layout == layout]
    if join != "auto":
        out = [c for c in out if c.join_algo == _JOIN_FILTER[join]]
    if not out:
        raise NoCandidates(f"no candidates left after --layout={layout} --join={join}")
    return out


def _candidate_dict(cand, est) -> dict:
    return {
        "tag": cand.tag,
        "join_algo": cand.join_algo,
        "layout": cand.layout,
        "host_stage": cand.host_stage,
        "modules": [
            {
                "kind": m.kind.value,
                "params": dict(m.params),
                "slots": m.slots,
                "bitstream_bytes": m.bitstream_bytes,
            }
            for m in cand.modules
        ],
        "slots": sum(m.slots for m in cand.modules),
        "estimate": {
            "stream_seconds": est.stream_seconds,
            "blocking_seconds": est.blocking_seconds,
            "reconfig_seconds": est.reconfig_seconds,
            "host_seconds": est.host_seconds,
            "total_seconds": est.total_seconds,
            "energy_joules": est.energy_joules,
            "stages": [
                {
                    "name": s.name,
                    "input_tuples": s.input_tuples,
                    "rate_tps": s.rate_tps,
                    "selectivity": s.selectivity,
                    "blocking_seconds": s.blocking_seconds,
                }
                for s in est.stages
            ],
        },
    }


def cmd_run(args) -> int:
    started = time.perf_counter()
    prepared = _Prepared(args, Path(args.query))
    chosen, chosen_est = select_best(prepared.filtered, prepared.stats, prepared.device)
    log.info("chosen candidate: %s", chosen.tag)

    fabric = FabricState(prepared.device)
    placement = allocate(fabric, chosen.modules)
    reconfig = reconfigure(fabric, placement)
    result, exec_report = execute_pipeline(
        chosen, prepared.tables, fabric, placement, prepared.device,
        seed=args.seed, estimate=chosen_est,
    )

    # oracle_checked is true only when the check ran AND the multisets match;
    # a failed check still records oracle_match/first_diff and exits 2.
    oracle_ran = False
    oracle_match = None
    first_diff = None
    if args.oracle:
        expected = reference_execute(prepared.bound, prepared.tables)
        oracle_ran = True
        oracle_match = multisets_equal(result, expected)
        if not oracle_match:
            diff = first_multiset_diff(result, expected)
            first_diff = {
                "row": list(diff[0]),
                "engine_count": diff[1],
                "oracle_count": diff[2],
            }

    warnings = []
    for name, table in prepared.tables.items():
        warnings.extend(f"{name}: {w}" for w in table.load_warnings)

    report = {
        "meta": {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "wall_seconds": time.perf_counter() - started,
            "exec_wall_seconds": exec_report.wall_seconds,
        },
        "seed": args.seed,
        "query": prepared.query_text,
        "tables": {
            name: {"path": prepared.table_paths[name], "rows": t.row_count}
            for name, t in prepared.tables.items()
        },
        "chosen": chosen.tag,
        "candidates": [_candidate_dict(c, e) for c, e in prepared.estimates()],
        "placement": {
            "region": placement.region,
            "entries": [
                {"kind": e.instance.kind.value, "start": e.start, "stop": e.stop}
                for e in placement.entries
            ],
        },
        "reconfig": {
            "seconds": reconfig.seconds,
            "bytes": reconfig.bytes,
            "wait_seconds": reconfig.wait_seconds,
            "skipped_entries": reconfig.skipped_entries,
        },
        "execution": {
            "result_rows": exec_report.result_rows,
            "checksum": f"0x{result_checksum(result):016x}",
            "order": "specified" if exec_report.order_specified else "unspecified",
            "simulated_seconds": exec_report.simulated_seconds,
            "bloom_false_positives": exec_report.bloom_false_positives,
            "stages": [
                {
                    "name": s.name,
                    "input": s.input_count,
                    "output": s.output_count,
                    "selectivity": s.selectivity,
                }
                for s in exec_report.stages
            ],
        },
        "oracle_checked": bool(oracle_ran and oracle_match),
        "oracle_match": oracle_match,
        "first_diff": first_diff,
        "warnings": warnings,
    }
    if args.out:
        _write_report(args.out, report)
    if oracle_ran and not oracle_match:
        print("oracle mismatch: engine and reference results differ", file=sys.stderr)
        return 2
    return 0


def cmd_explain(args) -> int:
    prepared = _Prepared(args, Path(args.query))
    pairs = prepared.estimates()
    chosen, _ = select_best(prepared.filtered, prepared.stats, prepared.device)

    header = f"{'':2}{'tag':<22}{'slots':>6}{'total_s':>14}{'energy_j':>14}{'reconfig_s':>14}"
    print(header)
    for cand, est in pairs:
        mark = "*" if cand.tag == chosen.tag else " "
        print(
            f"{mark:2}{cand.tag:<22}{sum(m.slots for m in cand.modules):>6}"
            f"{est.total_seconds:>14.6g}{est.energy_joules:>14.6g}"
            f"{est.reconfig_seconds:>14.6g}"
        )
    if args.out:
        report = {
            "query": prepared.query_text,
            "chosen": chosen.tag,
            "candidates": [_candidate_dict(c, e) for c, e in pairs],
        }
        _write_report(args.out, report)
    return 0


def cmd_bench(args) -> int:
    suite_dir = Path(args.suite)
    manifest = suite_mod.load_manifest(suite_dir)
    suite_mod.materialize(suite_dir)

    lib_path = args.library or (suite_dir / manifest["library"])
    dev_path = args.device or (suite_dir / manifest["device"])
    baseline_path = suite_dir / manifest["baseline_device"]
    baseline_dev = load_device_profile(baseline_path)

    rows = []
    failures = 0
    for query_name in manifest["queries"]:
        try:
            query_text = (suite_dir / query_name).read_text(encoding="utf-8")
            has_join = parse_query(query_text).join is not None
            parse_error = None
        except (SqfError, FileNotFoundError) as exc:
            has_join = False
            parse_error = exc
        for strategy in BENCH_STRATEGIES:
            row = {
                "query": query_name,
                "strategy": strategy,
                "status": "ok",
            }
            if parse_error is not None:
                failures += 1
                row["status"] = type(parse_error).__name__
                row["detail"] = str(parse_error)
                rows.append(row)
                continue
            if strategy != "auto" and not has_join:
                row["status"] = "not_applicable"
                rows.append(row)
                continue
            ns = argparse.Namespace(
                query=str(suite_dir / query_name),
                tables=str(suite_dir / manifest["tables_dir"]),
                library=str(lib_path),
                device=str(dev_path),
                seed=args.seed,
                layout="auto",
                join=strategy if strategy != "auto" else "auto",
                oracle=False,
                out=None,
            )
            try:
                started = time.perf_counter()
                prepared = _Prepared(ns, Path(ns.query))
                chosen, est = select_best(prepared.filtered, prepared.stats,
                                          prepared.device)
                fabric = FabricState(prepared.device)
                placement = allocate(fabric, chosen.modules)
                reconfigure(fabric, placement)
                result, exec_report = execute_pipeline(
                    chosen, prepared.tables, fabric, placement, prepared.device,
                    seed=args.seed, estimate=est,
                )
                wall = time.perf_counter() - started
                base_seconds, base_joules = software_baseline(
                    chosen, prepared.stats, baseline_dev
                )
                row.update(
                    {
                        "chosen": chosen.tag,
                        "estimated_total_seconds": est.total_seconds,
                        "estimated_energy_joules": est.energy_joules,
                        "reconfig_seconds": est.reconfig_seconds,
                        "overhead_fraction": est.reconfig_seconds / est.total_seconds
                        if est.total_seconds > 0
                        else 0.0,
                        "measured_wall_seconds": wall,
                        "result_rows": exec_report.result_rows,
                        "checksum": f"0x{result_checksum(result):016x}",
                        "baseline_seconds": base_seconds,
                        "baseline_energy_joules": base_joules,
                        "energy_ratio_vs_baseline": base_joules / est.energy_joules
                        if est.energy_joules > 0
                        else None,
                    }
                )
            except (SqfError, FileNotFoundError) as exc:
                failures += 1
                row["status"] = type(exc).__name__
                row["detail"] = str(exc)
            rows.append(row)

    ok_rows = [r for r in rows if r["status"] == "ok"]
    over = [r for r in ok_rows
            if r["overhead_fraction"] > manifest["max_overhead_fraction"]]
    report = {
        "meta": {"timestamp": datetime.now(timezone.utc).isoformat()},
        "suite": str(suite_dir),
        "seed": args.seed,
        "strategies": list(BENCH_STRATEGIES),
        "max_overhead_fraction": manifest["max_overhead_fraction"],
        "rows": rows,
        "summary": {
            "pairs": len(manifest["queries"]),
            "rows": len(rows),
            "ok": len(ok_rows),
            "failed": failures,
            "overhead_violations": len(over),
        },
    }
    _write_report(args.out, report)
    print(
        f"bench: {len(ok_rows)}/{len(rows)} rows ok, "
        f"{failures} recorded failures, {len(over)} overhead violations "
        f"-> {args.out}"
    )
    return 0


def _add_common(p: argparse.ArgumentParser, out_required: bool):
    p.add_argument("--query", required=True, help="query file (one statement)")
    p.add_argument("--tables", required=True, help="directory of <table>.csv files")
    p.add_argument("--library", required=True, help="module library JSON")
    p.add_argument("--device", required=True, help="device profile JSON")
    p.add_argument("--out", required=out_required, default=None, help="report JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layout", choices=["row", "column", "auto"], default="auto")
    p.add_argument("--join", choices=["hash", "merge", "codesign", "auto"],
                   default="auto")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqf",
        description="Compile SQL to reconfigurable operator pipelines, "
        "estimate costs, and execute on a modeled fabric.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="plan, place, execute, and report")
    _add_common(run, out_required=True)
    run.add_argument("--oracle", action="store_true",
                     help="verify the result against the reference evaluator")
    run.set_defaults(fn=cmd_run)

    explain = sub.add_parser("explain", help="show candidates without executing")
    _add_common(explain, out_required=False)
    explain.set_defaults(fn=cmd_explain)

    bench = sub.add_parser("bench", help="run the query suite under every strategy")
    bench.add_argument("--suite", required=True, help="suite directory with manifest.json")
    bench.add_argument("--out", default="bench_report.json")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--library", default=None, help="override the manifest library")
    bench.add_argument("--device", default=None, help="override the manifest device")
    bench.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SqfError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
