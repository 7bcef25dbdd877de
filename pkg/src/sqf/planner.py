"""Candidate pipeline enumeration, the time/energy calculus, and selection.

The calculus is a bottleneck/phase model (documented in docs/calculus.md):
streaming stages run concurrently at chained rates and contribute
`max(input/rate)`; sorts and hash-join builds add serial blocking phases;
reconfiguration and the embedded-host join phase add their own terms. All
cardinalities come from exact table statistics through textbook
independence heuristics, so estimates are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .engine.bloom import analytic_fp_rate, bloom_dims
from .errors import MissingStats, NoCandidates
from .fabric import DeviceProfile
from .frontend.binder import (
    BArith,
    BBool,
    BCmp,
    BInt,
    BoundPlan,
    BStr,
    FromValue,
    ValueRef,
    expr_slots,
    needs_reorder,
    split_conjuncts,
    walk_bound,
)
from .library import ModuleInstance, ModuleKind, ModuleLibrary, instantiate
from .relcore import TypeKind

DEFAULT_CMP_SELECTIVITY = 1.0 / 3.0
SORT_RUN_CAPACITY = 1024  # pinned; keeps worst-case chains within one region
BLOOM_STAGES = 2

JOIN_ALGO_NONE = "none"
JOIN_ALGO_HASH = "hash_fpga"
JOIN_ALGO_MERGE = "merge_fpga"
JOIN_ALGO_CODESIGN = "hash_codesign"

HOST_HASH_JOIN = "HASH_JOIN_HOST"


@dataclass(frozen=True)
class CandidatePipeline:
    tag: str
    join_algo: str
    layout: str  # "row" | "column"
    modules: tuple[ModuleInstance, ...]
    roles: tuple[str, ...]  # stage role per module, e.g. "sort_left"
    host_stage: str | None
    plan: BoundPlan


@dataclass(frozen=True)
class StageEstimate:
    name: str
    input_tuples: float
    rate_tps: float
    selectivity: float  # clipped to [0, 1] for reporting
    blocking_seconds: float

    @property
    def seconds(self) -> float:
        return self.input_tuples / self.rate_tps if self.rate_tps > 0 else 0.0


@dataclass(frozen=True)
class CostEstimate:
    stream_seconds: float
    blocking_seconds: float
    reconfig_seconds: float
    host_seconds: float
    total_seconds: float
    energy_joules: float
    stages: tuple[StageEstimate, ...]


# --------------------------------------------------------------------------
# plan analysis helpers
# --------------------------------------------------------------------------

def count_comparisons(expr) -> int:
    return sum(1 for node in walk_bound(expr) if isinstance(node, BCmp))


def count_arith_nodes(bp: BoundPlan) -> int:
    total = 0
    if bp.restriction is not None:
        total += sum(1 for n in walk_bound(bp.restriction) if isinstance(n, BArith))
    for comp in bp.computed:
        total += sum(1 for n in walk_bound(comp.expr) if isinstance(n, BArith))
    return total


def touched_columns(bp: BoundPlan) -> dict:
    """Per-slot set of referenced column indices (join keys included)."""
    touched = {0: set(), 1: set()}

    def take(expr):
        for node in walk_bound(expr):
            if isinstance(node, ValueRef) and node.kind == "column":
                touched[node.slot].add(node.index)

    if bp.restriction is not None:
        take(bp.restriction)
    for comp in bp.computed:
        take(comp.expr)
    for ref in bp.group_by:
        if ref.kind == "column":
            touched[ref.slot].add(ref.index)
    for agg in bp.aggregates:
        if agg.arg is not None and agg.arg.kind == "column":
            touched[agg.arg.slot].add(agg.arg.index)
    for col in bp.output:
        if isinstance(col.source, FromValue) and col.source.ref.kind == "column":
            touched[col.source.ref.slot].add(col.source.ref.index)
    if bp.has_join:
        touched[0].add(bp.join_left_index)
        touched[1].add(bp.join_right_index)
    return touched


def _effective_tuple_bytes(bp: BoundPlan, layout: str) -> tuple[int, int]:
    """Source-stage bytes per tuple for (left, right); column layout streams
    only the touched columns."""
    left_tb = bp.left_schema.tuple_bytes
    right_tb = bp.right_schema.tuple_bytes if bp.right_schema else 0
    if layout == "column":
        touched = touched_columns(bp)
        left_tb = max(
            1, sum(bp.left_schema.columns[i][1].width_bytes for i in touched[0])
        )
        if bp.right_schema is not None:
            right_tb = max(
                1, sum(bp.right_schema.columns[i][1].width_bytes for i in touched[1])
            )
    return left_tb, right_tb


def _column_layout_eligible(bp: BoundPlan) -> bool:
    touched = touched_columns(bp)
    total_cols = bp.left_schema.arity + (bp.right_schema.arity if bp.right_schema else 0)
    used = len(touched[0]) + len(touched[1])
    return 2 * used <= total_cols


# --------------------------------------------------------------------------
# selectivity estimation
# --------------------------------------------------------------------------

def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def _column_stat(ref: ValueRef, bp: BoundPlan, stats: dict):
    table = bp.left_table if ref.slot == 0 else bp.right_table
    name = (bp.left_schema if ref.slot == 0 else bp.right_schema).columns[ref.index][0]
    return stats[table].column(name)


def _cmp_selectivity(cmp: BCmp, bp: BoundPlan, stats: dict) -> float:
    lhs, rhs, op = cmp.lhs, cmp.rhs, cmp.op
    if isinstance(rhs, ValueRef) and isinstance(lhs, (BInt, BStr)):
        lhs, rhs = rhs, lhs
        op = {"<": ">", "<=": ">=", ">": "<", ">=": "<="}.get(op, op)
    if isinstance(lhs, ValueRef) and lhs.kind == "column" and isinstance(rhs, (BInt, BStr)):
        stat = _column_stat(lhs, bp, stats)
        d = stat.distinct_count
        if op == "=":
            return _clamp(1.0 / d) if d > 0 else 1.0
        if op == "<>":
            return _clamp(1.0 - 1.0 / d) if d > 0 else 1.0
        if cmp.kind is TypeKind.INT and stat.min_value is not None:
            lo, hi, c = stat.min_value, stat.max_value, rhs.value
            if hi == lo:
                if op in ("<", "<="):
                    return 1.0 if (lo < c or (op == "<=" and lo == c)) else 0.0
                return 1.0 if (lo > c or (op == ">=" and lo == c)) else 0.0
            if op in ("<", "<="):
                return _clamp((c - lo) / (hi - lo))
            return _clamp((hi - c) / (hi - lo))
        return DEFAULT_CMP_SELECTIVITY
    if (
        op == "="
        and isinstance(lhs, ValueRef) and lhs.kind == "column"
        and isinstance(rhs, ValueRef) and rhs.kind == "column"
    ):
        d1 = _column_stat(lhs, bp, stats).distinct_count
        d2 = _column_stat(rhs, bp, stats).distinct_count
        d = max(d1, d2)
        return _clamp(1.0 / d) if d > 0 else 1.0
    return DEFAULT_CMP_SELECTIVITY


def estimate_selectivity(expr, bp: BoundPlan, stats: dict) -> float:
    """Independence-heuristic selectivity of a bound predicate, in [0, 1]."""
    if isinstance(expr, BCmp):
        return _cmp_selectivity(expr, bp, stats)
    if isinstance(expr, BBool):
        subs = [estimate_selectivity(c, bp, stats) for c in expr.children]
        if expr.op == "NOT":
            return _clamp(1.0 - subs[0])
        if expr.op == "AND":
            out = 1.0
            for s in subs:
                out *= s
            return _clamp(out)
        out = 0.0
        for s in subs:
            out = out + s - out * s
        return _clamp(out)
    return DEFAULT_CMP_SELECTIVITY


def restriction_split(bp: BoundPlan, stats: dict):
    """Per-side selectivities of a join plan's restriction.

    Returns (left_sel, right_sel, residual_sel): conjuncts referencing only
    one side filter that side's stream; conjuncts spanning both sides (or a
    whole single-table predicate) become the residual applied at join output.
    """
    if bp.restriction is None:
        return 1.0, 1.0, 1.0
    if not bp.has_join:
        return estimate_selectivity(bp.restriction, bp, stats), 1.0, 1.0
    left = right = residual = 1.0
    for conj in split_conjuncts(bp.restriction):
        sel = estimate_selectivity(conj, bp, stats)
        slots = expr_slots(conj)
        if slots <= {0}:
            left *= sel
        elif slots == {1}:
            right *= sel
        else:
            residual *= sel
    return _clamp(left), _clamp(right), _clamp(residual)


def _merge_levels(n: float, capacity: int) -> int:
    runs = math.ceil(n / capacity) if n > 0 else 0
    if runs <= 1:
        return 0
    return math.ceil(math.log2(runs))


def _group_count(bp: BoundPlan, stats: dict, n_in: float) -> float:
    if not bp.group_by:
        return 1.0
    product = 1.0
    for ref in bp.group_by:
        if ref.kind == "column":
            d = _column_stat(ref, bp, stats).distinct_count
            product *= max(1, d)
        else:
            product *= max(1.0, n_in)
    return min(n_in, product) if n_in > 0 else 0.0


# --------------------------------------------------------------------------
# pipeline enumeration
# --------------------------------------------------------------------------

def _chain_for(bp: BoundPlan, lib: ModuleLibrary, join_algo: str):
    """Module (kind, params, role) triples in canonical stream order, or None
    if the library lacks a required kind."""
    chain: list[tuple[ModuleKind, dict, str]] = []
    terms = count_comparisons(bp.restriction) if bp.restriction is not None else 0
    if terms:
        chain.append((ModuleKind.RESTRICTION, {"terms": terms}, "restriction"))
    nodes = count_arith_nodes(bp)
    if nodes:
        chain.append((ModuleKind.ALU, {"nodes": nodes}, "alu"))

    if join_algo == JOIN_ALGO_HASH:
        chain.append((ModuleKind.HASH_JOIN, {}, "hash_join"))
    elif join_algo == JOIN_ALGO_MERGE:
        chain.append((ModuleKind.SORT, {"run_capacity": SORT_RUN_CAPACITY}, "sort_left"))
        chain.append((ModuleKind.SORT, {"run_capacity": SORT_RUN_CAPACITY}, "sort_right"))
        chain.append((ModuleKind.MERGE_JOIN, {}, "merge_join"))
    elif join_algo == JOIN_ALGO_CODESIGN:
        chain.append((ModuleKind.BLOOM_CASCADE, {"stages": BLOOM_STAGES}, "bloom_cascade"))
        chain.append((ModuleKind.ALIGN, {}, "align"))
        for kind, _, _ in chain:
            if kind not in lib:
                return None
        return chain

    if bp.grouped:
        chain.append(
            (ModuleKind.AGGREGATE, {"grouped": bool(bp.group_by)}, "aggregate")
        )
    if needs_reorder(bp):
        chain.append((ModuleKind.REORDER, {}, "reorder"))
    if bp.order_by:
        chain.append((ModuleKind.SORT, {"run_capacity": SORT_RUN_CAPACITY}, "sort"))
    if not chain:
        chain.append((ModuleKind.PASSTHROUGH, {}, "passthrough"))
    for kind, _, _ in chain:
        if kind not in lib:
            return None
    return chain



def _codesign_feasible(bp: BoundPlan, dev: DeviceProfile) -> bool:
    if not bp.has_join:
        return False
    block = dev.cache_line_bytes  # block multiplier is fixed at 1
    return (
        bp.left_schema.tuple_bytes + 8 <= block
        and bp.right_schema.tuple_bytes + 8 <= block
    )


def enumerate_pipelines(
    bp: BoundPlan, lib: ModuleLibrary, dev: DeviceProfile
) -> list[CandidatePipeline]:
    """All executable pipelines for a plan, in deterministic order:
    row-layout FPGA-only per join algorithm, column-layout variants when the
    plan touches at most half of the source columns, then the co-design
    variant when a join exists and the library carries the filter modules."""
    algos = [JOIN_ALGO_HASH, JOIN_ALGO_MERGE] if bp.has_join else [JOIN_ALGO_NONE]
    layouts = ["row"]
    if _column_layout_eligible(bp):
        layouts.append("column")

    candidates: list[CandidatePipeline] = []
    missing_note = None
    for layout in layouts:
        for algo in algos:
            chain = _chain_for(bp, lib, algo)
            if chain is None:
                missing_note = f"library lacks a module kind for {algo}"
                continue
            modules = tuple(instantiate(lib, kind, params) for kind, params, _ in chain)
            roles = tuple(role for _, _, role in chain)
            candidates.append(
                CandidatePipeline(
                    tag=f"{layout}/{algo}",
                    join_algo=algo,
                    layout=layout,
                    modules=modules,
                    roles=roles,
                    host_stage=None,
                    plan=bp,
                )
            )
    if (
        bp.has_join
        and ModuleKind.BLOOM_CASCADE in lib
        and ModuleKind.ALIGN in lib
        and _codesign_feasible(bp, dev)
    ):
        chain = _chain_for(bp, lib, JOIN_ALGO_CODESIGN)
        if chain is not None:
            modules = tuple(instantiate(lib, kind, params) for kind, params, _ in chain)
            roles = tuple(role for _, _, role in chain)
            candidates.append(
                CandidatePipeline(
                    tag=f"row/{JOIN_ALGO_CODESIGN}",
                    join_algo=JOIN_ALGO_CODESIGN,
                    layout="row",
                    modules=modules,
                    roles=roles,
                    host_stage=HOST_HASH_JOIN,
                    plan=bp,
                )
            )
    if not candidates:
        raise NoCandidates(missing_note or "no feasible candidate pipelines")
    return candidates


# --------------------------------------------------------------------------
# the calculus
# --------------------------------------------------------------------------

def _require_stats(bp: BoundPlan, stats: dict):
    for table in bp.table_names():
        if table not in stats:
            raise MissingStats(table)


def _join_key_distinct(bp: BoundPlan, stats: dict) -> int:
    left_col = bp.left_schema.columns[bp.join_left_index][0]
    right_col = bp.right_schema.columns[bp.join_right_index][0]
    d_l = stats[bp.left_table].column(left_col).distinct_count
    d_r = stats[bp.right_table].column(right_col).distinct_count
    return max(d_l, d_r, 1)


def estimate_time(
    c: CandidatePipeline, stats: dict, dev: DeviceProfile
) -> CostEstimate:
    """Time fields of the cost model; energy is filled by estimate_energy."""
    bp = c.plan
    _require_stats(bp, stats)
    n_l = float(stats[bp.left_table].row_count)
    n_r = float(stats[bp.right_table].row_count) if bp.has_join else 0.0
    sel_l, sel_r, residual = restriction_split(bp, stats)
    nl_f, nr_f = n_l * sel_l, n_r * sel_r

    left_tb, right_tb = _effective_tuple_bytes(bp, c.layout)
    source_bytes = n_l * left_tb + n_r * right_tb
    source_seconds = source_bytes / dev.mem_bytes_per_s
    source_tuples = n_l + n_r
    r0 = dev.mem_bytes_per_s / max(left_tb, right_tb if bp.has_join else 0, 1)

    if bp.has_join:
        key_d = _join_key_distinct(bp, stats)
        join_key_out = nl_f * nr_f / key_d
        join_out = join_key_out * residual
        n_build = min(nl_f, nr_f)
        n_probe = max(nl_f, nr_f)
    else:
        join_out = join_key_out = 0.0
        n_build = n_probe = 0.0

    stages = [StageEstimate("source", source_tuples,
                            source_tuples / source_seconds if source_seconds > 0 else r0,
                            1.0, 0.0)]
    upstream_rate = r0
    flow = source_tuples if bp.has_join else n_l
    blocking_total = 0.0
    host_seconds = 0.0
    bloom_out = 0.0

    for module, role in zip(c.modules, c.roles):
        spec = module.spec
        r_mod = spec.tuples_per_cycle * min(dev.clock_hz, spec.max_clock_hz)
        rate = min(upstream_rate, r_mod)
        blocking = 0.0

        if role == "restriction":
            n_in = flow
            n_out = (nl_f + nr_f) if bp.has_join else n_l * sel_l
        elif role == "alu":
            n_in = n_out = flow
        elif role == "hash_join":
            n_in = n_probe
            n_out = join_out
            blocking = n_build / rate if rate > 0 else 0.0
        elif role == "sort_left":
            n_in = n_out = nl_f
            cap = module.param("run_capacity", SORT_RUN_CAPACITY)
            blocking = _merge_levels(n_in, cap) * (n_in / rate if rate > 0 else 0.0)
        elif role == "sort_right":
            n_in = n_out = nr_f
            cap = module.param("run_capacity", SORT_RUN_CAPACITY)
            blocking = _merge_levels(n_in, cap) * (n_in / rate if rate > 0 else 0.0)
        elif role == "merge_join":
            n_in = nl_f + nr_f
            n_out = join_out
        elif role == "bloom_cascade":
            n_in = n_probe
            true_match = min(1.0, join_key_out / n_probe) if n_probe > 0 else 0.0
            m, k = bloom_dims(n_build)
            stages_n = module.param("stages", BLOOM_STAGES)
            fp = analytic_fp_rate(m, k, n_build, stages_n)
            sel_bloom = _clamp(true_match + fp)
            n_out = n_in * sel_bloom
            bloom_out = n_out
        elif role == "align":
            n_in = n_out = bloom_out + n_build
        elif role == "aggregate":
            n_in = flow
            n_out = _group_count(bp, stats, n_in)
        elif role in ("reorder", "passthrough"):
            n_in = n_out = flow
        elif role == "sort":
            n_in = n_out = flow
            cap = module.param("run_capacity", SORT_RUN_CAPACITY)
            blocking = _merge_levels(n_in, cap) * (n_in / rate if rate > 0 else 0.0)
        else:  # pragma: no cover
            raise AssertionError(f"unknown stage role {role}")

        sel = n_out / n_in if n_in > 0 else 1.0
        stages.append(StageEstimate(role, n_in, rate, _clamp(sel), blocking))
        blocking_total += blocking
        upstream_rate = rate * sel if sel > 0 else rate
        flow = n_out

    if c.host_stage is not None:
        host_seconds = bloom_out / dev.host_tuples_per_s
        stages.append(StageEstimate("host_join", bloom_out, dev.host_tuples_per_s,
                                    _clamp(join_out / bloom_out) if bloom_out > 0 else 1.0,
                                    0.0))

    stream_seconds = max(
        [source_seconds]
        + [s.seconds for s in stages[1:] if s.name != "host_join"]
    )
    reconfig_seconds = (
        sum(m.bitstream_bytes for m in c.modules) / dev.icap_bytes_per_s
    )
    total = stream_seconds + blocking_total + reconfig_seconds + host_seconds
    return CostEstimate(
        stream_seconds=stream_seconds,
        blocking_seconds=blocking_total,
        reconfig_seconds=reconfig_seconds,
        host_seconds=host_seconds,
        total_seconds=total,
        energy_joules=0.0,
        stages=tuple(stages),
    )


def estimate_energy(c: CandidatePipeline, t: CostEstimate, dev: DeviceProfile) -> float:
    """Static power over the whole run, per-slot active power while a module
    streams (plus its own blocking phases), and reconfiguration power."""
    energy = dev.p_static_w * t.total_seconds
    by_role = {s.name: s for s in t.stages}
    for module, role in zip(c.modules, c.roles):
        active = t.stream_seconds + by_role[role].blocking_seconds
        energy += dev.p_slot_active_w * module.slots * active
    energy += dev.p_reconfig_w * t.reconfig_seconds
    return energy


def full_estimate(c: CandidatePipeline, stats: dict, dev: DeviceProfile) -> CostEstimate:
    t = estimate_time(c, stats, dev)
    return replace(t, energy_joules=estimate_energy(c, t, dev))


def select_best(
    cands: list[CandidatePipeline], stats: dict, dev: DeviceProfile
) -> tuple[CandidatePipeline, CostEstimate]:
    """Argmin of total time; ties resolved by energy, then enumeration order."""
    if not cands:
        raise NoCandidates()
    best = None
    best_key = None
    for idx, cand in enumerate(cands):
        est = full_estimate(cand, stats, dev)
        key = (est.total_seconds, est.energy_joules, idx)
        if best_key is None or key < best_key:
            best, best_key = (cand, est), key
    return best


def software_baseline(
    c: CandidatePipeline, stats: dict, dev: DeviceProfile
) -> tuple[float, float]:
    """(seconds, joules) for running the same logical stages serially on the
    profile's host processor; the reference point for modeled energy ratios."""
    t = estimate_time(c, stats, dev)
    seconds = t.stages[0].seconds
    for stage in t.stages[1:]:
        if stage.name == "host_join":
            continue
        seconds += stage.input_tuples / dev.host_tuples_per_s
    if c.host_stage is not None:
        seconds += t.host_seconds
    return seconds, dev.p_static_w * seconds
