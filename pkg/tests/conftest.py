from __future__ import annotations

import pathlib

import pytest

from sqf import suite as suite_mod
from sqf.engine.exec import execute_pipeline
from sqf.fabric import DeviceProfile, FabricState, allocate, load_device_profile, reconfigure
from sqf.frontend import bind, parse_query
from sqf.library import load_library
from sqf.planner import enumerate_pipelines, full_estimate
from sqf.relcore import ColumnType, Schema, Table, table_stats

REPO = pathlib.Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def default_library():
    return load_library(REPO / "library.default.json")


@pytest.fixture(scope="session")
def default_device():
    return load_device_profile(REPO / "device.default.json")


@pytest.fixture(scope="session")
def suite_dir():
    suite_mod.materialize(REPO / "suite")
    return REPO / "suite"


def make_table(cols, rows) -> Table:
    """cols: list of (name, "INT" | int-char-width)."""
    schema_cols = []
    for name, kind in cols:
        if kind == "INT":
            schema_cols.append((name, ColumnType.int64()))
        else:
            schema_cols.append((name, ColumnType.char(kind)))
    return Table(Schema(tuple(schema_cols)), tuple(tuple(r) for r in rows))


def bind_sql(sql: str, tables: dict):
    plan = parse_query(sql)
    return bind(plan, {name: t.schema for name, t in tables.items()})


def run_candidate(cand, tables, dev: DeviceProfile, seed: int = 7, stats=None):
    """Allocate a fresh fabric, reconfigure, and execute one candidate."""
    est = None
    if stats is not None:
        est = full_estimate(cand, stats, dev)
    fabric = FabricState(dev)
    placement = allocate(fabric, cand.modules)
    reconfigure(fabric, placement)
    return execute_pipeline(cand, tables, fabric, placement, dev, seed=seed,
                            estimate=est)


def run_all_candidates(sql: str, tables: dict, lib, dev, seed: int = 7):
    """Returns [(candidate, result table, exec report)] for every pipeline."""
    bp = bind_sql(sql, tables)
    stats = {name: table_stats(t) for name, t in tables.items()}
    out = []
    for cand in enumerate_pipelines(bp, lib, dev):
        result, report = run_candidate(cand, tables, dev, seed=seed, stats=stats)
        out.append((cand, result, report))
    return out
