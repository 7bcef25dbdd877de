from __future__ import annotations

import json

import pytest

from conftest import REPO
from sqf.errors import (
    DuplicateKind,
    InvalidField,
    MissingKind,
    ParamOutOfRange,
    UnknownModuleKind,
)
from sqf.library import ModuleKind, instantiate, load_library


def test_default_library_has_all_kinds(default_library):
    assert len(default_library.kinds) == 10
    for kind in ModuleKind:
        assert kind in default_library


def _records():
    return json.loads((REPO / "library.default.json").read_text())


def test_missing_kind(tmp_path):
    records = [r for r in _records() if r["kind"] != "SORT"]
    path = tmp_path / "lib.json"
    path.write_text(json.dumps(records))
    with pytest.raises(MissingKind) as err:
        load_library(path)
    assert err.value.kind == "SORT"


def test_optional_kinds_may_be_absent(tmp_path):
    records = [r for r in _records() if r["kind"] not in ("BLOOM_CASCADE", "ALIGN")]
    path = tmp_path / "lib.json"
    path.write_text(json.dumps(records))
    lib = load_library(path)
    assert ModuleKind.BLOOM_CASCADE not in lib
    assert ModuleKind.ALIGN not in lib


def test_duplicate_kind(tmp_path):
    records = _records()
    records.append(dict(records[-1]))
    path = tmp_path / "lib.json"
    path.write_text(json.dumps(records))
    with pytest.raises(DuplicateKind):
        load_library(path)


def test_invalid_field_zero_bitstream(tmp_path):
    records = _records()
    records[0]["bitstream_bytes_per_slot"] = 0
    path = tmp_path / "lib.json"
    path.write_text(json.dumps(records))
    with pytest.raises(InvalidField):
        load_library(path)


def test_unknown_field_rejected(tmp_path):
    records = _records()
    records[0]["lut_count"] = 99
    path = tmp_path / "lib.json"
    path.write_text(json.dumps(records))
    with pytest.raises(InvalidField) as err:
        load_library(path)
    assert err.value.name == "lut_count"


def test_restriction_sizing(default_library):
    inst = instantiate(default_library, ModuleKind.RESTRICTION, {"terms": 2})
    # 2 terms fit one 4-term block
    spec = default_library.spec(ModuleKind.RESTRICTION)
    assert inst.slots == spec.base_slots + spec.slots_per_unit * 1
    five = instantiate(default_library, ModuleKind.RESTRICTION, {"terms": 5})
    assert five.slots == spec.base_slots + spec.slots_per_unit * 2


def test_restriction_two_terms_single_slot(tmp_path):
    # base_slots 1 with slots_per_unit 0: up to the cap, always one slot
    records = _records()
    for rec in records:
        if rec["kind"] == "RESTRICTION":
            rec["base_slots"] = 1
            rec["slots_per_unit"] = 0
    path = tmp_path / "lib.json"
    path.write_text(json.dumps(records))
    lib = load_library(path)
    inst = instantiate(lib, ModuleKind.RESTRICTION, {"terms": 2})
    assert inst.slots == 1


def test_sort_sizing(default_library):
    spec = default_library.spec(ModuleKind.SORT)
    inst = instantiate(default_library, ModuleKind.SORT, {"run_capacity": 4096})
    assert inst.slots == spec.base_slots + spec.slots_per_unit * 4


def test_unknown_module_kind(tmp_path):
    records = [r for r in _records() if r["kind"] != "ALIGN"]
    path = tmp_path / "lib.json"
    path.write_text(json.dumps(records))
    lib = load_library(path)
    with pytest.raises(UnknownModuleKind):
        instantiate(lib, ModuleKind.ALIGN)


def test_param_out_of_range(default_library):
    with pytest.raises(ParamOutOfRange):
        instantiate(default_library, ModuleKind.RESTRICTION, {"terms": 9})
    with pytest.raises(ParamOutOfRange):
        instantiate(default_library, ModuleKind.BLOOM_CASCADE, {"stages": 0})


def test_bitstream_monotone_in_slots(default_library):
    sizes = [
        instantiate(default_library, ModuleKind.SORT, {"run_capacity": cap}).bitstream_bytes
        for cap in (1024, 2048, 4096, 8192)
    ]
    assert sizes == sorted(sizes) and len(set(sizes)) == len(sizes)


def test_instantiate_is_pure(default_library):
    a = instantiate(default_library, ModuleKind.ALU, {"nodes": 3})
    b = instantiate(default_library, ModuleKind.ALU, {"nodes": 3})
    assert a == b
    assert a.slots >= 1
    assert a.bitstream_bytes == a.slots * a.spec.bitstream_bytes_per_slot


def test_every_instance_has_at_least_one_slot(default_library):
    params_by_kind = {
        ModuleKind.RESTRICTION: {"terms": 1},
        ModuleKind.ALU: {"nodes": 1},
        ModuleKind.SORT: {"run_capacity": 1},
        ModuleKind.BLOOM_CASCADE: {"stages": 1},
        ModuleKind.AGGREGATE: {"grouped": False},
    }
    for kind in ModuleKind:
        inst = instantiate(default_library, kind, params_by_kind.get(kind, {}))
        assert inst.slots >= 1
