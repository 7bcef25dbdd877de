"""Shipped benchmark suite: manifest handling and deterministic table data.

The repository ships the suite's queries and a manifest that pins the table
generator (seed, row counts, column distributions) plus the released
overhead bound. Table CSVs are materialized on demand from the manifest, so
`bench` output stays byte-deterministic without committing megabytes of
data.

Run `python -m sqf.suite <suite_dir>` to materialize the tables explicitly.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from .errors import SqfError


def load_manifest(suite_dir) -> dict:
    path = Path(suite_dir) / "manifest.json"
    if not path.is_file():
        raise FileNotFoundError(f"no suite manifest: {path}")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    for key in ("seed", "max_overhead_fraction", "tables_dir", "queries", "tables",
                "library", "device", "baseline_device"):
        if key not in manifest:
            raise SqfError(f"suite manifest is missing `{key}`")
    return manifest


def _gen_cell(rng: random.Random, spec: dict, row_index: int) -> str:
    gen = spec["gen"]
    kind = gen["kind"]
    if kind == "serial":
        return str(row_index + gen.get("start", 0))
    if kind == "randint":
        return str(rng.randint(gen["lo"], gen["hi"]))
    if kind == "choice":
        return rng.choice(gen["values"])
    raise SqfError(f"unknown generator kind `{kind}`")


def materialize(suite_dir, force: bool = False) -> list:
    """Write the manifest's tables under `tables_dir`; returns written paths.

    Existing files are left alone unless `force`; generation is a pure
    function of the manifest, so a repeated run writes identical bytes.
    """
    suite_dir = Path(suite_dir)
    manifest = load_manifest(suite_dir)
    tables_dir = suite_dir / manifest["tables_dir"]
    tables_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, spec in manifest["tables"].items():
        path = tables_dir / f"{name}.csv"
        if path.is_file() and not force:
            continue
        rng = random.Random(manifest["seed"] ^ hash_name(name))
        header = ",".join(f"{c['name']}:{c['type']}" for c in spec["columns"])
        lines = [header]
        for i in range(spec["rows"]):
            lines.append(",".join(_gen_cell(rng, c, i) for c in spec["columns"]))
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
        written.append(path)
    return written


def hash_name(name: str) -> int:
    """Stable per-table seed offset (names must not depend on PYTHONHASHSEED)."""
    h = 0
    for ch in name:
        h = (h * 131 + ord(ch)) & 0xFFFFFFFF
    return h


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="materialize suite tables")
    parser.add_argument("suite_dir")
    parser.add_argument("--force", action="store_true")
    args = parser.parse_args(argv)
    written = materialize(args.suite_dir, force=args.force)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
