"""Reconfigurable fabric model: regions of slots, placement, and the
serialized configuration port.

Regions are linear slot chains. A pipeline is placed contiguously, in stream
order, inside a single region (first-fit over regions, then start offsets).
Loading bitstreams goes through one configuration port, so concurrent
requests queue; a load is free when the identical module content is already
resident at the exact slot range.

FabricState mutations are not thread safe; callers serialize allocate,
release, and reconfigure. Pipelines placed in different regions may execute
concurrently once configured.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InsufficientSlots, InvalidField, LibraryParseError, NotAllocated
from .library import ModuleInstance

_PROFILE_FIELDS = (
    "regions",
    "slots_per_region",
    "icap_bytes_per_s",
    "mem_bytes_per_s",
    "clock_hz",
    "p_static_w",
    "p_slot_active_w",
    "p_reconfig_w",
    "host_tuples_per_s",
    "cache_line_bytes",
)


@dataclass(frozen=True)
class DeviceProfile:
    regions: int = 2
    slots_per_region: int = 16
    icap_bytes_per_s: float = 4.0e8
    mem_bytes_per_s: float = 1.6e9
    clock_hz: float = 2.0e8
    p_static_w: float = 5.0
    p_slot_active_w: float = 1.0
    p_reconfig_w: float = 2.0
    host_tuples_per_s: float = 2.0e7
    cache_line_bytes: int = 64

    def __post_init__(self):
        if self.regions < 1 or self.slots_per_region < 1:
            raise InvalidField("regions", "regions and slots_per_region must be positive")
        for name in ("icap_bytes_per_s", "mem_bytes_per_s", "clock_hz", "host_tuples_per_s"):
            if getattr(self, name) <= 0:
                raise InvalidField(name, "must be positive")
        for name in ("p_static_w", "p_slot_active_w", "p_reconfig_w"):
            if getattr(self, name) < 0:
                raise InvalidField(name, "must be non-negative")
        c = self.cache_line_bytes
        if c < 1 or (c & (c - 1)) != 0:
            raise InvalidField("cache_line_bytes", "must be a positive power of two")


def load_device_profile(path) -> DeviceProfile:
    """Load a profile from JSON with exactly the DeviceProfile fields
    (plus an optional documentation-only `comment`)."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such device profile: {p}")
    try:
        rec = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LibraryParseError(f"{p}: {exc}") from exc
    if not isinstance(rec, dict):
        raise LibraryParseError(f"{p}: top level must be an object")
    for key in rec:
        if key not in _PROFILE_FIELDS and key != "comment":
            raise InvalidField(key, "unknown field")
    for key in _PROFILE_FIELDS:
        if key not in rec:
            raise InvalidField(key, "missing field")
    return DeviceProfile(
        regions=int(rec["regions"]),
        slots_per_region=int(rec["slots_per_region"]),
        icap_bytes_per_s=float(rec["icap_bytes_per_s"]),
        mem_bytes_per_s=float(rec["mem_bytes_per_s"]),
        clock_hz=float(rec["clock_hz"]),
        p_static_w=float(rec["p_static_w"]),
        p_slot_active_w=float(rec["p_slot_active_w"]),
        p_reconfig_w=float(rec["p_reconfig_w"]),
        host_tuples_per_s=float(rec["host_tuples_per_s"]),
        cache_line_bytes=int(rec["cache_line_bytes"]),
    )


@dataclass(frozen=True)
class PlacementEntry:
    instance: ModuleInstance
    region: int
    start: int
    stop: int  # exclusive

    @property
    def slot_range(self) -> tuple[int, int]:
        return (self.start, self.stop)


@dataclass(frozen=True)
class Placement:
    entries: tuple[PlacementEntry, ...]

    @property
    def region(self) -> int:
        return self.entries[0].region

    @property
    def total_slots(self) -> int:
        return sum(e.stop - e.start for e in self.entries)

    @property
    def total_bitstream_bytes(self) -> int:
        return sum(e.instance.bitstream_bytes for e in self.entries)


@dataclass(frozen=True)
class ReconfigReport:
    seconds: float
    bytes: int
    wait_seconds: float
    skipped_entries: int  # already resident at their exact ranges


class FabricState:
    """Allocation bitmaps plus the residency cache of loaded bitstreams."""

    def __init__(self, profile: DeviceProfile):
        self.profile = profile
        self.occupied = [[False] * profile.slots_per_region for _ in range(profile.regions)]
        # residency: (region, start, stop) -> module identity, kept across release
        self.resident: dict[tuple[int, int, int], tuple] = {}
        self.placements: dict[int, Placement] = {}
        self.icap_busy_until = 0.0

    # -- queries -----------------------------------------------------------

    def free_run_at(self, region: int, start: int) -> int:
        bitmap = self.occupied[region]
        n = 0
        for i in range(start, self.profile.slots_per_region):
            if bitmap[i]:
                break
            n += 1
        return n

    def max_contiguous_free(self) -> int:
        best = 0
        for region in range(self.profile.regions):
            run = 0
            for occ in self.occupied[region]:
                run = 0 if occ else run + 1
                best = max(best, run)
        return best

    def is_allocated(self, placement: Placement) -> bool:
        return id(placement) in self.placements

    def is_resident(self, entry: PlacementEntry) -> bool:
        key = (entry.region, entry.start, entry.stop)
        return self.resident.get(key) == entry.instance.identity()

    def check_invariants(self) -> None:
        """Active ranges pairwise disjoint and bitmap in sync; test hook."""
        ranges = []
        for placement in self.placements.values():
            for e in placement.entries:
                ranges.append((e.region, e.start, e.stop))
        ranges.sort()
        for (r1, _, e1), (r2, s2, _) in zip(ranges, ranges[1:]):
            if r1 == r2 and s2 < e1:
                raise AssertionError(f"overlapping slot ranges in region {r1}")
        rebuilt = [
            [False] * self.profile.slots_per_region for _ in range(self.profile.regions)
        ]
        for region, start, stop in ranges:
            for i in range(start, stop):
                rebuilt[region][i] = True
        if rebuilt != self.occupied:
            raise AssertionError("occupied bitmap out of sync with active placements")


def allocate(fabric: FabricState, modules) -> Placement:
    """First-fit placement of a module chain, atomically.

    Regions are scanned in index order and start offsets ascending; the chain
    occupies one contiguous run in stream order.
    """
    modules = list(modules)
    if not modules:
        raise ValueError("cannot place an empty pipeline")
    needed = sum(m.slots for m in modules)
    profile = fabric.profile
    for region in range(profile.regions):
        for start in range(profile.slots_per_region - needed + 1):
            if fabric.free_run_at(region, start) >= needed:
                entries = []
                cursor = start
                for m in modules:
                    entries.append(PlacementEntry(m, region, cursor, cursor + m.slots))
                    cursor += m.slots
                placement = Placement(tuple(entries))
                for i in range(start, start + needed):
                    fabric.occupied[region][i] = True
                fabric.placements[id(placement)] = placement
                return placement
    raise InsufficientSlots(needed, fabric.max_contiguous_free())


def release(fabric: FabricState, placement: Placement) -> None:
    """Free the slots; residency survives until the range is overwritten."""
    if id(placement) not in fabric.placements:
        raise NotAllocated()
    for e in placement.entries:
        for i in range(e.start, e.stop):
            fabric.occupied[e.region][i] = False
    del fabric.placements[id(placement)]


def reconfigure(
    fabric: FabricState, placement: Placement, request_time: float | None = None
) -> ReconfigReport:
    """Load every non-resident entry through the configuration port.

    `seconds` is pure transfer time (bytes / port rate); time spent queueing
    behind earlier loads is reported separately as `wait_seconds`. When
    `request_time` is None the request is issued once the port is free.
    """
    if id(placement) not in fabric.placements:
        raise NotAllocated()
    loaded_bytes = 0
    skipped = 0
    for e in placement.entries:
        key = (e.region, e.start, e.stop)
        if fabric.resident.get(key) == e.instance.identity():
            skipped += 1
            continue
        loaded_bytes += e.instance.bitstream_bytes
        _evict_overlaps(fabric, e)
        fabric.resident[key] = e.instance.identity()
    seconds = loaded_bytes / fabric.profile.icap_bytes_per_s
    if request_time is None:
        request_time = fabric.icap_busy_until
    wait = max(0.0, fabric.icap_busy_until - request_time)
    fabric.icap_busy_until = request_time + wait + seconds
    return ReconfigReport(seconds=seconds, bytes=loaded_bytes, wait_seconds=wait,
                          skipped_entries=skipped)


def _evict_overlaps(fabric: FabricState, entry: PlacementEntry):
    stale = [
        (region, start, stop)
        for (region, start, stop) in fabric.resident
        if region == entry.region and start < entry.stop and entry.start < stop
    ]
    for key in stale:
        del fabric.resident[key]
