"""Spatial region memory: cubic cells, visit statistics, labels, dead zones.

Cells are keyed by floor(position / h) with h = max(0.12 * scene_scale, 0.9).
Dead is absorbing; labeling runs through `relabel` only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNKNOWN = "unknown"
PROMISING = "promising"
DEAD = "dead"


@dataclass(frozen=True)
class RegionThresholds:
    """Artifact-defined triggers; tuned so a 6x4 run can kill a region by round 3."""
    poor_score: float = 0.40
    promising_score: float = 0.68
    promising_semantic: float = 0.70
    improvement_delta: float = 0.02
    dead_poor_hits: int = 2
    dead_best_guard: float = 0.45
    dead_stagnation_hits: int = 3


def cell_size(scene_scale: float) -> float:
    if scene_scale <= 0:
        raise ValueError(f"scene_scale must be positive, got {scene_scale}")
    return max(0.12 * scene_scale, 0.9)


def region_key(position, h: float) -> tuple:
    p = np.asarray(position, dtype=float)
    return (int(math.floor(p[0] / h)), int(math.floor(p[1] / h)), int(math.floor(p[2] / h)))


@dataclass
class RegionRecord:
    visits: int = 0
    best_score: float = 0.0
    best_semantic: float = 0.0
    poor_hits: int = 0
    promising_hits: int = 0
    improvement_hits: int = 0
    stagnation_hits: int = 0
    label: str = UNKNOWN

    def to_dict(self) -> dict:
        return {
            "visits": self.visits,
            "best_score": self.best_score,
            "best_semantic": self.best_semantic,
            "poor_hits": self.poor_hits,
            "promising_hits": self.promising_hits,
            "improvement_hits": self.improvement_hits,
            "stagnation_hits": self.stagnation_hits,
            "label": self.label,
        }


@dataclass(frozen=True)
class ForbiddenZone:
    center: tuple
    half_extent: tuple
    origin: str  # reflector_dead | reviewer

    def __post_init__(self):
        if any(h <= 0 for h in self.half_extent):
            raise ValueError("forbidden zone half_extent must be positive")

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        c = np.asarray(self.center, dtype=float)
        h = np.asarray(self.half_extent, dtype=float)
        return bool(np.all(np.abs(p - c) <= h))

    def to_dict(self) -> dict:
        return {"center": [float(v) for v in self.center],
                "half_extent": [float(v) for v in self.half_extent],
                "origin": self.origin}


def relabel(record: RegionRecord, thresholds: RegionThresholds = RegionThresholds()) -> str:
    """Dead is absorbing; promising records any triggered promising condition."""
    if record.label == DEAD:
        return DEAD
    if (record.poor_hits >= thresholds.dead_poor_hits
            and record.best_score < thresholds.dead_best_guard):
        return DEAD
    if record.stagnation_hits >= thresholds.dead_stagnation_hits and record.improvement_hits == 0:
        return DEAD
    if record.promising_hits > 0:
        return PROMISING
    return UNKNOWN


class RegionMemory:
    """Single-writer memory; mutate only at round boundaries."""

    def __init__(self, h: float, thresholds: RegionThresholds = RegionThresholds()):
        if h <= 0:
            raise ValueError("cell size must be positive")
        self.h = float(h)
        self.thresholds = thresholds
        self.cells: dict = {}

    def key_for(self, position) -> tuple:
        return region_key(position, self.h)

    def record(self, key) -> RegionRecord:
        return self.cells.get(tuple(key), RegionRecord())

    def label(self, key) -> str:
        return self.record(key).label

    def visits(self, key) -> int:
        return self.record(key).visits

    def record_candidate(self, position, internal_score: float, semantic: float,
                         round_delta: float, hard_failed: bool) -> RegionRecord:
        if not (0.0 <= internal_score <= 1.0 and 0.0 <= semantic <= 1.0):
            raise ValueError("internal_score and semantic must lie in [0, 1]")
        key = self.key_for(position)
        rec = self.cells.setdefault(key, RegionRecord())
        th = self.thresholds
        rec.visits += 1
        rec.best_score = max(rec.best_score, internal_score)
        rec.best_semantic = max(rec.best_semantic, semantic)
        if internal_score < th.poor_score or hard_failed:
            rec.poor_hits += 1
        promising_now = (internal_score >= th.promising_score
                         or semantic >= th.promising_semantic)
        if promising_now:
            rec.promising_hits += 1
        if round_delta > th.improvement_delta:
            rec.improvement_hits += 1
        if abs(round_delta) <= th.improvement_delta and not promising_now:
            rec.stagnation_hits += 1
        rec.label = relabel(rec, th)
        return rec

    def dead_keys(self) -> list:
        return sorted(k for k, r in self.cells.items() if r.label == DEAD)

    def promising_keys(self) -> list:
        return sorted(k for k, r in self.cells.items() if r.label == PROMISING)

    def cell_center(self, key) -> np.ndarray:
        return (np.asarray(key, dtype=float) + 0.5) * self.h

    def forbidden_zones(self, reviewer_zones=()) -> list:
        """Dead-cell zones plus reviewer zones, deduplicated at >= 90% overlap."""
        zones = []
        half = (self.h / 2.0,) * 3
        for key in self.dead_keys():
            zones.append(ForbiddenZone(center=tuple(float(v) for v in self.cell_center(key)),
                                       half_extent=half, origin="reflector_dead"))
        for zone in reviewer_zones:
            if not any(_overlap_fraction(zone, kept) >= 0.9 for kept in zones):
                zones.append(zone)
        return zones

    def snapshot(self) -> dict:
        return {",".join(str(i) for i in key): rec.to_dict()
                for key, rec in sorted(self.cells.items())}


class NullRegionMemory(RegionMemory):
    """Ablation stand-in: every cell stays unknown with zero statistics."""

    def record_candidate(self, position, internal_score, semantic, round_delta, hard_failed):
        if not (0.0 <= internal_score <= 1.0 and 0.0 <= semantic <= 1.0):
            raise ValueError("internal_score and semantic must lie in [0, 1]")
        return RegionRecord()

    def forbidden_zones(self, reviewer_zones=()):
        return list(reviewer_zones)


def _overlap_fraction(zone: ForbiddenZone, other: ForbiddenZone) -> float:
    """Overlap volume of `zone` with `other`, as a fraction of zone's volume."""
    c1, h1 = np.asarray(zone.center), np.asarray(zone.half_extent)
    c2, h2 = np.asarray(other.center), np.asarray(other.half_extent)
    lo = np.maximum(c1 - h1, c2 - h2)
    hi = np.minimum(c1 + h1, c2 + h2)
    inter = np.prod(np.maximum(hi - lo, 0.0))
    vol = np.prod(2.0 * h1)
    return float(inter / vol) if vol > 0 else 0.0


def search_diagnostics(round_keys: list) -> tuple:
    """(coverage, collapse, revisit) over per-round candidate region keys.

    coverage = distinct keys / total candidates, revisit = 1 - coverage,
    collapse = fraction of rounds whose candidates all share one key.
    Definitions are artifact-defined.
    """
    rounds = [list(r) for r in round_keys if len(list(r)) > 0]
    all_keys = [k for r in rounds for k in r]
    if not all_keys:
        raise ValueError("search_diagnostics needs at least one candidate key")
    coverage = len(set(all_keys)) / len(all_keys)
    collapsed = sum(1 for r in rounds if len(set(r)) == 1)
    collapse = collapsed / len(rounds)
    return coverage, collapse, 1.0 - coverage
