"""Averaged single-loop vessel circuit.

The loop starts just downstream of a lung capillary and runs through seven
parts: small veins of increasing diameter, the large vessels and heart, small
arteries of decreasing diameter, one body capillary, small veins, large
vessels and heart again, and small arteries back to the lung.

Small-vessel geometry comes from a branching table (one row per branch order
for an arterial and a venous tree). Each segment gets a mean speed from flow
conservation and, through the diameter-dependent hematocrit, separate plasma
and red-cell speeds. Robots are carried along with the cells.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from bisect import bisect_right
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .params import PhysiologyParams

KINDS = ("small_vein", "large_mixed", "small_artery", "capillary")
REGIONS = ("arterial", "capillary", "venous")
DATASET_ENV = "HEMOSWARM_DATASET"
DEFAULT_DATASET = "branching_v1.csv"

# large vessels are lumped; their geometry is nominal and only the transit time matters
LARGE_VESSEL_DIAMETER = 20e-3
CAPILLARY_DIAMETER = 8e-6
CAPILLARY_LENGTH = 1e-3
CAPILLARY_TRANSIT_TIME = 1.0
VEIN_TO_ARTERY_TIME = 1.5


def hematocrit_in_vessel(d_um: float, h_full: float) -> float:
    """Tube hematocrit in a vessel of diameter ``d_um`` microns."""
    if not d_um > 0:
        raise ValueError("vessel diameter must be positive")
    if not 0 < h_full < 1:
        raise ValueError("overall hematocrit must lie in (0, 1)")
    ratio = h_full + (1 - h_full) * (1 + 1.7 * math.exp(-0.35 * d_um) - 0.6 * math.exp(-0.01 * d_um))
    return h_full * ratio


def cell_plasma_speed_ratio(h: float, h_full: float) -> float:
    if not 0 < h_full < 1:
        raise ValueError("overall hematocrit must lie in (0, 1)")
    if not 0 < h <= h_full:
        raise ValueError("tube hematocrit must lie in (0, overall hematocrit]")
    return ((1 - h) / h) / ((1 - h_full) / h_full)


def split_speeds(v_avg: float, h: float, h_full: float) -> tuple[float, float]:
    """Plasma and cell speeds whose volume-weighted mean is ``v_avg``."""
    ratio = cell_plasma_speed_ratio(h, h_full)
    v_plasma = v_avg / ((1 - h) + h * ratio)
    return v_plasma, ratio * v_plasma


def mean_speed(diameter: float, parallel_count: float, phys: PhysiologyParams) -> float:
    if not parallel_count > 0:
        raise ValueError("parallel_count must be positive")
    if not diameter > 0:
        raise ValueError("diameter must be positive")
    flow = phys.blood_volume / phys.circulation_time
    return flow / (parallel_count * math.pi / 4 * diameter**2)


@dataclass(frozen=True)
class VesselSegment:
    kind: str
    region: str
    diameter: float
    length: float
    parallel_count: float
    transit_time: float
    hematocrit: float
    v_avg: float
    v_plasma: float
    v_cell: float
    tissue: bool = False

    @property
    def residence_time(self) -> float:
        """Time a red cell (and so a robot) spends in the segment."""
        return self.length / self.v_cell

    @property
    def speed_ratio(self) -> float:
        return self.v_cell / self.v_plasma

    @property
    def area(self) -> float:
        return math.pi / 4 * self.diameter**2


def segment_speeds(seg: VesselSegment, phys: PhysiologyParams) -> tuple[float, float, float]:
    """(v_avg, v_plasma, v_cell) from the segment's geometry and hematocrit."""
    v_avg = mean_speed(seg.diameter, seg.parallel_count, phys)
    v_plasma, v_cell = split_speeds(v_avg, seg.hematocrit, phys.overall_hematocrit)
    return v_avg, v_plasma, v_cell


def make_segment(
    kind: str,
    region: str,
    diameter: float,
    parallel_count: float,
    length: float,
    phys: PhysiologyParams,
    hematocrit: float | None = None,
    tissue: bool = False,
) -> VesselSegment:
    if kind not in KINDS:
        raise ValueError(f"unknown vessel kind {kind!r}")
    if region not in REGIONS:
        raise ValueError(f"unknown region {region!r}")
    h_full = phys.overall_hematocrit
    if hematocrit is None:
        hematocrit = h_full if kind == "large_mixed" else hematocrit_in_vessel(diameter * 1e6, h_full)
    v_avg = mean_speed(diameter, parallel_count, phys)
    v_plasma, v_cell = split_speeds(v_avg, hematocrit, h_full)
    return VesselSegment(kind, region, diameter, length, parallel_count, length / v_avg,
                         hematocrit, v_avg, v_plasma, v_cell, tissue)


# --------------------------------------------------------------------------
# branching dataset


@dataclass(frozen=True)
class BranchOrder:
    order: int
    diameter: float
    length: float
    count: float


@dataclass(frozen=True)
class BranchingDataset:
    arterial: tuple[BranchOrder, ...]
    venous: tuple[BranchOrder, ...]
    version: str
    sha256: str | None = None

    @classmethod
    def empty(cls) -> "BranchingDataset":
        return cls((), (), "empty")


def parse_dataset(text: str, version: str) -> BranchingDataset:
    reader = csv.DictReader(text.splitlines())
    expected = ["tree", "order", "diameter_m", "length_m", "count"]
    if reader.fieldnames != expected:
        raise ValueError(f"dataset header must be {','.join(expected)}")
    trees: dict[str, list[BranchOrder]] = {"arterial": [], "venous": []}
    for lineno, row in enumerate(reader, start=2):
        tree = row["tree"]
        if tree not in trees:
            raise ValueError(f"line {lineno}: unknown tree {tree!r}")
        b = BranchOrder(int(row["order"]), float(row["diameter_m"]), float(row["length_m"]), float(row["count"]))
        if not (b.diameter > 0 and b.length > 0 and b.count > 0):
            raise ValueError(f"line {lineno}: diameter, length and count must be positive")
        trees[tree].append(b)
    digest = hashlib.sha256(text.encode()).hexdigest()
    return BranchingDataset(
        tuple(sorted(trees["arterial"], key=lambda b: b.order)),
        tuple(sorted(trees["venous"], key=lambda b: b.order)),
        version,
        digest,
    )


def load_dataset(path: str | Path | None = None) -> BranchingDataset:
    """Load a branching table; defaults to $HEMOSWARM_DATASET or the bundled file."""
    if path is None:
        path = os.environ.get(DATASET_ENV) or None
    if path is None:
        text = resources.files("hemoswarm").joinpath("data").joinpath(DEFAULT_DATASET).read_text()
        return parse_dataset(text, Path(DEFAULT_DATASET).stem)
    path = Path(path)
    return parse_dataset(path.read_text(), path.stem)


# --------------------------------------------------------------------------
# circuit


@dataclass(frozen=True)
class VesselCircuit:
    segments: tuple[VesselSegment, ...]
    total_time: float
    dataset_version: str = "unknown"

    @property
    def loop_duration(self) -> float:
        """Time for a robot, moving with the cells, to complete the loop."""
        return sum(s.residence_time for s in self.segments)

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.segments)

    @property
    def capillary_index(self) -> int:
        return next(i for i, s in enumerate(self.segments) if s.tissue)

    def boundaries(self) -> tuple[np.ndarray, np.ndarray]:
        """Cumulative robot time and position at each segment start, plus the end."""
        t = np.concatenate([[0.0], np.cumsum([s.residence_time for s in self.segments])])
        x = np.concatenate([[0.0], np.cumsum([s.length for s in self.segments])])
        return t, x


def _tree_segments(orders, kind, region, ascending, phys):
    seq = orders if ascending else tuple(reversed(orders))
    return [make_segment(kind, region, b.diameter, b.count, b.length, phys) for b in seq]


def _large_segment(region: str, duration: float, phys: PhysiologyParams) -> VesselSegment:
    v = mean_speed(LARGE_VESSEL_DIAMETER, 1.0, phys)
    return make_segment("large_mixed", region, LARGE_VESSEL_DIAMETER, 1.0, v * duration, phys)


def build_circuit(
    dataset: BranchingDataset,
    phys: PhysiologyParams,
    capillary_transit_time: float = CAPILLARY_TRANSIT_TIME,
    capillary_length: float = CAPILLARY_LENGTH,
    capillary_diameter: float = CAPILLARY_DIAMETER,
) -> VesselCircuit:
    if not capillary_transit_time > 0 or not capillary_length > 0:
        raise ValueError("capillary transit time and length must be positive")
    # small veins away from each capillary, small arteries towards it
    up_lung = _tree_segments(dataset.venous, "small_vein", "arterial", True, phys)
    down_body = _tree_segments(dataset.arterial, "small_artery", "arterial", False, phys)
    up_body = _tree_segments(dataset.venous, "small_vein", "venous", True, phys)
    down_lung = _tree_segments(dataset.arterial, "small_artery", "venous", False, phys)

    v_cap = capillary_length / capillary_transit_time
    cap_count = phys.blood_volume / phys.circulation_time / (math.pi / 4 * capillary_diameter**2 * v_cap)
    capillary = make_segment("capillary", "capillary", capillary_diameter, cap_count, capillary_length, phys, tissue=True)

    small = up_lung + down_body + up_body + down_lung
    residual = phys.circulation_time - sum(s.transit_time for s in small) - capillary.transit_time
    if residual <= 0:
        raise ValueError(
            f"small vessels and capillary take {phys.circulation_time - residual:.3g} s, "
            f"more than the {phys.circulation_time:.3g} s circulation"
        )
    to_body = _large_segment("arterial", residual / (1 + VEIN_TO_ARTERY_TIME), phys)
    from_body = _large_segment("venous", residual * VEIN_TO_ARTERY_TIME / (1 + VEIN_TO_ARTERY_TIME), phys)

    segments = tuple(up_lung + [to_body] + down_body + [capillary] + up_body + [from_body] + down_lung)
    total = sum(s.transit_time for s in segments)
    return VesselCircuit(segments, total, dataset.version)


def position_of_time(circuit: VesselCircuit, t: float) -> tuple[int, float, float]:
    """(segment index, offset into segment in m, loop position in m) at robot time t."""
    t_b, x_b = circuit.boundaries()
    end = t_b[-1]
    if t < 0 or t > end * (1 + 1e-12):
        raise ValueError(f"t = {t} outside [0, {end}]")
    t = min(t, end)
    i = min(bisect_right(t_b, t) - 1, len(circuit.segments) - 1)
    offset = (t - t_b[i]) * circuit.segments[i].v_cell
    offset = min(offset, circuit.segments[i].length)
    return i, offset, x_b[i] + offset
