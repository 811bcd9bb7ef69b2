"""Turn raw per-segment traffic-speed observations into a graph and scenarios.

Pipeline: parse the observation CSV, drop segments that were never observed,
snap segment endpoints into shared nodes, fill per-segment speed gaps by
linear interpolation over time, and convert speeds to per-arc travel times,
one scenario row per observation epoch.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path as FilePath

import numpy as np

from .errors import DegenerateGeometry, EmptySeries, SchemaError, ZeroSpeed
from .graph import Graph

__all__ = [
    "ObservationRecord", "ScenarioMatrix", "parse_observations",
    "interpolate_series", "build_graph", "to_travel_times", "haversine_m",
    "segment_lengths", "ingest_pipeline", "write_scenarios", "read_scenarios",
    "OBSERVATION_HEADER", "MPH_TO_MPS", "EARTH_RADIUS_M",
]

OBSERVATION_HEADER = ["segment_id", "time_index", "speed_mph",
                      "start_lon", "start_lat", "end_lon", "end_lat"]
MPH_TO_MPS = 0.44704
EARTH_RADIUS_M = 6378137.0  # equatorial radius; matches published segment lengths


@dataclass(frozen=True)
class ObservationRecord:
    segment_id: str
    time_index: int
    speed: float | None  # miles/hour, None when missing
    start_lon: float
    start_lat: float
    end_lon: float
    end_lat: float


@dataclass
class ScenarioMatrix:
    """N scenarios by n arcs of travel times in seconds, no missing entries."""

    values: np.ndarray
    scenario_labels: list[int]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D (scenarios x arcs)")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("scenario entries must be finite and nonnegative")
        if len(self.scenario_labels) != self.values.shape[0]:
            raise ValueError("one label per scenario row required")

    @property
    def scenario_count(self) -> int:
        return self.values.shape[0]

    @property
    def arc_count(self) -> int:
        return self.values.shape[1]


def _parse_float(text: str, column: str, row: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(f"row {row}: column {column!r} is not numeric: {text!r}") from None
    if not math.isfinite(value):
        raise SchemaError(f"row {row}: column {column!r} is not finite: {text!r}")
    return value


def parse_observations(path: str | FilePath) -> list[ObservationRecord]:
    """Read the observation CSV; unparseable or non-positive speeds become missing."""
    records: list[ObservationRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file: missing header row") from None
        if [h.strip() for h in header] != OBSERVATION_HEADER:
            raise SchemaError(
                f"unexpected header {header!r}; expected {','.join(OBSERVATION_HEADER)}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(OBSERVATION_HEADER):
                raise SchemaError(f"row {row_no}: expected {len(OBSERVATION_HEADER)} fields, "
                                  f"got {len(row)}")
            seg = row[0].strip()
            if not seg:
                raise SchemaError(f"row {row_no}: empty segment_id")
            try:
                t = int(row[1])
            except ValueError:
                raise SchemaError(f"row {row_no}: column 'time_index' is not an integer: "
                                  f"{row[1]!r}") from None
            speed_text = row[2].strip()
            speed: float | None
            if not speed_text:
                speed = None
            else:
                try:
                    speed = float(speed_text)
                except ValueError:
                    speed = None
                else:
                    if not math.isfinite(speed) or speed <= 0:
                        speed = None
            coords = [_parse_float(row[i], OBSERVATION_HEADER[i], row_no) for i in range(3, 7)]
            records.append(ObservationRecord(seg, t, speed, *coords))
    return records


def interpolate_series(values, times=None) -> list[float]:
    """Fill gaps (None/NaN) linearly over time; boundary gaps copy the nearest value."""
    raw = [None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)
           for v in values]
    if times is None:
        times = list(range(len(raw)))
    times = [float(t) for t in times]
    if len(times) != len(raw):
        raise ValueError("values and times must have equal length")
    obs_t = [t for t, v in zip(times, raw) if v is not None]
    obs_v = [v for v in raw if v is not None]
    if not obs_v:
        raise EmptySeries("series has no observed value")
    return [float(x) for x in np.interp(times, obs_t, obs_v)]


def haversine_m(lon1: float, lat1: float, lon2: float, lat2: float) -> float:
    """Great-circle distance in meters."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def _snap_points(points: list[tuple[float, float]], tolerance_m: float) -> list[int]:
    """Single-linkage clustering: points within tolerance share a node.

    Union-find over grid-bucketed neighbor pairs; growing the tolerance can
    only merge clusters, so the node count is non-increasing in it. Cluster
    ids are numbered by first appearance, independent of merge order.
    """
    cell = max(tolerance_m / 50000.0, 1e-9)  # degrees; a tolerance ball fits in one cell
    parent = list(range(len(points)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    grid: dict[tuple[int, int], list[int]] = {}
    for idx, (lon, lat) in enumerate(points):
        kx, ky = int(math.floor(lon / cell)), int(math.floor(lat / cell))
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for other in grid.get((kx + dx, ky + dy), ()):
                    olon, olat = points[other]
                    if haversine_m(lon, lat, olon, olat) <= tolerance_m:
                        ri, ro = find(idx), find(other)
                        if ri != ro:
                            parent[max(ri, ro)] = min(ri, ro)
        grid.setdefault((kx, ky), []).append(idx)

    labels: dict[int, int] = {}
    out = []
    for idx in range(len(points)):
        root = find(idx)
        if root not in labels:
            labels[root] = len(labels)
        out.append(labels[root])
    return out


def _segments_in_order(records: list[ObservationRecord]):
    """Segment ids in first-appearance order with their geometry and records."""
    order: list[str] = []
    geometry: dict[str, tuple[float, float, float, float]] = {}
    observed: dict[str, bool] = {}
    by_segment: dict[str, list[ObservationRecord]] = {}
    for rec in records:
        if rec.segment_id not in geometry:
            order.append(rec.segment_id)
            geometry[rec.segment_id] = (rec.start_lon, rec.start_lat, rec.end_lon, rec.end_lat)
            observed[rec.segment_id] = False
            by_segment[rec.segment_id] = []
        by_segment[rec.segment_id].append(rec)
        if rec.speed is not None:
            observed[rec.segment_id] = True
    return order, geometry, observed, by_segment


def build_graph(records: list[ObservationRecord],
                snap_tolerance: float = 30.0) -> tuple[Graph, list[str]]:
    """Snap segment endpoints into nodes; one arc per segment with any data.

    Returns the graph and the arc-to-segment-id mapping. Segments whose speed
    was never observed are dropped; a segment whose endpoints collapse to one
    node raises DegenerateGeometry.
    """
    if not records:
        raise ValueError("no records")
    if snap_tolerance < 0:
        raise ValueError("snap_tolerance must be nonnegative")
    order, geometry, observed, _ = _segments_in_order(records)
    retained = [seg for seg in order if observed[seg]]
    points: list[tuple[float, float]] = []
    for seg in retained:
        s_lon, s_lat, e_lon, e_lat = geometry[seg]
        points.append((s_lon, s_lat))
        points.append((e_lon, e_lat))
    labels = _snap_points(points, snap_tolerance)
    centers: list[tuple[float, float]] = [None] * (max(labels) + 1 if labels else 0)
    for idx, label in enumerate(labels):
        if centers[label] is None:
            centers[label] = points[idx]
    arcs: list[tuple[int, int]] = []
    arc_segments: list[str] = []
    for pos, seg in enumerate(retained):
        tail, head = labels[2 * pos], labels[2 * pos + 1]
        if tail == head:
            raise DegenerateGeometry(
                f"segment {seg!r} endpoints coincide after snapping at "
                f"{snap_tolerance} m")
        arcs.append((tail, head))
        arc_segments.append(seg)
    graph = Graph(len(centers), arcs, node_coords=centers)
    return graph, arc_segments


def segment_lengths(records: list[ObservationRecord]) -> dict[str, float]:
    """Haversine length in meters of each segment's endpoint pair."""
    _, geometry, _, _ = _segments_in_order(records)
    return {seg: haversine_m(g[0], g[1], g[2], g[3]) for seg, g in geometry.items()}


def to_travel_times(records: list[ObservationRecord], arc_segments: list[str],
                    lengths: dict[str, float]) -> ScenarioMatrix:
    """Per-arc travel times in seconds, one scenario per observation epoch.

    Each arc's speed series is completed by interpolation over the global
    epoch list before conversion; duplicate (segment, epoch) observations are
    averaged.
    """
    epochs = sorted({rec.time_index for rec in records})
    if not epochs:
        raise ValueError("no records")
    epoch_pos = {t: i for i, t in enumerate(epochs)}
    _, _, _, by_segment = _segments_in_order(records)

    columns = []
    for seg in arc_segments:
        length = lengths[seg]
        if not length > 0:
            raise DegenerateGeometry(f"segment {seg!r} has nonpositive length {length}")
        sums = np.zeros(len(epochs))
        counts = np.zeros(len(epochs))
        for rec in by_segment[seg]:
            if rec.speed is not None:
                sums[epoch_pos[rec.time_index]] += rec.speed
                counts[epoch_pos[rec.time_index]] += 1
        with np.errstate(invalid="ignore"):
            series = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        speeds = interpolate_series(series, epochs)
        if min(speeds) <= 0:
            raise ZeroSpeed(f"segment {seg!r} has nonpositive interpolated speed")
        columns.append([length / (v * MPH_TO_MPS) for v in speeds])
    values = np.array(columns).T if columns else np.zeros((len(epochs), 0))
    return ScenarioMatrix(values, epochs)


def ingest_pipeline(path: str | FilePath,
                    snap_tolerance: float = 30.0) -> tuple[Graph, ScenarioMatrix, list[str]]:
    """parse -> build_graph -> to_travel_times for one observation file."""
    records = parse_observations(path)
    graph, arc_segments = build_graph(records, snap_tolerance)
    matrix = to_travel_times(records, arc_segments, segment_lengths(records))
    return graph, matrix, arc_segments


def write_scenarios(matrix: ScenarioMatrix, path: str | FilePath) -> None:
    """Arc-per-row CSV: arc_id, then one column per scenario (seconds)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arc_id"] + [f"scenario_{i}" for i in range(matrix.scenario_count)])
        for j in range(matrix.arc_count):
            # repr round-trips doubles exactly and carries >= 6 significant digits
            writer.writerow([j] + [repr(float(v)) for v in matrix.values[:, j]])


def read_scenarios(path: str | FilePath) -> ScenarioMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:1] != ["arc_id"]:
            raise SchemaError("scenario CSV must start with an 'arc_id' header column")
        n_scen = len(header) - 1
        rows = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_scen + 1:
                raise SchemaError(f"row {row_no}: expected {n_scen + 1} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise SchemaError(f"row {row_no}: non-numeric travel time") from None
    values = np.array(rows).T if rows else np.zeros((n_scen, 0))
    return ScenarioMatrix(values, list(range(n_scen)))
