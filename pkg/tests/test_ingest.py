import math
import os
import tempfile

import numpy as np
import pytest

from robustsp import (
    build_graph,
    interpolate_series,
    parse_observations,
    read_scenarios,
    to_travel_times,
    write_scenarios,
)
from robustsp.errors import DegenerateGeometry, EmptySeries, SchemaError, ZeroSpeed
from robustsp.ingest import (
    MPH_TO_MPS,
    OBSERVATION_HEADER,
    ObservationRecord,
    ScenarioMatrix,
    haversine_m,
    ingest_pipeline,
    segment_lengths,
)


def write_csv(path, rows):
    lines = [",".join(OBSERVATION_HEADER)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def parse_rows(rows):
    fd, name = tempfile.mkstemp(suffix=".csv")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(",".join(OBSERVATION_HEADER) + "\n")
            for row in rows:
                fh.write(",".join(str(v) for v in row) + "\n")
        return parse_observations(name)
    finally:
        os.unlink(name)


# two ~1 mile east-west segments sharing an endpoint, at the equator
SEG_A = ["a", 0, 30.0, 0.0, 0.0, 0.014457, 0.0]
SEG_B = ["b", 0, 30.0, 0.014457, 0.0, 0.028914, 0.0]


def test_parse_well_formed_rows(tmp_path):
    f = write_csv(tmp_path / "obs.csv", [SEG_A, SEG_B, ["a", 1, 28.5, *SEG_A[3:]]])
    records = parse_observations(f)
    assert len(records) == 3
    assert records[0].segment_id == "a"
    assert records[2].time_index == 1
    assert records[2].speed == 28.5


def test_parse_empty_speed_becomes_missing(tmp_path):
    f = write_csv(tmp_path / "obs.csv", [["a", 0, "", 0.0, 0.0, 0.01, 0.0]])
    records = parse_observations(f)
    assert records[0].speed is None


def test_parse_unparseable_or_nonpositive_speed_becomes_missing():
    rows = [["a", 0, "n/a", 0.0, 0.0, 0.01, 0.0],
            ["a", 1, -3.0, 0.0, 0.0, 0.01, 0.0],
            ["a", 2, 0.0, 0.0, 0.0, 0.01, 0.0]]
    records = parse_rows(rows)
    assert [rec.speed for rec in records] == [None, None, None]


def test_parse_bad_latitude_names_row(tmp_path):
    f = write_csv(tmp_path / "obs.csv", [SEG_A, ["b", 0, 25.0, 0.0, "north", 0.01, 0.0]])
    with pytest.raises(SchemaError, match="row 3.*start_lat"):
        parse_observations(f)


def test_parse_bad_header_rejected(tmp_path):
    f = tmp_path / "obs.csv"
    f.write_text("segment,speed\nx,1\n")
    with pytest.raises(SchemaError, match="header"):
        parse_observations(f)


def test_parse_bad_time_index(tmp_path):
    f = write_csv(tmp_path / "obs.csv", [["a", "noon", 25.0, 0.0, 0.0, 0.01, 0.0]])
    with pytest.raises(SchemaError, match="row 2.*time_index"):
        parse_observations(f)


def test_interpolate_midpoint():
    assert interpolate_series([2, None, 4], [0, 1, 2]) == [2.0, 3.0, 4.0]


def test_interpolate_boundary_copies_nearest():
    assert interpolate_series([None, 5, 7]) == [5.0, 5.0, 7.0]


def test_interpolate_single_observation_constant():
    assert interpolate_series([None, None, 6, None]) == [6.0, 6.0, 6.0, 6.0]


def test_interpolate_respects_time_spacing():
    # gap spans 3 time units: 2 -> 8 observed at t=0 and t=3
    assert interpolate_series([2, None, None, 8], [0, 1, 2, 3]) == [2.0, 4.0, 6.0, 8.0]


def test_interpolate_empty_series():
    with pytest.raises(EmptySeries):
        interpolate_series([None, None])


def test_interpolate_idempotent_on_complete_series():
    rng = np.random.default_rng(3)
    for _ in range(20):
        series = rng.uniform(1, 40, size=int(rng.integers(1, 12))).tolist()
        assert interpolate_series(series) == series


def test_build_graph_shared_endpoint_snaps():
    records = parse_rows([SEG_A, SEG_B])
    graph, arc_segments = build_graph(records, snap_tolerance=30.0)
    assert graph.node_count == 3
    assert graph.arc_count == 2
    assert arc_segments == ["a", "b"]
    assert graph.arcs[0][1] == graph.arcs[1][0]  # shared middle node


def test_build_graph_disjoint_segments_stay_apart():
    far = ["c", 0, 25.0, 1.0, 1.0, 1.014457, 1.0]
    records = parse_rows([SEG_A, far])
    graph, _ = build_graph(records, snap_tolerance=30.0)
    assert graph.node_count == 4
    assert graph.arc_count == 2


def test_build_graph_drops_never_observed_segments():
    silent = ["mute", 0, "", 0.5, 0.5, 0.514457, 0.5]
    records = parse_rows([SEG_A, silent])
    graph, arc_segments = build_graph(records, snap_tolerance=30.0)
    assert arc_segments == ["a"]
    assert graph.arc_count == 1


def test_build_graph_degenerate_segment_rejected():
    short = ["tiny", 0, 25.0, 0.0, 0.0, 0.00001, 0.0]  # ~1.1 m long
    records = parse_rows([short])
    with pytest.raises(DegenerateGeometry):
        build_graph(records, snap_tolerance=30.0)


def test_build_graph_node_count_nonincreasing_in_tolerance():
    # segments join well-separated sites (~3 km apart); endpoints are jittered
    # within ~90 m of their site, so growing the tolerance merges endpoint
    # clouds progressively but never collapses a segment
    rng = np.random.default_rng(9)
    sites = [(0.03 * i, 0.03 * j) for i in range(3) for j in range(3)]
    rows = []
    for k in range(24):
        a, b = rng.choice(len(sites), size=2, replace=False)
        jitter = rng.uniform(-0.0008, 0.0008, size=4)
        rows.append([f"s{k}", 0, 20.0,
                     sites[a][0] + jitter[0], sites[a][1] + jitter[1],
                     sites[b][0] + jitter[2], sites[b][1] + jitter[3]])
    records = parse_rows(rows)
    counts = []
    for tol in (0.0, 10.0, 50.0, 150.0, 400.0):
        graph, _ = build_graph(records, snap_tolerance=tol)
        counts.append(graph.node_count)
    assert counts == sorted(counts, reverse=True)
    assert counts[-1] <= 9  # every endpoint cloud fully merged at 400 m
    assert counts[0] == 48  # all endpoints distinct at zero tolerance


def test_travel_time_one_mile_at_30mph_is_120s():
    records = parse_rows([SEG_A])
    matrix = to_travel_times(records, ["a"], {"a": 1609.344})
    assert matrix.values[0, 0] == pytest.approx(120.0, abs=1e-9)


def test_doubling_speed_halves_time():
    records = parse_rows([["a", 0, 60.0, *SEG_A[3:]]])
    matrix = to_travel_times(records, ["a"], {"a": 1609.344})
    assert matrix.values[0, 0] == pytest.approx(60.0, abs=1e-9)


def test_haversine_against_independent_arc_length():
    # 0.01 degree of longitude at the equator: great-circle arc R * dlambda
    expected = 6378137.0 * math.radians(0.01)
    assert expected == pytest.approx(1113.19, abs=0.01)
    assert haversine_m(0.0, 0.0, 0.01, 0.0) == pytest.approx(expected, rel=1e-12)
    # travel time over it at 25 mph
    assert expected / (25.0 * MPH_TO_MPS) == pytest.approx(99.61, abs=0.01)


def test_segment_lengths_use_haversine():
    records = parse_rows([SEG_A])
    lengths = segment_lengths(records)
    assert lengths["a"] == pytest.approx(haversine_m(0.0, 0.0, 0.014457, 0.0))


def test_nonpositive_length_rejected():
    records = parse_rows([SEG_A])
    with pytest.raises(DegenerateGeometry):
        to_travel_times(records, ["a"], {"a": 0.0})


def test_zero_speed_guard_on_invalid_upstream_records():
    # the parser never emits nonpositive speeds; the converter still refuses them
    bad = [ObservationRecord("a", 0, -5.0, 0.0, 0.0, 0.014457, 0.0)]
    with pytest.raises(ZeroSpeed):
        to_travel_times(bad, ["a"], {"a": 1609.344})


def test_duplicate_observations_averaged():
    records = parse_rows([SEG_A, ["a", 0, 20.0, *SEG_A[3:]]])
    matrix = to_travel_times(records, ["a"], {"a": 1609.344})
    # speeds 30 and 20 at the same epoch average to 25
    assert matrix.values[0, 0] == pytest.approx(1609.344 / (25.0 * MPH_TO_MPS))


def test_pipeline_matrix_complete_and_positive(tmp_path):
    rows = [SEG_A, SEG_B,
            ["a", 1, "", *SEG_A[3:]],      # gap to interpolate
            ["b", 1, 26.0, *SEG_B[3:]],
            ["a", 2, 24.0, *SEG_A[3:]],
            ["b", 2, "", *SEG_B[3:]]]
    f = write_csv(tmp_path / "obs.csv", rows)
    graph, matrix, arc_segments = ingest_pipeline(f, snap_tolerance=30.0)
    assert matrix.scenario_count == 3
    assert matrix.arc_count == graph.arc_count == 2
    assert np.isfinite(matrix.values).all()
    assert (matrix.values > 0).all()
    assert matrix.scenario_labels == [0, 1, 2]


def test_scenario_csv_round_trip_exact(tmp_path):
    values = np.array([[14.336393620580581, 99.60636], [75.174656063538021, 120.0]])
    matrix = ScenarioMatrix(values, [0, 1])
    out = tmp_path / "scen.csv"
    write_scenarios(matrix, out)
    header = out.read_text().splitlines()[0]
    assert header == "arc_id,scenario_0,scenario_1"
    loaded = read_scenarios(out)
    assert np.array_equal(loaded.values, values)
