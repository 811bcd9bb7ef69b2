"""Synthetic observation files in the city traffic-feed schema.

Generates a jittered street grid with arterial and local roads, 15-minute
speed readings over a day with morning and evening congestion waves, a shared
day-level factor (so arc travel times are correlated across the network),
idiosyncratic noise, and realistic gaps: randomly missing readings, a few
sparsely observed segments, and one segment with no data at all.

Used to produce the bundled sample under data/; regenerate with
``python -m robustsp.datasets --out data/sample_observations.csv``.
"""

from __future__ import annotations

import argparse
import csv
import math

import numpy as np

__all__ = ["generate_observation_rows", "write_observation_csv"]

BASE_LON = -87.68
BASE_LAT = 41.84
CELL_LON = 0.0042  # ~350 m east-west at Chicago's latitude
CELL_LAT = 0.0031  # ~345 m north-south


def generate_observation_rows(seed: int = 20170327, grid_w: int = 10, grid_h: int = 10,
                              epochs: int = 96, drop_edge_fraction: float = 0.07,
                              missing_fraction: float = 0.07) -> list[list[str]]:
    """Rows (without header) for the observation CSV schema."""
    rng = np.random.default_rng(seed)

    jitter_lon = rng.uniform(-0.12, 0.12, size=(grid_w, grid_h)) * CELL_LON
    jitter_lat = rng.uniform(-0.12, 0.12, size=(grid_w, grid_h)) * CELL_LAT
    node_lon = {(i, j): BASE_LON + i * CELL_LON + jitter_lon[i, j]
                for i in range(grid_w) for j in range(grid_h)}
    node_lat = {(i, j): BASE_LAT + j * CELL_LAT + jitter_lat[i, j]
                for i in range(grid_w) for j in range(grid_h)}

    edges: list[tuple[tuple[int, int], tuple[int, int], bool]] = []
    for i in range(grid_w):
        for j in range(grid_h):
            arterial_row = j % 3 == 0
            arterial_col = i % 3 == 0
            if i + 1 < grid_w:
                edges.append(((i, j), (i + 1, j), arterial_row))
            if j + 1 < grid_h:
                edges.append(((i, j), (i, j + 1), arterial_col))
    keep = rng.random(len(edges)) >= drop_edge_fraction
    edges = [e for e, k in zip(edges, keep) if k]

    # congestion waves: 15-minute epochs starting at midnight
    t = np.arange(epochs)
    morning = np.exp(-((t - 0.33 * epochs) / (0.08 * epochs)) ** 2)
    evening = np.exp(-((t - 0.72 * epochs) / (0.10 * epochs)) ** 2)
    day_factor = 1.0 - 0.38 * morning - 0.33 * evening
    shared_noise = rng.normal(0.0, 0.02, size=epochs)

    rows: list[list[str]] = []
    seg_no = 0
    segment_slots: list[tuple[str, tuple[int, int], tuple[int, int], bool]] = []
    for a, b, arterial in edges:
        for tail, head in ((a, b), (b, a)):
            seg_no += 1
            segment_slots.append((f"seg-{seg_no:04d}", tail, head, arterial))

    sparse_segments = set(rng.choice(len(segment_slots), size=2, replace=False).tolist())
    dead_segment = int(rng.integers(len(segment_slots)))
    while dead_segment in sparse_segments:
        dead_segment = int(rng.integers(len(segment_slots)))

    for idx, (seg_id, tail, head, arterial) in enumerate(segment_slots):
        free_flow = rng.uniform(33.0, 43.0) if arterial else rng.uniform(21.0, 30.0)
        sensitivity = rng.uniform(0.8, 1.4) if arterial else rng.uniform(0.5, 1.1)
        idio = rng.normal(0.0, 0.03, size=len(t))
        factor = 1.0 - sensitivity * (1.0 - day_factor) + shared_noise + idio
        speeds = np.maximum(free_flow * np.maximum(factor, 0.22), 3.0)

        jlon = rng.uniform(-4e-5, 4e-5, size=4)
        jlat = rng.uniform(-4e-5, 4e-5, size=4)
        s_lon = node_lon[tail] + jlon[0]
        s_lat = node_lat[tail] + jlat[1]
        e_lon = node_lon[head] + jlon[2]
        e_lat = node_lat[head] + jlat[3]
        coords = [f"{s_lon:.6f}", f"{s_lat:.6f}", f"{e_lon:.6f}", f"{e_lat:.6f}"]

        missing = rng.random(len(t)) < missing_fraction
        if idx == dead_segment:
            for epoch in range(0, len(t), 10):
                rows.append([seg_id, str(epoch), ""] + coords)
            continue
        observed_epochs = range(len(t))
        if idx in sparse_segments:
            observed_epochs = sorted(
                rng.choice(len(t), size=3, replace=False).tolist())
        for epoch in observed_epochs:
            if idx not in sparse_segments and missing[epoch]:
                continue
            rows.append([seg_id, str(epoch), f"{speeds[epoch]:.1f}"] + coords)
    return rows


def write_observation_csv(path: str, rows: list[list[str]]) -> None:
    from .ingest import OBSERVATION_HEADER

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(OBSERVATION_HEADER)
        writer.writerows(rows)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=20170327)
    parser.add_argument("--grid-w", type=int, default=10)
    parser.add_argument("--grid-h", type=int, default=10)
    parser.add_argument("--epochs", type=int, default=96)
    args = parser.parse_args(argv)
    rows = generate_observation_rows(seed=args.seed, grid_w=args.grid_w,
                                     grid_h=args.grid_h, epochs=args.epochs)
    write_observation_csv(args.out, rows)
    print(f"wrote {len(rows)} observation rows to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
