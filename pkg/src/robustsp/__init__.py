"""Robust shortest paths on road networks.

Build uncertainty sets from multi-scenario travel-time data, solve each
robust counterpart exactly with combinatorial algorithms, and benchmark the
resulting paths against every observed scenario.
"""

from .errors import (
    BudgetExceeded,
    ConfigError,
    DegenerateData,
    DegenerateGeometry,
    DimensionMismatch,
    EmptyReport,
    EmptySeries,
    LabelBudgetExceeded,
    NoConnectedPairs,
    NodeBudgetExceeded,
    NoPath,
    RobustSPError,
    SchemaError,
    TooManyPaths,
    ZeroSpeed,
)
from .graph import (
    Graph,
    Path,
    enumerate_simple_paths,
    forward_distances,
    load_graph,
    reverse_distances,
    save_graph,
    shortest_path,
)
from .ingest import (
    ObservationRecord,
    ScenarioMatrix,
    build_graph,
    ingest_pipeline,
    interpolate_series,
    parse_observations,
    read_scenarios,
    to_travel_times,
    write_scenarios,
)
from .uncertainty import (
    OWA,
    Budgeted,
    ConvexHull,
    Ellipsoid,
    Interval,
    UncertaintyModel,
    build_model,
    cvar_weights,
    fit_ellipsoid,
    interval_bounds,
    mean_scenario,
    model_from_json,
    model_to_json,
    scale_scenarios,
    sym_weights,
    worst_case_value,
)
from .solvers import (
    Diagnostics,
    RobustSolution,
    solve,
    solve_budgeted,
    solve_ellipsoid,
    solve_interval,
    solve_oracle,
    solve_owa,
)
from .bench import (
    BenchmarkReport,
    ExperimentConfig,
    MethodMetrics,
    aggregate,
    default_grids,
    read_results,
    run_benchmark,
    sample_pairs,
    split_scenarios,
    write_metrics,
    write_results,
)

__version__ = "0.1.0"
