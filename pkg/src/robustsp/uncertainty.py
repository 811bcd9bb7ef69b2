"""Uncertainty-set families fitted from scenario data.

Six families share one evaluation contract: ``worst_case_value(model, path)``
returns the maximum total travel time of the path over the model's set of
cost vectors. Scaling can push fitted sets below zero; since travel times are
physically nonnegative, every constructor clamps at zero (a deliberate
deviation from the unclamped geometry of the raw formulas).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, DimensionMismatch
from .graph import Path

__all__ = [
    "ConvexHull", "Interval", "Ellipsoid", "Budgeted", "OWA", "UncertaintyModel",
    "mean_scenario", "scale_scenarios", "interval_bounds", "fit_ellipsoid",
    "cvar_weights", "sym_weights", "worst_case_value", "build_model",
    "scenario_hash", "model_to_json", "model_from_json", "FAMILIES",
]

FAMILIES = ("ch", "interval", "ellipsoid", "ellipsoid-diag", "budgeted", "ph", "sph")


def _values(R) -> np.ndarray:
    """Accept a ScenarioMatrix or a plain N x n array."""
    values = np.asarray(getattr(R, "values", R), dtype=float)
    if values.ndim != 2:
        raise ValueError("scenario data must be a 2-D (scenarios x arcs) array")
    return values


@dataclass(frozen=True)
class ConvexHull:
    """Hull of the (scaled) raw scenarios; worst case is the scenario maximum."""

    scenarios: np.ndarray
    scale: float = 1.0
    source_hash: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scenarios", _values(self.scenarios))
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")
        if np.any(self.scenarios < 0):
            raise ValueError("scenario entries must be nonnegative (clamp upstream)")

    @property
    def dimension(self) -> int:
        return self.scenarios.shape[1]


@dataclass(frozen=True)
class Interval:
    """Per-arc box [lower, upper]; worst case is the upper-bound path cost."""

    lower: np.ndarray
    upper: np.ndarray
    scale: float = 1.0
    source_hash: str | None = field(default=None, compare=False)

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower/upper must be 1-D vectors of equal length")
        if np.any(lower < 0):
            raise ValueError("lower bounds must be nonnegative after clamping")
        if np.any(lower > upper + 1e-12):
            raise ValueError("lower must not exceed upper")

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]


@dataclass(frozen=True)
class Ellipsoid:
    """Mean/covariance set; worst case is mean cost plus a scaled deviation term.

    ``diagonal_only`` marks a fit whose off-diagonal covariance entries were
    zeroed at construction; evaluation is uniform either way.
    """

    mean: np.ndarray
    covariance: np.ndarray
    scale: float = 1.0
    diagonal_only: bool = False
    source_hash: str | None = field(default=None, compare=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim == 0:
            mean = mean.reshape(1)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise ValueError("covariance must be n x n matching the mean vector")
        if not np.allclose(cov, cov.T, atol=1e-8, rtol=1e-8):
            raise ValueError("covariance must be symmetric")

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class Budgeted:
    """Deviation box with at most ``budget`` coordinates elevated at once.

    ``budget`` may exceed the arc count (the benchmark grid runs to 100 on
    small instances); the worst case then saturates at the full deviation sum.
    Fractional budgets are allowed and handled by a fractional top-off.
    """

    nominal: np.ndarray
    upper: np.ndarray
    budget: float = 0.0
    source_hash: str | None = field(default=None, compare=False)

    def __post_init__(self):
        nominal = np.asarray(self.nominal, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "nominal", nominal)
        object.__setattr__(self, "upper", upper)
        if nominal.shape != upper.shape or nominal.ndim != 1:
            raise ValueError("nominal/upper must be 1-D vectors of equal length")
        if np.any(nominal > upper + 1e-12):
            raise ValueError("nominal must not exceed upper")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")

    @property
    def dimension(self) -> int:
        return self.nominal.shape[0]


@dataclass(frozen=True)
class OWA:
    """Scenario set evaluated through ordered weighted averaging.

    ``weights`` must lie on the simplex and be nonincreasing; the worst case
    over the induced polyhedron equals the weighted sum of the per-scenario
    path costs sorted in descending order (rearrangement equivalence).
    """

    scenarios: np.ndarray
    weights: np.ndarray
    source_hash: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scenarios", _values(self.scenarios))
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", weights)
        if weights.ndim != 1 or weights.shape[0] != self.scenarios.shape[0]:
            raise ValueError("weights length must equal the scenario count")
        if np.any(weights < -1e-12):
            raise ValueError("weights must be nonnegative")
        if abs(float(weights.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if np.any(np.diff(weights) > 1e-12):
            raise ValueError("weights must be nonincreasing")

    @property
    def dimension(self) -> int:
        return self.scenarios.shape[1]


UncertaintyModel = ConvexHull | Interval | Ellipsoid | Budgeted | OWA


def mean_scenario(R) -> np.ndarray:
    """Componentwise arithmetic mean of the scenario rows."""
    values = _values(R)
    if values.shape[0] < 1:
        raise ValueError("need at least one scenario")
    return values.mean(axis=0)


def scale_scenarios(R, scale: float) -> np.ndarray:
    """Pull every scenario toward (or push away from) the mean, then clamp at 0."""
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    values = _values(R)
    center = values.mean(axis=0)
    return np.maximum(center + scale * (values - center), 0.0)


def interval_bounds(R, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-arc box centered at the min/max midpoint, half-width scaled; lower clamped at 0."""
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    values = _values(R)
    hi = values.max(axis=0)
    lo = values.min(axis=0)
    mid = (hi + lo) / 2.0
    half = (hi - lo) / 2.0
    return np.maximum(mid - scale * half, 0.0), mid + scale * half


def fit_ellipsoid(R) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and population (1/N) covariance of the scenario rows."""
    values = _values(R)
    n_scen = values.shape[0]
    if n_scen < 2:
        raise DegenerateData("ellipsoid fit needs at least 2 scenarios")
    mean = values.mean(axis=0)
    devs = values - mean
    cov = devs.T @ devs / n_scen
    return mean, (cov + cov.T) / 2.0


def cvar_weights(scenario_count: int, column: int) -> np.ndarray:
    """Weight vector averaging the worst ``column`` of ``scenario_count`` outcomes."""
    if not 1 <= column <= scenario_count:
        raise ValueError(f"column must be in [1, {scenario_count}]")
    q = np.zeros(scenario_count)
    q[:column] = 1.0 / column
    return q


def sym_weights(scenario_count: int, column: int) -> np.ndarray:
    """Column ``column`` of the symmetric weight matrix (1-based)."""
    if not 1 <= column <= scenario_count // 2 + 1:
        raise ValueError(f"column must be in [1, {scenario_count // 2 + 1}]")
    k = column - 1
    q = np.concatenate([np.full(k, 2.0), np.ones(scenario_count - 2 * k), np.full(k, 0.0)])
    return q / scenario_count


def _path_arcs(model: UncertaintyModel, path) -> list[int]:
    arcs = list(path.arc_indices) if isinstance(path, Path) else [int(a) for a in path]
    n = model.dimension
    for a in arcs:
        if not 0 <= a < n:
            raise DimensionMismatch(f"arc index {a} outside model dimension {n}")
    return arcs


def owa_value(weights: np.ndarray, outcomes: np.ndarray) -> float:
    """Weighted sum of outcomes sorted in descending order."""
    ordered = np.sort(np.asarray(outcomes, dtype=float))[::-1]
    return float(ordered @ weights)


def budgeted_excess(deviations: np.ndarray, budget: float) -> float:
    """Largest total deviation with at most ``budget`` coordinates elevated.

    Greedy: the whole ``floor(budget)`` largest deviations plus a fractional
    share of the next one, which solves the inner maximization exactly.
    """
    devs = np.sort(np.asarray(deviations, dtype=float))[::-1]
    whole = min(int(np.floor(budget)), len(devs))
    total = float(devs[:whole].sum())
    frac = budget - np.floor(budget)
    if frac > 0 and whole < len(devs):
        total += float(frac * devs[whole])
    return total


def worst_case_value(model: UncertaintyModel, path) -> float:
    """Maximum path cost over the model's uncertainty set.

    ``path`` is a Path or any sequence of arc indices into the model's arc
    index space.
    """
    arcs = _path_arcs(model, path)
    if isinstance(model, Interval):
        return float(model.upper[arcs].sum())
    if isinstance(model, ConvexHull):
        if model.scenarios.shape[0] == 0:
            raise DegenerateData("convex hull of zero scenarios")
        return float(model.scenarios[:, arcs].sum(axis=1).max())
    if isinstance(model, OWA):
        outcomes = model.scenarios[:, arcs].sum(axis=1)
        return owa_value(model.weights, outcomes)
    if isinstance(model, Ellipsoid):
        base = float(model.mean[arcs].sum())
        quad = float(model.covariance[np.ix_(arcs, arcs)].sum())
        return base + float(np.sqrt(model.scale * max(quad, 0.0)))
    if isinstance(model, Budgeted):
        base = float(model.nominal[arcs].sum())
        return base + budgeted_excess((model.upper - model.nominal)[arcs], model.budget)
    raise TypeError(f"unknown model type {type(model)!r}")


def scenario_hash(R) -> str:
    """Stable content hash of a scenario matrix (shape plus float64 payload)."""
    values = np.ascontiguousarray(_values(R))
    digest = hashlib.sha256()
    digest.update(str(values.shape).encode())
    digest.update(values.tobytes())
    return digest.hexdigest()


def build_model(family: str, R, parameter: float) -> UncertaintyModel:
    """Fit one family from scenario data at the given size parameter.

    Families: ch / interval / ellipsoid / ellipsoid-diag (size ``parameter``
    is the scaling factor), budgeted (deviation budget), ph / sph (1-based
    weight column index).
    """
    values = _values(R)
    digest = scenario_hash(values)
    if family == "ch":
        return ConvexHull(scale_scenarios(values, parameter), parameter, source_hash=digest)
    if family == "interval":
        lower, upper = interval_bounds(values, parameter)
        return Interval(lower, upper, parameter, source_hash=digest)
    if family in ("ellipsoid", "ellipsoid-diag"):
        mean, cov = fit_ellipsoid(values)
        if family == "ellipsoid-diag":
            cov = np.diag(np.diag(cov))
        return Ellipsoid(mean, cov, parameter, diagonal_only=family == "ellipsoid-diag",
                         source_hash=digest)
    if family == "budgeted":
        return Budgeted(values.mean(axis=0), values.max(axis=0), parameter, source_hash=digest)
    if family == "ph":
        return OWA(values, cvar_weights(values.shape[0], _column(parameter)), source_hash=digest)
    if family == "sph":
        return OWA(values, sym_weights(values.shape[0], _column(parameter)), source_hash=digest)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _column(parameter: float) -> int:
    column = int(parameter)
    if column != parameter:
        raise ValueError(f"weight column index must be integral, got {parameter}")
    return column


_FAMILY_TAGS = {ConvexHull: "ch", Interval: "interval", Ellipsoid: "ellipsoid",
                Budgeted: "budgeted", OWA: "owa"}


def model_to_json(model: UncertaintyModel) -> str:
    """Serialize a fitted model (family tag, parameters, source hash)."""
    tag = _FAMILY_TAGS[type(model)]
    payload: dict = {"family": tag, "source_hash": model.source_hash}
    if isinstance(model, ConvexHull):
        payload.update(scale=model.scale, scenarios=model.scenarios.tolist())
    elif isinstance(model, Interval):
        payload.update(scale=model.scale, lower=model.lower.tolist(),
                       upper=model.upper.tolist())
    elif isinstance(model, Ellipsoid):
        payload.update(scale=model.scale, diagonal_only=model.diagonal_only,
                       mean=model.mean.tolist(), covariance=model.covariance.tolist())
    elif isinstance(model, Budgeted):
        payload.update(budget=model.budget, nominal=model.nominal.tolist(),
                       upper=model.upper.tolist())
    elif isinstance(model, OWA):
        payload.update(weights=model.weights.tolist(), scenarios=model.scenarios.tolist())
    return json.dumps(payload)


def model_from_json(text: str) -> UncertaintyModel:
    payload = json.loads(text)
    tag = payload["family"]
    digest = payload.get("source_hash")
    if tag == "ch":
        return ConvexHull(np.array(payload["scenarios"]), payload["scale"], source_hash=digest)
    if tag == "interval":
        return Interval(np.array(payload["lower"]), np.array(payload["upper"]),
                        payload["scale"], source_hash=digest)
    if tag == "ellipsoid":
        return Ellipsoid(np.array(payload["mean"]), np.array(payload["covariance"]),
                         payload["scale"], payload["diagonal_only"], source_hash=digest)
    if tag == "budgeted":
        return Budgeted(np.array(payload["nominal"]), np.array(payload["upper"]),
                        payload["budget"], source_hash=digest)
    if tag == "owa":
        return OWA(np.array(payload["scenarios"]), np.array(payload["weights"]),
                   source_hash=digest)
    raise ValueError(f"unknown family tag {tag!r}")
