"""Minimization of the teleportation noise over the free cluster weights."""

from __future__ import annotations

import enum
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .cluster import SqueezingSpec
from .protocol import (
    CANONICAL_PHASES,
    FreeWeights,
    ProtocolConfig,
    RoleAssignment,
    batched_pipeline,
    batched_r_cov_y,
    canonical_graph,
    check_bqt_condition,
    error_variances,
    run_bqt,
)


class Family(enum.Enum):
    LINEAR_ENDS = "LinearEnds"
    LINEAR_CENTERS = "LinearCenters"
    TWO_PAIRS = "TwoPairs"
    GENERAL = "General"


@dataclass(frozen=True)
class ConfigFamily:
    tag: Family
    witness: tuple[float, float, float, float]


@dataclass(frozen=True)
class OptimizerSettings:
    bound: float = 3.0
    connectivity_required: bool = False
    g_min: float = 0.1
    zero_tol: float = 1e-6
    budget: int = 1000
    seed: int = 0
    workers: int = 1

    def validate(self) -> None:
        if not self.bound > 0:
            raise ValueError("weight bound must be positive")
        if not 0 < self.g_min <= self.bound:
            raise ValueError(f"g_min={self.g_min} must lie in (0, bound={self.bound}]")
        if not 0 <= self.zero_tol < self.g_min:
            raise ValueError("zero_tol must be smaller than g_min")
        if self.budget < 1:
            raise ValueError("budget must be at least one restart")


class InfeasibleOptimization(ValueError):
    pass


@dataclass(frozen=True)
class OptimizationResult:
    weights: FreeWeights
    family: ConfigFamily
    objective: float
    per_quadrature: np.ndarray
    y_variance: float

    @property
    def objective_units(self) -> float:
        """Objective in units of the squeezed variance."""
        return self.objective / self.y_variance


def total_added_variance(weights, spec: SqueezingSpec) -> float:
    """Trace of the added-noise covariance for canonical constraints plus free weights."""
    free = weights if isinstance(weights, FreeWeights) else FreeWeights.from_seq(weights)
    config = ProtocolConfig(free_weights=free)
    report = run_bqt(config)
    diag, _ = error_variances(report, config.adjacency(), spec)
    return float(diag.sum())


def trace_batch(free: np.ndarray) -> np.ndarray:
    """Vectorized trace objective in units of the squeezed variance.

    ``free`` has shape ``(B, 4)`` with columns ``(g14, g24, g34, g45)``.
    """
    free = np.atleast_2d(np.asarray(free, dtype=float))
    A = np.zeros((len(free), 5, 5))
    for (j, k), col in {(0, 3): 0, (1, 3): 1, (2, 3): 2, (3, 4): 3}.items():
        A[:, j, k] = A[:, k, j] = free[:, col]
    A[:, 0, 1] = A[:, 1, 0] = 1.0
    A[:, 2, 4] = A[:, 4, 2] = 1.0
    res = batched_pipeline(A, np.broadcast_to(CANONICAL_PHASES, (len(free), 5)), RoleAssignment.standard())
    E = res.error_matrix
    C = batched_r_cov_y(A)
    return np.einsum("bij,bjk,bik->b", E, C, E)


def per_quadrature_variances(weights, spec: SqueezingSpec) -> np.ndarray:
    config = ProtocolConfig(free_weights=weights)
    diag, _ = error_variances(run_bqt(config), canonical_graph(config.free_weights), spec)
    return diag


def classify_configuration(weights, zero_tol: float = 1e-6) -> ConfigFamily:
    g14, g24, g34, g45 = weights.as_tuple() if isinstance(weights, FreeWeights) else map(float, weights)
    small = lambda g: abs(g) < zero_tol  # noqa: E731
    if all(map(small, (g14, g24, g34, g45))):
        tag = Family.TWO_PAIRS
    elif small(g14) and small(g45) and not small(g24) and not small(g34):
        tag = Family.LINEAR_ENDS
    elif small(g24) and small(g34) and not small(g14) and not small(g45):
        tag = Family.LINEAR_CENTERS
    else:
        tag = Family.GENERAL
    return ConfigFamily(tag, (g14, g24, g34, g45))


def _boxes(settings: OptimizerSettings) -> list[list[tuple[float, float]]]:
    """Search boxes over (g14, g24, g34, g45).

    Connectivity asks for ``|g24|, |g34| >= g_min`` or ``|g14|, |g45| >= g_min``;
    each alternative splits into four sign orthants.
    """
    b = settings.bound
    free = (-b, b)
    if not settings.connectivity_required:
        return [[free] * 4]
    sides = [(settings.g_min, b), (-b, -settings.g_min)]
    boxes = []
    for pair in ((1, 2), (0, 3)):
        for s1, s2 in itertools.product(sides, sides):
            box = [free] * 4
            box[pair[0]], box[pair[1]] = s1, s2
            boxes.append(box)
    return boxes


_COARSE = {"xtol": 1e-6, "ftol": 1e-12}
_POLISH = {"xtol": 1e-11, "ftol": 1e-15, "maxfev": 20000}


def _local(box, x0, options=_COARSE):
    f = lambda x: float(trace_batch(x[None])[0])  # noqa: E731
    res = minimize(f, x0, method="Powell", bounds=box, options=options)
    return float(res.fun), np.clip(res.x, [lo for lo, _ in box], [hi for _, hi in box])


def minimize_weights(settings: OptimizerSettings | None = None, spec: SqueezingSpec | None = None) -> OptimizationResult:
    """Multi-start Powell minimization of the total added variance.

    Restarts are dealt evenly over the search boxes; each draws a uniform
    start from its box with a sub-seed of ``settings.seed`` and runs a coarse
    local search. The best coarse result (ties to the earliest restart) is
    polished with tight tolerances inside its box.
    """
    settings = settings or OptimizerSettings()
    try:
        settings.validate()
    except ValueError as exc:
        raise InfeasibleOptimization(str(exc)) from exc
    spec = spec or SqueezingSpec.from_db(10.0)
    boxes = _boxes(settings)
    seeds = np.random.SeedSequence(settings.seed).spawn(settings.budget)
    starts = []
    for k, ss in enumerate(seeds):
        box = boxes[k % len(boxes)]
        rng = np.random.default_rng(ss)
        starts.append((box, np.array([rng.uniform(lo, hi) for lo, hi in box])))
    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        results = list(pool.map(lambda bx: _local(*bx), starts))
    best = min(range(len(results)), key=lambda k: results[k][0])
    _, x = _local(starts[best][0], results[best][1], _POLISH)
    # snap numerically-zero weights so the family reflects the optimum's pattern
    x = np.where(np.abs(x) < settings.zero_tol, 0.0, x)
    free = FreeWeights.from_seq(x)
    diag = per_quadrature_variances(free, spec)
    return OptimizationResult(
        weights=free,
        family=classify_configuration(free, settings.zero_tol),
        objective=float(diag.sum()),
        per_quadrature=diag,
        y_variance=spec.y_variance,
    )


def grid_minimum(lo: float = -2.0, hi: float = 2.0, step: float = 0.25) -> tuple[float, np.ndarray]:
    """Smallest trace objective (squeezed-variance units) on a regular 4-D grid."""
    axis = np.arange(lo, hi + step / 2, step)
    grid = np.array(list(itertools.product(axis, repeat=4)))
    values = np.concatenate([trace_batch(chunk) for chunk in np.array_split(grid, max(1, len(grid) // 5000))])
    k = int(np.argmin(values))
    return float(values[k]), grid[k]


def satisfies_bqt(weights) -> bool:
    return check_bqt_condition(run_bqt(ProtocolConfig(free_weights=weights)))
