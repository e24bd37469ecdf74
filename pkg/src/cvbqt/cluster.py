"""Weighted-graph cluster resources.

Cluster modes are written in the auxiliary r-basis, where node ``j`` reads
``X_j + iY_j = (x_rj + i y_rj) + sum_k A_jk (i x_rk - y_rk)``. The r-basis is
tied to the independent squeezed oscillators by the real map
``r = (I + A^2)^(-1/2) s``, which makes the overall Bogoliubov transform
``(I + iA)(I + A^2)^(-1/2)`` unitary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quad_algebra import QuadMode, apply_complex_linear, r_x, r_y

SYM_TOL = 1e-12


@dataclass(frozen=True)
class WeightedGraph:
    """Symmetric weighted adjacency matrix with zero diagonal."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        validate_graph(w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges: dict[tuple[int, int], float]) -> WeightedGraph:
        """Build from 1-based ``{(j, k): weight}`` edges."""
        w = np.zeros((n, n))
        for (j, k), g in edges.items():
            w[j - 1, k - 1] = w[k - 1, j - 1] = g
        return cls(w)

    def edges(self) -> list[tuple[int, int, float]]:
        return validate_graph(self.weights)[1]


@dataclass(frozen=True)
class SqueezingSpec:
    """Variances of the squeezed (y) and anti-squeezed (x) oscillator quadratures."""

    y_variance: float
    x_variance: float | None = None

    def __post_init__(self):
        v = float(self.y_variance)
        if not (0.0 < v <= 0.25):
            raise ValueError(f"squeezed variance must lie in (0, 1/4], got {v}")
        xv = 1.0 / (16.0 * v) if self.x_variance is None else float(self.x_variance)
        if xv * v < 1.0 / 16.0 - 1e-15:
            raise ValueError("x_variance * y_variance violates the 1/16 uncertainty bound")
        object.__setattr__(self, "y_variance", v)
        object.__setattr__(self, "x_variance", xv)

    @classmethod
    def from_db(cls, db: float) -> SqueezingSpec:
        from .protocol import db_to_variance

        return cls(db_to_variance(db))


def validate_graph(g) -> tuple[int, list[tuple[int, int, float]]]:
    """Check symmetry, zero diagonal and finiteness.

    Returns:
        ``(n, edges)`` with 1-based ``(j, k, weight)`` edges for ``j < k``.
    """
    w = g.weights if isinstance(g, WeightedGraph) else np.asarray(g, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"adjacency matrix must be square, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("adjacency matrix has non-finite entries")
    if np.any(np.abs(np.diag(w)) > SYM_TOL):
        raise ValueError("adjacency matrix must have a zero diagonal")
    asym = np.abs(w - w.T)
    if np.any(asym > SYM_TOL):
        j, k = np.unravel_index(np.argmax(asym), w.shape)
        raise ValueError(
            f"adjacency matrix is not symmetric: w[{j + 1}][{k + 1}]={w[j, k]} "
            f"but w[{k + 1}][{j + 1}]={w[k, j]}"
        )
    n = w.shape[0]
    edges = [(j + 1, k + 1, float(w[j, k])) for j in range(n) for k in range(j + 1, n) if w[j, k] != 0]
    return n, edges


def _as_symmetric(A) -> np.ndarray:
    A = A.weights if isinstance(A, WeightedGraph) else np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or np.any(np.abs(A - A.T) > SYM_TOL):
        raise ValueError("adjacency matrix must be square and symmetric")
    return A


def inv_sqrt_gram(A) -> np.ndarray:
    """``(I + A^2)^(-1/2)`` via symmetric eigendecomposition."""
    A = _as_symmetric(A)
    evals, evecs = np.linalg.eigh(np.eye(len(A)) + A @ A)
    if np.any(evals < 1.0 - 1e-9):
        raise ArithmeticError(f"I + A^2 has eigenvalue {evals.min()} < 1")
    return (evecs / np.sqrt(evals)) @ evecs.T


def bogoliubov_matrix(A) -> np.ndarray:
    """Unitary cluster-generating transform ``(I + iA)(I + A^2)^(-1/2)``."""
    A = _as_symmetric(A)
    return (np.eye(len(A)) + 1j * A) @ inv_sqrt_gram(A)


def cluster_modes(A) -> list[QuadMode]:
    """Cluster node quadratures expressed over the r-basis labels."""
    A = _as_symmetric(A)
    validate_graph(A)
    n = len(A)
    elementary = [QuadMode.elementary(r_x(j + 1), r_y(j + 1)) for j in range(n)]
    return apply_complex_linear(np.eye(n) + 1j * A, elementary)


def r_covariance(A, spec: SqueezingSpec) -> tuple[np.ndarray, np.ndarray]:
    """Covariance blocks ``(Cov(x_r), Cov(y_r))``; the x-y cross block is zero."""
    A = _as_symmetric(A)
    validate_graph(A)
    G = np.linalg.inv(np.eye(len(A)) + A @ A)
    G = 0.5 * (G + G.T)
    return G * spec.x_variance, G * spec.y_variance
