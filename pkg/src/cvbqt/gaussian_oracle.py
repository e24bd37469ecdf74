"""Numeric Gaussian-state simulation of the teleportation protocol.

States carry a mean vector and covariance matrix over ``2n`` quadratures,
ordered as all x quadratures followed by all y quadratures. Vacuum variance
is 1/4. A state may also carry a *batch* of means with shape ``(B, 2n)``:
Gaussian conditioning leaves the covariance independent of the measurement
outcome, so one covariance is shared across the batch and only the means are
sampled. The Monte-Carlo driver relies on this to run many shots at once.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cluster import SqueezingSpec, bogoliubov_matrix
from .protocol import (
    Port,
    ProtocolConfig,
    RoleAssignment,
    added_noise_fidelity,
    error_variances,
    run_bqt,
)
from .quad_algebra import DegenerateMeasurementError

VACUUM = 0.25
BS_MATRIX = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)


def symplectic_form(n: int) -> np.ndarray:
    """``Omega`` in xx..yy ordering with ``[x_j, y_k] = (i/2) delta_jk``."""
    Z = np.zeros((n, n))
    return 0.5 * np.block([[Z, np.eye(n)], [-np.eye(n), Z]])


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float))
        if self.cov.shape != (2 * self.n_modes, 2 * self.n_modes) or self.mean.shape[-1] != self.cov.shape[0]:
            raise ValueError("mean and covariance dimensions disagree")

    @property
    def n_modes(self) -> int:
        return self.cov.shape[0] // 2

    def is_physical(self, tol: float = 1e-9) -> bool:
        """Symmetric and satisfying ``cov + (i/4) J >= 0`` (``J`` the unit symplectic form)."""
        if np.max(np.abs(self.cov - self.cov.T), initial=0.0) > 1e-12 * max(1.0, np.abs(self.cov).max()):
            return False
        H = self.cov + 0.5j * symplectic_form(self.n_modes)
        return bool(np.linalg.eigvalsh(H).min() >= -tol * max(1.0, np.abs(self.cov).max()))

    def mode_indices(self, mode: int) -> tuple[int, int]:
        if not 0 <= mode < self.n_modes:
            raise IndexError(f"mode {mode} out of range for {self.n_modes} modes")
        return mode, self.n_modes + mode

    def reduced(self, modes) -> GaussianState:
        n = self.n_modes
        idx = list(modes) + [n + m for m in modes]
        return GaussianState(self.mean[..., idx], self.cov[np.ix_(idx, idx)])


@dataclass(frozen=True)
class MeasurementRecord:
    mode: int
    theta: float
    outcome: np.ndarray | float
    post: GaussianState


def make_input_state(
    n_modes: int,
    squeezed_indices=(),
    spec: SqueezingSpec | None = None,
    coherent_means: dict[int, tuple[float, float]] | None = None,
) -> GaussianState:
    """Product state of y-squeezed modes and coherent states (0-based mode indices)."""
    squeezed = list(squeezed_indices)
    coherent_means = coherent_means or {}
    for j in squeezed + list(coherent_means):
        if not 0 <= j < n_modes:
            raise IndexError(f"mode {j} out of range for {n_modes} modes")
    if squeezed and spec is None:
        raise ValueError("squeezed modes need a SqueezingSpec")
    var_x = np.full(n_modes, VACUUM)
    var_y = np.full(n_modes, VACUUM)
    for j in squeezed:
        var_x[j] = spec.x_variance
        var_y[j] = spec.y_variance
    mean = np.zeros(2 * n_modes)
    for j, (mx, my) in coherent_means.items():
        mean[j] = mx
        mean[n_modes + j] = my
    return GaussianState(mean, np.diag(np.concatenate([var_x, var_y])))


def unitary_symplectic(U) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    return np.block([[U.real, -U.imag], [U.imag, U.real]])


def apply_unitary(state: GaussianState, U, modes) -> GaussianState:
    """Passive Gaussian unitary ``x' + iy' = U (x + iy)`` on a subset of modes."""
    U = np.asarray(U, dtype=complex)
    modes = list(modes)
    k = len(modes)
    if U.shape != (k, k):
        raise ValueError(f"unitary of shape {U.shape} for {k} modes")
    if np.max(np.abs(U.conj().T @ U - np.eye(k))) > 1e-9:
        raise ValueError("matrix is not unitary")
    n = state.n_modes
    idx = modes + [n + m for m in modes]
    S = np.eye(2 * n)
    S[np.ix_(idx, idx)] = unitary_symplectic(U)
    mean = state.mean @ S.T
    cov = S @ state.cov @ S.T
    return GaussianState(mean, 0.5 * (cov + cov.T))


def homodyne_measure(state: GaussianState, mode: int, theta: float, rng: np.random.Generator) -> MeasurementRecord:
    """Sample ``cos(theta) x + sin(theta) y`` of one mode and condition the rest.

    The measured mode is removed. With a batch of means one outcome is drawn
    per batch entry.
    """
    ix, iy = state.mode_indices(mode)
    dim = 2 * state.n_modes
    u = np.zeros(dim)
    u[ix] = math.cos(theta)
    u[iy] = math.sin(theta)
    var = float(u @ state.cov @ u)
    if var < 1e-15:
        raise DegenerateMeasurementError(f"mode {mode} has zero variance along theta={theta}")
    mu = state.mean @ u
    outcome = mu + math.sqrt(var) * rng.standard_normal(np.shape(mu))
    keep = [i for i in range(dim) if i not in (ix, iy)]
    gain = state.cov[keep] @ u / var
    mean = state.mean[..., keep] + np.multiply.outer(outcome - mu, gain)
    cov = state.cov[np.ix_(keep, keep)] - np.outer(gain, gain) * var
    return MeasurementRecord(mode, theta, outcome, GaussianState(mean, 0.5 * (cov + cov.T)))


def displace(state: GaussianState, mode: int, dx, dy) -> GaussianState:
    ix, iy = state.mode_indices(mode)
    mean = np.array(state.mean, dtype=float, copy=True)
    mean[..., ix] += dx
    mean[..., iy] += dy
    return GaussianState(mean, state.cov)


class _Layout:
    """Tracks which live state index holds which protocol mode."""

    def __init__(self, n: int, owners):
        self.labels: list = list(range(1, n + 1)) + [("in", o) for o in owners]

    def index(self, ref) -> int:
        if isinstance(ref, Port):
            ref = ("in", ref.owner) if ref.side == "in" else ("node", ref.owner)
        return self.labels.index(ref)

    def remove(self, i: int):
        del self.labels[i]


def _prepare(config: ProtocolConfig, roles: RoleAssignment, means_in: np.ndarray) -> tuple[GaussianState, _Layout]:
    """Cluster plus coupled inputs, before any measurement."""
    A = config.adjacency()
    n = len(A)
    owners = roles.owners
    spec = config.squeezing()
    base = make_input_state(n + len(owners), range(n), spec)
    m = len(owners)
    mean = np.zeros(means_in.shape[:-1] + (2 * (n + m),))
    mean[..., n:n + m] = means_in[..., :m]
    mean[..., 2 * n + m:] = means_in[..., m:]
    state = GaussianState(mean, base.cov)
    state = apply_unitary(state, bogoliubov_matrix(A), range(n))
    layout = _Layout(n, owners)
    for k, (owner, node) in enumerate(roles.input_attach):
        state = apply_unitary(state, BS_MATRIX, [n + k, node - 1])
        # the in-slot now holds (in + node)/sqrt2, the node slot (in - node)/sqrt2
        layout.labels[node - 1] = ("node", owner)
    return state, layout


def analytic_added_noise(config: ProtocolConfig, roles: RoleAssignment | None = None, gains=None) -> np.ndarray:
    """Added-noise covariance of the displaced outputs, computed without sampling.

    The feedforward is linear in the measured quadratures, so the averaged
    output is ``L z`` for the pre-measurement quadrature vector ``z``; its
    covariance minus the coherent-input covariance is the added noise.
    """
    roles = roles or RoleAssignment.standard()
    if gains is None:
        gains = run_bqt(config, roles).gains
    m = roles.n_inputs
    state, layout = _prepare(config, roles, np.zeros(2 * m))
    N = state.n_modes
    rows_meas = []
    for ref, theta in zip(roles.measured_modes(), config.phases):
        j = layout.index(ref)
        u = np.zeros(2 * N)
        u[j] = math.cos(theta)
        u[N + j] = math.sin(theta)
        rows_meas.append(config.beta0 * u)
    out_rows = []
    for axis in (0, 1):
        for ref in roles.output_nodes:
            j = layout.index(ref)
            e = np.zeros(2 * N)
            e[j + axis * N] = 1.0
            out_rows.append(e)
    L = np.array(out_rows) + np.asarray(gains) @ np.array(rows_meas)
    cov = L @ state.cov @ L.T
    return 0.5 * (cov + cov.T) - VACUUM * np.eye(2 * m)


@dataclass
class MCReport:
    n_samples: int
    residual_mean: np.ndarray
    residual_cov: np.ndarray
    conditional_cov: np.ndarray
    empirical_added: np.ndarray
    analytic_added: np.ndarray
    stderr_var: np.ndarray
    stderr_mean: np.ndarray
    fidelity_A: float
    fidelity_B: float
    row_labels: tuple[str, ...] = field(default_factory=tuple)

    def variance_agreement(self, rel: float = 0.02, n_se: float = 3.0) -> np.ndarray:
        emp = np.diag(self.empirical_added)
        an = np.diag(self.analytic_added)
        return np.abs(emp - an) <= np.maximum(rel * np.abs(an), n_se * self.stderr_var)

    def means_zero(self, n_se: float = 3.0) -> np.ndarray:
        return np.abs(self.residual_mean) <= n_se * self.stderr_mean

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "row_labels": list(self.row_labels),
            "residual_mean": self.residual_mean.tolist(),
            "residual_cov": self.residual_cov.tolist(),
            "conditional_cov": self.conditional_cov.tolist(),
            "empirical_added_variance": np.diag(self.empirical_added).tolist(),
            "analytic_added_variance": np.diag(self.analytic_added).tolist(),
            "stderr_variance": self.stderr_var.tolist(),
            "stderr_mean": self.stderr_mean.tolist(),
            "variance_agrees": self.variance_agreement().tolist(),
            "means_zero": self.means_zero().tolist(),
            "fidelity_A": self.fidelity_A,
            "fidelity_B": self.fidelity_B,
        }


def _simulate_chunk(config, roles, gains, seed, count, mean_range):
    rng = np.random.default_rng(seed)
    m = roles.n_inputs
    if config.input_means is not None:
        pairs = np.asarray(config.input_means, dtype=float)[:m]
        means_in = np.broadcast_to(np.concatenate([pairs[:, 0], pairs[:, 1]]), (count, 2 * m)).copy()
    else:
        means_in = rng.uniform(-mean_range, mean_range, size=(count, 2 * m))
    state, layout = _prepare(config, roles, means_in)

    currents = []
    for ref, theta in zip(roles.measured_modes(), config.phases):
        j = layout.index(ref)
        rec = homodyne_measure(state, j, theta, rng)
        currents.append(config.beta0 * rec.outcome)
        state = rec.post
        layout.remove(j)
    shift = np.stack(currents, axis=1) @ gains.T  # (count, 2m)
    for k, ref in enumerate(roles.output_nodes):
        state = displace(state, layout.index(ref), shift[:, k], shift[:, m + k])

    out_idx = [layout.index(r) for r in roles.output_nodes]
    out = state.reduced(out_idx)
    residual = out.mean - means_in
    return residual.sum(axis=0), residual.T @ residual, out.cov


def run_protocol_mc(
    config: ProtocolConfig | None = None,
    roles: RoleAssignment | None = None,
    n_samples: int = 100_000,
    rng_seed: int = 42,
    *,
    chunk_size: int = 10_000,
    workers: int = 1,
    mean_range: float = 5.0,
    gains: np.ndarray | None = None,
) -> MCReport:
    """Monte-Carlo run of the full protocol with sampled homodyne outcomes.

    Each shot draws coherent input means uniformly in ``[-mean_range,
    mean_range]``, samples every homodyne outcome, applies the feedforward of
    :func:`run_bqt` and records the conditional output mean minus the input
    mean. The added noise is estimated as the spread of that residual plus
    the conditional output covariance minus the coherent-input covariance.
    Chunks get independent sub-streams of ``rng_seed`` and are combined with
    compensated summation, so results do not depend on ``workers``.
    ``gains`` overrides the feedforward matrix, e.g. to test a wrong one.
    """
    config = config or ProtocolConfig()
    roles = roles or RoleAssignment.standard()
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    report = run_bqt(config, roles)
    gains = report.gains if gains is None else np.asarray(gains, dtype=float)
    m = roles.n_inputs

    counts = [chunk_size] * (n_samples // chunk_size)
    if n_samples % chunk_size:
        counts.append(n_samples % chunk_size)
    seeds = np.random.SeedSequence(rng_seed).spawn(len(counts))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(
            lambda sc: _simulate_chunk(config, roles, gains, sc[0], sc[1], mean_range),
            zip(seeds, counts),
        ))

    s1 = np.array([math.fsum(p[0][i] for p in parts) for i in range(2 * m)])
    s2 = np.array([[math.fsum(p[1][i, j] for p in parts) for j in range(2 * m)] for i in range(2 * m)])
    cond_cov = parts[0][2]
    N = n_samples
    mean = s1 / N
    cov = (s2 - N * np.outer(mean, mean)) / (N - 1)
    added = cov + cond_cov - VACUUM * np.eye(2 * m)
    _, analytic = error_variances(report, config.adjacency(), config.squeezing())

    var_res = np.diag(cov)
    d = np.diag(added)
    fid = [added_noise_fidelity(max(d[k], 0.0), max(d[m + k], 0.0)) for k in range(m)]
    return MCReport(
        n_samples=N,
        residual_mean=mean,
        residual_cov=cov,
        conditional_cov=cond_cov,
        empirical_added=added,
        analytic_added=analytic,
        stderr_var=np.sqrt(2.0 / (N - 1)) * var_res,
        stderr_mean=np.sqrt(var_res / N),
        # output 0 is received by B, output 1 by A
        fidelity_A=fid[1] if m > 1 else float("nan"),
        fidelity_B=fid[0],
        row_labels=report.row_labels,
    )
