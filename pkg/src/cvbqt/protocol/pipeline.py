"""Symbolic teleportation pipeline on a weighted cluster."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..cluster import SqueezingSpec, cluster_modes, r_covariance
from ..quad_algebra import (
    LinForm,
    QuadMode,
    beamsplitter_pair,
    coefficient_matrix,
    eliminate,
    homodyne_form,
    input_x,
    input_y,
    photocurrent,
    r_x,
    r_y,
)
from .roles import CANONICAL_PHASES, ModeRef, Port, ProtocolConfig, RoleAssignment


@dataclass(frozen=True)
class TeleportReport:
    """Output quadratures decomposed over inputs, photocurrents and r-basis noise.

    Rows are ``(X_out0, X_out1, ..., Y_out0, Y_out1, ...)``; for the standard
    roles that is ``(X_out,B, X_out,A, Y_out,B, Y_out,A) = (X2, X3, Y2, Y3)``.
    Input columns are ``(x_A, x_B, ..., y_A, y_B, ...)``. ``gains`` is the
    feedforward that cancels the photocurrent terms, i.e. the negated
    photocurrent coefficients.
    """

    input_coeff: np.ndarray
    gains: np.ndarray
    error_matrix: np.ndarray
    residual_x: np.ndarray
    outputs: tuple[LinForm, ...]
    row_labels: tuple[str, ...]
    input_labels: tuple[str, ...]
    photocurrent_tags: tuple[str, ...]
    roles: RoleAssignment

    def target(self) -> np.ndarray:
        return np.eye(len(self.input_labels))

    def to_dict(self) -> dict:
        return {
            "row_labels": list(self.row_labels),
            "input_labels": list(self.input_labels),
            "photocurrent_tags": list(self.photocurrent_tags),
            "input_coeff": self.input_coeff.tolist(),
            "gains": self.gains.tolist(),
            "error_matrix": self.error_matrix.tolist(),
            "residual_x": self.residual_x.tolist(),
        }


def _check_roles(config: ProtocolConfig, roles: RoleAssignment) -> tuple[np.ndarray, list[ModeRef]]:
    A = config.adjacency()
    roles.validate(len(A))
    measured = roles.measured_modes()
    if len(config.phases) != len(measured):
        raise ValueError(f"{len(measured)} homodyne phases required, got {len(config.phases)}")
    return A, measured


def assemble_protocol(config: ProtocolConfig, roles: RoleAssignment | None = None) -> dict[ModeRef, QuadMode]:
    """All modes after cluster construction and beam-splitter coupling.

    Keys are cluster node numbers for untouched nodes and :class:`Port` for
    the two outputs of each input coupling.
    """
    roles = roles or RoleAssignment.standard()
    A = config.adjacency()
    roles.validate(len(A))
    nodes = cluster_modes(A)
    modes: dict[ModeRef, QuadMode] = {}
    attached = set()
    for owner, j in roles.input_attach:
        inp = QuadMode.elementary(input_x(owner), input_y(owner))
        plus, minus = beamsplitter_pair(inp, nodes[j - 1])
        modes[Port(owner, "in")] = plus
        modes[Port(owner, "node")] = minus
        attached.add(j)
    for j, m in enumerate(nodes, start=1):
        if j not in attached:
            modes[j] = m
    return modes


def run_bqt(config: ProtocolConfig | None = None, roles: RoleAssignment | None = None) -> TeleportReport:
    """Measure, eliminate ``x_r`` and decompose the output quadratures.

    Raises:
        DegenerateMeasurementError: if the homodyne record cannot be solved
            for the r-basis x-quadratures.
    """
    config = config or ProtocolConfig()
    roles = roles or RoleAssignment.standard()
    A, measured = _check_roles(config, roles)
    n = len(A)
    modes = assemble_protocol(config, roles)
    tags = roles.photocurrent_tags()
    forms = [
        (homodyne_form(modes[m], theta, config.beta0), tag)
        for m, theta, tag in zip(measured, config.phases, tags)
    ]
    outs = [modes[o] for o in roles.output_nodes]
    targets = [m.x for m in outs] + [m.y for m in outs]
    x_labels = [r_x(j) for j in range(1, n + 1)]
    solved = eliminate(forms, targets, x_labels)

    owners = roles.owners
    in_labels = [input_x(o) for o in owners] + [input_y(o) for o in owners]
    names = [str(o) for o in roles.output_nodes]
    return TeleportReport(
        input_coeff=coefficient_matrix(solved, in_labels),
        gains=-coefficient_matrix(solved, [photocurrent(t) for t in tags]),
        error_matrix=coefficient_matrix(solved, [r_y(j) for j in range(1, n + 1)]),
        residual_x=coefficient_matrix(solved, x_labels),
        outputs=tuple(solved),
        row_labels=tuple([f"X[{s}]" for s in names] + [f"Y[{s}]" for s in names]),
        input_labels=tuple([f"x_{o}" for o in owners] + [f"y_{o}" for o in owners]),
        photocurrent_tags=tuple(tags),
        roles=roles,
    )


def check_bqt_condition(report: TeleportReport, tol: float = 1e-9) -> bool:
    """True iff every output carries exactly its input and no ``x_r`` noise remains."""
    return bool(
        np.max(np.abs(report.input_coeff - report.target())) <= tol
        and np.max(np.abs(report.residual_x), initial=0.0) <= tol
    )


def canonical_constraints(weights, phases=CANONICAL_PHASES, tol: float = 1e-9) -> bool:
    """Whether a 5-node graph and phase set meet the standard BQT conditions.

    Required: ``g15 = g25 = g13 = g23 = 0``, ``g12 = g35 = 1``,
    ``theta2 = theta4 = -theta1 = -theta3 = pi/4`` and ``theta5 = 0``.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (5, 5) or len(phases) != 5:
        return False
    g = lambda j, k: w[j - 1, k - 1]  # noqa: E731
    q = math.pi / 4
    t1, t2, t3, t4, t5 = phases
    checks = [
        g(1, 5), g(2, 5), g(1, 3), g(2, 3),
        g(1, 2) - 1, g(3, 5) - 1,
        t2 - q, t4 - q, t1 + q, t3 + q, t5,
    ]
    return all(abs(c) <= tol for c in checks)


def error_variances(report: TeleportReport, A, spec: SqueezingSpec) -> tuple[np.ndarray, np.ndarray]:
    """Added-noise covariance ``E Cov(y_r) E^T`` of the displaced outputs.

    Returns:
        ``(diagonal, full matrix)``.
    """
    _, cov_y = r_covariance(A, spec)
    E = report.error_matrix
    M = E @ cov_y @ E.T
    M = 0.5 * (M + M.T)
    return np.diag(M).copy(), M
