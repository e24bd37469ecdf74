"""Configuration and role bookkeeping for teleportation on a cluster."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from ..cluster import SqueezingSpec, validate_graph

CANONICAL_PHASES = (-math.pi / 4, math.pi / 4, -math.pi / 4, math.pi / 4, 0.0)
FREE_WEIGHT_NAMES = ("g14", "g24", "g34", "g45")


@dataclass(frozen=True)
class Port:
    """Beam-splitter output port of an input coupling.

    ``side="in"`` is the ``(input + node)/sqrt2`` port, ``side="node"`` the
    ``(input - node)/sqrt2`` port.
    """

    owner: str
    side: str

    def __post_init__(self):
        if self.side not in ("in", "node"):
            raise ValueError(f"port side must be 'in' or 'node', got {self.side!r}")

    def __str__(self) -> str:
        return f"{self.owner}:{self.side}"


ModeRef = Union[int, Port]


@dataclass(frozen=True)
class RoleAssignment:
    """Which cluster nodes receive inputs, which are read out, which are measured.

    Outputs are listed so that output ``k`` is meant to receive the state of
    input ``k``. Measured modes are every post-coupling mode not listed as an
    output, ordered as: for each coupling its ``in`` then ``node`` port, then
    ``measured_nodes`` in the given order. Phases follow the same order.
    """

    input_attach: tuple[tuple[str, int], ...] = (("A", 1), ("B", 5))
    output_nodes: tuple[ModeRef, ...] = (2, 3)
    measured_nodes: tuple[int, ...] = (4,)

    @classmethod
    def standard(cls) -> RoleAssignment:
        return cls()

    @property
    def owners(self) -> list[str]:
        return [o for o, _ in self.input_attach]

    @property
    def n_inputs(self) -> int:
        return len(self.input_attach)

    def validate(self, n: int) -> None:
        """Raise ``ValueError`` unless the roles partition an ``n``-node cluster."""
        owners = self.owners
        if len(set(owners)) != len(owners):
            raise ValueError("input owners must be distinct")
        attach = [j for _, j in self.input_attach]
        out_nodes = [o for o in self.output_nodes if isinstance(o, int)]
        for j in attach + out_nodes + list(self.measured_nodes):
            if not 1 <= j <= n:
                raise ValueError(f"node {j} out of range 1..{n}")
        used = attach + out_nodes + list(self.measured_nodes)
        if len(set(used)) != len(used):
            raise ValueError("attach, output and measured nodes must be disjoint")
        if set(used) != set(range(1, n + 1)):
            missing = sorted(set(range(1, n + 1)) - set(used))
            raise ValueError(f"nodes {missing} have no role")
        if len(set(self.output_nodes)) != len(self.output_nodes):
            raise ValueError("outputs must be distinct")
        for k, p in enumerate(self.output_nodes):
            if isinstance(p, Port):
                if p.owner not in owners:
                    raise ValueError(f"output port {p} belongs to no input coupling")
                if p.owner == owners[k]:
                    raise ValueError(f"output {k} cannot be a port of its own sender {p.owner}")
        if len(self.output_nodes) != self.n_inputs:
            raise ValueError("need exactly one output per input")
        if self.n_inputs == 0:
            raise ValueError("at least one input is required")

    def measured_modes(self) -> list[ModeRef]:
        outs = set(self.output_nodes)
        modes: list[ModeRef] = []
        for owner, _ in self.input_attach:
            for side in ("in", "node"):
                p = Port(owner, side)
                if p not in outs:
                    modes.append(p)
        modes.extend(self.measured_nodes)
        return modes

    def photocurrent_tags(self) -> list[str]:
        tags = []
        ordinal = {o: k + 1 for k, o in enumerate(self.owners)}
        many = len(self.measured_nodes) > 1
        for m in self.measured_modes():
            if isinstance(m, Port):
                tags.append(f"{m.owner.lower()}_in" if m.side == "in" else f"{m.owner}{ordinal[m.owner]}")
            else:
                tags.append(f"C{m}" if many else "C")
        return tags


@dataclass(frozen=True)
class FreeWeights:
    """Weights left free by the canonical constraints."""

    g14: float = 0.0
    g24: float = 0.0
    g34: float = 0.0
    g45: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.g14, self.g24, self.g34, self.g45)

    @classmethod
    def from_seq(cls, seq) -> FreeWeights:
        return cls(*map(float, seq))


def canonical_graph(free: FreeWeights | tuple) -> np.ndarray:
    """Five-node adjacency with ``g12 = g35 = 1`` and the four free weights."""
    g14, g24, g34, g45 = free.as_tuple() if isinstance(free, FreeWeights) else free
    A = np.zeros((5, 5))
    for (j, k), g in {(1, 2): 1.0, (3, 5): 1.0, (1, 4): g14, (2, 4): g24, (3, 4): g34, (4, 5): g45}.items():
        A[j - 1, k - 1] = A[k - 1, j - 1] = g
    return A


@dataclass(frozen=True)
class ProtocolConfig:
    """Weights, homodyne phases, local-oscillator amplitude and squeezing."""

    free_weights: FreeWeights = field(default_factory=FreeWeights)
    full_graph: np.ndarray | None = None
    phases: tuple[float, ...] = CANONICAL_PHASES
    beta0: float = 1.0
    squeezing_db: float = 10.0
    input_means: tuple[tuple[float, float], tuple[float, float]] | None = None

    def __post_init__(self):
        if not isinstance(self.free_weights, FreeWeights):
            object.__setattr__(self, "free_weights", FreeWeights.from_seq(self.free_weights))
        if self.full_graph is not None:
            g = np.array(self.full_graph, dtype=float)
            validate_graph(g)
            g.setflags(write=False)
            object.__setattr__(self, "full_graph", g)
        object.__setattr__(self, "phases", tuple(float(t) for t in self.phases))
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if not math.isfinite(self.squeezing_db) or self.squeezing_db < 0:
            raise ValueError("squeezing_db must be finite and non-negative")

    def adjacency(self) -> np.ndarray:
        if self.full_graph is not None:
            return np.array(self.full_graph)
        return canonical_graph(self.free_weights)

    def squeezing(self) -> SqueezingSpec:
        return SqueezingSpec.from_db(self.squeezing_db)

    def replace(self, **changes) -> ProtocolConfig:
        return replace(self, **changes)


def db_to_variance(db: float) -> float:
    """Squeezed-quadrature variance ``0.25 * 10^(-db/10)``; 0 dB is vacuum."""
    if not math.isfinite(db):
        raise ValueError("squeezing in dB must be finite")
    return 0.25 * 10.0 ** (-db / 10.0)


def added_noise_fidelity(dx: float, dy: float) -> float:
    """Overlap of a coherent state with its copy carrying added noise ``dx``, ``dy``."""
    if dx < 0 or dy < 0:
        raise ValueError("added noise variances must be non-negative")
    return 1.0 / (2.0 * math.sqrt((0.5 + dx) * (0.5 + dy)))
