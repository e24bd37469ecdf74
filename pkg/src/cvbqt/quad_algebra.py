"""Heisenberg-picture linear algebra over labeled quadrature symbols.

Every quadrature that appears in the protocol is an exact real linear
combination of a small set of independent symbols: the input-state
quadratures, the squeezed (or r-basis) oscillator quadratures and the
classical photocurrents. :class:`LinForm` holds such a combination and
:class:`QuadMode` pairs the x- and y-forms of one optical mode.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

ZERO_TOL = 1e-12
COND_LIMIT = 1e12


class DegenerateMeasurementError(ValueError):
    """Raised when a measurement set cannot be solved for the requested symbols."""


class Kind(enum.Enum):
    INPUT_X = "x_in"
    INPUT_Y = "y_in"
    SQ_X = "x_s"
    SQ_Y = "y_s"
    R_X = "x_r"
    R_Y = "y_r"
    PHOTOCURRENT = "i"


_KIND_ORDER = {k: n for n, k in enumerate(Kind)}


@dataclass(frozen=True)
class BasisLabel:
    """Identity of one independent symbol.

    ``key`` is the owner (``"A"``/``"B"``) for inputs, a 1-based index for
    squeezed and r-basis oscillators, and a free-form tag for photocurrents.
    """

    kind: Kind
    key: str | int

    def __str__(self) -> str:
        return f"{self.kind.value}[{self.key}]"

    def sort_key(self) -> tuple:
        return (_KIND_ORDER[self.kind], str(type(self.key)), self.key)

    @property
    def is_photocurrent(self) -> bool:
        return self.kind is Kind.PHOTOCURRENT


def input_x(owner: str) -> BasisLabel:
    return BasisLabel(Kind.INPUT_X, owner)


def input_y(owner: str) -> BasisLabel:
    return BasisLabel(Kind.INPUT_Y, owner)


def sq_x(index: int) -> BasisLabel:
    return BasisLabel(Kind.SQ_X, index)


def sq_y(index: int) -> BasisLabel:
    return BasisLabel(Kind.SQ_Y, index)


def r_x(index: int) -> BasisLabel:
    return BasisLabel(Kind.R_X, index)


def r_y(index: int) -> BasisLabel:
    return BasisLabel(Kind.R_Y, index)


def photocurrent(tag: str) -> BasisLabel:
    return BasisLabel(Kind.PHOTOCURRENT, tag)


def _pruned(terms: Mapping[BasisLabel, float]) -> dict[BasisLabel, float]:
    return {k: float(v) for k, v in terms.items() if abs(v) >= ZERO_TOL}


@dataclass(frozen=True, eq=False)
class LinForm:
    """Immutable real linear combination ``sum_k c_k * label_k + constant``."""

    terms: Mapping[BasisLabel, float] = field(default_factory=dict)
    constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", MappingProxyType(_pruned(self.terms)))
        c = float(self.constant)
        object.__setattr__(self, "constant", c if abs(c) >= ZERO_TOL else 0.0)

    @classmethod
    def symbol(cls, label: BasisLabel, coeff: float = 1.0) -> LinForm:
        return cls({label: coeff})

    @classmethod
    def zero(cls) -> LinForm:
        return cls()

    def coeff(self, label: BasisLabel) -> float:
        return self.terms.get(label, 0.0)

    @property
    def labels(self) -> list[BasisLabel]:
        return sorted(self.terms, key=BasisLabel.sort_key)

    def is_zero(self, tol: float = ZERO_TOL) -> bool:
        return abs(self.constant) < tol and all(abs(v) < tol for v in self.terms.values())

    def allclose(self, other: LinForm, tol: float = 1e-9) -> bool:
        return (self - other).is_zero(tol)

    def substitute(self, solutions: Mapping[BasisLabel, LinForm]) -> LinForm:
        """Replace each label in ``solutions`` by its form."""
        out = LinForm({k: v for k, v in self.terms.items() if k not in solutions}, self.constant)
        for label, form in solutions.items():
            c = self.terms.get(label)
            if c is not None:
                out = combine(out, 1.0, form, c)
        return out

    def __add__(self, other: LinForm) -> LinForm:
        return combine(self, 1.0, other, 1.0)

    def __sub__(self, other: LinForm) -> LinForm:
        return combine(self, 1.0, other, -1.0)

    def __neg__(self) -> LinForm:
        return combine(self, -1.0, LinForm(), 0.0)

    def __mul__(self, scalar: float) -> LinForm:
        return combine(self, scalar, LinForm(), 0.0)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> LinForm:
        return combine(self, 1.0 / scalar, LinForm(), 0.0)

    def __repr__(self) -> str:
        parts = [f"{self.terms[k]:+.6g}*{k}" for k in self.labels]
        if self.constant or not parts:
            parts.append(f"{self.constant:+.6g}")
        return "LinForm(" + " ".join(parts) + ")"


def combine(a: LinForm, ca: float, b: LinForm, cb: float) -> LinForm:
    """Return ``ca*a + cb*b``, dropping coefficients below the pruning tolerance."""
    terms: dict[BasisLabel, float] = {}
    if ca:
        for k, v in a.terms.items():
            terms[k] = ca * v
    if cb:
        for k, v in b.terms.items():
            terms[k] = terms.get(k, 0.0) + cb * v
    return LinForm(terms, ca * a.constant + cb * b.constant)


@dataclass(frozen=True)
class QuadMode:
    """Heisenberg-picture optical mode as an (x-form, y-form) pair."""

    x: LinForm
    y: LinForm

    @classmethod
    def elementary(cls, x_label: BasisLabel, y_label: BasisLabel) -> QuadMode:
        return cls(LinForm.symbol(x_label), LinForm.symbol(y_label))

    @classmethod
    def zero(cls) -> QuadMode:
        return cls(LinForm(), LinForm())

    def __add__(self, other: QuadMode) -> QuadMode:
        return QuadMode(self.x + other.x, self.y + other.y)

    def __sub__(self, other: QuadMode) -> QuadMode:
        return QuadMode(self.x - other.x, self.y - other.y)

    def __mul__(self, scalar: float) -> QuadMode:
        return QuadMode(self.x * scalar, self.y * scalar)

    __rmul__ = __mul__

    def allclose(self, other: QuadMode, tol: float = 1e-9) -> bool:
        return self.x.allclose(other.x, tol) and self.y.allclose(other.y, tol)


def apply_complex_linear(U, modes: Sequence[QuadMode]) -> list[QuadMode]:
    """Apply ``x' + i y' = U (x + i y)`` to a list of modes."""
    U = np.asarray(U, dtype=complex)
    n = len(modes)
    if U.ndim != 2 or U.shape != (n, n):
        raise ValueError(f"matrix of shape {U.shape} cannot act on {n} modes")
    out = []
    for j in range(n):
        x, y = LinForm(), LinForm()
        for k, m in enumerate(modes):
            re, im = U[j, k].real, U[j, k].imag
            if re:
                x = combine(x, 1.0, m.x, re)
                y = combine(y, 1.0, m.y, re)
            if im:
                x = combine(x, 1.0, m.y, -im)
                y = combine(y, 1.0, m.x, im)
        out.append(QuadMode(x, y))
    return out


def beamsplitter_pair(m1: QuadMode, m2: QuadMode) -> tuple[QuadMode, QuadMode]:
    """Symmetric 50:50 beam splitter ``(m1 + m2)/sqrt2, (m1 - m2)/sqrt2``."""
    s = 1.0 / math.sqrt(2.0)
    return (m1 + m2) * s, (m1 - m2) * s


def homodyne_form(m: QuadMode, theta: float, beta0: float = 1.0) -> LinForm:
    """Photocurrent operator ``beta0 * (cos(theta) x + sin(theta) y)``."""
    if beta0 <= 0:
        raise ValueError("local-oscillator amplitude beta0 must be positive")
    return combine(m.x, beta0 * math.cos(theta), m.y, beta0 * math.sin(theta))


def eliminate(
    measured: Sequence[tuple[LinForm, str | BasisLabel]],
    targets: Sequence[LinForm],
    eliminate_labels: Sequence[BasisLabel],
) -> list[LinForm]:
    """Solve a homodyne record for ``eliminate_labels`` and substitute into ``targets``.

    Each measured form is equated to its photocurrent symbol. The square
    system in the eliminated labels is solved with a pivoted LU factorization;
    every other symbol, including the photocurrents, is carried along.

    Raises:
        DegenerateMeasurementError: if the system is not square or its
            condition number exceeds ``COND_LIMIT``.
    """
    labels = list(eliminate_labels)
    if len(measured) != len(labels):
        raise DegenerateMeasurementError(
            f"degenerate measurement set: {len(measured)} equations for "
            f"{len(labels)} unknowns ({', '.join(map(str, labels))})"
        )
    if not labels:
        return list(targets)

    currents = [tag if isinstance(tag, BasisLabel) else photocurrent(tag) for _, tag in measured]
    elim = set(labels)
    P = np.array([[form.coeff(lab) for lab in labels] for form, _ in measured])
    cond = np.linalg.cond(P)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        _, _, vt = np.linalg.svd(P)
        null = vt[-1]
        offending = [str(lab) for lab, c in zip(labels, null) if abs(c) > 1e-6]
        raise DegenerateMeasurementError(
            f"degenerate measurement set (cond={cond:.3g}); cannot solve for "
            + ", ".join(offending or map(str, labels))
        )

    # rhs_k = i_k - (measured_k restricted to non-eliminated symbols)
    rhs = []
    for (form, _), cur in zip(measured, currents):
        rest = LinForm({k: v for k, v in form.terms.items() if k not in elim}, form.constant)
        rhs.append(combine(LinForm.symbol(cur), 1.0, rest, -1.0))

    lu = scipy.linalg.lu_factor(P)
    inv = scipy.linalg.lu_solve(lu, np.eye(len(labels)))
    solutions = {}
    for j, lab in enumerate(labels):
        sol = LinForm()
        for k, r in enumerate(rhs):
            if inv[j, k]:
                sol = combine(sol, 1.0, r, inv[j, k])
        solutions[lab] = sol
    return [t.substitute(solutions) for t in targets]


def variance_of(
    f: LinForm,
    var: Mapping[BasisLabel, float],
    cov: Mapping[tuple[BasisLabel, BasisLabel], float] | None = None,
) -> float:
    """Variance of a form whose symbols have the given (co)variances.

    Cross terms are zero unless supplied in ``cov`` (either key order).
    """
    labels = f.labels
    for lab in labels:
        if lab.is_photocurrent:
            raise ValueError(f"form still depends on photocurrent {lab}")
        if lab not in var:
            raise KeyError(f"no variance entry for {lab}")
    c = np.array([f.coeff(lab) for lab in labels])
    C = np.diag([float(var[lab]) for lab in labels])
    if cov:
        for j, a in enumerate(labels):
            for k, b in enumerate(labels):
                if j != k:
                    v = cov.get((a, b), cov.get((b, a)))
                    if v is not None:
                        C[j, k] = v
    return float(c @ C @ c)


def coefficient_matrix(forms: Iterable[LinForm], labels: Sequence[BasisLabel]) -> np.ndarray:
    """Rows of coefficients of ``forms`` over ``labels``."""
    return np.array([[f.coeff(lab) for lab in labels] for f in forms], dtype=float)


def symplectic_bracket(modes: Sequence[QuadMode], pairs: Sequence[tuple[BasisLabel, BasisLabel]]) -> np.ndarray:
    """Formal commutator matrix ``[x_j, y_k]`` in units of ``i/2``.

    ``pairs`` lists the conjugate (x, y) label pairs of the underlying basis.
    """
    xl = [p[0] for p in pairs]
    yl = [p[1] for p in pairs]
    X = coefficient_matrix([m.x for m in modes], xl)
    Xp = coefficient_matrix([m.x for m in modes], yl)
    Y = coefficient_matrix([m.y for m in modes], xl)
    Yp = coefficient_matrix([m.y for m in modes], yl)
    return X @ Yp.T - Xp @ Y.T
