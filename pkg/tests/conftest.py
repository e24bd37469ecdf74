import math

import numpy as np
import pytest

from cvbqt.protocol import ProtocolConfig

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def canonical():
    return ProtocolConfig()


def error_matrix_closed_form(g14, g24, g34, g45):
    """Closed-form error matrix, transcribed entry by entry."""
    return np.array([
        [-2 - g14**2, -g14 * g24, -g14 * g34, -g24, -g14 * g45],
        [-g14 * g45, -g24 * g45, -g34 * g45, -g34, -2 - g45**2],
        [g14 * g24, 2 + g24**2, g24 * g34, g14, g24 * g45],
        [g14 * g34, g24 * g34, 2 + g34**2, g45, g34 * g45],
    ])


def reference_photocurrent_terms(g14, g24, g34, g45, charlie_scale=math.sqrt(2)):
    """Photocurrent coefficients of the output relation over (i_a, i_A1, i_b, i_B2, i_C).

    ``charlie_scale`` is the reference factor in front of ``g * i_C``.
    """
    s = charlie_scale
    return np.array([
        [-1, -1, 0, 0, -s * g14],
        [0, 0, -1, -1, -s * g45],
        [1, -1, 0, 0, s * g24],
        [0, 0, 1, -1, s * g34],
    ], dtype=float)
