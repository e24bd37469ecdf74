import math

import numpy as np
import pytest

from cvbqt.cluster import SqueezingSpec
from cvbqt.protocol import (
    CANONICAL_PHASES,
    Port,
    ProtocolConfig,
    RoleAssignment,
    added_noise_fidelity,
    assemble_protocol,
    batched_pipeline,
    bqt_role_candidates,
    canonical_constraints,
    canonical_graph,
    check_bqt_condition,
    db_to_variance,
    error_variances,
    feasibility_search,
    run_bqt,
)
from cvbqt.quad_algebra import DegenerateMeasurementError, input_x, r_y

from conftest import error_matrix_closed_form, reference_photocurrent_terms

S = 1 / math.sqrt(2)
V = 0.025


def free_draws(rng, count=100):
    return rng.uniform(-2, 2, size=(count, 4))


class TestAssemble:
    def test_input_weight(self, canonical):
        modes = assemble_protocol(canonical)
        assert modes[Port("A", "in")].x.coeff(input_x("A")) == pytest.approx(S)

    def test_charlie_weight_in_bob_port(self):
        cfg = ProtocolConfig(free_weights=(0.3, 0.1, -0.4, 1.7))
        modes = assemble_protocol(cfg)
        assert modes[Port("B", "node")].x.coeff(r_y(4)) == pytest.approx(1.7 * S)

    def test_disconnected_inputs(self):
        A = np.zeros((5, 5))
        modes = assemble_protocol(ProtocolConfig(full_graph=A))
        b_in = modes[Port("B", "in")]
        from cvbqt.quad_algebra import r_x
        assert b_in.x.coeff(r_x(1)) == 0 and b_in.y.coeff(r_y(1)) == 0

    def test_attach_out_of_range(self, canonical):
        with pytest.raises(ValueError, match="out of range"):
            assemble_protocol(canonical, RoleAssignment((("A", 1), ("B", 6)), (2, 3), (4,)))


class TestRunBqt:
    def test_teleports(self, rng):
        for g in free_draws(rng, 10):
            r = run_bqt(ProtocolConfig(free_weights=g))
            assert np.allclose(r.input_coeff, np.eye(4), atol=1e-9)
            assert np.abs(r.residual_x).max(initial=0) < 1e-9

    def test_gains_cancel_photocurrents(self, rng):
        # charlie column carries g, not sqrt2 * g: see the oracle mean test
        for g in free_draws(rng, 10):
            r = run_bqt(ProtocolConfig(free_weights=g))
            assert np.allclose(r.gains, -reference_photocurrent_terms(*g, charlie_scale=1.0), atol=1e-9)

    def test_first_error_row(self):
        g = (0.7, -1.2, 0.4, 1.9)
        r = run_bqt(ProtocolConfig(free_weights=g))
        assert np.allclose(r.error_matrix[0], error_matrix_closed_form(*g)[0], atol=1e-12)

    def test_beta0_scales_gains(self):
        r1 = run_bqt(ProtocolConfig(free_weights=(1, 1, 1, 1)))
        r2 = run_bqt(ProtocolConfig(free_weights=(1, 1, 1, 1), beta0=2.5))
        assert np.allclose(r2.gains * 2.5, r1.gains)
        assert np.allclose(r2.error_matrix, r1.error_matrix)

    def test_labels(self, canonical):
        r = run_bqt(canonical)
        assert r.row_labels == ("X[2]", "X[3]", "Y[2]", "Y[3]")
        assert r.photocurrent_tags == ("a_in", "A1", "b_in", "B2", "C")

    def test_degenerate(self):
        with pytest.raises(DegenerateMeasurementError):
            run_bqt(ProtocolConfig(phases=(0, 0, 0, 0, 0)))

    def test_phase_count(self):
        with pytest.raises(ValueError, match="phases"):
            run_bqt(ProtocolConfig(phases=(0, 0, 0)))


class TestCheckCondition:
    def test_canonical(self, canonical):
        assert check_bqt_condition(run_bqt(canonical))

    def test_g13_breaks(self):
        A = canonical_graph((0, 0, 0, 0))
        A[0, 2] = A[2, 0] = 0.5
        assert not check_bqt_condition(run_bqt(ProtocolConfig(full_graph=A)))

    def test_theta5_breaks(self):
        phases = CANONICAL_PHASES[:4] + (math.pi / 4,)
        assert not check_bqt_condition(run_bqt(ProtocolConfig(free_weights=(0, 1, 1, 0), phases=phases)))

    def test_theta5_idle_when_node4_isolated(self):
        # node 4 decouples in the two-pair graph, so its readout phase is free
        phases = CANONICAL_PHASES[:4] + (math.pi / 4,)
        assert check_bqt_condition(run_bqt(ProtocolConfig(phases=phases)))


class TestCanonicalConstraints:
    def test_defaults(self):
        assert canonical_constraints(canonical_graph((0.3, 1, -1, 2)), CANONICAL_PHASES)

    def test_g12(self):
        A = canonical_graph((0, 0, 0, 0))
        A[0, 1] = A[1, 0] = 0.9
        assert not canonical_constraints(A, CANONICAL_PHASES)

    def test_theta1(self):
        assert not canonical_constraints(canonical_graph((0, 0, 0, 0)), (math.pi / 4,) + CANONICAL_PHASES[1:])


class TestErrorVariances:
    spec = SqueezingSpec(V)

    def diag(self, g):
        cfg = ProtocolConfig(free_weights=g)
        return error_variances(run_bqt(cfg), cfg.adjacency(), self.spec)[0]

    def test_linear_ends(self):
        assert np.allclose(self.diag((0, 1.3, -0.6, 0)), np.array([2, 2, 2 + 1.69, 2 + 0.36]) * V, atol=1e-12)

    def test_linear_centers(self):
        assert np.allclose(self.diag((0.8, 0, 0, -2.1)), np.array([2 + 0.64, 2 + 4.41, 2, 2]) * V, atol=1e-12)

    def test_two_pairs(self):
        assert np.allclose(self.diag((0, 0, 0, 0)), 2 * V * np.ones(4), atol=1e-12)

    def test_antisqueezing_irrelevant(self):
        cfg = ProtocolConfig(free_weights=(0.5, -0.3, 0.2, 1.1))
        r = run_bqt(cfg)
        a = error_variances(r, cfg.adjacency(), SqueezingSpec(V))[1]
        b = error_variances(r, cfg.adjacency(), SqueezingSpec(V, x_variance=50.0))[1]
        assert np.array_equal(a, b)

    def test_sign_flip_invariance(self, rng):
        for g in free_draws(rng, 20):
            base = self.diag(tuple(g))
            for k in range(4):
                flipped = g.copy()
                flipped[k] = -flipped[k]
                assert np.allclose(self.diag(tuple(flipped)), base, atol=1e-12)


def test_db_to_variance():
    assert db_to_variance(0) == 0.25
    assert db_to_variance(10) == pytest.approx(0.025, abs=1e-17)
    # 0.25 * 10**-1.55 evaluated at 30 digits
    assert db_to_variance(15.5) == pytest.approx(0.0070459573281611345, abs=1e-17)


def test_added_noise_fidelity():
    assert added_noise_fidelity(0, 0) == 1.0
    assert added_noise_fidelity(0.5, 0.5) == pytest.approx(0.5)
    d = 2 * db_to_variance(15.5)
    assert added_noise_fidelity(d, d) == pytest.approx(0.9725887253726935, abs=1e-14)
    with pytest.raises(ValueError):
        added_noise_fidelity(-0.1, 0)


def test_gauge_freedom(rng):
    for g in free_draws(rng, 100):
        assert check_bqt_condition(run_bqt(ProtocolConfig(free_weights=g)))


PERTURBATIONS = [("g", 1, 5), ("g", 2, 5), ("g", 1, 3), ("g", 2, 3), ("g", 1, 2), ("g", 3, 5)] + [
    ("theta", k, None) for k in range(5)
]


def perturbed(g, which, delta):
    kind, a, b = which
    A = canonical_graph(g)
    phases = list(CANONICAL_PHASES)
    if kind == "g":
        A[a - 1, b - 1] += delta
        A[b - 1, a - 1] += delta
    else:
        phases[a] += delta
    return ProtocolConfig(full_graph=A, phases=tuple(phases))


@pytest.mark.parametrize("which", PERTURBATIONS, ids=lambda w: f"{w[0]}{w[1]}{w[2] or ''}")
def test_single_constraint_necessity(which, rng):
    for g in free_draws(rng, 10):
        for delta in (0.05, -0.05, rng.uniform(0.05, 1.0)):
            assert not check_bqt_condition(run_bqt(perturbed(g, which, delta)))


def test_error_matrix_regression(rng):
    for g in free_draws(rng, 100):
        r = run_bqt(ProtocolConfig(free_weights=g))
        assert np.max(np.abs(r.error_matrix - error_matrix_closed_form(*g))) < 1e-9


def test_batched_matches_symbolic(rng):
    for _ in range(20):
        w = np.triu(rng.uniform(-2, 2, (5, 5)), 1)
        A = w + w.T
        ph = rng.uniform(-math.pi, math.pi, 5)
        r = run_bqt(ProtocolConfig(full_graph=A, phases=tuple(ph)))
        b = batched_pipeline(A, ph, RoleAssignment.standard())
        assert np.allclose(b.input_coeff[0], r.input_coeff, atol=1e-9)
        assert np.allclose(b.gains[0], r.gains, atol=1e-9)
        assert np.allclose(b.error_matrix[0], r.error_matrix, atol=1e-9)


class TestRoles:
    def test_overlap(self):
        with pytest.raises(ValueError, match="disjoint"):
            RoleAssignment((("A", 1), ("B", 5)), (1, 3), (4,)).validate(5)

    def test_missing_node(self):
        with pytest.raises(ValueError, match="no role"):
            RoleAssignment((("A", 1), ("B", 5)), (2, 3), ()).validate(5)

    def test_own_port(self):
        with pytest.raises(ValueError, match="own sender"):
            RoleAssignment((("A", 1), ("B", 3)), (Port("A", "in"), 2), ()).validate(3)

    def test_three_node_candidates_are_consistent(self):
        cands = bqt_role_candidates(3)
        assert cands
        for r in cands:
            r.validate(3)
            assert len(r.measured_modes()) == 3


class TestFeasibility:
    def test_five_node_standard_roles(self):
        sol = feasibility_search(5, RoleAssignment.standard(), 1000, rng_seed=3)
        assert sol is not None and sol.objective < 1e-6
        r = run_bqt(ProtocolConfig(full_graph=sol.weights, phases=sol.phases))
        assert check_bqt_condition(r, tol=1e-5)

    def test_traditional_teleportation(self):
        roles = RoleAssignment((("A", 1),), (2,), ())
        sol = feasibility_search(2, roles, 500, rng_seed=0)
        assert sol is not None
        r = run_bqt(ProtocolConfig(full_graph=sol.weights, phases=sol.phases), roles)
        assert check_bqt_condition(r, tol=1e-5)

    def test_three_node_small_budget(self):
        assert feasibility_search(3, None, 800, rng_seed=0, chunk_size=100) is None

    def test_inconsistent_roles(self):
        with pytest.raises(ValueError):
            feasibility_search(3, RoleAssignment((("A", 1), ("B", 3)), (2, 3), ()), 10)

    def test_deterministic(self):
        a = feasibility_search(5, RoleAssignment.standard(), 500, rng_seed=11)
        b = feasibility_search(5, RoleAssignment.standard(), 500, rng_seed=11)
        assert (a is None) == (b is None)
        if a is not None:
            assert np.array_equal(a.weights, b.weights) and a.phases == b.phases
