"""Random-restart least-squares search for teleporting weight/phase settings."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linear import batched_pipeline
from .roles import Port, RoleAssignment

WEIGHT_BOUND = 3.0
SOLVED = 1e-6
_PENALTY = 10.0


@dataclass(frozen=True)
class FeasibleSolution:
    weights: np.ndarray  # n x n adjacency
    phases: tuple[float, ...]
    roles: RoleAssignment
    objective: float
    restarts_used: int


def bqt_role_candidates(n: int, n_inputs: int = 2) -> list[RoleAssignment]:
    """Every role split of an ``n``-node cluster, up to node relabeling.

    Weights are searched over all node pairs, so which nodes receive the
    inputs is a relabeling gauge; inputs go to nodes ``1`` and ``n`` (or just
    ``1`` for a single input). Outputs may be unattached nodes or ports of
    another party's coupling.
    """
    owners = "AB"[:n_inputs]
    if n_inputs == 1:
        attach = (("A", 1),)
    elif n_inputs == 2:
        attach = (("A", 1), ("B", n))
    else:
        raise ValueError("only one or two inputs are supported")
    attached = {j for _, j in attach}
    free_nodes = [j for j in range(1, n + 1) if j not in attached]
    candidates = []
    for outs in itertools.permutations(free_nodes + [Port(o, s) for o in owners for s in ("in", "node")], n_inputs):
        if any(isinstance(p, Port) and p.owner == owners[k] for k, p in enumerate(outs)):
            continue
        meas = tuple(j for j in free_nodes if j not in outs)
        roles = RoleAssignment(attach, tuple(outs), meas)
        try:
            roles.validate(n)
        except ValueError:
            continue
        candidates.append(roles)
    return candidates


class _Problem:
    def __init__(self, n: int, roles: RoleAssignment):
        self.n = n
        self.roles = roles
        self.iu = np.triu_indices(n, 1)
        self.n_w = len(self.iu[0])
        self.n_p = len(roles.measured_modes())
        self.target = np.eye(2 * roles.n_inputs).ravel()

    def unpack(self, theta):
        B = theta.shape[0]
        A = np.zeros((B, self.n, self.n))
        A[:, self.iu[0], self.iu[1]] = theta[:, : self.n_w]
        A = A + np.swapaxes(A, 1, 2)
        return A, theta[:, self.n_w:]

    def residuals(self, theta):
        A, ph = self.unpack(theta)
        res = batched_pipeline(A, ph, self.roles)
        r = res.input_coeff.reshape(len(theta), -1) - self.target
        r[res.degenerate] = _PENALTY
        return np.nan_to_num(r, nan=_PENALTY, posinf=_PENALTY, neginf=-_PENALTY)

    def project(self, theta):
        theta = theta.copy()
        theta[:, : self.n_w] = np.clip(theta[:, : self.n_w], -WEIGHT_BOUND, WEIGHT_BOUND)
        # wrap phases into (-pi, pi]
        ph = theta[:, self.n_w:]
        theta[:, self.n_w:] = math.pi - np.mod(math.pi - ph, 2 * math.pi)
        return theta

    def sample(self, rng, count):
        w = rng.uniform(-WEIGHT_BOUND, WEIGHT_BOUND, size=(count, self.n_w))
        p = rng.uniform(-math.pi, math.pi, size=(count, self.n_p))
        return np.hstack([w, p])


def _levenberg_marquardt(problem: _Problem, theta, iters: int = 80, h: float = 1e-7):
    """Batched Levenberg-Marquardt with forward-difference Jacobians."""
    B, p = theta.shape
    r = problem.residuals(theta)
    cost = np.einsum("br,br->b", r, r)
    lam = np.full(B, 1e-2)
    active = np.ones(B, dtype=bool)
    for _ in range(iters):
        active &= cost > 1e-20
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        th = theta[idx]
        r0 = r[idx]
        J = np.empty((idx.size, r0.shape[1], p))
        for k in range(p):
            tp = th.copy()
            tp[:, k] += h
            J[:, :, k] = (problem.residuals(tp) - r0) / h
        JtJ = np.swapaxes(J, 1, 2) @ J
        g = np.einsum("brp,br->bp", J, r0)
        damp = lam[idx, None] * (np.einsum("bii->bi", JtJ) + 1e-6)
        Ad = JtJ.copy()
        Ad[:, np.arange(p), np.arange(p)] += damp
        try:
            step = np.linalg.solve(Ad, -g[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = -g * 1e-3
        cand = problem.project(th + step)
        rc = problem.residuals(cand)
        cc = np.einsum("br,br->b", rc, rc)
        better = cc < cost[idx]
        bi = idx[better]
        theta[bi] = cand[better]
        r[bi] = rc[better]
        cost[bi] = cc[better]
        lam[bi] = np.maximum(lam[bi] / 3.0, 1e-12)
        wi = idx[~better]
        lam[wi] = lam[wi] * 4.0
        active[wi] &= lam[wi] < 1e10
    return theta, cost


def _run_chunk(problem: _Problem, seed, count: int, iters: int):
    rng = np.random.default_rng(seed)
    theta = problem.sample(rng, count)
    theta, cost = _levenberg_marquardt(problem, theta, iters)
    k = int(np.argmin(cost))
    return float(cost[k]), theta[k]


def feasibility_search(
    n: int,
    roles: RoleAssignment | None = None,
    search_budget: int = 1000,
    rng_seed: int = 0,
    *,
    chunk_size: int = 500,
    iters: int = 80,
    workers: int = 1,
) -> FeasibleSolution | None:
    """Look for weights and phases that teleport every input to its output.

    Restarts draw weights in ``[-3, 3]`` and phases in ``(-pi, pi]`` and run a
    local least-squares fit of the input coefficients to the identity. When
    ``roles`` is None every role split from :func:`bqt_role_candidates` is
    searched, with the budget dealt round-robin across them. Returns the
    first solution with objective below ``1e-6``; ``None`` means only that
    none was found under the budget.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    if roles is not None:
        roles.validate(n)
        candidates = [roles]
    else:
        candidates = bqt_role_candidates(n)
        if not candidates:
            raise ValueError(f"no consistent role assignment on {n} nodes")
    problems = [_Problem(n, r) for r in candidates]

    jobs = []
    remaining = search_budget
    while remaining > 0:
        for prob in problems:
            if remaining <= 0:
                break
            count = min(chunk_size, remaining)
            jobs.append((prob, count))
            remaining -= count
    seeds = np.random.SeedSequence(rng_seed).spawn(len(jobs))

    used = 0
    # jobs run in waves of `workers`; early exit is decided in job order
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for start in range(0, len(jobs), max(1, workers)):
            wave = list(zip(jobs[start:start + workers], seeds[start:start + workers]))
            results = list(pool.map(lambda js: _run_chunk(js[0][0], js[1], js[0][1], iters), wave))
            for ((prob, count), _), (cost, theta) in zip(wave, results):
                used += count
                if cost < SOLVED:
                    A, ph = prob.unpack(theta[None])
                    return FeasibleSolution(A[0], tuple(float(t) for t in ph[0]), prob.roles, cost, used)
    return None
