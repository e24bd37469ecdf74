"""Vectorized matrix form of the teleportation pipeline.

Same algebra as :func:`cvbqt.protocol.run_bqt`, but over dense coefficient
arrays and a leading batch axis, so that searches can evaluate thousands of
graphs at once. Symbol columns are ordered
``(x_in[0..m), y_in[0..m), x_r[0..n), y_r[0..n))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .roles import Port, RoleAssignment

COND_LIMIT = 1e12


@dataclass
class BatchPipeline:
    input_coeff: np.ndarray  # (B, 2m, 2m)
    gains: np.ndarray  # (B, 2m, n)
    error_matrix: np.ndarray  # (B, 2m, n)
    degenerate: np.ndarray  # (B,) bool


def batched_pipeline(A, phases, roles: RoleAssignment, beta0: float = 1.0) -> BatchPipeline:
    A = np.asarray(A, dtype=float)
    phases = np.asarray(phases, dtype=float)
    if A.ndim == 2:
        A = A[None]
    if phases.ndim == 1:
        phases = phases[None]
    B, n, _ = A.shape
    m = roles.n_inputs
    S = 2 * m + 2 * n
    xr = slice(2 * m, 2 * m + n)
    yr = slice(2 * m + n, S)
    eye = np.eye(n)

    Xc = np.zeros((B, n, S))
    Yc = np.zeros((B, n, S))
    Xc[:, :, xr] = eye
    Xc[:, :, yr] = -A
    Yc[:, :, yr] = eye
    Yc[:, :, xr] = A

    s = 1.0 / np.sqrt(2.0)
    modes: dict = {}
    attached = set()
    for k, (owner, j) in enumerate(roles.input_attach):
        ex = np.zeros(S)
        ey = np.zeros(S)
        ex[k] = 1.0
        ey[m + k] = 1.0
        modes[Port(owner, "in")] = ((ex + Xc[:, j - 1]) * s, (ey + Yc[:, j - 1]) * s)
        modes[Port(owner, "node")] = ((ex - Xc[:, j - 1]) * s, (ey - Yc[:, j - 1]) * s)
        attached.add(j)
    for j in range(1, n + 1):
        if j not in attached:
            modes[j] = (Xc[:, j - 1], Yc[:, j - 1])

    measured = roles.measured_modes()
    if phases.shape[1] != len(measured):
        raise ValueError(f"{len(measured)} phases required, got {phases.shape[1]}")
    c = np.cos(phases)[:, :, None]
    sn = np.sin(phases)[:, :, None]
    mx = np.stack([modes[r][0] for r in measured], axis=1)
    my = np.stack([modes[r][1] for r in measured], axis=1)
    q = beta0 * (c * mx + sn * my)  # (B, n, S)

    outs = [modes[o] for o in roles.output_nodes]
    O = np.stack([o[0] for o in outs] + [o[1] for o in outs], axis=1)  # (B, 2m, S)

    P = q[:, :, xr]
    Pinv, degenerate = _guarded_inverse(P)

    Qo = q.copy()
    Qo[:, :, xr] = 0.0
    R = O[:, :, xr]
    So = O.copy()
    So[:, :, xr] = 0.0
    T = R @ Pinv
    rest = So - T @ Qo
    return BatchPipeline(
        input_coeff=rest[:, :, : 2 * m],
        gains=-T,
        error_matrix=rest[:, :, yr],
        degenerate=degenerate,
    )


def _guarded_inverse(P):
    """Batched inverse plus a mask of entries whose 1-norm condition exceeds the limit.

    Degenerate entries get an identity inverse; callers must ignore them.
    """
    eye = np.eye(P.shape[-1])
    try:
        Pinv = np.linalg.inv(P)
    except np.linalg.LinAlgError:
        sv = np.linalg.svd(P, compute_uv=False)
        ok = sv[:, -1] > sv[:, 0] / COND_LIMIT
        Pinv = np.broadcast_to(eye, P.shape).copy()
        if ok.any():
            Pinv[ok] = np.linalg.inv(P[ok])
    with np.errstate(invalid="ignore", over="ignore"):
        cond = np.abs(P).sum(axis=1).max(axis=1) * np.abs(Pinv).sum(axis=1).max(axis=1)
    degenerate = ~np.isfinite(cond) | (cond > COND_LIMIT)
    if degenerate.any():
        Pinv[degenerate] = eye
    return Pinv, degenerate


def batched_r_cov_y(A) -> np.ndarray:
    """``(I + A^2)^(-1)`` per batch entry, in units of the squeezed variance."""
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    return np.linalg.inv(np.eye(n) + A @ A)
