"""TDoA position estimation by gradient descent on the range-difference loss.

The altitude is taken from the altimeter and held fixed; only the
horizontal position is searched unless ``solve_3d`` is requested.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measurement import TdoaMeasurement

STALL_RTOL = 1e-13
# sufficient-decrease fraction; caps the step below 2/curvature so the
# search cannot zigzag at the stability edge of a narrow valley
ARMIJO_C = 0.3


@dataclass(frozen=True)
class SolverConfig:
    step_size: float = 0.5
    max_iterations: int = 500
    grad_tolerance: float = 1e-6
    gps_prior_std: float = 5.0
    altitude_noise_std: float = 1.0
    weighted: bool = False
    solve_3d: bool = False
    max_halvings: int = 20

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class PositionEstimate:
    xy: np.ndarray
    z: float
    iterations: int
    converged: bool
    residual: float
    loss_history: tuple[float, ...] = ()


class TdoaLoss:
    """``L(p) = sum_i w_i (r_i - (|p - x_i| - |p - x_ref|))**2``."""

    def __init__(self, node_xyz, ref_xyz, range_diff, weights=None):
        self.nodes = np.asarray(node_xyz, dtype=float)
        self.ref = np.asarray(ref_xyz, dtype=float)
        self.r = np.asarray(range_diff, dtype=float)
        self.w = np.ones_like(self.r) if weights is None else np.asarray(weights, dtype=float)

    def residuals(self, p):
        dn = np.sqrt(((p - self.nodes) ** 2).sum(axis=1))
        dr = np.sqrt(((p - self.ref) ** 2).sum())
        return self.r - (dn - dr), dn, dr

    def value(self, p) -> float:
        res, _, _ = self.residuals(p)
        return float((self.w * res * res).sum())

    def value_and_grad(self, p):
        res, dn, dr = self.residuals(p)
        un = (p - self.nodes) / dn[:, None]
        ur = (p - self.ref) / dr
        wres = self.w * res
        grad = -2.0 * (wres[:, None] * (un - ur)).sum(axis=0)
        return float((wres * res).sum()), grad


def _gather(measurements, node_positions):
    if len(measurements) < 2:
        raise ValueError("need at least 2 range differences (3 nodes)")
    ref = measurements[0].node_pair[0]
    if any(m.node_pair[0] != ref for m in measurements):
        raise ValueError("all measurements must share one reference node")
    pos = node_positions
    nodes = np.array([pos[m.node_pair[1]] for m in measurements], dtype=float)
    r = np.array([m.range_diff for m in measurements], dtype=float)
    std = np.array([m.noise_std for m in measurements], dtype=float)
    return np.asarray(pos[ref], dtype=float), nodes, r, std


def localize(
    measurements: list[TdoaMeasurement],
    node_positions,
    init_xy,
    fixed_z: float,
    cfg: SolverConfig = SolverConfig(),
) -> PositionEstimate:
    """Backtracking gradient descent from ``init_xy``.

    ``node_positions`` maps node id to an (x, y, z) triple. The step is
    halved until the loss decreases by at least ``ARMIJO_C * alpha * |g|**2``;
    each line search starts from the Barzilai-Borwein step of the previous
    move (or ``step_size`` on the first iteration). The search converges
    when the gradient norm drops below ``grad_tolerance`` or the relative
    loss decrease falls under float resolution. A step that still fails after ``max_halvings`` halvings ends
    the search, converged only if the gradient is already small.
    """
    ref, nodes, r, std = _gather(measurements, node_positions)
    init_xy = np.asarray(init_xy, dtype=float)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(init_xy)) and np.isfinite(fixed_z)):
        raise ValueError("non-finite solver input")
    weights = None
    if cfg.weighted:
        weights = 1.0 / np.maximum(std, 1e-9) ** 2
        weights /= weights.mean()
    loss = TdoaLoss(nodes, ref, r, weights)

    dim = 3 if cfg.solve_3d else 2
    p = np.array([init_xy[0], init_xy[1], fixed_z], dtype=float)
    value, grad = loss.value_and_grad(p)
    if dim == 2:
        grad[2] = 0.0
    history = [value]
    alpha = cfg.step_size
    converged = False
    for _ in range(cfg.max_iterations):
        g = grad
        if np.sqrt(g @ g) < cfg.grad_tolerance:
            converged = True
            break
        for _ in range(cfg.max_halvings + 1):
            cand = p - alpha * g
            cand_value, cand_grad = loss.value_and_grad(cand)
            if cand_value < value - ARMIJO_C * alpha * (g @ g):
                break
            alpha *= 0.5
        else:
            # no descent step found: flat or numerically converged
            converged = bool(np.sqrt(g @ g) < 1e3 * cfg.grad_tolerance)
            break
        if dim == 2:
            cand_grad[2] = 0.0
        stalled = value - cand_value <= STALL_RTOL * max(value, 1e-300)
        s_vec, y_vec = cand - p, cand_grad - g
        p, value, grad = cand, cand_value, cand_grad
        history.append(value)
        if stalled:
            # loss no longer resolvable in floating point
            converged = True
            break
        # Barzilai-Borwein trial step for the next line search
        sy = s_vec @ y_vec
        alpha = float(np.clip((s_vec @ s_vec) / sy, 1e-8, 1e4)) if sy > 0 else 2.0 * alpha

    if converged and _degenerate(loss, p, dim):
        converged = False
    res, _, _ = loss.residuals(p)
    return PositionEstimate(
        xy=p[:2].copy(),
        z=float(p[2]),
        iterations=len(history) - 1,
        converged=converged,
        residual=float(np.sqrt(np.mean(res**2))),
        loss_history=tuple(history),
    )


def _degenerate(loss: TdoaLoss, p, dim: int) -> bool:
    dn = np.sqrt(((p - loss.nodes) ** 2).sum(axis=1))
    dr = np.sqrt(((p - loss.ref) ** 2).sum())
    J = (p - loss.nodes) / dn[:, None] - (p - loss.ref) / dr
    s = np.linalg.svd(J[:, :dim], compute_uv=False)
    return s[-1] < 1e-6 * max(s[0], 1e-300)


def initialize_from_gps(true_xy, cfg: SolverConfig, rng: np.random.Generator) -> np.ndarray:
    return np.asarray(true_xy, dtype=float) + cfg.gps_prior_std * rng.standard_normal(2)


def measure_altitude(true_h: float, cfg: SolverConfig, rng: np.random.Generator) -> float:
    return float(true_h + cfg.altitude_noise_std * rng.standard_normal())
