"""Running, terminal and control costs, and trajectory-cost accumulation.

The navigation cost is

    q(x) = c1 * ||x - x*||_2 + c2 * q_o(x) + c3 * q_b(x)

where ``x*`` is the target embedded in the state space with zero
velocity / orientation components, ``q_o`` is 1 on the (closed) obstacle
rectangle and ``q_b`` is 1 strictly outside the boundary rectangle.
Position is carried in the first two state entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "CostError", "Rect", "CostModel",
    "navigation_cost", "quadratic_cost",
    "state_cost", "control_cost", "trajectory_cost",
]


class CostError(ValueError):
    """Invalid cost parameters or malformed cost queries."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by lower-left and upper-right corners."""

    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self):
        if not (self.lo[0] < self.hi[0] and self.lo[1] < self.hi[1]):
            raise CostError(f"degenerate rectangle lo={self.lo} hi={self.hi}")

    def contains(self, px: np.ndarray, py: np.ndarray) -> np.ndarray:
        """Closed-set membership for point coordinates (broadcasts)."""
        return ((px >= self.lo[0]) & (px <= self.hi[0])
                & (py >= self.lo[1]) & (py <= self.hi[1]))

    def strictly_inside(self, other: "Rect") -> bool:
        return (other.lo[0] < self.lo[0] and self.hi[0] < other.hi[0]
                and other.lo[1] < self.lo[1] and self.hi[1] < other.hi[1])


@dataclass(frozen=True)
class CostModel:
    """Immutable cost descriptor.

    ``q(x, t)`` is the state cost rate, ``psi(x)`` the terminal cost; both
    are vectorized over leading axes of ``x``. ``R`` is the symmetric
    positive definite control weight. The navigation fields are None for
    synthetic (for example quadratic) cost models.
    """

    q: Callable[[np.ndarray, float], np.ndarray] = field(repr=False)
    psi: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    R: np.ndarray = field(repr=False)
    c1: float | None = None
    c2: float | None = None
    c3: float | None = None
    target: np.ndarray | None = None
    goal_radius: float | None = None
    obstacle: Rect | None = None
    boundary: Rect | None = None
    terminal_weight: float | None = None

    @property
    def is_navigation(self) -> bool:
        return self.target is not None


def _check_spd(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise CostError(f"R must be square, got shape {R.shape}")
    if np.max(np.abs(R - R.T)) > 1e-12 * max(1.0, np.max(np.abs(R))):
        raise CostError("R must be symmetric")
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise CostError("R must be positive definite") from None
    out = R.copy()
    out.flags.writeable = False
    return out


def navigation_cost(state_dim: int, R: np.ndarray,
                    c1: float = 1e-2, c2: float = 1e2, c3: float = 1e2,
                    target: tuple[float, float] = (0.0, 0.0),
                    goal_radius: float = 0.5,
                    obstacle: Rect = Rect((-2.5, 0.5), (-0.5, 2.5)),
                    boundary: Rect = Rect((-5.0, -5.0), (5.0, 5.0)),
                    terminal_weight: float = 10.0) -> CostModel:
    """Navigation cost for the planar benchmarks.

    The terminal cost is ``terminal_weight * ||pos(x) - target||_2``, a
    pull toward the goal evaluated on the position components only.
    """
    if min(c1, c2, c3, terminal_weight) < 0:
        raise CostError("cost coefficients must be nonnegative")
    if not goal_radius > 0:
        raise CostError("goal_radius must be positive")
    if not obstacle.strictly_inside(boundary):
        raise CostError("obstacle must lie strictly inside the boundary")
    R = _check_spd(R)
    tgt = np.asarray(target, dtype=float)
    if tgt.shape != (2,):
        raise CostError("target must be a 2-vector")
    x_star = np.zeros(state_dim)
    x_star[:2] = tgt
    x_star.flags.writeable = False

    def q(x, t=0.0):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != state_dim:
            raise CostError(f"state dim {x.shape[-1]} != {state_dim}")
        diff = x - x_star
        d = np.sqrt(np.sum(diff * diff, axis=-1))
        px, py = x[..., 0], x[..., 1]
        in_obstacle = obstacle.contains(px, py)
        out_of_bounds = ~boundary.contains(px, py)
        return c1 * d + c2 * in_obstacle + c3 * out_of_bounds

    def psi(x):
        x = np.asarray(x, dtype=float)
        dx = x[..., 0] - tgt[0]
        dy = x[..., 1] - tgt[1]
        return terminal_weight * np.sqrt(dx * dx + dy * dy)

    return CostModel(q=q, psi=psi, R=R, c1=c1, c2=c2, c3=c3,
                     target=tgt, goal_radius=float(goal_radius),
                     obstacle=obstacle, boundary=boundary,
                     terminal_weight=float(terminal_weight))


def quadratic_cost(q_x: float, q_T: float, R: np.ndarray) -> CostModel:
    """Scalar quadratic cost ``q = q_x x^2 / 2``, ``psi = q_T x^2 / 2``.

    Oracle support for the one dimensional linear-quadratic test model.
    """
    if q_x < 0 or q_T < 0:
        raise CostError("quadratic weights must be nonnegative")
    R = _check_spd(np.atleast_2d(R))

    def q(x, t=0.0):
        x = np.asarray(x, dtype=float)
        return 0.5 * q_x * x[..., 0] ** 2

    def psi(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * q_T * x[..., 0] ** 2

    return CostModel(q=q, psi=psi, R=R)


def state_cost(cm: CostModel, x: np.ndarray, t: float = 0.0) -> np.ndarray:
    """State cost rate ``q(x, t)``; vectorized over leading axes."""
    return cm.q(np.asarray(x, dtype=float), t)


def control_cost(cm: CostModel, u: np.ndarray) -> np.ndarray:
    """Quadratic control cost ``u^T R u / 2``."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != cm.R.shape[0]:
        raise CostError(f"control dim {u.shape[-1]} != {cm.R.shape[0]}")
    return 0.5 * np.einsum("...i,ij,...j->...", u, cm.R, u)


def trajectory_cost(cm: CostModel, states, dt: float) -> float:
    """Accumulated cost of an uncontrolled path ``x_k .. x_K``.

    Returns ``psi(x_K) + sum_{s=k+1}^{K-1} q(x_s) dt``. The control term is
    deliberately absent: this prices sampled rollouts of the passive
    dynamics. A single-state path yields ``psi`` alone.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[0] == 0:
        raise CostError("states must be a non-empty sequence of state vectors")
    if not dt > 0:
        raise CostError(f"dt must be positive, got {dt}")
    total = float(cm.psi(states[-1]))
    if states.shape[0] > 2:
        total += float(np.sum(cm.q(states[1:-1], 0.0))) * dt
    return total
