"""Analytic references for the scalar linear-quadratic test problem.

All three oracles operate on the Euler-discretized chain

    x(s+1) = A x(s) + B u(s) + sigma sqrt(dt) eps(s),   A = 1 + a dt, B = b dt

with cost accumulated exactly as the sampling engine does: the running
cost ``q_x x^2 / 2`` is charged at post-step states (the final state pays
only the terminal ``q_T x^2 / 2``) and each control pays
``r u^2 dt / 2``. Sharing the discretization means comparisons against
the Monte Carlo engine isolate algorithmic error, not time
discretization error.

``leqg_gains_and_value`` solves the exponential-of-quadratic problem

    min_u  theta log E[ exp( J_u / theta ) ]

by the backward Riccati recursion with the noise-dependent correction:
at each stage the cost-to-go curvature W is inflated to
``W / (1 - W v / theta)`` with ``v = sigma^2 dt`` (the Gaussian
closed-form of the exponentiated quadratic), and the recursion aborts
with ``RiskBreakdown`` when the inflation denominator is not positive,
in which case the objective is infinite. The risk-neutral limit
``theta -> inf`` recovers the plain finite-horizon regulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import logsumexp

__all__ = ["ScalarLQProblem", "RiskBreakdown",
           "lqr_gains", "lqr_value", "leqg_gains_and_value",
           "free_energy_quadrature"]


class RiskBreakdown(ArithmeticError):
    """The exponentiated-cost expectation diverges at this risk parameter."""


@dataclass(frozen=True)
class ScalarLQProblem:
    """One dimensional linear dynamics with quadratic costs.

    ``dx = a x dt + b u dt + sigma dxi``; running cost
    ``(q_x x^2 + r u^2) / 2``, terminal cost ``q_T x^2 / 2``, horizon
    ``T`` discretized at step ``dt``.
    """

    a: float
    b: float
    sigma: float
    q_x: float
    r: float
    q_T: float
    T: float
    dt: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 < self.dt <= self.T:
            raise ValueError("need 0 < dt <= T")
        if self.q_x < 0 or self.q_T < 0:
            raise ValueError("state cost weights must be nonnegative")
        k = round(self.T / self.dt)
        if abs(k * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"dt={self.dt} does not divide T={self.T}")

    @property
    def K(self) -> int:
        return round(self.T / self.dt)

    @property
    def A(self) -> float:
        return 1.0 + self.a * self.dt

    @property
    def B(self) -> float:
        return self.b * self.dt

    @property
    def step_var(self) -> float:
        """Per-step noise variance ``sigma^2 dt``."""
        return self.sigma ** 2 * self.dt


def _backward(prob: ScalarLQProblem, theta: float | None):
    """Backward recursion; ``theta=None`` is the risk-neutral regulator.

    Returns (gains, P0, m0): feedback gains ``u = -g x`` per step, the
    quadratic value coefficient and the constant at step 0.
    """
    A, B, v, dt = prob.A, prob.B, prob.step_var, prob.dt
    K = prob.K
    P = prob.q_T
    m = 0.0
    gains = np.empty(K)
    for s in range(K - 1, -1, -1):
        W = P + (prob.q_x * dt if s + 1 <= K - 1 else 0.0)
        if theta is None:
            W_eff = W
            m += 0.5 * W * v
        else:
            shrink = W * v / theta
            if shrink >= 1.0:
                raise RiskBreakdown(
                    f"risk parameter theta={theta} is below the breakdown "
                    f"threshold at stage {s} (W v = {W * v})")
            W_eff = W / (1.0 - shrink)
            m += -0.5 * theta * math.log1p(-shrink)
        gains[s] = W_eff * A * B / (prob.r * dt + W_eff * B * B)
        P = A * A * W_eff * prob.r * dt / (prob.r * dt + W_eff * B * B)
    return gains, P, m


def lqr_gains(prob: ScalarLQProblem) -> np.ndarray:
    """Risk-neutral finite-horizon feedback gains ``u_s = -g_s x_s``."""
    gains, _, _ = _backward(prob, theta=None)
    return gains


def lqr_value(prob: ScalarLQProblem, x0: float) -> float:
    """Optimal expected cost from ``x0`` for the risk-neutral regulator."""
    _, P0, m0 = _backward(prob, theta=None)
    return 0.5 * P0 * x0 * x0 + m0


def leqg_gains_and_value(prob: ScalarLQProblem, theta: float,
                         x0: float) -> tuple[np.ndarray, float]:
    """Risk-averse gains and value ``min_u theta log E[exp(J_u/theta)]``.

    Raises:
        RiskBreakdown: the recursion diverges (theta too small; the
            objective is infinite).
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    gains, P0, m0 = _backward(prob, theta=theta)
    return gains, 0.5 * P0 * x0 * x0 + m0


def free_energy_quadrature(prob: ScalarLQProblem, steps: int,
                           lambda_eff: float, x0: float,
                           nodes: int = 64) -> float:
    """Exact soft-min free energy over the uncontrolled Euler chain.

    Evaluates ``-lambda log E[exp(-J0 / lambda)]`` for a horizon of at
    most 3 steps by tensorized Gauss-Hermite quadrature with ``nodes``
    points per step, where ``J0`` charges ``q_x x^2/2`` at interior
    post-step states and ``q_T x^2/2`` at the final one.
    """
    if steps not in (1, 2, 3):
        raise ValueError("quadrature supports 1 to 3 steps")
    if not lambda_eff > 0:
        raise ValueError("lambda_eff must be positive")
    if nodes < 64:
        raise ValueError("use at least 64 quadrature nodes per step")
    z, w = hermegauss(nodes)
    logw = np.log(w / math.sqrt(2.0 * math.pi))
    A, dt = prob.A, prob.dt
    scale = prob.sigma * math.sqrt(dt)

    def q_term(x, s):
        if s < steps:
            return 0.5 * prob.q_x * x * x * dt
        return 0.5 * prob.q_T * x * x

    if steps == 1:
        x1 = A * x0 + scale * z
        logJ = -q_term(x1, 1) / lambda_eff + logw
        return float(-lambda_eff * logsumexp(logJ))
    if steps == 2:
        x1 = A * x0 + scale * z
        x2 = A * x1[:, None] + scale * z[None, :]
        J = q_term(x1, 1)[:, None] + q_term(x2, 2)
        lw = logw[:, None] + logw[None, :]
        return float(-lambda_eff * logsumexp(-J / lambda_eff + lw))
    x1 = A * x0 + scale * z
    x2 = A * x1[:, None] + scale * z[None, :]
    x3 = A * x2[:, :, None] + scale * z[None, None, :]
    J = (q_term(x1, 1)[:, None, None] + q_term(x2, 2)[:, :, None]
         + q_term(x3, 3))
    lw = (logw[:, None, None] + logw[None, :, None] + logw[None, None, :])
    return float(-lambda_eff * logsumexp(-J / lambda_eff + lw))
