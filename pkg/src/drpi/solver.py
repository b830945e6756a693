"""Robust master problem, free energy, weights and control assembly.

The KL-robust objective splits into a univariate master problem over a
risk parameter ``theta`` and, for each ``theta``, a risk-sensitive inner
problem. When a scalar ``theta*`` satisfies

    theta* G R^-1 G^T = Sigma Sigma^T

at every state, the inner problem is solvable by sampling the uncontrolled
dynamics: its value is the soft-min free energy

    F(lambda) = -lambda log( (1/M) sum_i exp(-J_i / lambda) )

of the sampled trajectory costs at the effective temperature

    lambda_eff(theta) = theta theta* / (theta - theta*),

which decreases from +inf (maximal risk aversion, F -> mean cost) down to
``theta*`` (risk neutral) as ``theta`` sweeps ``(theta*, inf)``. The master
problem is then

    minimize_theta  gamma * theta + F(lambda_eff(theta))

searched on a log grid in ``s = 1/lambda_eff in (0, 1/theta*)`` with
golden-section refinement; ``gamma = 0`` short-circuits to the risk-neutral
endpoint ``lambda_eff = theta*`` exactly. Trajectory weights are the
soft-min softmax ``r_i ~ exp(-J_i / lambda_eff)`` and the control is the
weight-averaged first-step noise mapped through the actuated channels.

This effective-temperature convention is pinned by an analytic oracle: the
soft-min free energy of uncontrolled rollouts must reproduce the
exponential-of-quadratic (risk-averse) value of the matching
linear-quadratic problem, and recover the classic risk-neutral
path-integral controller as the robustness radius vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .models import DynamicsModel, validation_states

__all__ = [
    "SingularTheta", "NoLinearizingTheta", "SingularProjection",
    "SearchConfig", "ThetaSolution",
    "theta_star", "effective_temperature", "free_energy",
    "master_objective", "solve_master",
    "path_integral_weights", "control_from_weights",
]

DELTA_SING = 1e-6            # exclusion margin around the lambda pole
_PROJECTION_COND_MAX = 1e12  # condition limit for G_c R^-1 G_c^T
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class SingularTheta(ValueError):
    """theta is at or below the pole theta* (1 + delta) of the temperature map."""


class NoLinearizingTheta(ValueError):
    """No scalar theta* matches G R^-1 G^T to Sigma Sigma^T at the sampled states."""


class SingularProjection(ValueError):
    """The actuated-row projection G_c R^-1 G_c^T is numerically singular."""


@dataclass(frozen=True)
class SearchConfig:
    """Master line-search knobs."""

    grid_points: int = 200
    rel_tol: float = 1e-8
    theta_max_factor: float = 1e6


@dataclass(frozen=True)
class ThetaSolution:
    """Solved master problem."""

    theta_hat: float
    theta_star: float
    lambda_eff: float
    master_value: float
    evaluations: int


def theta_star(model: DynamicsModel, R: np.ndarray, states=None,
               residual_rtol: float = 1e-9) -> float:
    """Scalar best matching ``theta G R^-1 G^T = Sigma Sigma^T`` at sampled states.

    The least-squares value over all sampled states must leave a Frobenius
    residual of at most ``residual_rtol * ||Sigma Sigma^T||_F`` at every
    state; for channel-noise models with ``R = rho I`` and ``S = I`` this
    is exactly ``rho``.

    Raises:
        NoLinearizingTheta: the residual test fails at some sampled state.
    """
    R = np.asarray(R, dtype=float)
    chol = cho_factor(R)
    if states is None:
        states = validation_states(model)
    pairs = []
    num = 0.0
    den = 0.0
    for x in np.atleast_2d(np.asarray(states, dtype=float)):
        G = np.atleast_2d(np.asarray(model.G(x, 0.0), dtype=float))
        Sg = np.atleast_2d(np.asarray(model.Sigma(x, 0.0), dtype=float))
        A = G @ cho_solve(chol, G.T)
        B = Sg @ Sg.T
        pairs.append((A, B))
        num += float(np.sum(A * B))
        den += float(np.sum(A * A))
    theta = num / den
    for A, B in pairs:
        resid = np.linalg.norm(theta * A - B)
        if resid > residual_rtol * np.linalg.norm(B):
            raise NoLinearizingTheta(
                f"no scalar theta solves theta G R^-1 G^T = Sigma Sigma^T "
                f"(relative residual {resid / np.linalg.norm(B):.3e})")
    if theta <= 0:
        raise NoLinearizingTheta(f"non-positive theta* = {theta}")
    return theta


def effective_temperature(theta: float, theta_star: float) -> float:
    """Soft-min temperature ``theta theta* / (theta - theta*)``.

    Strictly decreasing in ``theta`` with limit ``theta*`` as
    ``theta -> inf``.

    Raises:
        SingularTheta: ``theta <= theta* (1 + 1e-6)``.
    """
    if not theta_star > 0:
        raise ValueError("theta_star must be positive")
    if theta <= theta_star * (1.0 + DELTA_SING):
        raise SingularTheta(
            f"theta = {theta} is not above theta* (1 + {DELTA_SING}) = "
            f"{theta_star * (1.0 + DELTA_SING)}")
    return theta * theta_star / (theta - theta_star)


def free_energy(costs: np.ndarray, lambda_eff: float) -> float:
    """Soft-min aggregate ``-lambda log((1/M) sum exp(-J_i/lambda))``.

    Computed with max-shift stabilization; always lies between the minimum
    and the mean of the costs.
    """
    costs = np.asarray(costs, dtype=float).ravel()
    if costs.size == 0:
        raise ValueError("free_energy of an empty cost batch")
    if not lambda_eff > 0:
        raise ValueError("lambda_eff must be positive")
    return float(-lambda_eff * (logsumexp(-costs / lambda_eff) - math.log(costs.size)))


def master_objective(gamma: float, theta: float, theta_star: float,
                     costs: np.ndarray) -> float:
    """``gamma * theta + F(lambda_eff(theta))`` on a fixed cost batch."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    lam = effective_temperature(theta, theta_star)
    return gamma * theta + free_energy(costs, lam)


def _s_domain(theta_star: float, search: SearchConfig) -> tuple[float, float]:
    # s = 1/lambda_eff = 1/theta* - 1/theta, increasing in theta.
    s_lo = (1.0 / theta_star) * (DELTA_SING / (1.0 + DELTA_SING)) * (1.0 + 1e-9)
    s_hi = (1.0 / theta_star) * (1.0 - 1.0 / search.theta_max_factor)
    return s_lo, s_hi


def _theta_from_s(s: np.ndarray, theta_star: float) -> np.ndarray:
    return 1.0 / (1.0 / theta_star - s)


def _objective_on_s(gamma: float, theta_star: float, costs: np.ndarray,
                    s: np.ndarray) -> np.ndarray:
    """Vectorized master objective over inverse temperatures ``s``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    theta = _theta_from_s(s, theta_star)
    jmin = costs.min()
    shifted = costs - jmin
    out = np.empty(s.size)
    # chunk the (grid, M) matrix to bound memory on large batches
    rows = max(1, int(2_000_000 // max(1, costs.size)))
    for a in range(0, s.size, rows):
        b = min(a + rows, s.size)
        lse = logsumexp(-shifted[None, :] * s[a:b, None], axis=1)
        out[a:b] = -(lse - math.log(costs.size)) / s[a:b] + jmin
    return gamma * theta + out


def solve_master(gamma: float, theta_star: float, costs: np.ndarray,
                 search: SearchConfig = SearchConfig()) -> ThetaSolution:
    """Minimize the master objective over the admissible risk parameters.

    The search covers ``theta in (theta* (1 + 1e-6), theta* * theta_max]``
    via a log-spaced grid in ``s = 1/lambda_eff`` followed by
    golden-section refinement around the best grid point. Ties break
    toward larger ``theta`` (the less conservative solution). ``gamma = 0``
    returns the risk-neutral endpoint with ``lambda_eff = theta*`` exactly
    and no search.
    """
    costs = np.asarray(costs, dtype=float).ravel()
    if costs.size == 0:
        raise ValueError("solve_master needs a non-empty cost batch")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if not theta_star > 0:
        raise ValueError("theta_star must be positive")

    if gamma == 0.0:
        return ThetaSolution(
            theta_hat=theta_star * search.theta_max_factor,
            theta_star=theta_star,
            lambda_eff=theta_star,
            master_value=free_energy(costs, theta_star),
            evaluations=1,
        )

    s_lo, s_hi = _s_domain(theta_star, search)
    grid = np.geomspace(s_lo, s_hi, search.grid_points)
    vals = _objective_on_s(gamma, theta_star, costs, grid)
    evaluations = grid.size
    # last minimal entry = largest s = largest theta
    i = grid.size - 1 - int(np.argmin(vals[::-1]))
    best_s, best_val = grid[i], vals[i]

    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    if b > a:
        tol = search.rel_tol * b
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc = float(_objective_on_s(gamma, theta_star, costs, c)[0])
        fd = float(_objective_on_s(gamma, theta_star, costs, d)[0])
        evaluations += 2
        while (b - a) > tol:
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - _GOLDEN * (b - a)
                fc = float(_objective_on_s(gamma, theta_star, costs, c)[0])
            else:
                a, c, fc = c, d, fd
                d = a + _GOLDEN * (b - a)
                fd = float(_objective_on_s(gamma, theta_star, costs, d)[0])
            evaluations += 1
        for s_cand, f_cand in ((c, fc), (d, fd)):
            if f_cand < best_val or (f_cand == best_val and s_cand > best_s):
                best_s, best_val = s_cand, f_cand

    theta_hat = float(_theta_from_s(np.asarray(best_s), theta_star))
    return ThetaSolution(
        theta_hat=theta_hat,
        theta_star=theta_star,
        lambda_eff=1.0 / best_s,
        master_value=float(best_val),
        evaluations=evaluations,
    )


def path_integral_weights(costs: np.ndarray, lambda_eff: float) -> np.ndarray:
    """Soft-min softmax ``r_i ~ exp(-J_i / lambda_eff)`` on the simplex.

    Max-shift stabilized; invariant to adding a constant to all costs.
    """
    costs = np.asarray(costs, dtype=float).ravel()
    if costs.size == 0:
        raise ValueError("weights of an empty cost batch")
    if not lambda_eff > 0:
        raise ValueError("lambda_eff must be positive")
    z = -(costs - costs.min()) / lambda_eff
    w = np.exp(z)
    return w / w.sum()


def control_from_weights(model: DynamicsModel, R: np.ndarray, x_k: np.ndarray,
                         weights: np.ndarray, first_step_noise: np.ndarray,
                         dt: float, t: float = 0.0) -> np.ndarray:
    """Assemble the control from weighted first-step noise.

    Channel-noise models use ``u = S (sum_i r_i eps_i) / sqrt(dt)`` (the
    projection prefactor collapses onto the channel matrix). General
    models use the actuated-row form
    ``u = R^-1 G_c^T (G_c R^-1 G_c^T)^-1 Sigma_c (sum_i r_i eps_i) / sqrt(dt)``.

    Raises:
        SingularProjection: ``G_c R^-1 G_c^T`` has condition number above
            1e12 (general models only).
    """
    weights = np.asarray(weights, dtype=float).ravel()
    first_step_noise = np.asarray(first_step_noise, dtype=float)
    if first_step_noise.ndim != 2 or first_step_noise.shape[1] != model.p:
        raise ValueError(f"first_step_noise must be (M, {model.p})")
    if weights.shape[0] != first_step_noise.shape[0]:
        raise ValueError("weights and noise batch sizes differ")
    if np.any(weights < -1e-12) or abs(weights.sum() - 1.0) > 1e-8:
        raise ValueError("weights must lie on the probability simplex")
    if not dt > 0:
        raise ValueError("dt must be positive")

    avg = weights @ first_step_noise  # (p,)
    if model.channel_noise:
        return (model.S @ avg) / math.sqrt(dt)

    x_k = np.asarray(x_k, dtype=float)
    idx = list(model.actuated_indices)
    G = np.atleast_2d(np.asarray(model.G(x_k, t), dtype=float))
    Sg = np.atleast_2d(np.asarray(model.Sigma(x_k, t), dtype=float))
    Gc = G[idx, :]
    Sc = Sg[idx, :]
    chol = cho_factor(np.asarray(R, dtype=float))
    inner = Gc @ cho_solve(chol, Gc.T)
    if np.linalg.cond(inner) > _PROJECTION_COND_MAX:
        raise SingularProjection(
            "G_c R^-1 G_c^T is numerically singular for the actuated rows")
    lifted = np.linalg.solve(inner, Sc @ avg)
    return cho_solve(chol, Gc.T @ lifted) / math.sqrt(dt)
