"""Closed-loop robust path-integral control and the risk-neutral baseline.

``drpi_step`` performs one control computation: sample disturbances, roll
out the uncontrolled dynamics under the current drift estimate, solve the
master problem for the risk parameter, weight the trajectories, and
assemble the control. ``run_episode`` wraps it in the online loop: the
realized disturbance of each step feeds the drift estimate at the next
one, and the ambiguity radius follows the configured schedule (the ``pic``
scheme pins it at zero, the classic risk-neutral controller).

Each episode holds three disjoint noise streams keyed by (master seed,
episode): rollout noise (re-keyed every timestep), the realized "true"
disturbances, and the single pre-episode increment that seeds the drift
estimate. Changing the rollout sample count M never touches the realized
episode disturbances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import CostModel, control_cost
from .models import DynamicsModel, em_step
from .rollout import (STREAM_DRIFT_INIT, STREAM_TRUTH, SeedSpec,
                      rollout_uncontrolled, sample_disturbances,
                      stream_generator)
from .solver import (SearchConfig, ThetaSolution, control_from_weights,
                     path_integral_weights, solve_master, theta_star)
from .uncertainty import (DriftEstimate, RobustnessConfig, gamma_schedule,
                          update_drift_online)

__all__ = ["EpisodeRecord", "drpi_step", "run_episode",
           "STATUS_SUCCESS", "STATUS_COLLISION", "STATUS_TIMEOUT", "SCHEMES"]

STATUS_SUCCESS = "success"
STATUS_COLLISION = "collision"
STATUS_TIMEOUT = "timeout"
SCHEMES = ("drpi", "pic")


@dataclass(frozen=True)
class EpisodeRecord:
    """One closed-loop simulation.

    ``states`` has one more row than ``controls``. ``arrive_time`` is the
    first time the position entered the goal ball, None unless the episode
    succeeded. ``realized_state_cost`` accumulates ``q`` at the realized
    post-step states times dt; ``realized_total_cost`` adds the quadratic
    control cost ``u^T R u / 2 * dt`` of every applied control. The
    per-step diagnostics (``theta_hats``, ``gammas``, ``mu_hats``) align
    with ``controls``.
    """

    states: np.ndarray
    controls: np.ndarray
    theta_hats: np.ndarray
    gammas: np.ndarray
    mu_hats: np.ndarray
    status: str
    arrive_time: float | None
    realized_state_cost: float
    realized_total_cost: float


def _at_goal(cm: CostModel, x: np.ndarray) -> bool:
    dx = x[0] - cm.target[0]
    dy = x[1] - cm.target[1]
    return math.hypot(dx, dy) <= cm.goal_radius


def _collided(cm: CostModel, x: np.ndarray) -> bool:
    inside_obstacle = bool(cm.obstacle.contains(x[0], x[1]))
    out_of_bounds = not bool(cm.boundary.contains(x[0], x[1]))
    return inside_obstacle or out_of_bounds


def drpi_step(model: DynamicsModel, cm: CostModel, x_k: np.ndarray, k: int,
              K: int, drift: DriftEstimate, gamma: float, M: int, dt: float,
              seed: SeedSpec, theta_star_val: float | None = None,
              search: SearchConfig = SearchConfig(), workers: int = 1,
              noise: np.ndarray | None = None) -> tuple[np.ndarray, ThetaSolution]:
    """One robust path-integral control computation at step ``k``.

    Samples ``M`` disturbance trajectories over the remaining horizon,
    rolls out the uncontrolled dynamics under the drift estimate, solves
    the master problem (``gamma = 0`` short-circuits to the risk-neutral
    endpoint), and averages the first-step noise under the soft-min
    weights. Returns the control and the solved master problem.

    ``noise`` overrides the sampled tensor (test hook); ``theta_star_val``
    skips recomputing the linearizing temperature.
    """
    if not 0 <= k < K:
        raise ValueError(f"step index k={k} outside horizon K={K}")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if noise is None:
        noise = sample_disturbances(M, K - k, model.p, seed)
    if theta_star_val is None:
        theta_star_val = theta_star(model, cm.R)
    try:
        batch = rollout_uncontrolled(model, cm, x_k, k, drift, noise, dt,
                                     workers=workers)
        sol = solve_master(gamma, theta_star_val, batch.costs, search=search)
        weights = path_integral_weights(batch.costs, sol.lambda_eff)
        u = control_from_weights(model, cm.R, x_k, weights,
                                 batch.first_step_noise, dt, t=k * dt)
    except (ValueError, RuntimeError) as exc:
        raise type(exc)(f"{exc} (at timestep {k})") from exc
    return u, sol


def run_episode(model: DynamicsModel, cm: CostModel, scheme: str,
                true_mu: np.ndarray, x0: np.ndarray, K: int, M: int,
                dt: float, rc: RobustnessConfig, seed: SeedSpec,
                search: SearchConfig = SearchConfig(),
                workers: int = 1) -> EpisodeRecord:
    """Simulate one closed-loop episode of ``scheme`` in {"drpi", "pic"}.

    The drift estimate is seeded with a single pre-episode increment and
    refined at each step with the realized disturbance of the previous
    step, so after k steps it equals the batch mean of the k observed
    increments. The ambiguity radius follows ``rc.schedule`` on the
    1-based step index (``pic`` pins it at zero). The episode terminates
    on reaching the goal ball (success), touching the obstacle or leaving
    the boundary (collision), or exhausting the horizon (timeout);
    termination checks apply to the initial state as well.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    if K < 1:
        raise ValueError("K must be at least 1")
    if not cm.is_navigation:
        raise ValueError("run_episode needs a navigation cost model "
                         "(target, goal radius and geometry)")
    true_mu = np.asarray(true_mu, dtype=float)
    if true_mu.shape != (model.p,):
        raise ValueError(f"true_mu shape {true_mu.shape} != ({model.p},)")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (model.n,):
        raise ValueError(f"x0 shape {x.shape} != ({model.n},)")

    sqrt_dt = math.sqrt(dt)
    truth = stream_generator(seed, STREAM_TRUTH).standard_normal((K, model.p))
    init_eps = stream_generator(seed, STREAM_DRIFT_INIT).standard_normal(model.p)
    drift = DriftEstimate(mu_hat=(true_mu * dt + init_eps * sqrt_dt) / dt,
                          count=1, dt=dt)
    ts_val = theta_star(model, cm.R)

    states = [x.copy()]
    controls: list[np.ndarray] = []
    theta_hats: list[float] = []
    gammas: list[float] = []
    mu_hats: list[np.ndarray] = []
    state_cost_acc = 0.0
    control_cost_acc = 0.0
    status = STATUS_TIMEOUT
    arrive_time: float | None = None

    if _at_goal(cm, x):
        status, arrive_time = STATUS_SUCCESS, 0.0
    elif _collided(cm, x):
        status = STATUS_COLLISION
    else:
        for k in range(K):
            if k >= 1:
                realized_prev = true_mu * dt + truth[k - 1] * sqrt_dt
                drift = update_drift_online(drift, realized_prev)
            if scheme == "pic":
                gamma = 0.0
            else:
                gamma = gamma_schedule(rc, k + 1, n_available=drift.count)
            step_seed = SeedSpec(seed.master_seed, seed.episode, timestep=k)
            u, sol = drpi_step(model, cm, x, k, K, drift, gamma, M, dt,
                               step_seed, theta_star_val=ts_val,
                               search=search, workers=workers)
            dxi = true_mu * dt + truth[k] * sqrt_dt
            x = em_step(model, x, u, dxi, dt, t=k * dt)

            states.append(x.copy())
            controls.append(u)
            theta_hats.append(sol.theta_hat)
            gammas.append(gamma)
            mu_hats.append(drift.mu_hat)
            state_cost_acc += float(cm.q(x, (k + 1) * dt)) * dt
            control_cost_acc += float(control_cost(cm, u)) * dt

            if _at_goal(cm, x):
                status, arrive_time = STATUS_SUCCESS, (k + 1) * dt
                break
            if _collided(cm, x):
                status = STATUS_COLLISION
                break

    n_ctrl = len(controls)
    return EpisodeRecord(
        states=np.asarray(states),
        controls=np.asarray(controls).reshape(n_ctrl, model.k),
        theta_hats=np.asarray(theta_hats),
        gammas=np.asarray(gammas),
        mu_hats=np.asarray(mu_hats).reshape(n_ctrl, model.p),
        status=status,
        arrive_time=arrive_time,
        realized_state_cost=state_cost_acc,
        realized_total_cost=state_cost_acc + control_cost_acc,
    )
