"""Monte Carlo rollout engine for uncontrolled dynamics.

Disturbance noise comes from counter-based Philox streams keyed by
``(master_seed, stream tag, episode, timestep)``. A batch tensor of shape
``(M, steps, p)`` is drawn in one pass with a fixed layout, so trajectory
``i`` always occupies the same counter offsets: its draws are a pure
function of the seed spec and ``i``, and are unchanged by the number of
trajectories requested after it or by how work is later scheduled.

``rollout_uncontrolled`` simulates M trajectories of

    x(s+1) = x(s) + f(x(s)) dt + Sigma(x(s)) (mu_hat dt + eps(s) sqrt(dt))

accumulating the running cost at post-step states and the terminal cost at
the final step. Trajectories are row-independent, so the batch can be
evaluated in ordered chunks by a worker pool without changing any result.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .costs import CostModel
from .models import DynamicsModel, apply_matrix

__all__ = [
    "SeedSpec", "RolloutError", "RolloutBatch",
    "stream_generator", "sample_disturbances", "rollout_uncontrolled",
]

# Stream tags keep rollout noise, the realized episode disturbances, and
# the pre-episode drift sample on disjoint Philox keys.
STREAM_ROLLOUT = 0
STREAM_TRUTH = 1
STREAM_DRIFT_INIT = 2


class RolloutError(RuntimeError):
    """A trajectory left the finite range during simulation."""


@dataclass(frozen=True)
class SeedSpec:
    """Addresses one noise stream: (master seed, episode, timestep)."""

    master_seed: int
    episode: int = 0
    timestep: int = 0


def stream_generator(seed: SeedSpec, stream: int) -> Generator:
    """Philox generator keyed by the seed spec and a stream tag."""
    seq = SeedSequence(entropy=(seed.master_seed, stream, seed.episode, seed.timestep))
    return Generator(Philox(seq))


def sample_disturbances(M: int, steps: int, p: int, seed: SeedSpec) -> np.ndarray:
    """Standard-normal noise tensor of shape ``(M, steps, p)``.

    Deterministic in ``seed``; the block for trajectory ``i`` is a fixed
    slice of the keyed stream, independent of evaluation order and of any
    trajectories sampled after it.
    """
    if M < 1 or steps < 1 or p < 1:
        raise ValueError("M, steps, p must be positive")
    return stream_generator(seed, STREAM_ROLLOUT).standard_normal((M, steps, p))


@dataclass(frozen=True)
class RolloutBatch:
    """Costs and first-step noise of M uncontrolled sample trajectories.

    ``paths`` holds the full state tensor ``(M, steps + 1, n)`` only when
    requested (debug / verification); production use keeps the memory
    profile of costs plus one noise slice.
    """

    M: int
    steps: int
    noise: np.ndarray
    costs: np.ndarray
    first_step_noise: np.ndarray
    dt: float
    paths: np.ndarray | None = None


def _drift_vector(mu_hat, p: int) -> np.ndarray:
    mu = np.asarray(getattr(mu_hat, "mu_hat", mu_hat), dtype=float)
    if mu.shape != (p,):
        raise ValueError(f"drift shape {mu.shape} != ({p},)")
    return mu


def _simulate_block(model: DynamicsModel, cm: CostModel, x_k: np.ndarray,
                    k: int, mu: np.ndarray, noise: np.ndarray, dt: float,
                    keep_paths: bool):
    """Simulate one contiguous block of trajectories; returns (costs, paths)."""
    m, steps, _ = noise.shape
    sqrt_dt = math.sqrt(dt)
    mu_dt = mu * dt
    X = np.repeat(x_k[None, :], m, axis=0)
    costs = np.zeros(m)
    paths = np.empty((m, steps + 1, model.n)) if keep_paths else None
    if keep_paths:
        paths[:, 0, :] = X
    # divergence is detected afterwards and raised as RolloutError, so
    # transient overflow here is expected, not a warning condition
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(steps):
            t = (k + s) * dt
            dxi = noise[:, s, :] * sqrt_dt + mu_dt
            X = X + model.f(X, t) * dt + apply_matrix(model.Sigma(X, t), dxi)
            if keep_paths:
                paths[:, s + 1, :] = X
            if s < steps - 1:
                costs += cm.q(X, (k + s + 1) * dt) * dt
            else:
                costs += cm.psi(X)
    return costs, paths


def rollout_uncontrolled(model: DynamicsModel, cm: CostModel, x_k: np.ndarray,
                         k: int, mu_hat, noise: np.ndarray, dt: float,
                         keep_paths: bool = False, workers: int = 1) -> RolloutBatch:
    """Simulate M uncontrolled trajectories from ``x_k`` under drift ``mu_hat``.

    Args:
        model: dynamics; evaluators must broadcast over the batch axis.
        cm: cost model supplying the running rate ``q`` and terminal ``psi``.
        x_k: start state, shape ``(n,)``.
        k: start step index (sets the evaluator time ``t = k dt``).
        mu_hat: drift estimate (``DriftEstimate`` or plain ``(p,)`` array).
        noise: tensor from :func:`sample_disturbances`, shape ``(M, steps, p)``.
        dt: step size.
        keep_paths: retain full state paths for verification.
        workers: evaluate the batch in this many ordered chunks.

    Raises:
        RolloutError: a trajectory produced a non-finite state or cost;
            the message reports the first offending trajectory index.
    """
    x_k = np.asarray(x_k, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 3:
        raise ValueError(f"noise must be (M, steps, p), got shape {noise.shape}")
    M, steps, p = noise.shape
    if p != model.p or x_k.shape != (model.n,):
        raise ValueError(f"shape mismatch: noise p={p}, x_k {x_k.shape} "
                         f"for model (n={model.n}, p={model.p})")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    mu = _drift_vector(mu_hat, model.p)

    n_chunks = max(1, min(int(workers), M))
    bounds = np.linspace(0, M, n_chunks + 1, dtype=int)
    spans = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    if len(spans) == 1:
        results = [_simulate_block(model, cm, x_k, k, mu, noise, dt, keep_paths)]
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            futures = [pool.submit(_simulate_block, model, cm, x_k, k, mu,
                                   noise[a:b], dt, keep_paths)
                       for a, b in spans]
            results = [f.result() for f in futures]

    costs = np.concatenate([c for c, _ in results])
    paths = np.concatenate([q for _, q in results]) if keep_paths else None

    if not np.all(np.isfinite(costs)):
        bad = int(np.flatnonzero(~np.isfinite(costs))[0])
        raise RolloutError(f"non-finite state or cost in trajectory {bad} "
                           f"(start step {k})")
    return RolloutBatch(M=M, steps=steps, noise=noise, costs=costs,
                        first_step_noise=noise[:, 0, :].copy(), dt=dt,
                        paths=paths)
