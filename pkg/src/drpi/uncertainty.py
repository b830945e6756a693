"""Drift estimation and finite-sample ambiguity calculators.

The disturbance increments over a sampling interval ``dt`` are modeled as
``dxi = mu dt + dw`` with an unknown constant drift ``mu``. The estimator
is the scaled sample mean of observed increments. For laws of drifted
Brownian disturbances over a horizon ``T``, the divergence between the
estimated and the true law reduces to ``(T/2) ||mu_hat - mu||^2``, which
makes coverage of a KL ball of radius ``gamma`` a concentration statement
about the sample mean:

    gamma(eps) = (sqrt(p) / N) * log(2 p / eps)

guarantees coverage with probability at least ``1 - eps`` given ``N``
observation sequences in dimension ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "DriftEstimate", "RobustnessConfig", "zero_drift",
    "estimate_drift_batch", "update_drift_online",
    "gamma_for_confidence", "coverage_lower_bound",
    "kl_drifted_brownian", "gamma_schedule",
]

SCHEDULES = ("fixed", "inverse_k", "finite_sample")


@dataclass(frozen=True)
class DriftEstimate:
    """Running drift estimate: sample mean of increments divided by dt.

    ``count`` is the number of increments absorbed; with ``count == 0``
    the estimate is the configured prior (zero by default).
    """

    mu_hat: np.ndarray
    count: int
    dt: float

    def __post_init__(self):
        mu = np.asarray(self.mu_hat, dtype=float)
        mu.flags.writeable = False
        object.__setattr__(self, "mu_hat", mu)
        if self.count < 0:
            raise ValueError("count must be nonnegative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(mu)):
            raise ValueError("mu_hat must be finite")


@dataclass(frozen=True)
class RobustnessConfig:
    """Ambiguity-radius configuration.

    ``schedule`` selects how the radius evolves with the step counter:
    ``fixed`` keeps ``gamma``, ``inverse_k`` uses ``1/k``, and
    ``finite_sample`` uses ``gamma_for_confidence(p, N, epsilon)`` with the
    currently available sample count.
    """

    gamma: float = 1.0
    epsilon: float = 0.1
    schedule: str = "inverse_k"
    p: int = 2

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.p < 1:
            raise ValueError("p must be a positive integer")


def zero_drift(p: int, dt: float) -> DriftEstimate:
    """Data-free prior: zero drift with count 0."""
    return DriftEstimate(mu_hat=np.zeros(p), count=0, dt=dt)


def estimate_drift_batch(sequences, dt: float) -> DriftEstimate:
    """Drift from N sequences of K increments: ``sum(dxi) / (N K dt)``.

    ``sequences`` is array-like of shape ``(N, K, p)`` (or a list of
    ``(K, p)`` arrays with equal p; K may vary across sequences).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    arrs = [np.atleast_2d(np.asarray(s, dtype=float)) for s in sequences]
    if not arrs or any(a.size == 0 for a in arrs):
        raise ValueError("estimate_drift_batch needs at least one increment")
    total = sum(a.reshape(-1, a.shape[-1]).sum(axis=0) for a in arrs)
    count = sum(a.reshape(-1, a.shape[-1]).shape[0] for a in arrs)
    return DriftEstimate(mu_hat=total / (count * dt), count=count, dt=dt)


def update_drift_online(est: DriftEstimate, dxi_k: np.ndarray) -> DriftEstimate:
    """Absorb one new increment: ``mu += (dxi/dt - mu) / (count + 1)``.

    Equals the batch mean of all increments seen so far; a first sample
    overwrites any prior.
    """
    dxi_k = np.asarray(dxi_k, dtype=float)
    if not np.all(np.isfinite(dxi_k)):
        raise ValueError("non-finite disturbance increment")
    new_count = est.count + 1
    mu = est.mu_hat + (dxi_k / est.dt - est.mu_hat) / new_count
    return replace(est, mu_hat=mu, count=new_count)


def gamma_for_confidence(p: int, N: int, epsilon: float) -> float:
    """Smallest ambiguity radius with coverage at least ``1 - epsilon``."""
    if N <= 0:
        raise ValueError("N must be positive")
    if p <= 0:
        raise ValueError("p must be positive")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return (math.sqrt(p) / N) * math.log(2.0 * p / epsilon)


def coverage_lower_bound(gamma: float, N: int, p: int) -> float:
    """Lower bound ``1 - 2 p exp(-gamma N / sqrt(p))`` on containment
    of the true disturbance law in the radius-``gamma`` KL ball.

    May be negative (vacuous) and is returned as-is.
    """
    if N <= 0:
        raise ValueError("N must be positive")
    if p <= 0:
        raise ValueError("p must be positive")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return 1.0 - 2.0 * p * math.exp(-gamma * N / math.sqrt(p))


def kl_drifted_brownian(mu_hat, mu, T: float) -> float:
    """KL divergence ``(T/2) ||mu_hat - mu||^2`` between the laws of two
    Brownian disturbances with constant drifts over horizon ``T``."""
    mu_hat = np.asarray(mu_hat, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if mu_hat.shape != mu.shape:
        raise ValueError(f"drift shape mismatch {mu_hat.shape} vs {mu.shape}")
    if not T > 0:
        raise ValueError("T must be positive")
    diff = mu_hat - mu
    return 0.5 * T * float(diff @ diff)


def gamma_schedule(rc: RobustnessConfig, k: int, n_available: int = 1) -> float:
    """Ambiguity radius at (1-based) step ``k`` under the configured schedule."""
    if k < 1:
        raise ValueError("step index k must be >= 1")
    if rc.schedule == "fixed":
        return rc.gamma
    if rc.schedule == "inverse_k":
        return 1.0 / k
    return gamma_for_confidence(rc.p, max(1, n_available), rc.epsilon)
