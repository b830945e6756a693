"""Control-affine stochastic dynamics and the Euler-Maruyama stepper.

A model describes the SDE

    dx = f(x, t) dt + G(x, t) u dt + Sigma(x, t) dxi

with state dimension ``n``, control dimension ``k`` and disturbance
dimension ``p``. All evaluators are vectorized: they accept a state of
shape ``(n,)`` or any batch ``(..., n)`` and broadcast accordingly.

Registered model families:

``double_integrator``
    Planar particle, state ``[px, py, vx, vy]``, accelerations as controls,
    disturbances entering the velocity rows through ``Sigma = G`` (``S = I``).
``unicycle``
    State ``[px, py, heading]``, forward speed and turn rate as controls,
    disturbances sharing the control channels (``S = I``).
``scalar_lq``
    One dimensional linear model ``dx = a x dt + b u dt + sigma dxi``,
    used by the analytic test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

__all__ = ["ModelError", "DynamicsModel", "make_model", "em_step", "apply_matrix"]

# States used for numerical rank / channel checks at construction time.
_VALIDATION_SEED = 0x5EED0001
_N_VALIDATION_STATES = 8
_CHANNEL_ATOL = 1e-12


class ModelError(ValueError):
    """Invalid model family, parameters, or failed structural validation."""


def apply_matrix(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Batched matrix-vector product ``mat @ vec`` over trailing axes.

    ``mat`` has shape ``(..., m, j)`` (possibly unbatched ``(m, j)``) and
    ``vec`` shape ``(..., j)``; leading axes broadcast.
    """
    return np.einsum("...ij,...j->...i", mat, vec)


@dataclass(frozen=True)
class DynamicsModel:
    """Immutable control-affine SDE descriptor.

    Attributes:
        name: registry identifier.
        n, k, p: state, control and disturbance dimensions.
        l: number of directly actuated states.
        actuated_indices: rows of the state vector that receive control
            directly; length ``l``.
        channel_noise: True when ``Sigma(x, t) = G(x, t) @ S`` for a constant
            ``k x p`` channel matrix ``S``.
        f: drift evaluator, ``(..., n) x t -> (..., n)``.
        G: control matrix evaluator, ``(..., n) x t -> (n, k)`` or ``(..., n, k)``.
        Sigma: diffusion matrix evaluator, same convention with ``p`` columns.
        S: channel matrix when ``channel_noise``, else None.

    Instances are frozen; evaluators must be pure so the model can be shared
    across concurrent rollout workers.
    """

    name: str
    n: int
    k: int
    p: int
    l: int
    actuated_indices: tuple[int, ...]
    channel_noise: bool
    f: Callable[[np.ndarray, float], np.ndarray] = field(repr=False)
    G: Callable[[np.ndarray, float], np.ndarray] = field(repr=False)
    Sigma: Callable[[np.ndarray, float], np.ndarray] = field(repr=False)
    S: np.ndarray | None = field(default=None, repr=False)


def _frozen(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    out.flags.writeable = False
    return out


def _make_double_integrator() -> DynamicsModel:
    G = _frozen([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    S = _frozen(np.eye(2))

    def f(x, t=0.0):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = x[..., 2]
        out[..., 1] = x[..., 3]
        return out

    return DynamicsModel(
        name="double_integrator", n=4, k=2, p=2, l=2,
        actuated_indices=(2, 3), channel_noise=True,
        f=f, G=lambda x, t=0.0: G, Sigma=lambda x, t=0.0: G, S=S,
    )


def _make_unicycle() -> DynamicsModel:
    S = _frozen(np.eye(2))

    def G(x, t=0.0):
        x = np.asarray(x, dtype=float)
        th = x[..., 2]
        out = np.zeros(x.shape[:-1] + (3, 2))
        out[..., 0, 0] = np.cos(th)
        out[..., 1, 0] = np.sin(th)
        out[..., 2, 1] = 1.0
        return out

    def f(x, t=0.0):
        return np.zeros_like(np.asarray(x, dtype=float))

    # Every state row is driven through the control channels, so the
    # actuated set is the whole state and the channel form of the control
    # rule applies (the raw row submatrix G_c R^-1 G_c^T would be singular).
    return DynamicsModel(
        name="unicycle", n=3, k=2, p=2, l=3,
        actuated_indices=(0, 1, 2), channel_noise=True,
        f=f, G=G, Sigma=G, S=S,
    )


def _make_scalar_lq(a: float = 0.0, b: float = 1.0, sigma: float = 1.0) -> DynamicsModel:
    if b == 0.0:
        raise ModelError("scalar_lq requires b != 0 (full-rank control matrix)")
    if sigma == 0.0:
        raise ModelError("scalar_lq requires sigma != 0 (full-rank diffusion)")
    a, b, sigma = float(a), float(b), float(sigma)
    Gm = _frozen([[b]])
    Sm = _frozen([[sigma]])
    S = _frozen([[sigma / b]])

    def f(x, t=0.0):
        return a * np.asarray(x, dtype=float)

    return DynamicsModel(
        name="scalar_lq", n=1, k=1, p=1, l=1,
        actuated_indices=(0,), channel_noise=True,
        f=f, G=lambda x, t=0.0: Gm, Sigma=lambda x, t=0.0: Sm, S=S,
    )


_REGISTRY = {
    "double_integrator": _make_double_integrator,
    "unicycle": _make_unicycle,
    "scalar_lq": _make_scalar_lq,
}


def validation_states(model: DynamicsModel) -> np.ndarray:
    """Deterministic state sample used for structural checks: the origin
    plus standard-normal draws scaled to cover the working region."""
    rng = Generator(Philox(SeedSequence(entropy=(_VALIDATION_SEED, model.n))))
    pts = 2.0 * rng.standard_normal((_N_VALIDATION_STATES - 1, model.n))
    return np.vstack([np.zeros(model.n), pts])


def _validate(model: DynamicsModel) -> None:
    if not (0 < model.l <= model.n):
        raise ModelError(f"l={model.l} must satisfy 0 < l <= n={model.n}")
    idx = model.actuated_indices
    if len(idx) != model.l or len(set(idx)) != model.l:
        raise ModelError("actuated_indices must be distinct and of length l")
    if any(i < 0 or i >= model.n for i in idx):
        raise ModelError("actuated_indices out of range")
    for x in validation_states(model):
        G = np.atleast_2d(np.asarray(model.G(x, 0.0), dtype=float))
        Sg = np.atleast_2d(np.asarray(model.Sigma(x, 0.0), dtype=float))
        if G.shape != (model.n, model.k) or Sg.shape != (model.n, model.p):
            raise ModelError("evaluator shape mismatch")
        if np.linalg.matrix_rank(G) != model.k:
            raise ModelError(f"{model.name}: G(x) rank-deficient at a sampled state")
        if np.linalg.matrix_rank(Sg) != model.p:
            raise ModelError(f"{model.name}: Sigma(x) rank-deficient at a sampled state")
        if model.channel_noise:
            if model.S is None or model.S.shape != (model.k, model.p):
                raise ModelError("channel_noise model must carry a k x p channel matrix")
            if np.max(np.abs(Sg - G @ model.S)) > _CHANNEL_ATOL:
                raise ModelError(f"{model.name}: Sigma != G @ S at a sampled state")


def make_model(name: str, **params) -> DynamicsModel:
    """Build a registered dynamics model.

    Args:
        name: one of ``double_integrator``, ``unicycle``, ``scalar_lq``.
        **params: family specific parameters (``scalar_lq`` accepts
            ``a``, ``b``, ``sigma``).

    Raises:
        ModelError: unknown family, bad parameters, or a structural
            invariant (full rank, channel identity) fails numerically.
    """
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ModelError(f"unknown model family {name!r}; "
                         f"known: {sorted(_REGISTRY)}") from None
    try:
        model = factory(**params)
    except TypeError as exc:
        raise ModelError(f"bad parameters for {name!r}: {exc}") from None
    _validate(model)
    return model


def em_step(model: DynamicsModel, x: np.ndarray, u: np.ndarray,
            dxi: np.ndarray, dt: float, t: float = 0.0) -> np.ndarray:
    """One Euler-Maruyama step ``x + f dt + G u dt + Sigma dxi``.

    ``x``, ``u`` and ``dxi`` may carry matching leading batch axes.

    Raises:
        ValueError: non-positive ``dt``, dimension mismatch, or non-finite
            inputs.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    dxi = np.asarray(dxi, dtype=float)
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if x.shape[-1] != model.n or u.shape[-1] != model.k or dxi.shape[-1] != model.p:
        raise ValueError(
            f"dimension mismatch: x{x.shape} u{u.shape} dxi{dxi.shape} "
            f"for model (n={model.n}, k={model.k}, p={model.p})")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u)) and np.all(np.isfinite(dxi))):
        raise ValueError("em_step received non-finite input")
    return (x
            + model.f(x, t) * dt
            + apply_matrix(model.G(x, t), u) * dt
            + apply_matrix(model.Sigma(x, t), dxi))
