# This code is part of gama-adapt.
#
# (C) Copyright The gama-adapt Authors 2026.
#
# This code is licensed under the Apache License, Version 2.0. You may
# obtain a copy of this license in the LICENSE.txt file in the root directory
# of this source tree or at http://www.apache.org/licenses/LICENSE-2.0.
#
# Any modifications or derivative works of this code must retain this
# copyright notice, and modified files need to carry a notice indicating
# that they have been altered from the originals.

"""Structured on/off-manifold perturbations and PGD attacks."""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import GamaNumericError, GamaParameterError
from .geometry import project_tangent
from .model import input_gradient

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PerturbConfig:
    """Step sizes of the on-manifold (``alpha``) and off-manifold (``beta``) moves."""

    alpha: float = 0.1
    beta: float = 0.1
    zero_norm_tol: float = 1e-12

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise GamaParameterError('alpha and beta must be >= 0')
        if self.zero_norm_tol <= 0:
            raise GamaParameterError('zero_norm_tol must be > 0')


@dataclass(frozen=True)
class PerturbationPair:
    """Decomposed gradient of one sample and the two perturbed inputs."""

    delta_on: np.ndarray
    delta_off: np.ndarray
    x_on: np.ndarray
    x_off: np.ndarray
    skipped_on: bool
    skipped_off: bool


def _check_dim(vec, d, what):
    arr = np.asarray(vec, dtype=float)
    if arr.shape != (d,):
        raise GamaParameterError('{} of shape {} does not match dimension {}'.format(
            what, arr.shape, d))
    return arr


def decompose(frame, grad):
    """Split ``grad`` into its tangent part and the orthogonal remainder.

    Returns:
        tuple(np.ndarray, np.ndarray): ``(delta_on, delta_off)`` with
            ``delta_on + delta_off == grad``.

    Raises:
        GamaParameterError: if ``grad`` does not match the frame dimension.
    """
    grad = _check_dim(grad, frame.d, 'Gradient')
    delta_on = project_tangent(frame, grad)
    return delta_on, grad - delta_on


def decompose_residual(residual, grad, zero_norm_tol=1e-12):
    """Split ``grad`` using an autoencoder residual as the off-manifold direction.

    ``delta_off`` is the component of ``grad`` along the normalized residual
    and ``delta_on`` the rest. A residual shorter than ``zero_norm_tol`` gives
    ``delta_off = 0``.
    """
    grad = np.asarray(grad, dtype=float)
    residual = _check_dim(residual, grad.shape[0], 'Residual')
    norm = np.linalg.norm(residual)
    if norm <= zero_norm_tol:
        return grad.copy(), np.zeros_like(grad)
    direction = residual / norm
    delta_off = (direction @ grad) * direction
    return grad - delta_off, delta_off


def _step(x, delta, size, tol):
    norm = np.linalg.norm(delta)
    if norm <= tol:
        return x.copy(), True
    return x + size * (delta / norm), False


def make_perturbed(x, delta_on, delta_off, cfg):
    """Build ``x_on = x + alpha * delta_on / |delta_on|`` and the ``beta`` analogue.

    A component whose norm does not exceed ``cfg.zero_norm_tol`` is skipped and
    its perturbed input equals ``x``.
    """
    x = np.asarray(x, dtype=float)
    delta_on = _check_dim(delta_on, x.shape[0], 'delta_on')
    delta_off = _check_dim(delta_off, x.shape[0], 'delta_off')
    x_on, skipped_on = _step(x, delta_on, cfg.alpha, cfg.zero_norm_tol)
    x_off, skipped_off = _step(x, delta_off, cfg.beta, cfg.zero_norm_tol)
    return PerturbationPair(delta_on=delta_on, delta_off=delta_off, x_on=x_on, x_off=x_off,
                            skipped_on=skipped_on, skipped_off=skipped_off)


@dataclass(frozen=True)
class PerturbedBatch:
    """Row-stacked perturbations of a batch."""

    x_on: np.ndarray
    x_off: np.ndarray
    skipped_on: np.ndarray
    skipped_off: np.ndarray

    @property
    def n_skipped(self):
        """Number of skipped on- and off-manifold moves."""
        return int(self.skipped_on.sum()), int(self.skipped_off.sum())


def perturb_batch(x, grads, cfg, frames=None, residuals=None):
    """Decompose every row of ``grads`` and build the perturbed inputs.

    Exactly one of ``frames`` (PCA estimator, one ``TangentFrame`` per row) or
    ``residuals`` (autoencoder estimator, n x d) must be given. A ``None``
    frame marks a row without usable geometry; both of its moves are skipped.
    """
    if (frames is None) == (residuals is None):
        raise GamaParameterError('Pass exactly one of frames or residuals')
    x = np.asarray(x, dtype=float)
    grads = np.asarray(grads, dtype=float)
    n = x.shape[0]
    pairs = []
    for i in range(n):
        if frames is not None and frames[i] is None:
            delta_on = delta_off = np.zeros(x.shape[1])
        elif frames is not None:
            delta_on, delta_off = decompose(frames[i], grads[i])
        else:
            delta_on, delta_off = decompose_residual(residuals[i], grads[i], cfg.zero_norm_tol)
        pairs.append(make_perturbed(x[i], delta_on, delta_off, cfg))
    return PerturbedBatch(
        x_on=np.array([p.x_on for p in pairs]).reshape(x.shape),
        x_off=np.array([p.x_off for p in pairs]).reshape(x.shape),
        skipped_on=np.array([p.skipped_on for p in pairs], dtype=bool),
        skipped_off=np.array([p.skipped_off for p in pairs], dtype=bool))


@dataclass(frozen=True)
class AttackConfig:
    """l-infinity PGD settings.

    ``step_size`` defaults to ``epsilon / 4``. ``epsilon = 0`` is the null
    attack: inputs are returned unchanged.
    """

    epsilon: float = 0.1
    steps: int = 10
    step_size: Optional[float] = None
    random_start: bool = False

    def __post_init__(self):
        if self.epsilon < 0:
            raise GamaParameterError('epsilon must be >= 0')
        if int(self.steps) < 1:
            raise GamaParameterError('PGD needs at least one step')
        step = self.epsilon / 4.0 if self.step_size is None else float(self.step_size)
        if step <= 0 and self.epsilon > 0:
            raise GamaParameterError('step_size must be > 0')
        object.__setattr__(self, 'steps', int(self.steps))
        object.__setattr__(self, 'step_size', step)


def pgd_attack(spec, params, x, y, atk, bounds: Optional[Tuple] = None, rng=None):
    """Signed-gradient ascent on the cross-entropy, projected onto the epsilon ball.

    Args:
        spec (NetSpec): network shape.
        params (NetParams): network parameters.
        x (np.ndarray): input vector or n x d batch.
        y (int or np.ndarray): label(s).
        atk (AttackConfig): budget, steps and step size.
        bounds (tuple or None): ``(lower, upper)`` clamp, scalars or per
            dimension arrays.
        rng (np.random.Generator or None): used only when
            ``atk.random_start`` is set.

    Returns:
        np.ndarray: adversarial inputs, same shape as ``x``.

    Raises:
        GamaNumericError: if an input gradient is not finite.
    """
    origin = np.asarray(x, dtype=float)
    if atk.epsilon == 0:
        return origin.copy()
    lower, upper = origin - atk.epsilon, origin + atk.epsilon
    adv = origin.copy()
    if atk.random_start:
        rng = rng if rng is not None else np.random.default_rng(0)
        adv = adv + rng.uniform(-atk.epsilon, atk.epsilon, size=adv.shape)
        adv = np.clip(adv, lower, upper)
        if bounds is not None:
            adv = np.clip(adv, bounds[0], bounds[1])
    for _ in range(atk.steps):
        grad = input_gradient(spec, params, adv, y)
        if not np.all(np.isfinite(grad)):
            raise GamaNumericError('PGD input gradient is not finite', term='pgd')
        adv = np.clip(adv + atk.step_size * np.sign(grad), lower, upper)
        if bounds is not None:
            adv = np.clip(adv, bounds[0], bounds[1])
    return adv
