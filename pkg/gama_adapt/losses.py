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

"""Objective terms and their weighted combination.

The single-sample functions (:func:`loss_cls`, :func:`loss_on`,
:func:`loss_off`, :func:`loss_geom`, :func:`loss_total`) compute values only.
The ``*_term`` functions evaluate a term over a batch of forward passes and
return the :class:`~gama_adapt.model.Cotangent` records that
:func:`~gama_adapt.model.param_gradients` turns into parameter gradients.
:func:`objective` assembles the full training loss of one step.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from .constants import PROB_FLOOR, GeodesicGradient, GeodesicMode
from .exceptions import GamaNumericError, GamaParameterError
from .geometry import GeometryConfig, as_point_set, joint_geodesic, kernel_distances
from .model import Cotangent, param_gradients, run

logger = logging.getLogger(__name__)

LOG_FLOOR = math.log(PROB_FLOOR)
TERMS = ('cls', 'on', 'off', 'geom')
# Softmin weights below this do not contribute path gradients.
_PATH_WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Term weights of the total loss and the softmin temperature."""

    lambda_on: float = 1.0
    lambda_off: float = 0.5
    lambda_geom: float = 0.1
    tau: float = 0.1

    def __post_init__(self):
        for name in ('lambda_on', 'lambda_off', 'lambda_geom'):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise GamaParameterError('{} must be a finite value >= 0, got {}'.format(
                    name, value))
            object.__setattr__(self, name, value)
        if not float(self.tau) > 0:
            raise GamaParameterError('tau must be > 0, got {}'.format(self.tau))
        object.__setattr__(self, 'tau', float(self.tau))


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term values of one step and their weighted total."""

    cls: float
    on: float
    off: float
    geom: float
    total: float

    def row(self, step):
        """CSV row ``(step, cls, on, off, geom, total)``."""
        return (int(step), self.cls, self.on, self.off, self.geom, self.total)

    def as_dict(self):
        """Mapping of term names to values."""
        return {'cls': self.cls, 'on': self.on, 'off': self.off,
                'geom': self.geom, 'total': self.total}


def _check_label(y, c):
    if isinstance(y, bool) or not isinstance(y, (int, np.integer)) or not 0 <= y < c:
        raise GamaParameterError('Label must be an integer in [0, {}), got {!r}'.format(c, y))
    return int(y)


def loss_cls(probs, y):
    """Cross-entropy ``-log probs[y]`` with the probability floored at 1e-12."""
    probs = np.asarray(probs, dtype=float).reshape(-1)
    y = _check_label(y, probs.shape[0])
    return -math.log(max(float(probs[y]), PROB_FLOOR))


def _same_shape(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise GamaParameterError('Output shapes differ: {} vs {}'.format(a.shape, b.shape))
    return a, b


def loss_on(f_x, f_xon):
    """Squared Euclidean distance between clean and on-manifold outputs."""
    f_x, f_xon = _same_shape(f_x, f_xon)
    return float(np.sum((f_xon - f_x) ** 2))


def kl_divergence(p, q):
    """``KL(p || q)`` after flooring both distributions at 1e-12.

    Returns:
        tuple(float, int): the divergence and the number of floored entries.
    """
    p, q = _same_shape(p, q)
    clamped = int(np.sum(p < PROB_FLOOR) + np.sum(q < PROB_FLOOR))
    p = np.maximum(p, PROB_FLOOR)
    q = np.maximum(q, PROB_FLOOR)
    return float(np.sum(p * (np.log(p) - np.log(q)))), clamped


def loss_off(p_x, p_xoff, f_x, f_xoff):
    """``KL(p_x || p_xoff) + |f_x - f_xoff|^2``."""
    kl, clamped = kl_divergence(p_x, p_xoff)
    if clamped:
        logger.debug('loss_off floored %d probabilities at %g', clamped, PROB_FLOOR)
    f_x, f_xoff = _same_shape(f_x, f_xoff)
    return kl + float(np.sum((f_x - f_xoff) ** 2))


def softmin(values, tau, axis=-1):
    """``-tau * log sum exp(-v / tau)`` along ``axis``."""
    values = np.asarray(values, dtype=float)
    return -tau * logsumexp(-values / tau, axis=axis)


def _check_dists(dists, n_s=None, n_t=None):
    dists = np.asarray(dists, dtype=float)
    if dists.ndim != 2 or dists.size == 0:
        raise GamaParameterError('Geodesic alignment needs non-empty source and target sets')
    if n_s is not None and dists.shape != (n_s, n_t):
        raise GamaParameterError('Distance matrix shape {} does not match {} x {}'.format(
            dists.shape, n_s, n_t))
    return dists


def geom_value(dists, tau):
    """Symmetric softmin discrepancy of an |S| x |T| distance matrix."""
    dists = _check_dists(dists)
    return float(np.mean(softmin(dists, tau, axis=1)) + np.mean(softmin(dists, tau, axis=0)))


def geom_weights(dists, tau):
    """Derivative of :func:`geom_value` with respect to every entry of ``dists``."""
    dists = _check_dists(dists)
    n_s, n_t = dists.shape
    return softmax(-dists / tau, axis=1) / n_s + softmax(-dists / tau, axis=0) / n_t


def loss_geom(source_emb, target_emb, dists, w):
    """Symmetric softmin geodesic discrepancy between two embedding sets.

    Args:
        source_emb (PointSet or array_like): source embeddings.
        target_emb (PointSet or array_like): target embeddings.
        dists (np.ndarray): |S| x |T| distances between them.
        w (LossWeights): supplies the temperature ``tau``.

    Raises:
        GamaParameterError: if a set is empty or ``dists`` has the wrong shape.
    """
    src = np.asarray(source_emb.points if hasattr(source_emb, 'points') else source_emb)
    tgt = np.asarray(target_emb.points if hasattr(target_emb, 'points') else target_emb)
    if src.shape[0] == 0 or tgt.shape[0] == 0:
        raise GamaParameterError('Geodesic alignment needs non-empty source and target sets')
    dists = _check_dists(dists, src.shape[0], tgt.shape[0])
    return geom_value(dists, w.tau)


def loss_total(parts, w):
    """Combine per-term values into a :class:`LossBreakdown`.

    Args:
        parts (dict or sequence): ``cls, on, off, geom`` values.
        w (LossWeights): term weights.

    Raises:
        GamaNumericError: naming the first non-finite term.
    """
    if isinstance(parts, dict):
        values = [parts[name] for name in TERMS]
    else:
        values = list(parts)
    if len(values) != len(TERMS):
        raise GamaParameterError('loss_total needs the four parts {}'.format(TERMS))
    values = [float(v) for v in values]
    for name, value in zip(TERMS, values):
        if not math.isfinite(value):
            raise GamaNumericError('Loss term {!r} is not finite: {}'.format(name, value),
                                   term=name)
    cls_, on, off, geom = values
    total = cls_ + w.lambda_on * on + w.lambda_off * off + w.lambda_geom * geom
    return LossBreakdown(cls=cls_, on=on, off=off, geom=geom, total=total)


class TermValue(NamedTuple):
    """Value of one batched term and its (already weighted) cotangents."""

    value: float
    cotangents: Tuple[Cotangent, ...]
    clamped: int = 0


def cls_term(passes, scale=1.0):
    """Mean cross-entropy over one or more ``(ForwardPass, labels)`` pairs."""
    n = sum(fwd.logits.shape[0] for fwd, _ in passes)
    total = 0.0
    cotangents = []
    for fwd, labels in passes:
        rows = np.arange(labels.shape[0])
        total -= float(np.sum(fwd.log_probs[rows, labels]))
        d_logits = fwd.probs
        d_logits[rows, labels] -= 1.0
        cotangents.append(Cotangent('cls', fwd, scale * d_logits / n))
    return TermValue(total / n, tuple(cotangents))


def on_term(fwd_x, fwd_on, scale=1.0):
    """Mean ``|f(x_on) - f(x)|^2`` over the batch, gradients into both passes."""
    n = fwd_x.logits.shape[0]
    diff = fwd_on.logits - fwd_x.logits
    value = float(np.sum(diff ** 2)) / n
    if scale == 0:
        return TermValue(value, ())
    grad = 2.0 * scale * diff / n
    return TermValue(value, (Cotangent('on', fwd_on, grad), Cotangent('on', fwd_x, -grad)))


def off_term(fwd_x, fwd_off, scale=1.0):
    """Mean ``KL(p(x) || p(x_off)) + |f(x) - f(x_off)|^2`` with floored probabilities."""
    n = fwd_x.logits.shape[0]
    keep_p = fwd_x.log_probs > LOG_FLOOR
    keep_q = fwd_off.log_probs > LOG_FLOOR
    log_p = np.maximum(fwd_x.log_probs, LOG_FLOOR)
    log_q = np.maximum(fwd_off.log_probs, LOG_FLOOR)
    p, q = fwd_x.probs, fwd_off.probs
    p_floor = np.exp(log_p)
    diff = fwd_x.logits - fwd_off.logits
    kl = np.sum(p_floor * (log_p - log_q), axis=1)
    value = float(np.sum(kl) + np.sum(diff ** 2)) / n
    clamped = int(np.sum(~keep_p) + np.sum(~keep_q))
    if clamped:
        logger.debug('off term floored %d probabilities at %g', clamped, PROB_FLOOR)
    if scale == 0:
        return TermValue(value, (), clamped)

    weighted = keep_p * p * (log_p - log_q)
    mass = np.sum(keep_p * p, axis=1, keepdims=True)
    d_clean = weighted - p * weighted.sum(axis=1, keepdims=True) + keep_p * p - p * mass
    live = keep_q * p_floor
    d_off = -live + q * live.sum(axis=1, keepdims=True)
    d_clean = d_clean + 2.0 * diff
    d_off = d_off - 2.0 * diff
    factor = scale / n
    return TermValue(value, (Cotangent('off', fwd_x, factor * d_clean),
                             Cotangent('off', fwd_off, factor * d_off)), clamped)


def _path_gradient(points, paths, reachable, weights):
    """Gradient of ``sum_ij weights[i, j] * length(path_ij)`` with paths held fixed."""
    grad = np.zeros_like(points)
    tails, heads, mass = [], [], []
    for (i, j), path in paths.items():
        weight = weights[i, j]
        if weight <= _PATH_WEIGHT_FLOOR or not reachable[i, j] or path.shape[0] < 2:
            continue
        tails.append(path[:-1])
        heads.append(path[1:])
        mass.append(np.full(path.shape[0] - 1, weight))
    if not tails:
        return grad
    tails, heads, mass = np.concatenate(tails), np.concatenate(heads), np.concatenate(mass)
    steps = points[tails] - points[heads]
    lengths = np.linalg.norm(steps, axis=1)
    live = lengths > 0
    pull = (mass[live] / lengths[live])[:, None] * steps[live]
    np.add.at(grad, tails[live], pull)
    np.add.at(grad, heads[live], -pull)
    return grad


def alignment_distances(source_emb, target_emb, geometry, with_paths=False):
    """Cross-domain d_g under ``geometry.geodesic_mode``.

    Returns:
        tuple: ``(dists, detail)`` where ``detail`` is the ``JointGeodesic``
            (graph mode) or the kernel bandwidth (kernel mode).
    """
    src, tgt = as_point_set(source_emb), as_point_set(target_emb)
    if geometry.geodesic_mode is GeodesicMode.KERNEL:
        dists, sigma = kernel_distances(src, tgt)
        return dists, sigma
    k = min(geometry.k, src.n + tgt.n - 1)
    if k < geometry.k:
        logger.debug('Joint graph over %d points uses k = %d', src.n + tgt.n, k)
    joint = joint_geodesic(src, tgt, k, with_paths=with_paths)
    return joint.dist, joint


def geom_term(fwd_source, fwd_target, w, geometry, scale=None):
    """Softmin geodesic alignment of the two batches' embeddings.

    Graph mode with ``geodesic_gradient = path`` differentiates each selected
    shortest path's Euclidean length with the path held fixed; ``stop`` gives
    no gradient. Kernel mode differentiates the kernel distance directly.
    """
    scale = w.lambda_geom if scale is None else scale
    emb_s, emb_t = fwd_source.embedding, fwd_target.embedding
    graph_mode = geometry.geodesic_mode is GeodesicMode.GRAPH
    want_paths = (graph_mode and scale != 0
                  and geometry.geodesic_gradient is GeodesicGradient.PATH)
    dists, detail = alignment_distances(emb_s, emb_t, geometry, with_paths=want_paths)
    value = geom_value(dists, w.tau)
    if scale == 0 or (graph_mode and not want_paths):
        return TermValue(value, ())

    weights = geom_weights(dists, w.tau)
    if graph_mode:
        joint = np.vstack([emb_s, emb_t])
        grad = _path_gradient(joint, detail.paths, detail.reachable, weights)
        grad_s, grad_t = grad[:emb_s.shape[0]], grad[emb_s.shape[0]:]
    else:
        inv = 1.0 / detail ** 2
        grad_s = inv * (weights.sum(axis=1)[:, None] * emb_s - weights @ emb_t)
        grad_t = inv * (weights.sum(axis=0)[:, None] * emb_t - weights.T @ emb_s)
    zeros_s = np.zeros_like(fwd_source.logits)
    zeros_t = np.zeros_like(fwd_target.logits)
    return TermValue(value, (Cotangent('geom', fwd_source, zeros_s, scale * grad_s),
                             Cotangent('geom', fwd_target, zeros_t, scale * grad_t)))


@dataclass(frozen=True)
class ObjectiveBatch:
    """Inputs of one training step.

    ``x_on`` and ``x_off`` are the perturbed copies of the labeled source rows
    ``x``; ``x_shots``/``y_shots`` are the optional labeled target rows of the
    few-shot protocol.
    """

    x: np.ndarray
    y: np.ndarray
    x_on: np.ndarray
    x_off: np.ndarray
    x_target: np.ndarray
    x_shots: Optional[np.ndarray] = None
    y_shots: Optional[np.ndarray] = None


class ObjectiveResult(NamedTuple):
    """Loss breakdown, parameter gradient and floored-probability count."""

    breakdown: LossBreakdown
    grads: object
    clamped: int


def objective(spec, params, batch, w, geometry=None):
    """Evaluate the total loss of one step and its parameter gradient.

    Raises:
        GamaNumericError: naming the term whose value or gradient is not finite.
    """
    geometry = geometry if geometry is not None else GeometryConfig()
    fwd_x = run(spec, params, batch.x)
    labeled = [(fwd_x, np.asarray(batch.y))]
    if batch.x_shots is not None and len(batch.x_shots):
        labeled.append((run(spec, params, batch.x_shots), np.asarray(batch.y_shots)))
    cls_ = cls_term(labeled)
    on = on_term(fwd_x, run(spec, params, batch.x_on), w.lambda_on)
    off = off_term(fwd_x, run(spec, params, batch.x_off), w.lambda_off)
    geom = geom_term(fwd_x, run(spec, params, batch.x_target), w, geometry)

    breakdown = loss_total((cls_.value, on.value, off.value, geom.value), w)
    cotangents = [*cls_.cotangents, *on.cotangents, *off.cotangents, *geom.cotangents]
    grads = param_gradients(spec, params, cotangents)
    return ObjectiveResult(breakdown, grads, off.clamped)
