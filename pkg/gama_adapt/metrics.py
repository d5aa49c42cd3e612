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

"""Evaluation metrics: clean and robust accuracy, GeoAlign, diagnostics.

Accuracies are percentages. GeoAlign is the symmetric mean of hard-min
geodesic distances between source and target embeddings over a joint k-NN
graph, each domain sub-sampled to at most ``cap`` points.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .exceptions import GamaGeometryError, GamaParameterError
from .geometry import (DEFAULT_K, as_point_set, build_knn_graph, estimate_tangent,
                       explained_variance_profile, joint_geodesic)
from .losses import geom_value
from .model import forward, input_gradient
from .perturb import perturb_batch, pgd_attack

logger = logging.getLogger(__name__)

DEFAULT_GEOALIGN_CAP = 2000
ROBUST_SLACK = 0.5


def predict(spec, params, x):
    """Arg-max class of every row of ``x``."""
    return np.argmax(forward(spec, params, np.atleast_2d(x)).logits, axis=1)


def _check_eval(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y).reshape(-1)
    if x.shape[0] == 0:
        raise GamaParameterError('Cannot evaluate on an empty split')
    if y.shape[0] != x.shape[0]:
        raise GamaParameterError('{} inputs but {} labels'.format(x.shape[0], y.shape[0]))
    return x, y


def accuracy(spec, params, x, y):
    """Top-1 accuracy in percent."""
    x, y = _check_eval(x, y)
    return 100.0 * float(np.mean(predict(spec, params, x) == y))


def per_class_accuracy(spec, params, x, y, n_classes=None):
    """Accuracy in percent of each class present in ``y`` (``None`` if absent)."""
    x, y = _check_eval(x, y)
    pred = predict(spec, params, x)
    n_classes = n_classes if n_classes is not None else spec.n_classes
    out = {}
    for cls in range(n_classes):
        mask = y == cls
        out[str(cls)] = 100.0 * float(np.mean(pred[mask] == cls)) if mask.any() else None
    return out


def robust_accuracy(spec, params, x, y, atk, bounds=None, rng=None):
    """Accuracy in percent on PGD adversarial examples of ``x``.

    A sample counts only when both the clean input and its adversarial
    counterpart are classified correctly, so the result never exceeds the
    clean accuracy.
    """
    x, y = _check_eval(x, y)
    adv = pgd_attack(spec, params, x, y.astype(np.int64), atk, bounds=bounds, rng=rng)
    held = (predict(spec, params, x) == y) & (predict(spec, params, adv) == y)
    return 100.0 * float(np.mean(held))


def subsample(points, cap, seed=0):
    """At most ``cap`` rows of ``points``, seeded and in original order."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] <= cap:
        return points
    rows = np.sort(np.random.default_rng(seed).choice(points.shape[0], cap, replace=False))
    return points[rows]


def _capped_joint_geodesic(source_emb, target_emb, k, cap, seed):
    src = subsample(as_point_set(source_emb).points, cap, seed)
    tgt = subsample(as_point_set(target_emb).points, cap, seed + 1)
    k = min(k, src.shape[0] + tgt.shape[0] - 1)
    return joint_geodesic(src, tgt, k).dist


def _joint_min_distances(source_emb, target_emb, k, cap, seed):
    dist = _capped_joint_geodesic(source_emb, target_emb, k, cap, seed)
    return dist.min(axis=1), dist.min(axis=0)


def geoalign(source_emb, target_emb, k=DEFAULT_K, cap=DEFAULT_GEOALIGN_CAP, seed=0):
    """Mean of the two directional averages of nearest geodesic distances.

    Raises:
        GamaParameterError: if either set is empty or dimensions differ.
    """
    to_target, to_source = _joint_min_distances(source_emb, target_emb, k, cap, seed)
    return 0.5 * (float(np.mean(to_target)) + float(np.mean(to_source)))


def soft_geoalign(source_emb, target_emb, tau, k=DEFAULT_K, cap=DEFAULT_GEOALIGN_CAP, seed=0):
    """:func:`geoalign` with every minimum replaced by a softmin at temperature ``tau``.

    Uses the same subsample as :func:`geoalign`, so it never exceeds it.
    """
    dist = _capped_joint_geodesic(source_emb, target_emb, k, cap, seed)
    return 0.5 * geom_value(dist, tau)


def directed_geodesic_discrepancy(source_emb, target_emb, k=DEFAULT_K,
                                  cap=DEFAULT_GEOALIGN_CAP, seed=0):
    """Largest nearest-neighbor geodesic distance in each direction."""
    to_target, to_source = _joint_min_distances(source_emb, target_emb, k, cap, seed)
    return {'source_to_target': float(to_target.max()),
            'target_to_source': float(to_source.max())}


def consistency_gap(spec, params, x, y, pcfg, k=DEFAULT_K, m=0.9):
    """Mean and max of ``|f(x_on) - f(x)|`` over labeled inputs.

    Tangent frames come from a k-NN graph over ``x``; rows whose neighborhood
    is degenerate are left unperturbed.
    """
    x, y = _check_eval(x, y)
    if x.shape[0] < 2:
        return {'mean': 0.0, 'max': 0.0}
    graph = build_knn_graph(x, min(k, x.shape[0] - 1))
    frames = []
    for row in range(x.shape[0]):
        try:
            frames.append(estimate_tangent(x, graph, row, m))
        except GamaGeometryError:
            frames.append(None)
    grads = input_gradient(spec, params, x, y.astype(np.int64))
    moved = perturb_batch(x, grads, pcfg, frames=frames)
    gap = np.linalg.norm(forward(spec, params, moved.x_on).logits
                         - forward(spec, params, x).logits, axis=1)
    return {'mean': float(gap.mean()), 'max': float(gap.max())}


def variance_summary(points, k=DEFAULT_K, m=0.9):
    """Mean and min explained variance of the tangent frames of ``points``."""
    pts = as_point_set(points)
    if pts.n < 2:
        return {'mean': None, 'min': None}
    profile = explained_variance_profile(pts, build_knn_graph(pts, min(k, pts.n - 1)), m)
    if np.all(np.isnan(profile)):
        return {'mean': None, 'min': None}
    return {'mean': float(np.nanmean(profile)), 'min': float(np.nanmin(profile))}


@dataclass
class MetricsReport:
    """Evaluation of one checkpoint, or the aggregate over several seeds."""

    target_accuracy: float
    robust_accuracy: float
    geoalign: float
    per_class_accuracy: Dict[str, Optional[float]] = field(default_factory=dict)
    loss_history: Optional[str] = None
    seeds: List[int] = field(default_factory=list)
    per_seed: List[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.geoalign < 0:
            raise GamaParameterError('geoalign must be >= 0, got {}'.format(self.geoalign))
        if self.robust_accuracy > self.target_accuracy + ROBUST_SLACK:
            if len(self.seeds) <= 1:
                raise GamaParameterError(
                    'Robust accuracy {:.2f} exceeds clean accuracy {:.2f}'.format(
                        self.robust_accuracy, self.target_accuracy))
            logger.warning('Robust accuracy %.2f exceeds clean accuracy %.2f',
                           self.robust_accuracy, self.target_accuracy)

    def to_dict(self):
        """JSON-ready form, validated by the ``metrics_report`` schema."""
        return {'target_accuracy': self.target_accuracy,
                'robust_accuracy': self.robust_accuracy,
                'geoalign': self.geoalign,
                'per_class_accuracy': dict(self.per_class_accuracy),
                'loss_history': self.loss_history,
                'seeds': list(self.seeds),
                'per_seed': list(self.per_seed),
                'diagnostics': dict(self.diagnostics)}


def mean_std(values):
    """``{'mean', 'std'}`` of ``values`` (population std)."""
    arr = np.asarray(values, dtype=float)
    return {'mean': float(arr.mean()), 'std': float(arr.std())}


def aggregate(reports, seeds):
    """Combine per-seed reports into one with mean values and spreads."""
    if not reports:
        raise GamaParameterError('Nothing to aggregate')
    per_seed = [dict(r.to_dict(), seed=s) for r, s in zip(reports, seeds)]
    for entry in per_seed:
        entry.pop('per_seed')
        entry.pop('seeds')
    spreads = {name: mean_std([getattr(r, name) for r in reports])
               for name in ('target_accuracy', 'robust_accuracy', 'geoalign')}
    return MetricsReport(target_accuracy=spreads['target_accuracy']['mean'],
                         robust_accuracy=spreads['robust_accuracy']['mean'],
                         geoalign=spreads['geoalign']['mean'],
                         per_class_accuracy=reports[0].per_class_accuracy
                         if len(reports) == 1 else {},
                         seeds=[int(s) for s in seeds], per_seed=per_seed,
                         diagnostics={'spread': spreads})


def evaluate(spec, params, bundle, atk, bounds=None, k=DEFAULT_K, cap=DEFAULT_GEOALIGN_CAP,
             seed=0, pcfg=None, tangent_rule=0.9, loss_history=None):
    """Clean and robust target-test accuracy, GeoAlign and bound diagnostics.

    GeoAlign compares the embeddings of ``source_train`` with those of the
    unlabeled ``target_train`` pool. Target-test labels are read here, so the
    unlabeled protocol treats this as the final evaluation.

    Raises:
        GamaParameterError: if the network does not accept the bundle's inputs.
    """
    if spec.input_dim != bundle.input_dim:
        raise GamaParameterError('Checkpoint expects {} inputs but the dataset has {}'.format(
            spec.input_dim, bundle.input_dim))
    source_emb = forward(spec, params, bundle.source_train.x).embedding
    target_emb = forward(spec, params, bundle.target_train.x).embedding
    x_test, y_test = bundle.target_test.x, bundle.target_test.y
    rng = np.random.default_rng(seed)
    labeled = bundle.source_val if len(bundle.source_val) else bundle.source_train
    diagnostics = {
        'geodesic_discrepancy': directed_geodesic_discrepancy(source_emb, target_emb, k, cap,
                                                              seed),
        'explained_variance': {'source': variance_summary(bundle.source_train.x, k,
                                                          tangent_rule),
                               'target': variance_summary(bundle.target_train.x, k,
                                                          tangent_rule)},
    }
    if pcfg is not None:
        diagnostics['consistency_gap'] = consistency_gap(spec, params, labeled.x, labeled.y,
                                                         pcfg, k, tangent_rule)
    return MetricsReport(
        target_accuracy=accuracy(spec, params, x_test, y_test),
        robust_accuracy=robust_accuracy(spec, params, x_test, y_test, atk, bounds, rng),
        geoalign=geoalign(source_emb, target_emb, k, cap, seed),
        per_class_accuracy=per_class_accuracy(spec, params, x_test, y_test, bundle.n_classes),
        loss_history=loss_history, diagnostics=diagnostics)
