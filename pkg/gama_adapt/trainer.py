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

"""Training loop.

Each step samples a source batch and a (cycled) target batch, estimates the
local manifold of the source batch in input space, splits the input gradient
of every source sample into on- and off-manifold moves, evaluates the total
loss on the clean, perturbed and target inputs and applies one optimizer
update.

Model selection keeps the parameters of the best epoch: by source-validation
accuracy in the unsupervised protocol, by target-test accuracy when labeled
target shots are used. The unsupervised protocol never reads a target label
during :func:`fit`; the bundle's ``target_label_reads`` counter proves it.
"""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .constants import EPOCH_CSV_HEADER, ManifoldEstimator, ManifoldRefresh
from .exceptions import GamaGeometryError, GamaNumericError, GamaParameterError, GamaTrainingError
from .geometry import GeometryConfig, PointSet, build_knn_graph, estimate_tangent
from .losses import LossBreakdown, LossWeights, ObjectiveBatch, objective
from .metrics import accuracy
from .model import (AutoencoderParams, NetParams, NetSpec, autoencoder_residual,
                    init_autoencoder, init_params, input_gradient, reconstruction_gradients)
from .optimizers import OptimizerConfig, OptimizerState, apply_update
from .optimizers import init_state as init_optimizer
from .perturb import PerturbConfig, perturb_batch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Schedule, optimizer and objective settings of one training run."""

    net: NetSpec
    epochs: int = 100
    batch_size_source: int = 64
    batch_size_target: int = 64
    optimizer: OptimizerConfig = OptimizerConfig()
    seed: int = 0
    init_seed: Optional[int] = None
    manifold_refresh: ManifoldRefresh = ManifoldRefresh.PER_BATCH
    manifold_estimator: ManifoldEstimator = ManifoldEstimator.PCA
    weights: LossWeights = LossWeights()
    perturb: PerturbConfig = PerturbConfig()
    geometry: GeometryConfig = GeometryConfig()
    ae_latent: int = 1
    ae_hidden: int = 16
    ae_epochs: int = 50

    def __post_init__(self):
        for name in ('batch_size_source', 'batch_size_target', 'ae_latent', 'ae_hidden'):
            if int(getattr(self, name)) < 1:
                raise GamaParameterError('{} must be >= 1'.format(name))
            object.__setattr__(self, name, int(getattr(self, name)))
        for name in ('epochs', 'ae_epochs'):
            if int(getattr(self, name)) < 0:
                raise GamaParameterError('{} must be >= 0'.format(name))
            object.__setattr__(self, name, int(getattr(self, name)))
        object.__setattr__(self, 'manifold_refresh', ManifoldRefresh(self.manifold_refresh))
        object.__setattr__(self, 'manifold_estimator',
                           ManifoldEstimator(self.manifold_estimator))

    @property
    def learning_rate(self):
        """Optimizer step size."""
        return self.optimizer.learning_rate

    @property
    def param_seed(self):
        """Seed of the parameter initialization."""
        return self.seed if self.init_seed is None else self.init_seed


@dataclass(frozen=True)
class EpochRecord:
    """Metrics of one finished epoch; ``None`` marks a metric not computed."""

    epoch: int
    source_val_accuracy: float
    target_test_accuracy: Optional[float]
    mean_total: float

    def row(self):
        """CSV row in ``EPOCH_CSV_HEADER`` order."""
        return (self.epoch, self.source_val_accuracy, self.target_test_accuracy,
                self.mean_total)


@dataclass(frozen=True)
class TrainState:
    """Parameters, optimizer moments and history of a run."""

    params: NetParams
    optimizer: OptimizerState
    step: int = 0
    epoch: int = 0
    history: Tuple[LossBreakdown, ...] = ()
    epochs: Tuple[EpochRecord, ...] = ()
    best_params: Optional[NetParams] = None
    best_epoch: Optional[int] = None
    best_score: Optional[float] = None
    autoencoder: Optional[AutoencoderParams] = field(default=None, repr=False)
    target_cursor: int = 0
    shot_cursor: int = 0
    clamped: int = 0


def init_state(cfg):
    """Seeded initial parameters with zeroed optimizer moments."""
    params = init_params(cfg.net, cfg.param_seed)
    return TrainState(params=params, optimizer=init_optimizer(cfg.optimizer, params))


def _cycled_rows(n, cursor, size, seed, stream):
    """``size`` rows of an endless sequence of seeded permutations of ``range(n)``."""
    rows = []
    position = cursor
    while len(rows) < size:
        cycle, offset = divmod(position, n)
        order = np.random.default_rng([seed, stream, cycle]).permutation(n)
        take = min(size - len(rows), n - offset)
        rows.extend(order[offset:offset + take].tolist())
        position += take
    return np.array(rows, dtype=np.int64), position


def _batch_frames(x, geometry):
    """Tangent frame of every row of ``x`` from a k-NN graph over ``x``."""
    if x.shape[0] < 2:
        return [None] * x.shape[0]
    pts = PointSet.from_array(x)
    graph = build_knn_graph(pts, min(geometry.k, pts.n - 1))
    frames = []
    for row in range(pts.n):
        try:
            frames.append(estimate_tangent(pts, graph, row, geometry.tangent_rule))
        except GamaGeometryError as ex:
            logger.debug('No tangent frame for row %d: %s', row, ex)
            frames.append(None)
    return frames


def pretrain_autoencoder(x, cfg):
    """Fit an autoencoder to ``x`` by minimizing the mean reconstruction error."""
    ae = init_autoencoder(x.shape[1], cfg.ae_latent, cfg.ae_hidden, cfg.param_seed + 1)
    n_enc = len(ae.encoder.arrays())
    joint = NetParams.from_arrays(ae.encoder.arrays() + ae.decoder.arrays())
    opt = init_optimizer(cfg.optimizer, joint)
    loss = float('nan')
    for epoch in range(cfg.ae_epochs):
        order = np.random.default_rng([cfg.seed, 2, epoch]).permutation(x.shape[0])
        for start in range(0, x.shape[0], cfg.batch_size_source):
            rows = order[start:start + cfg.batch_size_source]
            loss, enc_grads, dec_grads = reconstruction_gradients(ae, x[rows])
            grads = NetParams.from_arrays(enc_grads.arrays() + dec_grads.arrays())
            joint, opt = apply_update(cfg.optimizer, joint, grads, opt)
            arrays = joint.arrays()
            ae = AutoencoderParams(ae.encoder_spec, NetParams.from_arrays(arrays[:n_enc]),
                                   ae.decoder_spec, NetParams.from_arrays(arrays[n_enc:]))
        logger.debug('Autoencoder epoch %d: reconstruction loss %.6g', epoch, loss)
    if not np.isfinite(loss) and cfg.ae_epochs:
        raise GamaNumericError('Autoencoder pretraining diverged', term='autoencoder')
    logger.info('Pretrained autoencoder for %d epochs, final loss %.6g', cfg.ae_epochs, loss)
    return ae


def _perturb(state, cfg, x, y, frames):
    if cfg.perturb.alpha == 0 and cfg.perturb.beta == 0:
        return x, x
    grads = input_gradient(cfg.net, state.params, x, y)
    if cfg.manifold_estimator is ManifoldEstimator.AUTOENCODER:
        moved = perturb_batch(x, grads, cfg.perturb,
                              residuals=autoencoder_residual(state.autoencoder, x))
    else:
        moved = perturb_batch(x, grads, cfg.perturb, frames=frames)
    return moved.x_on, moved.x_off


def train_step(state, cfg, batch_x, batch_y, target_x, shots=None, frames=None):
    """Run one optimizer step on a source batch and a target batch.

    Raises:
        GamaTrainingError: if a loss, gradient or parameter is not finite;
            ``last_good`` holds the parameters before this step.
    """
    try:
        if frames is None and cfg.manifold_estimator is ManifoldEstimator.PCA:
            if cfg.perturb.alpha or cfg.perturb.beta:
                frames = _batch_frames(batch_x, cfg.geometry)
        x_on, x_off = _perturb(state, cfg, batch_x, batch_y, frames)
        batch = ObjectiveBatch(x=batch_x, y=batch_y, x_on=x_on, x_off=x_off, x_target=target_x,
                               x_shots=None if shots is None else shots[0],
                               y_shots=None if shots is None else shots[1])
        result = objective(cfg.net, state.params, batch, cfg.weights, cfg.geometry)
    except GamaNumericError as ex:
        raise GamaTrainingError('Training diverged at step {}: {}'.format(state.step + 1, ex),
                                term=ex.term, last_good=state.params,
                                step=state.step + 1) from ex
    params, opt = apply_update(cfg.optimizer, state.params, result.grads, state.optimizer)
    if not params.all_finite():
        raise GamaTrainingError('Parameters became non-finite at step {}'.format(state.step + 1),
                                term='params', last_good=state.params, step=state.step + 1)
    logger.debug('step %d: %s', state.step + 1, result.breakdown)
    return replace(state, params=params, optimizer=opt, step=state.step + 1,
                   history=state.history + (result.breakdown,),
                   clamped=state.clamped + result.clamped)


def _selection_split(bundle):
    if bundle.few_shot:
        return 'target_test'
    return 'source_val' if len(bundle.source_val) else 'source_train'


def _evaluate_epoch(state, bundle, cfg, steps_before):
    source = bundle.source_val if len(bundle.source_val) else bundle.source_train
    source_acc = accuracy(cfg.net, state.params, source.x, source.y)
    target_acc = None
    if bundle.few_shot:
        target_acc = accuracy(cfg.net, state.params, bundle.target_test.x, bundle.target_test.y)
    totals = [b.total for b in state.history[steps_before:]]
    return EpochRecord(epoch=state.epoch, source_val_accuracy=source_acc,
                       target_test_accuracy=target_acc,
                       mean_total=float(np.mean(totals)) if totals else float('nan'))


def train_epoch(state, bundle, cfg):
    """One pass over ``bundle.source_train`` paired with cycled target batches.

    Returns:
        TrainState: the state after the epoch, with the epoch's metrics
            recorded and the best parameters updated.
    """
    source = bundle.source_train
    x_all, y_all = source.x, source.y
    if cfg.manifold_estimator is ManifoldEstimator.AUTOENCODER and state.autoencoder is None:
        state = replace(state, autoencoder=pretrain_autoencoder(x_all, cfg))
    n = x_all.shape[0]
    epoch_frames = None
    if (cfg.manifold_refresh is ManifoldRefresh.PER_EPOCH
            and cfg.manifold_estimator is ManifoldEstimator.PCA
            and (cfg.perturb.alpha or cfg.perturb.beta)):
        epoch_frames = _batch_frames(x_all, cfg.geometry)
    target_x = bundle.target_train.x
    if target_x.shape[0] == 0:
        raise GamaParameterError('The target training pool is empty')
    shots_x = shots_y = None
    if bundle.few_shot:
        shots_x, shots_y = bundle.target_shots.x, bundle.target_shots.y

    steps_before = state.step
    order = np.random.default_rng([cfg.seed, 0, state.epoch]).permutation(n)
    for start in range(0, n, cfg.batch_size_source):
        rows = order[start:start + cfg.batch_size_source]
        t_rows, t_cursor = _cycled_rows(target_x.shape[0], state.target_cursor,
                                        cfg.batch_size_target, cfg.seed, 1)
        shots = None
        s_cursor = state.shot_cursor
        if shots_x is not None:
            s_rows, s_cursor = _cycled_rows(shots_x.shape[0], state.shot_cursor,
                                            min(cfg.batch_size_source, shots_x.shape[0]),
                                            cfg.seed, 3)
            shots = (shots_x[s_rows], shots_y[s_rows])
        frames = None if epoch_frames is None else [epoch_frames[r] for r in rows]
        state = train_step(state, cfg, x_all[rows], y_all[rows], target_x[t_rows], shots,
                           frames)
        state = replace(state, target_cursor=t_cursor, shot_cursor=s_cursor)

    state = replace(state, epoch=state.epoch + 1)
    record = _evaluate_epoch(state, bundle, cfg, steps_before)
    score = record.target_test_accuracy if bundle.few_shot else record.source_val_accuracy
    logger.info('epoch %d: source acc %.2f target acc %s mean loss %.6g', record.epoch,
                record.source_val_accuracy, record.target_test_accuracy, record.mean_total)
    state = replace(state, epochs=state.epochs + (record,))
    if state.best_score is None or score > state.best_score:
        state = replace(state, best_params=state.params, best_epoch=record.epoch,
                        best_score=score)
    return state


def fit(bundle, cfg, state=None):
    """Train for ``cfg.epochs`` epochs and return the state and a training report.

    The report holds per-epoch metrics, the wall time, the seed, the selected
    epoch and the target-label read count; callers add the configuration echo.

    Raises:
        GamaParameterError: if the bundle does not match ``cfg.net``.
        GamaTrainingError: on divergence.
    """
    if bundle.input_dim != cfg.net.input_dim:
        raise GamaParameterError('Bundle dimension {} does not match the network input {}'.format(
            bundle.input_dim, cfg.net.input_dim))
    if bundle.n_classes > cfg.net.n_classes:
        raise GamaParameterError('Bundle has {} classes but the network outputs {}'.format(
            bundle.n_classes, cfg.net.n_classes))
    started = time.perf_counter()
    state = state if state is not None else init_state(cfg)
    for _ in range(cfg.epochs):
        state = train_epoch(state, bundle, cfg)
    if state.clamped:
        logger.warning('Floored %d probabilities at 1e-12 during training', state.clamped)
    report = {
        'seed': cfg.seed,
        'epochs': [dict(zip(EPOCH_CSV_HEADER, r.row())) for r in state.epochs],
        'best_epoch': state.best_epoch,
        'selection': _selection_split(bundle),
        'steps': state.step,
        'clamped_probabilities': state.clamped,
        'target_label_reads': bundle.target_label_reads,
        'wall_time': time.perf_counter() - started,
    }
    return state, report


def selected_params(state):
    """Best parameters of the run, or the current ones before any epoch."""
    return state.best_params if state.best_params is not None else state.params


def loss_rows(state) -> List[tuple]:
    """Loss history as ``LOSS_CSV_HEADER`` rows, steps numbered from 1."""
    return [b.row(i + 1) for i, b in enumerate(state.history)]
