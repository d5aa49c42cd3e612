# -*- coding: utf-8 -*-

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

# pylint: disable=missing-class-docstring, missing-function-docstring

"""Test optimizers and the training loop."""

import os
from dataclasses import replace

import numpy as np
import pandas as pd

from gama_adapt.constants import GeodesicGradient, GeodesicMode, OptimizerKind
from gama_adapt.data import SplitConfig, assemble_bundle, gen_two_moons_shift, load_csv
from gama_adapt.exceptions import GamaParameterError, GamaTrainingError
from gama_adapt.geometry import GeometryConfig
from gama_adapt.losses import LossWeights
from gama_adapt.metrics import accuracy
from gama_adapt.model import NetParams, NetSpec, init_params
from gama_adapt.optimizers import OptimizerConfig, apply_update
from gama_adapt.optimizers import init_state as init_optimizer
from gama_adapt.perturb import PerturbConfig
from gama_adapt.trainer import (TrainConfig, _cycled_rows, fit, init_state, loss_rows,
                                selected_params, train_step)

from .base import GamaTestCase
from .decorators import slow_test


def blob_bundle(n=200, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.array([[-3.0, 0.0], [3.0, 0.0]])

    def draw():
        y = np.repeat([0, 1], n // 2)
        return centers[y] + 0.5 * rng.normal(size=(n, 2)), y

    x_s, y_s = draw()
    x_t, y_t = draw()
    metadata = {'generator': 'csv', 'seed': seed, 'n_classes': 2, 'params': {}}
    return assemble_bundle(x_s, y_s, x_t, y_t, SplitConfig(), rng, metadata)


def small_config(**kwargs):
    options = dict(net=NetSpec.default(2, 2, hidden=(8,)), epochs=2, batch_size_source=32,
                   batch_size_target=32, seed=3, geometry=GeometryConfig(k=5))
    options.update(kwargs)
    return TrainConfig(**options)


class TestOptimizers(GamaTestCase):

    def setUp(self):
        super().setUp()
        self.params = NetParams.from_arrays([np.ones((2, 2)), np.zeros(2)])
        self.grads = NetParams.from_arrays([np.full((2, 2), 0.5), np.array([1.0, -2.0])])

    def test_sgd(self):
        cfg = OptimizerConfig(kind=OptimizerKind.SGD, learning_rate=0.1)
        new, state = apply_update(cfg, self.params, self.grads, init_optimizer(cfg, self.params))
        self.assertAllClose(new.weights[0], np.full((2, 2), 0.95))
        self.assertAllClose(new.biases[0], [-0.1, 0.2])
        self.assertEqual(state.step, 1)

    def test_sgd_momentum(self):
        cfg = OptimizerConfig(kind='sgd', learning_rate=0.1, momentum=0.5)
        state = init_optimizer(cfg, self.params)
        params, state = apply_update(cfg, self.params, self.grads, state)
        params, state = apply_update(cfg, params, self.grads, state)
        self.assertAllClose(params.biases[0], [-0.1 - 0.15, 0.2 + 0.3])

    def test_adam_first_step_moves_by_learning_rate(self):
        cfg = OptimizerConfig(learning_rate=0.01)
        new, _ = apply_update(cfg, self.params, self.grads, init_optimizer(cfg, self.params))
        self.assertAllClose(new.biases[0], [-0.01, 0.01], rtol=1e-6)

    def test_invalid_settings(self):
        with self.assertRaises(GamaParameterError):
            OptimizerConfig(learning_rate=-1.0)
        with self.assertRaises(GamaParameterError):
            OptimizerConfig(beta1=1.0)
        with self.assertRaises(ValueError):
            OptimizerConfig(kind='rmsprop')

    def test_momentum_ignored_by_adam_warns(self):
        with self.assertWarns(UserWarning):
            OptimizerConfig(kind=OptimizerKind.ADAM, momentum=0.9)


class TestCycledRows(GamaTestCase):

    def test_every_row_once_per_cycle(self):
        rows, cursor = _cycled_rows(7, 0, 14, seed=1, stream=1)
        self.assertEqual(cursor, 14)
        self.assertEqual(sorted(rows[:7].tolist()), list(range(7)))
        self.assertEqual(sorted(rows[7:].tolist()), list(range(7)))

    def test_cursor_continues_the_stream(self):
        whole, _ = _cycled_rows(5, 0, 12, seed=2, stream=1)
        first, cursor = _cycled_rows(5, 0, 4, seed=2, stream=1)
        second, _ = _cycled_rows(5, cursor, 8, seed=2, stream=1)
        self.assertArrayEqual(np.concatenate([first, second]), whole)


class TestFit(GamaTestCase):

    def setUp(self):
        super().setUp()
        self.bundle = gen_two_moons_shift(100, seed=0)

    def test_zero_learning_rate_keeps_parameters(self):
        cfg = small_config(epochs=1, optimizer=OptimizerConfig(learning_rate=0.0))
        state, _ = fit(self.bundle, cfg)
        initial = init_params(cfg.net, cfg.param_seed)
        for before, after in zip(initial.arrays(), state.params.arrays()):
            self.assertArrayEqual(after, before)

    def test_deterministic(self):
        cfg = small_config()
        first, _ = fit(self.bundle, cfg)
        second, _ = fit(gen_two_moons_shift(100, seed=0), cfg)
        self.assertEqual(loss_rows(first), loss_rows(second))
        for a, b in zip(first.params.arrays(), second.params.arrays()):
            self.assertArrayEqual(a, b)

    def test_zero_epochs(self):
        cfg = small_config(epochs=0)
        state, report = fit(self.bundle, cfg)
        self.assertEqual(report['epochs'], [])
        self.assertIsNone(report['best_epoch'])
        self.assertEqual(report['steps'], 0)
        initial = init_params(cfg.net, cfg.param_seed)
        self.assertArrayEqual(selected_params(state).weights[0], initial.weights[0])

    def test_unsupervised_protocol_reads_no_target_labels(self):
        _, report = fit(self.bundle, small_config())
        self.assertEqual(report['target_label_reads'], 0)
        self.assertEqual(self.bundle.target_label_reads, 0)
        self.assertEqual(report['selection'], 'source_val')
        self.assertIsNone(report['epochs'][0]['target_test_accuracy'])

    def test_few_shot_selects_on_target(self):
        bundle = gen_two_moons_shift(100, seed=0, splits=SplitConfig(shots_per_class=2))
        _, report = fit(bundle, small_config())
        self.assertEqual(report['selection'], 'target_test')
        self.assertIsNotNone(report['epochs'][-1]['target_test_accuracy'])

    def test_history_matches_weighted_sum(self):
        weights = LossWeights(lambda_on=0.7, lambda_off=0.3, lambda_geom=0.2, tau=0.5)
        state, report = fit(self.bundle, small_config(weights=weights))
        self.assertEqual(len(state.history), report['steps'])
        # 80 source rows in batches of 32
        self.assertEqual(report['steps'], 2 * 3)
        for step in state.history:
            expected = (step.cls + 0.7 * step.on + 0.3 * step.off + 0.2 * step.geom)
            self.assertAlmostEqual(step.total, expected, places=12)
        rows = loss_rows(state)
        self.assertEqual(rows[0][0], 1)
        self.assertEqual(rows[-1][0], 6)

    def test_best_epoch_recorded(self):
        state, report = fit(self.bundle, small_config(epochs=3))
        self.assertIn(report['best_epoch'], (1, 2, 3))
        self.assertEqual(len(report['epochs']), 3)
        self.assertIsNotNone(state.best_params)

    def test_bundle_must_match_network(self):
        with self.assertRaises(GamaParameterError):
            fit(self.bundle, small_config(net=NetSpec.default(3, 2, hidden=(4,))))

    def test_separable_blobs_are_learned(self):
        bundle = blob_bundle()
        cfg = small_config(epochs=20, optimizer=OptimizerConfig(learning_rate=0.05))
        state, _ = fit(bundle, cfg)
        params = selected_params(state)
        self.assertGreaterEqual(
            accuracy(cfg.net, params, bundle.source_val.x, bundle.source_val.y), 95.0)

    @slow_test
    def test_plain_supervised_two_moons(self):
        bundle = gen_two_moons_shift(400, noise=0.05, seed=0)
        cfg = small_config(net=NetSpec.default(2, 2, hidden=(32, 16)), epochs=200,
                           optimizer=OptimizerConfig(learning_rate=0.01),
                           weights=LossWeights(lambda_on=0.0, lambda_off=0.0, lambda_geom=0.0),
                           perturb=PerturbConfig(alpha=0.0, beta=0.0))
        state, _ = fit(bundle, cfg)
        params = selected_params(state)
        self.assertTrue(all(b.total == b.cls for b in state.history))
        self.assertGreaterEqual(
            accuracy(cfg.net, params, bundle.source_val.x, bundle.source_val.y), 95.0)


class TestTrainingVariants(GamaTestCase):

    def setUp(self):
        super().setUp()
        self.bundle = gen_two_moons_shift(60, seed=1)

    def test_per_epoch_frames(self):
        state, _ = fit(self.bundle, small_config(epochs=1, manifold_refresh='per_epoch'))
        self.assertGreater(state.step, 0)

    def test_autoencoder_estimator(self):
        cfg = small_config(epochs=1, manifold_estimator='autoencoder', ae_epochs=2)
        state, _ = fit(self.bundle, cfg)
        self.assertIsNotNone(state.autoencoder)
        self.assertTrue(state.params.all_finite())

    def test_kernel_geodesics(self):
        geometry = GeometryConfig(k=5, geodesic_mode=GeodesicMode.KERNEL)
        state, _ = fit(self.bundle, small_config(epochs=1, geometry=geometry))
        self.assertTrue(state.params.all_finite())

    def test_stop_gradient_geodesics(self):
        geometry = GeometryConfig(k=5, geodesic_gradient=GeodesicGradient.STOP)
        state, _ = fit(self.bundle, small_config(epochs=1, geometry=geometry))
        self.assertTrue(all(np.isfinite(b.geom) for b in state.history))

    def test_without_perturbations(self):
        cfg = small_config(epochs=1, perturb=PerturbConfig(alpha=0.0, beta=0.0))
        state, _ = fit(self.bundle, cfg)
        self.assertTrue(all(b.on == 0.0 and b.off == 0.0 for b in state.history))


class TestDivergence(GamaTestCase):

    def test_non_finite_loss_keeps_last_good(self):
        cfg = small_config(perturb=PerturbConfig(alpha=0.0, beta=0.0))
        state = init_state(cfg)
        biases = list(state.params.biases)
        biases[-1] = np.array([np.nan, 0.0])
        state = replace(state, params=NetParams(state.params.weights, tuple(biases)))
        x = self.rng.normal(size=(8, 2))
        y = np.array([0, 1] * 4)
        with self.assertRaises(GamaTrainingError) as ctx:
            train_step(state, cfg, x, y, self.rng.normal(size=(8, 2)))
        self.assertEqual(ctx.exception.term, 'cls')
        self.assertEqual(ctx.exception.step, 1)
        self.assertIs(ctx.exception.last_good, state.params)


class TestHighDimensionalCsv(GamaTestCase):

    def test_65_class_2048_dim_dataset_trains(self):
        n_classes, dim = 65, 2048
        labels = np.repeat(np.arange(n_classes), 2)
        rows = []
        for domain, shift in (('source', 0.0), ('target', 0.5)):
            x = self.rng.normal(size=(labels.shape[0], dim)) + shift
            frame = pd.DataFrame(x, columns=['f{}'.format(i) for i in range(dim)])
            frame['label'] = labels
            frame['domain'] = domain
            rows.append(frame)
        path = os.path.join(self.make_tempdir(), 'features.csv')
        pd.concat(rows, ignore_index=True).to_csv(path, index=False)

        bundle = load_csv(path, seed=0)
        self.assertEqual(bundle.input_dim, dim)
        self.assertEqual(bundle.n_classes, n_classes)
        cfg = small_config(net=NetSpec.default(dim, n_classes, hidden=(16,)), epochs=1,
                           batch_size_source=64, batch_size_target=64,
                           geometry=GeometryConfig(k=10))
        state, report = fit(bundle, cfg)
        self.assertTrue(state.params.all_finite())
        self.assertEqual(report['target_label_reads'], 0)
