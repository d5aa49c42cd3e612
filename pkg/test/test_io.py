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

"""Test checkpoints, CSV tables and JSON reports."""

import json
import os

import numpy as np

from gama_adapt.constants import Activation, Generator
from gama_adapt.data import gen_two_moons_shift
from gama_adapt.exceptions import GamaConfigError, GamaParseError, GamaSchemaError
from gama_adapt.io import (json_ready, load_checkpoint, load_schema, read_embeddings,
                           save_checkpoint, validate_report, write_ablation_csv,
                           write_embeddings, write_epoch_csv, write_loss_csv, write_report)
from gama_adapt.metrics import MetricsReport
from gama_adapt.model import NetSpec, forward, init_params
from gama_adapt.version import __version__

from .base import GamaTestCase


def read_text(path):
    with open(path) as handle:
        return handle.read()


class TestCheckpoint(GamaTestCase):

    def setUp(self):
        super().setUp()
        self.directory = self.make_tempdir()
        self.spec = NetSpec((3, 7, 5, 2), Activation.RELU, 1)
        self.params = init_params(self.spec, 12)

    def test_round_trip(self):
        path = os.path.join(self.directory, 'run', 'checkpoint.npz')
        save_checkpoint(path, self.spec, self.params, seed=5)
        spec, params, header = load_checkpoint(path)
        self.assertEqual(spec, self.spec)
        for a, b in zip(params.arrays(), self.params.arrays()):
            self.assertArrayEqual(a, b)
        self.assertEqual(header['seed'], 5)
        self.assertEqual(header['format_version'], 1)
        self.assertEqual(header['gama_adapt_version'], __version__)
        x = self.rng.normal(size=(4, 3))
        self.assertArrayEqual(forward(spec, params, x).logits,
                              forward(self.spec, self.params, x).logits)

    def test_missing_file(self):
        with self.assertRaises(GamaConfigError):
            load_checkpoint(os.path.join(self.directory, 'absent.npz'))

    def test_not_a_checkpoint(self):
        text = os.path.join(self.directory, 'notes.npz')
        with open(text, 'w') as handle:
            handle.write('plain text')
        with self.assertRaises(GamaSchemaError):
            load_checkpoint(text)
        bare = os.path.join(self.directory, 'bare.npz')
        with open(bare, 'wb') as handle:
            np.savez(handle, W0=np.zeros((2, 2)))
        with self.assertRaises(GamaSchemaError):
            load_checkpoint(bare)

    def test_foreign_header(self):
        path = os.path.join(self.directory, 'foreign.npz')
        with open(path, 'wb') as handle:
            np.savez(handle, header=np.array(json.dumps({'format': 'other'})))
        with self.assertRaises(GamaSchemaError):
            load_checkpoint(path)


class TestTables(GamaTestCase):

    def setUp(self):
        super().setUp()
        self.directory = self.make_tempdir()

    def test_loss_csv_text(self):
        path = os.path.join(self.directory, 'loss.csv')
        write_loss_csv(path, [(1, 0.5, 0.25, 0.0, 1.0, 1.125), (2, 0.1, 0.0, 0.0, 0.0, 0.1)])
        self.assertEqual(read_text(path), 'step,cls,on,off,geom,total\n'
                                          '1,0.5,0.25,0.0,1.0,1.125\n'
                                          '2,0.1,0.0,0.0,0.0,0.1\n')

    def test_loss_csv_floats_round_trip(self):
        path = os.path.join(self.directory, 'loss.csv')
        value = 1.0 / 3.0
        write_loss_csv(path, [(1, value, value, value, value, value)])
        self.assertIn('0.3333333333333333', read_text(path))

    def test_epoch_csv_missing_value(self):
        path = os.path.join(self.directory, 'epochs.csv')
        write_epoch_csv(path, [(1, 50.0, None, 0.75)])
        self.assertEqual(read_text(path),
                         'epoch,source_val_accuracy,target_test_accuracy,mean_total\n'
                         '1,50.0,,0.75\n')

    def test_ablation_header(self):
        path = os.path.join(self.directory, 'ablation.csv')
        write_ablation_csv(path, [('full', 0, 90.0, 80.0, 0.5)])
        self.assertEqual(read_text(path).splitlines()[0],
                         'variant,seed,target_accuracy,robust_accuracy,geoalign')

    def test_embeddings_round_trip(self):
        path = os.path.join(self.directory, 'emb.csv')
        emb = self.rng.normal(size=(6, 3))
        write_embeddings(path, emb)
        self.assertTrue(read_text(path).startswith('e0,e1,e2\n'))
        self.assertArrayEqual(read_embeddings(path), emb)

    def test_read_embeddings_errors(self):
        with self.assertRaises(GamaConfigError):
            read_embeddings(os.path.join(self.directory, 'absent.csv'))
        empty = os.path.join(self.directory, 'empty.csv')
        with open(empty, 'w') as handle:
            handle.write('')
        with self.assertRaises(GamaSchemaError):
            read_embeddings(empty)
        header_only = os.path.join(self.directory, 'header.csv')
        with open(header_only, 'w') as handle:
            handle.write('e0,e1\n')
        with self.assertRaises(GamaSchemaError):
            read_embeddings(header_only)
        broken = os.path.join(self.directory, 'broken.csv')
        with open(broken, 'w') as handle:
            handle.write('e0,e1\n0.1,0.2\n0.3,oops\n')
        with self.assertRaises(GamaParseError) as ctx:
            read_embeddings(broken)
        self.assertEqual(ctx.exception.row, 2)


class TestReports(GamaTestCase):

    def _metrics(self):
        report = MetricsReport(target_accuracy=75.0, robust_accuracy=60.0, geoalign=0.4,
                               per_class_accuracy={'0': 80.0, '1': None}).to_dict()
        report['gama_adapt_version'] = __version__
        return report

    def test_json_ready(self):
        converted = json_ready({'a': np.float64(1.5), 'b': np.arange(2), 'c': (np.int32(3),),
                                'd': Generator.CSV, 'e': float('nan'), 'f': np.bool_(True)})
        self.assertEqual(converted, {'a': 1.5, 'b': [0, 1], 'c': [3], 'd': 'csv', 'e': None,
                                     'f': True})

    def test_write_valid_report(self):
        path = os.path.join(self.make_tempdir(), 'metrics_report.json')
        written = write_report(path, self._metrics(), 'metrics_report')
        text = read_text(path)
        self.assertTrue(text.endswith('}\n'))
        self.assertEqual(json.loads(text), written)

    def test_violation_names_location(self):
        report = self._metrics()
        report['robust_accuracy'] = 140.0
        with self.assertRaises(GamaSchemaError) as ctx:
            validate_report(report, 'metrics_report')
        self.assertEqual(ctx.exception.key, 'robust_accuracy')
        del report['geoalign']
        with self.assertRaises(GamaSchemaError):
            validate_report(report, 'metrics_report')

    def test_invalid_report_is_not_written(self):
        path = os.path.join(self.make_tempdir(), 'bad.json')
        with self.assertRaises(GamaSchemaError):
            write_report(path, {'seed': 1}, 'training_report')
        self.assertFalse(os.path.exists(path))

    def test_dataset_metadata_schema(self):
        bundle = gen_two_moons_shift(40, seed=1)
        validate_report(json_ready(bundle.metadata), 'dataset_metadata')

    def test_unknown_schema(self):
        with self.assertRaises(GamaSchemaError):
            load_schema('nonsense')
