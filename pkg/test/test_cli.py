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

"""Test the gama-adapt command line."""

import contextlib
import io
import json
import os
from unittest import mock

from gama_adapt import cli
from gama_adapt.config import load_config
from gama_adapt.constants import AblationComponent
from gama_adapt.data import load_csv, metadata_path
from gama_adapt.exceptions import GamaTrainingError
from gama_adapt.io import load_checkpoint, validate_report, write_embeddings
from gama_adapt.model import NetSpec, init_params

from .base import GamaTestCase

CONFIG = """\
[dataset]
n_per_domain = 60

[model]
hidden_widths = 8

[train]
epochs = 2
batch_size_source = 16
batch_size_target = 16
learning_rate = 0.01

[geometry]
k = 5

[attack]
epsilon = 0.05
steps = 3

[metrics]
seeds = 0, 1
geoalign_k = 5

[output]
directory = {directory}
log_level = WARNING
"""


def read_text(path):
    with open(path) as handle:
        return handle.read()


class CliTestCase(GamaTestCase):

    def setUp(self):
        super().setUp()
        self.directory = self.make_tempdir()
        self.out_dir = os.path.join(self.directory, 'out')
        self.config_path = os.path.join(self.directory, 'experiment.ini')
        with open(self.config_path, 'w') as handle:
            handle.write(CONFIG.format(directory=self.out_dir))

    def run_cli(self, *argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            code = cli.main(list(argv))
        return code, stdout.getvalue(), stderr.getvalue()


class TestUsageErrors(CliTestCase):

    def test_missing_config(self):
        code, _, err = self.run_cli('train', os.path.join(self.directory, 'absent.ini'))
        self.assertEqual(code, 2)
        self.assertIn('absent.ini', err)

    def test_unknown_override(self):
        code, _, _ = self.run_cli('train', self.config_path, '--set', 'train.speed=1')
        self.assertEqual(code, 2)

    def test_missing_checkpoint(self):
        code, _, _ = self.run_cli('eval', self.config_path, '--checkpoint',
                                  os.path.join(self.directory, 'absent.npz'))
        self.assertEqual(code, 2)

    def test_geoalign_needs_both_embeddings(self):
        path = os.path.join(self.directory, 'emb.csv')
        write_embeddings(path, self.rng.normal(size=(4, 2)))
        code, _, _ = self.run_cli('geoalign', '--source-emb', path)
        self.assertEqual(code, 2)

    def test_gen_data_rejects_csv_generator(self):
        code, _, _ = self.run_cli('gen-data', self.config_path, '--set', 'dataset.generator=csv',
                                  '--set', 'dataset.csv_path=data.csv')
        self.assertEqual(code, 2)


class TestTrainAndEval(CliTestCase):

    def test_train_writes_artifacts(self):
        code, _, _ = self.run_cli('train', self.config_path)
        self.assertEqual(code, 0)
        for name in (cli.CHECKPOINT_NAME, cli.LOSS_CSV_NAME, cli.EPOCH_CSV_NAME,
                     cli.TRAINING_REPORT_NAME, 'config.ini'):
            self.assertTrue(os.path.isfile(os.path.join(self.out_dir, name)), msg=name)
        with open(os.path.join(self.out_dir, cli.TRAINING_REPORT_NAME)) as handle:
            report = json.load(handle)
        self.assertEqual(report['target_label_reads'], 0)
        self.assertEqual(report['selection'], 'source_val')
        self.assertEqual(len(report['epochs']), 2)
        self.assertEqual(report['config']['train']['epochs'], '2')
        validate_report(report, 'training_report')
        lines = read_text(os.path.join(self.out_dir, cli.LOSS_CSV_NAME)).splitlines()
        self.assertEqual(lines[0], 'step,cls,on,off,geom,total')
        self.assertEqual(len(lines) - 1, report['steps'])
        saved = load_config(os.path.join(self.out_dir, 'config.ini'))
        self.assertEqual(saved.to_dict(), load_config(self.config_path).to_dict())

    def test_rerun_is_byte_identical(self):
        first = os.path.join(self.directory, 'first')
        second = os.path.join(self.directory, 'second')
        for target in (first, second):
            code, _, _ = self.run_cli('train', self.config_path, '--set',
                                      'output.directory={}'.format(target))
            self.assertEqual(code, 0)
        for name in (cli.LOSS_CSV_NAME, cli.EPOCH_CSV_NAME):
            self.assertEqual(read_text(os.path.join(first, name)),
                             read_text(os.path.join(second, name)))

    def test_output_root_environment(self):
        root = os.path.join(self.directory, 'env_root')
        with mock.patch.dict(os.environ, {'GAMA_OUTPUT_ROOT': root}):
            code, _, _ = self.run_cli('train', self.config_path, '--set', 'train.epochs=1')
        self.assertEqual(code, 0)
        self.assertTrue(os.path.isfile(os.path.join(root, cli.CHECKPOINT_NAME)))

    def test_eval_and_geoalign(self):
        self.assertEqual(self.run_cli('train', self.config_path)[0], 0)
        checkpoint = os.path.join(self.out_dir, cli.CHECKPOINT_NAME)
        dump = os.path.join(self.directory, 'emb')
        code, out, _ = self.run_cli('eval', self.config_path, '--checkpoint', checkpoint,
                                    '--dump-embeddings', dump)
        self.assertEqual(code, 0)
        self.assertIn('target_accuracy=', out)
        with open(os.path.join(self.out_dir, cli.METRICS_REPORT_NAME)) as handle:
            report = json.load(handle)
        validate_report(report, 'metrics_report')
        self.assertEqual(report['loss_history'], os.path.join(self.out_dir, cli.LOSS_CSV_NAME))
        self.assertEqual(report['attack']['epsilon'], 0.05)

        code, out, _ = self.run_cli('geoalign', '--source-emb',
                                    os.path.join(dump, 'source_embeddings.csv'),
                                    '--target-emb', os.path.join(dump, 'target_embeddings.csv'),
                                    '--k', '5', '--tau', '0.1')
        self.assertEqual(code, 0)
        scores = json.loads(out.strip().splitlines()[-1])
        self.assertAlmostEqual(scores['geoalign'], report['geoalign'])
        self.assertLessEqual(scores['soft_geoalign'], scores['geoalign'] + 1e-12)

        target = os.path.join(self.directory, 'geoalign.json')
        code, _, _ = self.run_cli('geoalign', self.config_path, '--checkpoint', checkpoint,
                                  '--output', target)
        self.assertEqual(code, 0)
        with open(target) as handle:
            self.assertAlmostEqual(json.load(handle)['geoalign'], report['geoalign'])

    def test_divergence_exits_3_and_keeps_last_good(self):
        spec = NetSpec.default(2, 2, hidden=(8,))
        last_good = init_params(spec, 0)
        failure = GamaTrainingError('diverged', term='cls', last_good=last_good, step=3)
        with mock.patch('gama_adapt.cli.fit', side_effect=failure):
            code, _, err = self.run_cli('train', self.config_path)
        self.assertEqual(code, 3)
        self.assertIn('diverged', err)
        loaded_spec, params, _ = load_checkpoint(os.path.join(self.out_dir, cli.LAST_GOOD_NAME))
        self.assertEqual(loaded_spec, spec)
        self.assertArrayEqual(params.weights[0], last_good.weights[0])


class TestGenData(CliTestCase):

    def test_writes_csv_and_metadata(self):
        target = os.path.join(self.directory, 'data', 'moons.csv')
        code, _, _ = self.run_cli('gen-data', self.config_path, '--output', target)
        self.assertEqual(code, 0)
        self.assertTrue(os.path.isfile(metadata_path(target)))
        bundle = load_csv(target)
        expected = cli.build_bundle(load_config(self.config_path))
        self.assertEqual(bundle.split_sizes(), expected.split_sizes())
        self.assertArrayEqual(bundle.target_test.x, expected.target_test.x)

    def test_default_location(self):
        code, _, _ = self.run_cli('gen-data', self.config_path, '--set',
                                  'dataset.generator=swiss_roll')
        self.assertEqual(code, 0)
        with open(metadata_path(os.path.join(self.out_dir, cli.DATASET_NAME))) as handle:
            self.assertEqual(json.load(handle)['generator'], 'swiss_roll')


class TestAblate(CliTestCase):

    def test_variants(self):
        variants = cli.ablation_variants([AblationComponent.ON], baseline=True)
        self.assertEqual(list(variants), ['full', 'no_on', 'source_only'])
        self.assertEqual(variants['no_on'], {('loss', 'lambda_on'): '0',
                                             ('perturb', 'alpha'): '0'})

    def test_single_seed_drop_runs(self):
        code, _, err = self.run_cli('ablate', self.config_path, '--drop', 'geom',
                                    '--set', 'train.epochs=1', '--set', 'metrics.seeds=0',
                                    '--set', 'dataset.n_per_domain=40')
        self.assertEqual(code, 0, msg=err)
        lines = read_text(os.path.join(self.out_dir, cli.ABLATION_CSV_NAME)).splitlines()
        self.assertEqual([line.split(',')[:2] for line in lines[1:]],
                         [['full', '0'], ['no_geom', '0']])

    def test_variant_seed_overrides(self):
        out_dir = os.path.join(self.directory, 'variant')
        config = load_config(self.config_path, {('train', 'epochs'): '1'})
        report = cli.run_variant(config.to_dict(), config.path, 'no_off',
                                 {('loss', 'lambda_off'): '0'}, 7, out_dir)
        self.assertGreaterEqual(report.target_accuracy, report.robust_accuracy)
        with open(os.path.join(out_dir, 'no_off', 'seed_7', cli.TRAINING_REPORT_NAME)) as handle:
            training = json.load(handle)
        self.assertEqual(training['seed'], 7)
        self.assertEqual(training['config']['dataset']['seed'], '7')
        self.assertEqual(training['config']['loss']['lambda_off'], '0')

    def test_ablation_outputs(self):
        code, out, _ = self.run_cli('ablate', self.config_path, '--drop', 'geom', '--baseline')
        self.assertEqual(code, 0)
        lines = read_text(os.path.join(self.out_dir, cli.ABLATION_CSV_NAME)).splitlines()
        self.assertEqual(lines[0], 'variant,seed,target_accuracy,robust_accuracy,geoalign')
        self.assertEqual(len(lines) - 1, 3 * 2)
        with open(os.path.join(self.out_dir, cli.ABLATION_REPORT_NAME)) as handle:
            report = json.load(handle)
        validate_report(report, 'ablation_report')
        self.assertEqual(set(report['variants']), {'full', 'no_geom', 'source_only'})
        self.assertEqual(report['variants']['no_geom']['overrides'], {'loss.lambda_geom': '0'})
        self.assertEqual(report['seeds'], [0, 1])
        self.assertIn('no_geom', out)
        self.assertTrue(os.path.isfile(os.path.join(self.out_dir, 'no_geom', 'seed_1',
                                                    cli.CHECKPOINT_NAME)))

    def test_parallel_matches_serial(self):
        tables = []
        for jobs in ('1', '2'):
            target = os.path.join(self.directory, 'jobs_' + jobs)
            code, _, _ = self.run_cli('ablate', self.config_path, '--drop', 'on', '--jobs', jobs,
                                      '--set', 'metrics.seeds=3',
                                      '--set', 'output.directory={}'.format(target))
            self.assertEqual(code, 0)
            tables.append(read_text(os.path.join(target, cli.ABLATION_CSV_NAME)))
        self.assertEqual(tables[0], tables[1])
