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

"""Experiment configuration: one INI file, validated on load.

Every section and key a file may contain is listed in :data:`DEFAULTS`
together with its default; anything else is rejected. Values given on the
command line as ``section.key=value`` are applied after the file.

Example::

    [dataset]
    generator = two_moons
    rotation_deg = 30

    [train]
    epochs = 50
"""

import logging
import os
from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from ..constants import (OUTPUT_ROOT_ENV, Activation, GeodesicGradient, GeodesicMode,
                         Generator, ManifoldEstimator, ManifoldRefresh, OptimizerKind)
from ..data import CsvSchema, SplitConfig
from ..exceptions import GamaConfigError, GamaParameterError
from ..geometry import GeometryConfig
from ..losses import LossWeights
from ..model import NetSpec
from ..optimizers import OptimizerConfig
from ..perturb import AttackConfig, PerturbConfig
from ..trainer import TrainConfig

logger = logging.getLogger(__name__)

_BOOLEANS = ConfigParser.BOOLEAN_STATES


def _bool(text):
    if text.strip().lower() not in _BOOLEANS:
        raise ValueError('not a boolean: {!r}'.format(text))
    return _BOOLEANS[text.strip().lower()]


def _list(kind):
    def parse(text):
        return tuple(kind(part) for part in text.split(',') if part.strip())
    return parse


def _optional(kind):
    def parse(text):
        return kind(text) if text.strip() else None
    return parse


def _text(text):
    return text.strip()


def _enum(kind):
    def parse(text):
        return kind(text.strip().lower())
    return parse


#: Section -> key -> (parser, default text).
DEFAULTS = {
    'dataset': {
        'generator': (_enum(Generator), 'two_moons'),
        'n_per_domain': (int, '500'),
        'noise': (float, '0.1'),
        'rotation_deg': (float, '30'),
        'translation': (_list(float), '0, 0'),
        'stretch': (float, '1.5'),
        'seed': (int, '0'),
        'csv_path': (_text, ''),
        'feature_columns': (_list(str.strip), ''),
        'label_column': (_text, 'label'),
        'domain_column': (_text, 'domain'),
        'shots_per_class': (int, '0'),
        'test_fraction': (float, '0.2'),
        'val_fraction': (float, '0.2'),
    },
    'model': {
        'hidden_widths': (_list(int), '64, 32'),
        'activation': (_enum(Activation), 'tanh'),
        'embedding_layer': (_optional(int), ''),
        'init_seed': (_optional(int), ''),
    },
    'train': {
        'epochs': (int, '100'),
        'batch_size_source': (int, '64'),
        'batch_size_target': (int, '64'),
        'learning_rate': (float, '0.001'),
        'optimizer': (_enum(OptimizerKind), 'adam'),
        'adam_beta1': (float, '0.9'),
        'adam_beta2': (float, '0.999'),
        'adam_eps': (float, '1e-8'),
        'momentum': (float, '0.0'),
        'seed': (int, '0'),
        'manifold_refresh': (_enum(ManifoldRefresh), 'per_batch'),
        'manifold_estimator': (_enum(ManifoldEstimator), 'pca'),
        'ae_latent': (int, '1'),
        'ae_hidden': (int, '16'),
        'ae_epochs': (int, '50'),
    },
    'geometry': {
        'k': (int, '10'),
        'tangent_dim': (int, '0'),
        'variance_threshold': (float, '0.9'),
        'geodesic_mode': (_enum(GeodesicMode), 'graph'),
        'geodesic_gradient': (_enum(GeodesicGradient), 'path'),
        'all_pairs_cap': (int, '1000'),
    },
    'loss': {
        'lambda_on': (float, '1.0'),
        'lambda_off': (float, '0.5'),
        'lambda_geom': (float, '0.1'),
        'tau': (float, '0.1'),
    },
    'perturb': {
        'alpha': (float, '0.1'),
        'beta': (float, '0.1'),
        'zero_norm_tol': (float, '1e-12'),
    },
    'attack': {
        'epsilon': (float, '0.1'),
        'steps': (int, '10'),
        'step_size': (float, '0'),
        'random_start': (_bool, 'false'),
        'lower': (_optional(float), ''),
        'upper': (_optional(float), ''),
    },
    'metrics': {
        'seeds': (_list(int), '0, 1, 2, 3, 4'),
        'geoalign_k': (int, '10'),
        'geoalign_cap': (int, '2000'),
    },
    'output': {
        'directory': (_text, 'gama_output'),
        'log_level': (lambda text: text.strip().upper(), 'INFO'),
    },
}


def parse_overrides(items):
    """Turn ``['section.key=value', ...]`` into ``{(section, key): value}``.

    Raises:
        GamaConfigError: on a malformed item.
    """
    out = {}
    for item in items or ():
        name, sep, value = item.partition('=')
        section, dot, key = name.strip().partition('.')
        if not sep or not dot or not section or not key:
            raise GamaConfigError('Override {!r} is not of the form section.key=value'.format(
                item), key=item)
        out[(section, key)] = value.strip()
    return out


def _parse_value(section, key, text, path):
    if section not in DEFAULTS:
        raise GamaConfigError('Unknown config section [{}]'.format(section), path=path,
                              key=section)
    if key not in DEFAULTS[section]:
        raise GamaConfigError('Unknown config key {}.{}'.format(section, key), path=path,
                              key='{}.{}'.format(section, key))
    parser, _ = DEFAULTS[section][key]
    try:
        return parser(text)
    except ValueError as ex:
        raise GamaConfigError('Invalid value {!r} for {}.{}: {}'.format(text, section, key, ex),
                              path=path, key='{}.{}'.format(section, key)) from ex


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated values of every config section.

    ``raw`` keeps the text of each value so the configuration can be echoed
    into reports and written back to disk.
    """

    values: Dict[str, Dict[str, object]]
    raw: Dict[str, Dict[str, str]]
    path: Optional[str] = None

    @classmethod
    def from_texts(cls, texts, path=None):
        """Build a config from ``{section: {key: text}}`` merged over the defaults."""
        raw = {section: {key: default for key, (_, default) in keys.items()}
               for section, keys in DEFAULTS.items()}
        for section, keys in texts.items():
            for key, text in keys.items():
                _parse_value(section, key, text, path)
                raw[section][key] = text
        values = {section: {key: _parse_value(section, key, text, path)
                            for key, text in keys.items()}
                  for section, keys in raw.items()}
        config = cls(values=values, raw=raw, path=path)
        config.validate()
        return config

    def get(self, section, key):
        """Parsed value of ``section.key``."""
        return self.values[section][key]

    def with_overrides(self, overrides):
        """Return a copy with ``{(section, key): text}`` applied."""
        texts = {section: dict(keys) for section, keys in self.raw.items()}
        for (section, key), text in overrides.items():
            _parse_value(section, key, text, self.path)
            texts[section][key] = text
        return ExperimentConfig.from_texts(texts, self.path)

    def validate(self):
        """Build every domain record once so invalid values fail at load time.

        Raises:
            GamaConfigError: wrapping the parameter error of an invalid value.
        """
        try:
            self.splits()
            self.loss_weights()
            self.perturb()
            self.attack()
            self.geometry()
            self.optimizer()
            self.net_spec(2, 2)
        except GamaParameterError as ex:
            raise GamaConfigError('Invalid configuration: {}'.format(ex), path=self.path) from ex
        if self.get('dataset', 'generator') is Generator.CSV and not self.get('dataset',
                                                                              'csv_path'):
            raise GamaConfigError('dataset.csv_path is required for the csv generator',
                                  path=self.path, key='dataset.csv_path')
        if not self.get('metrics', 'seeds'):
            raise GamaConfigError('metrics.seeds must list at least one seed', path=self.path,
                                  key='metrics.seeds')
        level = self.get('output', 'log_level')
        if not isinstance(logging.getLevelName(level), int):
            raise GamaConfigError('Unknown log level {!r}'.format(level), path=self.path,
                                  key='output.log_level')

    def splits(self):
        """Split fractions and few-shot count of the dataset."""
        return SplitConfig(val_fraction=self.get('dataset', 'val_fraction'),
                           test_fraction=self.get('dataset', 'test_fraction'),
                           shots_per_class=self.get('dataset', 'shots_per_class'))

    def csv_schema(self):
        """Column names of a CSV dataset."""
        return CsvSchema(feature_columns=self.get('dataset', 'feature_columns') or None,
                         label_column=self.get('dataset', 'label_column'),
                         domain_column=self.get('dataset', 'domain_column'))

    def loss_weights(self):
        """Term weights of the objective."""
        return LossWeights(**self.values['loss'])

    def perturb(self):
        """On/off-manifold step sizes."""
        return PerturbConfig(**self.values['perturb'])

    def attack(self):
        """PGD settings; ``step_size = 0`` means ``epsilon / 4``."""
        values = self.values['attack']
        return AttackConfig(epsilon=values['epsilon'], steps=values['steps'],
                            step_size=values['step_size'] or None,
                            random_start=values['random_start'])

    def bounds(self):
        """Clamp of adversarial inputs, or None."""
        lower, upper = self.get('attack', 'lower'), self.get('attack', 'upper')
        if lower is None and upper is None:
            return None
        return (-float('inf') if lower is None else lower,
                float('inf') if upper is None else upper)

    def geometry(self):
        """k-NN and geodesic settings."""
        return GeometryConfig(**self.values['geometry'])

    def optimizer(self):
        """Optimizer settings."""
        train = self.values['train']
        return OptimizerConfig(kind=train['optimizer'], learning_rate=train['learning_rate'],
                               beta1=train['adam_beta1'], beta2=train['adam_beta2'],
                               eps=train['adam_eps'], momentum=train['momentum'])

    def net_spec(self, input_dim, n_classes):
        """Network shape for a dataset of dimension ``input_dim``."""
        model = self.values['model']
        return NetSpec(layer_widths=(input_dim, *model['hidden_widths'], n_classes),
                       activation=model['activation'],
                       embedding_layer=model['embedding_layer'])

    def train_config(self, input_dim, n_classes, seed=None):
        """Training settings; ``seed`` overrides ``train.seed``."""
        train = self.values['train']
        return TrainConfig(
            net=self.net_spec(input_dim, n_classes), epochs=train['epochs'],
            batch_size_source=train['batch_size_source'],
            batch_size_target=train['batch_size_target'],
            optimizer=self.optimizer(),
            seed=train['seed'] if seed is None else seed,
            init_seed=self.get('model', 'init_seed'),
            manifold_refresh=train['manifold_refresh'],
            manifold_estimator=train['manifold_estimator'],
            weights=self.loss_weights(), perturb=self.perturb(), geometry=self.geometry(),
            ae_latent=train['ae_latent'], ae_hidden=train['ae_hidden'],
            ae_epochs=train['ae_epochs'])

    def output_dir(self):
        """Output directory; ``GAMA_OUTPUT_ROOT`` wins over the config file."""
        return os.environ.get(OUTPUT_ROOT_ENV) or self.get('output', 'directory')

    def to_dict(self):
        """Text of every value, by section."""
        return {section: dict(keys) for section, keys in self.raw.items()}


def load_config(filename, overrides=None):
    """Read an experiment config file and apply ``overrides``.

    Raises:
        GamaConfigError: if the file is missing, cannot be parsed, or holds an
            unknown or invalid key.
    """
    if not Path(filename).is_file():
        raise GamaConfigError('Config file {} does not exist'.format(filename),
                              path=str(filename))
    config_parser = ConfigParser(interpolation=None)
    try:
        config_parser.read(str(filename))
    except ConfigParserError as ex:
        raise GamaConfigError(str(ex), path=str(filename)) from ex
    texts = {section: dict(config_parser[section]) for section in config_parser.sections()}
    for (section, key), text in (overrides or {}).items():
        texts.setdefault(section, {})[key] = text
    config = ExperimentConfig.from_texts(texts, path=str(filename))
    logger.info('Loaded experiment config %s', filename)
    return config


def save_config(config, filename):
    """Write every value of ``config`` (defaults included) to ``filename``."""
    config_parser = ConfigParser(interpolation=None)
    for section, keys in config.to_dict().items():
        config_parser[section] = keys
    (Path(filename).parent).mkdir(parents=True, exist_ok=True)
    with open(str(filename), 'w') as conf_file:
        config_parser.write(conf_file)
