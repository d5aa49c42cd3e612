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

"""Enumerated values shared by configuration files, reports and the API.

The enum values are the strings accepted verbatim in experiment config files
and written into JSON reports.
"""

import enum


class Activation(enum.Enum):
    """Hidden-layer nonlinearity of a ``NetSpec``."""

    RELU = 'relu'
    TANH = 'tanh'


class Domain(enum.Enum):
    """Which side of the domain shift a sample comes from."""

    SOURCE = 'source'
    TARGET = 'target'


class OptimizerKind(enum.Enum):
    """Parameter update rule used by the trainer."""

    SGD = 'sgd'
    ADAM = 'adam'


class ManifoldRefresh(enum.Enum):
    """When tangent frames are re-estimated during training.

    `PER_BATCH` follows the training loop literally; `PER_EPOCH` caches frames
    of the whole source-train split once per epoch.
    """

    PER_BATCH = 'per_batch'
    PER_EPOCH = 'per_epoch'


class ManifoldEstimator(enum.Enum):
    """Source of the on/off-manifold split of input gradients."""

    PCA = 'pca'
    AUTOENCODER = 'autoencoder'


class GeodesicMode(enum.Enum):
    """How d_g is computed between embeddings."""

    GRAPH = 'graph'
    KERNEL = 'kernel'


class GeodesicGradient(enum.Enum):
    """How graph geodesics are differentiated.

    `PATH` holds the selected shortest path fixed and differentiates its
    Euclidean edge lengths; `STOP` treats geodesic values as constants.
    """

    PATH = 'path'
    STOP = 'stop'


class Generator(enum.Enum):
    """Dataset sources understood by the ``[dataset]`` config section."""

    TWO_MOONS = 'two_moons'
    SWISS_ROLL = 'swiss_roll'
    CSV = 'csv'


class AblationComponent(enum.Enum):
    """Components that ``ablate`` can drop from the full objective."""

    GEOM = 'geom'
    ON = 'on'
    OFF = 'off'


#: Process exit codes of the command line interface.
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

#: Floor applied to probabilities before taking logarithms.
PROB_FLOOR = 1e-12

#: Environment variable overriding the configured output directory.
OUTPUT_ROOT_ENV = 'GAMA_OUTPUT_ROOT'

LOSS_CSV_HEADER = ('step', 'cls', 'on', 'off', 'geom', 'total')
EPOCH_CSV_HEADER = ('epoch', 'source_val_accuracy', 'target_test_accuracy', 'mean_total')
ABLATION_CSV_HEADER = ('variant', 'seed', 'target_accuracy', 'robust_accuracy', 'geoalign')
