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

"""Geometry-aware adversarial domain adaptation at desk scale."""

from .version import __version__

from .exceptions import (GamaError, GamaParameterError, GamaDataError, GamaParseError,
                         GamaGeometryError, DegenerateNeighborhoodError, GamaNumericError,
                         GamaTrainingError, GamaConfigError, GamaSchemaError)
from .geometry import (PointSet, KnnGraph, TangentFrame, GeodesicIndex, GeometryConfig,
                       build_knn_graph, estimate_tangent, project_tangent, geodesic_distances)
from .model import NetSpec, NetParams, init_params, forward, param_gradients, input_gradient
from .perturb import (PerturbConfig, PerturbationPair, AttackConfig, decompose, make_perturbed,
                      pgd_attack)
from .losses import (LossWeights, LossBreakdown, loss_cls, loss_on, loss_off, loss_geom,
                     loss_total, softmin)
from .data import (DatasetBundle, Split, SplitConfig, CsvSchema, gen_two_moons_shift,
                   gen_swiss_roll_shift, load_csv, save_csv)
from .trainer import TrainConfig, TrainState, train_epoch, fit
from .metrics import MetricsReport, accuracy, robust_accuracy, geoalign
from .config import ExperimentConfig, load_config
