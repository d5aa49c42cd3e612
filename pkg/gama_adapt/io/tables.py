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

"""CSV tables with fixed headers.

Floats are written in their shortest round-trip form, so two identical runs
produce byte-identical files. Missing values are written as empty fields.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from ..constants import ABLATION_CSV_HEADER, EPOCH_CSV_HEADER, LOSS_CSV_HEADER
from ..exceptions import GamaConfigError, GamaParseError, GamaSchemaError

logger = logging.getLogger(__name__)


def _write(filename, rows, header):
    frame = pd.DataFrame([list(r) for r in rows], columns=list(header))
    Path(filename).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(str(filename), index=False, lineterminator='\n')
    logger.info('Wrote %d rows to %s', len(frame), filename)


def write_loss_csv(filename, rows):
    """One ``step,cls,on,off,geom,total`` row per training step."""
    _write(filename, rows, LOSS_CSV_HEADER)


def write_epoch_csv(filename, rows):
    """Per-epoch metric series for external plotting."""
    _write(filename, rows, EPOCH_CSV_HEADER)


def write_ablation_csv(filename, rows):
    """One ``variant,seed,target_accuracy,robust_accuracy,geoalign`` row per run."""
    _write(filename, rows, ABLATION_CSV_HEADER)


def write_embeddings(filename, embeddings):
    """Write an n x e embedding matrix with columns ``e0 .. e{e-1}``."""
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=float))
    header = ['e{}'.format(i) for i in range(embeddings.shape[1])]
    _write(filename, embeddings.tolist(), header)


def read_embeddings(filename):
    """Read a CSV whose columns are all numeric embedding coordinates.

    Raises:
        GamaConfigError: if the file does not exist.
        GamaSchemaError: if the file has no columns or no rows.
        GamaParseError: naming the first row with a non-finite value.
    """
    if not Path(filename).is_file():
        raise GamaConfigError('Embedding file {} does not exist'.format(filename),
                              path=str(filename))
    try:
        frame = pd.read_csv(str(filename), float_precision='round_trip')
    except pd.errors.EmptyDataError as ex:
        raise GamaSchemaError('Embedding file {} is empty'.format(filename),
                              path=str(filename)) from ex
    if frame.shape[0] == 0 or frame.shape[1] == 0:
        raise GamaSchemaError('Embedding file {} holds no points'.format(filename),
                              path=str(filename))
    values = frame.apply(pd.to_numeric, errors='coerce').to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise GamaParseError('Row {} of {} is not a finite number'.format(row + 1, filename),
                             row=row + 1)
    return values
