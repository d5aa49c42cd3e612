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

"""Parameter checkpoints.

A checkpoint is a NumPy ``.npz`` archive. Key ``header`` holds a JSON string::

    {"format": "gama-adapt-checkpoint", "format_version": 1,
     "net": {"layer_widths": [...], "activation": "tanh", "embedding_layer": 2},
     "seed": 0, "gama_adapt_version": "0.1.0"}

followed by keys ``W0, b0, W1, b1, ...`` with the float64 weight (out x in)
and bias arrays of every affine map in row-major order.
"""

import json
import logging
from pathlib import Path

import numpy as np

from ..exceptions import GamaConfigError, GamaSchemaError
from ..model import NetParams, NetSpec
from ..version import __version__

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'gama-adapt-checkpoint'
CHECKPOINT_VERSION = 1


def save_checkpoint(filename, spec, params, seed):
    """Write ``params`` of a ``spec`` network to ``filename``."""
    params.check(spec)
    header = {'format': CHECKPOINT_FORMAT, 'format_version': CHECKPOINT_VERSION,
              'net': spec.to_dict(), 'seed': int(seed), 'gama_adapt_version': __version__}
    arrays = {'header': np.array(json.dumps(header, sort_keys=True))}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays['W{}'.format(i)] = np.ascontiguousarray(w, dtype=np.float64)
        arrays['b{}'.format(i)] = np.ascontiguousarray(b, dtype=np.float64)
    Path(filename).parent.mkdir(parents=True, exist_ok=True)
    with open(str(filename), 'wb') as handle:
        np.savez(handle, **arrays)
    logger.info('Saved checkpoint %s', filename)


def load_checkpoint(filename):
    """Read a checkpoint.

    Returns:
        tuple(NetSpec, NetParams, dict): the network, its parameters and the
            header.

    Raises:
        GamaConfigError: if the file does not exist.
        GamaSchemaError: if the file is not a compatible checkpoint.
    """
    if not Path(filename).is_file():
        raise GamaConfigError('Checkpoint {} does not exist'.format(filename),
                              path=str(filename))
    try:
        with np.load(str(filename), allow_pickle=False) as archive:
            header = json.loads(str(archive['header']))
            if header.get('format') != CHECKPOINT_FORMAT:
                raise GamaSchemaError('{} is not a gama-adapt checkpoint'.format(filename),
                                      path=str(filename))
            spec = NetSpec.from_dict(header['net'])
            arrays = []
            for i in range(spec.n_affine):
                arrays += [archive['W{}'.format(i)], archive['b{}'.format(i)]]
    except (KeyError, ValueError, OSError) as ex:
        raise GamaSchemaError('Cannot read checkpoint {}: {}'.format(filename, ex),
                              path=str(filename)) from ex
    params = NetParams.from_arrays(arrays)
    params.check(spec)
    return spec, params, header
