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

"""JSON reports validated against the schemas bundled in ``schemas/``."""

import enum
import functools
import json
import logging
import math
import os
from pathlib import Path

import jsonschema
import numpy as np

from ..exceptions import GamaSchemaError

logger = logging.getLogger(__name__)

SCHEMA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'schemas')
SCHEMA_NAMES = ('training_report', 'metrics_report', 'ablation_report', 'dataset_metadata')


@functools.lru_cache(maxsize=None)
def load_schema(name):
    """Return the bundled JSON schema ``name``.

    Raises:
        GamaSchemaError: if no such schema is bundled.
    """
    if name not in SCHEMA_NAMES:
        raise GamaSchemaError('Unknown report schema {!r}'.format(name), key=name)
    with open(os.path.join(SCHEMA_DIR, name + '.json'), 'r') as handle:
        return json.load(handle)


def json_ready(value):
    """Convert numpy scalars/arrays, enums and tuples; non-finite floats become ``None``."""
    if isinstance(value, dict):
        return {str(k): json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_ready(value.tolist())
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def validate_report(report, schema_name):
    """Validate a JSON-ready ``report``.

    Raises:
        GamaSchemaError: naming the first violation.
    """
    try:
        jsonschema.validate(instance=report, schema=load_schema(schema_name))
    except jsonschema.ValidationError as ex:
        where = '/'.join(str(p) for p in ex.absolute_path) or '<root>'
        raise GamaSchemaError('{} report is invalid at {}: {}'.format(
            schema_name, where, ex.message), key=where) from ex


def write_report(filename, report, schema_name):
    """Validate ``report`` and write it as indented, key-sorted JSON.

    Returns:
        dict: the JSON-ready report that was written.
    """
    report = json_ready(report)
    validate_report(report, schema_name)
    Path(filename).parent.mkdir(parents=True, exist_ok=True)
    with open(str(filename), 'w') as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write('\n')
    logger.info('Wrote %s report %s', schema_name, filename)
    return report
