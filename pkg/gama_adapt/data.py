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

"""Synthetic domain-shift generators and CSV ingestion.

Every generator returns a :class:`DatasetBundle` with five splits:

* ``source_train`` and ``source_val``: labeled source samples,
* ``target_train``: the target pool used for training, labels hidden,
* ``target_shots``: ``k`` labeled target samples per class (few-shot mode),
* ``target_test``: labeled held-out target samples.

Reads of a split's labels go through :attr:`Split.y`, which counts them, so
the unsupervised protocol can assert that no target label was touched before
the final evaluation.
"""

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.datasets import make_moons, make_swiss_roll

from .constants import Domain, Generator
from .exceptions import (GamaConfigError, GamaDataError, GamaParameterError, GamaParseError,
                         GamaSchemaError)

logger = logging.getLogger(__name__)

SPLIT_NAMES = ('source_train', 'source_val', 'target_train', 'target_shots', 'target_test')
SWISS_ROLL_CLASSES = 4
_T_MIN, _T_MAX = 1.5 * np.pi, 4.5 * np.pi


@dataclass(frozen=True)
class Sample:
    """One input with its optional label and domain."""

    x: np.ndarray
    y: Optional[int]
    domain: Domain


class Split:
    """Rows of one dataset split.

    Args:
        name (str): one of ``SPLIT_NAMES``.
        x (np.ndarray): n x d inputs.
        labels (np.ndarray or None): n integer labels, or None when unknown.
        domain (Domain): source or target.
        hidden (bool): labels exist but belong to the unlabeled protocol;
            they are still returned by :attr:`y`, and every read is counted.
    """

    def __init__(self, name, x, labels, domain, hidden=False):
        x = np.array(x, dtype=float)
        if x.ndim != 2:
            raise GamaParameterError('Split {} needs an n x d matrix'.format(name))
        if not np.all(np.isfinite(x)):
            raise GamaDataError('Split {} has non-finite inputs'.format(name))
        if labels is not None:
            labels = np.array(labels, dtype=np.int64).reshape(-1)
            if labels.shape[0] != x.shape[0]:
                raise GamaParameterError('Split {} has {} rows but {} labels'.format(
                    name, x.shape[0], labels.shape[0]))
            labels.setflags(write=False)
        x.setflags(write=False)
        self.name = name
        self.domain = Domain(domain)
        self.hidden = bool(hidden)
        self._x = x
        self._labels = labels
        self.label_reads = 0

    def __len__(self):
        return self._x.shape[0]

    def __repr__(self):
        return '<Split {} n={} d={} labeled={}>'.format(
            self.name, len(self), self.dim, self.has_labels)

    @property
    def x(self):
        """Inputs, n x d, read-only."""
        return self._x

    @property
    def dim(self):
        """Input dimension."""
        return self._x.shape[1]

    @property
    def has_labels(self):
        """True when labels are stored, hidden or not."""
        return self._labels is not None

    @property
    def y(self):
        """Labels; every access increments :attr:`label_reads`."""
        self.label_reads += 1
        return self._labels

    def samples(self):
        """Yield every row as a :class:`Sample` (one counted label read)."""
        labels = self.y
        for i in range(len(self)):
            yield Sample(x=self._x[i], y=None if labels is None else int(labels[i]),
                         domain=self.domain)

    def subset(self, name, rows, hidden=None):
        """Return a new split holding ``rows`` of this one (uncounted)."""
        labels = None if self._labels is None else self._labels[rows]
        return Split(name, self._x[rows], labels, self.domain,
                     self.hidden if hidden is None else hidden)

    def _labels_for_export(self):
        return self._labels


@dataclass(frozen=True)
class SplitConfig:
    """Fractions and few-shot count used to cut a bundle into splits."""

    val_fraction: float = 0.2
    test_fraction: float = 0.2
    shots_per_class: int = 0

    def __post_init__(self):
        for name in ('val_fraction', 'test_fraction'):
            value = float(getattr(self, name))
            if not 0.0 <= value < 1.0:
                raise GamaParameterError('{} must be in [0, 1), got {}'.format(name, value))
            object.__setattr__(self, name, value)
        if int(self.shots_per_class) < 0:
            raise GamaParameterError('shots_per_class must be >= 0')
        object.__setattr__(self, 'shots_per_class', int(self.shots_per_class))


class DatasetBundle:
    """The five splits of a domain-shift dataset plus generator metadata."""

    def __init__(self, source_train, source_val, target_train, target_shots, target_test,
                 metadata):
        self.source_train = source_train
        self.source_val = source_val
        self.target_train = target_train
        self.target_shots = target_shots
        self.target_test = target_test
        self.metadata = dict(metadata)
        dims = {s.dim for s in self.splits() if len(s)}
        if len(dims) != 1:
            raise GamaParameterError('All splits must share one input dimension, got {}'.format(
                sorted(dims)))
        if not target_test.has_labels:
            raise GamaDataError('target_test must be labeled')
        if not source_train.has_labels or len(source_train) == 0:
            raise GamaDataError('source_train must hold labeled samples')

    def splits(self):
        """Splits in ``SPLIT_NAMES`` order."""
        return [getattr(self, name) for name in SPLIT_NAMES]

    @property
    def input_dim(self):
        """Input dimension d."""
        return self.source_train.dim

    @property
    def n_classes(self):
        """Number of classes c."""
        return int(self.metadata['n_classes'])

    @property
    def few_shot(self):
        """True when labeled target shots are available."""
        return len(self.target_shots) > 0

    @property
    def target_label_reads(self):
        """Label reads of the target splits that the unlabeled protocol forbids."""
        return self.target_train.label_reads + self.target_test.label_reads

    def split_sizes(self):
        """Mapping of split name to row count."""
        return {s.name: len(s) for s in self.splits()}


def _holdout(n, fraction, rng):
    order = rng.permutation(n)
    n_hold = int(round(n * fraction))
    if fraction > 0 and n >= 2:
        n_hold = min(max(n_hold, 1), n - 1)
    return order[n_hold:], order[:n_hold]


def _pick_shots(labels, shots, n_classes):
    chosen = []
    for cls in range(n_classes):
        rows = np.flatnonzero(labels == cls)
        if rows.shape[0] < shots:
            raise GamaDataError('Class {} has {} target samples, fewer than {} shots'.format(
                cls, rows.shape[0], shots))
        chosen.extend(rows[:shots].tolist())
    chosen = np.array(sorted(chosen), dtype=np.int64)
    rest = np.setdiff1d(np.arange(labels.shape[0]), chosen)
    return rest, chosen


def assemble_bundle(x_source, y_source, x_target, y_target, splits, rng, metadata):
    """Cut source and target samples into the five bundle splits.

    ``x_target`` rows with ``y_target`` known form the target pool; a seeded
    ``splits.test_fraction`` holdout becomes ``target_test`` and
    ``splits.shots_per_class`` labeled shots per class move from the pool
    into ``target_shots``.
    """
    n_classes = int(metadata['n_classes'])
    y_source = np.asarray(y_source, dtype=np.int64)
    y_target = np.asarray(y_target, dtype=np.int64)
    src = Split('source_train', x_source, y_source, Domain.SOURCE)
    train_rows, val_rows = _holdout(len(src), splits.val_fraction, rng)
    tgt = Split('target_train', x_target, y_target, Domain.TARGET)
    pool_rows, test_rows = _holdout(len(tgt), splits.test_fraction, rng)
    pool_labels = y_target[pool_rows]
    keep, shots = _pick_shots(pool_labels, splits.shots_per_class, n_classes)
    bundle = DatasetBundle(
        source_train=src.subset('source_train', train_rows),
        source_val=src.subset('source_val', val_rows),
        target_train=tgt.subset('target_train', pool_rows[keep], hidden=True),
        target_shots=tgt.subset('target_shots', pool_rows[shots], hidden=False),
        target_test=tgt.subset('target_test', test_rows, hidden=False),
        metadata=metadata)
    bundle.metadata['split_sizes'] = bundle.split_sizes()
    logger.info('Built %s bundle: %s', metadata.get('generator'), bundle.metadata['split_sizes'])
    return bundle


def rotation_matrix(degrees):
    """2-D rotation matrix, exact at multiples of 90 degrees."""
    quarter = float(degrees) / 90.0
    if quarter == round(quarter):
        cos, sin = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(round(quarter)) % 4]
    else:
        rad = math.radians(degrees)
        cos, sin = math.cos(rad), math.sin(rad)
    return np.array([[cos, -sin], [sin, cos]])


def _sub_seeds(seed):
    rng = np.random.default_rng(seed)
    source_seed, target_seed = (int(s) for s in rng.integers(0, 2 ** 31 - 1, size=2))
    return source_seed, target_seed, rng


def gen_two_moons_shift(n_per_domain, noise=0.1, rotation_deg=30.0, translation=(0.0, 0.0),
                        seed=0, splits=SplitConfig()):
    """Two-moons source and a rotated, translated two-moons target.

    The target is an independent draw of the same generator, rotated by
    ``rotation_deg`` about the origin and then shifted by ``translation``.
    Both domains are exactly balanced between the two classes.

    Raises:
        GamaParameterError: if ``n_per_domain < 10`` or ``translation`` is not
            a 2-vector.
    """
    n_per_domain = int(n_per_domain)
    if n_per_domain < 10:
        raise GamaParameterError('n_per_domain must be >= 10, got {}'.format(n_per_domain))
    if n_per_domain % 2:
        logger.warning('Odd n_per_domain %d; generating %d samples for an exact class balance',
                       n_per_domain, n_per_domain - 1)
    shift = np.asarray(translation, dtype=float).reshape(-1)
    if shift.shape != (2,):
        raise GamaParameterError('translation must have 2 components, got {}'.format(
            translation))
    half = n_per_domain // 2
    source_seed, target_seed, rng = _sub_seeds(seed)
    x_s, y_s = make_moons(n_samples=(half, half), noise=noise, random_state=source_seed)
    x_t, y_t = make_moons(n_samples=(half, half), noise=noise, random_state=target_seed)
    x_t = x_t @ rotation_matrix(rotation_deg).T + shift
    metadata = {'generator': Generator.TWO_MOONS.value, 'seed': int(seed), 'n_classes': 2,
                'params': {'n_per_domain': n_per_domain, 'noise': float(noise),
                           'rotation_deg': float(rotation_deg),
                           'translation': shift.tolist()}}
    return assemble_bundle(x_s, y_s, x_t, y_t, splits, rng, metadata)


def roll_arc_length(t):
    """Arc length of the planar spiral ``(t cos t, t sin t)`` from 0 to ``t``."""
    t = np.asarray(t, dtype=float)
    return 0.5 * (t * np.sqrt(1.0 + t ** 2) + np.arcsinh(t))


def swiss_roll_classes(t, n_classes=SWISS_ROLL_CLASSES):
    """Class of each roll parameter: equal arc-length segments of the roll."""
    lo, hi = roll_arc_length(_T_MIN), roll_arc_length(_T_MAX)
    frac = (roll_arc_length(t) - lo) / (hi - lo)
    return np.clip(np.floor(frac * n_classes), 0, n_classes - 1).astype(np.int64)


def gen_swiss_roll_shift(n_per_domain, noise=0.0, stretch=1.5, seed=0, splits=SplitConfig()):
    """3-D swiss roll with four arc-length classes; the target roll is stretched along its height.

    Raises:
        GamaParameterError: if ``n_per_domain < 10`` or ``stretch <= 0``.
    """
    n_per_domain = int(n_per_domain)
    if n_per_domain < 10:
        raise GamaParameterError('n_per_domain must be >= 10, got {}'.format(n_per_domain))
    if not float(stretch) > 0:
        raise GamaParameterError('stretch must be > 0, got {}'.format(stretch))
    source_seed, target_seed, rng = _sub_seeds(seed)
    x_s, t_s = make_swiss_roll(n_samples=n_per_domain, noise=noise, random_state=source_seed)
    x_t, t_t = make_swiss_roll(n_samples=n_per_domain, noise=noise, random_state=target_seed)
    x_t = x_t.copy()
    x_t[:, 1] *= float(stretch)
    metadata = {'generator': Generator.SWISS_ROLL.value, 'seed': int(seed),
                'n_classes': SWISS_ROLL_CLASSES,
                'params': {'n_per_domain': n_per_domain, 'noise': float(noise),
                           'stretch': float(stretch)}}
    return assemble_bundle(x_s, swiss_roll_classes(t_s), x_t, swiss_roll_classes(t_t),
                           splits, rng, metadata)


@dataclass(frozen=True)
class CsvSchema:
    """Column names of a dataset CSV.

    ``feature_columns = None`` takes every column named ``f<integer>`` in
    numeric order. ``split_column`` is optional; when present its values
    restore the exact bundle splits.
    """

    feature_columns: Optional[Sequence[str]] = None
    label_column: str = 'label'
    domain_column: str = 'domain'
    split_column: str = 'split'


def _feature_columns(columns, schema):
    if schema.feature_columns:
        return list(schema.feature_columns)
    feats = [c for c in columns if c.startswith('f') and c[1:].isdigit()]
    return sorted(feats, key=lambda c: int(c[1:]))


def _to_float(text):
    try:
        return float(text)
    except ValueError:
        return float('nan')


def _parse_features(frame, feats):
    values = frame[feats].apply(lambda column: column.map(_to_float)).to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise GamaParseError('Row {}: feature {!r} is not a finite number: {!r}'.format(
            row + 1, feats[col], frame[feats[col]].iloc[row]), row=int(row) + 1)
    return values


def _parse_labels(raw):
    labels = np.full(raw.shape[0], -1, dtype=np.int64)
    for row, text in enumerate(raw):
        text = text.strip()
        if not text:
            continue
        try:
            value = float(text)
        except ValueError:
            value = float('nan')
        if not math.isfinite(value) or value != int(value) or value < 0:
            raise GamaParseError('Row {}: label {!r} is not a non-negative integer'.format(
                row + 1, text), row=row + 1)
        labels[row] = int(value)
    return labels


def load_csv(path, schema=CsvSchema(), splits=SplitConfig(), seed=0):
    """Read a dataset CSV (one row per sample) into a bundle.

    Source rows must be labeled. Without a split column, labeled target rows
    are cut into a seeded test holdout and the training pool, and unlabeled
    target rows always join the pool.

    Raises:
        GamaConfigError: if the file does not exist.
        GamaSchemaError: naming a missing column.
        GamaParseError: naming the row of a non-numeric or non-finite value.
        GamaDataError: for invalid domains or unlabeled source rows.
    """
    if not os.path.isfile(path):
        raise GamaConfigError('Dataset file {} does not exist'.format(path), path=path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    feats = _feature_columns(frame.columns, schema)
    if not feats:
        raise GamaSchemaError('No feature columns in {}'.format(path), path=path, key='f0')
    for column in [*feats, schema.label_column, schema.domain_column]:
        if column not in frame.columns:
            raise GamaSchemaError('Missing column {!r} in {}'.format(column, path),
                                  path=path, key=column)
    x = _parse_features(frame, feats)
    labels = _parse_labels(frame[schema.label_column].to_numpy())
    domains = frame[schema.domain_column].str.strip().to_numpy()
    unknown = ~np.isin(domains, [d.value for d in Domain])
    if unknown.any():
        row = int(np.flatnonzero(unknown)[0])
        raise GamaParseError('Row {}: unknown domain {!r}'.format(row + 1, domains[row]),
                             row=row + 1)
    is_source = domains == Domain.SOURCE.value
    if np.any(labels[is_source] < 0):
        row = int(np.flatnonzero(is_source & (labels < 0))[0])
        raise GamaDataError('Row {}: source samples must be labeled'.format(row + 1))
    n_classes = int(labels.max()) + 1 if np.any(labels >= 0) else 0
    metadata = {'generator': Generator.CSV.value, 'seed': int(seed), 'n_classes': n_classes,
                'params': {'path': os.path.abspath(path), 'features': feats}}
    if schema.split_column in frame.columns:
        return _bundle_from_split_column(x, labels, frame[schema.split_column].to_numpy(),
                                         metadata)
    rng = np.random.default_rng(seed)
    is_labeled_target = ~is_source & (labels >= 0)
    if not is_labeled_target.any():
        raise GamaDataError('{} has no labeled target rows for the test split'.format(path))
    pool_unlabeled = np.flatnonzero(~is_source & (labels < 0))
    src = Split('source_train', x[is_source], labels[is_source], Domain.SOURCE)
    train_rows, val_rows = _holdout(len(src), splits.val_fraction, rng)
    labeled = np.flatnonzero(is_labeled_target)
    pool_rows, test_rows = _holdout(labeled.shape[0], splits.test_fraction, rng)
    pool_labeled = labeled[pool_rows]
    keep, shots = _pick_shots(labels[pool_labeled], splits.shots_per_class, n_classes)
    pool = np.concatenate([pool_labeled[keep], pool_unlabeled])
    pool_labels = labels[pool] if np.all(labels[pool] >= 0) else None
    bundle = DatasetBundle(
        source_train=src.subset('source_train', train_rows),
        source_val=src.subset('source_val', val_rows),
        target_train=Split('target_train', x[pool], pool_labels, Domain.TARGET, hidden=True),
        target_shots=Split('target_shots', x[pool_labeled[shots]], labels[pool_labeled[shots]],
                           Domain.TARGET),
        target_test=Split('target_test', x[labeled[test_rows]], labels[labeled[test_rows]],
                          Domain.TARGET),
        metadata=metadata)
    bundle.metadata['split_sizes'] = bundle.split_sizes()
    return bundle


def _bundle_from_split_column(x, labels, split_values, metadata):
    parts = {}
    for name in SPLIT_NAMES:
        rows = np.flatnonzero(split_values == name)
        domain = Domain.SOURCE if name.startswith('source') else Domain.TARGET
        split_labels = labels[rows]
        if np.any(split_labels < 0):
            if name != 'target_train':
                raise GamaDataError('Split {} has unlabeled rows'.format(name))
            split_labels = None
        parts[name] = Split(name, x[rows], split_labels, domain,
                            hidden=(name == 'target_train'))
    unknown = ~np.isin(split_values, SPLIT_NAMES)
    if unknown.any():
        row = int(np.flatnonzero(unknown)[0])
        raise GamaParseError('Row {}: unknown split {!r}'.format(row + 1, split_values[row]),
                             row=row + 1)
    bundle = DatasetBundle(metadata=metadata, **parts)
    bundle.metadata['split_sizes'] = bundle.split_sizes()
    return bundle


def bundle_frame(bundle):
    """Return the bundle as a ``DataFrame`` with the CSV layout.

    Columns are ``f0 .. f{d-1}, label, domain, split``; unknown labels are
    empty. Label reads done here are not counted.
    """
    blocks = []
    for split in bundle.splits():
        if not len(split):
            continue
        block = pd.DataFrame(split.x, columns=['f{}'.format(i) for i in range(split.dim)])
        labels = split._labels_for_export()  # pylint: disable=protected-access
        block['label'] = [''] * len(split) if labels is None else [str(v) for v in labels]
        block['domain'] = split.domain.value
        block['split'] = split.name
        blocks.append(block)
    return pd.concat(blocks, ignore_index=True)


def save_csv(bundle, path):
    """Write ``bundle`` to ``path`` and its metadata to ``path + '.json'``.

    Floats are written in shortest round-trip form so a reload is bit-identical.
    """
    bundle_frame(bundle).to_csv(path, index=False)
    with open(metadata_path(path), 'w') as handle:
        json.dump(bundle.metadata, handle, indent=2, sort_keys=True)
    logger.info('Wrote %d samples to %s', sum(bundle.split_sizes().values()), path)


def metadata_path(path):
    """Location of the JSON sidecar of a dataset CSV."""
    return path + '.json'
