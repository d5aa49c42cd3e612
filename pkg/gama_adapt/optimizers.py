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

"""Parameter update rules: SGD with optional momentum, and Adam."""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import OptimizerKind
from .exceptions import GamaParameterError
from .model import NetParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    """Update rule and its hyperparameters."""

    kind: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'kind', OptimizerKind(self.kind))
        if not float(self.learning_rate) >= 0:
            raise GamaParameterError('learning_rate must be >= 0')
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise GamaParameterError('Adam betas must lie in [0, 1)')
        if not self.eps > 0:
            raise GamaParameterError('Adam eps must be > 0')
        if not 0.0 <= self.momentum < 1.0:
            raise GamaParameterError('momentum must lie in [0, 1)')
        if self.kind is OptimizerKind.ADAM and self.momentum:
            warnings.warn('momentum is only used by the sgd optimizer; ignoring '
                          'momentum={} for adam'.format(self.momentum), UserWarning, stacklevel=2)
        object.__setattr__(self, 'learning_rate', float(self.learning_rate))


@dataclass(frozen=True)
class OptimizerState:
    """Step count and moment estimates (``None`` until first needed)."""

    step: int = 0
    first: Optional[NetParams] = None
    second: Optional[NetParams] = None


def init_state(cfg, params):
    """Zeroed moments shaped like ``params``."""
    zeros = params.zeros_like()
    if cfg.kind is OptimizerKind.ADAM:
        return OptimizerState(step=0, first=zeros, second=zeros)
    if cfg.momentum > 0:
        return OptimizerState(step=0, first=zeros)
    return OptimizerState()


def apply_update(cfg, params, grads, state):
    """One update of ``params`` along ``-grads``.

    Returns:
        tuple(NetParams, OptimizerState): new parameters and moments.
    """
    step = state.step + 1
    lr = cfg.learning_rate
    if cfg.kind is OptimizerKind.SGD:
        if cfg.momentum > 0:
            velocity = [cfg.momentum * v + g
                        for v, g in zip(state.first.arrays(), grads.arrays())]
            new = [p - lr * v for p, v in zip(params.arrays(), velocity)]
            return NetParams.from_arrays(new), OptimizerState(
                step=step, first=NetParams.from_arrays(velocity))
        new = [p - lr * g for p, g in zip(params.arrays(), grads.arrays())]
        return NetParams.from_arrays(new), OptimizerState(step=step)

    first = [cfg.beta1 * m + (1.0 - cfg.beta1) * g
             for m, g in zip(state.first.arrays(), grads.arrays())]
    second = [cfg.beta2 * v + (1.0 - cfg.beta2) * g ** 2
              for v, g in zip(state.second.arrays(), grads.arrays())]
    corr1 = 1.0 - cfg.beta1 ** step
    corr2 = 1.0 - cfg.beta2 ** step
    new = [p - lr * (m / corr1) / (np.sqrt(v / corr2) + cfg.eps)
           for p, m, v in zip(params.arrays(), first, second)]
    return NetParams.from_arrays(new), OptimizerState(
        step=step, first=NetParams.from_arrays(first), second=NetParams.from_arrays(second))
