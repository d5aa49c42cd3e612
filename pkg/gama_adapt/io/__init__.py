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

""" Module for reading and writing run artifacts """
from .checkpoint import CHECKPOINT_FORMAT, load_checkpoint, save_checkpoint
from .reports import json_ready, load_schema, validate_report, write_report
from .tables import (read_embeddings, write_ablation_csv, write_embeddings, write_epoch_csv,
                     write_loss_csv)
