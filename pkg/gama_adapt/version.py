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

"""Version information for gama_adapt.

Reports embed the version so a training report can be traced back to the code
that produced it.
"""

import os
import subprocess

ROOT_DIR = os.path.dirname(os.path.abspath(__file__))


def _git(*args):
    env = {k: v for k, v in os.environ.items() if k in ('SYSTEMROOT', 'PATH')}
    env.update(LANGUAGE='C', LANG='C', LC_ALL='C')
    proc = subprocess.run(['git', *args], stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                          env=env, cwd=os.path.dirname(ROOT_DIR), check=False)
    if proc.returncode > 0:
        raise OSError(proc.stderr.decode('ascii', 'replace'))
    return proc.stdout.strip().decode('ascii')


def git_revision():
    """Return the current git head sha1, or ``'Unknown'`` outside a checkout."""
    try:
        return _git('rev-parse', 'HEAD')
    except OSError:
        return 'Unknown'


with open(os.path.join(ROOT_DIR, 'VERSION.txt'), 'r') as version_file:
    VERSION = version_file.read().strip()


def get_version_info():
    """Return the release version, with a dev suffix for untagged checkouts."""
    if not os.path.exists(os.path.join(os.path.dirname(ROOT_DIR), '.git')):
        return VERSION
    try:
        release = _git('tag', '-l', '--points-at', 'HEAD')
    except Exception:  # pylint: disable=broad-except
        return VERSION
    if release:
        return VERSION
    return VERSION + '.dev0+' + git_revision()[:7]


__version__ = get_version_info()
