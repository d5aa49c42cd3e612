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

import setuptools
import os

with open("README.md", "r") as fh:
    long_description = fh.read()

requirements = [
    'qiskit>=0.45.0',
    'rustworkx>=0.13.0',
    'numpy>=1.21',
    'scipy>=1.7',
    'scikit-learn>=1.0',
    'pandas>=1.5',
    'jsonschema>=3.2',
]

version_path = os.path.abspath(os.path.join(
    os.path.dirname(__file__), 'gama_adapt',
    'VERSION.txt'))

with open(version_path, 'r') as fd:
    version_str = fd.read().rstrip()

setuptools.setup(
    name="gama-adapt",
    version=version_str,
    author="The gama-adapt Authors",
    license="Apache 2.0",
    description="Geometry-aware adversarial domain adaptation on estimated data manifolds",
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=setuptools.find_namespace_packages(include=['gama_adapt*']),
    install_requires=requirements,
    python_requires=">=3.9",
    include_package_data=True,
    package_data={'gama_adapt': ['VERSION.txt'], 'gama_adapt.io': ['schemas/*.json']},
    entry_points={
        'console_scripts': ['gama-adapt=gama_adapt.cli:main'],
    },
    keywords="domain adaptation manifold adversarial robustness",
    classifiers=[
        "License :: OSI Approved :: Apache Software License",
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3 :: Only",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Artificial Intelligence"
    ],
    zip_safe=False,
)
