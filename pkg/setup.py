#!/usr/bin/env python3
"""Balact - Setup Script

Copyright (c) 2026 The Balact Authors
"""
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 2 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

from setuptools import setup
from os import path
from sys import exit, version_info as PYTHON_VERSION
from balact import VERSION as BALACT_VERSION

if PYTHON_VERSION < (3, 8):
    print('Aborting balact installation! Balact requires python 3.8 or later.')
    exit(1)

# Get the long description from the README file
here = path.abspath(path.dirname(__file__))
with open(path.join(here, 'README.rst')) as file:
    long_description = file.read()

setup(
    name='balact',
    version='.'.join(str(d) for d in BALACT_VERSION),
    description='Balanced softmax and sigmoid losses for long-tailed '
                'classification, with a desk-scale experiment runner',
    long_description=long_description,

    keywords='long-tailed classification balanced softmax class imbalance',
    # For a list of valid classifiers, see https://pypi.org/classifiers/
    classifiers=[  # Optional
        'Intended Audience :: Science/Research',
        'Intended Audience :: Developers',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',

        'Environment :: Console',
        'Operating System :: POSIX :: Linux',
        'Operating System :: MacOS :: MacOS X',

        'License :: OSI Approved :: GNU General Public License v2 or later (GPLv2+)',
        'Development Status :: 3 - Alpha',

        # This does not influence pip when choosing what to install. It is used
        # for the package list on the pypi website.
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
    ],
    python_requires='>=3.8',

    packages=['balact'],
    install_requires=[
        'numpy',
        'PyYAML',
    ],
    extras_require={
        'sentry': ['raven'],
    },
    entry_points={
        'console_scripts': [
            'balact=balact.main:main',
        ],
    },
)
