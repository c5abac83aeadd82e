# Copyright (c) 2019-2020, Orchard Detection Toolkit Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
#   Unless required by applicable law or agreed to in writing, software
#   distributed under the License is distributed on an "AS IS" BASIS,
#   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#   See the License for the specific language governing permissions and
#   limitations under the License.

import orcharddetect

from setuptools import find_packages
from setuptools import setup


def readme():
    with open('README.rst') as f:
        return f.read()

setup(name='orchard-detection-toolkit',

      description='Survey geometry, anchor design and evaluation for '
                  'orchard apple detection',
      long_description=readme(),
      version=orcharddetect.__version__,
      entry_points={
          'console_scripts': ['orchard-pipeline='
                              'orcharddetect.utils.manage:main'],
          'oslo.config.opts': ['orcharddetect = '
                               'orcharddetect.utils.config:list_opts']},
      author='orchard-detection-toolkit',
      url='https://github.com/orchard-detection/orchard-detection-toolkit',

      python_requires='>=3.9',
      # Runtime dependencies.
      install_requires=['numpy>=1.20',
                        'scipy>=1.6',
                        'pandas>=1.5',
                        'Pillow>=8.0',
                        'oslo.config>=8.0',
                        'oslo.log>=4.4',
                        'oslo.utils>=4.8'],

      packages=find_packages(exclude=['test', 'test.*']),
      classifiers=['Development Status :: 4 - Beta',
                   'License :: OSI Approved :: Apache Software License',
                   'Operating System :: OS Independent',
                   'Programming Language :: Python :: 3',
                   'Intended Audience :: Science/Research']
      )
