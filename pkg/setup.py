# Copyright © 2024 The ranplan-py authors. All Rights Reserved.
# Licensed under the Apache License, Version 2.0 (the 'License');
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an 'AS IS' BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import os
import setuptools
import sys

main_ns = {}
with open(os.path.join('ranplan', 'version.py')) as ver_file:
  exec(ver_file.read(), main_ns)

with open('README.md', 'r', encoding='utf-8') as fh:
  long_description = fh.read()

if sys.version_info < (3, 8, 0):
  raise RuntimeError('ranplan-py requires Python 3.8.0+')

setuptools.setup(
    name='ranplan-py',
    version=main_ns['__version__'],
    description='Private 5G deployment planning and FAPI slot simulation',
    license='Apache 2',
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=['ranplan'],
    python_requires='>=3.8.0',
    install_requires=['numpy', 'scipy', 'pandas', 'PyYAML'],
    setup_requires=['pytest-runner'],
    tests_require=['pytest', 'pytest_asyncio', 'scapy'],
    entry_points={
        'console_scripts': ['ranplan=ranplan.cli:main'],
    },
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: Apache Software License',
        'Operating System :: OS Independent',
    ])
