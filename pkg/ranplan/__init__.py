# Copyright © 2024 The ranplan-py authors. All Rights Reserved.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

from .capacity import *
from .error import *
from .fapi import *
from .geometry import *
from .linkbudget import *
from .measure import *
from .pcap import *
from .placement import *
from .raytrace import *
from .scenario import *
from .scene import *
from .slotsim import *
from .version import __version__
