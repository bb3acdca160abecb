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

import numpy as np
import pytest

from ranplan import CombineMode
from ranplan import RanError
from ranplan import Scenario
from ranplan import TrafficModel


SCENE = """scene v1
facet wood 0 0 0 10 0 0 10 8 0 0 8 0
"""


def test_defaults():
  scenario = Scenario()
  assert scenario.ru_points.shape == (24, 3)
  assert scenario.ue_points.shape == (52, 3)
  assert np.all(scenario.ru_points[:, 2] == 2.2)
  assert np.all(scenario.ue_points[:, 2] == 0.8)
  assert scenario.ru.attenuation == 20.0
  assert scenario.trace.max_reflections == 3
  assert str(scenario.tdd) == 'DDDSU'
  assert scenario.simulation.pattern == scenario.tdd
  assert len(scenario.load_scene()) == 0


def test_from_dict():
  scenario = Scenario.from_dict({
      'ru_grid': {'rows': 1, 'cols': 3, 'col_step': 2.0},
      'ue_points': [[1, 1, 0.8], [2, 2, 0.8]],
      'ru': {'attenuation': 10, 'height': 2.5},
      'trace': {'combine_mode': 'power_sum', 'workers': 2},
      'placement': {'attenuation_sweep': [0, 10], 'strategy': 'greedy'},
      'tdd': {'pattern': 'DDSU'},
      'link': {'ack_bits': 1, 'layers_dl': 4},
      'simulation': {
          'ue_count': 2, 'n_slots': 20, 'traffic': 'constant',
          'events': [{'slot': 3, 'kind': 'rach', 'ue_id': 1}]},
  })
  assert scenario.ru_points.shape == (3, 3)
  assert scenario.ru_points[2].tolist() == [4.0, 0.0, 2.5]
  assert scenario.ue_points.shape == (2, 3)
  assert scenario.ru.attenuation == 10
  assert scenario.trace.combine_mode is CombineMode.POWER_SUM
  assert scenario.workers == 2
  assert scenario.placement.attenuation_sweep == (0.0, 10.0)
  assert scenario.placement.strategy == 'greedy'
  assert scenario.tdd.slots == ('D', 'D', 'S', 'U')
  assert scenario.harq.ack_bits_per_ue == 1
  assert scenario.link.layers_dl == 4
  assert scenario.simulation.ue_count == 2
  assert scenario.simulation.traffic == TrafficModel('constant')
  assert scenario.simulation.events[0].ue_id == 1
  assert scenario.simulation.pattern == scenario.tdd
  assert scenario.simulation.harq.ack_bits_per_ue == 1


def test_ue_arc():
  scenario = Scenario.from_dict(
      {'ue_arc': {'center': [5, 0], 'radius': 2, 'rings': 2, 'points': 7}})
  assert scenario.ue_points.shape == (14, 3)
  assert np.all(scenario.ue_points[:, 2] == 0.8)


def test_from_dict_errors(tmpdir):
  with pytest.raises(ValueError, match=r"Expecting dictionary, got: int"):
    Scenario.from_dict(1)

  with pytest.raises(RanError, match=r"unknown keys colour") as err:
    Scenario.from_dict({'colour': 'red'})
  assert err.value.code == 'ConfigError'

  with pytest.raises(RanError, match=r"ru: unknown keys power"):
    Scenario.from_dict({'ru': {'power': 30}})

  with pytest.raises(RanError, match=r"ru: RU attenuation"):
    Scenario.from_dict({'ru': {'attenuation': 70}})

  with pytest.raises(RanError, match=r"ru_grid and ru_points are exclusive"):
    Scenario.from_dict({'ru_grid': {'rows': 1}, 'ru_points': [[0, 0, 1]]})

  with pytest.raises(RanError, match=r"ue_grid and ue_points are exclusive"):
    Scenario.from_dict({'ue_grid': {'rows': 1}, 'ue_points': [[0, 0, 1]]})

  with pytest.raises(RanError, match=r"ue_points: expecting a non-empty list"):
    Scenario.from_dict({'ue_points': [[0, 0]]})

  with pytest.raises(RanError, match=r"scene: no such file"):
    Scenario.from_dict({'scene': 'nowhere.scene'}, str(tmpdir))

  with pytest.raises(RanError, match=r"placement: attenuation 60.0 dB"):
    Scenario.from_dict({'placement': {'attenuation_sweep': [0, 60]}})

  with pytest.raises(RanError, match=r"simulation: 1 traffic models for 2 UEs"):
    Scenario.from_dict({'simulation': {
        'ue_count': 2, 'traffic': [{'kind': 'full_buffer'}]}})


def test_load(tmpdir):
  tmpdir.join('lab.scene').write(SCENE)
  path = tmpdir.join('scenario.yaml')
  path.write(
      'scene: lab.scene\n'
      'ru_points: [[2, 2, 2.2], [8, 6, 2.2]]\n'
      'ue_points: [[5, 4, 0.8]]\n'
      'trace:\n'
      '  max_reflections: 1\n')
  scenario = Scenario.load(str(path))
  assert scenario.scene_path == str(tmpdir.join('lab.scene'))
  assert len(scenario.load_scene()) == 1
  assert scenario.trace.max_reflections == 1

  empty = tmpdir.join('empty.yaml')
  empty.write('')
  assert Scenario.load(str(empty)).ru_points.shape == (24, 3)

  broken = tmpdir.join('broken.yaml')
  broken.write('ru: [1, 2\n')
  with pytest.raises(RanError, match=r"ConfigError"):
    Scenario.load(str(broken))

  listing = tmpdir.join('list.yaml')
  listing.write('- 1\n- 2\n')
  with pytest.raises(RanError, match=r"expecting a mapping"):
    Scenario.load(str(listing))

  with pytest.raises(RanError, match=r"IOError"):
    Scenario.load(str(tmpdir.join('missing.yaml')))


def test_to_dict():
  scenario = Scenario.from_dict({
      'ue_points': [[1, 1, 0.8]],
      'tdd': {'pattern': 'DDSU'},
      'link': {'ack_bits': 1},
      'trace': {'workers': 3},
      'simulation': {'n_slots': 10, 'traffic': {'kind': 'poisson',
                                                'dl_rate': 1e6}}})
  document = scenario.to_dict()
  assert document['tdd']['pattern'] == 'DDSU'
  assert document['link']['ack_bits'] == 1
  assert document['trace']['workers'] == 3
  assert document['trace']['combine_mode'] == 'coherent'
  assert 'carrier' not in document['simulation']

  again = Scenario.from_dict(document)
  assert again.tdd == scenario.tdd
  assert again.harq == scenario.harq
  assert again.trace == scenario.trace
  assert again.simulation == scenario.simulation
  assert np.array_equal(again.ru_points, scenario.ru_points)


def test_with_overrides():
  scenario = Scenario()
  changed = scenario.with_overrides(
      attenuation_sweep=[10, 30], seed=5, combine='power_sum')
  assert changed.placement.attenuation_sweep == (10.0, 30.0)
  assert changed.simulation.seed == 5
  assert changed.trace.combine_mode is CombineMode.POWER_SUM
  assert scenario.simulation.seed == 0
  assert scenario.trace.combine_mode is CombineMode.COHERENT

  with pytest.raises(RanError, match=r"attenuation sweep"):
    scenario.with_overrides(attenuation_sweep=[80])
