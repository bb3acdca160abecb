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

import math

import numpy as np
import pytest

from ranplan import NoiseModel
from ranplan import RanError
from ranplan import RssiMatrix
from ranplan import RuConfig
from ranplan import UeConfig
from ranplan import build_rssi_matrix
from ranplan import export_rssi_csv
from ranplan import noise_power
from ranplan import rssi
from ranplan import sinr


def test_rssi():
  assert rssi(RuConfig(), UeConfig(), 70.0) == pytest.approx(-59.9)
  assert rssi(RuConfig(attenuation=0), UeConfig(), 0.0) == pytest.approx(30.1)
  assert rssi(RuConfig(), UeConfig(), math.inf) == -math.inf


def test_ru_config_errors():
  with pytest.raises(ValueError, match=r"within \[0, 50\] dB"):
    RuConfig(attenuation=60)
  with pytest.raises(ValueError, match=r"within \[0, 50\] dB"):
    RuConfig(attenuation=-1)


def test_noise_power():
  assert noise_power(NoiseModel()) == pytest.approx(-94.0, abs=0.05)
  assert noise_power(NoiseModel(bandwidth=1.0)) == pytest.approx(
      -174.0, abs=0.05)
  assert (noise_power(NoiseModel(bandwidth=200e6)) -
          noise_power(NoiseModel(bandwidth=100e6))) == pytest.approx(
              10 * math.log10(2))
  assert NoiseModel().thermal_noise == noise_power(NoiseModel())


def test_sinr_single_ru():
  noise, ue = NoiseModel(), UeConfig()
  matrix = RssiMatrix([[-59.9]])
  expected = -59.9 - (noise.thermal_noise + ue.noise_figure)
  assert sinr(0, 0, [0], matrix, noise, ue) == pytest.approx(expected)
  assert sinr(0, 0, [0], matrix, noise, ue) == pytest.approx(29.1, abs=0.05)


def test_sinr_interferer_at_noise_floor():
  noise, ue = NoiseModel(), UeConfig()
  floor = noise.thermal_noise + ue.noise_figure
  matrix = RssiMatrix([[-59.9], [floor]])
  alone = sinr(0, 0, [0], matrix, noise, ue)
  paired = sinr(0, 0, [0, 1], matrix, noise, ue)
  assert alone - paired == pytest.approx(10 * math.log10(2), abs=1e-9)


def test_sinr_symmetry():
  noise, ue = NoiseModel(), UeConfig()
  matrix = RssiMatrix([[-70.0, -65.0], [-70.0, -80.0]])
  assert sinr(0, 0, [0, 1], matrix, noise, ue) == sinr(
      0, 1, [0, 1], matrix, noise, ue)
  assert sinr(1, 0, [0, 1], matrix, noise, ue) > sinr(
      1, 1, [0, 1], matrix, noise, ue)


def test_sinr_errors():
  matrix = RssiMatrix([[-70.0], [-70.0]])
  with pytest.raises(ValueError, match=r"serving RU 1 is not deployed"):
    sinr(0, 1, [0], matrix, NoiseModel(), UeConfig())


def test_sinr_blocked_link():
  matrix = RssiMatrix([[-math.inf], [-70.0]])
  assert sinr(0, 0, [0, 1], matrix, NoiseModel(), UeConfig()) == -math.inf


def test_rssi_matrix():
  matrix = RssiMatrix([[0.0, -10.0], [-math.inf, 10.0]])
  assert matrix.shape == (2, 2)
  assert matrix.linear[0, 1] == pytest.approx(0.1)
  assert matrix.linear[1, 0] == 0.0
  with pytest.raises(ValueError):
    matrix.values[0, 0] = 1.0
  with pytest.raises(ValueError, match=r"2D matrix"):
    RssiMatrix([1.0, 2.0])

  rng = np.random.default_rng(0)
  values = rng.uniform(-120, -1, size=(4, 5))
  back = 10 * np.log10(RssiMatrix(values).linear)
  assert np.allclose(back, values, rtol=1e-12, atol=0)


def test_build_rssi_matrix():
  rng = np.random.default_rng(1)
  losses = rng.uniform(40, 100, size=(24, 52))
  rus = [RuConfig()] * 24
  matrix = build_rssi_matrix(losses, rus, UeConfig())
  assert matrix.shape == (24, 52)
  assert matrix.values[3, 7] == pytest.approx(
      rssi(RuConfig(), UeConfig(), losses[3, 7]))

  rus[5] = RuConfig(attenuation=30)
  dropped = build_rssi_matrix(losses, rus, UeConfig())
  assert np.allclose(matrix.values[5] - dropped.values[5], 10.0)
  assert np.array_equal(matrix.values[4], dropped.values[4])
  assert np.allclose(matrix.with_attenuation(10.0, rows=[5]).values,
                     dropped.values)

  blocked = build_rssi_matrix(
      np.full((2, 3), math.inf), [RuConfig()] * 2, UeConfig())
  assert np.all(blocked.values == -math.inf)
  assert np.all(blocked.linear == 0.0)

  with pytest.raises(RanError, match=r"3 RU configs") as err:
    build_rssi_matrix(losses, [RuConfig()] * 3, UeConfig())
  assert err.value.code == 'DimensionError'


def test_argmax_invariance_under_uniform_attenuation():
  rng = np.random.default_rng(2)
  noise, ue = NoiseModel(), UeConfig()
  for _ in range(50):
    losses = rng.uniform(50, 110, size=(3, 6))
    attenuation = float(rng.uniform(0, 50))
    matrix = build_rssi_matrix(
        losses, [RuConfig(attenuation=attenuation)] * 3, ue)
    deployed = [0, 1, 2]
    for j in range(6):
      values = [sinr(j, i, deployed, matrix, noise, ue) for i in deployed]
      assert int(np.argmax(values)) == int(np.argmax(matrix.linear[:, j]))


def test_attenuation_monotonicity():
  rng = np.random.default_rng(3)
  noise, ue = NoiseModel(), UeConfig()
  for _ in range(50):
    losses = rng.uniform(50, 110, size=(2, 4))
    low = float(rng.uniform(0, 40))
    high = low + float(rng.uniform(1, 10))
    weak = build_rssi_matrix(losses, [RuConfig(attenuation=high)] * 2, ue)
    strong = build_rssi_matrix(losses, [RuConfig(attenuation=low)] * 2, ue)
    for j in range(4):
      for i in (0, 1):
        assert sinr(j, i, [0, 1], weak, noise, ue) < sinr(
            j, i, [0, 1], strong, noise, ue)


def test_export_rssi_csv(tmpdir):
  path = str(tmpdir.join('rssi.csv'))
  export_rssi_csv(RssiMatrix([[-60.0, -math.inf]]), path)
  with open(path) as f:
    lines = f.read().splitlines()
  assert lines == ['tx_index,rx_index,rssi_dbm', '0,0,-60.0', '0,1,-inf']
