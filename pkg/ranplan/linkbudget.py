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

import dataclasses
import math

import numpy as np
import pandas as pd

from .error import RanError


__all__ = [
    'BOLTZMANN',
    'NoiseModel',
    'RssiMatrix',
    'RuConfig',
    'SINR_FLOOR_DB',
    'UeConfig',
    'build_rssi_matrix',
    'export_rssi_csv',
    'noise_power',
    'rssi',
    'sinr']


BOLTZMANN = 1.380649e-23

MAX_ATTENUATION_DB = 50.0

# Stands in for the -inf SINR of a UE with every link blocked when averaging.
SINR_FLOOR_DB = -30.0


@dataclasses.dataclass(frozen=True)
class RuConfig:
  """Radio unit transmit chain.

  :param tx_power: P_RU in dBm.
  :param antenna_gain: G_RU in dBi.
  :param attenuation: A_RU in dB, between 0 and 50.
  :param antenna_spacing: Informational, meters.
  :param height: Mounting height in meters.
  """
  tx_power: float = 24.0
  antenna_gain: float = 5.0
  attenuation: float = 20.0
  antenna_spacing: float = 0.25
  height: float = 2.2

  def __post_init__(self):
    if not 0.0 <= self.attenuation <= MAX_ATTENUATION_DB:
      raise ValueError('RU attenuation must be within [0, 50] dB')
    if not math.isfinite(self.tx_power):
      raise ValueError('RU transmit power must be finite')


@dataclasses.dataclass(frozen=True)
class UeConfig:
  """UE receive chain: G_UE in dBi and noise figure F_UE in dB."""
  antenna_gain: float = 1.1
  noise_figure: float = 5.0
  antenna_spacing: float = 0.07
  height: float = 0.8

  def __post_init__(self):
    if self.noise_figure < 0:
      raise ValueError('UE noise figure must not be negative')


@dataclasses.dataclass(frozen=True)
class NoiseModel:
  """Thermal noise over `bandwidth` Hz at `temperature` K."""
  bandwidth: float = 100e6
  temperature: float = 290.0

  def __post_init__(self):
    if not self.bandwidth > 0:
      raise ValueError('noise bandwidth must be positive')
    if not self.temperature > 0:
      raise ValueError('noise temperature must be positive')

  @property
  def thermal_noise(self):
    """N in dBm, derived from the current fields."""
    return noise_power(self)


class RssiMatrix:
  """Received power R_ij in dBm for every (RU i, UE j) pair.

  The linear mirror R̂_ij in mW is computed once. Blocked links hold -inf
  in dBm and 0 in mW. Both arrays are read-only.
  """

  def __init__(self, values):
    values = np.array(values, dtype=float)
    if values.ndim != 2:
      raise ValueError('RSSI values must be a 2D matrix')
    self._values = values
    self._values.setflags(write=False)
    self._linear = np.power(10.0, values / 10.0)
    self._linear.setflags(write=False)

  @property
  def values(self):
    return self._values

  @property
  def linear(self):
    return self._linear

  @property
  def shape(self):
    return self._values.shape

  def with_attenuation(self, delta, rows=None):
    """Returns a copy where `rows` (all by default) lose `delta` dB."""
    values = self._values.copy()
    if rows is None:
      values -= delta
    else:
      values[list(rows), :] -= delta
    return RssiMatrix(values)

  def to_dataframe(self):
    m, n = self.shape
    ii, jj = np.meshgrid(np.arange(m), np.arange(n), indexing='ij')
    return pd.DataFrame({
        'tx_index': ii.ravel(),
        'rx_index': jj.ravel(),
        'rssi_dbm': self._values.ravel()})


def rssi(ru, ue, path_loss):
  """Received power in dBm: P_RU + G_RU - A_RU - PL + G_UE.

  A +inf path loss (no path) gives -inf.

  :type ru: :class:`RuConfig`
  :type ue: :class:`UeConfig`
  :param path_loss: Path loss in dB.
  """
  if path_loss == math.inf:
    return -math.inf
  return (ru.tx_power + ru.antenna_gain - ru.attenuation - path_loss +
          ue.antenna_gain)


def noise_power(model):
  """Thermal noise k·T·B expressed in dBm."""
  return 10.0 * math.log10(
      BOLTZMANN * model.temperature * model.bandwidth * 1e3)


def _to_db(ratio):
  with np.errstate(divide='ignore'):
    return 10.0 * np.log10(ratio)


def sinr(ue_index, serving, deployed, rssi_matrix, noise, ue):
  """SINR of UE `ue_index` served by RU `serving`, in dB.

  The denominator adds the UE noise floor N·F_UE to the power received from
  every other deployed RU.

  :param deployed: Indices of the deployed RUs, `serving` among them.
  :type rssi_matrix: :class:`RssiMatrix`
  :type noise: :class:`NoiseModel`
  :type ue: :class:`UeConfig`
  """
  deployed = list(deployed)
  if serving not in deployed:
    raise ValueError(f'serving RU {serving} is not deployed')
  linear = rssi_matrix.linear
  noise_floor = 10.0 ** ((noise.thermal_noise + ue.noise_figure) / 10.0)
  interference = sum(linear[u, ue_index] for u in deployed if u != serving)
  return float(_to_db(linear[serving, ue_index] / (noise_floor + interference)))


def build_rssi_matrix(channel, rus, ue):
  """Applies :func:`rssi` to every entry of a channel matrix.

  :param channel: A :class:`ranplan.ChannelMatrix` or an array of path
    losses in dB.
  :param rus: One :class:`RuConfig` per channel row.
  :type ue: :class:`UeConfig`
  :raises RanError: 'DimensionError' when `rus` does not match the rows.
  """
  losses = getattr(channel, 'path_loss_db', channel)
  losses = np.asarray(losses, dtype=float)
  rus = list(rus)
  if losses.ndim != 2 or len(rus) != losses.shape[0]:
    raise RanError(
        'DimensionError',
        f'{len(rus)} RU configs for a channel of shape {losses.shape}')
  offsets = np.array(
      [ru.tx_power + ru.antenna_gain - ru.attenuation for ru in rus])
  return RssiMatrix(offsets[:, None] - losses + ue.antenna_gain)


def export_rssi_csv(rssi_matrix, path):
  """Writes one CSV row per pair: tx_index, rx_index, rssi_dbm."""
  try:
    rssi_matrix.to_dataframe().to_csv(path, index=False)
  except OSError as err:
    raise RanError('IOError', f'{path}: {err}')
