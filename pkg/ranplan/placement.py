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

"""RU placement by average SINR."""

import dataclasses
import itertools
import logging
import math
import string
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from .error import RanError
from .linkbudget import NoiseModel
from .linkbudget import RuConfig
from .linkbudget import SINR_FLOOR_DB
from .linkbudget import UeConfig
from .linkbudget import build_rssi_matrix


__all__ = [
    'AssociationResult',
    'DEFAULT_SWEEP',
    'Deployment',
    'Planner',
    'ScoreRow',
    'ScoreTable',
    'SearchResult',
    'SweepResult',
    'associate',
    'enumerate_pairs',
    'export_heatmap',
    'format_best_table',
    'heatmap_matrix',
    'score',
    'score_deployments',
    'search',
    'sweep_attenuation']


logger = logging.getLogger(__name__)

DEFAULT_SWEEP = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0)

# Largest number of deployments the exhaustive strategy evaluates.
EXHAUSTIVE_LIMIT = 10 ** 6

_DOMAINS = ('db', 'linear')


@dataclasses.dataclass(frozen=True)
class Deployment:
  """A set of deployed RU locations, kept sorted so ties resolve to the
  lowest index."""
  ru_indices: Tuple[int, ...]

  def __post_init__(self):
    indices = tuple(sorted(int(i) for i in self.ru_indices))
    if not indices:
      raise ValueError('a deployment needs at least one RU')
    if len(set(indices)) != len(indices):
      raise ValueError(f'duplicate RU indices in {indices}')
    if indices[0] < 0:
      raise ValueError(f'negative RU index in {indices}')
    object.__setattr__(self, 'ru_indices', indices)

  def __len__(self):
    return len(self.ru_indices)

  def __iter__(self):
    return iter(self.ru_indices)

  def __str__(self):
    return '[' + ', '.join(str(i) for i in self.ru_indices) + ']'

  def check(self, n_locations):
    if self.ru_indices[-1] >= n_locations:
      raise RanError(
          'DimensionError',
          f'deployment {self} out of range for {n_locations} RU locations')


@dataclasses.dataclass(frozen=True)
class AssociationResult:
  """Serving RU and best SINR (dB) of every UE under one deployment.

  `best_sinr` holds raw values: a UE with every link blocked gets -inf.
  """
  deployment: Deployment
  serving: np.ndarray
  best_sinr: np.ndarray


@dataclasses.dataclass(frozen=True)
class ScoreRow:
  """Average SINR E(Γ) of a deployment with the spread of its per-UE values."""
  deployment: Deployment
  score_db: float
  min_db: float
  max_db: float
  attenuation_db: Optional[float] = None


class ScoreTable:
  """Scores of a list of deployments, in enumeration order.

  `gamma_max` is the deployments × UEs matrix of best SINR values, after the
  blocked-UE floor was applied.
  """

  def __init__(self, rows, gamma_max, attenuation_db=None):
    self.rows = tuple(rows)
    self.gamma_max = np.asarray(gamma_max, dtype=float)
    self.attenuation_db = attenuation_db
    if self.gamma_max.shape[0] != len(self.rows):
      raise ValueError('gamma_max needs one row per deployment')

  def __len__(self):
    return len(self.rows)

  def __iter__(self):
    return iter(self.rows)

  def best(self):
    """Row with the highest score, the earliest one on ties."""
    if not self.rows:
      raise ValueError('empty score table')
    scores = np.array([r.score_db for r in self.rows])
    return self.rows[int(np.argmax(scores))]

  def score_range(self):
    """[min, max] of the deployment scores over the whole table."""
    scores = [r.score_db for r in self.rows]
    return min(scores), max(scores)

  def to_dataframe(self):
    width = max((len(r.deployment) for r in self.rows), default=2)
    width = max(width, 2)
    names = [f'ru_{string.ascii_lowercase[k]}' for k in range(width)]
    records = []
    for row in self.rows:
      indices = list(row.deployment.ru_indices)
      indices += [None] * (width - len(indices))
      records.append(indices + [
          row.attenuation_db, row.score_db, row.min_db, row.max_db])
    return pd.DataFrame(
        records,
        columns=names + ['attenuation_db', 'score_db', 'min_db', 'max_db'])

  def to_csv(self, path):
    try:
      self.to_dataframe().to_csv(path, index=False)
    except OSError as err:
      raise RanError('IOError', f'{path}: {err}')


@dataclasses.dataclass(frozen=True)
class SweepResult:
  attenuation_db: float
  table: ScoreTable
  best: ScoreRow


@dataclasses.dataclass(frozen=True)
class SearchResult:
  best: ScoreRow
  table: ScoreTable
  strategy: str


def _noise_floor(noise, ue_cfg):
  return 10.0 ** ((noise.thermal_noise + ue_cfg.noise_figure) / 10.0)


def enumerate_pairs(n_locations):
  """All unordered RU location pairs in lexicographic order.

  :raises RanError: 'ConfigError' with fewer than two locations.
  """
  if n_locations < 2:
    raise RanError('ConfigError', 'need >=2 locations for pair search')
  return [Deployment(p) for p in itertools.combinations(range(n_locations), 2)]


def associate(deployment, rssi, noise, ue_cfg):
  """Assigns every UE to the deployed RU giving it the best SINR.

  :type deployment: :class:`Deployment`
  :type rssi: :class:`ranplan.RssiMatrix`
  :type noise: :class:`ranplan.NoiseModel`
  :type ue_cfg: :class:`ranplan.UeConfig`
  :returns: An :class:`AssociationResult`.
  """
  deployment.check(rssi.shape[0])
  linear = rssi.linear
  noise_floor = _noise_floor(noise, ue_cfg)
  indices = deployment.ru_indices
  gammas = np.empty((len(indices), rssi.shape[1]))
  for k, serving in enumerate(indices):
    interference = sum(linear[u] for u in indices if u != serving)
    with np.errstate(divide='ignore'):
      gammas[k] = 10.0 * np.log10(linear[serving] / (noise_floor + interference))
  # np.argmax picks the first maximum and indices are sorted.
  best = np.argmax(gammas, axis=0)
  columns = np.arange(gammas.shape[1])
  return AssociationResult(
      deployment, np.asarray(indices)[best], gammas[best, columns])


def _average(values, domain):
  if domain == 'linear':
    return float(10.0 * np.log10(np.mean(np.power(10.0, values / 10.0))))
  return float(np.mean(values))


def _floored(values, floor):
  return np.where(np.isneginf(values), floor, values)


def score(deployment, rssi, noise, ue_cfg, floor=SINR_FLOOR_DB, domain='db',
          attenuation_db=None):
  """Scores a deployment by the average of its per-UE best SINR.

  UEs with every link blocked count as `floor` dB.

  :param domain: 'db' averages dB values, 'linear' averages power ratios and
    converts the mean back to dB.
  :returns: A :class:`ScoreRow`.
  """
  if domain not in _DOMAINS:
    raise ValueError(f'domain must be one of {_DOMAINS}')
  values = _floored(associate(deployment, rssi, noise, ue_cfg).best_sinr, floor)
  return ScoreRow(deployment, _average(values, domain), float(values.min()),
                  float(values.max()), attenuation_db)


def score_deployments(deployments, rssi, noise, ue_cfg, floor=SINR_FLOOR_DB,
                      domain='db', attenuation_db=None):
  """Scores every deployment into a :class:`ScoreTable`."""
  if domain not in _DOMAINS:
    raise ValueError(f'domain must be one of {_DOMAINS}')
  rows = []
  gamma_max = []
  floored = 0
  for deployment in deployments:
    best = associate(deployment, rssi, noise, ue_cfg).best_sinr
    floored += int(np.isneginf(best).any())
    values = _floored(best, floor)
    gamma_max.append(values)
    rows.append(ScoreRow(
        deployment, _average(values, domain), float(values.min()),
        float(values.max()), attenuation_db))
  if floored:
    logger.warning(
        '%d deployments have blocked UEs scored at the %.1f dB floor',
        floored, floor)
  gamma_max = np.array(gamma_max).reshape(len(rows), rssi.shape[1])
  return ScoreTable(rows, gamma_max, attenuation_db)


class Planner:
  """Placement problem: path losses from every RU candidate to every UE test
  point, plus the radio configurations the link budget needs.

  :param channel: A :class:`ranplan.ChannelMatrix` or an array of path losses
    in dB (RU candidates × UEs).
  :param ru: :class:`ranplan.RuConfig` shared by every RU candidate.
  :param ue: :class:`ranplan.UeConfig`.
  :param noise: :class:`ranplan.NoiseModel`.
  :param floor: SINR in dB standing for blocked UEs.
  :param domain: Averaging domain of the score, 'db' or 'linear'.
  """

  def __init__(self, channel, ru=None, ue=None, noise=None,
               floor=SINR_FLOOR_DB, domain='db'):
    losses = getattr(channel, 'path_loss_db', channel)
    self.path_loss = np.asarray(losses, dtype=float)
    if self.path_loss.ndim != 2:
      raise RanError('DimensionError', 'path losses must form a 2D matrix')
    if domain not in _DOMAINS:
      raise ValueError(f'domain must be one of {_DOMAINS}')
    self.ru = ru or RuConfig()
    self.ue = ue or UeConfig()
    self.noise = noise or NoiseModel()
    self.floor = floor
    self.domain = domain

  @property
  def n_locations(self):
    return self.path_loss.shape[0]

  @property
  def n_ues(self):
    return self.path_loss.shape[1]

  def rssi(self, attenuation_db=None):
    """RSSI matrix with `attenuation_db` applied to every RU."""
    ru = self.ru
    if attenuation_db is not None:
      ru = dataclasses.replace(ru, attenuation=attenuation_db)
    return build_rssi_matrix(self.path_loss, [ru] * self.n_locations, self.ue)

  def table(self, deployments, attenuation_db=None):
    if attenuation_db is None:
      attenuation_db = self.ru.attenuation
    return score_deployments(
        deployments, self.rssi(attenuation_db), self.noise, self.ue,
        floor=self.floor, domain=self.domain, attenuation_db=attenuation_db)

  def sweep(self, values=DEFAULT_SWEEP, deployments=None):
    return sweep_attenuation(self, values, deployments)

  def search(self, m=2, strategy='exhaustive'):
    return search(self, m, strategy)


def sweep_attenuation(planner, values=DEFAULT_SWEEP, deployments=None):
  """Scores the deployments once per uniform RU attenuation.

  :param planner: A :class:`Planner`.
  :param values: Attenuations in dB, each within [0, 50].
  :param deployments: Defaults to every RU location pair.
  :returns: A list of :class:`SweepResult`, in the order of `values`.
  """
  if deployments is None:
    deployments = enumerate_pairs(planner.n_locations)
  deployments = list(deployments)
  results = []
  for value in values:
    value = float(value)
    if not 0.0 <= value <= 50.0:
      raise ValueError(f'attenuation {value} dB outside [0, 50]')
    table = planner.table(deployments, value)
    best = table.best()
    logger.info('A_RU=%.0f dB: best %s at %.2f dB', value, best.deployment,
                best.score_db)
    results.append(SweepResult(value, table, best))
  return results


def heatmap_matrix(table, normalize=False, n_locations=None):
  """Symmetric location × location matrix of pair scores.

  Cells without a pair, the diagonal included, hold NaN. Normalization maps
  the table's lowest score to 0 and its highest to 1, or everything to 0
  when all scores are equal.
  """
  if any(len(r.deployment) != 2 for r in table.rows):
    raise ValueError('heatmaps need pair deployments')
  if n_locations is None:
    n_locations = 1 + max(
        (r.deployment.ru_indices[1] for r in table.rows), default=-1)
  matrix = np.full((n_locations, n_locations), np.nan)
  lo, hi = table.score_range() if table.rows else (0.0, 0.0)
  for row in table.rows:
    value = row.score_db
    if normalize:
      value = (value - lo) / (hi - lo) if hi > lo else 0.0
    a, b = row.deployment.ru_indices
    matrix[a, b] = matrix[b, a] = value
  return matrix


def export_heatmap(table, path, normalize=False, n_locations=None):
  """Writes :func:`heatmap_matrix` as a headerless CSV, NaN as empty cells."""
  matrix = heatmap_matrix(table, normalize, n_locations)
  try:
    pd.DataFrame(matrix).to_csv(path, header=False, index=False, na_rep='')
  except OSError as err:
    raise RanError('IOError', f'{path}: {err}')
  return matrix


def _exhaustive(planner, m):
  count = math.comb(planner.n_locations, m)
  if count > EXHAUSTIVE_LIMIT:
    raise RanError(
        'CombinatorialLimitError',
        f'C({planner.n_locations}, {m}) = {count} deployments exceed '
        f'{EXHAUSTIVE_LIMIT}, use the greedy strategy')
  deployments = [
      Deployment(c) for c in itertools.combinations(range(planner.n_locations), m)]
  table = planner.table(deployments)
  return SearchResult(table.best(), table, 'exhaustive')


def _greedy(planner, m):
  table = planner.table([Deployment((i,)) for i in range(planner.n_locations)])
  best = table.best()
  while len(best.deployment) < m:
    chosen = best.deployment.ru_indices
    candidates = [
        Deployment(chosen + (i,))
        for i in range(planner.n_locations) if i not in chosen]
    table = planner.table(candidates)
    best = table.best()
  return SearchResult(best, table, 'greedy')


def search(planner, m=2, strategy='exhaustive'):
  """Finds the deployment of `m` RUs with the highest score.

  The exhaustive strategy scores every combination. The greedy one starts
  from the best single RU and adds the RU improving the score most, one at a
  time; the returned table holds its last round of candidates.

  :raises RanError: 'CombinatorialLimitError' when the exhaustive strategy
    would score more than a million deployments.
  """
  if not 1 <= m <= planner.n_locations:
    raise ValueError(
        f'cannot deploy {m} RUs over {planner.n_locations} locations')
  if strategy == 'exhaustive':
    return _exhaustive(planner, m)
  if strategy == 'greedy':
    return _greedy(planner, m)
  raise ValueError(f'unknown search strategy: {strategy}')


def format_best_table(results):
  """Renders the best pair per attenuation as a text table.

  Both readings of the spread are printed: per-UE best SINR of the best
  deployment, and deployment scores over the whole table.
  """
  header = ('A_RU (dB)', 'Best RUs', 'E(G) (dB)', '[Min, Max] per UE',
            '[Min, Max] all deployments')
  lines = []
  for result in results:
    lo, hi = result.table.score_range()
    best = result.best
    lines.append((
        f'{result.attenuation_db:g}', str(best.deployment),
        f'{best.score_db:.2f}', f'[{best.min_db:.2f}, {best.max_db:.2f}]',
        f'[{lo:.2f}, {hi:.2f}]'))
  widths = [max(len(r[k]) for r in [header] + lines) for k in range(len(header))]
  out = [' | '.join(h.ljust(w) for h, w in zip(header, widths))]
  out.append('-+-'.join('-' * w for w in widths))
  for line in lines:
    out.append(' | '.join(c.ljust(w) for c, w in zip(line, widths)))
  return '\n'.join(out) + '\n'
