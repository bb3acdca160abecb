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

"""Scenario documents: one YAML file binding every configuration together."""

import dataclasses
import enum
import logging
import os

import numpy as np
import yaml

from .capacity import CarrierConfig
from .capacity import HarqConstraint
from .capacity import LinkConfig
from .capacity import TddPattern
from .error import RanError
from .linkbudget import NoiseModel
from .linkbudget import RuConfig
from .linkbudget import UeConfig
from .placement import DEFAULT_SWEEP
from .placement import Planner
from .raytrace import TraceConfig
from .scene import ArcSpec
from .scene import GridSpec
from .scene import Scene
from .scene import generate_arc
from .scene import generate_grid
from .scene import load_scene
from .slotsim import SimConfig
from .slotsim import SimEvent
from .slotsim import TrafficModel


__all__ = ['PlacementSettings', 'Scenario']


logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = (
    'scene', 'ru_grid', 'ru_points', 'ue_grid', 'ue_arc', 'ue_points', 'ru',
    'ue', 'noise', 'trace', 'placement', 'carrier', 'tdd', 'link',
    'simulation')

# 24 RU candidates on the ceiling and 52 UE test points at desk height.
DEFAULT_RU_GRID = GridSpec(
    origin=(1.0, 1.5, 0.0), rows=2, cols=12, row_step=4.0, col_step=1.0,
    height=2.2)
DEFAULT_UE_GRID = GridSpec(
    origin=(0.5, 1.0, 0.0), rows=4, cols=13, row_step=1.5, col_step=1.0,
    height=0.8)


@dataclasses.dataclass
class PlacementSettings:
  attenuation_sweep: tuple = DEFAULT_SWEEP
  m: int = 2
  strategy: str = 'exhaustive'
  floor: float = -30.0
  domain: str = 'db'

  def __post_init__(self):
    self.attenuation_sweep = tuple(float(a) for a in self.attenuation_sweep)
    for value in self.attenuation_sweep:
      if not 0.0 <= value <= 50.0:
        raise ValueError(f'attenuation {value} dB outside [0, 50]')
    if self.strategy not in ('exhaustive', 'greedy'):
      raise ValueError(f'unknown search strategy: {self.strategy}')
    if self.domain not in ('db', 'linear'):
      raise ValueError(f'unknown averaging domain: {self.domain}')


def _config_error(section, err):
  return RanError('ConfigError', f'{section}: {err}')


def _section(document, name):
  value = document.get(name)
  if value is None:
    return {}
  if not isinstance(value, dict):
    raise RanError(
        'ConfigError',
        f'{name}: expecting a mapping, got {type(value).__name__}')
  return value


def _build(cls, values, section, **extra):
  known = {f.name for f in dataclasses.fields(cls)}
  unknown = sorted(set(values) - known)
  if unknown:
    raise RanError(
        'ConfigError', f'{section}: unknown keys {", ".join(unknown)}')
  try:
    return cls(**{**values, **extra})
  except (TypeError, ValueError) as err:
    raise _config_error(section, err)


def _points(value, section):
  try:
    points = np.asarray(value, dtype=float)
  except (TypeError, ValueError) as err:
    raise _config_error(section, err)
  if points.ndim != 2 or points.shape[1] != 3 or len(points) == 0:
    raise RanError(
        'ConfigError', f'{section}: expecting a non-empty list of [x, y, z]')
  return points


def _plain(value):
  if dataclasses.is_dataclass(value):
    return {k: _plain(v) for k, v in dataclasses.asdict(value).items()}
  if isinstance(value, dict):
    return {k: _plain(v) for k, v in value.items()}
  if isinstance(value, enum.Enum):
    return value.value
  if isinstance(value, (list, tuple)):
    return [_plain(v) for v in value]
  if isinstance(value, np.ndarray):
    return value.tolist()
  return value


@dataclasses.dataclass
class Scenario:
  """Everything a planning, capacity or simulation run needs.

  Every section is optional; the defaults describe a 24-candidate RU grid
  over 52 UE test points in free space, with the reference radio, carrier,
  TDD and link parameters.
  """
  scene_path: str = None
  ru_points: np.ndarray = None
  ue_points: np.ndarray = None
  ru: RuConfig = dataclasses.field(default_factory=RuConfig)
  ue: UeConfig = dataclasses.field(default_factory=UeConfig)
  noise: NoiseModel = dataclasses.field(default_factory=NoiseModel)
  trace: TraceConfig = dataclasses.field(default_factory=TraceConfig)
  workers: int = None
  placement: PlacementSettings = dataclasses.field(
      default_factory=PlacementSettings)
  carrier: CarrierConfig = dataclasses.field(default_factory=CarrierConfig)
  tdd: TddPattern = dataclasses.field(default_factory=TddPattern)
  link: LinkConfig = dataclasses.field(default_factory=LinkConfig)
  harq: HarqConstraint = dataclasses.field(default_factory=HarqConstraint)
  simulation: SimConfig = None

  def __post_init__(self):
    if self.ru_points is None:
      self.ru_points = generate_grid(DEFAULT_RU_GRID)
    if self.ue_points is None:
      self.ue_points = generate_grid(DEFAULT_UE_GRID)
    if self.simulation is None:
      self.simulation = SimConfig(
          carrier=self.carrier, pattern=self.tdd, link=self.link,
          harq=self.harq)

  @classmethod
  def from_dict(cls, document, base_dir=None):
    """Creates a scenario from its dictionary representation.

    :param document: Parsed scenario document.
    :param base_dir: Directory relative paths are resolved against.
    :raises RanError: 'ConfigError' on unknown keys or invalid values.
    """
    if not isinstance(document, dict):
      raise ValueError(
          'Expecting dictionary, got: {}'.format(type(document).__name__))
    unknown = sorted(set(document) - set(TOP_LEVEL_KEYS))
    if unknown:
      raise RanError('ConfigError', f'unknown keys {", ".join(unknown)}')

    scene_path = document.get('scene')
    if scene_path is not None:
      scene_path = str(scene_path)
      if base_dir and not os.path.isabs(scene_path):
        scene_path = os.path.join(base_dir, scene_path)
      if not os.path.isfile(scene_path):
        raise RanError('ConfigError', f'scene: no such file {scene_path}')

    ru = _build(RuConfig, _section(document, 'ru'), 'ru')
    ue = _build(UeConfig, _section(document, 'ue'), 'ue')

    if 'ru_grid' in document and 'ru_points' in document:
      raise RanError('ConfigError', 'ru_grid and ru_points are exclusive')
    if 'ru_points' in document:
      ru_points = _points(document['ru_points'], 'ru_points')
    else:
      grid = dict(_section(document, 'ru_grid'))
      if grid:
        grid.setdefault('height', ru.height)
        ru_points = generate_grid(_build(GridSpec, grid, 'ru_grid'))
      else:
        ru_points = generate_grid(
            dataclasses.replace(DEFAULT_RU_GRID, height=ru.height))

    given = [k for k in ('ue_grid', 'ue_arc', 'ue_points') if k in document]
    if len(given) > 1:
      raise RanError('ConfigError', f'{" and ".join(given)} are exclusive')
    if 'ue_points' in document:
      ue_points = _points(document['ue_points'], 'ue_points')
    elif 'ue_arc' in document:
      arc = dict(_section(document, 'ue_arc'))
      arc.setdefault('height', ue.height)
      ue_points = generate_arc(_build(ArcSpec, arc, 'ue_arc'))
    else:
      grid = dict(_section(document, 'ue_grid'))
      if grid:
        grid.setdefault('height', ue.height)
        ue_points = generate_grid(_build(GridSpec, grid, 'ue_grid'))
      else:
        ue_points = generate_grid(
            dataclasses.replace(DEFAULT_UE_GRID, height=ue.height))

    trace = dict(_section(document, 'trace'))
    workers = trace.pop('workers', None)

    link = dict(_section(document, 'link'))
    harq = {}
    if 'ack_bits' in link:
      harq['ack_bits_per_ue'] = link.pop('ack_bits')

    tdd = dict(_section(document, 'tdd'))
    if 'pattern' in tdd:
      pattern = tdd.pop('pattern')
      if not isinstance(pattern, (list, tuple)):
        pattern = str(pattern)
      tdd['slots'] = tuple(pattern)

    scenario = cls(
        scene_path=scene_path,
        ru_points=ru_points,
        ue_points=ue_points,
        ru=ru,
        ue=ue,
        noise=_build(NoiseModel, _section(document, 'noise'), 'noise'),
        trace=_build(TraceConfig, trace, 'trace'),
        workers=workers,
        placement=_build(
            PlacementSettings, _section(document, 'placement'), 'placement'),
        carrier=_build(CarrierConfig, _section(document, 'carrier'), 'carrier'),
        tdd=_build(TddPattern, tdd, 'tdd'),
        link=_build(LinkConfig, link, 'link'),
        harq=_build(HarqConstraint, harq, 'link'))
    scenario.simulation = scenario._simulation(
        _section(document, 'simulation'))
    return scenario

  def _simulation(self, values):
    values = dict(values)
    traffic = values.pop('traffic', None)
    if isinstance(traffic, list):
      values['traffic'] = tuple(
          _build(TrafficModel, t, 'simulation.traffic') for t in traffic)
    elif isinstance(traffic, dict):
      values['traffic'] = _build(TrafficModel, traffic, 'simulation.traffic')
    elif isinstance(traffic, str):
      values['traffic'] = _build(
          TrafficModel, {'kind': traffic}, 'simulation.traffic')
    events = values.pop('events', None) or ()
    values['events'] = tuple(
        _build(SimEvent, e, 'simulation.events') for e in events)
    return _build(
        SimConfig, values, 'simulation', carrier=self.carrier,
        pattern=self.tdd, link=self.link, harq=self.harq)

  @classmethod
  def load(cls, path):
    """Reads a scenario YAML file. Relative paths in it are resolved
    against the file's directory."""
    try:
      with open(path, 'r', encoding='utf-8') as f:
        document = yaml.safe_load(f)
    except OSError as err:
      raise RanError('IOError', f'{path}: {err}')
    except yaml.YAMLError as err:
      raise RanError('ConfigError', f'{path}: {err}')
    if document is None:
      document = {}
    if not isinstance(document, dict):
      raise RanError('ConfigError', f'{path}: expecting a mapping')
    logger.debug('Loaded scenario %s', path)
    return cls.from_dict(document, os.path.dirname(os.path.abspath(path)))

  def to_dict(self):
    """Effective configuration, in the layout :meth:`from_dict` reads."""
    link = _plain(self.link)
    link['ack_bits'] = self.harq.ack_bits_per_ue
    tdd = _plain(self.tdd)
    tdd['pattern'] = ''.join(tdd.pop('slots'))
    trace = _plain(self.trace)
    if self.workers is not None:
      trace['workers'] = self.workers
    simulation = _plain(self.simulation)
    for key in ('carrier', 'pattern', 'link', 'harq'):
      simulation.pop(key)
    document = {
        'ru_points': _plain(self.ru_points),
        'ue_points': _plain(self.ue_points),
        'ru': _plain(self.ru),
        'ue': _plain(self.ue),
        'noise': _plain(self.noise),
        'trace': trace,
        'placement': _plain(self.placement),
        'carrier': _plain(self.carrier),
        'tdd': tdd,
        'link': link,
        'simulation': simulation,
    }
    if self.scene_path is not None:
      document['scene'] = self.scene_path
    return document

  def with_overrides(self, attenuation_sweep=None, seed=None, combine=None):
    """Copy with the command-line overrides applied."""
    scenario = dataclasses.replace(self)
    if attenuation_sweep is not None:
      try:
        scenario.placement = dataclasses.replace(
            self.placement, attenuation_sweep=tuple(attenuation_sweep))
      except ValueError as err:
        raise _config_error('attenuation sweep', err)
    if seed is not None:
      scenario.simulation = dataclasses.replace(self.simulation, seed=seed)
    if combine is not None:
      scenario.trace = dataclasses.replace(self.trace, combine_mode=combine)
    return scenario

  def load_scene(self):
    """The scene file's contents, an empty scene (free space) without one."""
    if self.scene_path is None:
      return Scene()
    return load_scene(self.scene_path)

  def planner(self, channel):
    return Planner(
        channel, self.ru, self.ue, self.noise, floor=self.placement.floor,
        domain=self.placement.domain)
