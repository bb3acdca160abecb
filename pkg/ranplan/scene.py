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
import functools
import logging
import math
from typing import Optional, Tuple

import numpy as np

from .error import RanError
from .geometry import PolygonSet
from .geometry import newell_normal


__all__ = [
    'ArcSpec',
    'Bounds',
    'Diagnostic',
    'Facet',
    'GridSpec',
    'Material',
    'Scene',
    'WOOD',
    'dump_scene',
    'dumps_scene',
    'generate_arc',
    'generate_grid',
    'load_scene',
    'loads_scene',
    'validate_scene']


logger = logging.getLogger(__name__)

SCENE_HEADER = 'scene v1'

# Vertices farther than this from the facet's best-fit plane make the facet
# non-coplanar.
COPLANAR_TOLERANCE = 1e-6


@dataclasses.dataclass(frozen=True)
class Material:
  """Electromagnetic constants of a facet's material."""
  name: str
  relative_permittivity: float
  conductivity: float


# ITU-R P.2040 wood at 3.75 GHz.
WOOD = Material('wood', 1.99, 0.012)


@dataclasses.dataclass(frozen=True)
class Facet:
  """A planar polygon made of a single material.

  Facets are double-sided and infinitely thin. Nothing is checked on
  construction, :func:`validate_scene` reports what is wrong with them.
  """
  vertices: Tuple[Tuple[float, float, float], ...]
  material: Material

  def __post_init__(self):
    object.__setattr__(self, 'vertices', tuple(
        tuple(float(c) for c in v) for v in self.vertices))

  @property
  def area(self):
    if len(self.vertices) < 3:
      return 0.0
    return 0.5 * float(np.linalg.norm(newell_normal(self.vertices)))


@dataclasses.dataclass(frozen=True)
class Bounds:
  """Axis-aligned box in meters."""
  minimum: Tuple[float, float, float]
  maximum: Tuple[float, float, float]

  def contains(self, point, tol=1e-9):
    return all(lo - tol <= c <= hi + tol
               for lo, c, hi in zip(self.minimum, point, self.maximum))


@dataclasses.dataclass(frozen=True)
class Scene:
  """The environment traversed by rays: a list of facets inside a box.

  An empty scene stands for free space. When `bounds` is None the scene has
  no explicit box and every facet is considered inside it.
  """
  facets: Tuple[Facet, ...] = ()
  bounds: Optional[Bounds] = None

  def __post_init__(self):
    object.__setattr__(self, 'facets', tuple(self.facets))

  def __len__(self):
    return len(self.facets)

  @property
  def materials(self):
    """Materials used by the facets, by name, in order of appearance."""
    result = {}
    for facet in self.facets:
      result.setdefault(facet.material.name, facet.material)
    return result

  @functools.cached_property
  def polygons(self):
    """A :class:`ranplan.geometry.PolygonSet` over the scene's facets."""
    return PolygonSet([f.vertices for f in self.facets])

  def bounding_box(self):
    """Returns the declared bounds or the box enclosing every facet."""
    if self.bounds is not None:
      return self.bounds
    if not self.facets:
      return None
    points = np.array([v for f in self.facets for v in f.vertices])
    return Bounds(tuple(points.min(axis=0)), tuple(points.max(axis=0)))


@dataclasses.dataclass(frozen=True)
class Diagnostic:
  """A problem found in a scene, bound to the offending facet."""
  facet_index: int
  rule: str
  detail: str = ''

  def __str__(self):
    text = f'facet {self.facet_index}: {self.rule}'
    return f'{text} ({self.detail})' if self.detail else text


@dataclasses.dataclass(frozen=True)
class GridSpec:
  """Rectangular grid of candidate points, `rows` along y, `cols` along x."""
  origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)
  rows: int = 1
  cols: int = 1
  row_step: float = 1.0
  col_step: float = 1.0
  height: float = 0.0

  def __post_init__(self):
    if self.rows < 1 or self.cols < 1:
      raise ValueError('Grid must have at least one row and one column')
    if self.row_step <= 0 or self.col_step <= 0:
      raise ValueError('Grid steps must be positive')


@dataclasses.dataclass(frozen=True)
class ArcSpec:
  """Points on concentric half circles around `center`.

  Ring r has radius `radius + r * ring_step` and carries `points` points
  evenly spread from `start_angle` to `end_angle` (radians).
  """
  center: Tuple[float, float] = (0.0, 0.0)
  radius: float = 1.0
  ring_step: float = 1.0
  rings: int = 1
  points: int = 1
  height: float = 0.0
  start_angle: float = 0.0
  end_angle: float = math.pi

  def __post_init__(self):
    if self.rings < 1 or self.points < 1:
      raise ValueError('Arc must have at least one ring and one point')
    if self.radius <= 0 or self.ring_step <= 0:
      raise ValueError('Arc radius and ring step must be positive')


def generate_grid(spec):
  """Returns the grid points in row-major order as a (rows*cols, 3) array.

  The origin's z coordinate is ignored, every point sits at `spec.height`.

  :param spec: Grid description.
  :type spec: :class:`GridSpec`
  """
  rows = np.arange(spec.rows)
  cols = np.arange(spec.cols)
  rr, cc = np.meshgrid(rows, cols, indexing='ij')
  points = np.empty((spec.rows * spec.cols, 3))
  points[:, 0] = spec.origin[0] + cc.ravel() * spec.col_step
  points[:, 1] = spec.origin[1] + rr.ravel() * spec.row_step
  points[:, 2] = spec.height
  return points


def generate_arc(spec):
  """Returns the points of an :class:`ArcSpec`, ring by ring."""
  if spec.points == 1:
    angles = np.array([(spec.start_angle + spec.end_angle) / 2.0])
  else:
    angles = np.linspace(spec.start_angle, spec.end_angle, spec.points)
  points = []
  for ring in range(spec.rings):
    radius = spec.radius + ring * spec.ring_step
    for angle in angles:
      points.append((
          spec.center[0] + radius * math.cos(angle),
          spec.center[1] + radius * math.sin(angle),
          spec.height))
  return np.array(points)


def validate_scene(scene):
  """Checks every scene invariant and returns the list of violations.

  An empty list means the scene is valid.

  :param scene: Scene to check.
  :type scene: :class:`Scene`
  :returns: A list of :class:`Diagnostic`.
  """
  diagnostics = []
  bounds = scene.bounds
  for index, facet in enumerate(scene.facets):
    material = facet.material
    if material.relative_permittivity < 1:
      diagnostics.append(Diagnostic(
          index, 'invalid material',
          f'{material.name} relative permittivity below 1'))
    if material.conductivity < 0:
      diagnostics.append(Diagnostic(
          index, 'invalid material', f'{material.name} negative conductivity'))
    vertices = np.asarray(facet.vertices, dtype=float).reshape(-1, 3)
    if len(vertices) < 3 or facet.area <= 0:
      diagnostics.append(Diagnostic(
          index, 'degenerate polygon', f'{len(vertices)} vertices'))
      continue
    normal = newell_normal(vertices)
    normal = normal / np.linalg.norm(normal)
    distances = np.abs((vertices - vertices.mean(axis=0)) @ normal)
    if distances.max() > COPLANAR_TOLERANCE:
      diagnostics.append(Diagnostic(
          index, 'non-coplanar vertices',
          f'max deviation {distances.max():.3g} m'))
    if bounds is not None and not all(bounds.contains(v) for v in vertices):
      diagnostics.append(Diagnostic(index, 'out of bounds'))
  return diagnostics


def _parse_floats(tokens, line_no):
  try:
    return [float(t) for t in tokens]
  except ValueError as err:
    raise RanError('SceneParseError', f'line {line_no}: {err}')


def loads_scene(text):
  """Parses a scene from its text representation.

  The format is line based::

    scene v1
    # comments and blank lines are ignored
    bounds <xmin> <ymin> <zmin> <xmax> <ymax> <zmax>
    material <name> <eps_r> <sigma>
    facet <material> x1 y1 z1 x2 y2 z2 x3 y3 z3 ...

  The `wood` material is predefined. The `bounds` record is optional.

  :raises RanError: With code 'SceneParseError' when the text is malformed and
    'SceneInvariantError' when the parsed scene violates an invariant.
  """
  materials = {WOOD.name: WOOD}
  facets = []
  bounds = None
  header_seen = False
  for line_no, raw in enumerate(text.splitlines(), start=1):
    line = raw.split('#', 1)[0].strip()
    if not line:
      continue
    tokens = line.split()
    if not header_seen:
      if line != SCENE_HEADER:
        raise RanError(
            'SceneParseError',
            f'line {line_no}: expected header "{SCENE_HEADER}"')
      header_seen = True
      continue
    keyword = tokens[0]
    if keyword == 'material':
      if len(tokens) != 4:
        raise RanError(
            'SceneParseError',
            f'line {line_no}: material needs a name, eps_r and sigma')
      eps_r, sigma = _parse_floats(tokens[2:], line_no)
      materials[tokens[1]] = Material(tokens[1], eps_r, sigma)
    elif keyword == 'facet':
      if len(tokens) < 2 or tokens[1] not in materials:
        name = tokens[1] if len(tokens) > 1 else ''
        raise RanError(
            'SceneParseError', f'line {line_no}: unknown material "{name}"')
      coords = _parse_floats(tokens[2:], line_no)
      if len(coords) % 3:
        raise RanError(
            'SceneParseError',
            f'line {line_no}: vertex coordinates must come in triples')
      vertices = [tuple(coords[i:i + 3]) for i in range(0, len(coords), 3)]
      facets.append(Facet(vertices, materials[tokens[1]]))
    elif keyword == 'bounds':
      coords = _parse_floats(tokens[1:], line_no)
      if len(coords) != 6:
        raise RanError(
            'SceneParseError', f'line {line_no}: bounds needs 6 numbers')
      bounds = Bounds(tuple(coords[:3]), tuple(coords[3:]))
    else:
      raise RanError(
          'SceneParseError', f'line {line_no}: unknown record "{keyword}"')

  if not header_seen:
    raise RanError(
        'SceneParseError', f'line 1: expected header "{SCENE_HEADER}"')

  scene = Scene(facets, bounds)
  diagnostics = validate_scene(scene)
  if diagnostics:
    raise RanError.from_diagnostic('SceneInvariantError', diagnostics[0])
  logger.debug('Parsed scene with %d facets', len(facets))
  return scene


def load_scene(path):
  """Reads and validates a scene file.

  :param path: Path to a UTF-8 scene file.
  :returns: An instance of :class:`Scene`.
  """
  with open(path, 'r', encoding='utf-8') as f:
    return loads_scene(f.read())


def dumps_scene(scene):
  """Serializes a scene to text that :func:`loads_scene` reads back."""
  lines = [SCENE_HEADER]
  if scene.bounds is not None:
    lines.append('bounds ' + ' '.join(
        repr(float(c)) for c in scene.bounds.minimum + scene.bounds.maximum))
  for material in scene.materials.values():
    lines.append('material {} {!r} {!r}'.format(
        material.name, float(material.relative_permittivity),
        float(material.conductivity)))
  for facet in scene.facets:
    coords = ' '.join(repr(c) for v in facet.vertices for c in v)
    lines.append(f'facet {facet.material.name} {coords}')
  return '\n'.join(lines) + '\n'


def dump_scene(scene, path):
  """Writes a scene file."""
  with open(path, 'w', encoding='utf-8') as f:
    f.write(dumps_scene(scene))
