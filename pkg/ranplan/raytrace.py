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

"""Deterministic ray tracing over planar scenes.

Reflections are found with the image method, up to third order, and single
knife-edge diffraction is computed over free facet edges and convex wedges.
Each path's complex gain is the free-space (Friis) amplitude at the unfolded
length times the Fresnel coefficients of its bounces and the knife-edge
attenuation of its diffraction.
"""

import concurrent.futures
import dataclasses
import enum
import itertools
import logging
import math
from typing import Tuple

import numpy as np
import pandas as pd

from .error import RanError
from .geometry import EPSILON
from .geometry import reflect_point


__all__ = [
    'ChannelEntry',
    'ChannelMatrix',
    'CombineMode',
    'PathKind',
    'Polarization',
    'RayPath',
    'RayTracer',
    'SPEED_OF_LIGHT',
    'TraceConfig',
    'build_channel_matrix',
    'export_channel_csv',
    'free_space_gain',
    'knife_edge_loss',
    'path_loss',
    'reflection_coefficient',
    'trace_paths']


logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299792458.0
VACUUM_PERMITTIVITY = 8.8541878128e-12

MAX_SUPPORTED_REFLECTIONS = 3
MAX_SUPPORTED_DIFFRACTION_ORDER = 1


class PathKind(enum.Enum):
  """Propagation mechanisms, in the order paths are reported."""
  LOS = 'LoS'
  REFLECTED = 'Reflected'
  DIFFRACTED = 'Diffracted'


_KIND_RANK = {PathKind.LOS: 0, PathKind.REFLECTED: 1, PathKind.DIFFRACTED: 2}


class Polarization(enum.Enum):
  TE = 'TE'
  TM = 'TM'


class CombineMode(enum.Enum):
  """How the gains of several paths add up into one path loss."""
  COHERENT = 'coherent'
  POWER_SUM = 'power_sum'


@dataclasses.dataclass(frozen=True)
class RayPath:
  """One propagation path between a transmitter and a receiver.

  `order` is 0 for line of sight, k for a k-th order reflection and 1 for a
  diffraction. `facets` lists the facet indices the path interacts with.
  """
  kind: PathKind
  interaction_points: Tuple[Tuple[float, float, float], ...]
  length: float
  complex_gain: complex
  order: int = 0
  facets: Tuple[int, ...] = ()

  def sort_key(self):
    return (_KIND_RANK[self.kind], self.order, self.length, self.facets)


@dataclasses.dataclass(frozen=True)
class TraceConfig:
  """Ray tracing parameters.

  :param max_reflections: Highest reflection order searched (0 to 3).
  :param max_diffraction_order: 0 disables diffraction, 1 enables it.
  :param carrier_frequency: Carrier frequency in Hz.
  :param combine_mode: A :class:`CombineMode` or its string value.
  :param polarization: Fresnel branch used at every bounce.
  """
  max_reflections: int = 3
  max_diffraction_order: int = 1
  carrier_frequency: float = 3.75e9
  combine_mode: CombineMode = CombineMode.COHERENT
  polarization: Polarization = Polarization.TE

  def __post_init__(self):
    object.__setattr__(self, 'combine_mode', CombineMode(self.combine_mode))
    object.__setattr__(self, 'polarization', Polarization(self.polarization))
    if not 0 <= self.max_reflections <= MAX_SUPPORTED_REFLECTIONS:
      raise ValueError(
          f'max_reflections must be between 0 and {MAX_SUPPORTED_REFLECTIONS}')
    if not 0 <= self.max_diffraction_order <= MAX_SUPPORTED_DIFFRACTION_ORDER:
      raise ValueError('max_diffraction_order must be 0 or 1')
    if not self.carrier_frequency > 0:
      raise ValueError('carrier_frequency must be positive')

  @property
  def wavelength(self):
    return SPEED_OF_LIGHT / self.carrier_frequency


@dataclasses.dataclass(frozen=True)
class ChannelEntry:
  """Paths and path loss between transmitter `tx_index` and receiver
  `rx_index`. The path loss is +inf when no path exists."""
  paths: Tuple[RayPath, ...]
  path_loss: float
  tx_index: int
  rx_index: int


@dataclasses.dataclass(frozen=True)
class ChannelMatrix:
  """Dense transmitters × receivers grid of :class:`ChannelEntry`."""
  entries: Tuple[Tuple[ChannelEntry, ...], ...]
  config: TraceConfig

  @property
  def shape(self):
    if not self.entries:
      return (0, 0)
    return (len(self.entries), len(self.entries[0]))

  def __getitem__(self, index):
    i, j = index
    return self.entries[i][j]

  @property
  def path_loss_db(self):
    """Path losses as an array of shape :attr:`shape`."""
    return np.array([[e.path_loss for e in row] for row in self.entries],
                    dtype=float).reshape(self.shape)

  def to_dataframe(self):
    rows = [(e.tx_index, e.rx_index, e.path_loss, len(e.paths))
            for row in self.entries for e in row]
    return pd.DataFrame(
        rows, columns=['tx_index', 'rx_index', 'path_loss_db', 'n_paths'])


def free_space_gain(length, frequency):
  """Complex free-space amplitude c/(4πdf)·exp(-j2πd/λ) at distance d."""
  wavelength = SPEED_OF_LIGHT / frequency
  phase = -2.0 * math.pi * length / wavelength
  return (wavelength / (4.0 * math.pi * length)) * complex(
      math.cos(phase), math.sin(phase))


def reflection_coefficient(material, incidence_angle, polarization, frequency):
  """Fresnel reflection coefficient off a lossy dielectric half-space.

  :param material: Reflecting :class:`ranplan.Material`.
  :param incidence_angle: Angle from the surface normal, in [0, π/2).
  :param polarization: :class:`Polarization` or 'TE'/'TM'.
  :param frequency: Frequency in Hz.
  :returns: Complex coefficient with magnitude at most 1.
  """
  if not 0 <= incidence_angle < math.pi / 2:
    raise ValueError('incidence angle must be in [0, pi/2)')
  polarization = Polarization(polarization)
  eps = complex(
      material.relative_permittivity,
      -material.conductivity / (2.0 * math.pi * frequency * VACUUM_PERMITTIVITY))
  cos_i = math.cos(incidence_angle)
  root = np.sqrt(eps - math.sin(incidence_angle) ** 2)
  if polarization is Polarization.TE:
    return complex((cos_i - root) / (cos_i + root))
  return complex((eps * cos_i - root) / (eps * cos_i + root))


def knife_edge_loss(v):
  """Single knife-edge diffraction loss in dB for Fresnel parameter v."""
  if v <= -0.78:
    return 0.0
  loss = 6.9 + 20.0 * math.log10(math.sqrt((v - 0.1) ** 2 + 1.0) + v - 0.1)
  return max(loss, 0.0)


def path_loss(paths, cfg):
  """Combines path gains into a path loss in dB.

  Coherent mode sums complex amplitudes, power mode sums squared magnitudes.
  An empty path list yields +inf, standing for total blockage. The loss is
  never negative, which bounds the Friis gain of points closer than λ/4π.

  :type paths: list of :class:`RayPath`
  :type cfg: :class:`TraceConfig`
  """
  if not paths:
    return math.inf
  if cfg.combine_mode is CombineMode.COHERENT:
    amplitude = abs(sum(p.complex_gain for p in paths))
    if amplitude == 0:
      return math.inf
    return max(-20.0 * math.log10(amplitude), 0.0)
  power = sum(abs(p.complex_gain) ** 2 for p in paths)
  if power == 0:
    return math.inf
  return max(-10.0 * math.log10(power), 0.0)


def _reflection_sequences(n_facets, max_order):
  """Facet index sequences without immediate repeats, shortest first."""
  for order in range(1, max_order + 1):
    for seq in itertools.product(range(n_facets), repeat=order):
      if all(a != b for a, b in zip(seq, seq[1:])):
        yield seq


class RayTracer:
  """Traces paths through one scene with one configuration.

  The mirror images of a transmitter depend only on the transmitter, so they
  are computed once per transmitter and reused for every receiver.

  :param scene: A validated :class:`ranplan.Scene`.
  :param cfg: A :class:`TraceConfig`.
  """

  def __init__(self, scene, cfg):
    self._scene = scene
    self._cfg = cfg
    self._polys = scene.polygons
    self._sequences = list(_reflection_sequences(
        len(scene.facets), cfg.max_reflections))
    self._edges = (
        self._diffraction_edges() if cfg.max_diffraction_order else [])
    self._centroids = [self._polys.polygon(i).mean(axis=0)
                       for i in range(len(self._polys))]
    self._image_cache = {}

  def _diffraction_edges(self):
    """Diffracting edges as (start, end, owning facet indices).

    A free edge belongs to one facet. An edge where two facets meet at an
    angle is a wedge; whether it diffracts depends on the endpoints, see
    :meth:`_inside_wedge`. Edges shared by coplanar facets or by more than
    two facets are left out.
    """
    owners = {}
    for index, facet in enumerate(self._scene.facets):
      vertices = facet.vertices
      for a, b in zip(vertices, vertices[1:] + vertices[:1]):
        key = tuple(sorted((tuple(round(c, 9) for c in a),
                            tuple(round(c, 9) for c in b))))
        owners.setdefault(key, []).append((np.array(a), np.array(b), index))
    edges = []
    for owned in owners.values():
      if len(owned) == 1:
        start, end, index = owned[0]
        edges.append((start, end, (index,)))
      elif len(owned) == 2:
        first, second = owned[0][2], owned[1][2]
        normals = self._polys.normals
        if np.linalg.norm(np.cross(normals[first], normals[second])) < EPSILON:
          continue
        edges.append((owned[0][0], owned[0][1], (first, second)))
    return edges

  def _inside_wedge(self, owners, point):
    """Tells whether `point` lies in the region enclosed by a wedge's two
    facets, on the side of each plane where the other facet sits. Such an
    edge is a concave corner for that point."""
    if len(owners) != 2:
      return False
    first, second = owners
    polys = self._polys
    return (
        polys.plane_distance(first, point) *
        polys.plane_distance(first, self._centroids[second]) > 0 and
        polys.plane_distance(second, point) *
        polys.plane_distance(second, self._centroids[first]) > 0)

  def _check_endpoint(self, point, name):
    for index in range(len(self._polys)):
      if self._polys.on_polygon(index, point):
        raise RanError(
            'GeometryError', f'{name} lies on facet {index}')

  def _images(self, tx):
    key = tuple(tx)
    images = self._image_cache.get(key)
    if images is None:
      images = {(): tx}
      for seq in self._sequences:
        parent = images.get(seq[:-1])
        if parent is None:
          continue
        facet = seq[-1]
        # An image lying on the next mirror has no usable reflection.
        if abs(self._polys.plane_distance(facet, parent)) < EPSILON:
          continue
        images[seq] = reflect_point(
            parent, self._polys.normals[facet], self._polys.offsets[facet])
      self._image_cache[key] = images
    return images

  def _reflected_path(self, tx, rx, seq, images):
    polys = self._polys
    points = [None] * len(seq)
    target = rx
    for level in reversed(range(len(seq))):
      image = images.get(seq[:level + 1])
      if image is None:
        return None
      facet = seq[level]
      hit = polys.segment_plane_intersection(facet, target, image)
      if hit is None or not polys.contains(facet, hit):
        return None
      points[level] = hit
      target = hit

    chain = [tx] + points + [rx]
    owners = [()] + [(f,) for f in seq] + [()]
    for k in range(len(chain) - 1):
      if polys.blocks(chain[k], chain[k + 1], owners[k] + owners[k + 1]):
        return None

    length = sum(float(np.linalg.norm(chain[k + 1] - chain[k]))
                 for k in range(len(chain) - 1))
    gain = free_space_gain(length, self._cfg.carrier_frequency)
    for k, facet in enumerate(seq):
      incoming = chain[k + 1] - chain[k]
      cos_i = abs(float(np.dot(incoming, polys.normals[facet])))
      cos_i /= float(np.linalg.norm(incoming))
      angle = math.acos(min(1.0, cos_i))
      gain *= reflection_coefficient(
          self._scene.facets[facet].material, min(angle, math.pi / 2 - 1e-12),
          self._cfg.polarization, self._cfg.carrier_frequency)
    return RayPath(
        PathKind.REFLECTED, tuple(tuple(float(c) for c in p) for p in points),
        length, gain, order=len(seq), facets=tuple(seq))

  def _diffracted_path(self, tx, rx, edge):
    start, end, owners = edge
    if self._inside_wedge(owners, tx) or self._inside_wedge(owners, rx):
      return None
    axis = end - start
    edge_length = float(np.linalg.norm(axis))
    if edge_length < EPSILON:
      return None
    axis = axis / edge_length
    a1 = float(np.dot(tx - start, axis))
    a2 = float(np.dot(rx - start, axis))
    r1 = float(np.linalg.norm(tx - start - a1 * axis))
    r2 = float(np.linalg.norm(rx - start - a2 * axis))
    if r1 + r2 < EPSILON:
      return None
    # Unfolding both points into one plane makes the least-length point on
    # the edge split it in proportion to their distances from the edge.
    s = a1 + (a2 - a1) * r1 / (r1 + r2)
    if s <= EPSILON or s >= edge_length - EPSILON:
      return None
    point = start + s * axis
    polys = self._polys
    if polys.blocks(tx, point, owners) or polys.blocks(point, rx, owners):
      return None

    d1 = float(np.linalg.norm(point - tx))
    d2 = float(np.linalg.norm(rx - point))
    direct = rx - tx
    clearance = float(np.linalg.norm(np.cross(point - tx, direct)))
    clearance /= float(np.linalg.norm(direct))
    # Positive when an owning facet cuts the direct line.
    if not any(self._segment_crosses(i, tx, rx) for i in owners):
      clearance = -clearance
    wavelength = self._cfg.wavelength
    v = clearance * math.sqrt(2.0 * (d1 + d2) / (wavelength * d1 * d2))
    attenuation = 10.0 ** (-knife_edge_loss(v) / 20.0)
    gain = free_space_gain(d1 + d2, self._cfg.carrier_frequency) * attenuation
    return RayPath(
        PathKind.DIFFRACTED, (tuple(float(c) for c in point),), d1 + d2,
        gain, order=1, facets=owners)

  def _segment_crosses(self, index, a, b):
    hit = self._polys.segment_plane_intersection(index, a, b)
    return hit is not None and self._polys.contains(index, hit)

  def trace(self, tx, rx):
    """Returns every path between `tx` and `rx`, see :func:`trace_paths`."""
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if np.allclose(tx, rx, rtol=0.0, atol=EPSILON):
      raise RanError(
          'GeometryError', 'transmitter and receiver must be distinct points')
    self._check_endpoint(tx, 'transmitter')
    self._check_endpoint(rx, 'receiver')

    paths = []
    frequency = self._cfg.carrier_frequency
    los_blocked = self._polys.blocks(tx, rx)
    if not los_blocked:
      distance = float(np.linalg.norm(rx - tx))
      paths.append(RayPath(
          PathKind.LOS, (), distance, free_space_gain(distance, frequency)))

    if self._sequences:
      images = self._images(tx)
      for seq in self._sequences:
        path = self._reflected_path(tx, rx, seq, images)
        if path is not None:
          paths.append(path)

    if los_blocked:
      for edge in self._edges:
        path = self._diffracted_path(tx, rx, edge)
        if path is not None:
          paths.append(path)

    paths.sort(key=RayPath.sort_key)
    return paths


def trace_paths(scene, tx, rx, cfg):
  """Enumerates the propagation paths between two points.

  Line of sight is reported when the direct segment crosses no facet. Image
  method reflections up to `cfg.max_reflections` are reported when every
  segment of the unfolded chain is unobstructed and every specular point
  falls inside its facet. When the direct path is blocked and diffraction is
  enabled, one knife-edge path is added per diffracting edge whose
  least-length point lies on the edge: free facet edges, and edges where two
  facets meet unless an endpoint sits inside the corner they enclose.
  Paths come sorted by kind, order and length.

  :param scene: A :class:`ranplan.Scene`.
  :param tx: Transmitter position (m).
  :param rx: Receiver position (m).
  :param cfg: A :class:`TraceConfig`.
  :returns: A list of :class:`RayPath`.
  :raises RanError: 'GeometryError' when an endpoint lies on a facet or
    both endpoints coincide.
  """
  return RayTracer(scene, cfg).trace(tx, rx)


def _trace_row(args):
  scene, tx_index, tx, rx_points, cfg = args
  tracer = RayTracer(scene, cfg)
  row = []
  for rx_index, rx in enumerate(rx_points):
    try:
      paths = tracer.trace(tx, rx)
    except RanError as err:
      raise RanError(
          'ChannelError', f'pair ({tx_index}, {rx_index}): {err.message}')
    row.append(ChannelEntry(
        tuple(paths), path_loss(paths, cfg), tx_index, rx_index))
  return tuple(row)


def build_channel_matrix(scene, tx_points, rx_points, cfg, workers=None):
  """Traces every transmitter/receiver pair into a :class:`ChannelMatrix`.

  :param scene: A :class:`ranplan.Scene`.
  :param tx_points: Sequence of transmitter positions (RU candidates).
  :param rx_points: Sequence of receiver positions (UE test points).
  :param cfg: A :class:`TraceConfig`.
  :param workers: When greater than 1, rows are traced in that many worker
    processes. The result does not depend on this value.
  :raises RanError: 'ChannelError' naming the failing pair.
  """
  tx_points = [np.asarray(p, dtype=float) for p in tx_points]
  rx_points = [np.asarray(p, dtype=float) for p in rx_points]
  if not tx_points or not rx_points:
    raise ValueError('point lists must not be empty')
  jobs = [(scene, i, tx, rx_points, cfg) for i, tx in enumerate(tx_points)]
  logger.info('Tracing %d x %d pairs over %d facets',
              len(tx_points), len(rx_points), len(scene.facets))
  if workers and workers > 1:
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
      rows = tuple(pool.map(_trace_row, jobs))
  else:
    rows = tuple(_trace_row(job) for job in jobs)
  return ChannelMatrix(rows, cfg)


def export_channel_csv(channel, path):
  """Writes one CSV row per pair: tx_index, rx_index, path_loss_db, n_paths.

  Blocked pairs are written with the literal `inf`.
  """
  try:
    channel.to_dataframe().to_csv(path, index=False)
  except OSError as err:
    raise RanError('IOError', f'{path}: {err}')
