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

import cmath
import math
import random

import numpy as np
import pytest

from ranplan import CombineMode
from ranplan import Facet
from ranplan import Material
from ranplan import PathKind
from ranplan import Polarization
from ranplan import RanError
from ranplan import RayPath
from ranplan import SPEED_OF_LIGHT
from ranplan import Scene
from ranplan import TraceConfig
from ranplan import WOOD
from ranplan import build_channel_matrix
from ranplan import export_channel_csv
from ranplan import free_space_gain
from ranplan import knife_edge_loss
from ranplan import path_loss
from ranplan import reflection_coefficient
from ranplan import trace_paths


FREQUENCY = 3.75e9

GROUND = Facet([(-10, -10, 0), (10, -10, 0), (10, 10, 0), (-10, 10, 0)], WOOD)

WALL = Facet([(0, -1, 0), (0, 1, 0), (0, 1, 2), (0, -1, 2)], WOOD)

ROOM = Scene([
    Facet([(0, 0, 0), (10, 0, 0), (10, 8, 0), (0, 8, 0)], WOOD),
    Facet([(0, 0, 3), (10, 0, 3), (10, 8, 3), (0, 8, 3)], WOOD),
    Facet([(0, 0, 0), (0, 8, 0), (0, 8, 3), (0, 0, 3)], WOOD)])


def los(length):
  return RayPath(PathKind.LOS, (), length, free_space_gain(length, FREQUENCY))


def test_free_space_single_path():
  paths = trace_paths(Scene(), (0, 0, 0), (3, 4, 0), TraceConfig())
  assert len(paths) == 1
  assert paths[0].kind is PathKind.LOS
  assert paths[0].interaction_points == ()
  assert paths[0].length == pytest.approx(5.0)


def test_friis_at_one_meter():
  paths = trace_paths(Scene(), (0, 0, 1), (1, 0, 1), TraceConfig())
  assert path_loss(paths, TraceConfig()) == pytest.approx(43.92, abs=0.01)


def test_friis_magnitude():
  rng = random.Random(1)
  for _ in range(200):
    d = rng.uniform(0.5, 100)
    expected = SPEED_OF_LIGHT / (4 * math.pi * d * FREQUENCY)
    assert abs(free_space_gain(d, FREQUENCY)) == pytest.approx(
        expected, rel=1e-9)


def test_path_loss_combination():
  coherent = TraceConfig()
  power = TraceConfig(combine_mode='power_sum')
  assert power.combine_mode is CombineMode.POWER_SUM

  single = path_loss([los(2.0)], coherent)
  assert single - path_loss([los(2.0), los(2.0)], coherent) == pytest.approx(
      20 * math.log10(2))
  assert single - path_loss([los(2.0), los(2.0)], power) == pytest.approx(
      10 * math.log10(2))
  assert path_loss([los(2.0)], power) == pytest.approx(single)

  assert path_loss([], coherent) == math.inf
  assert path_loss([], power) == math.inf


def test_single_mirror():
  cfg = TraceConfig(max_reflections=1, max_diffraction_order=0)
  tx, rx = (0.0, 0.0, 2.0), (4.0, 0.0, 1.0)
  paths = trace_paths(Scene([GROUND]), tx, rx, cfg)
  assert [p.kind for p in paths] == [PathKind.LOS, PathKind.REFLECTED]

  reflected = paths[1]
  image = np.array([0.0, 0.0, -2.0])
  assert reflected.length == pytest.approx(
      float(np.linalg.norm(image - np.array(rx))))
  assert reflected.length == pytest.approx(5.0)
  assert reflected.order == 1
  assert reflected.facets == (0,)
  assert reflected.interaction_points[0] == pytest.approx((8 / 3, 0.0, 0.0))
  assert abs(reflected.complex_gain) < abs(
      free_space_gain(reflected.length, FREQUENCY))


def test_single_mirror_brute_force():
  tx, rx = np.array([0.0, 0.0, 2.0]), np.array([4.0, 0.0, 1.0])
  cfg = TraceConfig(max_reflections=1, max_diffraction_order=0)
  reflected = trace_paths(Scene([GROUND]), tx, rx, cfg)[1]

  xs = np.linspace(-10, 10, 801)
  xx, yy = np.meshgrid(xs, xs)
  samples = np.stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)], axis=1)
  lengths = (np.linalg.norm(samples - tx, axis=1) +
             np.linalg.norm(samples - rx, axis=1))
  best = samples[np.argmin(lengths)]
  assert lengths.min() == pytest.approx(reflected.length, abs=1e-3)
  assert np.allclose(best, reflected.interaction_points[0], atol=0.05)


def test_specular_point_outside_facet():
  small = Facet([(20, -1, 0), (22, -1, 0), (22, 1, 0), (20, 1, 0)], WOOD)
  cfg = TraceConfig(max_reflections=1, max_diffraction_order=0)
  paths = trace_paths(Scene([small]), (0, 0, 2), (4, 0, 1), cfg)
  assert [p.kind for p in paths] == [PathKind.LOS]


def test_full_occlusion():
  cfg = TraceConfig(max_reflections=0, max_diffraction_order=0)
  paths = trace_paths(Scene([WALL]), (-1, 0, 1), (1, 0, 1), cfg)
  assert paths == []
  assert path_loss(paths, cfg) == math.inf


def test_diffraction_over_blocking_wall():
  cfg = TraceConfig(max_reflections=0, max_diffraction_order=1)
  tx, rx = (-1.0, 0.0, 1.0), (1.0, 0.0, 1.0)
  paths = trace_paths(Scene([WALL]), tx, rx, cfg)
  assert len(paths) == 4
  for path in paths:
    assert path.kind is PathKind.DIFFRACTED
    assert len(path.interaction_points) == 1
    assert path.length > 2.0
    assert abs(path.complex_gain) < abs(free_space_gain(path.length, FREQUENCY))
  top = [p for p in paths if p.interaction_points[0][2] == pytest.approx(2.0)]
  assert len(top) == 1
  assert top[0].interaction_points[0] == pytest.approx((0.0, 0.0, 2.0))
  assert top[0].length == pytest.approx(2 * math.sqrt(2))
  assert math.isfinite(path_loss(paths, cfg))


def box(x0, x1, y0, y1, z0, z1):
  corners = {
      'front': [(x0, y0, z0), (x0, y1, z0), (x0, y1, z1), (x0, y0, z1)],
      'back': [(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)],
      'left': [(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)],
      'right': [(x0, y1, z0), (x1, y1, z0), (x1, y1, z1), (x0, y1, z1)],
      'bottom': [(x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0)],
      'top': [(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)],
  }
  return [Facet(v, WOOD) for v in corners.values()]


def test_diffraction_around_closed_box():
  cfg = TraceConfig(max_reflections=0, max_diffraction_order=1)
  cabinet = Scene(box(-0.3, 0.3, -1.0, 1.0, 0.0, 1.2))
  tx, rx = (-3.0, 0.0, 1.0), (0.5, 1.2, 1.0)
  paths = trace_paths(cabinet, tx, rx, cfg)
  assert [p.kind for p in paths] == [PathKind.DIFFRACTED]
  # The vertical edge where the front and right faces meet.
  assert paths[0].interaction_points[0] == pytest.approx((-0.3, 1.0, 1.0))
  assert paths[0].facets == (0, 3)
  assert path_loss(paths, cfg) > path_loss(
      [los(paths[0].length)], cfg)


def test_no_diffraction_at_concave_corner():
  cfg = TraceConfig(max_reflections=0, max_diffraction_order=1)
  floor = Facet([(0, -5, 0), (5, -5, 0), (5, 5, 0), (0, 5, 0)], WOOD)
  wall = Facet([(0, -5, 0), (0, 5, 0), (0, 5, 3), (0, -5, 3)], WOOD)
  screen = Facet(
      [(0.5, 0, 0.5), (1.5, 0, 0.5), (1.5, 0, 1.5), (0.5, 0, 1.5)], WOOD)
  paths = trace_paths(
      Scene([floor, wall, screen]), (1, -2, 1), (1, 2, 1), cfg)
  assert paths
  # The floor/wall corner at the origin is in plain view of both points but
  # both sit inside it.
  assert all(len(p.facets) == 1 for p in paths)
  assert (2,) in {p.facets for p in paths}


def test_path_loss_never_negative():
  cfg = TraceConfig()
  wavelength = SPEED_OF_LIGHT / FREQUENCY
  near = los(wavelength / (8 * math.pi))
  assert abs(near.complex_gain) > 1.0
  assert path_loss([near], cfg) == 0.0
  assert path_loss([near], TraceConfig(combine_mode='power_sum')) == 0.0


def test_knife_edge_loss():
  assert knife_edge_loss(-1.0) == 0.0
  assert knife_edge_loss(0.0) == pytest.approx(6.03, abs=0.01)
  assert knife_edge_loss(2.0) > knife_edge_loss(1.0) > knife_edge_loss(0.0)


def test_reflection_coefficient():
  vacuum = Material('vacuum', 1.0, 0.0)
  for angle in (0.0, 0.3, 1.0, 1.5):
    for pol in Polarization:
      assert abs(reflection_coefficient(vacuum, angle, pol, FREQUENCY)) < 1e-12

  for pol in ('TE', 'TM'):
    grazing = reflection_coefficient(WOOD, math.pi / 2 - 1e-6, pol, FREQUENCY)
    assert abs(grazing) == pytest.approx(1.0, abs=1e-4)

  rng = random.Random(3)
  for _ in range(100):
    material = Material('m', rng.uniform(1, 80), rng.uniform(0, 5))
    angle = rng.uniform(0, math.pi / 2 - 1e-9)
    for pol in Polarization:
      gamma = reflection_coefficient(material, angle, pol, FREQUENCY)
      assert abs(gamma) <= 1.0 + 1e-12

  with pytest.raises(ValueError, match=r"incidence angle"):
    reflection_coefficient(WOOD, math.pi / 2, 'TE', FREQUENCY)


def test_reflection_coefficient_wood_normal_incidence():
  eps = complex(1.99, -0.012 / (2 * math.pi * FREQUENCY * 8.8541878128e-12))
  expected = (1 - cmath.sqrt(eps)) / (1 + cmath.sqrt(eps))
  te = reflection_coefficient(WOOD, 0.0, 'TE', FREQUENCY)
  tm = reflection_coefficient(WOOD, 0.0, 'TM', FREQUENCY)
  assert te == pytest.approx(expected, abs=1e-12)
  assert abs(te) == pytest.approx(abs(tm), abs=1e-12)
  assert abs(te) == pytest.approx(0.1704, abs=1e-3)


def test_room_paths():
  tx, rx = np.array([2.0, 3.0, 2.2]), np.array([7.0, 5.0, 0.8])
  cfg = TraceConfig()
  paths = trace_paths(ROOM, tx, rx, cfg)
  direct = float(np.linalg.norm(rx - tx))

  assert paths[0].kind is PathKind.LOS
  assert paths == sorted(paths, key=RayPath.sort_key)
  orders = {p.order for p in paths if p.kind is PathKind.REFLECTED}
  assert orders == {1, 2, 3}
  for path in paths:
    assert path.length >= direct - 1e-9
    assert abs(path.complex_gain) <= abs(
        free_space_gain(path.length, FREQUENCY)) + 1e-15
    if path.kind is PathKind.REFLECTED:
      assert len(path.interaction_points) == path.order
      assert len(path.facets) == path.order
  # No diffraction while the direct path is open.
  assert all(p.kind is not PathKind.DIFFRACTED for p in paths)


def test_reciprocity():
  rng = random.Random(11)
  cfg = TraceConfig()
  for _ in range(5):
    a = (rng.uniform(0.5, 9.5), rng.uniform(0.5, 7.5), rng.uniform(0.5, 2.5))
    b = (rng.uniform(0.5, 9.5), rng.uniform(0.5, 7.5), rng.uniform(0.5, 2.5))
    forward = trace_paths(ROOM, a, b, cfg)
    backward = trace_paths(ROOM, b, a, cfg)
    assert len(forward) == len(backward)
    assert path_loss(forward, cfg) == pytest.approx(
        path_loss(backward, cfg), abs=1e-9)


def test_adding_facet_only_blocks():
  rng = random.Random(5)
  cfg = TraceConfig(max_reflections=2, max_diffraction_order=0)
  for _ in range(10):
    facets = [GROUND]
    for _ in range(2):
      x, y = rng.uniform(-5, 5), rng.uniform(-5, 5)
      facets.append(Facet(
          [(x, y, 0), (x + 1, y + 0.5, 0), (x + 1, y + 0.5, 3), (x, y, 3)],
          WOOD))
    extra = Facet([(-2, 4, 0), (2, 4, 0), (2, 4, 3), (-2, 4, 3)], WOOD)
    tx = (rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(0.5, 2.5))
    rx = (rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(0.5, 2.5))
    before = trace_paths(Scene(facets), tx, rx, cfg)
    after = trace_paths(Scene(facets + [extra]), tx, rx, cfg)
    new_index = len(facets)

    def los_count(paths):
      return sum(p.kind is PathKind.LOS for p in paths)

    assert los_count(after) <= los_count(before)
    old = {p.facets for p in before if p.kind is PathKind.REFLECTED}
    kept = {p.facets for p in after
            if p.kind is PathKind.REFLECTED and new_index not in p.facets}
    assert kept <= old


def test_trace_errors():
  scene = Scene([GROUND])
  with pytest.raises(RanError, match=r"distinct points") as err:
    trace_paths(scene, (1, 1, 1), (1, 1, 1), TraceConfig())
  assert err.value.code == 'GeometryError'

  with pytest.raises(RanError, match=r"transmitter lies on facet 0") as err:
    trace_paths(scene, (1, 1, 0), (2, 2, 1), TraceConfig())
  assert err.value.code == 'GeometryError'

  with pytest.raises(ValueError, match=r"max_reflections"):
    TraceConfig(max_reflections=4)
  with pytest.raises(ValueError, match=r"max_diffraction_order"):
    TraceConfig(max_diffraction_order=2)


def test_channel_matrix():
  cfg = TraceConfig()
  channel = build_channel_matrix(Scene(), [(0, 0, 1)], [(1, 0, 1)], cfg)
  assert channel.shape == (1, 1)
  assert channel.path_loss_db[0, 0] == pytest.approx(43.92, abs=0.01)
  assert channel[0, 0].tx_index == 0 and channel[0, 0].rx_index == 0

  tx = [(x, y, 2.2) for y in (0, 4) for x in range(12)]
  rx = [(x + 0.5, y, 0.8) for y in (0, 1.5, 3, 4.5) for x in range(13)]
  channel = build_channel_matrix(Scene(), tx, rx, cfg)
  assert channel.shape == (24, 52)
  assert np.isfinite(channel.path_loss_db).all()
  frame = channel.to_dataframe()
  assert len(frame) == 1248
  assert list(frame.columns) == ['tx_index', 'rx_index', 'path_loss_db',
                                 'n_paths']


def test_channel_matrix_deterministic():
  cfg = TraceConfig()
  tx = [(2.0, 2.0, 2.2), (8.0, 6.0, 2.2)]
  rx = [(1.0, 6.0, 0.8), (5.0, 4.0, 0.8), (9.0, 1.0, 0.8)]
  first = build_channel_matrix(ROOM, tx, rx, cfg)
  second = build_channel_matrix(ROOM, tx, rx, cfg)
  parallel = build_channel_matrix(ROOM, tx, rx, cfg, workers=2)
  assert np.array_equal(first.path_loss_db, second.path_loss_db)
  assert np.array_equal(first.path_loss_db, parallel.path_loss_db)
  assert first.entries == parallel.entries


def test_channel_matrix_errors():
  with pytest.raises(RanError, match=r"pair \(0, 1\): receiver lies on facet 0"):
    build_channel_matrix(
        Scene([GROUND]), [(1, 1, 1)], [(2, 2, 1), (3, 3, 0)], TraceConfig())
  with pytest.raises(RanError, match=r"pair \(1, 0\): transmitter lies on") as err:
    build_channel_matrix(
        Scene([GROUND]), [(1, 1, 1), (2, 2, 0)], [(3, 3, 1)], TraceConfig(),
        workers=2)
  assert err.value.code == 'ChannelError'
  with pytest.raises(RanError, match=r"pair \(0, 0\): transmitter and receiver"):
    build_channel_matrix(Scene(), [(0, 0, 1)], [(0, 0, 1)], TraceConfig())
  with pytest.raises(ValueError, match=r"must not be empty"):
    build_channel_matrix(Scene(), [], [(0, 0, 0)], TraceConfig())


def test_export_channel_csv(tmpdir):
  cfg = TraceConfig(max_reflections=0, max_diffraction_order=0)
  channel = build_channel_matrix(
      Scene([WALL]), [(-1, 0, 1)], [(1, 0, 1), (-2, 0, 1)], cfg)
  path = str(tmpdir.join('channel.csv'))
  export_channel_csv(channel, path)
  lines = open(path).read().splitlines()
  assert lines[0] == 'tx_index,rx_index,path_loss_db,n_paths'
  assert lines[1] == '0,0,inf,0'
  assert lines[2].startswith('0,1,') and lines[2].endswith(',1')
