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

"""Planar geometry helpers shared by the scene and the ray tracer."""

import numpy as np


__all__ = [
    'PolygonSet',
    'newell_normal',
    'point_in_polygon',
    'reflect_point']


# Tolerance used when deciding whether a point lies on a plane or whether a
# segment parameter is strictly inside (0, 1).
EPSILON = 1e-9


def newell_normal(vertices):
  """Returns the (non-normalized) Newell normal of a polygon.

  Its norm is twice the polygon's area, which makes it handy both for the
  plane orientation and for detecting degenerate polygons.
  """
  v = np.asarray(vertices, dtype=float)
  nxt = np.roll(v, -1, axis=0)
  return np.array([
      np.sum((v[:, 1] - nxt[:, 1]) * (v[:, 2] + nxt[:, 2])),
      np.sum((v[:, 2] - nxt[:, 2]) * (v[:, 0] + nxt[:, 0])),
      np.sum((v[:, 0] - nxt[:, 0]) * (v[:, 1] + nxt[:, 1]))])


def reflect_point(point, normal, offset):
  """Mirrors a point across the plane normal·x = offset (normal is unit)."""
  point = np.asarray(point, dtype=float)
  return point - 2.0 * (np.dot(normal, point) - offset) * normal


def point_in_polygon(point, polygon):
  """Even-odd crossing test for a 2D point against a 2D polygon."""
  x, y = point
  px = polygon[:, 0]
  py = polygon[:, 1]
  qx = np.roll(px, -1)
  qy = np.roll(py, -1)
  straddles = (py > y) != (qy > y)
  with np.errstate(divide='ignore', invalid='ignore'):
    x_cross = px + (y - py) * (qx - px) / (qy - py)
  return bool(np.count_nonzero(straddles & (x < x_cross)) % 2)


class PolygonSet:
  """Precomputed planes and 2D projections for a list of planar polygons.

  The ray tracer asks two questions over and over: where does a segment
  cross a given polygon's plane, and does a segment cross any polygon at all.
  Both are answered here with the plane equations stacked in numpy arrays.
  """

  def __init__(self, polygons):
    self._polygons = [np.asarray(p, dtype=float) for p in polygons]
    n = len(self._polygons)
    self.normals = np.zeros((n, 3))
    self.offsets = np.zeros(n)
    self._axes = []
    self._projected = []
    for i, poly in enumerate(self._polygons):
      normal = newell_normal(poly)
      norm = np.linalg.norm(normal)
      if norm > 0:
        normal = normal / norm
      self.normals[i] = normal
      self.offsets[i] = float(np.dot(normal, poly.mean(axis=0)))
      # Drop the coordinate most aligned with the normal.
      drop = int(np.argmax(np.abs(normal)))
      axes = [a for a in range(3) if a != drop]
      self._axes.append(axes)
      self._projected.append(poly[:, axes])

  def __len__(self):
    return len(self._polygons)

  def polygon(self, index):
    return self._polygons[index]

  def contains(self, index, point):
    """Tells whether a point on polygon `index`'s plane lies inside it."""
    point = np.asarray(point, dtype=float)
    return point_in_polygon(point[self._axes[index]], self._projected[index])

  def plane_distance(self, index, point):
    return float(np.dot(self.normals[index], point) - self.offsets[index])

  def on_polygon(self, index, point, tol=EPSILON):
    """Tells whether a point lies on polygon `index` (plane and interior)."""
    return (abs(self.plane_distance(index, point)) <= tol and
            self.contains(index, point))

  def segment_plane_intersection(self, index, a, b):
    """Returns the point where segment a→b crosses polygon `index`'s plane.

    None is returned when the segment is parallel to the plane or when the
    crossing is not strictly between the endpoints.
    """
    normal = self.normals[index]
    direction = b - a
    denom = float(np.dot(normal, direction))
    if abs(denom) < EPSILON:
      return None
    t = (self.offsets[index] - float(np.dot(normal, a))) / denom
    if t <= EPSILON or t >= 1.0 - EPSILON:
      return None
    return a + t * direction

  def blocks(self, a, b, exclude=()):
    """Tells whether any polygon not in `exclude` intersects segment a→b."""
    if not self._polygons:
      return False
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    direction = b - a
    denom = self.normals @ direction
    numer = self.offsets - self.normals @ a
    with np.errstate(divide='ignore', invalid='ignore'):
      t = numer / denom
    length = np.linalg.norm(direction)
    # Parameter tolerance expressed in meters along the segment.
    tol = EPSILON / length if length > 0 else EPSILON
    candidates = np.nonzero(
        (np.abs(denom) > EPSILON) & (t > tol) & (t < 1.0 - tol))[0]
    for index in candidates:
      if index in exclude:
        continue
      if self.contains(index, a + t[index] * direction):
        return True
    return False
