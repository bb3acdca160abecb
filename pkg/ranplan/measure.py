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

"""Statistics over experiment logs: mean with confidence interval and
rebuffer ratio."""

import dataclasses
import logging
import math
import os
from typing import Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .error import RanError


__all__ = [
    'ConfidenceInterval',
    'SampleSeries',
    'VideoSession',
    'ingest_csv',
    'mean_ci',
    'rebuffer_ratio',
    'summarize',
    'write_stats_csv']


logger = logging.getLogger(__name__)

VIDEO_EVENTS = ('session', 'stall', 'bitrate')

_SERIES_COLUMNS = {'timestamp', 'value'}
_VIDEO_COLUMNS = {'event', 'start', 'duration'}


@dataclasses.dataclass(frozen=True)
class SampleSeries:
  """Measured values of one quantity. With several runs, each sample is the
  mean of a run."""
  label: str
  samples: Tuple[float, ...]
  run_count: int = 1

  def __post_init__(self):
    object.__setattr__(self, 'samples', tuple(float(s) for s in self.samples))
    if self.run_count < 1:
      raise ValueError('run_count must be at least 1')
    if not all(math.isfinite(s) for s in self.samples):
      raise ValueError(f'series {self.label!r} holds non-finite samples')


@dataclasses.dataclass(frozen=True)
class VideoSession:
  """A video playback session: its length, its stalls (both in seconds) and
  the bitrate samples (Mbps) seen during playback."""
  total_duration: float
  stall_durations: Tuple[float, ...] = ()
  bitrate_samples: Tuple[float, ...] = ()
  label: str = ''

  def __post_init__(self):
    object.__setattr__(
        self, 'stall_durations', tuple(float(s) for s in self.stall_durations))
    object.__setattr__(
        self, 'bitrate_samples', tuple(float(s) for s in self.bitrate_samples))
    if any(s < 0 for s in self.stall_durations):
      raise ValueError('stall durations must not be negative')
    if sum(self.stall_durations) > self.total_duration + 1e-9:
      raise ValueError('stalls last longer than the session')


@dataclasses.dataclass(frozen=True)
class ConfidenceInterval:
  mean: float
  lo: float
  hi: float
  level: float = 0.95
  n: int = 0
  diagnostics: Tuple[str, ...] = ()

  @property
  def half_width(self):
    return (self.hi - self.lo) / 2.0


def mean_ci(series, level=0.95):
  """Student-t confidence interval of the mean.

  A single sample gives the degenerate interval [mean, mean] and a warning
  diagnostic.

  :type series: :class:`SampleSeries`
  :param level: Confidence level in (0, 1).
  :returns: A :class:`ConfidenceInterval`.
  """
  if not 0 < level < 1:
    raise ValueError('level must be within (0, 1)')
  samples = np.asarray(series.samples, dtype=float)
  n = samples.size
  if n == 0:
    raise ValueError(f'series {series.label!r} is empty')
  mean = float(samples.mean())
  if n == 1:
    message = f'{series.label}: one sample, confidence interval is degenerate'
    logger.warning(message)
    return ConfidenceInterval(mean, mean, mean, level, 1, (message,))
  half = float(stats.t.ppf((1.0 + level) / 2.0, n - 1) *
               samples.std(ddof=1) / math.sqrt(n))
  return ConfidenceInterval(mean, mean - half, mean + half, level, n)


def rebuffer_ratio(session):
  """Fraction of the session spent stalled."""
  if not session.total_duration > 0:
    raise ValueError('session duration must be positive')
  return sum(session.stall_durations) / session.total_duration


def _schema_error(path, row, text):
  return RanError('SchemaError', f'{path}: row {row}: {text}')


def _numeric(frame, column, path):
  values = pd.to_numeric(frame[column], errors='coerce')
  bad = values.isna() & frame[column].notna()
  if bad.any():
    row = int(bad.idxmax()) + 2
    return None, _schema_error(path, row, f'{column} is not a number')
  return values, None


def _read_series(frame, path, label):
  values, error = _numeric(frame, 'value', path)
  if error:
    raise error
  if values.isna().any():
    raise _schema_error(path, int(values.isna().idxmax()) + 2, 'missing value')
  if not np.isfinite(values).all():
    row = int((~np.isfinite(values)).idxmax()) + 2
    raise _schema_error(path, row, 'value is not finite')
  if 'run' in frame.columns:
    means = values.groupby(frame['run'], sort=True).mean()
    return SampleSeries(label, tuple(means), run_count=len(means))
  return SampleSeries(label, tuple(values))


def _read_video(frame, path, label):
  for column in ('start', 'duration'):
    values, error = _numeric(frame, column, path)
    if error:
      raise error
    frame[column] = values
  total = None
  stalls = []
  bitrates = []
  for index, record in frame.iterrows():
    row = int(index) + 2
    event = str(record['event']).strip()
    if event not in VIDEO_EVENTS:
      raise _schema_error(path, row, f'unknown event {event!r}')
    duration = record['duration']
    if event != 'bitrate' and (pd.isna(duration) or duration < 0):
      raise _schema_error(path, row, f'{event} duration must not be negative')
    if event == 'session':
      total = float(duration)
    elif event == 'stall':
      stalls.append(float(duration))
    else:
      value = record['value'] if 'value' in frame.columns else None
      value = pd.to_numeric(value, errors='coerce') if value is not None else None
      if value is None or pd.isna(value):
        raise _schema_error(path, row, 'bitrate row needs a value')
      bitrates.append(float(value))
  if total is None:
    ends = frame['start'] + frame['duration'].fillna(0)
    total = float(ends.max() - frame['start'].min())
  if not total > 0:
    raise RanError('SchemaError', f'{path}: session duration must be positive')
  try:
    return VideoSession(total, tuple(stalls), tuple(bitrates), label)
  except ValueError as err:
    raise RanError('SchemaError', f'{path}: {err}')


def ingest_csv(path, label=None):
  """Reads an experiment log.

  Two layouts are understood: `timestamp,value[,run]` gives a
  :class:`SampleSeries` (per-run means when a run column is present) and
  `event,start,duration[,value]` gives a :class:`VideoSession`, where event is
  session, stall or bitrate. Rows are numbered like file lines, the header
  being row 1.

  :raises RanError: 'SchemaError' naming the file and the offending row.
  """
  label = label or os.path.splitext(os.path.basename(path))[0]
  try:
    frame = pd.read_csv(path, skipinitialspace=True)
  except pd.errors.EmptyDataError:
    raise RanError('SchemaError', f'{path}: empty file')
  except OSError as err:
    raise RanError('IOError', f'{path}: {err}')
  columns = {str(c).strip() for c in frame.columns}
  frame.columns = [str(c).strip() for c in frame.columns]
  if frame.empty:
    raise RanError('SchemaError', f'{path}: empty series, no data rows')
  if _VIDEO_COLUMNS <= columns:
    return _read_video(frame, path, label)
  if _SERIES_COLUMNS <= columns:
    return _read_series(frame, path, label)
  raise RanError(
      'SchemaError',
      f'{path}: row 1: expected columns timestamp,value or event,start,duration')


def summarize(data, level=0.95):
  """Rows of (label, :class:`ConfidenceInterval`) for an ingested log.

  A video session yields its rebuffer ratio as a zero-width interval and,
  when it has bitrate samples, their mean with its interval.
  """
  if isinstance(data, SampleSeries):
    return [(data.label, mean_ci(data, level))]
  ratio = rebuffer_ratio(data)
  rows = [(f'{data.label}:rebuffer_ratio',
           ConfidenceInterval(ratio, ratio, ratio, level, 1))]
  if data.bitrate_samples:
    series = SampleSeries(f'{data.label}:bitrate', data.bitrate_samples)
    rows.append((series.label, mean_ci(series, level)))
  return rows


def write_stats_csv(rows, path):
  """Writes (label, interval) rows with columns label, mean, ci_lo, ci_hi."""
  frame = pd.DataFrame(
      [(label, ci.mean, ci.lo, ci.hi) for label, ci in rows],
      columns=['label', 'mean', 'ci_lo', 'ci_hi'])
  try:
    frame.to_csv(path, index=False)
  except OSError as err:
    raise RanError('IOError', f'{path}: {err}')
