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

"""Theoretical TDD cell and per-UE throughput."""

import dataclasses
import math
from typing import Optional, Tuple


__all__ = [
    'CarrierConfig',
    'HarqConstraint',
    'LinkConfig',
    'NRB_TABLE_FR1',
    'SLOT_KINDS',
    'TddPattern',
    'aggregate_vs_single',
    'bits_per_slot',
    'capacity_report',
    'format_capacity_table',
    'max_prb',
    'peak_rate',
    'per_ue_cap',
    'slot_duration',
    'slots_in_period',
    'summary']


SLOT_KINDS = ('D', 'S', 'U')

SUBCARRIERS_PER_PRB = 12
SYMBOLS_PER_SLOT = 14

# Maximum transmission bandwidth configuration N_RB for FR1, by subcarrier
# spacing (kHz) then channel bandwidth (MHz).
NRB_TABLE_FR1 = {
    15: {5: 25, 10: 52, 15: 79, 20: 106, 25: 133, 30: 160, 40: 216, 50: 270},
    30: {5: 11, 10: 24, 15: 38, 20: 51, 25: 65, 30: 78, 40: 106, 50: 133,
         60: 162, 70: 189, 80: 217, 90: 245, 100: 273},
    60: {10: 11, 15: 18, 20: 24, 25: 31, 30: 38, 40: 51, 50: 65, 60: 79,
         70: 93, 80: 107, 90: 121, 100: 135},
}


def slot_duration(numerology):
  """Slot length in seconds, 1 ms / 2^µ."""
  if numerology not in (0, 1, 2, 3):
    raise ValueError(f'numerology must be 0, 1, 2 or 3, got {numerology}')
  return 1e-3 / 2 ** numerology


def max_prb(numerology, bandwidth):
  """N_RB for a numerology and a bandwidth in Hz, None when not tabulated."""
  scs = 15 * 2 ** numerology
  return NRB_TABLE_FR1.get(scs, {}).get(int(round(bandwidth / 1e6)))


@dataclasses.dataclass(frozen=True)
class CarrierConfig:
  """NR carrier.

  :param bandwidth: Channel bandwidth in Hz.
  :param numerology: µ, subcarrier spacing 15·2^µ kHz.
  :param n_prb: PRB count. None takes the FR1 table maximum; an explicit
    value may not exceed it.
  """
  bandwidth: float = 100e6
  numerology: int = 1
  n_prb: Optional[int] = 273
  band: str = 'n78'
  duplex: str = 'TDD'

  def __post_init__(self):
    slot_duration(self.numerology)
    if not self.bandwidth > 0:
      raise ValueError('carrier bandwidth must be positive')
    limit = max_prb(self.numerology, self.bandwidth)
    if self.n_prb is None:
      if limit is None:
        raise ValueError(
            f'no PRB count tabulated for {self.bandwidth / 1e6:g} MHz at '
            f'{self.subcarrier_spacing / 1e3:g} kHz, set n_prb')
      object.__setattr__(self, 'n_prb', limit)
    elif self.n_prb < 1:
      raise ValueError('n_prb must be at least 1')
    elif limit is not None and self.n_prb > limit:
      raise ValueError(
          f'{self.n_prb} PRBs exceed the {limit} that fit '
          f'{self.bandwidth / 1e6:g} MHz at {self.subcarrier_spacing / 1e3:g} kHz')

  @property
  def subcarrier_spacing(self):
    return 15e3 * 2 ** self.numerology

  @property
  def slot_duration(self):
    return slot_duration(self.numerology)

  @property
  def slots_per_frame(self):
    return 10 * 2 ** self.numerology


@dataclasses.dataclass(frozen=True)
class TddPattern:
  """Repeating sequence of D, S and U slots.

  `period` is in seconds. When None it is the pattern length times the slot
  duration of the numerology in use.
  """
  slots: Tuple[str, ...] = ('D', 'D', 'D', 'S', 'U')
  period: Optional[float] = None
  special_usable: bool = False

  def __post_init__(self):
    slots = tuple(self.slots)
    if not slots:
      raise ValueError('TDD pattern must not be empty')
    unknown = [s for s in slots if s not in SLOT_KINDS]
    if unknown:
      raise ValueError(f'unknown slot kinds in TDD pattern: {unknown}')
    object.__setattr__(self, 'slots', slots)

  def __len__(self):
    return len(self.slots)

  def __str__(self):
    return ''.join(self.slots)

  def kind(self, slot_index):
    """Kind of the absolute slot `slot_index`."""
    return self.slots[slot_index % len(self.slots)]

  def period_seconds(self, numerology):
    expected = len(self.slots) * slot_duration(numerology)
    if self.period is None:
      return expected
    if not math.isclose(self.period, expected, rel_tol=1e-9):
      raise ValueError(
          f'a {len(self.slots)}-slot pattern lasts {expected * 1e3:g} ms at '
          f'numerology {numerology}, not {self.period * 1e3:g} ms')
    return self.period

  def eligible(self, direction):
    """Slots per period that carry `direction` ('dl' or 'ul') data."""
    own = {'dl': 'D', 'ul': 'U'}[direction]
    count = slots_in_period(self, own)
    if self.special_usable:
      count += slots_in_period(self, 'S')
    return count


@dataclasses.dataclass(frozen=True)
class LinkConfig:
  """Layers, modulation, code rate and overheads of both directions.

  The defaults (64QAM, R = 948/1024, 14% DL and 8% UL overhead) reproduce the
  525 Mbps DL and 94 Mbps UL figures of a 100 MHz DDDSU cell.
  """
  layers_dl: int = 2
  layers_ul: int = 1
  modulation_order: int = 6
  code_rate: float = 948 / 1024
  overhead_dl: float = 0.14
  overhead_ul: float = 0.08

  def __post_init__(self):
    for layers in (self.layers_dl, self.layers_ul):
      if not 1 <= layers <= 4:
        raise ValueError('layers must be between 1 and 4')
    if self.modulation_order < 1:
      raise ValueError('modulation order must be positive')
    if not 0 < self.code_rate < 1:
      raise ValueError('code rate must be within (0, 1)')
    for overhead in (self.overhead_dl, self.overhead_ul):
      if not 0 <= overhead < 1:
        raise ValueError('overhead must be within [0, 1)')


@dataclasses.dataclass(frozen=True)
class HarqConstraint:
  """ACK/NACK feedback bits per UE, which cap its DL slots per period."""
  ack_bits_per_ue: int = 2

  def __post_init__(self):
    if self.ack_bits_per_ue < 1:
      raise ValueError('at least one ACK bit per UE is needed')

  @property
  def max_dl_slots_per_ue_per_period(self):
    return self.ack_bits_per_ue

  def dl_slots_per_ue(self, pattern):
    return min(self.ack_bits_per_ue, slots_in_period(pattern, 'D'))


def slots_in_period(pattern, kind):
  if kind not in SLOT_KINDS:
    raise ValueError(f'unknown slot kind: {kind}')
  return sum(1 for s in pattern.slots if s == kind)


def bits_per_slot(carrier, link, direction='dl'):
  """Data bits one slot carries in `direction`, all layers included."""
  if direction == 'dl':
    layers, overhead = link.layers_dl, link.overhead_dl
  elif direction == 'ul':
    layers, overhead = link.layers_ul, link.overhead_ul
  else:
    raise ValueError(f"direction must be 'dl' or 'ul', got {direction!r}")
  resource_elements = carrier.n_prb * SUBCARRIERS_PER_PRB * SYMBOLS_PER_SLOT
  return (layers * link.modulation_order * link.code_rate * resource_elements *
          (1.0 - overhead))


def peak_rate(carrier, pattern, link):
  """Cell peak rates in bps.

  :returns: A dict with the 'dl' and 'ul' rates.
  """
  period = pattern.period_seconds(carrier.numerology)
  return {
      direction: bits_per_slot(carrier, link, direction) *
      pattern.eligible(direction) / period
      for direction in ('dl', 'ul')}


def per_ue_cap(cell_dl, pattern, harq):
  """DL rate a single UE can reach given its ACK bits per period."""
  d_slots = slots_in_period(pattern, 'D')
  if d_slots < 1:
    raise ValueError('TDD pattern has no downlink slot')
  return cell_dl * min(harq.ack_bits_per_ue, d_slots) / d_slots


def aggregate_vs_single(ue_count, cell_dl, per_ue_cap):
  """DL rate reachable by `ue_count` UEs sharing the cell."""
  if ue_count < 1:
    raise ValueError('ue_count must be at least 1')
  return min(ue_count * per_ue_cap, cell_dl)


def capacity_report(carrier=None, pattern=None, link=None, harq=None):
  """Every capacity figure of a configuration, keyed by name."""
  carrier = carrier or CarrierConfig()
  pattern = pattern or TddPattern()
  link = link or LinkConfig()
  harq = harq or HarqConstraint()
  rates = peak_rate(carrier, pattern, link)
  cap = per_ue_cap(rates['dl'], pattern, harq)
  return {
      'band': carrier.band,
      'bandwidth_mhz': carrier.bandwidth / 1e6,
      'scs_khz': carrier.subcarrier_spacing / 1e3,
      'n_prb': carrier.n_prb,
      'slot_us': carrier.slot_duration * 1e6,
      'tdd_pattern': str(pattern),
      'special_usable': pattern.special_usable,
      'layers_dl': link.layers_dl,
      'layers_ul': link.layers_ul,
      'dl_bits_per_slot': bits_per_slot(carrier, link, 'dl'),
      'ul_bits_per_slot': bits_per_slot(carrier, link, 'ul'),
      'cell_dl_mbps': rates['dl'] / 1e6,
      'cell_ul_mbps': rates['ul'] / 1e6,
      'ack_bits': harq.ack_bits_per_ue,
      'per_ue_dl_mbps': cap / 1e6,
  }


def summary(carrier=None, pattern=None, link=None, harq=None):
  """:func:`capacity_report` as a key=value text block."""
  report = capacity_report(carrier, pattern, link, harq)
  lines = []
  for key, value in report.items():
    if isinstance(value, float):
      value = f'{value:.3f}'.rstrip('0').rstrip('.')
    lines.append(f'{key}={value}')
  return '\n'.join(lines) + '\n'


def format_capacity_table(carrier=None, pattern=None, link=None, harq=None):
  """Human readable configuration and throughput table."""
  r = capacity_report(carrier, pattern, link, harq)
  rows = [
      ('Band', r['band']),
      ('Bandwidth', f"{r['bandwidth_mhz']:g} MHz"),
      ('Subcarrier spacing', f"{r['scs_khz']:g} kHz"),
      ('PRBs', str(r['n_prb'])),
      ('TDD config', r['tdd_pattern'] +
       ('' if r['special_usable'] else ' (special slot unused)')),
      ('MIMO config',
       f"{r['layers_dl']} layers DL, {r['layers_ul']} layer UL"),
      ('Max theoretical cell throughput',
       f"{r['cell_dl_mbps']:.1f} Mbps DL, {r['cell_ul_mbps']:.2f} Mbps UL"),
      ('Max theoretical DL throughput per UE',
       f"{r['per_ue_dl_mbps']:.1f} Mbps ({r['ack_bits']} ACK/NACK bits)"),
  ]
  width = max(len(k) for k, _ in rows)
  return '\n'.join(f'{k.ljust(width)}  {v}' for k, v in rows) + '\n'
