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

"""FAPI slot-procedure messages and their binary encoding.

Every message is a 12-byte header followed by a body::

  header  message id u16 | body length u32 | sfn u16 | slot u16 | 0 u16
  body    n_tlv u16 | n_pdu u16 | n_tlv × (tag u16, length u16 = 4, value u32)
          | n_pdu × (ue id u16, tb bits u32, ack bits u8, flags u8)

All fields are little-endian. Flag bit 0 of a PDU is a CRC pass.
"""

import dataclasses
import enum
import struct
from typing import Optional, Tuple

from .error import RanError


__all__ = [
    'ConfigTag',
    'ErrorCode',
    'FapiMessage',
    'HEADER_SIZE',
    'MessageKind',
    'Pdu',
    'decode_message',
    'encode_body',
    'encode_message']


HEADER = struct.Struct('<HIHHH')
HEADER_SIZE = HEADER.size
_COUNTS = struct.Struct('<HH')
_TLV = struct.Struct('<HHI')
_PDU = struct.Struct('<HIBB')

MAX_SFN = 1023

_CRC_PASS = 0x01


class MessageKind(enum.IntEnum):
  """Message identifiers, numbered after the SCF 5G FAPI convention."""
  PARAM_REQUEST = 0x00
  PARAM_RESPONSE = 0x01
  CONFIG_REQUEST = 0x02
  CONFIG_RESPONSE = 0x03
  START_REQUEST = 0x04
  STOP_REQUEST = 0x05
  ERROR_INDICATION = 0x07
  DL_TTI_REQUEST = 0x80
  UL_TTI_REQUEST = 0x81
  SLOT_INDICATION = 0x82
  UL_DCI_REQUEST = 0x83
  TX_DATA_REQUEST = 0x84
  RX_DATA_INDICATION = 0x85
  CRC_INDICATION = 0x86
  UCI_INDICATION = 0x87
  SRS_INDICATION = 0x88
  RACH_INDICATION = 0x89

  @property
  def label(self):
    """CamelCase name, e.g. 'SlotIndication'."""
    return ''.join(w.capitalize() for w in self.name.split('_'))

  @property
  def from_l2(self):
    return self in _L2_KINDS


_L2_KINDS = frozenset((
    MessageKind.PARAM_REQUEST, MessageKind.CONFIG_REQUEST,
    MessageKind.START_REQUEST, MessageKind.STOP_REQUEST,
    MessageKind.DL_TTI_REQUEST, MessageKind.UL_TTI_REQUEST,
    MessageKind.UL_DCI_REQUEST, MessageKind.TX_DATA_REQUEST))

# Kinds whose PDUs carry transport blocks, which may not be empty.
_DATA_KINDS = frozenset((
    MessageKind.DL_TTI_REQUEST, MessageKind.UL_TTI_REQUEST,
    MessageKind.TX_DATA_REQUEST, MessageKind.RX_DATA_INDICATION))


class ConfigTag(enum.IntEnum):
  """TLV tags used by configuration and error messages."""
  NUMEROLOGY = 0x0100
  N_PRB = 0x0101
  PATTERN_LENGTH = 0x0102
  ERROR_CODE = 0x0200
  ERROR_MESSAGE_ID = 0x0201


class ErrorCode(enum.IntEnum):
  INVALID_STATE = 0x01
  INVALID_CONFIG = 0x02
  # Slot request the L1 cannot carry out, e.g. one naming an unattached UE.
  SLOT_ERROR = 0x04
  LATE_RESPONSE = 0x05


@dataclasses.dataclass(frozen=True)
class Pdu:
  """Per-UE part of a message: a grant, a data block or HARQ feedback."""
  ue_id: int
  tb_bits: int = 0
  ack_bits: int = 0
  crc_pass: bool = True


@dataclasses.dataclass(frozen=True)
class FapiMessage:
  """A message exchanged between L1 and L2.

  `timestamp` is simulated time in seconds. `wall_time` is only set by the
  real-timer mode and takes no part in comparisons.
  """
  kind: MessageKind
  sfn: int = 0
  slot: int = 0
  pdus: Tuple[Pdu, ...] = ()
  tlvs: Tuple[Tuple[int, int], ...] = ()
  timestamp: float = 0.0
  wall_time: Optional[float] = dataclasses.field(default=None, compare=False)

  def __post_init__(self):
    object.__setattr__(self, 'kind', MessageKind(self.kind))
    object.__setattr__(self, 'pdus', tuple(self.pdus))
    object.__setattr__(
        self, 'tlvs', tuple((int(t), int(v)) for t, v in self.tlvs))
    if not 0 <= self.sfn <= MAX_SFN:
      raise ValueError(f'sfn {self.sfn} outside [0, {MAX_SFN}]')
    if self.slot < 0:
      raise ValueError(f'negative slot {self.slot}')
    if self.kind in _DATA_KINDS and any(p.tb_bits <= 0 for p in self.pdus):
      raise ValueError(f'{self.kind.label} carries an empty transport block')

  @property
  def ue_ids(self):
    return tuple(p.ue_id for p in self.pdus)

  @property
  def total_bits(self):
    return sum(p.tb_bits for p in self.pdus)

  def tlv(self, tag, default=None):
    for t, value in self.tlvs:
      if t == tag:
        return value
    return default

  def validate(self, numerology, attached=None):
    """Checks the slot range for `numerology` and, for scheduling requests,
    that every UE belongs to `attached`."""
    slots_per_frame = 10 * 2 ** numerology
    if self.slot >= slots_per_frame:
      raise RanError(
          'ProtocolError',
          f'{self.kind.label} slot {self.slot} outside '
          f'[0, {slots_per_frame - 1}] at numerology {numerology}')
    if attached is not None:
      stray = self.stray_ues(attached)
      if stray:
        raise RanError(
            'ProtocolError',
            f'{self.kind.label} schedules unattached UEs {stray}')

  def stray_ues(self, attached):
    """UEs a DlTti or UlTti request schedules outside `attached`."""
    if self.kind not in (
        MessageKind.DL_TTI_REQUEST, MessageKind.UL_TTI_REQUEST):
      return []
    return [u for u in self.ue_ids if u not in attached]

  def with_timestamp(self, timestamp, wall_time=None):
    return dataclasses.replace(self, timestamp=timestamp, wall_time=wall_time)


def encode_body(message):
  parts = [_COUNTS.pack(len(message.tlvs), len(message.pdus))]
  parts.extend(_TLV.pack(tag, 4, value) for tag, value in message.tlvs)
  parts.extend(
      _PDU.pack(p.ue_id, p.tb_bits, p.ack_bits, _CRC_PASS if p.crc_pass else 0)
      for p in message.pdus)
  return b''.join(parts)


def encode_message(message):
  """Header and body bytes of a message."""
  body = encode_body(message)
  return HEADER.pack(
      int(message.kind), len(body), message.sfn, message.slot, 0) + body


def decode_message(data, timestamp=0.0):
  """Parses bytes produced by :func:`encode_message`.

  :raises RanError: 'ProtocolError' on truncated or unknown messages.
  """
  if len(data) < HEADER_SIZE:
    raise RanError('ProtocolError', f'{len(data)} bytes is too short a message')
  kind, length, sfn, slot, _ = HEADER.unpack_from(data)
  body = data[HEADER_SIZE:]
  if len(body) != length:
    raise RanError(
        'ProtocolError', f'body length {len(body)} does not match {length}')
  try:
    kind = MessageKind(kind)
  except ValueError:
    raise RanError('ProtocolError', f'unknown message id 0x{kind:02x}')
  try:
    n_tlv, n_pdu = _COUNTS.unpack_from(body)
    offset = _COUNTS.size
    tlvs = []
    for _ in range(n_tlv):
      tag, _, value = _TLV.unpack_from(body, offset)
      tlvs.append((tag, value))
      offset += _TLV.size
    pdus = []
    for _ in range(n_pdu):
      ue_id, tb_bits, ack_bits, flags = _PDU.unpack_from(body, offset)
      pdus.append(Pdu(ue_id, tb_bits, ack_bits, bool(flags & _CRC_PASS)))
      offset += _PDU.size
  except struct.error as err:
    raise RanError('ProtocolError', f'truncated {kind.label} body: {err}')
  return FapiMessage(kind, sfn, slot, tuple(pdus), tuple(tlvs), timestamp)
