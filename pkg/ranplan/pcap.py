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

"""pcap export of FAPI message traces, one record per message."""

import io
import logging
import struct

from .error import RanError
from .fapi import decode_message
from .fapi import encode_message


__all__ = [
    'LINKTYPE_USER0',
    'PcapWriter',
    'dumps_pcap',
    'export_pcap',
    'read_pcap']


logger = logging.getLogger(__name__)

PCAP_MAGIC = 0xA1B2C3D4
PCAP_VERSION = (2, 4)
PCAP_SNAPLEN = 65535
LINKTYPE_USER0 = 147

GLOBAL_HEADER = struct.Struct('<IHHiIII')
RECORD_HEADER = struct.Struct('<IIII')


def _split_timestamp(timestamp):
  return divmod(int(round(timestamp * 1e6)), 1000000)


class PcapWriter:
  """Writes pcap records to a binary file object.

  Timestamps come from the messages themselves, so identical traces give
  identical bytes.
  """

  def __init__(self, fileobj, link_type=LINKTYPE_USER0):
    self._file = fileobj
    self._file.write(GLOBAL_HEADER.pack(
        PCAP_MAGIC, PCAP_VERSION[0], PCAP_VERSION[1], 0, 0, PCAP_SNAPLEN,
        link_type))
    self.count = 0

  def write(self, message):
    payload = encode_message(message)
    if len(payload) > PCAP_SNAPLEN:
      raise RanError(
          'ProtocolError',
          f'{message.kind.label} of {len(payload)} bytes exceeds the snaplen')
    ts_sec, ts_usec = _split_timestamp(message.timestamp)
    self._file.write(
        RECORD_HEADER.pack(ts_sec, ts_usec, len(payload), len(payload)))
    self._file.write(payload)
    self.count += 1

  def writelist(self, messages):
    for message in messages:
      self.write(message)


def _messages(trace):
  return getattr(trace, 'messages', trace)


def dumps_pcap(trace):
  """Returns the pcap bytes of a trace or of a list of messages."""
  buffer = io.BytesIO()
  PcapWriter(buffer).writelist(_messages(trace))
  return buffer.getvalue()


def export_pcap(trace, path):
  """Writes a trace to a pcap file.

  :param trace: A :class:`ranplan.SlotTrace` or a list of
    :class:`ranplan.FapiMessage`.
  :returns: The number of records written.
  :raises RanError: 'IOError' naming `path` when the file can't be written.
  """
  try:
    with open(path, 'wb') as f:
      writer = PcapWriter(f)
      writer.writelist(_messages(trace))
  except OSError as err:
    raise RanError('IOError', f'{path}: {err}')
  logger.info('Wrote %d records to %s', writer.count, path)
  return writer.count


def read_pcap(path):
  """Reads back the messages of a file written by :func:`export_pcap`.

  :returns: A list of :class:`ranplan.FapiMessage` with their timestamps.
  :raises RanError: 'ProtocolError' when the file isn't such a pcap.
  """
  try:
    with open(path, 'rb') as f:
      data = f.read()
  except OSError as err:
    raise RanError('IOError', f'{path}: {err}')
  if len(data) < GLOBAL_HEADER.size:
    raise RanError('ProtocolError', f'{path}: missing pcap header')
  magic, _, _, _, _, _, link_type = GLOBAL_HEADER.unpack_from(data)
  if magic != PCAP_MAGIC or link_type != LINKTYPE_USER0:
    raise RanError('ProtocolError', f'{path}: not a FAPI trace pcap')
  offset = GLOBAL_HEADER.size
  messages = []
  while offset < len(data):
    if offset + RECORD_HEADER.size > len(data):
      raise RanError('ProtocolError', f'{path}: truncated record header')
    ts_sec, ts_usec, incl_len, _ = RECORD_HEADER.unpack_from(data, offset)
    offset += RECORD_HEADER.size
    payload = data[offset:offset + incl_len]
    if len(payload) != incl_len:
      raise RanError('ProtocolError', f'{path}: truncated record')
    offset += incl_len
    messages.append(decode_message(payload, ts_sec + ts_usec / 1e6))
  return messages
