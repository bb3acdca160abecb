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

"""FAPI slot-procedure simulator.

An L1 (the master) announces every slot with a SlotIndication and an L2
MAC scheduler answers with the DL or UL requests for that slot. Both sides
exchange :class:`ranplan.FapiMessage` objects over an ordered in-process
channel and every message lands in a :class:`SlotTrace`.
"""

import asyncio
import collections
import dataclasses
import enum
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from .capacity import CarrierConfig
from .capacity import HarqConstraint
from .capacity import LinkConfig
from .capacity import TddPattern
from .capacity import bits_per_slot
from .error import RanError
from .fapi import ConfigTag
from .fapi import ErrorCode
from .fapi import FapiMessage
from .fapi import MAX_SFN
from .fapi import MessageKind
from .fapi import Pdu


__all__ = [
    'DEFAULT_HANDSHAKE',
    'L1',
    'L1State',
    'MacScheduler',
    'SimConfig',
    'SimEvent',
    'SimStats',
    'Simulator',
    'SlotClock',
    'SlotTrace',
    'TrafficModel',
    'UeContext',
    'deadline_audit',
    'handshake',
    'jain_fairness',
    'l1_tick']


logger = logging.getLogger(__name__)

TRAFFIC_KINDS = ('full_buffer', 'constant', 'poisson')
EVENT_KINDS = ('rach', 'srs', 'stop')

DEFAULT_HANDSHAKE = (
    MessageKind.PARAM_REQUEST,
    MessageKind.CONFIG_REQUEST,
    MessageKind.START_REQUEST)

# Seconds the real-timer L1 waits for any L2 answer before giving up.
RESPONSE_TIMEOUT = 1.0

_TIME_TOLERANCE = 1e-12


def _make_sync(future):
  """Utility function that waits for an async call, making it sync."""
  try:
    event_loop = asyncio.get_event_loop()
  except RuntimeError:
    # Generate an event loop if there isn't any.
    event_loop = asyncio.new_event_loop()
    asyncio.set_event_loop(event_loop)
  return event_loop.run_until_complete(future)


@dataclasses.dataclass
class SlotClock:
  """Simulated slot clock: `index` counts slots since start, `sfn`/`slot`
  are the frame and slot numbers carried by messages."""
  numerology: int = 1
  sfn: int = 0
  slot: int = 0
  index: int = 0

  @property
  def tick(self):
    return 1e-3 / 2 ** self.numerology

  @property
  def slots_per_frame(self):
    return 10 * 2 ** self.numerology

  @property
  def time(self):
    return self.index * self.tick

  def advance(self):
    self.index += 1
    self.slot += 1
    if self.slot == self.slots_per_frame:
      self.slot = 0
      self.sfn = (self.sfn + 1) % (MAX_SFN + 1)
    return self


def l1_tick(clock):
  """SlotIndication for the clock's current slot. The clock is not moved."""
  return FapiMessage(
      MessageKind.SLOT_INDICATION, clock.sfn, clock.slot, timestamp=clock.time)


@dataclasses.dataclass(frozen=True)
class TrafficModel:
  """Per-UE offered traffic.

  'full_buffer' UEs always have data. 'constant' adds `rate × slot` bits every
  slot. 'poisson' adds whole packets of `packet_bits`, their count per slot
  being Poisson distributed with the same mean bit rate.
  """
  kind: str = 'full_buffer'
  dl_rate: float = 0.0
  ul_rate: float = 0.0
  packet_bits: int = 12000

  def __post_init__(self):
    if self.kind not in TRAFFIC_KINDS:
      raise ValueError(f'unknown traffic model: {self.kind}')
    if self.dl_rate < 0 or self.ul_rate < 0:
      raise ValueError('traffic rates must not be negative')
    if self.packet_bits <= 0:
      raise ValueError('packet_bits must be positive')

  def initial_backlog(self):
    if self.kind == 'full_buffer':
      return math.inf, math.inf
    return 0.0, 0.0

  def arrivals(self, rng, tick):
    """Bits arriving in one slot, (dl, ul)."""
    if self.kind == 'constant':
      return self.dl_rate * tick, self.ul_rate * tick
    if self.kind == 'poisson':
      return tuple(
          float(rng.poisson(rate * tick / self.packet_bits) * self.packet_bits)
          for rate in (self.dl_rate, self.ul_rate))
    return 0.0, 0.0


@dataclasses.dataclass(frozen=True)
class SimEvent:
  """Scripted event: a RACH or SRS reception from `ue_id`, or a StopRequest,
  at absolute slot `slot`."""
  slot: int
  kind: str
  ue_id: int = 0

  def __post_init__(self):
    if self.kind not in EVENT_KINDS:
      raise ValueError(f'unknown event kind: {self.kind}')
    if self.slot < 0:
      raise ValueError('event slot must not be negative')


@dataclasses.dataclass(frozen=True)
class SimConfig:
  """Simulation parameters.

  :param traffic: One :class:`TrafficModel` for every UE or a tuple with one
    model per UE.
  :param l2_latency: Seconds between a SlotIndication and the L2 answer.
  :param deadline: Response budget in seconds, one slot when None.
  :param dl_tb_bits: DL transport block size, the capacity of a slot when None.
  :param ul_tb_bits: UL transport block size, the capacity of a slot when None.
  :param harq_feedback_delay: Slots between a DL assignment and its UCI.
    When None feedback rides the next U slot.
  """
  carrier: CarrierConfig = CarrierConfig()
  pattern: TddPattern = TddPattern()
  link: LinkConfig = LinkConfig()
  harq: HarqConstraint = HarqConstraint()
  ue_count: int = 1
  traffic: Union[TrafficModel, Tuple[TrafficModel, ...]] = TrafficModel()
  n_slots: int = 5000
  l2_latency: float = 100e-6
  deadline: Optional[float] = None
  dl_tb_bits: Optional[int] = None
  ul_tb_bits: Optional[int] = None
  harq_feedback_delay: Optional[int] = None
  seed: int = 0
  events: Tuple[SimEvent, ...] = ()

  def __post_init__(self):
    if self.n_slots < 1:
      raise ValueError('n_slots must be at least 1')
    if self.ue_count < 1:
      raise ValueError('ue_count must be at least 1')
    if self.l2_latency < 0:
      raise ValueError('l2_latency must not be negative')
    if self.deadline is not None and not self.deadline > 0:
      raise ValueError('deadline must be positive')
    if isinstance(self.traffic, (list, tuple)):
      object.__setattr__(self, 'traffic', tuple(self.traffic))
      if len(self.traffic) != self.ue_count:
        raise ValueError(
            f'{len(self.traffic)} traffic models for {self.ue_count} UEs')
    for size in (self.dl_tb_bits, self.ul_tb_bits):
      if size is not None and size <= 0:
        raise ValueError('transport block sizes must be positive')
    if self.harq_feedback_delay is None:
      if 'U' not in self.pattern.slots:
        raise ValueError(
            'a pattern without U slots needs an explicit harq_feedback_delay')
    elif self.harq_feedback_delay < 1:
      raise ValueError('harq_feedback_delay must be at least 1 slot')
    events = tuple(self.events)
    for event in events:
      if event.kind != 'stop' and not 0 <= event.ue_id < self.ue_count:
        raise ValueError(f'event for unknown UE {event.ue_id}')
    object.__setattr__(self, 'events', events)
    self.pattern.period_seconds(self.carrier.numerology)

  @property
  def numerology(self):
    return self.carrier.numerology

  @property
  def tick(self):
    return self.carrier.slot_duration

  @property
  def budget(self):
    return self.deadline if self.deadline is not None else self.tick

  @property
  def dl_bits_per_slot(self):
    if self.dl_tb_bits is not None:
      return int(self.dl_tb_bits)
    return int(bits_per_slot(self.carrier, self.link, 'dl'))

  @property
  def ul_bits_per_slot(self):
    if self.ul_tb_bits is not None:
      return int(self.ul_tb_bits)
    return int(bits_per_slot(self.carrier, self.link, 'ul'))

  def traffic_for(self, ue_id):
    if isinstance(self.traffic, tuple):
      return self.traffic[ue_id]
    return self.traffic


@dataclasses.dataclass
class UeContext:
  """Scheduler view of an attached UE. Backlogs are in bits, inf for a full
  buffer."""
  ue_id: int
  dl_backlog: float = 0.0
  ul_backlog: float = 0.0
  dl_slots_used_this_period: int = 0
  delivered_dl: int = 0
  delivered_ul: int = 0


class SlotTrace:
  """Ordered record of every message exchanged during a run."""

  def __init__(self, messages=()):
    self.messages = list(messages)

  def __len__(self):
    return len(self.messages)

  def __iter__(self):
    return iter(self.messages)

  def __getitem__(self, index):
    return self.messages[index]

  def append(self, message):
    self.messages.append(message)

  def extend(self, messages):
    self.messages.extend(messages)

  def of_kind(self, kind):
    return [m for m in self.messages if m.kind == kind]

  def count_by_kind(self):
    return dict(collections.Counter(m.kind.label for m in self.messages))


class L1State(enum.Enum):
  IDLE = 'idle'
  CONFIGURED = 'configured'
  RUNNING = 'running'
  STOPPED = 'stopped'


_SLOT_REQUESTS = frozenset((
    MessageKind.DL_TTI_REQUEST, MessageKind.UL_TTI_REQUEST,
    MessageKind.UL_DCI_REQUEST, MessageKind.TX_DATA_REQUEST))


class L1:
  """PHY side of the interface.

  Configuration messages drive the IDLE → CONFIGURED → RUNNING → STOPPED
  state machine; anything out of order answers an ErrorIndication and halts
  the L1. A DlTti or UlTti request naming a UE outside `attached` is
  answered with an ErrorIndication and dropped, the L1 keeps running.
  While running, accepted UL grants come back as RxDataIndication and
  CrcIndication one slot later, and DL assignments as UciIndication ack bits.
  """

  def __init__(self, carrier=None, pattern=None, harq_feedback_delay=None,
               attached=None):
    self.carrier = carrier or CarrierConfig()
    self.attached = frozenset(attached) if attached is not None else None
    self.pattern = pattern or TddPattern()
    self.harq_feedback_delay = harq_feedback_delay
    self.state = L1State.IDLE
    self.halted = False
    self._rx = collections.defaultdict(list)
    self._uci = collections.defaultdict(collections.Counter)

  def _error(self, message, code, halt=True):
    self.halted = halt
    logger.warning('L1 rejected %s in state %s', message.kind.label,
                   self.state.value)
    return FapiMessage(
        MessageKind.ERROR_INDICATION, message.sfn, message.slot,
        tlvs=((ConfigTag.ERROR_CODE, code),
              (ConfigTag.ERROR_MESSAGE_ID, int(message.kind))),
        timestamp=message.timestamp)

  def receive(self, message):
    """Handles an L2 message and returns the L1 answers, if any."""
    kind = message.kind
    if self.halted:
      return []
    if kind == MessageKind.PARAM_REQUEST and self.state == L1State.IDLE:
      return [FapiMessage(
          MessageKind.PARAM_RESPONSE,
          tlvs=((ConfigTag.NUMEROLOGY, self.carrier.numerology),
                (ConfigTag.N_PRB, self.carrier.n_prb)),
          timestamp=message.timestamp)]
    if kind == MessageKind.CONFIG_REQUEST and self.state == L1State.IDLE:
      numerology = message.tlv(ConfigTag.NUMEROLOGY, self.carrier.numerology)
      if numerology != self.carrier.numerology:
        return [self._error(message, ErrorCode.INVALID_CONFIG)]
      self.state = L1State.CONFIGURED
      return [FapiMessage(
          MessageKind.CONFIG_RESPONSE, timestamp=message.timestamp)]
    if kind == MessageKind.START_REQUEST and self.state == L1State.CONFIGURED:
      self.state = L1State.RUNNING
      return []
    if kind == MessageKind.STOP_REQUEST and self.state == L1State.RUNNING:
      self.state = L1State.STOPPED
      return []
    if kind in _SLOT_REQUESTS and self.state == L1State.RUNNING:
      message.validate(self.carrier.numerology)
      if self.attached is not None and message.stray_ues(self.attached):
        return [self._error(message, ErrorCode.SLOT_ERROR, halt=False)]
      return []
    return [self._error(message, ErrorCode.INVALID_STATE)]

  def tick(self, clock):
    if self.state != L1State.RUNNING:
      raise RanError('ProtocolError', 'slot indication before StartRequest')
    return l1_tick(clock)

  def _feedback_slot(self, slot_index):
    if self.harq_feedback_delay is not None:
      return slot_index + self.harq_feedback_delay
    k = slot_index + 1
    while self.pattern.kind(k) != 'U':
      k += 1
    return k

  def indicate(self, request, slot_index):
    """Registers an accepted request sent for absolute slot `slot_index`."""
    if request.kind == MessageKind.UL_TTI_REQUEST:
      for pdu in request.pdus:
        self._rx[slot_index + 1].append((pdu.ue_id, pdu.tb_bits))
    elif request.kind == MessageKind.DL_TTI_REQUEST:
      due = self._feedback_slot(slot_index)
      for pdu in request.pdus:
        self._uci[due][pdu.ue_id] += 1

  def pending_indications(self, clock, drain=False):
    """Indications due in the clock's slot, or every pending one when
    `drain` is set."""
    if drain:
      rx_slots = sorted(self._rx)
      uci_slots = sorted(self._uci)
    else:
      rx_slots = [clock.index] if clock.index in self._rx else []
      uci_slots = [clock.index] if clock.index in self._uci else []
    rx = [g for k in rx_slots for g in self._rx.pop(k)]
    acks = collections.Counter()
    for k in uci_slots:
      acks.update(self._uci.pop(k))
    messages = []
    if rx:
      messages.append(FapiMessage(
          MessageKind.RX_DATA_INDICATION, clock.sfn, clock.slot,
          tuple(Pdu(ue, bits) for ue, bits in rx), timestamp=clock.time))
      messages.append(FapiMessage(
          MessageKind.CRC_INDICATION, clock.sfn, clock.slot,
          tuple(Pdu(ue, crc_pass=True) for ue, _ in rx), timestamp=clock.time))
    if acks:
      messages.append(FapiMessage(
          MessageKind.UCI_INDICATION, clock.sfn, clock.slot,
          tuple(Pdu(ue, ack_bits=n) for ue, n in sorted(acks.items())),
          timestamp=clock.time))
    return messages


def handshake(requests=DEFAULT_HANDSHAKE, l1=None, timestamp=0.0):
  """Runs configuration requests through an L1 and returns the exchange.

  The default sequence gives ParamRequest, ParamResponse, ConfigRequest,
  ConfigResponse, StartRequest. The exchange stops at the first
  ErrorIndication.

  :param requests: L2 message kinds, in sending order.
  :param l1: The :class:`L1` to configure, a fresh one by default.
  """
  l1 = l1 or L1()
  messages = []
  for kind in requests:
    tlvs = ()
    if kind == MessageKind.CONFIG_REQUEST:
      tlvs = ((ConfigTag.NUMEROLOGY, l1.carrier.numerology),
              (ConfigTag.N_PRB, l1.carrier.n_prb),
              (ConfigTag.PATTERN_LENGTH, len(l1.pattern)))
    request = FapiMessage(kind, tlvs=tlvs, timestamp=timestamp)
    messages.append(request)
    answers = l1.receive(request)
    messages.extend(answers)
    if l1.halted:
      break
  return messages


class MacScheduler:
  """Single-UE-per-slot round-robin scheduler.

  D slots go to the next UE with DL backlog that still has ACK bits left in
  the current TDD period; U slots go to the next UE with UL backlog. S slots
  stay empty unless the pattern marks them usable, in which case they are
  scheduled like D slots.
  """

  def __init__(self, pattern, dl_tb_bits, ul_tb_bits, harq=None):
    self.pattern = pattern
    self.dl_tb_bits = int(dl_tb_bits)
    self.ul_tb_bits = int(ul_tb_bits)
    self.harq = harq or HarqConstraint()
    self._dl_next = 0
    self._ul_next = 0

  def slot_kind(self, slot_index):
    kind = self.pattern.kind(slot_index)
    if kind == 'S' and self.pattern.special_usable:
      return 'D'
    return kind

  def _pick(self, ues, start, eligible):
    for offset in range(len(ues)):
      k = (start + offset) % len(ues)
      if eligible(ues[k]):
        return k
    return None

  def schedule(self, indication, ues, slot_index):
    """Answers a SlotIndication.

    :param indication: The SlotIndication of absolute slot `slot_index`.
    :param ues: List of :class:`UeContext`, updated in place.
    :returns: The L2 messages for the slot: a DlTtiRequest (with a
      TxDataRequest when it assigns a UE) or a UlTtiRequest (with a
      UlDciRequest when it grants a UE).
    """
    if slot_index % len(self.pattern) == 0:
      for ue in ues:
        ue.dl_slots_used_this_period = 0
    kind = self.slot_kind(slot_index)
    sfn, slot = indication.sfn, indication.slot
    if kind == 'U':
      k = self._pick(ues, self._ul_next, lambda u: u.ul_backlog >= 1)
      if k is None:
        return [FapiMessage(MessageKind.UL_TTI_REQUEST, sfn, slot)]
      ue = ues[k]
      self._ul_next = k + 1
      tb = int(min(self.ul_tb_bits, ue.ul_backlog))
      ue.ul_backlog -= tb
      pdus = (Pdu(ue.ue_id, tb),)
      return [FapiMessage(MessageKind.UL_TTI_REQUEST, sfn, slot, pdus),
              FapiMessage(MessageKind.UL_DCI_REQUEST, sfn, slot, pdus)]
    if kind == 'S':
      return [FapiMessage(MessageKind.DL_TTI_REQUEST, sfn, slot)]
    cap = self.harq.ack_bits_per_ue
    k = self._pick(
        ues, self._dl_next,
        lambda u: u.dl_backlog >= 1 and u.dl_slots_used_this_period < cap)
    if k is None:
      return [FapiMessage(MessageKind.DL_TTI_REQUEST, sfn, slot)]
    ue = ues[k]
    self._dl_next = k + 1
    tb = int(min(self.dl_tb_bits, ue.dl_backlog))
    ue.dl_backlog -= tb
    ue.dl_slots_used_this_period += 1
    pdus = (Pdu(ue.ue_id, tb),)
    return [FapiMessage(MessageKind.DL_TTI_REQUEST, sfn, slot, pdus),
            FapiMessage(MessageKind.TX_DATA_REQUEST, sfn, slot, pdus)]

  def discard(self, responses, ues):
    """Puts back the data of grants the L1 dropped."""
    by_id = {ue.ue_id: ue for ue in ues}
    for message in responses:
      for pdu in message.pdus:
        if message.kind == MessageKind.DL_TTI_REQUEST:
          by_id[pdu.ue_id].dl_backlog += pdu.tb_bits
        elif message.kind == MessageKind.UL_TTI_REQUEST:
          by_id[pdu.ue_id].ul_backlog += pdu.tb_bits


def jain_fairness(values):
  """Jain's index (Σx)² / (n·Σx²), 1 for equal shares. All-zero input
  counts as equal shares."""
  values = np.asarray(values, dtype=float)
  if values.size == 0:
    raise ValueError('fairness needs at least one value')
  squares = float(np.sum(values ** 2))
  if squares == 0:
    return 1.0
  return float(np.sum(values) ** 2 / (values.size * squares))


def deadline_audit(trace, budget):
  """Counts DlTtiRequest and UlTtiRequest answers sent more than `budget`
  seconds after their SlotIndication."""
  if not budget > 0:
    raise ValueError('budget must be positive')
  misses = 0
  indicated = None
  for message in trace:
    if message.kind == MessageKind.SLOT_INDICATION:
      indicated = message.timestamp
    elif (message.kind in (MessageKind.DL_TTI_REQUEST,
                           MessageKind.UL_TTI_REQUEST) and
          indicated is not None and
          message.timestamp - indicated > budget + _TIME_TOLERANCE):
      misses += 1
  return misses


@dataclasses.dataclass(frozen=True)
class SimStats:
  """Throughput accounting of a run.

  `dl_bits` and `ul_bits` hold the delivered bits of each UE, by UE id.
  """
  slots_simulated: int
  duration: float
  dl_bits: Tuple[int, ...]
  ul_bits: Tuple[int, ...]
  deadline_misses: int = 0
  message_counts: dict = dataclasses.field(default_factory=dict)

  def _rate(self, bits):
    return bits / self.duration if self.duration > 0 else 0.0

  @property
  def per_ue_dl_bps(self):
    return tuple(self._rate(b) for b in self.dl_bits)

  @property
  def per_ue_ul_bps(self):
    return tuple(self._rate(b) for b in self.ul_bits)

  @property
  def dl_bps(self):
    return self._rate(sum(self.dl_bits))

  @property
  def ul_bps(self):
    return self._rate(sum(self.ul_bits))

  @property
  def fairness(self):
    """Jain's fairness index over per-UE DL throughput."""
    return jain_fairness(self.per_ue_dl_bps)

  @classmethod
  def from_trace(cls, trace, numerology=1, ue_count=None, budget=None):
    """Replays a trace into statistics.

    DL bits come from TxDataRequest and UL bits from RxDataIndication
    records; data of a slot that drew a late-response ErrorIndication is
    left out.
    """
    tick = 1e-3 / 2 ** numerology
    dl = collections.Counter()
    ul = collections.Counter()
    window = []
    slots = 0
    ue_ids = set()

    def close(window):
      late = any(
          m.kind == MessageKind.ERROR_INDICATION and
          m.tlv(ConfigTag.ERROR_CODE) == ErrorCode.LATE_RESPONSE
          for m in window)
      for m in window:
        ue_ids.update(m.ue_ids)
        if m.kind == MessageKind.TX_DATA_REQUEST and not late:
          for pdu in m.pdus:
            dl[pdu.ue_id] += pdu.tb_bits
        elif m.kind == MessageKind.RX_DATA_INDICATION:
          for pdu in m.pdus:
            ul[pdu.ue_id] += pdu.tb_bits

    for message in trace:
      if message.kind == MessageKind.SLOT_INDICATION:
        close(window)
        window = []
        slots += 1
      window.append(message)
    close(window)

    if ue_count is None:
      ue_count = max(ue_ids) + 1 if ue_ids else 0
    return cls(
        slots_simulated=slots,
        duration=slots * tick,
        dl_bits=tuple(dl[u] for u in range(ue_count)),
        ul_bits=tuple(ul[u] for u in range(ue_count)),
        deadline_misses=deadline_audit(trace, budget or tick),
        message_counts=SlotTrace(trace).count_by_kind())

  def summary(self):
    """Statistics as a key=value text block, rates in Mbps."""
    lines = [
        f'slots={self.slots_simulated}',
        f'duration_s={self.duration:g}',
        f'dl_mbps={self.dl_bps / 1e6:.3f}',
        f'ul_mbps={self.ul_bps / 1e6:.3f}',
    ]
    for ue, (dl, ul) in enumerate(zip(self.per_ue_dl_bps, self.per_ue_ul_bps)):
      lines.append(f'ue{ue}_dl_mbps={dl / 1e6:.3f}')
      lines.append(f'ue{ue}_ul_mbps={ul / 1e6:.3f}')
    lines.append(f'fairness={self.fairness:.4f}')
    lines.append(f'deadline_misses={self.deadline_misses}')
    for label, count in sorted(self.message_counts.items()):
      lines.append(f'count_{label}={count}')
    return '\n'.join(lines) + '\n'


class Simulator:
  """Runs a :class:`SimConfig`.

  :meth:`run` is the deterministic event loop driven by the simulated clock.
  :meth:`run_realtime_async` runs L1 and L2 as two asyncio tasks paced by
  real timers; its trace matches :meth:`run` apart from `wall_time`.
  """

  def __init__(self, config=None):
    self.config = config or SimConfig()
    self.reset()

  def reset(self):
    cfg = self.config
    self.clock = SlotClock(cfg.numerology)
    self.l1 = L1(cfg.carrier, cfg.pattern, cfg.harq_feedback_delay,
                 attached=range(cfg.ue_count))
    self.scheduler = MacScheduler(
        cfg.pattern, cfg.dl_bits_per_slot, cfg.ul_bits_per_slot, cfg.harq)
    self.ues = []
    for ue_id in range(cfg.ue_count):
      dl, ul = cfg.traffic_for(ue_id).initial_backlog()
      self.ues.append(UeContext(ue_id, dl, ul))
    self.trace = SlotTrace()
    self._rng = np.random.default_rng(cfg.seed)
    self._events = collections.defaultdict(list)
    for event in cfg.events:
      self._events[event.slot].append(event)
    self._slots_done = 0

  def _start(self):
    messages = handshake(l1=self.l1, timestamp=self.clock.time)
    self.trace.extend(messages)
    if self.l1.halted:
      raise RanError('ProtocolError', 'L1 refused the configuration')

  def _deliver_indications(self, messages):
    for message in messages:
      self.trace.append(message)
      if message.kind == MessageKind.RX_DATA_INDICATION:
        for pdu in message.pdus:
          self.ues[pdu.ue_id].delivered_ul += pdu.tb_bits

  def _begin_slot(self):
    """L1 side of a slot start. Returns the SlotIndication, or None once an
    L2 StopRequest ended the run."""
    k = self.clock.index
    events = self._events.get(k, ())
    if any(e.kind == 'stop' for e in events):
      stop = FapiMessage(
          MessageKind.STOP_REQUEST, self.clock.sfn, self.clock.slot,
          timestamp=self.clock.time)
      self.trace.append(stop)
      self.l1.receive(stop)
      logger.info('Stopped by L2 at slot %d', k)
      return None

    tick = self.config.tick
    for ue in self.ues:
      dl, ul = self.config.traffic_for(ue.ue_id).arrivals(self._rng, tick)
      ue.dl_backlog += dl
      ue.ul_backlog += ul

    indication = self.l1.tick(self.clock)
    self.trace.append(indication)
    self._deliver_indications(self.l1.pending_indications(self.clock))
    for event in events:
      kind = (MessageKind.RACH_INDICATION if event.kind == 'rach'
              else MessageKind.SRS_INDICATION)
      self.trace.append(FapiMessage(
          kind, self.clock.sfn, self.clock.slot, (Pdu(event.ue_id),),
          timestamp=self.clock.time))
    return indication

  def _schedule(self, indication):
    """L2 side: the answers to a SlotIndication, stamped with the latency."""
    responses = self.scheduler.schedule(
        indication, self.ues, self.clock.index)
    timestamp = indication.timestamp + self.config.l2_latency
    return [r.with_timestamp(timestamp) for r in responses]

  def _accept(self, responses, wall_time=None):
    """L1 side of the answers. Late answers are traced, then rejected with an
    ErrorIndication and their grants dropped."""
    if wall_time is not None:
      responses = [r.with_timestamp(r.timestamp, wall_time) for r in responses]
    self.trace.extend(responses)
    late = self.config.l2_latency > self.config.budget + _TIME_TOLERANCE
    if late:
      request = responses[0]
      self.trace.append(FapiMessage(
          MessageKind.ERROR_INDICATION, request.sfn, request.slot,
          tlvs=((ConfigTag.ERROR_CODE, ErrorCode.LATE_RESPONSE),
                (ConfigTag.ERROR_MESSAGE_ID, int(request.kind))),
          timestamp=request.timestamp))
      self.scheduler.discard(responses, self.ues)
      return
    for message in responses:
      rejected = self.l1.receive(message)
      if rejected:
        self.trace.extend(rejected)
        continue
      self.l1.indicate(message, self.clock.index)
      if message.kind == MessageKind.TX_DATA_REQUEST:
        for pdu in message.pdus:
          self.ues[pdu.ue_id].delivered_dl += pdu.tb_bits

  def _finish(self):
    self._deliver_indications(
        self.l1.pending_indications(self.clock, drain=True))
    stats = self._stats()
    if stats.deadline_misses:
      logger.warning('%d L2 responses missed the %.0f us budget',
                     stats.deadline_misses, self.config.budget * 1e6)
    return stats, self.trace

  def _stats(self):
    slots = self._slots_done
    return SimStats(
        slots_simulated=slots,
        duration=slots * self.config.tick,
        dl_bits=tuple(ue.delivered_dl for ue in self.ues),
        ul_bits=tuple(ue.delivered_ul for ue in self.ues),
        deadline_misses=deadline_audit(self.trace, self.config.budget),
        message_counts=self.trace.count_by_kind())

  def run(self):
    """Runs the configured number of slots.

    :returns: A (:class:`SimStats`, :class:`SlotTrace`) tuple.
    """
    self.reset()
    self._start()
    for _ in range(self.config.n_slots):
      indication = self._begin_slot()
      if indication is None:
        break
      self._accept(self._schedule(indication))
      self._slots_done += 1
      self.clock.advance()
    return self._finish()

  async def run_realtime_async(self):
    """Like :meth:`run`, with L1 and L2 as concurrent tasks.

    L1 paces slots on the event loop clock and waits for every L2 answer;
    L2 sleeps `l2_latency` before answering. Lateness is judged on the
    configured latency so the trace stays reproducible, and real overruns
    are logged.
    """
    self.reset()
    self._start()
    loop = asyncio.get_event_loop()
    to_l2 = asyncio.Queue()
    to_l1 = asyncio.Queue()
    latency = self.config.l2_latency

    async def l2_actor():
      while True:
        indication = await to_l2.get()
        if indication is None:
          return
        await asyncio.sleep(latency)
        await to_l1.put(self._schedule(indication))

    l2 = asyncio.ensure_future(l2_actor())
    start = loop.time()
    try:
      for _ in range(self.config.n_slots):
        indication = self._begin_slot()
        if indication is None:
          break
        sent = loop.time()
        await to_l2.put(indication)
        try:
          responses = await asyncio.wait_for(
              to_l1.get(), timeout=RESPONSE_TIMEOUT)
        except asyncio.TimeoutError:
          raise RanError(
              'ProtocolError', f'L2 did not answer slot {self.clock.index}')
        received = loop.time()
        if received - sent > self.config.budget:
          logger.debug('Slot %d answered after %.0f us', self.clock.index,
                       (received - sent) * 1e6)
        self._accept(responses, wall_time=received - start)
        self._slots_done += 1
        self.clock.advance()
        await asyncio.sleep(max(0.0, start + self.clock.time - loop.time()))
    finally:
      await to_l2.put(None)
      await l2
    return self._finish()

  def run_realtime(self):
    return _make_sync(self.run_realtime_async())
