"""Deterministic broadcast CSMA/CA channel engine.

Emulates N fully connected transmitters contending for one shared channel.
Each node has a single pending packet in a time-sorted queue. Every busy
period ("cycle") pops the earliest packet as the transmitter and classifies
each following pending packet against the busy window:

  Collision   scheduled within the sensing delay (PD) of the cycle start;
              it transmits blind and the damaged occupancy extends to
              ptxtime past the latest collider.
  Backoff     scheduled while the channel is busy; the node freezes, draws
              a counter from [0, CW] (first time) or decrements it by the
              whole idle slots observed since its previous counter-zero
              instant, and reschedules to busy_end + AIFS + counter*slot.
  AifsDefer   scheduled in the mandatory idle gap after the transmission
              with no backoff history; it slips by one AIFS (a packet whose
              exhausted counter lands it exactly at the gap end instead
              transmits next).
  PostAifs    clear of the gap; the cycle ends.

After a cycle the transmitter's (and each collider's) next packet enters the
queue at its final transmit time + 1/rate + jitter, which is what gradually
de-synchronizes initially aligned schedules.

All times are unsigned integer nanosecond ticks; jitter draws are quantized
to whole microseconds so every event in the default configuration lands on a
1 us grid. A single seeded PRNG drives everything with a fixed draw order
per cycle: backoff draws in ascending (tx_time, node_id), then
next-emission jitter draws for colliders in join order, then the
transmitter's. Identical (config, trace, seed) therefore reproduces
bit-identical output, in virtual and realtime mode alike.

The default run loop keeps backoff-frozen packets in per-counter buckets
that rebase in O(CW) per cycle (every busy window spans the whole backoff
range when ptxtime > CW*slot, so the literal per-packet reschedule is
quadratic in the backlog). ``reference=True`` runs the plain heap loop
instead; both produce identical results.
"""

from __future__ import annotations

import enum
import math
import queue as _queue
import random
import threading
import time
from bisect import insort
from dataclasses import dataclass, field
from heapq import merge as _heapq_merge
from operator import attrgetter
from typing import Callable, Optional

from .geo import DEFAULT_REFERENCE, GeodeticCoord, geodetic_to_ecef
from .mobility import MobilityTrace
from .pktqueue import PacketQueue, ScheduledPacket
from .radio import FreeSpace, LogDistance, LossModel, RadioParams, resolve_reception
from .telemetry import DEFAULT_WINDOW_NS, MetricsAccumulator, MetricsWindow, RunSummary

US = 1_000
MS = 1_000_000
SEC = 1_000_000_000

# Jitter half-widths for the two scheduling modes.
JITTER_SYNC_NS = 400 * US
JITTER_UNSYNC_NS = 2 * MS


class Branch(enum.Enum):
    COLLISION = "collision"
    BACKOFF = "backoff"
    AIFS_DEFER = "aifs_defer"
    POST_AIFS = "post_aifs"


class EmitterOverrunError(RuntimeError):
    """The realtime consumer fell behind the bounded emission buffer."""


@dataclass(slots=True)
class EngineConfig:
    """All channel and scheduling parameters. Times in ns ticks."""

    n_nodes: int
    slot: int = 13 * US
    sifs: int = 32 * US
    aifsn: int = 2
    cw: int = 15
    pd: int = 5 * US
    ptxtime: int = 900 * US
    tx_rate_hz: float = 5.0
    sinr_th_db: float = 3.0
    tx_power_dbm: float = 20.0
    cable_loss_db: float = 3.0
    noise_floor_dbm: float = -99.0
    jitter: int = JITTER_SYNC_NS
    seed: int = 1
    loss_model: Optional[LossModel] = None
    receiver_model_enabled: bool = False
    log_enabled: bool = False
    duration: int = 40 * SEC
    observer: Optional[GeodeticCoord] = None
    emit_buffer: int = 1024

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if self.slot <= 0:
            raise ValueError("slot must be positive")
        if min(self.sifs, self.aifsn, self.cw, self.pd, self.jitter) < 0:
            raise ValueError("sifs, aifsn, cw, pd and jitter must be nonnegative")
        if not self.pd < self.ptxtime:
            raise ValueError("propagation delay must be below the packet duration")
        if self.tx_rate_hz <= 0:
            raise ValueError("tx_rate_hz must be positive")
        if self.period < 100 * MS:
            raise ValueError("per-node packet period must be at least 100 ms")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.receiver_model_enabled and self.loss_model is None:
            raise ValueError("receiver model requires a loss model")

    @property
    def period(self) -> int:
        return round(SEC / self.tx_rate_hz)

    @property
    def aifs(self) -> int:
        return compute_aifs(self)

    def radio(self) -> RadioParams:
        return RadioParams(self.tx_power_dbm, self.cable_loss_db, self.noise_floor_dbm)


@dataclass(slots=True)
class ChannelContext:
    """State of the busy period being assembled: start, (extended) end, gap end."""

    curr_start: int
    curr_end: int
    aifs_end: int
    damaged: bool = False
    participants: list[tuple[int, int]] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class TransmissionRecord:
    """One channel occupancy event."""

    start: int
    duration: int
    damaged: bool
    participants: tuple[int, ...]       # node ids in join order (transmitter first)
    participant_tx: tuple[int, ...]     # their scheduled times
    winner: Optional[int]               # capture winner among a collision set
    outcomes: tuple[bool, ...]          # per-packet success, aligned with participants

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True)
class SimulationResult:
    records: list[TransmissionRecord]
    windows: list[MetricsWindow]
    summary: RunSummary
    log_entries: Optional[list[tuple]]


def compute_aifs(cfg: EngineConfig) -> int:
    """Mandatory idle gap after each transmission: SIFS + AIFSN * slot."""
    return cfg.sifs + cfg.aifsn * cfg.slot


def classify(ctx: ChannelContext, next_tx: int, cfg: EngineConfig) -> Branch:
    """Branch decision for the next pending packet against the busy window."""
    if next_tx < ctx.curr_start:
        raise AssertionError("queue ordering violated: next before current start")
    if next_tx - ctx.curr_start <= cfg.pd:
        return Branch.COLLISION
    if next_tx < ctx.curr_end:
        return Branch.BACKOFF
    if next_tx <= ctx.aifs_end:
        return Branch.AIFS_DEFER
    return Branch.POST_AIFS


def handle_collision(curr: ScheduledPacket, nxt: ScheduledPacket, ctx: ChannelContext,
                     cfg: EngineConfig) -> ChannelContext:
    """Fold a within-PD packet into the damaged transmission.

    Both collision flags are set and the occupancy extends to ptxtime past
    the collider. The collider's replacement packet enters the queue by the
    end of the cycle (the run loop inserts it after the cycle's backoff
    draws, keeping the PRNG draw order stable).
    """
    curr.collision_flag = True
    nxt.collision_flag = True
    ctx.damaged = True
    ctx.curr_end = nxt.tx_time + cfg.ptxtime
    ctx.aifs_end = ctx.curr_end + compute_aifs(cfg)
    ctx.participants.append((nxt.node_id, nxt.tx_time))
    return ctx


def backoff_retime(pkt: ScheduledPacket, ctx: ChannelContext, cfg: EngineConfig) -> tuple[int, int]:
    """(new counter, new tx_time) for a packet with backoff history.

    The counter drops by the whole idle slots between the packet's previous
    counter-zero instant (tx_time - counter*slot, i.e. the gap end of the
    cycle that deferred it) and the current busy start, floored at zero.
    """
    anchor = pkt.tx_time - pkt.backoff_counter * cfg.slot
    idle = ctx.curr_start - anchor
    bc = pkt.backoff_counter - (idle // cfg.slot if idle > 0 else 0)
    if bc < 0:
        bc = 0
    return bc, ctx.curr_end + compute_aifs(cfg) + bc * cfg.slot


def handle_backoff(pkt: ScheduledPacket, ctx: ChannelContext, cfg: EngineConfig,
                   rng: random.Random) -> ScheduledPacket:
    """Draw or decrement the backoff counter and reschedule past the busy window."""
    if pkt.backoff_counter < 0:
        pkt.backoff_counter = rng.randint(0, cfg.cw)
        pkt.tx_time = ctx.curr_end + compute_aifs(cfg) + pkt.backoff_counter * cfg.slot
    else:
        pkt.backoff_counter, pkt.tx_time = backoff_retime(pkt, ctx, cfg)
    return pkt


def handle_aifs_defer(pkt: ScheduledPacket, cfg: EngineConfig) -> ScheduledPacket:
    """Slip a no-history packet that landed in the post-transmission gap by one AIFS."""
    pkt.tx_time += compute_aifs(cfg)
    return pkt


class Engine:
    """Runs one scenario: per-node emission schedules contending per the rules above."""

    def __init__(self, cfg: EngineConfig, trace: MobilityTrace):
        self.cfg = cfg
        ids = trace.node_ids()
        if len(ids) < cfg.n_nodes:
            raise ValueError(f"trace covers {len(ids)} nodes, config needs {cfg.n_nodes}")
        self.node_ids = ids[: cfg.n_nodes]
        self.trace = trace
        self._rows = {i: trace.records(i) for i in self.node_ids}
        self._row_t_ns = {
            i: [round(r.t * SEC) for r in rows] for i, rows in self._rows.items()
        }
        self._cursor = {i: 0 for i in self.node_ids}
        self._ecef = None
        self._observer_ecef = None
        if cfg.receiver_model_enabled:
            obs = cfg.observer if cfg.observer is not None else DEFAULT_REFERENCE
            p = geodetic_to_ecef(obs)
            self._observer_ecef = (p.x, p.y, p.z)
            self._ecef = {
                i: [geodetic_to_ecef(r.pos) for r in rows] for i, rows in self._rows.items()
            }

    # -- emission bookkeeping -------------------------------------------------

    def _draw_jitter(self, rng: random.Random) -> int:
        return rng.randint(0, 2 * (self.cfg.jitter // US)) * US

    def _make_packet(self, node_id: int, tx_time: int) -> ScheduledPacket:
        times = self._row_t_ns[node_id]
        cur = self._cursor[node_id]
        while cur + 1 < len(times) and times[cur + 1] <= tx_time:
            cur += 1
        self._cursor[node_id] = cur
        return ScheduledPacket(node_id, tx_time, False, -1, self._rows[node_id][cur])

    def _distance_to_observer(self, node_id: int, tx_time: int, acc: MetricsAccumulator) -> float:
        times = self._row_t_ns[node_id]
        cur = self._cursor[node_id]
        while cur + 1 < len(times) and times[cur + 1] <= tx_time:
            cur += 1
        p = self._ecef[node_id][cur]
        ox, oy, oz = self._observer_ecef
        d = math.sqrt((p.x - ox) ** 2 + (p.y - oy) ** 2 + (p.z - oz) ** 2)
        if d < 1.0:
            acc.distance_clamps += 1
        return d

    def _resolve_capture(self, participants: list[tuple[int, int]],
                         acc: MetricsAccumulator) -> Optional[int]:
        entries = [
            (nid, self._distance_to_observer(nid, tx, acc), tx) for nid, tx in participants
        ]
        return resolve_reception(entries, self.cfg.radio(), self.cfg.loss_model,
                                 self.cfg.sinr_th_db)

    # -- public API -------------------------------------------------------------

    def run(self, mode: str = "virtual",
            consumer: Optional[Callable[[TransmissionRecord], None]] = None,
            reference: bool = False) -> SimulationResult:
        """Execute the scenario to completion.

        virtual mode collects records synchronously; realtime mode releases
        each record to ``consumer`` at wall-clock time proportional to its
        start while the engine keeps computing, blocking only on the bounded
        emission buffer. Record streams are identical in both modes.
        """
        if mode not in ("virtual", "realtime"):
            raise ValueError(f"unknown mode {mode!r}")
        emitter = None
        if mode == "realtime":
            if consumer is None:
                raise ValueError("realtime mode needs a consumer")
            emitter = _RealtimeEmitter(consumer, self.cfg.emit_buffer)

        started = time.perf_counter()
        if reference or self.cfg.ptxtime <= self.cfg.cw * self.cfg.slot:
            result = self._run_serial(emitter)
        else:
            result = self._run_fast(emitter)
        if emitter is not None:
            emitter.finish()
        wall = time.perf_counter() - started

        records, acc, log_entries, lapsed = result
        return SimulationResult(
            records=records,
            windows=acc.windows,
            summary=acc.summary(lapsed, wall),
            log_entries=log_entries,
        )

    # -- shared per-cycle tail: record, telemetry, log, replacements -----------

    def _finish_cycle(self, ctx, packets, rng, heap, acc, records, log, emitter):
        cfg = self.cfg
        damaged = ctx.damaged
        winner = None
        if damaged and cfg.receiver_model_enabled:
            winner = self._resolve_capture(ctx.participants, acc)
        outcomes = tuple(
            (not damaged) or (nid == winner) for nid, _ in ctx.participants
        )
        errors = sum(1 for ok in outcomes if not ok)
        rec = TransmissionRecord(
            start=ctx.curr_start,
            duration=ctx.curr_end - ctx.curr_start,
            damaged=damaged,
            participants=tuple(nid for nid, _ in ctx.participants),
            participant_tx=tuple(tx for _, tx in ctx.participants),
            winner=winner,
            outcomes=outcomes,
        )
        if log is not None:
            win = acc.last_complete_window(ctx.curr_start)
            cbp = 100.0 * win.cbr if win is not None else 0.0
            rate = (100.0 * acc.success_packets / acc.tx_packets) if acc.tx_packets else 0.0
            log.append(("status", damaged, rec.participants[0], rec.duration,
                        cbp, rate, ctx.aifs_end))
        acc.record_transmission(rec.start, rec.duration, len(rec.participants), errors,
                                damaged, winner is not None)
        records.append(rec)
        if emitter is not None:
            emitter.put(rec)

        # replacement emissions: colliders in join order, then the transmitter
        for pkt in packets[1:] + packets[:1]:
            base = pkt.tx_time + cfg.period
            if base < cfg.duration:
                heap.insert(self._make_packet(pkt.node_id, base + self._draw_jitter(rng)))
        return ctx.aifs_end

    # -- reference implementation: plain heap loop ------------------------------

    def _run_serial(self, emitter):
        cfg = self.cfg
        rng = random.Random(cfg.seed)
        acc = MetricsAccumulator(cfg.duration)
        heap = PacketQueue()
        log: Optional[list[tuple]] = [("header", cfg.n_nodes)] if cfg.log_enabled else None
        records: list[TransmissionRecord] = []

        for node_id in self.node_ids:
            base = self._row_t_ns[node_id][0]
            heap.insert(self._make_packet(node_id, base + self._draw_jitter(rng)))

        lapsed = 0
        while heap:
            curr = heap.pop_min()
            ctx = ChannelContext(
                curr_start=curr.tx_time,
                curr_end=curr.tx_time + cfg.ptxtime,
                aifs_end=curr.tx_time + cfg.ptxtime + cfg.aifs,
                participants=[(curr.node_id, curr.tx_time)],
            )
            packets = [curr]
            while heap:
                nxt = heap.peek()
                branch = classify(ctx, nxt.tx_time, cfg)
                if branch is Branch.POST_AIFS:
                    break
                if branch is Branch.AIFS_DEFER and nxt.backoff_counter >= 0:
                    # backoff history: resume the countdown after the gap; a
                    # no-op retime means the counter is exhausted and the
                    # packet transmits next
                    bc, t_new = backoff_retime(nxt, ctx, cfg)
                    if t_new == nxt.tx_time:
                        break
                    heap.pop_min()
                    nxt.backoff_counter, nxt.tx_time = bc, t_new
                    heap.insert(nxt)
                    continue
                if log is not None:
                    log.append(("buffer", self._snapshot_serial(packets[0], heap)))
                heap.pop_min()
                if branch is Branch.COLLISION:
                    handle_collision(curr, nxt, ctx, cfg)
                    packets.append(nxt)
                    if log is not None:
                        log.append(("collision", nxt.node_id, nxt.tx_time - ctx.curr_start))
                elif branch is Branch.BACKOFF:
                    handle_backoff(nxt, ctx, cfg, rng)
                    heap.insert(nxt)
                    if log is not None:
                        log.append(("backoff", nxt.node_id, nxt.backoff_counter))
                else:
                    handle_aifs_defer(nxt, cfg)
                    heap.insert(nxt)
                    if log is not None:
                        log.append(("defer", nxt.node_id))
            if log is not None:
                log.append(("buffer", self._snapshot_serial(packets[0], heap)))
            lapsed = self._finish_cycle(ctx, packets, rng, heap, acc, records, log, emitter)
        return records, acc, log, lapsed

    @staticmethod
    def _snapshot_serial(curr: ScheduledPacket, heap: PacketQueue) -> list[tuple[int, int]]:
        return [(curr.node_id, curr.tx_time)] + [
            (p.node_id, p.tx_time) for p in heap.snapshot()
        ]

    # -- fast implementation: heap + per-counter backoff buckets ---------------

    def _run_fast(self, emitter):
        cfg = self.cfg
        rng = random.Random(cfg.seed)
        acc = MetricsAccumulator(cfg.duration)
        heap = PacketQueue()
        log: Optional[list[tuple]] = [("header", cfg.n_nodes)] if cfg.log_enabled else None
        records: list[TransmissionRecord] = []

        slot = cfg.slot
        pd = cfg.pd
        ptx = cfg.ptxtime
        aifs = cfg.aifs
        cw1 = cfg.cw + 1
        by_id = attrgetter("node_id")

        buckets: list[list[ScheduledPacket]] = [[] for _ in range(cw1)]
        pool_anchor = 0
        pool_size = 0

        for node_id in self.node_ids:
            base = self._row_t_ns[node_id][0]
            heap.insert(self._make_packet(node_id, base + self._draw_jitter(rng)))

        def pool_min() -> Optional[tuple[int, int, int]]:
            for b in range(cw1):
                if buckets[b]:
                    return (pool_anchor + b * slot, buckets[b][0].node_id, b)
            return None

        lapsed = 0
        while heap or pool_size:
            # 1. transmitter = earliest pending packet across both stores
            pm = pool_min() if pool_size else None
            hp = heap._heap[0] if len(heap) else None
            if pm is not None and (hp is None or (pm[0], pm[1]) < (hp.tx_time, hp.node_id)):
                curr = buckets[pm[2]].pop(0)
                curr.tx_time = pm[0]
                pool_size -= 1
            else:
                curr = heap.pop_min()
            S = curr.tx_time
            E = S + ptx
            pd_end = S + pd
            ctx = ChannelContext(S, E, E + aifs, False, [(curr.node_id, S)])
            packets = [curr]

            # 2. collision sweep: everything scheduled within PD of the start.
            # Bucket ticks falling in the window collide whole (same tick);
            # heap packets merge in by (tx_time, node_id).
            pcands: list[ScheduledPacket] = []
            if pool_size:
                for b in range(cw1):
                    tick = pool_anchor + b * slot
                    if tick > pd_end:
                        break
                    if buckets[b]:
                        for p in buckets[b]:
                            p.tx_time = tick
                        pcands.extend(buckets[b])
                        pool_size -= len(buckets[b])
                        buckets[b] = []
            pi = 0
            while True:
                pk = pcands[pi] if pi < len(pcands) else None
                hk = heap._heap[0] if len(heap) else None
                if hk is not None and hk.tx_time > pd_end:
                    hk = None
                if pk is None and hk is None:
                    break
                if hk is None or (pk is not None and pk.key() <= hk.key()):
                    nxt = pk
                    pi += 1
                else:
                    nxt = heap.pop_min()
                if log is not None:
                    log.append(("buffer", self._snapshot_fast(packets, pi, pcands, heap,
                                                              buckets, pool_anchor, slot, cw1,
                                                              extra=nxt)))
                    log.append(("collision", nxt.node_id, nxt.tx_time - S))
                handle_collision(curr, nxt, ctx, cfg)
                packets.append(nxt)
            E = ctx.curr_end
            A = ctx.aifs_end

            # 3. rebase the surviving backoff pool to the new gap end
            if pool_size:
                k = (S - pool_anchor) // slot
                if k > 0:
                    kk = min(k, cw1 - 1)
                    zero = list(_heapq_merge(*buckets[: kk + 1], key=by_id))
                    del buckets[: kk]
                    buckets[0] = zero
                    buckets.extend([] for _ in range(kk))
            pool_anchor = A
            bucket0 = buckets[0]

            # 4. heap sweep: backoff draws and AIFS deferrals in time order
            while len(heap):
                pkt = heap._heap[0]
                t = pkt.tx_time
                if t > A:
                    break
                if t == A and bucket0 and bucket0[0].node_id < pkt.node_id:
                    break    # an exhausted-counter packet transmits next
                heap.pop_min()
                if log is not None:
                    log.append(("buffer", self._snapshot_fast(packets, len(pcands), pcands,
                                                              heap, buckets, pool_anchor,
                                                              slot, cw1, extra=pkt)))
                if t < E:
                    bc = rng.randint(0, cfg.cw)
                    pkt.backoff_counter = bc
                    pkt.tx_time = A + bc * slot
                    insort(buckets[bc], pkt, key=by_id)
                    pool_size += 1
                    if log is not None:
                        log.append(("backoff", pkt.node_id, bc))
                else:
                    pkt.tx_time = t + aifs
                    heap.insert(pkt)
                    if log is not None:
                        log.append(("defer", pkt.node_id))

            # 5. transmit, account, and schedule the replacements
            if log is not None:
                log.append(("buffer", self._snapshot_fast(packets, len(pcands), pcands, heap,
                                                          buckets, pool_anchor, slot, cw1)))
            lapsed = self._finish_cycle(ctx, packets, rng, heap, acc, records, log, emitter)
        return records, acc, log, lapsed

    @staticmethod
    def _snapshot_fast(packets, pi, pcands, heap, buckets, pool_anchor, slot, cw1,
                       extra=None) -> list[tuple[int, int]]:
        pend = [(p.node_id, p.tx_time) for p in heap.snapshot()]
        pend += [(p.node_id, p.tx_time) for p in pcands[pi:]]
        if extra is not None:
            pend.append((extra.node_id, extra.tx_time))
        for b in range(cw1):
            pend += [(p.node_id, pool_anchor + b * slot) for p in buckets[b]]
        pend.sort(key=lambda e: (e[1], e[0]))
        return [(packets[0].node_id, packets[0].tx_time)] + pend


class _RealtimeEmitter:
    """Paced hand-off of finished records to a consumer on a worker thread.

    Records cross as immutable values through a bounded queue; delivery for a
    record happens at run start + record.start (wall clock). The engine
    blocks only when the buffer is full, and a consumer stalled past the
    put timeout surfaces as EmitterOverrunError.
    """

    _SENTINEL = object()
    _PUT_TIMEOUT_S = 10.0
    _SPIN_S = 0.002

    def __init__(self, consumer: Callable[[TransmissionRecord], None], buffer: int):
        self._consumer = consumer
        self._q: _queue.Queue = _queue.Queue(maxsize=max(1, buffer))
        self._t0 = time.monotonic()
        self._error: Optional[BaseException] = None
        self._thread = threading.Thread(target=self._pump, daemon=True)
        self._thread.start()

    def _pump(self):
        while True:
            rec = self._q.get()
            if rec is self._SENTINEL:
                return
            target = self._t0 + rec.start / SEC
            delay = target - time.monotonic()
            if delay > self._SPIN_S:
                time.sleep(delay - self._SPIN_S)
            while time.monotonic() < target:
                pass
            try:
                self._consumer(rec)
            except BaseException as exc:   # surface on the engine thread
                self._error = exc
                return

    def put(self, rec: TransmissionRecord) -> None:
        if self._error is not None:
            raise EmitterOverrunError("realtime consumer failed") from self._error
        try:
            self._q.put(rec, timeout=self._PUT_TIMEOUT_S)
        except _queue.Full:
            raise EmitterOverrunError(
                f"realtime consumer stalled beyond the {self._q.maxsize}-record buffer"
            ) from None

    def finish(self) -> None:
        self._q.put(self._SENTINEL)
        self._thread.join()
        if self._error is not None:
            raise EmitterOverrunError("realtime consumer failed") from self._error


def run_simulation(cfg: EngineConfig, trace: MobilityTrace, mode: str = "virtual",
                   consumer: Optional[Callable[[TransmissionRecord], None]] = None,
                   reference: bool = False) -> SimulationResult:
    """Convenience wrapper: build an Engine and run it."""
    return Engine(cfg, trace).run(mode=mode, consumer=consumer, reference=reference)
