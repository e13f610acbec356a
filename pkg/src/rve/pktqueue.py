"""Time-sorted packet queue: a binary min-heap keyed by (tx_time, node_id).

The heap is array-backed and complete; every parent's key is <= both
children's. Equal transmission times break toward the lower node id so the
pop order is fully deterministic. Sift operations count their swaps, which
stays within ceil(log2(n+1)) per operation.

Single-owner structure: not safe for concurrent mutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .mobility import BsmRecord


class EmptyQueueError(Exception):
    """pop/peek on an empty queue."""


@dataclass(slots=True)
class ScheduledPacket:
    """A pending broadcast: payload plus MAC bookkeeping.

    collision_flag starts clear and backoff_counter starts at -1 (no backoff
    history); the counter otherwise stays within [0, CW].
    """

    node_id: int
    tx_time: int                    # engine ticks (ns)
    collision_flag: bool = False
    backoff_counter: int = -1
    bsm: Optional["BsmRecord"] = None

    def key(self) -> tuple[int, int]:
        return (self.tx_time, self.node_id)


@dataclass
class PacketQueue:
    """Growable array min-heap of ScheduledPacket."""

    _heap: list[ScheduledPacket] = field(default_factory=list)
    last_op_swaps: int = 0
    total_swaps: int = 0

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)

    def insert(self, p: ScheduledPacket) -> None:
        """Append at the end of the tree, then sift up."""
        heap = self._heap
        heap.append(p)
        i = len(heap) - 1
        key = p.key()
        swaps = 0
        while i > 0:
            parent = (i - 1) >> 1
            if heap[parent].key() <= key:
                break
            heap[i] = heap[parent]
            i = parent
            swaps += 1
        heap[i] = p
        self.last_op_swaps = swaps
        self.total_swaps += swaps

    def peek(self) -> ScheduledPacket:
        """Earliest-scheduled packet without removal."""
        if not self._heap:
            raise EmptyQueueError("peek on empty packet queue")
        return self._heap[0]

    def pop_min(self) -> ScheduledPacket:
        """Remove and return the earliest packet: swap in the last node, sift down."""
        heap = self._heap
        if not heap:
            raise EmptyQueueError("pop on empty packet queue")
        top = heap[0]
        last = heap.pop()
        n = len(heap)
        if n == 0:
            self.last_op_swaps = 0
            return top
        key = last.key()
        i = 0
        swaps = 0
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            right = child + 1
            if right < n and heap[right].key() < heap[child].key():
                child = right
            if heap[child].key() >= key:
                break
            heap[i] = heap[child]
            i = child
            swaps += 1
        heap[i] = last
        self.last_op_swaps = swaps
        self.total_swaps += swaps
        return top

    def snapshot(self) -> list[ScheduledPacket]:
        """Pending packets in full (tx_time, node_id) order; queue untouched."""
        return sorted(self._heap, key=ScheduledPacket.key)

    def check_heap_property(self) -> bool:
        """Full scan of the parent/child ordering (test hook)."""
        heap = self._heap
        for i in range(1, len(heap)):
            if heap[(i - 1) >> 1].key() > heap[i].key():
                return False
        return True
