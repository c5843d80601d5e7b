"""Core domain types for crossbar scheduling: VOQs, matchings, availability
bitmaps, and the joint calendar.

Conventions used throughout the package:

* Ports and time slots are 0-indexed.
* An availability bitmap stores bit ``t`` (LSB = slot 0) as 1 iff the owning
  port is still unmatched at relative slot ``t`` of the current batch/window.
* A joint calendar is a ``T x N`` table; the cell at row ``t``, column ``o``
  holds the input port paired with output ``o`` at relative slot ``t``
  (or -1 when unmatched).  Row matchings are derived views of the columns.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator

import numpy as np

UNMATCHED = -1


@dataclass(frozen=True)
class Packet:
    """A fixed-length packet: one slot to transmit, destined to one output."""

    arrival_slot: int
    dest: int


class Matching:
    """A partial one-to-one pairing of inputs to outputs (a crossbar schedule)."""

    __slots__ = ("_in_to_out", "_out_to_in")

    def __init__(self, pairs: dict[int, int] | None = None):
        self._in_to_out: dict[int, int] = {}
        self._out_to_in: dict[int, int] = {}
        if pairs:
            for i, o in pairs.items():
                self.add(i, o)

    def add(self, inp: int, out: int) -> None:
        if inp in self._in_to_out:
            raise ValueError(f"input {inp} already matched")
        if out in self._out_to_in:
            raise ValueError(f"output {out} already matched")
        self._in_to_out[inp] = out
        self._out_to_in[out] = inp

    def output_of(self, inp: int) -> int | None:
        return self._in_to_out.get(inp)

    def input_of(self, out: int) -> int | None:
        return self._out_to_in.get(out)

    def pairs(self) -> Iterator[tuple[int, int]]:
        return iter(sorted(self._in_to_out.items()))

    def weight(self, lengths: np.ndarray) -> int:
        return int(sum(lengths[i, o] for i, o in self._in_to_out.items()))

    def __len__(self) -> int:
        return len(self._in_to_out)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Matching) and self._in_to_out == other._in_to_out

    def __repr__(self) -> str:
        body = ", ".join(f"{i}->{o}" for i, o in self.pairs())
        return f"Matching({{{body}}})"


class AvailabilityBitmap:
    """T-bit availability vector for one port.

    Backed by a Python int, so any T works; for T <= 64 this is one machine
    word as far as the bit operations are concerned.
    """

    __slots__ = ("T", "bits")

    def __init__(self, T: int, bits: int | None = None):
        if T < 1:
            raise ValueError("T must be >= 1")
        self.T = T
        full = (1 << T) - 1
        self.bits = full if bits is None else bits & full

    @classmethod
    def from_string(cls, s: str) -> "AvailabilityBitmap":
        """Parse a bitmap written slot-0-first, e.g. '110010' has slot 0 free."""
        bits = 0
        for t, ch in enumerate(s):
            if ch == "1":
                bits |= 1 << t
        return cls(len(s), bits)

    def to_string(self) -> str:
        return "".join("1" if self.is_free(t) else "0" for t in range(self.T))

    def is_free(self, t: int) -> bool:
        return (self.bits >> t) & 1 == 1

    def set_busy(self, t: int) -> None:
        self.bits &= ~(1 << t)

    def set_free(self, t: int) -> None:
        self.bits |= 1 << t

    def all_free(self) -> bool:
        return self.bits == (1 << self.T) - 1

    def slide(self) -> None:
        """Drop slot 0, shift the rest down, shift a free slot in at T-1."""
        self.bits = (self.bits >> 1) | (1 << (self.T - 1))

    def reset(self) -> None:
        self.bits = (1 << self.T) - 1

    def __repr__(self) -> str:
        return f"AvailabilityBitmap({self.to_string()!r})"


def first_fit(b_in: AvailabilityBitmap, b_out: AvailabilityBitmap) -> int | None:
    """Earliest relative slot where both bitmaps have a 1, or None.

    This is the first-fit primitive of FFA: the first set bit of the
    bitwise AND of the two availability bitmaps.
    """
    if b_in.T != b_out.T:
        raise ValueError(f"bitmap lengths differ: {b_in.T} != {b_out.T}")
    both = b_in.bits & b_out.bits
    if both == 0:
        return None
    return (both & -both).bit_length() - 1


class VoqMatrix:
    """N x N virtual output queues of packets, FIFO per queue.

    ``lengths`` caches the queue sizes and is what the schedulers read as
    edge weights; it is kept exact on every push/pop.
    """

    def __init__(self, N: int):
        if N < 1:
            raise ValueError("N must be >= 1")
        self.N = N
        self.queues: list[list[deque[Packet]]] = [
            [deque() for _ in range(N)] for _ in range(N)
        ]
        self.lengths = np.zeros((N, N), dtype=np.int64)

    def push(self, i: int, j: int, arrival_slot: int) -> None:
        q = self.queues[i][j]
        if q and arrival_slot < q[-1].arrival_slot:
            raise ValueError("FIFO order violated: arrival slots must be non-decreasing")
        q.append(Packet(arrival_slot, j))
        self.lengths[i, j] += 1

    def pop(self, i: int, j: int) -> Packet:
        """Dequeue and return the head packet."""
        self.lengths[i, j] -= 1
        return self.queues[i][j].popleft()

    def length(self, i: int, j: int) -> int:
        return int(self.lengths[i, j])

    def row_total(self, i: int) -> int:
        return int(self.lengths[i].sum())

    def backlog(self) -> int:
        return int(self.lengths.sum())

    def check_consistent(self) -> None:
        for i in range(self.N):
            for j in range(self.N):
                assert self.lengths[i, j] == len(self.queues[i][j])
                q = self.queues[i][j]
                assert all(p.dest == j for p in q)
                slots = [p.arrival_slot for p in q]
                assert all(a <= b for a, b in zip(slots, slots[1:]))


class JointCalendar:
    """The T x N table of matchings-under-computation plus the per-port
    availability bitmaps, kept mutually consistent.
    """

    def __init__(self, T: int, N: int):
        if T < 1 or N < 1:
            raise ValueError("T and N must be >= 1")
        self.T = T
        self.N = N
        self.cells: list[list[int]] = [[UNMATCHED] * N for _ in range(T)]
        self.in_avail = [AvailabilityBitmap(T) for _ in range(N)]
        self.out_avail = [AvailabilityBitmap(T) for _ in range(N)]

    def commit(self, slot: int, inp: int, out: int) -> None:
        """Pair (inp, out) at relative slot ``slot``; both must be available."""
        if not self.in_avail[inp].is_free(slot):
            raise ValueError(f"input {inp} not available at slot {slot}")
        if not self.out_avail[out].is_free(slot):
            raise ValueError(f"output {out} not available at slot {slot}")
        self.cells[slot][out] = inp
        self.in_avail[inp].set_busy(slot)
        self.out_avail[out].set_busy(slot)

    def row_matching(self, t: int) -> Matching:
        m = Matching()
        for o in range(self.N):
            i = self.cells[t][o]
            if i != UNMATCHED:
                m.add(i, o)
        return m

    def graduate_batch(self) -> list[Matching]:
        """Return all T rows in slot order and reset to an empty calendar."""
        rows = [self.row_matching(t) for t in range(self.T)]
        for t in range(self.T):
            self.cells[t] = [UNMATCHED] * self.N
        for b in self.in_avail:
            b.reset()
        for b in self.out_avail:
            b.reset()
        return rows

    def graduate_and_slide(self) -> Matching:
        """Pop row 0 as the crossbar configuration, shift the rest down one
        slot, and enroll a fresh empty row at T-1.
        """
        m = self.row_matching(0)
        self.cells.pop(0)
        self.cells.append([UNMATCHED] * self.N)
        for b in self.in_avail:
            b.slide()
        for b in self.out_avail:
            b.slide()
        return m

    def check_consistent(self) -> None:
        """Recompute bitmaps from the rows and compare with the stored ones."""
        for p in range(self.N):
            in_bits = 0
            out_bits = 0
            for t in range(self.T):
                row = self.cells[t]
                if p not in row:
                    in_bits |= 1 << t
                if row[p] == UNMATCHED:
                    out_bits |= 1 << t
            assert in_bits == self.in_avail[p].bits, f"input {p} bitmap inconsistent"
            assert out_bits == self.out_avail[p].bits, f"output {p} bitmap inconsistent"
        for t in range(self.T):
            self.row_matching(t)  # raises if a row is not a valid matching
