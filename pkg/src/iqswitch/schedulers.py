"""The five scheduling algorithms behind one slot-level interface.

These are the readable, object-based implementations used for small
simulations, fuzzing, and as the semantic reference that the JIT kernels in
``_kernels`` are pinned against.  QPS-family schedulers consume per-slot
uniform windows (2N doubles: N sampling draws, then shuffle draws) so that
the Python and kernel paths see identical randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import AvailabilityBitmap, JointCalendar, Matching, VoqMatrix, first_fit
from .sampling import QpsSampler

ALGORITHMS = ("sbqps", "swqps", "qps1", "islip", "mwm")
DEFAULT_KNOCKOUT = 3


@dataclass
class Proposal:
    """One input's request to one output: its VOQ length and, for the
    batch/window algorithms, its availability bitmap."""

    input: int
    voq_len: int
    avail: AvailabilityBitmap | None = None


def window_size(N: int) -> int:
    """Uniform draws consumed per slot by a QPS-family scheduler."""
    return 2 * N


def _propose_window(voqs: VoqMatrix, samplers: list[QpsSampler],
                    with_bitmaps: bool, cal: JointCalendar | None,
                    window: np.ndarray) -> list[tuple[Proposal, int]]:
    """Proposals in arrival order plus their target outputs.

    Sampling consumes window[i] per input i; the arrival-order shuffle (a
    stand-in for physical race arrival) consumes window[N:] via
    Fisher-Yates.  The advertised VOQ length is the sampler's weight, i.e.
    the packets still waiting to be scheduled.
    """
    N = voqs.N
    props: list[tuple[Proposal, int]] = []
    for i in range(N):
        j = samplers[i].draw_at(window[i])
        if j is None:
            continue
        avail = cal.in_avail[i] if with_bitmaps and cal is not None else None
        props.append((Proposal(i, samplers[i].weight(j), avail), j))
    cnt = len(props)
    for k in range(cnt - 1, 0, -1):
        r = int(window[N + (cnt - 1 - k)] * (k + 1))
        props[k], props[r] = props[r], props[k]
    return props


def qps_propose_all(voqs: VoqMatrix, samplers: list[QpsSampler],
                    with_bitmaps: bool, rng: np.random.Generator,
                    cal: JointCalendar | None = None) -> list[list[Proposal]]:
    """Queue-proportionally sample one proposal per nonempty input; returns
    per-output proposal lists in arrival order."""
    window = rng.random(window_size(voqs.N))
    per_output: list[list[Proposal]] = [[] for _ in range(voqs.N)]
    for prop, j in _propose_window(voqs, samplers, with_bitmaps, cal, window):
        per_output[j].append(prop)
    return per_output


def knockout(proposals: list[Proposal], K: int) -> list[Proposal]:
    """Keep only the first min(K, len) proposals in arrival order."""
    if K < 1:
        raise ValueError("knockout threshold must be >= 1")
    return proposals[:K]


def ffa_accept(output: int, proposals: list[Proposal],
               cal: JointCalendar) -> list[tuple[int, int]]:
    """First Fit Accepting at one output.

    Proposals are taken in descending VOQ length (ties in arrival order);
    each is committed at the earliest slot available in both the proposal's
    bitmap and the output's current bitmap, or rejected if none exists.
    Returns the accepted (input, slot) pairs.
    """
    order = sorted(range(len(proposals)),
                   key=lambda k: (-proposals[k].voq_len, k))
    accepted: list[tuple[int, int]] = []
    for k in order:
        p = proposals[k]
        s = first_fit(p.avail, cal.out_avail[output])
        if s is not None:
            cal.commit(s, p.input, output)
            accepted.append((p.input, s))
    return accepted


class _QpsBase:
    """Sampler bank whose weights track the packets not yet scheduled.

    For the calendar algorithms a weight is consumed when a cell is
    committed (the packet is in the calendar, no longer waiting), so serving
    the cell later does not touch the sampler.  QPS-1 has no calendar and
    consumes the weight at departure instead.
    """

    serve_updates_weights = False

    def __init__(self, N: int):
        self.N = N
        self.samplers = [QpsSampler(N) for _ in range(N)]

    def on_arrival(self, i: int, j: int) -> None:
        self.samplers[i].update(j, 1)

    def on_departure(self, i: int, j: int) -> None:
        if self.serve_updates_weights:
            self.samplers[i].update(j, -1)

    def _iteration(self, voqs: VoqMatrix, window: np.ndarray,
                   cal: JointCalendar, K: int) -> None:
        per_output: dict[int, list[Proposal]] = {}
        for prop, j in _propose_window(voqs, self.samplers, True, cal, window):
            per_output.setdefault(j, []).append(prop)
        for j, props in per_output.items():
            for i, _slot in ffa_accept(j, knockout(props, K), cal):
                self.samplers[i].update(j, -1)


class SbQps(_QpsBase):
    """Small-batch QPS: T iterations fill a calendar that is then executed
    as the crossbar configurations of the next T slots."""

    kind = "sbqps"

    def __init__(self, N: int, T: int, K: int = DEFAULT_KNOCKOUT):
        super().__init__(N)
        self.T = T
        self.K = K
        self.cal = JointCalendar(T, N)
        self.pending: list[Matching] | None = None

    def slot(self, voqs: VoqMatrix, now: int, window: np.ndarray) -> Matching:
        self._iteration(voqs, window, self.cal, self.K)
        m = self.pending[now % self.T] if self.pending is not None else Matching()
        if (now + 1) % self.T == 0:
            self.pending = self.cal.graduate_batch()
        return m


class SwQps(_QpsBase):
    """Sliding-window QPS: one matching graduates per slot, then one
    propose/accept iteration runs against the slid window.

    The row graduating at slot t receives no commits during slot t itself
    (its window of opportunity was the previous T slots), so a packet
    arriving at t can be scheduled no earlier than slot t+1.
    """

    kind = "swqps"

    def __init__(self, N: int, T: int, K: int = DEFAULT_KNOCKOUT):
        super().__init__(N)
        self.T = T
        self.K = K
        self.cal = JointCalendar(T, N)

    def slot(self, voqs: VoqMatrix, now: int, window: np.ndarray) -> Matching:
        m = self.cal.graduate_and_slide()
        self._iteration(voqs, window, self.cal, self.K)
        return m


class Qps1(_QpsBase):
    """QPS with a single iteration: every output accepts at most one
    proposal for this slot.

    The default accepting rule takes the largest VOQ length (ties in
    arrival order); accept="random" takes the first proposal to arrive,
    i.e. a uniformly random one.
    """

    kind = "qps1"
    serve_updates_weights = True

    def __init__(self, N: int, accept: str = "longest"):
        super().__init__(N)
        if accept not in ("longest", "random"):
            raise ValueError(f"unknown qps1 accept rule {accept!r}")
        self.accept_longest = accept == "longest"

    def slot(self, voqs: VoqMatrix, now: int, window: np.ndarray) -> Matching:
        best: dict[int, Proposal] = {}
        for prop, j in _propose_window(voqs, self.samplers, False, None, window):
            cur = best.get(j)
            if cur is None or (self.accept_longest and prop.voq_len > cur.voq_len):
                best[j] = prop
        m = Matching()
        for j, prop in best.items():
            m.add(prop.input, j)
        return m


def islip_iterations(N: int) -> int:
    return max(1, math.ceil(math.log2(N)))


class Islip:
    """iSLIP: round-robin request/grant/accept, ceil(log2 N) iterations.

    Grant and accept pointers advance one past the matched port only when
    the grant is accepted in the first iteration, which desynchronizes the
    pointers under backlog.
    """

    kind = "islip"

    def __init__(self, N: int):
        self.N = N
        self.grant_ptr = [0] * N
        self.accept_ptr = [0] * N

    def slot(self, voqs: VoqMatrix, now: int, window=None) -> Matching:
        N = self.N
        row: dict[int, int] = {}
        matched_in: set[int] = set()
        for it in range(islip_iterations(N)):
            grants: list[tuple[int, int]] = []
            for o in range(N):
                if o in row:
                    continue
                for d in range(N):
                    i = (self.grant_ptr[o] + d) % N
                    if i not in matched_in and voqs.lengths[i, o] > 0:
                        grants.append((o, i))
                        break
            if not grants:
                break
            best: dict[int, tuple[int, int]] = {}
            for o, i in grants:
                dist = (o - self.accept_ptr[i]) % N
                if i not in best or dist < best[i][0]:
                    best[i] = (dist, o)
            for i, (_, o) in best.items():
                row[o] = i
                matched_in.add(i)
                if it == 0:
                    self.grant_ptr[o] = (i + 1) % N
                    self.accept_ptr[i] = (o + 1) % N
        m = Matching()
        for o, i in row.items():
            m.add(i, o)
        return m


class Mwm:
    """Exact maximum-weight matching on VOQ lengths (assignment solver)."""

    kind = "mwm"

    def __init__(self, N: int):
        self.N = N

    def slot(self, voqs: VoqMatrix, now: int, window=None) -> Matching:
        return mwm_matching(voqs.lengths)


def mwm_matching(lengths: np.ndarray) -> Matching:
    """Maximum-weight matching of the VOQ bipartite graph, exact.

    Zero-weight pairs are dropped from the assignment, so only edges with a
    nonempty VOQ appear in the result.
    """
    rows, cols = linear_sum_assignment(lengths, maximize=True)
    m = Matching()
    for i, j in zip(rows.tolist(), cols.tolist()):
        if lengths[i, j] > 0:
            m.add(i, j)
    return m


def make_scheduler(kind: str, N: int, T: int = 16, K: int = DEFAULT_KNOCKOUT,
                   qps1_accept: str = "longest"):
    if kind == "sbqps":
        return SbQps(N, T, K)
    if kind == "swqps":
        return SwQps(N, T, K)
    if kind == "qps1":
        return Qps1(N, qps1_accept)
    if kind == "islip":
        return Islip(N)
    if kind == "mwm":
        return Mwm(N)
    raise ValueError(f"unknown algorithm {kind!r}")
