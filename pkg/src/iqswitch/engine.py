"""The time-slot simulation loop: arrivals, scheduling, departures, delay
accounting, plus the stopping rule and stability/throughput measurement.

Within a slot: (1) arrivals are enqueued (and samplers updated), (2) the
scheduler produces this slot's matching, (3) matched pairs with a nonempty
VOQ dequeue their head packet with delay = now - arrival_slot (a packet may
depart in its arrival slot with delay 0 for the single-iteration
algorithms), (4) the slot counter advances.

Two execution paths produce identical results: a pure-Python one built from
the core/sampling/schedulers objects, and a JIT path (``_kernels``) used
automatically for the four iterative algorithms.  Both consume the same
arrival stream and the same per-slot uniform windows, so stats match
bit for bit; the test suite enforces this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from statistics import NormalDist, stdev

import numpy as np

from . import _kernels
from .core import Matching, VoqMatrix
from .schedulers import ALGORITHMS, DEFAULT_KNOCKOUT, make_scheduler, islip_iterations, window_size
from .traffic import PATTERNS, BernoulliTraffic, OnOffTraffic, TrafficMatrix, pattern_matrix

_CHUNK_TARGET = 8192  # slots per kernel call, rounded to a batch multiple
_QPS_FAMILY = ("sbqps", "swqps", "qps1")


@dataclass
class RunConfig:
    """Everything that defines one simulation run.

    The stopping rule follows the evaluation setup: simulate at least
    ``min_slot_factor * N^2`` slots and until the confidence interval
    half-width on mean delay is at most ``ci_target`` at ``ci_confidence``,
    or until ``max_slots``.
    """

    n: int
    algorithm: str
    load: float
    t: int = 16
    pattern: str = "uniform"
    arrival_model: str = "bernoulli"
    burst_size: float = 16.0
    knockout: int = DEFAULT_KNOCKOUT
    seed: int = 0
    max_slots: int = 0  # 0 = auto (4x the minimum)
    ci_target: float = 0.01
    ci_confidence: float = 0.98
    min_slot_factor: int = 500
    batch_len_factor: int = 10
    warmup_slots_factor: int = 10  # times T, discarded by throughput runs
    stability_growth_frac: float = 0.05
    stability_consecutive: int = 3
    qps1_accept: str = "longest"  # or "random": first proposal to arrive wins
    engine: str = "auto"  # auto | python | kernel
    track_delays: bool = True
    rates: np.ndarray | None = None  # direct rate matrix, overrides pattern

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.t < 1:
            raise ValueError("t must be >= 1")
        if not 0.0 <= self.load <= 1.0:
            raise ValueError("load must be in [0,1]")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r}")
        if self.arrival_model not in ("bernoulli", "onoff"):
            raise ValueError(f"unknown arrival model {self.arrival_model!r}")
        if self.knockout < 1:
            raise ValueError("knockout must be >= 1")
        if self.engine not in ("auto", "python", "kernel"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.qps1_accept not in ("longest", "random"):
            raise ValueError(f"unknown qps1 accept rule {self.qps1_accept!r}")

    @property
    def min_slots(self) -> int:
        return self.min_slot_factor * self.n * self.n

    @property
    def batch_len(self) -> int:
        return self.batch_len_factor * self.n

    def resolved_max_slots(self) -> int:
        m = self.max_slots if self.max_slots > 0 else 4 * self.min_slots
        b = self.batch_len
        return ((m + b - 1) // b) * b


@dataclass
class RunStats:
    """Measured quantities of one run."""

    slots: int = 0
    arrivals: int = 0
    departures: int = 0
    delay_sum: int = 0
    batch_means: list[float] = field(default_factory=list)
    backlog_samples: list[tuple[int, int, int]] = field(default_factory=list)
    # (slot, arrivals so far, backlog) checkpoints, appended once per chunk
    mean_delay: float = float("nan")
    delay_ci_half: float = float("inf")
    throughput: float = 0.0
    stable: bool = True

    @property
    def backlog(self) -> int:
        return self.arrivals - self.departures


def _z_value(confidence: float) -> float:
    return NormalDist().inv_cdf(0.5 + confidence / 2.0)


def ci_half_width(batch_means: list[float], confidence: float) -> float:
    """Normal-approximation CI half-width over non-overlapping batch means."""
    if len(batch_means) < 2:
        return float("inf")
    return _z_value(confidence) * stdev(batch_means) / math.sqrt(len(batch_means))


def stability_check(stats: RunStats, growth_frac: float = 0.05,
                    consecutive: int = 3) -> bool:
    """True when the run looks stable.

    Unstable means the total backlog kept growing: at each of the last
    ``consecutive`` checkpoints, the backlog increase since the midpoint
    checkpoint exceeded ``growth_frac`` of all arrivals so far.
    """
    samples = stats.backlog_samples
    if len(samples) < 2:
        return True
    flags = []
    for c in range(len(samples)):
        _, arr_c, back_c = samples[c]
        back_mid = samples[c // 2][2]
        flags.append(arr_c > 0 and back_c - back_mid > growth_frac * arr_c)
    if len(flags) < consecutive:
        return True
    return not all(flags[-consecutive:])


class _FifoSlab:
    """Growable linked slab holding per-VOQ FIFO packet timestamps."""

    def __init__(self, nqueues: int, cap: int):
        self.ts = np.empty(cap, dtype=np.int64)
        self.nxt = np.empty(cap, dtype=np.int64)
        self.head = np.full(nqueues, -1, dtype=np.int64)
        self.tail = np.full(nqueues, -1, dtype=np.int64)
        self.ctl = np.array([-1, 0, cap], dtype=np.int64)  # free list, bump, free count

    def ensure(self, incoming: int) -> None:
        if self.ctl[2] >= incoming:
            return
        cap = len(self.ts)
        new_cap = max(2 * cap, cap + incoming)
        ts = np.empty(new_cap, dtype=np.int64)
        nxt = np.empty(new_cap, dtype=np.int64)
        ts[:cap] = self.ts
        nxt[:cap] = self.nxt
        self.ts = ts
        self.nxt = nxt
        self.ctl[2] += new_cap - cap


class _KernelState:
    """Array-backed scheduler and queue state for the JIT path."""

    def __init__(self, cfg: RunConfig):
        n, t = cfg.n, cfg.t
        self.lengths = np.zeros((n, n), dtype=np.int64)
        self.w = np.zeros((n, n), dtype=np.int64)  # packets awaiting scheduling
        self.bank = np.zeros((n, n + 1), dtype=np.int64)
        self.totals = np.zeros(n, dtype=np.int64)
        self.fifo = _FifoSlab(n * n, 1 << 14 if cfg.track_delays else 1)
        self.row = np.empty(n, dtype=np.int16)
        if cfg.algorithm in ("sbqps", "swqps"):
            self.cells = np.full((t, n), -1, dtype=np.int16)
            self.in_avail = np.full(n, (1 << t) - 1, dtype=np.int64)
            self.out_avail = np.full(n, (1 << t) - 1, dtype=np.int64)
            self.cal_state = np.zeros(2, dtype=np.int64)  # [base row, batches done]
            self.pending = np.full((t, n), -1, dtype=np.int16)
        if cfg.algorithm in _QPS_FAMILY:
            self.prop_in = np.empty(n, dtype=np.int32)
            self.prop_out = np.empty(n, dtype=np.int32)
            self.kept = np.empty((n, n), dtype=np.int32)
            self.kept_cnt = np.zeros(n, dtype=np.int32)
            self.touched = np.empty(n, dtype=np.int32)
        if cfg.algorithm == "islip":
            nwords = (n + 31) >> 5
            self.req_mask = np.zeros((n, nwords), dtype=np.int64)
            self.grant_ptr = np.zeros(n, dtype=np.int64)
            self.accept_ptr = np.zeros(n, dtype=np.int64)
            self.unmatched_in = np.zeros(nwords, dtype=np.int64)
            self.grant_mask = np.zeros(nwords, dtype=np.int64)
            self.granted_o = np.empty(n, dtype=np.int64)
            self.granted_i = np.empty(n, dtype=np.int64)
            self.best_out = np.full(n, -1, dtype=np.int64)
            self.best_dist = np.zeros(n, dtype=np.int64)


def _make_traffic_matrix(cfg: RunConfig) -> TrafficMatrix:
    if cfg.rates is not None:
        return TrafficMatrix(cfg.n, cfg.rates)
    return TrafficMatrix.from_pattern(cfg.pattern, cfg.n, cfg.load)


class Simulation:
    """One simulation world: VOQs, scheduler state, traffic, statistics."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.now = 0
        self.stats = RunStats()
        ss = np.random.SeedSequence(config.seed)
        traffic_ss, sched_ss = ss.spawn(2)
        traffic_seed = int(traffic_ss.generate_state(1, np.uint32)[0])
        self.sched_rng = np.random.Generator(np.random.PCG64(sched_ss))
        if config.arrival_model == "bernoulli":
            self.source = BernoulliTraffic(_make_traffic_matrix(config), traffic_seed)
        else:
            if config.rates is not None:
                raise ValueError("rates override is only supported for bernoulli arrivals")
            self.source = OnOffTraffic(pattern_matrix(config.pattern, config.n),
                                       config.load, config.burst_size, traffic_seed)
        self.mode = self._resolve_mode()
        if self.mode == "kernel":
            self.k = _KernelState(config)
            self.voqs = None
            self.sched = None
        else:
            self.k = None
            self.voqs = VoqMatrix(config.n)
            self.sched = make_scheduler(config.algorithm, config.n, config.t,
                                        config.knockout, config.qps1_accept)
        # partial CI batch carried across chunks (python path only)
        self._carry_dsum = 0
        self._carry_dcnt = 0
        self._carry_fill = 0

    def _resolve_mode(self) -> str:
        cfg = self.config
        jit_ok = cfg.algorithm in ("sbqps", "swqps", "qps1", "islip") \
            and cfg.t <= _kernels.MAX_KERNEL_T
        if cfg.engine == "kernel":
            if not jit_ok:
                raise ValueError("kernel engine unavailable for this config "
                                 "(mwm or T > 63 requires engine=python)")
            return "kernel"
        if cfg.engine == "python":
            return "python"
        return "kernel" if jit_ok else "python"

    # -- single slot (python path), the canonical step semantics ----------

    def step(self) -> Matching:
        """Advance one slot and return the executed matching."""
        assert self.mode == "python", "step() drives the python path only"
        offsets, pairs = self.source.chunk(1)
        window = (self.sched_rng.random(window_size(self.config.n))
                  if self.config.algorithm in _QPS_FAMILY else None)
        return self._python_slot(pairs, 0, int(offsets[1]), window)

    def _python_slot(self, pairs, a0: int, a1: int, window) -> Matching:
        n = self.config.n
        voqs = self.voqs
        sched = self.sched
        qps = self.config.algorithm in _QPS_FAMILY
        for k in range(a0, a1):
            pr = int(pairs[k])
            i, j = divmod(pr, n)
            voqs.push(i, j, self.now)
            if qps:
                sched.on_arrival(i, j)
        self.stats.arrivals += a1 - a0
        m = sched.slot(voqs, self.now, window)
        deps = 0
        dsum = 0
        for i, o in m.pairs():
            if voqs.lengths[i, o] > 0:
                pkt = voqs.pop(i, o)
                if qps:
                    sched.on_departure(i, o)
                deps += 1
                dsum += self.now - pkt.arrival_slot
        self.stats.departures += deps
        self.stats.delay_sum += dsum
        self._fold_slot(deps, dsum)
        self.now += 1
        return m

    def _fold_slot(self, deps: int, dsum: int) -> None:
        self._carry_dcnt += deps
        self._carry_dsum += dsum
        self._carry_fill += 1
        if self._carry_fill == self.config.batch_len:
            if self._carry_dcnt > 0:
                self.stats.batch_means.append(self._carry_dsum / self._carry_dcnt)
            self._carry_dsum = self._carry_dcnt = self._carry_fill = 0

    # -- chunked advance ---------------------------------------------------

    def advance(self, nslots: int, collect_batches: bool = True) -> None:
        """Simulate ``nslots`` slots.

        For CI batch accounting to stay aligned, callers that collect
        batches must advance in multiples of the batch length.
        """
        if nslots <= 0:
            return
        cfg = self.config
        batch_len = cfg.batch_len
        if collect_batches and self.mode == "kernel":
            assert self.now % batch_len == 0 and nslots % batch_len == 0, \
                "kernel-path CI accounting requires batch-aligned chunks"
        offsets, pairs = self.source.chunk(nslots)
        windows = (self.sched_rng.random((nslots, window_size(cfg.n)))
                   if cfg.algorithm in _QPS_FAMILY else None)
        if self.mode == "python":
            for s in range(nslots):
                w = windows[s] if windows is not None else None
                self._python_slot(pairs, int(offsets[s]), int(offsets[s + 1]), w)
        else:
            self._kernel_chunk(nslots, offsets, pairs, windows, collect_batches)
        self.stats.backlog_samples.append(
            (self.now, self.stats.arrivals, self.stats.backlog))

    def _kernel_chunk(self, nslots, offsets, pairs, windows, collect_batches):
        cfg = self.config
        k = self.k
        n, t = cfg.n, cfg.t
        track = cfg.track_delays
        if track:
            k.fifo.ensure(int(offsets[-1]))
        nbatches = (nslots + cfg.batch_len - 1) // cfg.batch_len
        bd = np.zeros(nbatches, dtype=np.int64)
        bc = np.zeros(nbatches, dtype=np.int64)
        f = k.fifo
        common = (self.now, nslots, offsets, pairs)
        if cfg.algorithm == "swqps":
            arr, deps, dsum = _kernels.run_swqps_chunk(
                *common, windows, k.lengths, k.w, k.bank, k.totals,
                f.ts, f.nxt, f.head, f.tail, f.ctl,
                k.cells, k.in_avail, k.out_avail, k.cal_state,
                cfg.knockout, t, n, track,
                k.kept, k.kept_cnt, k.touched, k.prop_in, k.prop_out, k.row,
                cfg.batch_len, bd, bc)
        elif cfg.algorithm == "sbqps":
            arr, deps, dsum = _kernels.run_sbqps_chunk(
                *common, windows, k.lengths, k.w, k.bank, k.totals,
                f.ts, f.nxt, f.head, f.tail, f.ctl,
                k.cells, k.in_avail, k.out_avail, k.pending, k.cal_state,
                cfg.knockout, t, n, track,
                k.kept, k.kept_cnt, k.touched, k.prop_in, k.prop_out, k.row,
                cfg.batch_len, bd, bc)
        elif cfg.algorithm == "qps1":
            arr, deps, dsum = _kernels.run_qps1_chunk(
                *common, windows, k.lengths, k.w, k.bank, k.totals,
                f.ts, f.nxt, f.head, f.tail, f.ctl,
                n, track, cfg.qps1_accept == "longest",
                k.prop_in, k.prop_out, k.row,
                cfg.batch_len, bd, bc)
        elif cfg.algorithm == "islip":
            arr, deps, dsum = _kernels.run_islip_chunk(
                *common, k.lengths,
                f.ts, f.nxt, f.head, f.tail, f.ctl,
                k.req_mask, k.grant_ptr, k.accept_ptr,
                islip_iterations(n), n, track,
                k.unmatched_in, k.grant_mask, k.granted_o, k.granted_i,
                k.best_out, k.best_dist, k.row,
                cfg.batch_len, bd, bc)
        else:  # pragma: no cover - guarded by _resolve_mode
            raise AssertionError(cfg.algorithm)
        self.stats.arrivals += int(arr)
        self.stats.departures += int(deps)
        self.stats.delay_sum += int(dsum)
        if collect_batches:
            full_batches = nslots // cfg.batch_len
            for b in range(full_batches):
                if bc[b] > 0:
                    self.stats.batch_means.append(float(bd[b]) / float(bc[b]))
        self.now += nslots

    # -- end-of-run summary -------------------------------------------------

    def lengths_view(self) -> np.ndarray:
        return self.k.lengths if self.mode == "kernel" else self.voqs.lengths

    def finalize(self) -> RunStats:
        st = self.stats
        cfg = self.config
        st.slots = self.now
        st.mean_delay = (st.delay_sum / st.departures
                         if st.departures > 0 else float("nan"))
        st.delay_ci_half = ci_half_width(st.batch_means, cfg.ci_confidence)
        st.throughput = (st.departures / (cfg.n * self.now) if self.now else 0.0)
        st.stable = stability_check(st, cfg.stability_growth_frac,
                                    cfg.stability_consecutive)
        return st


def _chunk_slots(cfg: RunConfig) -> int:
    b = cfg.batch_len
    return b * max(1, _CHUNK_TARGET // b)


def run(config: RunConfig) -> RunStats:
    """Run to the stopping rule: at least ``min_slots`` and CI half-width at
    most ``ci_target``, or ``max_slots``, whichever comes first."""
    sim = Simulation(config)
    max_slots = config.resolved_max_slots()
    chunk = _chunk_slots(config)
    while True:
        sim.advance(min(chunk, max_slots - sim.now))
        if sim.now >= max_slots:
            break
        if sim.now >= config.min_slots:
            if ci_half_width(sim.stats.batch_means,
                             config.ci_confidence) <= config.ci_target:
                break
    return sim.finalize()


def measure_max_throughput(config: RunConfig, horizon: int | None = None) -> float:
    """Sustained service rate over a fixed horizon (default 500 N^2 slots),
    discarding a short warm-up; no CI requirement.

    Meant to be called with a near-saturating load (0.9999) to measure the
    maximum achievable throughput.
    """
    cfg = replace(config, track_delays=False)
    sim = Simulation(cfg)
    total = horizon if horizon is not None else cfg.min_slots
    warmup = cfg.warmup_slots_factor * cfg.t
    if warmup >= total:
        raise ValueError("horizon shorter than warm-up")
    sim.advance(warmup, collect_batches=False)
    deps0 = sim.stats.departures
    sim.advance(total - warmup, collect_batches=False)
    return (sim.stats.departures - deps0) / (cfg.n * (total - warmup))
