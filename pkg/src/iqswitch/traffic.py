"""Synthetic arrival processes: the four normalized traffic patterns under
i.i.d. Bernoulli arrivals, and the two-state ON-OFF bursty process.

Pattern matrices are doubly stochastic; the rate matrix handed to a
simulation is ``load * pattern``.  Slot-level generator functions
(`bernoulli_arrivals`, `onoff_arrivals`) mirror the chunked sources used by
the engine and are convenient for small-scale use and testing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

PATTERNS = ("uniform", "quasidiag", "logdiag", "diag")

_GEN_CHUNK = 4096  # internal generation block; fixed so streams do not
# depend on how many slots a consumer asks for at a time

OFF = 0
ON = 1


def pattern_matrix(kind: str, N: int) -> np.ndarray:
    """The normalized (doubly stochastic) pattern matrix, i.e. load 1."""
    if N < 2:
        raise ValueError("N must be >= 2")
    if kind == "uniform":
        return np.full((N, N), 1.0 / N)
    if kind == "quasidiag":
        m = np.full((N, N), 1.0 / (2 * (N - 1)))
        np.fill_diagonal(m, 0.5)
        return m
    if kind == "logdiag":
        # row i: probability halves for each step away from the diagonal,
        # cyclically; leading entry is 2^(N-1) / (2^N - 1)
        lead = (1 << (N - 1)) / ((1 << N) - 1)
        base = lead * np.power(0.5, np.arange(N))
        m = np.empty((N, N))
        for i in range(N):
            m[i] = np.roll(base, i)
        return m
    if kind == "diag":
        m = np.zeros((N, N))
        idx = np.arange(N)
        m[idx, idx] = 2.0 / 3.0
        m[idx, (idx + 1) % N] = 1.0 / 3.0
        return m
    raise ValueError(f"unknown traffic pattern {kind!r}")


@dataclass(frozen=True)
class TrafficMatrix:
    """Per-pair Bernoulli arrival probabilities."""

    N: int
    rates: np.ndarray

    def __post_init__(self):
        if self.rates.shape != (self.N, self.N):
            raise ValueError("rates must be N x N")
        if (self.rates < 0).any() or (self.rates > 1).any():
            raise ValueError("rates must lie in [0, 1]")

    @classmethod
    def from_pattern(cls, kind: str, N: int, load: float) -> "TrafficMatrix":
        if not 0.0 <= load <= 1.0:
            raise ValueError("load must be in [0,1]")
        return cls(N, load * pattern_matrix(kind, N))


def bernoulli_arrivals(tm: TrafficMatrix, rng: np.random.Generator) -> list[tuple[int, int]]:
    """One slot of i.i.d. Bernoulli arrivals: each (i, j) independently
    receives a packet with probability rates[i][j]."""
    i_idx, j_idx = np.nonzero(rng.random((tm.N, tm.N)) < tm.rates)
    return list(zip(i_idx.tolist(), j_idx.tolist()))


def burst_params(mean_burst: float, load: float) -> tuple[float, float]:
    """ON/OFF geometric parameters (p, q) for a mean burst size and load.

    Mean ON duration (1-p)/p equals the burst size B, and q is set so the
    long-run fraction of ON slots, B / (B + (1-q)/q), equals the load.
    """
    if mean_burst < 1:
        raise ValueError("mean burst size must be >= 1")
    if not 0.0 < load < 1.0:
        raise ValueError("load must be in (0,1) for ON-OFF traffic")
    p = 1.0 / (mean_burst + 1.0)
    q = load / (load + mean_burst * (1.0 - load))
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise ValueError("burst parameters fall outside (0,1)")
    return p, q


@dataclass
class BurstState:
    """Per-input ON/OFF phase state.

    ``remaining`` is the number of slots left in the current phase; phases
    are entered with a geometric duration of support {0, 1, ...} so that a
    state may last zero slots and the mean ON duration is exactly (1-p)/p.
    """

    p: float
    q: float
    phase: np.ndarray  # uint8, ON/OFF per input
    remaining: np.ndarray  # int64 per input
    dest: np.ndarray  # int32 per input, valid while ON

    @classmethod
    def initial(cls, N: int, p: float, q: float, rng: np.random.Generator) -> "BurstState":
        """Start every input as if it had just entered OFF before slot 0."""
        if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
            raise ValueError("p and q must lie in (0,1)")
        remaining = _geometric0(q, N, rng)
        return cls(p=p, q=q, phase=np.zeros(N, dtype=np.uint8),
                   remaining=remaining, dest=np.full(N, -1, dtype=np.int32))


def _geometric0(prob: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Geometric with support {0, 1, ...}: P(t) = prob * (1-prob)^t."""
    u = 1.0 - rng.random(size)
    return np.floor(np.log(u) / np.log1p(-prob)).astype(np.int64)


def onoff_arrivals(state: BurstState, pattern: np.ndarray,
                   rng: np.random.Generator) -> list[tuple[int, int]]:
    """One slot of ON-OFF arrivals; mutates ``state``.

    ON inputs emit one packet to their stored burst destination; OFF inputs
    emit nothing.  A fresh destination is drawn from the input's pattern row
    each time a burst starts.
    """
    N = state.phase.shape[0]
    out: list[tuple[int, int]] = []
    for i in range(N):
        while state.remaining[i] == 0:
            if state.phase[i] == ON:
                state.phase[i] = OFF
                state.remaining[i] = _geometric0(state.q, 1, rng)[0]
            else:
                state.phase[i] = ON
                row = pattern[i]
                state.dest[i] = int(np.searchsorted(np.cumsum(row),
                                                    rng.random() * row.sum(),
                                                    side="right"))
                state.remaining[i] = _geometric0(state.p, 1, rng)[0]
        if state.phase[i] == ON:
            out.append((i, int(state.dest[i])))
        state.remaining[i] -= 1
    return out


class _ChunkBuffer:
    """Doles out arbitrary slot counts from fixed-size generation blocks."""

    def __init__(self):
        self._offsets = np.zeros(1, dtype=np.int64)
        self._pairs = np.empty(0, dtype=np.int32)
        self._pos = 0  # slots of the current block already consumed

    def _available(self) -> int:
        return len(self._offsets) - 1 - self._pos

    def take(self, nslots: int, produce) -> tuple[np.ndarray, np.ndarray]:
        """Return (offsets, pairs) covering the next ``nslots`` slots."""
        offsets = np.empty(nslots + 1, dtype=np.int64)
        offsets[0] = 0
        pairs_parts = []
        filled = 0
        while filled < nslots:
            if self._available() == 0:
                self._offsets, self._pairs = produce()
                self._pos = 0
            grab = min(nslots - filled, self._available())
            o0 = self._offsets[self._pos]
            o1 = self._offsets[self._pos + grab]
            offsets[filled + 1:filled + grab + 1] = (
                self._offsets[self._pos + 1:self._pos + grab + 1]
                - o0 + offsets[filled])
            pairs_parts.append(self._pairs[o0:o1])
            self._pos += grab
            filled += grab
        pairs = (pairs_parts[0] if len(pairs_parts) == 1
                 else np.concatenate(pairs_parts))
        return offsets, np.ascontiguousarray(pairs)


class BernoulliTraffic:
    """Chunked i.i.d. Bernoulli arrival stream, deterministic per seed."""

    def __init__(self, tm: TrafficMatrix, seed: int):
        self.tm = tm
        self.N = tm.N
        flat = tm.rates.ravel()
        nz = np.flatnonzero(flat > 0)
        self._pair_ids = nz.astype(np.int32)
        with np.errstate(divide="ignore"):
            self._log1m = np.log1p(-flat[nz])  # -inf at rate 1 works out
        self._seed = seed & 0xFFFFFFFF
        self._chunk_idx = 0
        self._mean_per_slot = float(flat.sum())
        self._buf = _ChunkBuffer()

    def _produce(self) -> tuple[np.ndarray, np.ndarray]:
        seed = (self._seed * 0x9E3779B9 + self._chunk_idx * 0x85EBCA6B + 1) & 0xFFFFFFFF
        self._chunk_idx += 1
        mean = self._mean_per_slot * _GEN_CHUNK
        cap = int(mean + 6.0 * np.sqrt(mean + 1.0)) + 64
        while True:
            offsets, pairs, w = _kernels.gen_bernoulli_chunk(
                seed, self._pair_ids, self._log1m, _GEN_CHUNK, cap)
            if w >= 0:
                return offsets, pairs
            cap *= 2

    def chunk(self, nslots: int) -> tuple[np.ndarray, np.ndarray]:
        return self._buf.take(nslots, self._produce)


class OnOffTraffic:
    """Chunked ON-OFF bursty arrival stream, deterministic per seed."""

    def __init__(self, pattern: np.ndarray, load: float, burst_size: float, seed: int):
        self.N = pattern.shape[0]
        self.p, self.q = burst_params(burst_size, load)
        self._cumrows = np.cumsum(pattern, axis=1)
        self._seed = seed & 0xFFFFFFFF
        self._chunk_idx = 0
        self._phase = np.zeros(self.N, dtype=np.uint8)
        self._remaining = np.zeros(self.N, dtype=np.int64)
        self._dest = np.full(self.N, -1, dtype=np.int32)
        # as if every input entered OFF just before slot 0
        rng = np.random.default_rng(self._seed)
        self._remaining[:] = _geometric0(self.q, self.N, rng)
        self._buf = _ChunkBuffer()

    def _produce(self) -> tuple[np.ndarray, np.ndarray]:
        seed = (self._seed * 0x9E3779B9 + self._chunk_idx * 0x85EBCA6B + 1) & 0xFFFFFFFF
        self._chunk_idx += 1
        offsets, pairs, _ = _kernels.gen_onoff_chunk(
            seed, self._cumrows, self.p, self.q,
            self._phase, self._remaining, self._dest, _GEN_CHUNK)
        return offsets, pairs

    def chunk(self, nslots: int) -> tuple[np.ndarray, np.ndarray]:
        return self._buf.take(nslots, self._produce)
