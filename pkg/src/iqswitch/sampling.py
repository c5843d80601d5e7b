"""Queue-proportional sampling: weighted draw of an output port with
probability proportional to the corresponding VOQ length.

The index is a Fenwick (binary indexed) tree over integer weights, giving
O(log N) update and draw.  A constant-time structure could be swapped in
behind the same interface; at the port counts simulated here the difference
is immaterial.
"""

from __future__ import annotations

import numpy as np


class QpsSampler:
    """Weighted sampler over the N output ports of one input port.

    Weights are integer packet counts; the draw probability of output j is
    weights[j] / total whenever total > 0.
    """

    __slots__ = ("N", "total", "_tree", "_top")

    def __init__(self, N: int, weights=None):
        if N < 1:
            raise ValueError("N must be >= 1")
        self.N = N
        self.total = 0
        self._tree = [0] * (N + 1)
        top = 1
        while top * 2 <= N:
            top *= 2
        self._top = top
        if weights is not None:
            if len(weights) != N:
                raise ValueError("weights length must equal N")
            for j, w in enumerate(weights):
                if w:
                    self.update(j, int(w))

    def update(self, j: int, delta: int) -> None:
        """Adjust weight j by delta (arrival: +1, departure: -1)."""
        if delta == 0:
            return
        if self.weight(j) + delta < 0:
            raise ValueError(f"weight {j} would become negative")
        self.total += delta
        idx = j + 1
        while idx <= self.N:
            self._tree[idx] += delta
            idx += idx & (-idx)

    def weight(self, j: int) -> int:
        idx = j + 1
        w = self._tree[idx]
        top = idx & (idx - 1)
        idx -= 1
        while idx != top:
            w -= self._tree[idx]
            idx &= idx - 1
        return w

    def weights(self) -> list[int]:
        return [self.weight(j) for j in range(self.N)]

    def find(self, threshold: float) -> int:
        """Smallest j whose cumulative weight exceeds ``threshold``.

        With threshold = u * total for u in [0, 1) this realizes the
        proportional draw; indexes with zero weight are never returned.
        """
        pos = 0
        rem = threshold
        bm = self._top
        while bm > 0:
            nxt = pos + bm
            if nxt <= self.N and self._tree[nxt] <= rem:
                pos = nxt
                rem -= self._tree[nxt]
            bm >>= 1
        return pos

    def draw_at(self, u: float) -> int | None:
        """Draw using a pre-sampled uniform u in [0, 1)."""
        if self.total == 0:
            return None
        return self.find(u * self.total)

    def draw(self, rng: np.random.Generator) -> int | None:
        """Sample an output index, or None when there is nothing to send."""
        if self.total == 0:
            return None
        return self.find(rng.random() * self.total)
