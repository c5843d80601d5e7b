"""Shared test machinery: the invariant-checking fuzz driver."""

from __future__ import annotations

import numpy as np

from iqswitch.engine import RunConfig, Simulation

FUZZ_ALGS = ("sbqps", "swqps", "qps1", "islip", "mwm")
FUZZ_PATTERNS = ("uniform", "quasidiag", "logdiag", "diag")


def fuzz_config(rng: np.random.Generator) -> RunConfig:
    alg = FUZZ_ALGS[rng.integers(len(FUZZ_ALGS))]
    return RunConfig(
        n=int(rng.choice([4, 6, 8])),
        algorithm=alg,
        load=float(rng.uniform(0.05, 0.98)),
        t=int(rng.choice([2, 3, 4, 8, 16])),
        pattern=FUZZ_PATTERNS[rng.integers(4)],
        arrival_model="onoff" if rng.random() < 0.3 else "bernoulli",
        burst_size=float(rng.choice([1, 4, 16])),
        knockout=int(rng.choice([1, 2, 3, 8])),
        seed=int(rng.integers(1 << 31)),
        engine="python",
    )


def run_fuzz(total_slots: int, seed: int, check_every: int = 7) -> int:
    """Step random configs on the python path with invariants asserted.

    Checks packet conservation every slot, delay non-negativity, matching
    validity (enforced by construction in Matching.add), queue/length cache
    consistency, and calendar/bitmap consistency for the window algorithms.
    When the config is kernel-capable, the kernel run of the same config
    must agree exactly.  Returns the number of slots fuzzed.
    """
    rng = np.random.default_rng(seed)
    done = 0
    while done < total_slots:
        cfg = fuzz_config(rng)
        span = int(rng.integers(200, 900))
        sim = Simulation(cfg)
        prev_delay_sum = 0
        for s in range(span):
            sim.step()
            st = sim.stats
            assert st.arrivals == st.departures + sim.voqs.backlog(), \
                "packet conservation violated"
            assert st.delay_sum >= prev_delay_sum, "negative delay recorded"
            prev_delay_sum = st.delay_sum
            if s % check_every == 0:
                sim.voqs.check_consistent()
                if cfg.algorithm in ("sbqps", "swqps"):
                    sim.sched.cal.check_consistent()
        kernel_capable = cfg.algorithm != "mwm" and cfg.t <= 63
        if kernel_capable:
            from dataclasses import replace

            ksim = Simulation(replace(cfg, engine="kernel"))
            ksim.advance(span, collect_batches=False)
            assert ksim.stats.arrivals == sim.stats.arrivals
            assert ksim.stats.departures == sim.stats.departures
            assert ksim.stats.delay_sum == sim.stats.delay_sum
            assert (ksim.lengths_view() == sim.lengths_view()).all()
        done += span
    return done
