"""Input-queued crossbar switch scheduling: algorithms and simulator.

Implements the batch scheduler SB-QPS and its sliding-window successor
SW-QPS next to the QPS-1, iSLIP, and MWM baselines, with the traffic models
and measurement machinery needed to reproduce their throughput and delay
behavior in discrete-time simulation.
"""

from .core import (
    AvailabilityBitmap,
    JointCalendar,
    Matching,
    Packet,
    VoqMatrix,
    first_fit,
)
from .engine import (
    RunConfig,
    RunStats,
    Simulation,
    ci_half_width,
    measure_max_throughput,
    run,
    stability_check,
)
from .sampling import QpsSampler
from .schedulers import (
    ALGORITHMS,
    Proposal,
    ffa_accept,
    islip_iterations,
    knockout,
    make_scheduler,
    mwm_matching,
    qps_propose_all,
)
from .traffic import (
    PATTERNS,
    BernoulliTraffic,
    BurstState,
    OnOffTraffic,
    TrafficMatrix,
    bernoulli_arrivals,
    burst_params,
    onoff_arrivals,
    pattern_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "AvailabilityBitmap",
    "BernoulliTraffic",
    "BurstState",
    "JointCalendar",
    "Matching",
    "OnOffTraffic",
    "PATTERNS",
    "Packet",
    "Proposal",
    "QpsSampler",
    "RunConfig",
    "RunStats",
    "Simulation",
    "TrafficMatrix",
    "VoqMatrix",
    "bernoulli_arrivals",
    "burst_params",
    "ci_half_width",
    "ffa_accept",
    "first_fit",
    "islip_iterations",
    "knockout",
    "make_scheduler",
    "measure_max_throughput",
    "mwm_matching",
    "onoff_arrivals",
    "pattern_matrix",
    "qps_propose_all",
    "run",
    "stability_check",
]
