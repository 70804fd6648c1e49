"""Simulator and property checkers for self-stabilizing linearization with
monotonic searchability and graceful node departure."""

from __future__ import annotations

from .checkers import (AdmissibilityObserver, ConnectivityObserver, ConvergenceObserver,
                       FdpObserver, PhiObserver, SearchObserver, Status, Trace, Verdict,
                       check_connectivity, check_convergence, check_fdp,
                       check_invariants_plus, check_invariants_star, check_monotone_admissibility,
                       check_phi_monotone, check_searchability)
from .messages import (ForwardProbe, Introduce, Linearize, ProbeFail, ProbeSuccess, RevAndLin,
                       RevAndLinAck, RevAndLinReq, Search, Side, TempDelegate)
from .model import Mode, NodeState, SystemState
from .runner import RunConfig, RunResult, fuzz, run_case
from .sim import (InitialStateSpec, Simulator, generate_initial_state, make_protocol, replay)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityObserver", "ConnectivityObserver", "ConvergenceObserver", "FdpObserver",
    "PhiObserver", "SearchObserver", "Status", "Trace", "Verdict", "check_connectivity",
    "check_convergence", "check_fdp", "check_invariants_plus", "check_invariants_star",
    "check_monotone_admissibility", "check_phi_monotone", "check_searchability",
    "ForwardProbe", "Introduce", "Linearize", "ProbeFail", "ProbeSuccess", "RevAndLin",
    "RevAndLinAck", "RevAndLinReq", "Search", "Side", "TempDelegate", "Mode", "NodeState",
    "SystemState", "RunConfig", "RunResult", "fuzz", "run_case", "InitialStateSpec", "Simulator",
    "generate_initial_state", "make_protocol", "replay",
]
