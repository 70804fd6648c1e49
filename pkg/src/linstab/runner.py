"""Checked runs and fuzz campaigns.

A run is fully determined by its :class:`RunConfig`; the seed is split into
named streams (state generation, scheduling, search injection and mode
switches) so any single run can be reproduced in isolation.
"""

from __future__ import annotations

import logging
import random
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

from .checkers import (AdmissibilityObserver, ConnectivityObserver, ConvergenceObserver,
                       FdpObserver, Outcome, PhiObserver, SearchObserver, Status, Trace, Verdict,
                       probe_all_pairs)
from .model import SystemState
from .io import Scenario  # noqa: F401
from .sim import (Action, EventKind, InitialStateSpec, Observer, Simulator, convergence_budget,
                  default_fairness_bound, generate_initial_state, make_scheduler)

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    n: int
    seed: int
    protocol: str = "plus"
    corrupted: Optional[int] = None      # default: n
    pending_searches: int = 2
    leaving_fraction: float = 0.0
    fb_scale: int = 1
    scheduler: str = "random_fair"
    timeout_weight: float = 0.3
    search_rate: float = 0.0             # chance per step of a new search in an admissible state
    closure_steps: int = 1000
    farthest_self_intro: bool = False
    nontrivial_check: bool = False
    rs_through_leaving: bool = True      # staying-reach paths may pass leaving nodes


@dataclass
class RunResult:
    config: RunConfig
    n: int
    steps: int
    budget: int
    fairness_bound: int
    converged_at: Optional[int]
    first_admissible: Optional[int]
    phi_final: Optional[int]
    leaving: int
    exits: int
    searches: int
    max_timeout_gap: int
    max_channel_wait: int
    digest: str
    verdicts: List[Verdict]
    phi_trace: List[Tuple[int, int]] = field(default_factory=list, repr=False)
    sim: Optional[Simulator] = field(default=None, repr=False)

    @property
    def violations(self) -> List[Verdict]:
        return [v for v in self.verdicts if not v.ok]

    @property
    def ok(self) -> bool:
        return not self.violations

    def row(self) -> Dict[str, Any]:
        c = self.config
        return {
            "seed": c.seed, "protocol": c.protocol, "n": self.n, "fb": self.fairness_bound,
            "budget": self.budget, "steps": self.steps,
            "converged_at": "" if self.converged_at is None else self.converged_at,
            "first_admissible": "" if self.first_admissible is None else self.first_admissible,
            "phi_final": "" if self.phi_final is None else self.phi_final,
            "leaving": self.leaving, "exits": self.exits, "searches": self.searches,
            "max_timeout_gap": self.max_timeout_gap, "max_channel_wait": self.max_channel_wait,
            "violations": ";".join(f"{v.property}@{v.step}" for v in self.violations),
            "digest": self.digest,
        }


def build_case(cfg: RunConfig) -> Tuple[SystemState, Dict[int, List[int]], int]:
    """Initial state, mode-switch schedule and fairness bound for ``cfg``."""
    rng = random.Random(f"{cfg.seed}:case")
    star = cfg.protocol == "star"
    spec = InitialStateSpec(n=cfg.n, seed=cfg.seed,
                            corrupted=cfg.n if cfg.corrupted is None else cfg.corrupted,
                            protocol="star" if star else "plus",
                            pending_searches=cfg.pending_searches)
    state = generate_initial_state(spec)
    fb = default_fairness_bound(state) * cfg.fb_scale
    schedule: Dict[int, List[int]] = {}
    if star and cfg.leaving_fraction > 0:
        ids = sorted(state.nodes)
        k = max(1, round(cfg.leaving_fraction * cfg.n))
        k = min(k, cfg.n - 1)
        leavers = rng.sample(ids, k)
        for i, u in enumerate(leavers):
            if i % 2 == 0:
                state.nodes[u].mode = state.nodes[u].mode.LEAVING
            else:
                # the rest switch while the run is under way
                schedule.setdefault(rng.randint(1, 2 * fb), []).append(u)
    return state, schedule, fb


def run_case(cfg: RunConfig, keep_sim: bool = False,
             extra_observers: Sequence[Observer] = ()) -> RunResult:
    state, schedule, fb = build_case(cfg)
    star = cfg.protocol == "star"
    protocol = cfg.protocol
    if cfg.farthest_self_intro and protocol in ("plus", "star"):
        from .sim import make_protocol

        protocol = make_protocol(protocol, farthest_self_intro=True)
    adm = AdmissibilityObserver(star=cfg.protocol == "star", through_leaving=cfg.rs_through_leaving)
    conn = ConnectivityObserver()
    conv = ConvergenceObserver(cfg.closure_steps)
    srch = SearchObserver(adm)
    observers: List[Observer] = [conn, adm, conv, srch]
    phi = None
    fdp = None
    if star:
        fdp = FdpObserver()
        observers.append(fdp)
    else:
        phi = PhiObserver()
        observers.append(phi)
    observers.extend(extra_observers)
    sched = make_scheduler(cfg.scheduler, random.Random(f"{cfg.seed}:sched"),
                           timeout_weight=cfg.timeout_weight)
    sim = Simulator(state, protocol, sched, seed=cfg.seed, fairness_bound=fb,
                    observers=observers, leave_schedule=schedule)
    leavers = len(state.leaving_present()) + sum(len(v) for v in schedule.values())
    budget = convergence_budget(state, fb, leavers)
    inject = random.Random(f"{cfg.seed}:search")
    ids = sorted(state.nodes)
    limit = budget + cfg.closure_steps
    while sim.step_index < limit:
        if conv.closure_done:
            break
        if (cfg.search_rate and adm.current_admissible and inject.random() < cfg.search_rate):
            staying = [i for i in sim.present_ids if sim.state.nodes[i].staying]
            if staying:
                u = inject.choice(staying)
                # mostly real ids, sometimes one that names no node
                d = inject.choice(ids) if inject.random() < 0.85 else inject.randint(0, 10 * cfg.n + 1)
                sim.step(Action(EventKind.INIT_SEARCH, u, dest=d))
                continue
        if sim.step() is None:
            break
    if cfg.search_rate:
        # let outstanding searches resolve without new injections
        drain = 4 * fb * cfg.n
        sim.run(drain, stop=lambda _: all(r.outcome is not Outcome.PENDING or r.origin not in sim.present_ids
                                           for r in srch.records.values()))
    verdicts: List[Verdict] = [conn.verdict(), adm.verdict(), adm.reach_verdict()]
    cv = conv.verdict()
    if cv.status is Status.ESTABLISHED and cv.step > budget:
        cv = Verdict(cv.property, Status.VIOLATED, cv.step, note=f"converged after budget {budget}")
    verdicts.append(cv)
    if phi is not None:
        pv = phi.verdict()
        want = 2 * (len(sim.state.present()) - 1)
        if pv.ok and conv.established is not None and phi.current != want:
            pv = Verdict(pv.property, Status.VIOLATED, sim.step_index, (phi.current, want),
                         note="phi at convergence differs from 2(n-1)")
        verdicts.append(pv)
    if fdp is not None:
        verdicts.append(fdp.verdict())
    if cfg.search_rate or srch.records:
        verdicts.append(srch.verdict())
    if cfg.nontrivial_check and conv.established is not None:
        verdicts.append(probe_all_pairs(sim, seed=cfg.seed))
    verdicts.append(fairness_audit(sim))
    gone = [i for i, nd in sim.state.nodes.items() if nd.exited]
    result = RunResult(
        config=cfg, n=cfg.n, steps=sim.step_index, budget=budget, fairness_bound=fb,
        converged_at=conv.established, first_admissible=adm.first_admissible,
        phi_final=phi.current if phi is not None else None,
        leaving=len(gone) + len(sim.state.leaving_present()), exits=len(gone),
        searches=len(srch.records), max_timeout_gap=sim.max_timeout_gap,
        max_channel_wait=sim.max_channel_wait, digest=sim.final_digest(), verdicts=verdicts,
        phi_trace=list(phi.values) if phi is not None else [],
        sim=sim if keep_sim else None,
    )
    for v in result.violations:
        log.warning("seed %s: %s %s at %s (%s)", cfg.seed, v.property, v.status.value, v.step, v.note)
    return result


def fairness_audit(sim: Simulator) -> Verdict:
    """A run only counts as fair if neither timeouts nor deliveries starved."""
    fb = sim.fairness_bound
    gap, wait = sim.max_timeout_gap, sim.max_channel_wait
    note = f"timeout gap {gap}, channel wait {wait}, bound {fb}"
    if gap > fb or wait > fb:
        return Verdict("fairness", Status.VIOLATED, sim.step_index, (gap, wait), note=note)
    return Verdict("fairness", Status.HOLDS, note=note)


def trace_of(result: RunResult) -> Trace:
    sim = result.sim
    if sim is None:
        raise ValueError("run was not kept; pass keep_sim=True")
    return Trace.of(sim, config=asdict(result.config))


def campaign_seeds(seed: int, runs: int) -> List[int]:
    """Run seeds of a campaign: the first is ``seed`` itself, then consecutive."""
    return [seed + i for i in range(runs)]


def pick_n(run_seed: int, n_lo: int, n_hi: int) -> int:
    return random.Random(f"{run_seed}:n").randint(n_lo, n_hi)


def fuzz(n_lo: int, n_hi: int, runs: int, seed: int, protocol: str = "plus",
         leaving_fraction: float = 0.0, leaving_range: Optional[Tuple[float, float]] = None,
         **overrides) -> Iterator[RunResult]:
    """Yield one checked run per campaign seed.

    ``leaving_range`` draws a per-run leaving fraction uniformly instead of a
    fixed one.
    """
    for s in campaign_seeds(seed, runs):
        n = pick_n(s, n_lo, n_hi)
        frac = leaving_fraction
        if leaving_range is not None:
            frac = random.Random(f"{s}:frac").uniform(*leaving_range)
        cfg = RunConfig(n=n, seed=s, protocol=protocol, leaving_fraction=frac, **overrides)
        yield run_case(cfg)


# --------------------------------------------------------------------------- scenario files

@dataclass
class ScenarioResult:
    sim: Simulator
    verdicts: List[Verdict]
    budget: int

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.verdicts)


def run_scenario(scn: "Scenario", seed: Optional[int] = None, max_steps: Optional[int] = None,
                 protocol: Optional[str] = None, step_hook=None) -> ScenarioResult:
    """Execute a scenario with the observers its property list asks for.

    ``protocol`` overrides the scenario's own (used for mutants); ``step_hook``
    is called with the simulator after every step.
    """
    from .sim import Adversary, replay

    seed = scn.seed if seed is None else seed
    state = scn.initial_state(seed)
    proto = protocol or scn.protocol
    star = scn.protocol == "star"
    fb = scn.fairness_bound or default_fairness_bound(state)
    props = list(scn.properties)
    sc = scn.scheduler
    sched = make_scheduler(sc.get("kind", "random_fair"), random.Random(f"{seed}:sched"),
                           script=sc.get("script", ()), then=sc.get("then"),
                           timeout_weight=float(sc.get("timeout_weight", 0.3)))
    closure = int(scn.stop.get("closure_steps", 1000))
    adm = AdmissibilityObserver(star=star)
    conn = ConnectivityObserver()
    conv = ConvergenceObserver(closure)
    srch = SearchObserver(adm)
    phi = PhiObserver()
    fdp = FdpObserver()
    observers: List[Observer] = [conv]
    if "connectivity" in props:
        observers.append(conn)
    if "admissibility" in props or "searchability" in props:
        observers.append(adm)
    if "searchability" in props:
        observers.append(srch)
    if "phi_monotone" in props:
        observers.append(phi)
    if "fdp" in props:
        observers.append(fdp)
    sim = Simulator(state, proto, sched, seed=seed, fairness_bound=fb, observers=observers,
                    leave_schedule={k: list(v) for k, v in scn.leave_schedule.items()})
    leavers = len(state.leaving_present()) + sum(len(v) for v in scn.leave_schedule.values())
    budget = convergence_budget(state, fb, leavers)
    mode = scn.stop.get("mode", "closure")
    limit = max_steps if max_steps is not None else int(scn.stop.get("max_steps", budget + closure))

    def done(_sim: Simulator) -> bool:
        if mode == "closure":
            return conv.closure_done
        if mode == "convergence":
            return conv.established is not None
        if mode == "script":
            return isinstance(sched, Adversary) and sched.script_done
        return False

    while sim.step_index < limit and not done(sim):
        if sim.step() is None:
            break
        if step_hook is not None:
            step_hook(sim)

    verdicts: List[Verdict] = []
    if "connectivity" in props:
        verdicts.append(conn.verdict())
    if "admissibility" in props:
        verdicts += [adm.verdict(), adm.reach_verdict()]
    if "convergence" in props:
        cv = conv.verdict()
        if cv.status is Status.ESTABLISHED and cv.step > budget:
            cv = Verdict(cv.property, Status.VIOLATED, cv.step, note=f"converged after budget {budget}")
        verdicts.append(cv)
    if "phi_monotone" in props:
        verdicts.append(phi.verdict())
    if "fdp" in props:
        verdicts.append(fdp.verdict())
    if "searchability" in props:
        verdicts.append(srch.verdict())
    if "determinism" in props:
        from .sim import ReplayError

        try:
            again = replay(sim.initial, sim.events, sim.protocol)
            same = again.final_digest() == sim.final_digest()
            verdicts.append(Verdict("determinism", Status.HOLDS if same else Status.VIOLATED,
                                    None if same else sim.step_index))
        except ReplayError as exc:
            verdicts.append(Verdict("determinism", Status.VIOLATED, exc.step, note=str(exc)))
    return ScenarioResult(sim, verdicts, budget)
