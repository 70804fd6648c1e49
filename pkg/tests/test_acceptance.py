"""Acceptance suite: one PASS/FAIL line per criterion.

The lines are printed as each test finishes (visible with ``-s``) and are
repeated in the "acceptance criteria" section of the pytest summary.
"""

from __future__ import annotations

import random
import time
from typing import Dict, List

import pytest

from conftest import ACCEPTANCE
from linstab import buildlist, departure
from linstab.checkers import InvariantEvaluator
from linstab.cli import _failures, resolve_scenario
from linstab.messages import Search
from linstab.model import ReachIndex
from linstab.runner import RunConfig, RunResult, fuzz, run_case, run_scenario
from linstab.sim import replay
from oracle import Oracle
from statefuzz import random_message, random_state, random_staying_node

PLUS_RUNS, PLUS_N = 500, (4, 16)
STAR_RUNS, STAR_N, STAR_FRAC = 200, (4, 12), (0.1, 0.4)


def report(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)


def failing(results: List[RunResult], *props: str) -> Dict[int, List[str]]:
    out: Dict[int, List[str]] = {}
    for r in results:
        bad = [f"{v.property}:{v.status.value}" for v in r.violations if not props or v.property in props]
        if bad:
            out[r.config.seed] = bad
    return out


def timed(gen):
    t = time.time()
    results = list(gen)
    return results, time.time() - t


@pytest.fixture(scope="module")
def plus_campaign():
    return timed(fuzz(*PLUS_N, PLUS_RUNS, 1000, "plus"))


@pytest.fixture(scope="module")
def star_campaign():
    return timed(fuzz(*STAR_N, STAR_RUNS, 2000, "star", leaving_range=STAR_FRAC))


def convergence_line(results, elapsed, limit):
    bad = failing(results, "convergence", "fairness")
    worst = max(r.converged_at / r.budget for r in results if r.converged_at is not None)
    ok = not bad and elapsed < limit
    return ok, (f"{len(results) - len(bad)}/{len(results)} runs converged within 10*fb*n and stayed "
                f"fixed for 1000 steps; worst converged_at/budget {worst:.2f}; {elapsed:.0f}s "
                f"(limit {limit}s); failing seeds {sorted(bad)[:10]}")


def star_line(results, elapsed, limit):
    bad = failing(results, "fdp", "connectivity", "convergence", "fairness")
    leavers = sum(r.leaving for r in results)
    exits = sum(r.exits for r in results)
    switched = sum(1 for r in results if r.leaving > 1)
    ok = not bad and exits == leavers and elapsed < limit
    return ok, (f"{len(results) - len(bad)}/{len(results)} star runs clean; {exits}/{leavers} leaving nodes "
                f"exited; {switched} runs with mid-run mode switches; {elapsed:.0f}s (limit {limit}s); "
                f"failing seeds {sorted(bad)[:10]}")


def test_criterion_1_convergence(plus_campaign):
    results, elapsed = plus_campaign
    ok, detail = convergence_line(results, elapsed, 120)
    report(1, ok, detail)
    assert ok


def test_criterion_2_connectivity(plus_campaign):
    results, _ = plus_campaign
    bad = failing(results, "connectivity")
    report(2, not bad, f"NG weakly connected at every step in {len(results) - len(bad)}/{len(results)} runs")
    assert not bad


def test_criterion_3_potential(plus_campaign):
    results, _ = plus_campaign
    bad = failing(results, "phi_monotone")
    at_line = all(r.phi_final == 2 * (r.n - 1) for r in results if r.converged_at is not None)
    ok = not bad and at_line
    report(3, ok, f"potential never increased in {len(results) - len(bad)}/{len(results)} runs; "
                  f"equals 2(n-1) at convergence: {at_line}")
    assert ok


def test_criterion_4_admissibility(plus_campaign):
    results, _ = plus_campaign
    bad = failing(results, "admissibility", "reach_monotone")
    reached = sum(1 for r in results if r.first_admissible is not None)
    rng = random.Random(4)
    states = disagree = 0
    for star in (False, True):
        for _ in range(1000):
            s = random_state(rng, star)
            assert len(s.nodes) <= 6
            states += 1
            if InvariantEvaluator(star).report(s, ReachIndex(s)).holds != Oracle(s, star).holds():
                disagree += 1
    ok = not bad and reached == len(results) and disagree == 0
    report(4, ok, f"{reached}/{len(results)} runs reached admissibility and kept it; checker vs brute "
                  f"force: {states - disagree}/{states} states agree (n<=6, both protocols)")
    assert ok


def test_criterion_5_searchability():
    cfg = dict(search_rate=0.005, nontrivial_check=True)
    results, elapsed = timed(fuzz(4, 12, 200, 3000, "plus", **cfg))
    searches = sum(r.searches for r in results)
    bad = failing(results, "searchability")
    trivial = failing(results, "nontrivial_search")
    probed = sum(1 for r in results if any(v.property == "nontrivial_search" for v in r.verdicts))
    unfair = failing(results, "fairness")
    ok = not bad and not trivial and not unfair and probed == len(results) and searches > 0
    report(5, ok, f"{searches} searches over {len(results)} runs, Delivered-then-Failed pairs in "
                  f"{len(bad)} runs; all-pairs probe after convergence delivered in "
                  f"{probed - len(trivial)}/{len(results)} runs; fairness audit failed in {len(unfair)} runs; {elapsed:.0f}s")
    assert ok


def test_criterion_6_search_race():
    scn, _ = resolve_scenario("figure1")
    res = run_scenario(scn)
    fails = _failures(res.sim)
    delivered = [(ev.step, ev.message.tag) for ev in res.sim.events
                 if ev.kind.value == "deliver" and isinstance(ev.message, Search)
                 and ev.message.dest_id == ev.actor]
    ok = bool(fails) and bool(delivered) and fails[0][0] < delivered[0][0] \
        and fails[0][2] == 1 and delivered[0][1] == 0
    report(6, ok, f"search b Failed at step {fails[0][0] if fails else None}, search a Delivered at step "
                  f"{delivered[0][0] if delivered else None}")
    assert ok


def test_criterion_7_departure(star_campaign):
    results, elapsed = star_campaign
    ok, detail = star_line(results, elapsed, 180)
    report(7, ok, detail)
    assert ok


def test_criterion_8_star_equivalence():
    rng = random.Random(8)
    pairs = mismatches = 0
    for _ in range(10_000):
        ids = sorted(rng.sample(range(1, 40), rng.randint(1, 8)))
        node = random_staying_node(rng, ids)
        msg = random_message(rng, ids, star=False)
        pairs += 1
        if departure.handle_star(node.copy(), msg) != buildlist.handle(node.copy(), msg):
            mismatches += 1
        if pairs % 10 == 0:
            pairs += 1
            if departure.timeout_star(node.copy(), oracle=rng.random() < 0.5) != \
                    buildlist.handle_timeout(node.copy()):
                mismatches += 1
    report(8, mismatches == 0, f"{pairs - mismatches}/{pairs} staying-node actions identical "
                               f"under both protocols")
    assert mismatches == 0


def test_criterion_9_determinism():
    rng = random.Random(9)
    matches = total = 0
    for k in range(50):
        protocol = "star" if k % 2 else "plus"
        cfg = RunConfig(n=rng.randint(4, 10), seed=9000 + k, protocol=protocol,
                        leaving_fraction=0.25 if protocol == "star" else 0.0, search_rate=0.01)
        first = run_case(cfg, keep_sim=True)
        sim = first.sim
        again = replay(sim.initial, sim.events, sim.protocol)
        rerun = run_case(cfg)
        total += 1
        if again.final_digest() == sim.final_digest() == rerun.digest == first.digest:
            matches += 1
    ok = matches == total
    report(9, ok, f"{matches}/{total} replays reproduced the recorded digest chain ({100 * matches / total:.0f}%)")
    assert ok


def test_criterion_10_doubled_fairness_bound():
    plus, t_plus = timed(fuzz(*PLUS_N, PLUS_RUNS, 1000, "plus", fb_scale=2))
    star, t_star = timed(fuzz(*STAR_N, STAR_RUNS, 2000, "star", leaving_range=STAR_FRAC, fb_scale=2))
    ok1, d1 = convergence_line(plus, t_plus, 240)
    ok7, d7 = star_line(star, t_star, 360)
    report(10, ok1 and ok7, f"with fb doubled: [1] {'PASS' if ok1 else 'FAIL'} {d1} | "
                            f"[7] {'PASS' if ok7 else 'FAIL'} {d7}")
    assert ok1 and ok7
