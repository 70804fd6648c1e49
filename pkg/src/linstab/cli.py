"""Command-line front end.

    linstab run <scenario.json> [--seed N] [--max-steps N] [--mutant NAME]
    linstab fuzz --n A..B --runs R --seed S --protocol plus|star [--leaving-fraction F]
    linstab snapshot <trace.ndjson> --step K
    linstab search-race

Exit codes: 0 when every checked property holds, 1 on a violation, 2 on usage
or input errors.  Set LINSTAB_LOG (e.g. ``debug``) for log output.
"""

from __future__ import annotations

import argparse
import logging
import os
import shlex
import sys
import time
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .io import (FormatError, Scenario, load_scenario, read_trace, scenario_from_json, to_dot,
                 write_summary, write_trace)
from .messages import ProbeFail, Search

log = logging.getLogger("linstab")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _setup_logging() -> None:
    level = os.environ.get("LINSTAB_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _int_range(text: str) -> Tuple[int, int]:
    lo, sep, hi = text.partition("..")
    try:
        a, b = int(lo), int(hi if sep else lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if a < 1 or b < a:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    return a, b


def _frac_range(text: str) -> Tuple[float, float]:
    lo, sep, hi = text.partition("..")
    try:
        a, b = float(lo), float(hi if sep else lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected F or A..B, got {text!r}") from None
    if not (0.0 <= a <= b < 1.0):
        raise argparse.ArgumentTypeError(f"leaving fraction must lie in [0, 1): {text!r}")
    return a, b


def bundled_scenarios() -> List[str]:
    root = resources.files("linstab") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_scenario(name: str) -> Tuple[Scenario, str]:
    """A path, or the name of a bundled scenario such as ``figure1``."""
    p = Path(name)
    if p.exists():
        return load_scenario(p), str(p)
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    if stem in bundled_scenarios():
        import json

        res = resources.files("linstab") / "scenarios" / f"{stem}.json"
        return scenario_from_json(json.loads(res.read_text()), Path(stem)), stem
    raise UsageError(f"no such scenario file: {name} (bundled: {', '.join(bundled_scenarios())})")


def _print_verdicts(verdicts) -> None:
    for v in verdicts:
        step = "" if v.step is None else f" @ step {v.step}"
        line = f"  {v.property:<16} {v.status.value}{step}"
        if v.note:
            line += f"  ({v.note})"
        print(line)
        if not v.ok and v.witness is not None:
            print(f"    witness: {v.witness!r}")


# --------------------------------------------------------------------------- run

def cmd_run(args: argparse.Namespace) -> int:
    from .runner import run_scenario
    from .sim import make_protocol

    scn, shown = resolve_scenario(args.scenario)
    protocol = None
    if args.mutant:
        protocol = f"mutant:{args.mutant}"
        make_protocol(protocol)  # fail early on unknown names
    seed = scn.seed if args.seed is None else args.seed
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dot_every = int(scn.outputs.get("dot_every", 0) or 0)
    dots: List[Path] = []

    def hook(sim) -> None:
        if dot_every and sim.step_index % dot_every == 0:
            p = out_dir / f"{scn.name or 'run'}.step{sim.step_index:07d}.dot"
            p.write_text(to_dot(sim.state, f"step {sim.step_index}"))
            dots.append(p)

    t0 = time.time()
    res = run_scenario(scn, seed=seed, max_steps=args.max_steps, protocol=protocol,
                       step_hook=hook if dot_every else None)
    sim = res.sim
    conv = next((v for v in res.verdicts if v.property == "convergence"), None)
    print(f"scenario {scn.name or shown}: protocol={sim.protocol.name} seed={seed} "
          f"steps={sim.step_index} budget={res.budget} ({time.time() - t0:.2f}s)")
    _print_verdicts(res.verdicts)
    if conv is not None and conv.ok:
        print(f"EstablishedAt {conv.step}")
    if any(ev.kind.value == "init_search" for ev in sim.events):
        print("search events:")
        for line in search_timeline(sim):
            print(f"  {line}")
    if "trace" in scn.outputs:
        write_trace(out_dir / scn.outputs["trace"], sim.initial, sim.events, protocol=sim.protocol.name,
                    seed=seed, fairness_bound=sim.fairness_bound, verdicts=res.verdicts,
                    meta={"scenario": scn.name})
    if "summary" in scn.outputs:
        write_summary(out_dir / scn.outputs["summary"], res.verdicts)
    if dots:
        print(f"wrote {len(dots)} DOT snapshots to {out_dir}")
    if res.ok:
        return EXIT_OK
    cmd = ["linstab", "run", shown, "--seed", str(seed)]
    if args.max_steps is not None:
        cmd += ["--max-steps", str(args.max_steps)]
    if args.mutant:
        cmd += ["--mutant", args.mutant]
    print(f"VIOLATION; replay with: {shlex.join(cmd)}")
    return EXIT_VIOLATION


def search_timeline(sim) -> List[str]:
    """Initiation and resolution of each search, in step order."""
    lines = []
    for ev in sim.events:
        k = ev.kind.value
        if k == "init_search":
            lines.append(f"step {ev.step}: node {ev.actor} initiates search #{ev.tag} to {ev.dest}")
        elif k == "deliver" and isinstance(ev.message, Search):
            m = ev.message
            what = "Delivered" if m.dest_id == ev.actor else "dropped at wrong node"
            lines.append(f"step {ev.step}: search #{m.tag} {what} at node {ev.actor}")
    for ev_step, origin, tag in _failures(sim):
        lines.append(f"step {ev_step}: search #{tag} from node {origin} Failed")
    lines.sort(key=lambda s: int(s.split(":")[0].split()[1]))
    return lines


def _failures(sim) -> List[Tuple[int, int, int]]:
    from .sim import Observer, replay

    out: List[Tuple[int, int, int]] = []

    class _F(Observer):
        def on_step(self, s, ev, res):
            if res is not None and isinstance(ev.message, ProbeFail):
                for m in res.dropped:
                    if isinstance(m, Search):
                        out.append((ev.step, m.v, m.tag))

    replay(sim.initial, sim.events, sim.protocol, [_F()])
    return out


# --------------------------------------------------------------------------- fuzz

def cmd_fuzz(args: argparse.Namespace) -> int:
    from .report import write_report
    from .runner import RunConfig, campaign_seeds, pick_n, run_case

    lo, hi = args.n
    flo, fhi = args.leaving_fraction
    if args.protocol == "plus" and fhi > 0:
        raise UsageError("--leaving-fraction needs --protocol star")
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    import random

    results = []
    failing = []
    t0 = time.time()
    for s in campaign_seeds(args.seed, args.runs):
        n = pick_n(s, lo, hi)
        frac = flo if flo == fhi else random.Random(f"{s}:frac").uniform(flo, fhi)
        cfg = RunConfig(n=n, seed=s, protocol=args.protocol, leaving_fraction=frac,
                        fb_scale=args.fb_scale, search_rate=args.search_rate)
        r = run_case(cfg)
        results.append(r)
        log.info("seed %d n=%d steps=%d converged=%s", s, n, r.steps, r.converged_at)
        if not r.ok:
            failing.append(r)
            print(f"seed {s} (n={n}): " + ", ".join(
                f"{v.property} {v.status.value}@{v.step}" for v in r.violations))
    elapsed = time.time() - t0
    out_dir = Path(args.out_dir)
    paths = write_report(out_dir, results, prefix=f"fuzz_{args.protocol}")
    conv = sorted(r.converged_at for r in results if r.converged_at is not None)
    adm = sorted(r.first_admissible for r in results if r.first_admissible is not None)
    print(f"{args.runs} runs of {args.protocol}, n in {lo}..{hi}: {len(failing)} with violations "
          f"({elapsed:.1f}s)")
    if conv:
        print(f"  convergence step: median {conv[len(conv) // 2]}, max {conv[-1]}")
    if adm:
        print(f"  first admissible step: median {adm[len(adm) // 2]}, max {adm[-1]}")
    print("  wrote " + ", ".join(str(p) for p in paths))
    if failing:
        fail_path = out_dir / f"fuzz_{args.protocol}_failing_seeds.txt"
        with open(fail_path, "w") as fh:
            for r in failing:
                cmd = ["linstab", "fuzz", "--n", f"{lo}..{hi}", "--runs", "1", "--seed",
                       str(r.config.seed), "--protocol", args.protocol]
                if fhi > 0:
                    cmd += ["--leaving-fraction", f"{flo}..{fhi}" if flo != fhi else str(flo)]
                if args.fb_scale != 1:
                    cmd += ["--fb-scale", str(args.fb_scale)]
                if args.search_rate:
                    cmd += ["--search-rate", str(args.search_rate)]
                fh.write(shlex.join(cmd) + "\n")
        print(f"VIOLATION; failing seeds with replay commands in {fail_path}")
        return EXIT_VIOLATION
    return EXIT_OK


# --------------------------------------------------------------------------- snapshot

def cmd_snapshot(args: argparse.Namespace) -> int:
    from .sim import replay

    tf = read_trace(args.trace)
    if not 0 <= args.step <= len(tf.events):
        raise UsageError(f"step {args.step} out of range 0..{len(tf.events)}")
    sim = replay(tf.initial, tf.events[:args.step], tf.protocol)
    dot = to_dot(sim.state, f"step {args.step}")
    if args.output:
        Path(args.output).write_text(dot)
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def cmd_search_race(args: argparse.Namespace) -> int:
    from .runner import run_scenario

    scn, _ = resolve_scenario("figure1")
    res = run_scenario(scn)
    for line in search_timeline(res.sim):
        print(line)
    fails = _failures(res.sim)
    delivered = [ev.step for ev in res.sim.events
                 if ev.kind.value == "deliver" and isinstance(ev.message, Search)
                 and ev.message.dest_id == ev.actor]
    order_ok = bool(fails) and bool(delivered) and fails[0][0] < delivered[0]
    print("the later search failed before the earlier one was delivered: "
          + ("yes" if order_ok else "no"))
    _print_verdicts(res.verdicts)
    return EXIT_OK if order_ok and res.ok else EXIT_VIOLATION


# --------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linstab", description="Simulate and check self-stabilizing "
                                "linearization, monotonic searchability and graceful departure.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a scenario file and check its properties")
    r.add_argument("scenario", help="scenario JSON path or bundled name (e.g. figure1)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--max-steps", type=int, default=None)
    r.add_argument("--mutant", default=None, help="run a deliberately broken protocol variant")
    r.add_argument("--out-dir", default=".", help="where trace/summary/DOT outputs go")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fuzz", help="random campaign with every checker attached")
    f.add_argument("--n", type=_int_range, required=True, metavar="A..B")
    f.add_argument("--runs", type=int, required=True)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--protocol", choices=("plus", "star"), default="plus")
    f.add_argument("--leaving-fraction", type=_frac_range, default=(0.0, 0.0), metavar="F|A..B")
    f.add_argument("--fb-scale", type=int, default=1, help="multiply the fairness bound")
    f.add_argument("--search-rate", type=float, default=0.0,
                   help="chance per step of injecting a search in an admissible state")
    f.add_argument("--out-dir", default="linstab-report")
    f.set_defaults(func=cmd_fuzz)

    s = sub.add_parser("snapshot", help="DOT rendering of a trace state")
    s.add_argument("trace")
    s.add_argument("--step", type=int, required=True)
    s.add_argument("-o", "--output", default=None)
    s.set_defaults(func=cmd_snapshot)

    lm = sub.add_parser("search-race", help="replay the bundled three-node search race (figure1)")
    lm.set_defaults(func=cmd_search_race)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
