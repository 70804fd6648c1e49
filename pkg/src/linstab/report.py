"""Campaign summaries: one CSV row per run plus two PNG figures."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .runner import RunResult  # noqa: E402

COLUMNS = ["seed", "protocol", "n", "fb", "budget", "steps", "converged_at", "first_admissible",
           "phi_final", "leaving", "exits", "searches", "max_timeout_gap", "max_channel_wait",
           "violations", "digest"]


def write_csv(path: Path, results: Sequence[RunResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for r in results:
            w.writerow(r.row())


def plot_phi(path: Path, results: Sequence[RunResult], max_lines: int = 40) -> None:
    """Potential over time for up to ``max_lines`` runs, normalised by 2(n-1)."""
    fig, ax = plt.subplots(figsize=(7, 4))
    drawn = 0
    for r in results:
        if not r.phi_trace or drawn >= max_lines:
            continue
        floor = max(1, 2 * (r.n - 1))
        xs = [k for k, _ in r.phi_trace] + [r.steps]
        ys = [v / floor for _, v in r.phi_trace]
        ys.append(ys[-1])
        ax.step(xs, ys, where="post", linewidth=0.8, alpha=0.7)
        drawn += 1
    ax.axhline(1.0, color="black", linestyle="--", linewidth=0.8, label="line value 2(n-1)")
    ax.set_xlabel("step")
    ax.set_ylabel("Φ / 2(n-1)")
    ax.set_title(f"Potential trajectories ({drawn} runs)" if drawn else "No potential data")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_convergence(path: Path, results: Sequence[RunResult]) -> None:
    """Histogram of convergence steps, one colour per network size bucket."""
    by_n: Dict[int, List[int]] = {}
    for r in results:
        if r.converged_at is not None:
            by_n.setdefault(r.n, []).append(r.converged_at)
    fig, ax = plt.subplots(figsize=(7, 4))
    if by_n:
        ns = sorted(by_n)
        ax.hist([by_n[n] for n in ns], bins=30, stacked=True, label=[f"n={n}" for n in ns])
        ax.legend(fontsize="small", ncol=2)
    missing = sum(1 for r in results if r.converged_at is None)
    ax.set_xlabel("convergence step")
    ax.set_ylabel("runs")
    ax.set_title(f"Convergence steps ({len(results) - missing} converged, {missing} not)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(out_dir: Path, results: Sequence[RunResult], prefix: str = "fuzz") -> List[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"{prefix}_summary.csv", out_dir / f"{prefix}_phi.png",
             out_dir / f"{prefix}_convergence.png"]
    write_csv(paths[0], results)
    plot_phi(paths[1], results)
    plot_convergence(paths[2], results)
    return paths
