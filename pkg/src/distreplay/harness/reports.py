"""Cluster histograms, metric summaries and sampler audits."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..clustering import ClusterIndex
from ..errors import AlignmentError, ConfigError
from ..sampling import AuditReport, SamplerConfig, audit_distribution

CLUSTER_HEADER = ("cluster", "count", "share", "cumulative_share")
SUMMARY_HEADER = (
    "strategy",
    "beta",
    "runs",
    "final100_mean",
    "final100_sd",
    "auc_mean",
    "auc_sd",
    "auc_wins_vs_baseline",
    "paired_seeds",
)


# --------------------------------------------------------------------------
# cluster histogram


@dataclass(frozen=True)
class ClusterRow:
    code: int
    count: int
    share: float
    cumulative_share: float


def cluster_report(index: ClusterIndex) -> list[ClusterRow]:
    """Nonempty clusters sorted by count, largest first (ties by code)."""
    clusters = sorted(index.nonempty_clusters(), key=lambda cc: (-cc[1], cc[0]))
    total = sum(count for _, count in clusters)
    rows, running = [], 0
    for code, count in clusters:
        running += count
        rows.append(ClusterRow(code, count, count / total, running / total))
    return rows


def top_share(rows: Sequence[ClusterRow], fraction: float = 0.2) -> float:
    """Share of transitions held by the largest ``floor(fraction * k)`` clusters (at least one)."""
    if not rows:
        return 0.0
    top = max(1, math.floor(fraction * len(rows)))
    return rows[top - 1].cumulative_share


def write_cluster_report(rows: Iterable[ClusterRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CLUSTER_HEADER)
        for r in rows:
            writer.writerow((r.code, r.count, repr(r.share), repr(r.cumulative_share)))


# --------------------------------------------------------------------------
# metrics


@dataclass
class Run:
    run_id: str
    strategy: str
    beta: float
    seed: int
    total_reward: np.ndarray
    mean_reward_100: np.ndarray

    @property
    def label(self) -> tuple[str, float]:
        return self.strategy, self.beta


def load_metrics(paths: Sequence) -> list[Run]:
    """Read metrics CSVs into runs; a run appearing in several files is kept once."""
    from .experiment import METRICS_HEADER

    rows_by_run: dict[str, list[dict]] = {}
    for path in paths:
        try:
            fh = open(path, newline="")
        except OSError as exc:
            raise ConfigError(f"cannot read metrics file {path}: {exc}") from None
        with fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != METRICS_HEADER:
                raise ConfigError(f"{path}: header does not match {','.join(METRICS_HEADER)}")
            seen_here: dict[str, list[dict]] = defaultdict(list)
            for row in reader:
                seen_here[row["run_id"]].append(row)
        for rid, rows in seen_here.items():
            rows_by_run.setdefault(rid, rows)
    if not rows_by_run:
        raise ConfigError("no metric rows found")
    runs = []
    for rid, rows in rows_by_run.items():
        rows.sort(key=lambda r: int(r["episode"]))
        runs.append(
            Run(
                rid,
                rows[0]["strategy"],
                float(rows[0]["beta"]),
                int(rows[0]["seed"]),
                np.array([float(r["total_reward"]) for r in rows]),
                np.array([float(r["mean_reward_100"]) for r in rows]),
            )
        )
    return runs


def auc(series: np.ndarray) -> float:
    """Area under a per-episode curve: the plain sum, one unit of width per episode."""
    return float(np.sum(series))


def final_mean(total_reward: np.ndarray, window: int = 100) -> float:
    return float(np.mean(total_reward[-window:]))


@dataclass
class SummaryRow:
    strategy: str
    beta: float
    runs: int
    final100_mean: float
    final100_sd: float
    auc_mean: float
    auc_sd: float
    wins: int | None
    paired: int | None

    def as_tuple(self) -> tuple:
        return (
            self.strategy, repr(self.beta), self.runs,
            repr(self.final100_mean), repr(self.final100_sd),
            repr(self.auc_mean), repr(self.auc_sd),
            "" if self.wins is None else self.wins,
            "" if self.paired is None else self.paired,
        )


def _sd(x: list[float]) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


def compare(runs: Sequence[Run], baseline: str = "uniform") -> list[SummaryRow]:
    """Per ``(strategy, beta)``: final-100 reward and AUC stats, plus paired AUC wins.

    Wins are counted per seed against the baseline group (``uniform`` if
    present, otherwise the first group seen).  All runs must have the same
    number of episodes.
    """
    lengths = {len(r.mean_reward_100) for r in runs}
    if len(lengths) != 1:
        raise AlignmentError(f"runs have differing episode counts: {sorted(lengths)}")
    groups: dict[tuple[str, float], list[Run]] = {}
    for r in runs:
        groups.setdefault(r.label, []).append(r)
    base_label = next((lab for lab in groups if lab[0] == baseline), next(iter(groups)))
    base_auc = {r.seed: auc(r.mean_reward_100) for r in groups[base_label]}

    out = []
    for label, members in groups.items():
        finals = [final_mean(r.total_reward) for r in members]
        aucs = [auc(r.mean_reward_100) for r in members]
        wins = paired = None
        if label != base_label:
            pairs = [(auc(r.mean_reward_100), base_auc[r.seed]) for r in members if r.seed in base_auc]
            paired = len(pairs)
            wins = sum(1 for mine, theirs in pairs if mine > theirs)
        out.append(
            SummaryRow(label[0], label[1], len(members), float(np.mean(finals)), _sd(finals),
                       float(np.mean(aucs)), _sd(aucs), wins, paired)
        )
    return out


def write_summary(rows: Sequence[SummaryRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(r.as_tuple() for r in rows)


def format_summary(rows: Sequence[SummaryRow]) -> str:
    lines = [f"{'strategy':<20} {'beta':>5} {'runs':>4} {'final100':>20} {'AUC':>26} {'wins':>7}"]
    for r in rows:
        wins = "-" if r.wins is None else f"{r.wins}/{r.paired}"
        lines.append(
            f"{r.strategy:<20} {r.beta:>5g} {r.runs:>4} "
            f"{r.final100_mean:>10.2f} ± {r.final100_sd:<7.2f} "
            f"{r.auc_mean:>14.1f} ± {r.auc_sd:<9.1f} {wins:>7}"
        )
    return "\n".join(lines)


# --------------------------------------------------------------------------
# audit


AUDIT_HEADER = ("strategy", "beta", "slot", "analytic", "empirical", "deviation")


def corrupt_index(index: ClusterIndex) -> None:
    """Fault injection: file slot of the first member of one cluster under a second cluster too.

    Bypasses the public API on purpose; used to check that audits fail loudly.
    """
    rows, counts, members = index.sampling_arrays()
    if rows.size == 0:
        return
    src, dst = int(rows[0]), int(rows[-1])
    slot = int(members[src, 0])
    if dst == src:
        index._counts[src] += 1
        return
    c = int(counts[dst])
    if c == members.shape[1]:
        index._members = np.hstack([members, np.zeros_like(members)])
    index._members[dst, c] = slot
    index._counts[dst] = c + 1


def run_audit(cfg, fault: bool = False) -> list[tuple[SamplerConfig, AuditReport]]:
    """Audit every sampler of ``cfg`` on a buffer filled by a random policy.

    The buffer holds ``cfg.audit_transitions`` transitions collected from
    the configured environment; each sampler is drawn ``cfg.audit_draws``
    times.  ``fault`` corrupts the index first, which must make the audit
    fail.
    """
    from .experiment import collect_random

    n = cfg.audit_transitions
    buffer, index = collect_random(cfg, n, n, cfg.master_seed)
    if fault:
        corrupt_index(index)
    rng = np.random.default_rng(cfg.master_seed)
    return [
        (s, audit_distribution(cfg.audit_draws, s, len(buffer), index, rng))
        for s in cfg.sampler_configs()
    ]


def write_audit(results: Sequence[tuple[SamplerConfig, AuditReport]], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AUDIT_HEADER)
        for s, report in results:
            for slot, a, e, d in report.rows():
                writer.writerow((s.strategy.value, repr(s.effective_beta), slot, repr(a), repr(e), repr(d)))
