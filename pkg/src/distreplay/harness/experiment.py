"""Building runs from an :class:`ExperimentConfig` and executing sweeps."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..clustering import ClusterIndex, Featurizer, KMeansClusterer, SimHashClusterer, reindex
from ..envs import ChainMDP, GridWorld, MountainCar
from ..errors import ConfigError
from ..qlearn import EpisodeStats, TrainConfig, TrainState, default_q, train
from ..replay import ReplayBuffer
from ..sampling import SamplerConfig
from .config import ExperimentConfig, run_id, run_seed
from .reports import cluster_report, write_cluster_report

METRICS_HEADER = (
    "run_id",
    "strategy",
    "beta",
    "seed",
    "episode",
    "total_reward",
    "mean_reward_100",
    "wall_steps",
)


def make_env(cfg: ExperimentConfig, seed: int = 0):
    if cfg.env == "gridworld":
        kwargs = {"seed": seed}
        if cfg.max_steps is not None:
            kwargs["max_steps"] = cfg.max_steps
        if cfg.map:
            return GridWorld.from_file(cfg.map, **kwargs)
        return GridWorld(cfg.grid_width, cfg.grid_height, **kwargs)
    if cfg.env == "chain":
        return ChainMDP(cfg.chain_states, slip=cfg.slip, max_steps=cfg.max_steps or 100, seed=seed)
    return MountainCar(max_steps=cfg.max_steps or 200, seed=seed)


def make_clusterer(cfg: ExperimentConfig, env, seed: int):
    spec = env.spec
    featurizer = Featurizer(spec.state_dim, spec.low, spec.high, seed=seed)
    if cfg.clusterer == "simhash":
        return SimHashClusterer(featurizer, k_target=cfg.clusters, seed=seed, code_bits=cfg.code_bits)
    return KMeansClusterer(
        featurizer,
        k=cfg.clusters,
        warmup_size=cfg.kmeans_warmup,
        refit_interval=cfg.kmeans_refit,
        seed=seed % (2**32),
    )


def train_config(cfg: ExperimentConfig, sampler: SamplerConfig, max_steps: int) -> TrainConfig:
    return TrainConfig(
        alpha=cfg.alpha,
        gamma=cfg.gamma,
        epsilon_start=cfg.epsilon_start,
        epsilon_end=cfg.epsilon_end,
        epsilon_anneal_steps=cfg.epsilon_anneal_steps,
        episodes=cfg.episodes,
        max_steps=max_steps,
        target_sync=cfg.target_sync,
        batch_size=cfg.batch_size,
        warmup=cfg.warmup,
        sampler=sampler,
    )


@dataclass
class RunResult:
    run_id: str
    sampler: SamplerConfig
    seed: int
    stats: list[EpisodeStats]
    cluster_rows: list

    def metric_rows(self) -> list[tuple]:
        s = self.sampler
        return [
            (self.run_id, s.strategy.value, repr(s.effective_beta), self.seed, e.episode,
             repr(float(e.total_reward)), repr(float(e.mean_reward_100)), e.wall_steps)
            for e in self.stats
        ]


def run_one(cfg: ExperimentConfig, sampler: SamplerConfig, seed: int) -> RunResult:
    """Train one ``(sampler, seed)`` combination of ``cfg``."""
    derived = run_seed(cfg.master_seed, sampler, seed)
    env = make_env(cfg, seed=derived % (2**32))
    clusterer = make_clusterer(cfg, env, derived % (2**32))
    buffer = ReplayBuffer(cfg.buffer_size, env.spec.state_dim)
    state = TrainState(None, None, buffer, ClusterIndex())
    stats = train(
        env,
        train_config(cfg, sampler, env.spec.max_steps),
        clusterer,
        buffer,
        seed=derived,
        q=default_q(env, cfg.bins),
        state=state,
    )
    return RunResult(run_id(sampler, seed), sampler, seed, stats, cluster_report(state.index))


def _run_task(args):
    return run_one(*args)


def _csv_text(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, log=print) -> Path:
    """Run every ``(sampler, seed)`` pair and write per-run and merged CSVs.

    Layout under ``cfg.out``::

        runs/<run_id>.csv        metrics, one row per episode
        clusters/<run_id>.csv    final cluster histogram of the run
        metrics.csv              all runs concatenated in config order
        config.txt               the resolved configuration

    Returns the path of the merged CSV.
    """
    out = Path(cfg.out)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "clusters").mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, sampler, seed) for sampler in cfg.sampler_configs() for seed in cfg.seeds]
    ids = [run_id(s, seed) for _, s, seed in tasks]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate (strategy, beta, seed) combinations in config")

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = []
        for task in tasks:
            results.append(run_one(*task))
            r = results[-1]
            log(f"{r.run_id}: final mean_reward_100 = {r.stats[-1].mean_reward_100:.2f}")

    merged = []
    for r in results:
        rows = r.metric_rows()
        (out / "runs" / f"{r.run_id}.csv").write_text(_csv_text(rows, METRICS_HEADER))
        write_cluster_report(r.cluster_rows, out / "clusters" / f"{r.run_id}.csv")
        merged.extend(rows)
    (out / "config.txt").write_text(cfg.to_text())
    merged_path = out / "metrics.csv"
    merged_path.write_text(_csv_text(merged, METRICS_HEADER))
    return merged_path


def collect_random(cfg: ExperimentConfig, steps: int, capacity: int, seed: int):
    """Fill a buffer and index by running a uniformly random policy for ``steps`` steps."""
    env = make_env(cfg, seed=seed)
    clusterer = make_clusterer(cfg, env, seed)
    buffer = ReplayBuffer(capacity, env.spec.state_dim)
    index = ClusterIndex()
    rng = np.random.default_rng(seed)
    actions = rng.integers(env.spec.action_count, size=steps)
    s = env.reset(seed=seed)
    inserts = 0
    for a in actions.tolist():
        s2, r, done, terminal = env.step(a)
        slot, evicted = buffer.insert_raw(s, a, r, s2, terminal)
        if evicted is not None:
            index.remove(slot, index.cluster_of(slot))
        index.insert(slot, clusterer.code(s))
        inserts += 1
        if clusterer.wants_fit(inserts):
            states = buffer.states()
            clusterer.fit(states)
            reindex(index, clusterer.codes(states))
        s = env.reset() if done else s2
    if not clusterer.ready:
        # Too few steps to reach the k-means warmup size: fit on what we have.
        if len(buffer) >= getattr(clusterer, "k", 1):
            states = buffer.states()
            clusterer.fit(states)
            reindex(index, clusterer.codes(states))
    return buffer, index
