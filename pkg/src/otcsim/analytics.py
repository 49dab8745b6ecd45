"""Statistics and experiment harnesses over simulation output.

Two notions of "price" are used deliberately: headline return statistics
use the global mean of dealer mids, while the network-structure sweeps
pool 50-tick changes of every individual dealer mid. Unless a caller says
otherwise, statistics are computed on the trained regime only, i.e. ticks
after every trend investor has reached the epsilon floor.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from otcsim.config import SimConfig
from otcsim.engine import Simulation
from otcsim.network import market_maker_components

# ----------------------------------------------------------------------
# Moment estimators (Pearson convention: a normal sample scores 3)


def _centered(xs) -> tuple[np.ndarray, float]:
    xs = np.asarray(xs, dtype=float)
    if xs.size < 4:
        raise ValueError("sample too small for moment estimates (need >= 4)")
    centered = xs - xs.mean()
    m2 = float(np.mean(centered * centered))
    if m2 == 0.0:
        raise ValueError("degenerate sample: zero variance")
    return centered, m2


def kurtosis(xs) -> float:
    """Fourth standardized central moment m4 / m2^2."""
    centered, m2 = _centered(xs)
    return float(np.mean(centered**4) / (m2 * m2))


def skewness(xs) -> float:
    """Third standardized central moment m3 / m2^1.5."""
    centered, m2 = _centered(xs)
    return float(np.mean(centered**3) / m2**1.5)


def return_series(series, window: int = 50) -> np.ndarray:
    """Non-overlapping price changes P(k*w) - P((k-1)*w).

    Windows tile the series exhaustively, so consecutive changes telescope
    to P(end of covered span) - P(start).
    """
    series = np.asarray(series, dtype=float)
    n = (len(series) - 1) // window
    if n < 1:
        return np.empty(0)
    return np.diff(series[np.arange(n + 1) * window])


# ----------------------------------------------------------------------
# Power-law rank fit


@dataclass(frozen=True)
class ZipfFit:
    slope: float
    r_squared: float
    n_used: int
    top_rank_fraction: float


def zipf_fit(values, top_rank_fraction: float = 0.9) -> ZipfFit:
    """Least-squares log(value) on log(rank), values sorted descending.

    Only strictly positive values participate. The smallest-ranked tail is
    excluded by default (finite samples bend there); `n_used` records how
    many ranks entered the fit. Constant input fits slope 0 exactly, which
    is reported with r_squared 1.
    """
    vals = np.asarray(values, dtype=float)
    vals = vals[vals > 0]
    if vals.size < 10:
        raise ValueError("need at least 10 strictly positive values")
    vals = np.sort(vals)[::-1]
    n_used = max(2, int(np.ceil(vals.size * top_rank_fraction)))
    if vals[0] == vals[n_used - 1]:  # constant input fits a flat line exactly
        return ZipfFit(0.0, 1.0, n_used, top_rank_fraction)
    y = np.log(vals[:n_used])
    x = np.log(np.arange(1, n_used + 1, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    ss_res = float(residual @ residual)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return ZipfFit(float(slope), r2, n_used, top_rank_fraction)


# ----------------------------------------------------------------------
# Cross-dealer structure


def arbitrage_series(dealer_mids, bid_offer: float) -> np.ndarray:
    """Best bid minus best offer across dealers, per tick.

    Positive values are executable arbitrage; with all mids equal the
    value is exactly -bid_offer, its lower bound.
    """
    mids = np.asarray(dealer_mids, dtype=float)
    if mids.ndim != 2 or mids.shape[1] < 2:
        raise ValueError("need mid histories for at least two dealers")
    return mids.max(axis=1) - mids.min(axis=1) - bid_offer


@dataclass(frozen=True)
class ConvergenceReport:
    terminal_mean: float
    target_mean: float
    gap: float
    applicable: bool


def mean_convergence_check(
    mean_mids, targets, window: int = 500
) -> ConvergenceReport:
    """Mean of the final window of the global mid versus the unweighted
    investor target mean; not applicable without value investors."""
    targets = np.asarray(targets, dtype=float)
    if targets.size == 0:
        return ConvergenceReport(float("nan"), float("nan"), float("nan"), False)
    terminal = float(np.mean(np.asarray(mean_mids, dtype=float)[-window:]))
    target_mean = float(targets.mean())
    return ConvergenceReport(terminal, target_mean, terminal - target_mean, True)


# ----------------------------------------------------------------------
# Trend investor behaviour

#: Decision records are tuples of
#: (tick, agent slot, action, visible price, visible price 50 ticks back,
#:  visible min so far, visible max so far), as produced by the engine.


def action_histogram(decisions, n_actions: int = 7) -> dict[int, np.ndarray]:
    """Per-agent action counts over the decision log."""
    counts: dict[int, np.ndarray] = {}
    for rec in decisions:
        slot, action = rec[1], rec[2]
        if slot not in counts:
            counts[slot] = np.zeros(n_actions, dtype=np.int64)
        counts[slot][action] += 1
    return counts


@dataclass(frozen=True)
class StrategyProfile:
    momentum: dict[int, np.ndarray]  # action -> momentum at decision time
    percentile: dict[int, np.ndarray]  # action -> range percentile [0, 100]


def strategy_state_analysis(decisions, n_actions: int = 7) -> StrategyProfile:
    """Momentum and range percentile of the visible price at each decision.

    Momentum is the visible price now minus 50 ticks before; percentile is
    where the price sits inside the agent's full observed range, 0 to 100
    (a flat range degenerates to 50).
    """
    momentum: dict[int, list] = {a: [] for a in range(n_actions)}
    percentile: dict[int, list] = {a: [] for a in range(n_actions)}
    for _, _, action, price, price_back, vmin, vmax in decisions:
        momentum[action].append(price - price_back)
        span = vmax - vmin
        percentile[action].append(50.0 if span <= 0 else 100.0 * (price - vmin) / span)
    return StrategyProfile(
        {a: np.asarray(v) for a, v in momentum.items()},
        {a: np.asarray(v) for a, v in percentile.items()},
    )


def pca_weights(weight_vectors) -> np.ndarray:
    """Project flattened per-agent weight vectors onto their top two
    principal components (via SVD of the centered matrix)."""
    w = np.asarray(weight_vectors, dtype=float)
    if w.ndim != 2:
        raise ValueError("weight vectors must share one common dimension")
    if w.shape[0] < 3:
        raise ValueError("need at least 3 weight snapshots")
    centered = w - w.mean(axis=0)
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    return u[:, :2] * s[:2]


# ----------------------------------------------------------------------
# Run harness


@dataclass
class RunSummary:
    """Trained-regime statistics of one simulation run."""

    seed: int
    prob_of_link: float
    trained_tick: int
    total_ticks: int
    global_changes: np.ndarray
    global_kurtosis: float
    return_skewness: float
    pooled_mm_kurtosis: float
    arbitrage_max: float
    arbitrage_positive_mean: float
    arbitrage_positive_fraction: float
    component_count: int
    mean_total_dealer_inventory: float
    target_mean: float
    terminal_mean_mid: float
    # final-500 mean of the first 3000 post-floor ticks minus the target
    # mean: the convergence yardstick at the usual 3000-tick horizon
    convergence_gap_3000: float
    final_epsilons: np.ndarray
    post_floor_mse: list[np.ndarray]
    profit_points: np.ndarray  # (k, 2): tick, pooled trend investor profit
    decision_actions: np.ndarray  # post-floor decisions only
    decision_slots: np.ndarray
    decision_percentiles: np.ndarray
    decision_momentum: np.ndarray

    def brief(self) -> dict:
        """Scalar statistics only; what sweep replicates persist to disk."""
        return {
            "seed": self.seed,
            "prob_of_link": self.prob_of_link,
            "trained_tick": self.trained_tick,
            "total_ticks": self.total_ticks,
            "global_kurtosis": self.global_kurtosis,
            "return_skewness": self.return_skewness,
            "pooled_mm_kurtosis": self.pooled_mm_kurtosis,
            "arbitrage_max": self.arbitrage_max,
            "arbitrage_positive_mean": self.arbitrage_positive_mean,
            "arbitrage_positive_fraction": self.arbitrage_positive_fraction,
            "component_count": self.component_count,
            "mean_total_dealer_inventory": self.mean_total_dealer_inventory,
            "target_mean": self.target_mean,
            "terminal_mean_mid": self.terminal_mean_mid,
            "convergence_gap_3000": self.convergence_gap_3000,
        }


def summarize_run(sim: Simulation, from_tick: int | None = None) -> RunSummary:
    """Condense a finished simulation into the trained-regime statistics."""
    cfg = sim.config
    start = sim.trained_tick if from_tick is None else from_tick
    if start is None:
        raise ValueError("simulation has not reached the trained regime")
    mean_series = sim.mean_mid_history[start:]
    mm_series = sim.mid_history[start:]
    changes = return_series(mean_series, 50)
    pooled = np.concatenate(
        [return_series(mm_series[:, m], 50) for m in range(cfg.n_dealers)]
    )
    arb = (
        arbitrage_series(mm_series, cfg.bid_offer)
        if cfg.n_dealers >= 2
        else np.full(len(mm_series), -cfg.bid_offer)
    )
    positive = arb[arb > 0]

    decisions = [d for d in sim.decisions if d[0] >= start]
    dec_actions = np.asarray([d[2] for d in decisions], dtype=np.int64)
    dec_slots = np.asarray([d[1] for d in decisions], dtype=np.int64)
    dec_perc = np.asarray(
        [
            50.0 if (d[6] - d[5]) <= 0 else 100.0 * (d[3] - d[5]) / (d[6] - d[5])
            for d in decisions
        ]
    )
    dec_mom = np.asarray([d[3] - d[4] for d in decisions])

    mse_rows: list[np.ndarray] = []
    events = []
    for i, agent in enumerate(sim.trends):
        rows = agent.telemetry
        mse_rows.append(np.asarray([r[3] for r in rows if r[0] >= start]))
        events.extend((r[0], i, r[4]) for r in rows)
    events.sort()
    current = np.zeros(max(1, len(sim.trends)))
    points = np.empty((len(events), 2))
    for k, (tick, i, profit) in enumerate(events):
        current[i] = profit
        points[k] = (tick, current.sum())

    return RunSummary(
        seed=sim.seed,
        prob_of_link=cfg.prob_of_link,
        trained_tick=start,
        total_ticks=sim.tick,
        global_changes=changes,
        global_kurtosis=kurtosis(changes),
        return_skewness=skewness(changes),
        pooled_mm_kurtosis=kurtosis(pooled),
        arbitrage_max=float(arb.max()),
        arbitrage_positive_mean=float(positive.mean()) if positive.size else 0.0,
        arbitrage_positive_fraction=float(positive.size / arb.size),
        component_count=len(market_maker_components(sim.net)),
        mean_total_dealer_inventory=float(sim.dealer_inventory_history[start:].mean()),
        target_mean=float(sim.vi_targets.mean()) if sim.vi_targets.size else float("nan"),
        terminal_mean_mid=float(np.mean(mean_series[-500:])),
        convergence_gap_3000=(
            float(np.mean(mean_series[2501:3001]))
            - (float(sim.vi_targets.mean()) if sim.vi_targets.size else float("nan"))
            if len(mean_series) >= 3001
            else float("nan")
        ),
        final_epsilons=np.asarray([a.epsilon for a in sim.trends]),
        post_floor_mse=mse_rows,
        profit_points=points,
        decision_actions=dec_actions,
        decision_slots=dec_slots,
        decision_percentiles=dec_perc,
        decision_momentum=dec_mom,
    )


def skew_vs_positioning(runs: list[RunSummary]) -> list[tuple[float, float]]:
    """Pair each run's time-averaged dealer inventory with the skewness of
    its return series; the raw material of the positioning/skew relation."""
    if len(runs) < 2:
        raise ValueError("need at least 2 completed runs")
    return [(r.mean_total_dealer_inventory, r.return_skewness) for r in runs]


def run_trained(
    config: SimConfig,
    seed: int,
    measure_ticks: int = 25_000,
    max_ticks: int = 1_500_000,
) -> RunSummary:
    """Run a fresh simulation through training plus a measurement window."""
    sim = Simulation(config, seed=seed)
    sim.run_until_trained(max_ticks)
    sim.run(measure_ticks)
    return summarize_run(sim)


def _trained_run_job(args) -> RunSummary:
    config, seed, measure_ticks = args
    return run_trained(config, seed, measure_ticks)


def run_ensemble(
    jobs: list[tuple[SimConfig, int, int]], workers: int | None = None
) -> list[RunSummary]:
    """Run (config, seed, measure_ticks) jobs across a process pool,
    preserving job order in the result list."""
    workers = workers or os.cpu_count() or 1
    if workers <= 1 or len(jobs) <= 1:
        return [_trained_run_job(j) for j in jobs]
    with get_context("fork").Pool(workers) as pool:
        return pool.map(_trained_run_job, jobs, chunksize=1)


# ----------------------------------------------------------------------
# Link-probability sweep


@dataclass
class SweepPoint:
    """Aggregate over the replicate runs at one link probability."""

    prob_of_link: float
    seeds: list[int]
    replicates: list[dict]  # RunSummary.brief() per replicate
    kurtosis_mean: float
    kurtosis_stderr: float
    arbitrage_max_mean: float
    arbitrage_positive_mean: float
    component_count_mean: float


def _aggregate_point(p: float, seeds: list[int], runs: list[dict]) -> SweepPoint:
    kurt = np.asarray([r["pooled_mm_kurtosis"] for r in runs])
    return SweepPoint(
        prob_of_link=p,
        seeds=seeds,
        replicates=runs,
        kurtosis_mean=float(kurt.mean()),
        kurtosis_stderr=float(kurt.std(ddof=1) / np.sqrt(len(kurt))) if len(kurt) > 1 else 0.0,
        arbitrage_max_mean=float(np.mean([r["arbitrage_max"] for r in runs])),
        arbitrage_positive_mean=float(np.mean([r["arbitrage_positive_mean"] for r in runs])),
        component_count_mean=float(np.mean([r["component_count"] for r in runs])),
    )


def _sweep_job(args) -> dict:
    config, seed, measure_ticks, cache_file = args
    if cache_file is not None and cache_file.exists():
        return json.loads(cache_file.read_text())
    brief = run_trained(config, seed, measure_ticks).brief()
    if cache_file is not None:
        cache_file.write_text(json.dumps(brief, sort_keys=True))
    return brief


def sweep_link_probability(
    config: SimConfig,
    p_values,
    replicates: int = 8,
    base_seed: int = 1_000,
    measure_ticks: int = 15_000,
    workers: int | None = None,
    cache_dir: str | Path | None = None,
    progress=None,
) -> list[SweepPoint]:
    """Trained-regime statistics across link probabilities.

    Each (p, replicate) pair maps to a fixed seed, so a given seed list
    always reproduces the same SweepPoint aggregates. With `cache_dir`
    set, completed replicates persist as JSON keyed by (p, seed) and an
    interrupted sweep resumes from them.
    """
    cache = Path(cache_dir) if cache_dir is not None else None
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)
    jobs = []
    seed_lists = []
    for pi, p in enumerate(p_values):
        seeds = [base_seed + 1000 * pi + r for r in range(replicates)]
        seed_lists.append(seeds)
        for s in seeds:
            cache_file = (
                cache / f"p{float(p):.4f}_seed{s}.json" if cache is not None else None
            )
            jobs.append(
                (config.replace(prob_of_link=float(p), rng_seed=s), s, measure_ticks, cache_file)
            )
    workers = workers or os.cpu_count() or 1
    results: list[dict | None] = [None] * len(jobs)
    if workers <= 1:
        for i, job in enumerate(jobs):
            results[i] = _sweep_job(job)
            if progress:
                progress(i + 1, len(jobs))
    else:
        with get_context("fork").Pool(workers) as pool:
            for n_done, (i, brief) in enumerate(
                pool.imap_unordered(_indexed_sweep_job, list(enumerate(jobs)), chunksize=1)
            ):
                results[i] = brief
                if progress:
                    progress(n_done + 1, len(jobs))
    points = []
    for pi, p in enumerate(p_values):
        runs = results[pi * replicates : (pi + 1) * replicates]
        points.append(_aggregate_point(float(p), seed_lists[pi], runs))
    return points


def _indexed_sweep_job(pair):
    index, job = pair
    return index, _sweep_job(job)
