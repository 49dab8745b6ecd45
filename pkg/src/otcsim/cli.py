"""Batch entry point: run simulations, train agents, run experiments, export data.

Every artifact embeds the fully resolved configuration and seed, and a
repeated invocation with the same arguments reproduces identical bytes.
Exit codes: 0 ok, 1 configuration/argument error, 2 runtime error.

The `serve` and `session` commands expose the same engine through the
control service; `session` is a thin HTTP client against a running server.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

import otcsim  # noqa: F401  (pins BLAS threads before numpy spins up)
from otcsim import analytics, neural
from otcsim.config import ConfigError, SimConfig, load_config
from otcsim.engine import Simulation

_PARAM_FLAGS = {
    "n-value-investors": ("n_value_investors", int),
    "n-trend-investors": ("n_trend_investors", int),
    "n-dealers": ("n_dealers", int),
    "bid-offer": ("bid_offer", float),
    "dealer-position-limit": ("dealer_position_limit", float),
    "prob-of-link": ("prob_of_link", float),
    "trade-size-cap": ("trade_size_cap", float),
    "market-disparity": ("market_disparity", float),
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="flat key = value config file")
    for flag, (_, kind) in _PARAM_FLAGS.items():
        p.add_argument(f"--{flag}", type=kind, default=None)
    p.add_argument("--enable-broker-market", dest="enable_broker_market",
                   action="store_true", default=None)
    p.add_argument("--disable-broker-market", dest="enable_broker_market",
                   action="store_false")
    p.add_argument("--seed", type=int, default=None)


def _resolve_config(args) -> SimConfig:
    overrides = {}
    for flag, (field, _) in _PARAM_FLAGS.items():
        value = getattr(args, flag.replace("-", "_"))
        if value is not None:
            overrides[field] = value
    if args.enable_broker_market is not None:
        overrides["enable_broker_market"] = args.enable_broker_market
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    return load_config(args.config, overrides)


# ----------------------------------------------------------------------
# Artifact writers


def _meta_line(config: SimConfig) -> str:
    return f"# config_fingerprint={config.fingerprint()} seed={config.rng_seed}\n"


def _write_history_csv(sim: Simulation, path: Path) -> None:
    cfg = sim.config
    cols = (
        ["tick"]
        + [f"mm_{m}" for m in range(cfg.n_dealers)]
        + ["mean_mid", "total_dealer_inventory"]
    )
    with path.open("w") as fh:
        fh.write(_meta_line(cfg))
        fh.write(",".join(cols) + "\n")
        mids = sim.mid_history
        means = sim.mean_mid_history
        inv = sim.dealer_inventory_history
        for t in range(len(means)):
            row = (
                [str(t)]
                + [repr(float(v)) for v in mids[t]]
                + [repr(float(means[t])), repr(float(inv[t]))]
            )
            fh.write(",".join(row) + "\n")


def _write_trades_csv(sim: Simulation, path: Path) -> None:
    with path.open("w") as fh:
        fh.write(_meta_line(sim.config))
        fh.write("tick,buyer,seller,mm,price,size,flag\n")
        for t in sim.trades:
            fh.write(
                f"{t.tick},{t.buyer},{t.seller},{t.dealer},{t.price!r},{t.size!r},{t.flag}\n"
            )


def _write_actions_csv(sim: Simulation, path: Path) -> None:
    with path.open("w") as fh:
        fh.write(_meta_line(sim.config))
        fh.write("tick,agent,action,visible_price,visible_price_50_back,visible_min,visible_max\n")
        for tick, slot, action, price, back, vmin, vmax in sim.decisions:
            fh.write(f"{tick},{slot},{action},{price!r},{back!r},{vmin!r},{vmax!r}\n")


def _write_telemetry_csv(sim: Simulation, path: Path) -> None:
    with path.open("w") as fh:
        fh.write(_meta_line(sim.config))
        fh.write("agent,tick,update,epsilon,batch_mse,cumulative_profit\n")
        for slot, agent in enumerate(sim.trends):
            for tick, update, eps, mse, profit in agent.telemetry:
                fh.write(f"{slot},{tick},{update},{eps!r},{mse!r},{profit!r}\n")


def _write_snapshot(sim: Simulation, path: Path) -> None:
    path.write_text(json.dumps(sim.snapshot(), indent=2, sort_keys=True) + "\n")


def _write_weights(sim: Simulation, out_dir: Path) -> list[Path]:
    paths = []
    for slot, agent in enumerate(sim.trends):
        doc = {
            "agent": slot,
            "epsilon": agent.epsilon,
            "layers": neural.weight_snapshot(agent.online),
        }
        p = out_dir / f"weights_agent{slot}.json"
        p.write_text(json.dumps(doc, sort_keys=True))
        paths.append(p)
    return paths


def _write_run_artifacts(sim: Simulation, out: Path, extra_meta: dict | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _write_history_csv(sim, out / "history.csv")
    _write_trades_csv(sim, out / "trades.csv")
    _write_actions_csv(sim, out / "actions.csv")
    _write_telemetry_csv(sim, out / "telemetry.csv")
    _write_snapshot(sim, out / "snapshot.json")
    meta = {
        "config": sim.config.to_dict(),
        "seed": sim.seed,
        "fingerprint": sim.config.replace(rng_seed=sim.seed).fingerprint(),
        "ticks": sim.tick,
        "trained_tick": sim.trained_tick,
        "n_trades": len(sim.trades),
    }
    if extra_meta:
        meta.update(extra_meta)
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


# ----------------------------------------------------------------------
# Commands


def cmd_run(args) -> int:
    config = _resolve_config(args)
    sim = Simulation(config)
    if args.freeze_weights:
        _load_frozen(sim, Path(args.freeze_weights))
    if args.until_trained:
        sim.run_until_trained()
    sim.run(args.ticks)
    out = Path(args.out)
    extra = {}
    if args.save_weights:
        out.mkdir(parents=True, exist_ok=True)
        extra["weights"] = [p.name for p in _write_weights(sim, out)]
    _write_run_artifacts(sim, out, extra)
    print(f"run complete: tick={sim.tick} trades={len(sim.trades)} out={out}")
    return 0


def _load_frozen(sim: Simulation, weights_dir: Path) -> None:
    """Load saved weights into the trend investors and stop exploration and
    learning; supports reusing trained agents across runs."""
    for slot, agent in enumerate(sim.trends):
        doc = json.loads((weights_dir / f"weights_agent{slot}.json").read_text())
        neural.load_weight_snapshot(agent.online, doc["layers"])
        neural.load_weight_snapshot(agent.target, doc["layers"])
        agent.epsilon = agent.config.epsilon_floor
        agent.frozen = True
    sim._check_trained()


def cmd_train(args) -> int:
    config = _resolve_config(args)
    sim = Simulation(config)
    sim.run_until_trained()
    sim.run(args.extra_ticks)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = [p.name for p in _write_weights(sim, out)]
    _write_run_artifacts(sim, out, {"weights": names})
    print(f"trained at tick {sim.trained_tick}; weights in {out}")
    return 0


def cmd_crash_demo(args) -> int:
    if args.crash_tick >= args.ticks:
        raise ConfigError("crash-tick: must be smaller than --ticks")
    config = _resolve_config(args)
    sim = Simulation(config)
    if args.until_trained:
        sim.run_until_trained()
    crash_at = sim.tick + args.crash_tick
    sim.run(args.crash_tick)
    sim.apply_crash()
    sim.run(args.ticks - args.crash_tick)
    out = Path(args.out)
    _write_run_artifacts(sim, out, {"crash_tick": crash_at})
    print(f"crash demo complete: crash at tick {crash_at}, out={out}")
    return 0


def cmd_sweep(args) -> int:
    config = _resolve_config(args)
    p_values = _parse_grid(args.p_values)
    if not p_values:
        raise ConfigError("p-values: grid must not be empty")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(done, total):
        print(f"sweep {done}/{total}", file=sys.stderr)

    points = analytics.sweep_link_probability(
        config,
        p_values,
        replicates=args.replicates,
        base_seed=args.base_seed,
        measure_ticks=args.measure_ticks,
        workers=args.workers,
        cache_dir=out / "replicates",
        progress=progress,
    )
    with (out / "sweep.csv").open("w") as fh:
        fh.write(_meta_line(config))
        fh.write(
            "prob_of_link,seed,pooled_mm_kurtosis,global_kurtosis,arbitrage_max,"
            "arbitrage_positive_mean,arbitrage_positive_fraction,component_count,"
            "mean_total_dealer_inventory,trained_tick\n"
        )
        for pt in points:
            for rep in pt.replicates:
                fh.write(
                    f"{pt.prob_of_link!r},{rep['seed']},{rep['pooled_mm_kurtosis']!r},"
                    f"{rep['global_kurtosis']!r},{rep['arbitrage_max']!r},"
                    f"{rep['arbitrage_positive_mean']!r},{rep['arbitrage_positive_fraction']!r},"
                    f"{rep['component_count']},{rep['mean_total_dealer_inventory']!r},"
                    f"{rep['trained_tick']}\n"
                )
    aggregate = [
        {
            "prob_of_link": pt.prob_of_link,
            "seeds": pt.seeds,
            "kurtosis_mean": pt.kurtosis_mean,
            "kurtosis_stderr": pt.kurtosis_stderr,
            "arbitrage_max_mean": pt.arbitrage_max_mean,
            "arbitrage_positive_mean": pt.arbitrage_positive_mean,
            "component_count_mean": pt.component_count_mean,
        }
        for pt in points
    ]
    (out / "sweep.json").write_text(
        json.dumps(
            {
                "config": config.to_dict(),
                "fingerprint": config.fingerprint(),
                "replicates": args.replicates,
                "base_seed": args.base_seed,
                "points": aggregate,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    print(f"sweep complete: {len(p_values)} values x {args.replicates} replicates, out={out}")
    return 0


def _parse_grid(grid: str) -> list[float]:
    if ":" in grid:
        lo, hi, step = (float(x) for x in grid.split(":"))
        values = []
        v = lo
        while v <= hi + 1e-9:
            values.append(round(v, 10))
            v += step
        return values
    return [float(x) for x in grid.split(",") if x]


def cmd_stats(args) -> int:
    run_dir = Path(args.run_dir)
    meta = json.loads((run_dir / "run.json").read_text())
    # first line is the fingerprint comment; the names row follows it
    history = np.genfromtxt(
        run_dir / "history.csv", delimiter=",", names=True, skip_header=1
    )
    mean_mid = history["mean_mid"]
    n_dealers = meta["config"]["n_dealers"]
    mm = np.column_stack([history[f"mm_{m}"] for m in range(n_dealers)])
    start = meta.get("trained_tick") or 0
    if args.from_tick is not None:
        start = args.from_tick
    window = args.window

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    changes = analytics.return_series(mean_mid[start:], window)
    pooled = np.concatenate(
        [analytics.return_series(mm[start:, m], window) for m in range(n_dealers)]
    )
    arb = analytics.arbitrage_series(mm[start:], meta["config"]["bid_offer"])

    _dump_rows(out / "changes.csv", "change", changes)
    _dump_rows(out / "arbitrage.csv", "arbitrage", arb)
    abs_changes = np.abs(changes)
    abs_changes = abs_changes[abs_changes > 0]
    summary: dict = {
        "fingerprint": meta["fingerprint"],
        "seed": meta["seed"],
        "from_tick": start,
        "window": window,
        "n_changes": int(changes.size),
    }
    if changes.size >= 4:
        summary["kurtosis"] = analytics.kurtosis(changes)
        summary["skewness"] = analytics.skewness(changes)
        summary["pooled_mm_kurtosis"] = analytics.kurtosis(pooled)
    if abs_changes.size >= 10:
        fit = analytics.zipf_fit(abs_changes)
        ranked = np.sort(abs_changes)[::-1]
        with (out / "zipf.csv").open("w") as fh:
            fh.write("rank,abs_change\n")
            for i, v in enumerate(ranked, start=1):
                fh.write(f"{i},{float(v)!r}\n")
        summary["zipf"] = {
            "slope": fit.slope,
            "r_squared": fit.r_squared,
            "n_used": fit.n_used,
            "top_rank_fraction": fit.top_rank_fraction,
        }
    snapshot = json.loads((run_dir / "snapshot.json").read_text())
    report = analytics.mean_convergence_check(mean_mid, snapshot["targets"])
    summary["mean_convergence"] = {
        "terminal_mean": report.terminal_mean,
        "target_mean": report.target_mean,
        "gap": report.gap,
        "applicable": report.applicable,
    }
    # positioning/skew pair (one observation per run) and dealer clusters
    if "total_dealer_inventory" in history.dtype.names:
        summary["mean_total_dealer_inventory"] = float(
            history["total_dealer_inventory"][start:].mean()
        )
    roles = {int(k): v for k, v in snapshot["roles"].items()}
    dealer_ids = {n for n, r in roles.items() if r == "market_maker"}
    dealer_edges = [
        (u, v) for u, v in snapshot["edges"] if u in dealer_ids and v in dealer_ids
    ]
    summary["dealer_component_count"] = _component_count(dealer_ids, dealer_edges)
    actions_path = run_dir / "actions.csv"
    if actions_path.exists():
        decisions = _read_actions(actions_path, start)
        if decisions:
            hist = analytics.action_histogram(decisions)
            with (out / "action_histogram.csv").open("w") as fh:
                fh.write("agent," + ",".join(f"action_{a}" for a in range(7)) + "\n")
                for slot in sorted(hist):
                    fh.write(f"{slot}," + ",".join(str(c) for c in hist[slot]) + "\n")
            profile = analytics.strategy_state_analysis(decisions)
            with (out / "strategy.csv").open("w") as fh:
                fh.write("action,momentum,percentile\n")
                for a in range(7):
                    for m, p in zip(profile.momentum[a], profile.percentile[a]):
                        fh.write(f"{a},{float(m)!r},{float(p)!r}\n")
    (out / "stats.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"stats written to {out}")
    return 0


def _component_count(nodes: set, edges: list) -> int:
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        parent[find(u)] = find(v)
    return len({find(n) for n in nodes})


def _dump_rows(path: Path, name: str, values) -> None:
    with path.open("w") as fh:
        fh.write(f"{name}\n")
        for v in values:
            fh.write(f"{float(v)!r}\n")


def _read_actions(path: Path, from_tick: int) -> list[tuple]:
    decisions = []
    with path.open() as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("tick,"):
                continue
            tick, slot, action, price, back, vmin, vmax = line.strip().split(",")
            if int(tick) >= from_tick:
                decisions.append(
                    (int(tick), int(slot), int(action), float(price), float(back),
                     float(vmin), float(vmax))
                )
    return decisions


def cmd_export_weights(args) -> int:
    run_dir = Path(args.run_dir)
    files = sorted(run_dir.glob("weights_agent*.json"))
    if not files:
        raise RuntimeError(f"no weight snapshots found in {run_dir}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vectors = []
    for f in files:
        doc = json.loads(f.read_text())
        (out / f.name).write_text(json.dumps(doc, sort_keys=True))
        vectors.append(
            np.concatenate([np.asarray(layer["values"]) for layer in doc["layers"]])
        )
    matrix = np.vstack(vectors)
    with (out / "weights_matrix.csv").open("w") as fh:
        fh.write("agent," + ",".join(f"w{i}" for i in range(matrix.shape[1])) + "\n")
        for i, row in enumerate(matrix):
            fh.write(f"{i}," + ",".join(repr(float(v)) for v in row) + "\n")
    if len(vectors) >= 3:
        coords = analytics.pca_weights(matrix)
        with (out / "pca.csv").open("w") as fh:
            fh.write("agent,pc1,pc2\n")
            for i, (a, b) in enumerate(coords):
                fh.write(f"{i},{float(a)!r},{float(b)!r}\n")
    print(f"exported {len(files)} agents to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from otcsim.service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_session(args) -> int:
    import httpx

    base = args.url.rstrip("/")
    with httpx.Client(base_url=base, timeout=30.0) as client:
        if args.session_cmd == "create":
            config = _resolve_config(args)
            r = client.post("/sessions", json={"config": config.to_dict()})
        elif args.session_cmd == "command":
            body = {"verb": args.verb}
            if args.n is not None:
                body["n"] = args.n
            if args.rate is not None:
                body["rate"] = args.rate
            if args.new_seed is not None:
                body["seed"] = args.new_seed
            r = client.post(f"/sessions/{args.id}/command", json=body)
        elif args.session_cmd == "snapshot":
            r = client.get(f"/sessions/{args.id}")
        else:  # network
            r = client.get(f"/sessions/{args.id}/network")
        r.raise_for_status()
        print(json.dumps(r.json(), indent=2, sort_keys=True))
    return 0


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otcsim",
        description="Dealer-intermediated OTC market simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a simulation and write artifacts")
    _add_config_flags(p)
    p.add_argument("--ticks", type=int, default=3000)
    p.add_argument("--until-trained", action="store_true",
                   help="train to the epsilon floor before counting --ticks")
    p.add_argument("--freeze-weights", type=Path, default=None,
                   help="directory of weight snapshots to load; disables learning")
    p.add_argument("--save-weights", action="store_true")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("train", help="train trend investors to the epsilon floor")
    _add_config_flags(p)
    p.add_argument("--extra-ticks", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("crash-demo", help="run with a mid-run crash intervention")
    _add_config_flags(p)
    p.add_argument("--ticks", type=int, default=3000)
    p.add_argument("--crash-tick", type=int, default=1000)
    p.add_argument("--until-trained", action="store_true")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_crash_demo)

    p = sub.add_parser("sweep", help="sweep link probability with replicates")
    _add_config_flags(p)
    p.add_argument("--p-values", default="0.05:1.0:0.05",
                   help="comma list or lo:hi:step grid")
    p.add_argument("--replicates", type=int, default=8)
    p.add_argument("--base-seed", type=int, default=1000)
    p.add_argument("--measure-ticks", type=int, default=15000)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="statistics and figure data from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--from-tick", type=int, default=None,
                   help="override the measurement start (default: trained tick)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("export-weights", help="re-export weight snapshots plus a PCA")
    p.add_argument("run_dir")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_export_weights)

    p = sub.add_parser("serve", help="start the control service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("session", help="thin client for a running control service")
    p.add_argument("--url", default="http://127.0.0.1:8000")
    ssub = p.add_subparsers(dest="session_cmd", required=True)
    sc = ssub.add_parser("create")
    _add_config_flags(sc)
    sc = ssub.add_parser("command")
    sc.add_argument("id")
    sc.add_argument("verb", choices=["step", "run", "pause", "crash", "force_short",
                                     "remove_value_investors", "reset"])
    sc.add_argument("--n", type=int, default=None)
    sc.add_argument("--rate", type=float, default=None)
    sc.add_argument("--new-seed", type=int, default=None)
    ssub.add_parser("snapshot").add_argument("id")
    ssub.add_parser("network").add_argument("id")
    p.set_defaults(func=cmd_session)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
