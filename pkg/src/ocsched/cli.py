"""Command line interface: single runs, parameter sweeps, model tables and
figure rendering.

Sweep outputs are a pure function of (grid, seeds): each run's RNG seed is
derived by hashing the master seed with the run's canonical configuration
string, so adding grid points never perturbs existing runs, and rows are
emitted in canonical order regardless of execution parallelism.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

from . import metrics as metrics_mod
from . import models, sim
from .core import (
    Algorithm,
    ConfigError,
    NetworkConfig,
    SchedulerConfig,
    SizeDistribution,
    TrafficConfig,
    default_config_text,
    load_config,
    validate,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BAD_CONFIG = 2


def derive_run_seed(master_seed: int, canonical: str) -> int:
    digest = hashlib.sha256(f"{master_seed}|{canonical}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _canonical_key(algorithm: Algorithm, epoch_ns: int, r: int,
                   dist: SizeDistribution, load: float) -> str:
    return f"alg={algorithm.value},epoch={epoch_ns},r={r},dist={dist.value},load={load:.6f}"


# --- simulate ---

def cmd_simulate(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["traffic.seed"] = args.seed
    if args.epochs is not None:
        overrides["traffic.n_epochs"] = args.epochs
    try:
        config = load_config(args.config, overrides)
    except FileNotFoundError:
        print(f"config not found: {args.config}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    if args.request_trace:
        from .traffic import TrafficGenerator
        import numpy as np

        seq = np.random.SeedSequence(config.traffic.seed)
        gen = TrafficGenerator(config, rng=np.random.default_rng(seq.spawn(2)[0]))
        gen.dump_trace(args.request_trace, config.traffic.n_epochs)

    result = sim.run(
        config,
        audit=args.audit,
        warmup_discard=args.warmup_discard,
        collect_event_log=args.event_log is not None,
    )
    if args.event_log:
        result.event_log.write_csv(args.event_log)
    if args.out:
        if args.format == "json":
            metrics_mod.write_json(result, args.out)
        else:
            metrics_mod.write_csv([result], args.out)
    print(
        f"{result.algorithm.value} E={result.epoch_ns}ns R={result.requests_per_node} "
        f"{result.distribution.value} load={result.input_load:g} seed={result.seed}: "
        f"throughput={result.throughput:.4f} usage={result.wavelength_usage:.4f} "
        f"latency_mean={result.latency_mean_ns / 1000:.3f}us "
        f"tx_buffer={result.tx_buffer_mean_bytes / 1000:.2f}kB"
    )
    return EXIT_OK


# --- sweep ---

def _run_one(task) -> Tuple[str, list]:
    (alg_v, epoch_ns, r, dist_v, load, master_seed, n_epochs, warmup) = task
    algorithm = Algorithm(alg_v)
    dist = SizeDistribution(dist_v)
    canonical = _canonical_key(algorithm, epoch_ns, r, dist, load)
    run_seed = derive_run_seed(master_seed, canonical)
    config = validate(
        NetworkConfig(epoch_ns=epoch_ns),
        SchedulerConfig(algorithm=algorithm),
        TrafficConfig(
            requests_per_node=r, distribution=dist, input_load=load,
            seed=run_seed, n_epochs=n_epochs,
        ),
    )
    result = sim.run(config, warmup_discard=warmup)
    # report the master seed in the CSV so rows are recognizable
    result.seed = master_seed
    return canonical, result.csv_row()


def _parse_list(text: str, parse, what: str) -> list:
    try:
        return [parse(tok) for tok in text.split(",") if tok.strip() != ""]
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"bad {what} list {text!r}: {exc}") from exc


def cmd_sweep(args) -> int:
    try:
        algorithms = _parse_list(args.algorithms, Algorithm.parse, "algorithm")
        epoch_sizes = _parse_list(args.epoch_sizes, int, "epoch size")
        requests = _parse_list(args.requests, int, "requests-per-node")
        dists = _parse_list(args.distributions, SizeDistribution.parse, "distribution")
        loads = _parse_list(args.loads, float, "load")
        seeds = _parse_list(args.seeds, int, "seed")
    except ConfigError as exc:
        print(f"invalid sweep grid: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    os.makedirs(args.out_dir, exist_ok=True)
    tasks = []
    skipped = []
    for alg, epoch_ns, r, dist, load, seed in itertools.product(
        algorithms, epoch_sizes, requests, dists, loads, seeds
    ):
        try:
            validate(
                NetworkConfig(epoch_ns=epoch_ns),
                SchedulerConfig(algorithm=alg),
                TrafficConfig(requests_per_node=r, distribution=dist,
                              input_load=load, seed=0, n_epochs=args.epochs),
            )
        except ConfigError as exc:
            skipped.append((alg.value, epoch_ns, r, dist.value, load, seed, str(exc)))
            continue
        tasks.append((alg.value, epoch_ns, r, dist.value, load, seed,
                      args.epochs, args.warmup_discard))

    skip_path = os.path.join(args.out_dir, "skipped.csv")
    with open(skip_path, "w", encoding="utf-8") as fh:
        fh.write("algorithm,epoch_ns,requests_per_node,distribution,input_load,seed,reason\n")
        for row in skipped:
            fh.write(",".join(str(v) for v in row[:6]) + f",\"{row[6]}\"\n")

    if not tasks:
        print(f"empty grid: nothing to run ({len(skipped)} skipped)")
        return EXIT_OK

    # canonical order: algorithm, epoch, R, distribution, load, seed
    def sort_key(row):
        return (row[0], int(row[1]), int(row[2]), row[3], float(row[4]), int(row[5]))

    def write_rows(path, rows):
        rows = sorted(rows, key=sort_key)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(metrics_mod.CSV_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(str(v) for v in row) + "\n")

    rows = []
    out_csv = os.path.join(args.out_dir, "runs.csv")
    try:
        if args.parallel > 1:
            with ProcessPoolExecutor(max_workers=args.parallel) as pool:
                for canonical, row in pool.map(_run_one, tasks):
                    rows.append(row)
                    if not args.quiet:
                        print(f"done {canonical} seed={row[5]}")
        else:
            for task in tasks:
                canonical, row = _run_one(task)
                rows.append(row)
                if not args.quiet:
                    print(f"done {canonical} seed={row[5]}")
    except Exception as exc:
        partial = os.path.join(args.out_dir, "runs.partial.csv")
        write_rows(partial, rows)
        print(f"sweep aborted after {len(rows)}/{len(tasks)} runs: {exc}", file=sys.stderr)
        print(f"partial results preserved in {partial}", file=sys.stderr)
        raise

    write_rows(out_csv, rows)
    print(f"{len(rows)} runs -> {out_csv} ({len(skipped)} combinations skipped)")

    if args.figures:
        from . import report

        written = report.render_sweep_figures(out_csv, args.out_dir)
        for path in written:
            print(f"figure -> {path}")
    return EXIT_OK


# --- models ---

def _fmt_range(lo: float, hi: float) -> str:
    if lo == hi:
        return f"{lo:g}"
    return f"{lo:g}-{hi:g}"


def _emit_table(header: List[str], rows: List[List], fmt: str) -> None:
    if fmt == "json":
        print(json.dumps([dict(zip(header, row)) for row in rows], indent=2))
        return
    if fmt == "csv":
        print(",".join(header))
        for row in rows:
            print(",".join(str(v) for v in row))
        return
    widths = [max(len(str(h)), max((len(str(r[i])) for r in rows), default=0))
              for i, h in enumerate(header)]
    print("  ".join(str(h).ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))


def cmd_models(args) -> int:
    fmt = args.format
    if args.table == "energy":
        if args.tx and args.rx:
            watts, pj = models.transceiver_power_w(args.tx, args.rx)
            _emit_table(
                ["tx", "rx", "power_w", "pj_per_bit"],
                [[args.tx, args.rx, round(watts, 4), round(pj, 4)]],
                fmt,
            )
            return EXIT_OK
        rows = []
        for tx in models.TX_NAMES:
            for rx in models.RX_NAMES:
                watts, pj = models.transceiver_power_w(tx, rx)
                rows.append([tx, rx, round(watts, 4), round(pj, 4)])
        for topo in (models.Topology.FLAT, models.Topology.SPINE_LEAF,
                     models.Topology.FAT_TREE):
            lo, hi = models.network_power_range_w(topo)
            rows.append([topo.value, "-", _fmt_range(round(lo, 2), round(hi, 2)),
                         _fmt_range(round(lo * 10, 1), round(hi * 10, 1))])
        _emit_table(["tx", "rx", "power_w", "pj_per_bit"], rows, fmt)
        return EXIT_OK
    if args.table == "cost":
        rows = []
        for topo in models.TOPOLOGIES:
            lo, hi = models.network_cost_per_gbps(topo)
            rows.append([topo.value, _fmt_range(lo, hi)])
        _emit_table(["topology", "dollars_per_gbps"], rows, fmt)
        return EXIT_OK
    if args.table == "scale":
        xs = _parse_list(args.x, int, "x") if args.x else [4, 8, 16, 32, 64]
        rows = []
        for row in models.scalability_table(xs):
            rows.append([
                row.transceivers_per_node, row.total_nodes,
                row.requests_per_node_per_epoch, row.racks, row.sub_stars,
                row.cables, row.channels, round(row.capacity_tbps, 1),
            ])
        _emit_table(
            ["x", "nodes", "req_per_node_epoch", "racks", "sub_stars",
             "cables", "channels", "capacity_tbps"],
            rows, fmt,
        )
        return EXIT_OK
    print(f"unknown table {args.table!r}", file=sys.stderr)
    return EXIT_ERROR


# --- report ---

def cmd_report(args) -> int:
    from . import report

    written = []
    if args.input.endswith(".json"):
        written.append(report.render_cdf_figure(args.input))
    else:
        written.extend(report.render_sweep_figures(args.input, args.out_dir or "."))
    for path in written:
        print(f"figure -> {path}")
    return EXIT_OK


def cmd_init_config(args) -> int:
    text = default_config_text()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ocsched",
        description="Optical circuit-switched sub-network scheduling simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation from a config file")
    p.add_argument("--config", required=True, help="INI configuration file")
    p.add_argument("--seed", type=int, default=None, help="override traffic.seed")
    p.add_argument("--epochs", type=int, default=None, help="override traffic.n_epochs")
    p.add_argument("--out", default=None, help="write run metrics to this path")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--warmup-discard", type=int, default=0,
                   help="drop the first K epochs from all statistics")
    p.add_argument("--event-log", default=None,
                   help="write per-request lifecycle CSV to this path")
    p.add_argument("--request-trace", default=None,
                   help="write the released request stream CSV to this path")
    p.add_argument("--audit", action="store_true",
                   help="verify structural invariants on every epoch")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a parameter grid and emit one combined CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--algorithms", default="slot,epoch")
    p.add_argument("--epoch-sizes", default="120,360,600")
    p.add_argument("--requests", default="2,3,6")
    p.add_argument("--distributions", default="fixed,spread3,spread5")
    p.add_argument("--loads", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--seeds", default="1", help="comma list of master seeds")
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--warmup-discard", type=int, default=0)
    p.add_argument("--figures", action="store_true",
                   help="render the standard figure set next to runs.csv")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("models", help="print the energy/cost/scalability tables")
    p.add_argument("table", choices=("energy", "cost", "scale"))
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--tx", default=None, help="transmitter option (energy table)")
    p.add_argument("--rx", default=None, help="receiver option (energy table)")
    p.add_argument("--x", default=None, help="comma list of transceivers per node (scale)")
    p.set_defaults(func=cmd_models)

    p = sub.add_parser("report", help="render figures from a sweep CSV or run JSON")
    p.add_argument("input", help="sweep runs.csv or a run's JSON metrics file")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("init-config", help="print or write the annotated default config")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_init_config)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
