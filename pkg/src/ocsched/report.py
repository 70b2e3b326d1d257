"""Figure rendering for sweep results and single-run latency CDFs.

Reads the delimited outputs (sweep CSV, run JSON) and writes matplotlib
figures next to them: throughput / wavelength usage / mean latency /
transmit buffer versus input load, one panel per epoch size and size
distribution, one line per (algorithm, requests-per-node).
"""

from __future__ import annotations

import csv
import json
import os
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_ALG_COLOR = {"slot": "tab:blue", "epoch": "tab:red"}
_R_STYLE = {2: "-", 3: "--", 6: ":"}


def _read_sweep_csv(path: str) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"no rows in {path}")
    for row in rows:
        row["epoch_ns"] = int(row["epoch_ns"])
        row["requests_per_node"] = int(row["requests_per_node"])
        row["input_load"] = float(row["input_load"])
        row["seed"] = int(row["seed"])
        for key in ("throughput", "wavelength_usage", "latency_mean_ns",
                    "latency_median_ns", "latency_p99_ns", "tx_buffer_mean_bytes",
                    "sched_buffer_mean_requests"):
            row[key] = float(row[key])
    return rows


def _group_curves(rows: Sequence[dict], value_key: str):
    """-> {(epoch_ns, distribution): {(algorithm, r): [(load, mean value)]}}"""
    acc: Dict[Tuple[int, str], Dict[Tuple[str, int], Dict[float, List[float]]]] = (
        defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
    )
    for row in rows:
        panel = (row["epoch_ns"], row["distribution"])
        line = (row["algorithm"], row["requests_per_node"])
        acc[panel][line][row["input_load"]].append(row[value_key])
    out = {}
    for panel, lines in acc.items():
        out[panel] = {
            line: sorted((load, sum(vals) / len(vals)) for load, vals in by_load.items())
            for line, by_load in lines.items()
        }
    return out


def _plot_metric(rows, value_key, ylabel, out_path, logy=False, scale=1.0):
    panels = _group_curves(rows, value_key)
    keys = sorted(panels)
    ncols = len({k[1] for k in keys}) or 1
    nrows = len({k[0] for k in keys}) or 1
    dists = sorted({k[1] for k in keys})
    epochs = sorted({k[0] for k in keys})
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(4.2 * ncols, 3.2 * nrows), squeeze=False, sharex=True
    )
    for i, epoch_ns in enumerate(epochs):
        for j, dist in enumerate(dists):
            ax = axes[i][j]
            for (alg, r), curve in sorted(panels.get((epoch_ns, dist), {}).items()):
                loads = [p[0] for p in curve]
                vals = [p[1] * scale for p in curve]
                ax.plot(
                    loads, vals,
                    color=_ALG_COLOR.get(alg, "gray"),
                    linestyle=_R_STYLE.get(r, "-"),
                    marker="o", markersize=3,
                    label=f"{alg} R={r}",
                )
            if logy:
                ax.set_yscale("log")
            ax.set_title(f"{epoch_ns} ns, {dist}", fontsize=9)
            ax.grid(True, alpha=0.3)
            if i == nrows - 1:
                ax.set_xlabel("input load")
            if j == 0:
                ax.set_ylabel(ylabel)
    handles, labels = axes[0][0].get_legend_handles_labels()
    if handles:
        fig.legend(handles, labels, loc="lower center", ncol=min(len(labels), 6),
                   fontsize=8, frameon=False)
    fig.tight_layout(rect=(0, 0.06, 1, 1))
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_sweep_figures(csv_path: str, out_dir: str, fmt: str = "png") -> List[str]:
    """Render the standard figure set from a sweep CSV; returns file paths."""
    rows = _read_sweep_csv(csv_path)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    written.append(_plot_metric(
        rows, "throughput", "throughput",
        os.path.join(out_dir, f"throughput_vs_load.{fmt}")))
    written.append(_plot_metric(
        rows, "wavelength_usage", "wavelength usage",
        os.path.join(out_dir, f"wavelength_usage_vs_load.{fmt}")))
    written.append(_plot_metric(
        rows, "latency_mean_ns", "mean latency (us)",
        os.path.join(out_dir, f"latency_vs_load.{fmt}"), logy=True, scale=1e-3))
    written.append(_plot_metric(
        rows, "tx_buffer_mean_bytes", "tx buffer (kB)",
        os.path.join(out_dir, f"tx_buffer_vs_load.{fmt}"), logy=True, scale=1e-3))
    return written


def render_cdf_figure(json_path: str, out_path: Optional[str] = None) -> str:
    """Latency CDF (log-x, tail inset domain) from a run's JSON output."""
    with open(json_path, encoding="utf-8") as fh:
        data = json.load(fh)
    xs = data.get("latency_cdf_ns")
    ys = data.get("latency_cdf_fraction")
    if not xs:
        raise ValueError(f"{json_path} has no latency CDF (empty run or cdf omitted)")
    if out_path is None:
        out_path = os.path.splitext(json_path)[0] + "_cdf.png"
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.step([x / 1000.0 for x in xs], ys, where="post",
            color=_ALG_COLOR.get(data.get("algorithm"), "tab:blue"))
    ax.set_xscale("log")
    ax.set_xlabel("scheduling latency (us)")
    ax.set_ylabel("cumulative fraction")
    ax.set_title(
        f"{data.get('algorithm')} E={data.get('epoch_ns')}ns "
        f"R={data.get('requests_per_node')} {data.get('distribution')} "
        f"load={data.get('input_load')}",
        fontsize=9,
    )
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
