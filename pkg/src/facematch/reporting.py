"""Report rendering: delimited TSV output plus matplotlib figures.

Every report directory gets the machine-readable table next to the
rendered figure(s), so the same run can feed scripts and humans.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from PIL import Image

from .bench import BenchResult

MATCHES_TSV = "matches.tsv"
MATCH_FIGURE = "match_report.png"
BENCH_TSV = "bench.tsv"
BENCH_SWEEP_TSV = "bench_sweep.tsv"
LATENCY_FIGURE = "latency_hist.png"
SWEEP_FIGURE = "recall_vs_ef.png"


def _write_tsv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_match_report(
    directory: str | Path,
    prompt: str | None,
    matches: list[dict],
    image_bytes: bytes | None = None,
) -> list[Path]:
    """matches.tsv plus a figure pairing the query image with the score chart."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    tsv_path = directory / MATCHES_TSV
    _write_tsv(
        tsv_path,
        ["rank", "profile_id", "name", "score", "image_url"],
        [
            [m["rank"], m["profile_id"], m["name"], f"{m['score']:.6f}", m["image_url"]]
            for m in matches
        ],
    )
    written.append(tsv_path)

    fig, axes = plt.subplots(
        1, 2 if image_bytes else 1, figsize=(10 if image_bytes else 6, 4.2)
    )
    if image_bytes:
        ax_img, ax_bar = axes
        ax_img.imshow(np.asarray(Image.open(io.BytesIO(image_bytes)).convert("RGB")))
        ax_img.set_title("query face")
        ax_img.axis("off")
    else:
        ax_bar = axes
    labels = [f"#{m['rank']} {m['name'] or m['profile_id']}" for m in matches]
    scores = [m["score"] for m in matches]
    ypos = np.arange(len(matches))[::-1]
    ax_bar.barh(ypos, scores, color="#4878a8")
    ax_bar.set_yticks(ypos, labels=labels, fontsize=8)
    ax_bar.set_xlabel("cosine score")
    ax_bar.set_title("top matches")
    if prompt:
        fig.suptitle(prompt, fontsize=7, wrap=True)
    fig.tight_layout()
    fig_path = directory / MATCH_FIGURE
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    written.append(fig_path)
    return written


def write_bench_report(directory: str | Path, result: BenchResult) -> list[Path]:
    """Per-query latency table + histogram; ef sweep table + figure when present."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    tsv_path = directory / BENCH_TSV
    _write_tsv(
        tsv_path,
        ["query_index", "latency_ms"],
        [[i, f"{ms:.4f}"] for i, ms in enumerate(result.latencies_ms)],
    )
    written.append(tsv_path)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(result.latencies_ms, bins=min(30, max(5, len(result.latencies_ms) // 4)),
            color="#4878a8", edgecolor="white")
    ax.set_xlabel("query latency (ms)")
    ax.set_ylabel("queries")
    title = f"{result.kind} n={result.n} dim={result.dim} k={result.k}"
    if result.recall_at_k is not None:
        title += f" recall@{result.k}={result.recall_at_k:.3f}"
    ax.set_title(title)
    fig.tight_layout()
    fig_path = directory / LATENCY_FIGURE
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    written.append(fig_path)

    if result.sweep:
        sweep_path = directory / BENCH_SWEEP_TSV
        _write_tsv(
            sweep_path,
            ["ef_search", "recall_at_k", "mean_query_ms"],
            [
                [row["ef_search"], f"{row['recall_at_k']:.4f}", f"{row['mean_query_ms']:.4f}"]
                for row in result.sweep
            ],
        )
        written.append(sweep_path)

        efs = [row["ef_search"] for row in result.sweep]
        recalls = [row["recall_at_k"] for row in result.sweep]
        lat = [row["mean_query_ms"] for row in result.sweep]
        fig, ax1 = plt.subplots(figsize=(6, 4))
        ax1.plot(efs, recalls, "o-", color="#4878a8", label=f"recall@{result.k}")
        ax1.set_xscale("log", base=2)
        ax1.set_xlabel("ef_search")
        ax1.set_ylabel(f"recall@{result.k}", color="#4878a8")
        ax1.set_ylim(0, 1.02)
        ax1.axhline(0.95, color="#888888", linestyle=":", linewidth=1)
        ax2 = ax1.twinx()
        ax2.plot(efs, lat, "s--", color="#a85848", label="latency")
        ax2.set_ylabel("mean query latency (ms)", color="#a85848")
        ax1.set_title(f"search quality vs beam width (n={result.n})")
        fig.tight_layout()
        sweep_fig = directory / SWEEP_FIGURE
        fig.savefig(sweep_fig, dpi=120)
        plt.close(fig)
        written.append(sweep_fig)
    return written
