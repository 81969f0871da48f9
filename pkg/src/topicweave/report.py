"""Run reports: a delimited summary table plus rendered figures.

Reads a run output directory (topics.json and per-iteration checkpoints)
and writes ``report.tsv`` alongside PNG figures. When a bundle is supplied,
per-iteration topic coherence on its test split is added to the table and
plotted.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bundle import Bundle
from .errors import ValidationError
from .evaluation import npmi

logger = logging.getLogger(__name__)

_FIGSIZE = (7.0, 4.2)


def _load_json(path: Path) -> dict:
    if not path.is_file():
        raise ValidationError(f"missing run output file: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def load_run_outputs(run_dir: str | Path) -> tuple[dict, list[dict]]:
    """Return (topics document, checkpoint documents sorted by iteration)."""
    run_dir = Path(run_dir)
    topics = _load_json(run_dir / "topics.json")
    checkpoint_dir = run_dir / "checkpoints"
    checkpoints = []
    if checkpoint_dir.is_dir():
        for path in sorted(checkpoint_dir.glob("iteration_*.json")):
            checkpoints.append(_load_json(path))
    checkpoints.sort(key=lambda c: c["iteration"])
    return topics, checkpoints


def _iteration_npmi(checkpoint: dict, bundle: Bundle) -> float | None:
    topics = []
    for seed, terms in checkpoint["topics"].items():
        without_seed = [t for t in terms if t != seed]
        if len(without_seed) < 2:
            return None
        topics.append(without_seed)
    return npmi(topics, bundle.test).value


def write_report(
    run_dir: str | Path, out_dir: str | Path, bundle: Bundle | None = None
) -> list[Path]:
    """Render figures and the summary table; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    topics_doc, checkpoints = load_run_outputs(run_dir)
    seeds = topics_doc["seeds"]
    config_hash = topics_doc.get("config_hash", "")
    png_metadata = {"Description": f"config_hash={config_hash}"}
    written: list[Path] = []

    coherence: dict[int, float | None] = {}
    if bundle is not None:
        for checkpoint in checkpoints:
            coherence[checkpoint["iteration"]] = _iteration_npmi(checkpoint, bundle)

    rows = [(f"# config_hash={config_hash}",), ("iteration", "seed", "term_count", "npmi")]
    for checkpoint in checkpoints:
        value = coherence.get(checkpoint["iteration"])
        npmi_cell = "" if value is None else f"{value:.6f}"
        for seed in seeds:
            terms = checkpoint["topics"].get(seed, [])
            rows.append(
                (str(checkpoint["iteration"]), seed, str(len(terms)), npmi_cell)
            )
    for seed in seeds:
        rows.append(("final", seed, str(len(topics_doc["topics"][seed])), ""))
    table = out_dir / "report.tsv"
    table.write_text(
        "\n".join("\t".join(row) for row in rows) + "\n", encoding="utf-8"
    )
    written.append(table)

    if checkpoints:
        fig, ax = plt.subplots(figsize=_FIGSIZE)
        iterations = [c["iteration"] for c in checkpoints]
        for seed in seeds:
            sizes = [len(c["topics"].get(seed, [])) for c in checkpoints]
            ax.plot(iterations, sizes, marker="o", label=seed)
        ax.set_xlabel("iteration")
        ax.set_ylabel("terms kept")
        ax.set_xticks(iterations)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / "terms_per_iteration.png"
        fig.savefig(path, dpi=150, metadata=png_metadata)
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=_FIGSIZE)
    offset = 0
    ticks, labels = [], []
    for seed in seeds:
        bundles = topics_doc["topics"][seed]
        values = [b["mrr"] for b in bundles]
        positions = range(offset, offset + len(values))
        ax.bar(positions, values, label=seed)
        ticks.extend(positions)
        labels.extend(b["term"] for b in bundles)
        offset += len(values) + 1
    ax.set_xticks(ticks)
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_ylabel("MRR")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "final_mrr.png"
    fig.savefig(path, dpi=150, metadata=png_metadata)
    plt.close(fig)
    written.append(path)

    if bundle is not None and checkpoints:
        points = [
            (it, value) for it, value in sorted(coherence.items()) if value is not None
        ]
        if points:
            fig, ax = plt.subplots(figsize=_FIGSIZE)
            ax.plot([p[0] for p in points], [p[1] for p in points], marker="o")
            ax.set_xlabel("iteration")
            ax.set_ylabel("NPMI on test split")
            ax.set_xticks([p[0] for p in points])
            fig.tight_layout()
            path = out_dir / "npmi_per_iteration.png"
            fig.savefig(path, dpi=150, metadata=png_metadata)
            plt.close(fig)
            written.append(path)
        else:
            logger.warning("no iteration had enough terms for a coherence curve")
    return written
