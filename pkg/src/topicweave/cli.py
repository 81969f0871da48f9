"""Command-line surface: preprocess, run, eval, report.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
Every flag mirrors one config key; values given on the command line override
the config file, which overrides the built-in defaults.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .bundle import load_bundle, write_bundle
from .config import RunConfig, apply_overrides, load_config
from .errors import ValidationError
from .evaluation import load_gold, ndcg_at_k, npmi, precision_at_k
from .mentions import build_representations, load_mentions
from .pipeline import PipelineResult, run as run_pipeline

logger = logging.getLogger(__name__)

_TOPICS_TXT_HEADER = "# topicweave topics v1"


@click.group()
@click.version_option(version=__version__, prog_name="topicweave")
@click.option("--log-level", default="INFO", show_default=True)
def cli(log_level: str) -> None:
    logging.basicConfig(level=log_level.upper(), format="%(levelname)s %(name)s: %(message)s")


def _config(config_path: str | None, overrides: dict[str, dict]) -> RunConfig:
    return apply_overrides(load_config(config_path), overrides)


@cli.command()
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("seeds_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--sentence-delimiter", help="corpus.sentence_delimiter")
@click.option("--min-count", type=int, help="corpus.min_count")
@click.option("--train-fraction", type=float, help="split.train_fraction")
@click.option("--split-seed", type=int, help="split.rng_seed")
def preprocess(corpus_path, seeds_path, out_dir, config_path, sentence_delimiter,
               min_count, train_fraction, split_seed):
    """Load, split, and index a corpus into a bundle directory."""
    config = _config(config_path, {
        "corpus": {"sentence_delimiter": sentence_delimiter, "min_count": min_count},
        "split": {"train_fraction": train_fraction, "rng_seed": split_seed},
    })
    bundle = write_bundle(out_dir, corpus_path, seeds_path, config)
    counts = bundle.manifest["counts"]
    click.echo(
        f"bundle written to {out_dir}: {counts['train_documents']} train / "
        f"{counts['test_documents']} test documents, "
        f"{counts['vocabulary_terms']} vocabulary terms"
    )


def _format_topics_txt(result: PipelineResult, config_hash: str) -> str:
    lines = [_TOPICS_TXT_HEADER, f"# config_hash={config_hash}"]
    for seed, bundles in zip(result.seeds, result.topics):
        lines.append(f"seed\t{seed}")
        for rank, b in enumerate(bundles, start=1):
            lines.append(
                f"{rank}\t{b.term}\t{b.mrr:.6f}\t{b.rank_all}\t{b.rank_emb}\t{b.rank_plm}"
            )
    return "\n".join(lines) + "\n"


def _topics_json_doc(result: PipelineResult, config_hash: str) -> dict:
    last = result.snapshots[-1]
    return {
        "format": "topicweave-topics",
        "version": 1,
        "config_hash": config_hash,
        "seeds": list(result.seeds),
        "topics": {
            seed: [
                {
                    "term": b.term,
                    "mrr": b.mrr,
                    "rank_all": b.rank_all,
                    "rank_emb": b.rank_emb,
                    "rank_plm": b.rank_plm,
                    "score_all": b.score_all,
                    "score_emb": b.score_emb,
                    "score_plm": b.score_plm,
                }
                for b in bundles
            ]
            for seed, bundles in zip(result.seeds, result.topics)
        },
        "anchors": {
            seed: [list(ref) for ref in last.anchors[i]]
            for i, seed in enumerate(result.seeds)
        },
        "neighbors": {
            seed: [list(ref) for ref in last.neighbors[i]]
            for i, seed in enumerate(result.seeds)
        },
    }


def _write_run_outputs(out_dir: Path, result: PipelineResult, config_hash: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "topics.txt").write_text(
        _format_topics_txt(result, config_hash), encoding="utf-8"
    )
    (out_dir / "topics.json").write_text(
        json.dumps(_topics_json_doc(result, config_hash), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    checkpoint_dir = out_dir / "checkpoints"
    checkpoint_dir.mkdir(exist_ok=True)
    for snapshot in result.snapshots:
        doc = {
            "format": "topicweave-checkpoint",
            "version": 1,
            "config_hash": config_hash,
            "iteration": snapshot.iteration,
            "topics": {
                seed: list(snapshot.topics[i]) for i, seed in enumerate(result.seeds)
            },
            "anchors": {
                seed: [list(ref) for ref in snapshot.anchors[i]]
                for i, seed in enumerate(result.seeds)
            },
            "neighbors": {
                seed: [list(ref) for ref in snapshot.neighbors[i]]
                for i, seed in enumerate(result.seeds)
            },
        }
        path = checkpoint_dir / f"iteration_{snapshot.iteration:03d}.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    summary = {
        "format": "topicweave-run-report",
        "version": 1,
        "config_hash": config_hash,
        "iterations_run": [s.iteration for s in result.snapshots],
        "topic_sizes": {
            seed: [len(s.topics[i]) for s in result.snapshots]
            for i, seed in enumerate(result.seeds)
        },
        "final_terms": {
            seed: len(bundles) for seed, bundles in zip(result.seeds, result.topics)
        },
    }
    (out_dir / "run_report.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


@cli.command("run")
@click.argument("bundle_path", type=click.Path(exists=True, file_okay=False))
@click.argument("mentions_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--resume", "resume_path", type=click.Path(exists=True, dir_okay=False),
              help="checkpoint JSON to continue from")
@click.option("--dimension", type=int, help="embedding.dimension")
@click.option("--window", type=int, help="embedding.window")
@click.option("--negatives", type=int, help="embedding.negatives")
@click.option("--epochs", type=int, help="embedding.epochs")
@click.option("--learning-rate", type=float, help="embedding.learning_rate")
@click.option("--final-learning-rate", type=float, help="embedding.final_learning_rate")
@click.option("--kappa-max", type=float, help="embedding.kappa_max")
@click.option("--train-seed", type=int, help="embedding.rng_seed")
@click.option("--batch-size", type=int, help="embedding.batch_size")
@click.option("--iterations", type=int, help="pipeline.iterations")
@click.option("--tau", type=int, help="pipeline.tau")
@click.option("--anchor-limit", type=int, help="pipeline.anchor_limit")
@click.option("--neighbor-window", type=int, help="pipeline.neighbor_window")
@click.option("--rho", type=int, help="pipeline.rho")
@click.option("--eta", type=float, help="pipeline.eta")
@click.option("--alpha", type=float, help="pipeline.alpha")
@click.option("--exclusive/--no-exclusive", "exclusive", default=None,
              help="pipeline.exclusive")
@click.option("--use-embedding/--no-embedding", "use_embedding", default=None,
              help="pipeline.use_embedding")
@click.option("--use-plm/--no-plm", "use_plm", default=None, help="pipeline.use_plm")
@click.option("--use-sentences/--no-sentences", "use_sentences", default=None,
              help="pipeline.use_sentences")
@click.option("--workers", type=int, help="pipeline.workers")
@click.option("--k1", type=float, help="bm25.k1")
@click.option("--b", type=float, help="bm25.b")
@click.option("--mention-cap", type=int, help="mentions.cap_per_term (0 disables)")
@click.option("--mention-seed", type=int, help="mentions.rng_seed")
def run_cmd(bundle_path, mentions_path, out_dir, config_path, resume_path, **flags):
    """Run the iterative mining loop against a bundle and a mention-vector file."""
    config = _config(config_path, {
        "embedding": {
            "dimension": flags["dimension"], "window": flags["window"],
            "negatives": flags["negatives"], "epochs": flags["epochs"],
            "learning_rate": flags["learning_rate"],
            "final_learning_rate": flags["final_learning_rate"],
            "kappa_max": flags["kappa_max"], "rng_seed": flags["train_seed"],
            "batch_size": flags["batch_size"],
        },
        "pipeline": {
            "iterations": flags["iterations"], "tau": flags["tau"],
            "anchor_limit": flags["anchor_limit"],
            "neighbor_window": flags["neighbor_window"], "rho": flags["rho"],
            "eta": flags["eta"], "alpha": flags["alpha"],
            "exclusive": flags["exclusive"], "use_embedding": flags["use_embedding"],
            "use_plm": flags["use_plm"], "use_sentences": flags["use_sentences"],
            "workers": flags["workers"],
        },
        "bm25": {"k1": flags["k1"], "b": flags["b"]},
        "mentions": {"cap_per_term": flags["mention_cap"],
                     "rng_seed": flags["mention_seed"]},
    })
    config_hash = config.config_hash()
    bundle = load_bundle(bundle_path)
    store = load_mentions(
        mentions_path,
        bundle.train,
        bundle.vocab,
        cap_per_term=config.mentions.effective_cap(),
        cap_rng_seed=config.mentions.rng_seed,
    )
    reps = build_representations(store, bundle.vocab)

    initial_topics = None
    first_iteration = 1
    if resume_path:
        checkpoint = json.loads(Path(resume_path).read_text(encoding="utf-8"))
        if checkpoint.get("format") != "topicweave-checkpoint":
            raise ValidationError(f"{resume_path}: not a run checkpoint")
        if checkpoint.get("config_hash") != config_hash:
            raise ValidationError(
                f"{resume_path}: checkpoint config hash does not match this configuration"
            )
        first_iteration = int(checkpoint["iteration"]) + 1
        if first_iteration > config.pipeline.iterations:
            raise ValidationError(
                f"{resume_path}: checkpoint is already at the final iteration"
            )
        initial_topics = [checkpoint["topics"][seed] for seed in bundle.seeds]

    result = run_pipeline(
        bundle.train,
        bundle.vocab,
        bundle.seeds,
        reps,
        config.embedding,
        config.pipeline,
        config.bm25,
        initial_topics=initial_topics,
        first_iteration=first_iteration,
    )
    _write_run_outputs(Path(out_dir), result, config_hash)
    for seed, bundles in zip(result.seeds, result.topics):
        click.echo(f"{seed}: {len(bundles)} terms")
    click.echo(f"run outputs written to {out_dir}")


@cli.command("eval")
@click.argument("topics_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("bundle_path", type=click.Path(exists=True, file_okay=False))
@click.argument("gold_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", "out_dir", default=".", type=click.Path(file_okay=False))
@click.option("-k", "k", type=int, help="evaluation.k")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def eval_cmd(topics_path, bundle_path, gold_path, out_dir, k, config_path):
    """Score a topics file: coherence on the test split, accuracy against gold."""
    config = _config(config_path, {"evaluation": {"k": k}})
    k = config.evaluation.k
    doc = json.loads(Path(topics_path).read_text(encoding="utf-8"))
    if doc.get("format") != "topicweave-topics":
        raise ValidationError(f"{topics_path}: not a topics file")
    topics = {seed: [b["term"] for b in doc["topics"][seed]] for seed in doc["seeds"]}
    gold = load_gold(gold_path)
    bundle = load_bundle(bundle_path)
    coherence = npmi(list(topics.values()), bundle.test)
    precision = precision_at_k(topics, gold, k)
    ndcg = ndcg_at_k(topics, gold, k)
    metrics = {
        "format": "topicweave-metrics",
        "version": 1,
        "config_hash": doc.get("config_hash", ""),
        "k": k,
        "npmi": coherence.value,
        "npmi_topics_evaluated": coherence.topics_evaluated,
        "npmi_pairs_evaluated": coherence.pairs_evaluated,
        "npmi_pairs_skipped": coherence.pairs_skipped,
        "npmi_missing_terms": list(coherence.missing_terms),
        "p_at_k": precision,
        "ndcg_at_k": ndcg,
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(
        json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    table = [
        f"# config_hash={metrics['config_hash']}",
        f"{'metric':<24}value",
        f"{'npmi':<24}{coherence.value:.6f}",
        f"{f'p@{k}':<24}{precision:.6f}",
        f"{f'ndcg@{k}':<24}{ndcg:.6f}",
        f"{'npmi pairs evaluated':<24}{coherence.pairs_evaluated}",
        f"{'npmi pairs skipped':<24}{coherence.pairs_skipped}",
    ]
    (out / "metrics.txt").write_text("\n".join(table) + "\n", encoding="utf-8")
    for line in table[1:]:
        click.echo(line)


@cli.command("report")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "-o", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--bundle", "bundle_path", type=click.Path(exists=True, file_okay=False),
              help="bundle whose test split supplies per-iteration coherence")
def report_cmd(run_dir, out_dir, bundle_path):
    """Render figures and a summary table from a run output directory."""
    from .report import write_report  # defers the matplotlib import

    bundle = load_bundle(bundle_path) if bundle_path else None
    written = write_report(run_dir, out_dir, bundle)
    for path in written:
        click.echo(f"wrote {path}")


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 1
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
