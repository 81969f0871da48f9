"""Deterministic planted-corpus fixtures with synthetic encoder vectors.

Each planted corpus has several disjoint topic vocabularies plus a pool of
filler words sprinkled across every document. Topic words co-occur only with
their own topic (and fillers), so the gold term set of each category is the
topic vocabulary minus its seed. Synthetic mention vectors place each topic
on its own axis of a small encoder space, with fillers on a shared separate
axis, mimicking how a contextual encoder separates topical from generic
words.

Run ``python tests/make_fixtures.py`` to regenerate everything under
``tests/fixtures/``; outputs are byte-stable for fixed seeds.
"""

from __future__ import annotations

import shutil
import tempfile
from pathlib import Path

import numpy as np

from topicweave.bundle import write_bundle
from topicweave.config import config_from_dict
from topicweave.corpus import Corpus, corpus_checksum
from topicweave.mentions import write_mentions

FIXTURE_ROOT = Path(__file__).parent / "fixtures"

TOPIC_NAMES = ("alpha", "bravo", "charlie", "delta")
ENCODER_DIM = 16

PLANTED2 = {
    "name": "planted2",
    "n_topics": 2,
    "docs_per_topic": 100,
    "words_per_topic": 25,
    "n_fillers": 8,
    "filler_rate": 0.10,
    "corpus_seed": 7,
    "plm_seed": 101,
    "container": "text",
}
PLANTED4 = {
    "name": "planted4",
    "n_topics": 4,
    "docs_per_topic": 80,
    "words_per_topic": 25,
    "n_fillers": 8,
    "filler_rate": 0.10,
    "corpus_seed": 13,
    "plm_seed": 211,
    "container": "binary",
}

# Embedding epochs and learning rates are fixture-tuned; everything else is
# the package default.
FIXTURE_CONFIG = {
    "split": {"train_fraction": 0.6, "rng_seed": 911},
    "corpus": {"min_count": 3},
    "embedding": {
        "dimension": 100,
        "window": 5,
        "negatives": 5,
        "epochs": 8,
        "learning_rate": 0.12,
        "final_learning_rate": 0.015,
        "rng_seed": 1,
    },
}


def topic_words(spec: dict) -> list[list[str]]:
    return [
        [f"{TOPIC_NAMES[t]}{i}" for i in range(spec["words_per_topic"])]
        for t in range(spec["n_topics"])
    ]


def filler_words(spec: dict) -> list[str]:
    return [f"common{i}" for i in range(spec["n_fillers"])]


def planted_corpus_text(spec: dict) -> str:
    """Documents of one topic each, filler words mixed in at a fixed rate."""
    rng = np.random.default_rng(spec["corpus_seed"])
    topics = topic_words(spec)
    fillers = filler_words(spec)
    lines = []
    for t in range(spec["n_topics"]):
        for _ in range(spec["docs_per_topic"]):
            sentences = []
            for _ in range(rng.integers(3, 6)):
                tokens = []
                for _ in range(rng.integers(4, 8)):
                    if rng.random() < spec["filler_rate"]:
                        tokens.append(fillers[rng.integers(len(fillers))])
                    else:
                        tokens.append(topics[t][rng.integers(len(topics[t]))])
                sentences.append(" ".join(tokens) + " .")
            lines.append(" ".join(sentences))
    order = rng.permutation(len(lines))
    return "\n".join(lines[i] for i in order) + "\n"


def term_group(term: str, n_topics: int) -> int:
    for index in range(n_topics):
        if term.startswith(TOPIC_NAMES[index]):
            return index
    return n_topics


def mention_records(
    train: Corpus, terms: tuple[str, ...], spec: dict
) -> list[tuple[str, int, int, np.ndarray]]:
    """One synthetic encoder vector per occurrence of every vocabulary term.

    Components are rounded to six decimals to keep the text container small;
    the rounding is part of the fixture definition.
    """
    rng = np.random.default_rng(spec["plm_seed"])
    n_topics = spec["n_topics"]
    term_set = set(terms)
    directions = {}
    for term in terms:
        base = np.eye(ENCODER_DIM)[term_group(term, n_topics)]
        noisy = base + 0.1 * rng.standard_normal(ENCODER_DIM)
        directions[term] = noisy / np.linalg.norm(noisy)
    records = []
    for doc_id, sent_id, sentence in train.sentences():
        for token in sentence:
            if token in term_set:
                vector = directions[token] + 0.05 * rng.standard_normal(ENCODER_DIM)
                vector = np.round(vector / np.linalg.norm(vector), 6)
                records.append((token, doc_id, sent_id, vector))
    return records


def gold_text(spec: dict) -> str:
    sections = []
    for words in topic_words(spec):
        sections.append(words[0] + ":")
        sections.extend(words[1:])
        sections.append("")
    return "\n".join(sections)


def config_yaml() -> str:
    lines = []
    for section, values in FIXTURE_CONFIG.items():
        lines.append(f"{section}:")
        for key, value in values.items():
            lines.append(f"  {key}: {value}")
    return "\n".join(lines) + "\n"


def generate(spec: dict, root: Path = FIXTURE_ROOT) -> Path:
    out = root / spec["name"]
    out.mkdir(parents=True, exist_ok=True)
    corpus_text = planted_corpus_text(spec)
    (out / "corpus.txt").write_text(corpus_text, encoding="utf-8")
    seeds = [words[0] for words in topic_words(spec)]
    (out / "seeds.txt").write_text("\n".join(seeds) + "\n", encoding="utf-8")
    (out / "gold.txt").write_text(gold_text(spec), encoding="utf-8")
    (out / "config.yaml").write_text(config_yaml(), encoding="utf-8")

    config = config_from_dict(FIXTURE_CONFIG)
    tmp = Path(tempfile.mkdtemp(prefix="fixture-bundle-"))
    try:
        bundle = write_bundle(tmp, out / "corpus.txt", out / "seeds.txt", config)
        records = mention_records(bundle.train, bundle.vocab.terms, spec)
        suffix = "txt" if spec["container"] == "text" else "bin"
        write_mentions(
            out / f"mentions.{suffix}",
            records,
            ENCODER_DIM,
            "synthetic-fixture-encoder",
            corpus_checksum(bundle.train),
            container=spec["container"],
        )
    finally:
        shutil.rmtree(tmp)
    return out


def main() -> None:
    for spec in (PLANTED2, PLANTED4):
        path = generate(spec)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
