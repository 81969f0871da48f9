"""Shared fixtures: planted corpora, bundles, and cached pipeline runs."""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from topicweave.bundle import Bundle, write_bundle
from topicweave.config import RunConfig, load_config
from topicweave.evaluation import GoldLabels, load_gold
from topicweave.mentions import MentionStore, TermRepresentation, build_representations, load_mentions
from topicweave.pipeline import PipelineResult, run as run_pipeline

FIXTURES = Path(__file__).parent / "fixtures"


@dataclass
class PlantedEnv:
    name: str
    root: Path
    config: RunConfig
    bundle: Bundle
    store: MentionStore
    reps: TermRepresentation
    gold: GoldLabels
    mentions_path: Path


def _build_env(name: str, mention_file: str, tmp_path_factory) -> PlantedEnv:
    root = FIXTURES / name
    config = load_config(root / "config.yaml")
    bundle_dir = tmp_path_factory.mktemp(f"{name}-bundle")
    bundle = write_bundle(bundle_dir, root / "corpus.txt", root / "seeds.txt", config)
    mentions_path = root / mention_file
    store = load_mentions(
        mentions_path,
        bundle.train,
        bundle.vocab,
        cap_per_term=config.mentions.effective_cap(),
        cap_rng_seed=config.mentions.rng_seed,
    )
    reps = build_representations(store, bundle.vocab)
    gold = load_gold(root / "gold.txt")
    return PlantedEnv(
        name=name,
        root=root,
        config=config,
        bundle=bundle,
        store=store,
        reps=reps,
        gold=gold,
        mentions_path=mentions_path,
    )


@pytest.fixture(scope="session")
def planted2(tmp_path_factory) -> PlantedEnv:
    return _build_env("planted2", "mentions.txt", tmp_path_factory)


@pytest.fixture(scope="session")
def planted4(tmp_path_factory) -> PlantedEnv:
    return _build_env("planted4", "mentions.bin", tmp_path_factory)


def run_planted(env: PlantedEnv, train_seed: int, **pipeline_overrides) -> PipelineResult:
    train_config = replace(env.config.embedding, rng_seed=train_seed)
    pipeline_config = replace(env.config.pipeline, **pipeline_overrides)
    return run_pipeline(
        env.bundle.train,
        env.bundle.vocab,
        env.bundle.seeds,
        env.reps,
        train_config,
        pipeline_config,
        env.config.bm25,
    )


@pytest.fixture(scope="session")
def planted2_runs(planted2) -> dict[int, tuple[PipelineResult, float]]:
    """Full-pipeline results and wall times for training seeds 1..3."""
    import time

    results = {}
    for seed in (1, 2, 3):
        start = time.monotonic()
        result = run_planted(planted2, seed)
        results[seed] = (result, time.monotonic() - start)
    return results


@pytest.fixture(scope="session")
def planted4_runs(planted4) -> dict[int, tuple[PipelineResult, float]]:
    import time

    results = {}
    for seed in (1, 2, 3):
        start = time.monotonic()
        result = run_planted(planted4, seed)
        results[seed] = (result, time.monotonic() - start)
    return results
