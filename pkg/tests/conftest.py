"""Shared fixtures.

The acceptance-scale synthetic corpus and its prepared features are
session-scoped because several criteria train on the same material.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from alignlab.hmm import prepare_training_data
from alignlab.lexicon import GraphemeMap, Lexicon, compile_lexicon
from alignlab.synth import SynthSpec, generate_corpus


@pytest.fixture(scope="session")
def bench():
    """The 10-minute, 8-phone, 4-speaker benchmark corpus."""
    return generate_corpus(SynthSpec(minutes=10.0, seed=1))


@pytest.fixture(scope="session")
def bench_data(bench):
    return prepare_training_data(bench.corpus, bench.lexicon)


@pytest.fixture(scope="session")
def micro():
    """A ~30-second corpus for fast pipeline tests."""
    return generate_corpus(SynthSpec(minutes=0.5, seed=7, n_phones=4, n_speakers=2))


@pytest.fixture(scope="session")
def micro_data(micro):
    return prepare_training_data(micro.corpus, micro.lexicon)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
