"""Shared fixtures and seeded helpers for the test suite."""

from pathlib import Path

import numpy as np
import pytest

from biopars.models.ema import CemaParams, EmaParams
from biopars.models.tensor import ComplexTensor

FIXTURES = Path(__file__).parent / "fixtures"


def random_ema(rng: np.random.Generator, d: int, h: int) -> EmaParams:
    return EmaParams(
        beta=rng.normal(size=(d, h)),
        alpha=rng.uniform(0.05, 1.0, size=(d, h)),
        delta=rng.uniform(0.05, 1.0, size=(d, h)),
        eta=rng.normal(size=(d, h)),
    )


def random_cema(rng: np.random.Generator, d: int, h: int) -> CemaParams:
    return CemaParams(
        beta=rng.normal(size=(d, h)),
        alpha=rng.uniform(0.05, 1.0, size=(d, h)),
        delta=rng.uniform(0.05, 1.0, size=(d, h)),
        theta=rng.uniform(-np.pi, np.pi, size=(d, h)),
        eta=ComplexTensor(rng.normal(size=(d, h)), rng.normal(size=(d, h))),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def qa_path() -> Path:
    return FIXTURES / "qa.jsonl"


@pytest.fixture(autouse=True)
def _single_thread_default(monkeypatch):
    monkeypatch.delenv("BIOPARS_THREADS", raising=False)
