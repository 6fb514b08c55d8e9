import os

# single-threaded BLAS keeps CPU-time budgets meaningful and summation
# order reproducible for the pinned regression hashes
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import numpy as np
import pytest

from aupatterns.annotations import AnnotatedFrame, AuPattern, AuRegistry, DatasetTable
from aupatterns.nn import TrainConfig
from aupatterns.synth import SynthSpec, generate


def tiny_synth_spec(seed=13):
    """Four-AU co-occurrence set small enough for sub-second trainings."""
    reg = AuRegistry((1, 2, 3, 4))
    arcs = (
        (AuPattern.from_string("0000"), 4.0),
        (AuPattern.from_string("1100"), 3.0),
        (AuPattern.from_string("0011"), 2.0),
        (AuPattern.from_string("1111"), 1.0),
    )
    return SynthSpec(
        registry=reg,
        n_subjects=6,
        frames_per_subject=24,
        archetypes=arcs,
        image_side=16,
        noise_std=0.1,
        seed=seed,
        n_tasks=2,
    )


def tiny_train_config(**overrides):
    base = dict(loss="bce", learning_rate=0.1, momentum=0.9, batch_size=16,
                epochs=1, threshold=0.5, seed=3)
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate(tiny_synth_spec())


@pytest.fixture
def reg2():
    return AuRegistry((1, 2))


def make_table(registry, rows):
    """rows: (subject, task, frame, bits-string)"""
    frames = tuple(
        AnnotatedFrame(s, t, f, AuPattern.from_string(b)) for s, t, f, b in rows
    )
    return DatasetTable(registry, frames)


def random_table(rng, n_frames=200, k=4, n_subjects=5, n_tasks=3):
    registry = AuRegistry(tuple(range(1, k + 1)))
    rows = []
    for i in range(n_frames):
        s = f"S{rng.integers(n_subjects)}"
        t = f"T{rng.integers(n_tasks)}"
        bits = "".join(str(b) for b in rng.integers(0, 2, k))
        rows.append((s, t, i, bits))
    return make_table(registry, rows)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
