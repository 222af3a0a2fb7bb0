import time

import pytest

from selfheal.seeding import derive_seed
from selfheal.detector import MetaConfig, init_detector, meta_train
from selfheal.simulator import augment_tasks, default_patterns, make_tasks

ROOT_SEED = 20260811


def detector_protocol(seed_index: int):
    """The committed few-shot fixture: train on 12 patterns, hold out 10.

    Returns (meta-trained model, held-out tasks, baseline init seed).
    """
    seed = derive_seed(ROOT_SEED, "acc5", seed_index)
    train_tasks = make_tasks(
        default_patterns(12, seed=derive_seed(seed, "pat"), anomaly_rate=0.15),
        12, 30, 4, seed=derive_seed(seed, "tasks"),
    )
    train_tasks = augment_tasks(train_tasks, 0.01, 10, seed=derive_seed(seed, "aug"))
    held_tasks = make_tasks(
        default_patterns(10, seed=derive_seed(seed, "heldpat"), anomaly_rate=0.15),
        12, 30, 4, seed=derive_seed(seed, "held"),
    )
    cfg = MetaConfig(inner_lr=0.5, meta_lr=0.1, inner_steps=2, meta_batch=6,
                     meta_iterations=2500)
    model = init_detector(20, seed=derive_seed(seed, "init"))
    result = meta_train(model, train_tasks, cfg, seed=derive_seed(seed, "train"))
    return result.model, held_tasks, derive_seed(seed, "baseline")


@pytest.fixture(scope="session")
def detector_runs():
    """Five seeded meta-training runs, shared across test modules."""
    t0 = time.monotonic()
    runs = {i: detector_protocol(i) for i in range(5)}
    runs["elapsed"] = time.monotonic() - t0
    return runs
