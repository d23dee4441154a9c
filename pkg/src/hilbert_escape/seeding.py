"""One counter-based random stream per ``(seed, task)`` pair."""

import numpy as np


def task_rng(seed: int, task: int = 0) -> np.random.Generator:
    """Philox generator keyed by ``seed`` and a task index.

    Streams depend only on the pair, so results do not change with the
    order or the worker that runs the tasks.
    """
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, task])))
