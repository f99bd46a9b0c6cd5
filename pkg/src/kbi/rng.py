"""Counter-based random streams.

Every task (an ABC draw, a prediction, a scenario rep) gets its own Philox
stream keyed by ``(master seed, stream tag, task index)``. Results therefore
never depend on how tasks are spread across workers.
"""

import numpy as np

# stream tags keep different kinds of task from sharing keys
ABC, PREDICT, SCENARIO, SNAPSHOT, SWEEP = range(5)


def task_rng(seed: int, index: int, tag: int = ABC) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(tag), int(index)))
    return np.random.Generator(np.random.Philox(ss))
