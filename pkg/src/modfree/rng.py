"""Counter-based random streams.

A stream is addressed by ``(seed, replica, step)``: the Philox key holds
``(seed, replica)`` and the counter word 2 holds the step index, so draws
do not depend on execution order or on how replicas are split between
workers.  Counter word 3 separates purposes (dynamics, initialization,
Monte Carlo).
"""

import numpy as np

PURPOSE_STEP = 0
PURPOSE_INIT = 1
PURPOSE_MC = 2

_MASK = (1 << 64) - 1


def stream(seed, replica=0, step=0, purpose=PURPOSE_STEP):
    """Generator for one (seed, replica, step, purpose) address."""
    key = np.array([int(seed) & _MASK, int(replica) & _MASK], dtype=np.uint64)
    counter = np.array([0, 0, int(step) & _MASK, int(purpose)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def normals(seed, replica, step, shape):
    """Standard normals for one replica at one time step."""
    return stream(seed, replica, step, PURPOSE_STEP).standard_normal(shape)
