"""Counter-based random substreams.

Every random draw in the package comes from a stream keyed by
``(seed, purpose, index)``. Work split into fixed blocks therefore gives the
same numbers whether the blocks run serially or in separate processes.
"""

import numpy as np

PURPOSES = {
    "cycles": 1,
    "replications": 2,
    "generic": 3,
}


def substream(seed, purpose, index=0):
    """Return an independent Philox generator for ``(seed, purpose, index)``.

    ``index`` may be an int or a tuple of ints for nested keys.
    """
    if purpose not in PURPOSES:
        raise KeyError(f"unknown rng purpose {purpose!r}")
    index = (index,) if np.ndim(index) == 0 else tuple(index)
    key = (PURPOSES[purpose],) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
