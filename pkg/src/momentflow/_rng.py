"""Counter-based random streams.

Every Monte Carlo consumer derives its generator from (seed, stream ids)
through a Philox key, so trial k sees the same numbers no matter how trials
are batched, threaded, or reordered.
"""

import numpy as np

_MASK = (1 << 63) - 1


def _flatten(value, out):
    if isinstance(value, (tuple, list)):
        for v in value:
            _flatten(v, out)
    else:
        out.append(int(value) & _MASK)


def stream(seed, *ids):
    """Return a Generator keyed by (seed, *ids); identical inputs, identical stream.

    seed and ids may be integers or nested tuples of integers.
    """
    entropy = []
    _flatten(seed, entropy)
    for i in ids:
        _flatten(i, entropy)
    key = np.random.SeedSequence(entropy).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
