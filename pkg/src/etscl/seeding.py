"""Named random sub-streams derived from one root seed."""
import zlib

import numpy as np


def substream(seed, name):
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


def substreams(seed, *names):
    return {name: substream(seed, name) for name in names}
