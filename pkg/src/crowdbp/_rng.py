import numpy as np


def seed_sequence(seed) -> np.random.SeedSequence:
    """Coerce ``None``, an int, or a SeedSequence into a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        raise TypeError("pass an int or SeedSequence here, not a Generator")
    return np.random.SeedSequence(seed)


def spawn(seed, n: int) -> list:
    return seed_sequence(seed).spawn(n)
