import numpy as np

REL_ERR_GUARD = 1e-12


def sample_moments(x, axis=0):
    """Sample mean and unbiased sample variance along ``axis`` (two passes)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    if n < 2:
        raise ValueError("need at least two samples for a sample variance")
    mean = x.mean(axis=axis)
    dev = x - np.expand_dims(mean, axis)
    return mean, (dev * dev).sum(axis=axis) / (n - 1)


def relative_error(mean, variance, guard=REL_ERR_GUARD):
    """``sqrt(variance) / |mean|``, NaN where ``|mean| < guard``."""
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    small = np.abs(mean) < guard
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sqrt(variance) / np.abs(mean)
    return np.where(small, np.nan, out)


def count_rises(values) -> int:
    """Number of steps where the sequence goes up."""
    v = np.asarray(values, dtype=float)
    return int(np.sum(v[1:] > v[:-1]))


def rises_after_peak(values) -> int:
    v = np.asarray(values, dtype=float)
    return count_rises(v[int(np.nanargmax(v)):])
