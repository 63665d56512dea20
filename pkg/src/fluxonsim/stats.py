"""Circular statistics for ensembles of internal angles."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import EmptySample
from .geometry import TWO_PI, wrap_positive


def circular_sample(values):
    """Wrap ``values`` onto [0, 2pi) as a float array; rejects empty input."""
    a = np.ravel(np.asarray(values, dtype=float))
    if a.size == 0:
        raise EmptySample("circular sample is empty")
    return np.atleast_1d(wrap_positive(a))


def resultant_length(values):
    """Mean resultant length R in [0, 1].

    R = 1 when every angle is the same, 0 when the unit vectors cancel.
    """
    a = circular_sample(values)
    C = np.mean(np.cos(a))
    S = np.mean(np.sin(a))
    return float(min(1.0, math.hypot(C, S)))


def circular_variance(values):
    """1 - R."""
    return 1.0 - resultant_length(values)


def histogram(values, bins=64):
    """Normalized histogram on equal-width bins covering [0, 2pi)."""
    if bins < 2:
        raise ValueError("need at least two bins")
    a = circular_sample(values)
    idx = np.minimum((a * (bins / TWO_PI)).astype(int), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return counts / counts.sum()


def tv_distance_binned(a, b, bins=64):
    """Total variation distance between the binned distributions of a and b."""
    return float(0.5 * np.abs(histogram(a, bins) - histogram(b, bins)).sum())


@dataclass(frozen=True)
class RayleighResult:
    n: int
    R: float
    z: float
    p_value: float
    level: float

    @property
    def uniform(self):
        """True when uniformity is *not* rejected at ``level``."""
        return self.p_value > self.level


def rayleigh_test(values, level=0.01):
    """Rayleigh test of circular uniformity.

    Uses z = n R^2 and the large-sample p-value approximation
    p = exp(sqrt(1 + 4n + 4(n^2 - (nR)^2)) - (1 + 2n)) (Zar 2010, eq. 27.4).
    """
    a = circular_sample(values)
    n = a.size
    R = resultant_length(a)
    Rn = n * R
    z = Rn * Rn / n
    p = math.exp(math.sqrt(1.0 + 4.0 * n + 4.0 * (n * n - Rn * Rn)) - (1.0 + 2.0 * n))
    return RayleighResult(n, R, z, min(max(p, 0.0), 1.0), level)


uniformity_test = rayleigh_test


def split_null_tv(samples, bins=64, n_splits=200, rng=None, quantile=0.99):
    """Null threshold for binned TV distance from random half-splits.

    Each sample in ``samples`` (one per candidate, all drawn under the same
    hypothesis within a candidate) is shuffled and cut in two halves
    ``n_splits`` times; the returned value is the ``quantile`` of the TV
    distances between the halves, pooled over candidates. Also returns the
    raw split distances.
    """
    rng = np.random.default_rng(rng)
    dists = []
    for s in samples:
        a = circular_sample(s)
        h = a.size // 2
        if h == 0:
            raise EmptySample("need at least two values to split")
        for _ in range(n_splits):
            perm = rng.permutation(a)
            dists.append(tv_distance_binned(perm[:h], perm[h : 2 * h], bins))
    dists = np.array(dists)
    return float(np.quantile(dists, quantile)), dists
