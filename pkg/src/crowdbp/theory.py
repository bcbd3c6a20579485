"""Closed-form moments of the edge weights.

``delta = (s-1)(r-1)`` is the number of terms in one weight update and
``phi = E(2p-1)^2`` the second moment of a user's centred reliability.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assignment import Assignment
from .population import Population, ReliabilitySpec


def fan_in(r: int, s: int) -> int:
    return (s - 1) * (r - 1)


@dataclass(frozen=True)
class CrowdMoments:
    e_p: float
    e_2p1_sq: float
    source: str = "given"

    def __post_init__(self):
        if not 0.0 <= self.e_2p1_sq <= 1.0 + 1e-12:
            raise ValueError(f"E(2p-1)^2 must lie in [0, 1], got {self.e_2p1_sq}")
        if (2 * self.e_p - 1) ** 2 > self.e_2p1_sq + 1e-12:
            raise ValueError("(2Ep-1)^2 cannot exceed E(2p-1)^2")

    @property
    def phi(self) -> float:
        return self.e_2p1_sq

    @property
    def bias(self) -> float:
        """``2 E p - 1``."""
        return 2 * self.e_p - 1

    @classmethod
    def from_spec(cls, spec: ReliabilitySpec) -> "CrowdMoments":
        return cls(spec.mean, spec.phi, "distribution")

    @classmethod
    def from_reliabilities(cls, p) -> "CrowdMoments":
        p = np.asarray(p, dtype=float)
        return cls(float(p.mean()), float(np.mean((2 * p - 1) ** 2)), "empirical")

    @classmethod
    def from_population(cls, population: Population) -> "CrowdMoments":
        return cls.from_reliabilities(population.reliabilities)


@dataclass(frozen=True)
class MomentPrediction:
    mean: float
    variance: float
    k: int
    variance_is_bound: bool = False

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be >= 0")


def exact_first_moments_all(asg: Assignment, population: Population,
                            init_mean: float = 1.0, init_variance: float = 1.0):
    """Exact mean and variance of every first-iteration raw weight.

    Returns two per-edge arrays.  Initial weights are independent with the
    given mean and variance; answers are independent given the reliabilities.
    """
    c = 2 * population.reliabilities[asg.edge_user] - 1
    Q, r = asg.n_questions, asg.r
    loo = np.ones((r, r)) - np.eye(r)
    # per edge (a, j): sums over the other users of question j
    drift = ((c * init_mean).reshape(Q, r) @ loo).ravel()
    second = init_variance + init_mean ** 2
    spread = ((second - (c * init_mean) ** 2).reshape(Q, r) @ loo).ravel()
    noise = spread + (1 - c ** 2) * drift ** 2

    s = asg.s
    loo_s = np.ones((s, s)) - np.eye(s)
    mean = np.empty(asg.n_edges)
    var = np.empty(asg.n_edges)
    mean[asg.user_edges] = c[asg.user_edges] * (drift[asg.user_edges] @ loo_s)
    var[asg.user_edges] = noise[asg.user_edges] @ loo_s
    return mean, var


def exact_first_moments(asg: Assignment, population: Population, a: int, i: int,
                        init_mean: float = 1.0, init_variance: float = 1.0) -> MomentPrediction:
    """Exact moments of ``y1[a -> i]`` from the graph's actual neighbours.

    No large-``r`` approximation is made.
    """
    asg.edge_id(a, i)  # KeyError unless (a, i) is an edge
    p = population.reliabilities
    ca = 2 * p[a] - 1
    second = init_variance + init_mean ** 2
    mean = 0.0
    var = 0.0
    for j in asg.questions_of(a):
        if j == i:
            continue
        others = [b for b in asg.users_of(j) if b != a]
        cb = 2 * p[others] - 1
        drift = float(np.sum(cb * init_mean))
        mean += ca * drift
        var += float(np.sum(second - (cb * init_mean) ** 2)) + (1 - ca ** 2) * drift ** 2
    return MomentPrediction(float(mean), float(var), 1)


def approx_first_moments(p_a: float, crowd: CrowdMoments, r: int, s: int) -> MomentPrediction:
    """First-iteration moments with every neighbour average replaced by ``E p``."""
    if r < 2 or s < 2:
        raise ValueError("need r >= 2 and s >= 2")
    d = fan_in(r, s)
    ca = 2 * p_a - 1
    m = crowd.bias
    mean = d * ca * m
    var = d * ((2 - crowd.phi) + (1 - ca ** 2) * (r - 1) * m ** 2)
    return MomentPrediction(float(mean), float(var), 1)


def series_mean(p_a: float, crowd: CrowdMoments, k: int) -> float:
    """``(2p_a - 1)(2Ep - 1) phi^(k-1)`` for meta-task ``k >= 1``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return (2 * p_a - 1) * crowd.bias * crowd.phi ** (k - 1)


def series_mean_exchangeable(reliabilities, k: int) -> np.ndarray:
    """Mean weight of every user after ``k`` meta-tasks, for a finite crowd.

    Assumes each of a user's neighbours is equally likely to be any other
    user.  Unlike :func:`series_mean` this keeps the user out of its own
    neighbour average, so it stays exact for small crowds.
    """
    c = 2 * np.asarray(reliabilities, dtype=float) - 1
    n = len(c)
    coef = (c.sum() - c) / (n - 1)
    q = c ** 2
    for _ in range(k - 1):
        coef = ((q * coef).sum() - q * coef) / (n - 1)
    return c * coef


def series_variance_bound(v0: float, crowd: CrowdMoments, r: int, s: int, k: int) -> float:
    """Closed-form variance bound after ``k`` meta-tasks.

    ``v0 d^-k + r (2Ep-1)^2 d^-1 (phi^2k - d^-k) / (phi^2 - d^-1)`` with
    ``d = (s-1)(r-1)``; at ``phi^2 == 1/d`` the ratio is replaced by its
    limit ``k phi^(2(k-1))``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    d = fan_in(r, s)
    phi2 = crowd.phi ** 2
    first = v0 * d ** -k
    scale = r * crowd.bias ** 2 / d
    if math.isclose(phi2, 1 / d, rel_tol=1e-12, abs_tol=0.0):
        return first + scale * k * phi2 ** (k - 1)
    return first + scale * (phi2 ** k - d ** -k) / (phi2 - 1 / d)


def series_variance_recursion(v0: float, crowd: CrowdMoments, r: int, s: int, k: int) -> float:
    """Unroll ``v_k = v_{k-1}/d + r (2Ep-1)^2 phi^(2k) / d`` from ``v_0 = v0``."""
    d = fan_in(r, s)
    v = v0
    for j in range(1, k + 1):
        v = v / d + r * crowd.bias ** 2 * crowd.phi ** (2 * j) / d
    return v


def series_relative_error(p_a: float, crowd: CrowdMoments, r: int, s: int, k: int,
                          v0: float = 1.0) -> float:
    """``sqrt(bound) / |mean|`` from the closed forms; ``inf`` when the mean is 0."""
    mu = series_mean(p_a, crowd, k)
    if mu == 0:
        return math.inf
    return math.sqrt(series_variance_bound(v0, crowd, r, s, k)) / abs(mu)


def convergence_condition(crowd: CrowdMoments, r: int, s: int) -> bool:
    """``1/((s-1)(r-1)) <= phi^2 < 1``."""
    if r < 2 or s < 2:
        raise ValueError("need r >= 2 and s >= 2")
    phi2 = crowd.phi ** 2
    return 1 / fan_in(r, s) <= phi2 < 1


def asymptotic_decision(answers_row, reliabilities, e_p: float) -> int:
    """``sgn((2Ep-1) * sum_b A[i,b] (2p_b-1))``; 0 when the sum vanishes."""
    a = np.asarray(answers_row, dtype=float)
    p = np.asarray(reliabilities, dtype=float)
    if a.shape != p.shape:
        raise ValueError("answers and reliabilities differ in length")
    return int(np.sign((2 * e_p - 1) * np.sum(a * (2 * p - 1))))


def asymptotic_decisions(asg: Assignment, answers, reliabilities, e_p: float) -> np.ndarray:
    """:func:`asymptotic_decision` for every question at once."""
    a = np.asarray(answers, dtype=float).reshape(np.shape(answers)[:-1] + (asg.n_questions, asg.r))
    c = 2 * np.asarray(reliabilities, dtype=float)[asg.question_users] - 1
    return np.sign((2 * e_p - 1) * (a * c).sum(axis=-1)).astype(np.int8)
