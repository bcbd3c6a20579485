"""User reliabilities, ground truth and sampled answers.

Answers are coded as +1/-1.  A user with reliability ``p`` answers any
question correctly with probability ``p``, independently across questions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ._rng import spawn

if TYPE_CHECKING:
    from .assignment import Assignment

CLIP_POLICIES = ("clip", "resample")


@dataclass(frozen=True)
class ReliabilitySpec:
    """Normal law for user reliabilities, constrained to [0, 1].

    ``clip`` truncates draws onto [0, 1]; ``resample`` redraws out-of-range
    values, giving up after ``max_retries`` rounds.
    """

    mean: float
    variance: float
    clip_policy: str = "clip"
    max_retries: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.mean <= 1.0:
            raise ValueError(f"mean must lie in [0, 1], got {self.mean}")
        if self.variance < 0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")
        if self.clip_policy not in CLIP_POLICIES:
            raise ValueError(f"clip_policy must be one of {CLIP_POLICIES}")

    @classmethod
    def from_phi_squared(cls, mean: float, phi_squared: float, **kwargs) -> "ReliabilitySpec":
        """Pick the variance that gives ``E(2p-1)^2 == sqrt(phi_squared)``.

        Uses ``E(2p-1)^2 = 4 V + (2 E p - 1)^2`` for the unclipped law.
        """
        phi = np.sqrt(phi_squared)
        variance = (phi - (2 * mean - 1) ** 2) / 4
        if variance < 0:
            raise ValueError(
                f"phi^2={phi_squared} is below (2Ep-1)^4={(2 * mean - 1) ** 4}; "
                "no distribution with this mean reaches it"
            )
        return cls(mean=mean, variance=float(variance), **kwargs)

    @property
    def phi(self) -> float:
        """Nominal ``E(2p-1)^2`` ignoring clipping."""
        return 4 * self.variance + (2 * self.mean - 1) ** 2


@dataclass(frozen=True)
class Population:
    reliabilities: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        p = np.array(self.reliabilities, dtype=float)
        z = np.array(self.truth, dtype=np.int8)
        if p.ndim != 1 or z.ndim != 1:
            raise ValueError("reliabilities and truth must be 1-d")
        if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
            raise ValueError("reliabilities must lie in [0, 1]")
        if not np.all(np.abs(z) == 1):
            raise ValueError("truth entries must be +1 or -1")
        p.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "reliabilities", p)
        object.__setattr__(self, "truth", z)

    @property
    def n_users(self) -> int:
        return len(self.reliabilities)

    @property
    def n_questions(self) -> int:
        return len(self.truth)


@dataclass(frozen=True)
class AnswerMatrix:
    """Answers ``A[i, a]`` stored per edge, in the assignment's edge order.

    ``values`` has shape ``(n_edges,)``, or ``(batch, n_edges)`` when several
    independent answer sets on the same assignment are carried together.
    """

    assignment: "Assignment"
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.int8)
        if v.shape[-1] != self.assignment.n_edges:
            raise ValueError(
                f"answers cover {v.shape[-1]} edges, assignment has {self.assignment.n_edges}"
            )
        if not np.all(np.abs(v) == 1):
            raise ValueError("answers must be +1 or -1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def get(self, user: int, question: int) -> int:
        return int(self.values[..., self.assignment.edge_id(user, question)])

    def flipped(self) -> "AnswerMatrix":
        return AnswerMatrix(self.assignment, -self.values)


def sample_reliabilities(n_users: int, spec: ReliabilitySpec, seed=None) -> np.ndarray:
    """Draw ``n_users`` reliabilities from ``spec``; deterministic for a fixed seed."""
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    rng = np.random.default_rng(seed)
    sd = np.sqrt(spec.variance)
    p = rng.normal(spec.mean, sd, size=n_users)
    if spec.clip_policy == "clip":
        return np.clip(p, 0.0, 1.0)
    for _ in range(spec.max_retries):
        bad = (p < 0) | (p > 1)
        if not bad.any():
            return p
        p[bad] = rng.normal(spec.mean, sd, size=int(bad.sum()))
    raise RuntimeError(
        f"resampling did not bring all reliabilities into [0, 1] after "
        f"{spec.max_retries} rounds (mean={spec.mean}, variance={spec.variance})"
    )


def sample_truth(n_questions: int, mode: str = "ones", seed=None) -> np.ndarray:
    """Ground truth: all +1 (``ones``) or i.i.d. uniform signs (``random``)."""
    if mode == "ones":
        return np.ones(n_questions, dtype=np.int8)
    if mode == "random":
        rng = np.random.default_rng(seed)
        return rng.choice(np.array([-1, 1], dtype=np.int8), size=n_questions)
    raise ValueError(f"unknown truth mode {mode!r}")


def make_population(n_users: int, n_questions: int, spec: ReliabilitySpec,
                    seed=None, truth: str = "ones") -> Population:
    p_seed, z_seed = spawn(seed, 2)
    return Population(sample_reliabilities(n_users, spec, p_seed),
                      sample_truth(n_questions, truth, z_seed))


def sample_answers(assignment: "Assignment", population: Population, seed=None,
                   size: int | None = None) -> AnswerMatrix:
    """Draw answers on every edge: ``z_i`` w.p. ``p_a``, else ``-z_i``.

    With ``size`` set, returns ``size`` independent answer sets stacked on the
    leading axis.
    """
    if population.n_users != assignment.n_users or population.n_questions != assignment.n_questions:
        raise ValueError(
            f"population is {population.n_users} users x {population.n_questions} questions, "
            f"assignment is {assignment.n_users} x {assignment.n_questions}"
        )
    rng = np.random.default_rng(seed)
    p = population.reliabilities[assignment.edge_user]
    z = population.truth[assignment.edge_question]
    shape = (assignment.n_edges,) if size is None else (size, assignment.n_edges)
    correct = rng.random(shape) < p
    return AnswerMatrix(assignment, np.where(correct, z, -z).astype(np.int8))


def answer_moments(p: float, z: int) -> tuple[float, float]:
    """Mean and variance of a single answer: ``(z(2p-1), 4p(1-p))``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if z not in (-1, 1):
        raise ValueError("z must be +1 or -1")
    return z * (2 * p - 1), 4 * p * (1 - p)
