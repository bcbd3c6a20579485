"""Weight updates for majority-correlation message passing.

Every update is synchronous.  For each edge ``(a, i)`` a question ``j`` of
user ``a`` (other than ``i``) reports the weighted answer of its other users,
``x[j -> a] = sum_{b in users(j), b != a} A[j, b] * y[b -> j]``, and the new
weight correlates ``a``'s answers with those reports,
``y[a -> i] = sum_{j in questions(a), j != i} A[j, a] * x[j -> a]``.

The array-level functions (:func:`kos_sums`, :func:`normalized_update`,
:func:`hard_decision_update`, :func:`weighted_vote`) accept weights and
answers with any number of leading batch axes; the last axis is the edge axis.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._rng import spawn
from .assignment import Assignment, degree_regular_assignment
from .population import AnswerMatrix, Population, ReliabilitySpec, make_population, sample_answers


class Variant(str, enum.Enum):
    RAW = "raw"
    NORMALIZED = "normalized"
    HARD_DECISION = "hard_decision"
    SERIES = "series"


@lru_cache(maxsize=64)
def _leave_one_out(n: int) -> np.ndarray:
    m = np.ones((n, n)) - np.eye(n)
    m.setflags(write=False)
    return m


def _loo_sum(blocks: np.ndarray) -> np.ndarray:
    """Sum over the last axis, leaving each position out in turn.

    Done as a product with a zero-diagonal ones matrix, so the excluded term
    is never added and subtracted back.
    """
    return blocks @ _leave_one_out(blocks.shape[-1])


def _question_reports(asg: Assignment, answers, weights) -> np.ndarray:
    """``x[j -> a]`` laid out on edge ``(a, j)``."""
    weighted = np.asarray(answers, dtype=float) * weights
    lead = weighted.shape[:-1]
    return _loo_sum(weighted.reshape(lead + (asg.n_questions, asg.r))).reshape(weighted.shape)


def _user_sums(asg: Assignment, per_edge: np.ndarray) -> np.ndarray:
    """For each edge ``(a, i)``, sum ``per_edge`` over ``a``'s other edges."""
    out = np.empty_like(per_edge)
    out[..., asg.user_edges] = _loo_sum(per_edge[..., asg.user_edges])
    return out


def kos_sums(asg: Assignment, answers, weights) -> np.ndarray:
    """Raw update: ``sum_j sum_b A[j,a] A[j,b] y[b->j]`` on every edge."""
    answers = np.asarray(answers, dtype=float)
    x = _question_reports(asg, answers, weights)
    return _user_sums(asg, answers * x)


def normalized_update(asg: Assignment, answers, weights) -> np.ndarray:
    return kos_sums(asg, answers, weights) / ((asg.s - 1) * (asg.r - 1))


def hard_decision_update(asg: Assignment, answers, weights) -> np.ndarray:
    """Fraction of ``a``'s other questions on which ``a`` sides with the others.

    A question whose other users' weighted vote is exactly zero counts as no
    agreement.
    """
    answers = np.asarray(answers, dtype=float)
    majority = np.sign(_question_reports(asg, answers, weights))
    agree = (answers * majority > 0).astype(float)
    return _user_sums(asg, agree) / (asg.s - 1)


def weighted_vote(asg: Assignment, answers, weights) -> np.ndarray:
    """``sum_{b in users(i)} A[i,b] y[b->i]`` for every question."""
    weighted = np.asarray(answers, dtype=float) * weights
    return weighted.reshape(weighted.shape[:-1] + (asg.n_questions, asg.r)).sum(axis=-1)


_UPDATES = {
    Variant.RAW: kos_sums,
    Variant.NORMALIZED: normalized_update,
    Variant.HARD_DECISION: hard_decision_update,
    Variant.SERIES: normalized_update,
}


@dataclass(frozen=True)
class WeightState:
    weights: np.ndarray
    iteration: int = 0
    variant: Variant = Variant.RAW

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.variant is Variant.HARD_DECISION and self.iteration > 0:
            if np.any((w < 0) | (w > 1)):
                raise ValueError("hard-decision weights must lie in [0, 1]")

    def get(self, asg: Assignment, user: int, question: int) -> float:
        return float(self.weights[..., asg.edge_id(user, question)])


def init_weights(asg: Assignment, seed=None, mean: float = 1.0, variance: float = 1.0,
                 variant: Variant | str = Variant.RAW) -> WeightState:
    """I.i.d. normal initial weight on every edge."""
    if variance < 0:
        raise ValueError("variance must be >= 0")
    rng = np.random.default_rng(seed)
    w = rng.normal(mean, np.sqrt(variance), size=asg.n_edges)
    return WeightState(w, 0, Variant(variant))


def _check(state: WeightState, answers: AnswerMatrix, asg: Assignment, *variants):
    if state.variant not in variants:
        raise ValueError(f"state variant {state.variant.value} does not fit this update")
    if answers.assignment != asg:
        raise ValueError("answers were drawn on a different assignment")
    if state.weights.shape[-1] != asg.n_edges:
        raise ValueError(f"state has {state.weights.shape[-1]} edges, assignment {asg.n_edges}")


def kos_step(state: WeightState, answers: AnswerMatrix, asg: Assignment) -> WeightState:
    _check(state, answers, asg, Variant.RAW)
    return WeightState(kos_sums(asg, answers.values, state.weights), state.iteration + 1,
                       state.variant)


def normalized_step(state: WeightState, answers: AnswerMatrix, asg: Assignment) -> WeightState:
    _check(state, answers, asg, Variant.NORMALIZED, Variant.SERIES)
    return WeightState(normalized_update(asg, answers.values, state.weights),
                       state.iteration + 1, state.variant)


def hard_decision_step(state: WeightState, answers: AnswerMatrix, asg: Assignment) -> WeightState:
    _check(state, answers, asg, Variant.HARD_DECISION)
    return WeightState(hard_decision_update(asg, answers.values, state.weights),
                       state.iteration + 1, state.variant)


_STEPS = {
    Variant.RAW: kos_step,
    Variant.NORMALIZED: normalized_step,
    Variant.HARD_DECISION: hard_decision_step,
}


def step(state: WeightState, answers: AnswerMatrix, asg: Assignment) -> WeightState:
    return _STEPS[state.variant](state, answers, asg)


def decide(answers: AnswerMatrix, state: WeightState, asg: Assignment) -> np.ndarray:
    """Sign of each question's weighted vote; an exact tie gives 0."""
    return np.sign(weighted_vote(asg, answers.values, state.weights)).astype(np.int8)


def error_rate(decisions: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Fraction of questions decided wrongly; undecided (0) counts as wrong."""
    return np.mean(decisions != truth, axis=-1)


# --- single meta-task --------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryPoint:
    state: WeightState
    decisions: np.ndarray
    error_rate: float


@dataclass(frozen=True)
class MetataskConfig:
    n_questions: int = 100
    n_users: int = 100
    r: int = 10
    s: int = 10
    iterations: int = 15
    variant: Variant = Variant.RAW
    reliability: ReliabilitySpec = field(default_factory=lambda: ReliabilitySpec(0.75, 0.0125))
    seed: int | None = 0
    truth: str = "ones"
    init_mean: float = 1.0
    init_variance: float = 1.0
    overflow_bound: float = 1e100


def iterate(asg: Assignment, answers: AnswerMatrix, truth: np.ndarray, state: WeightState,
            iterations: int, overflow_bound: float = 1e100) -> list[TrajectoryPoint]:
    """Run ``iterations`` updates from ``state``, recording every point from k=0."""
    def point(st):
        d = decide(answers, st, asg)
        return TrajectoryPoint(st, d, float(error_rate(d, truth)))

    out = [point(state)]
    warned = False
    for _ in range(iterations):
        state = step(state, answers, asg)
        if not warned and np.max(np.abs(state.weights)) > overflow_bound:
            warnings.warn(
                f"weights exceed {overflow_bound:g} at k={state.iteration}; "
                "the normalized variant keeps them bounded", RuntimeWarning, stacklevel=2)
            warned = True
        out.append(point(state))
    return out


def run_single_metatask(cfg: MetataskConfig) -> list[TrajectoryPoint]:
    """Sample a graph, population and answers, then iterate ``cfg.iterations`` times."""
    variant = Variant(cfg.variant)
    if variant is Variant.SERIES:
        raise ValueError("use run_metatask_series for the series variant")
    g_seed, p_seed, a_seed, w_seed = spawn(cfg.seed, 4)
    asg = degree_regular_assignment(cfg.n_questions, cfg.n_users, cfg.r, cfg.s, g_seed)
    pop = make_population(cfg.n_users, cfg.n_questions, cfg.reliability, p_seed, cfg.truth)
    answers = sample_answers(asg, pop, a_seed)
    state = init_weights(asg, w_seed, cfg.init_mean, cfg.init_variance, variant)
    return iterate(asg, answers, pop.truth, state, cfg.iterations, cfg.overflow_bound)


def update_function(variant: Variant | str):
    """Array-level update for ``variant``."""
    return _UPDATES[Variant(variant)]


def run_to_convergence(asg: Assignment, answers, weights, variant: Variant | str = Variant.NORMALIZED,
                       tol: float = 1e-6, max_iterations: int = 50):
    """Iterate until ``max |y_k - y_{k-1}| / max(1, |y_{k-1}|) < tol``.

    Returns the final weights and the number of updates made (at most
    ``max_iterations``).
    """
    update = update_function(variant)
    y = np.asarray(weights, dtype=float)
    for k in range(1, max_iterations + 1):
        nxt = update(asg, answers, y)
        change = np.max(np.abs(nxt - y) / np.maximum(1.0, np.abs(y)))
        y = nxt
        if change < tol:
            break
    return y, k


# --- series of meta-tasks ----------------------------------------------------

CARRY_RULES = ("user_mean", "random_edge")


def carry_weights(asg: Assignment, prev_asg: Assignment, prev_weights: np.ndarray,
                  rule: str = "user_mean", rng=None) -> np.ndarray:
    """Map last meta-task's edge weights onto the edges of a fresh assignment.

    ``user_mean`` gives every new edge of user ``b`` the mean of ``b``'s old
    edge weights; ``random_edge`` gives it the weight of one of ``b``'s old
    edges picked uniformly.
    """
    per_user = prev_weights[..., prev_asg.user_edges]  # (..., U, s_prev)
    if rule == "user_mean":
        w = per_user.mean(axis=-1)
        return w[..., asg.edge_user]
    if rule == "random_edge":
        rng = np.random.default_rng(rng)
        by_edge = per_user[..., asg.edge_user, :]  # (..., E, s_prev)
        slot = rng.integers(0, prev_asg.s, size=by_edge.shape[:-1])
        return np.take_along_axis(by_edge, slot[..., None], axis=-1)[..., 0]
    raise ValueError(f"unknown carry rule {rule!r}; expected one of {CARRY_RULES}")


@dataclass(frozen=True)
class SeriesConfig:
    n_questions: int = 100
    n_users: int = 100
    r: int = 10
    s: int = 10
    metatasks: int = 8
    reliability: ReliabilitySpec = field(default_factory=lambda: ReliabilitySpec(0.75, 0.0125))
    seed: int | None = 0
    truth: str = "ones"
    init_mean: float = 1.0
    init_variance: float = 1.0
    carry_rule: str = "user_mean"


@dataclass(frozen=True)
class SeriesStep:
    assignment: Assignment
    answers: AnswerMatrix
    state: WeightState
    decisions: np.ndarray
    error_rate: float

    @property
    def user_weights(self) -> np.ndarray:
        """Mean edge weight of each user after this meta-task."""
        return self.state.weights[..., self.assignment.user_edges].mean(axis=-1)


def run_metatask_series(cfg: SeriesConfig, population: Population | None = None) -> list[SeriesStep]:
    """One normalized update per meta-task, each on a fresh graph and fresh answers.

    The population (reliabilities and truth) is shared across meta-tasks.
    Meta-task 1 starts from i.i.d. normal weights on its own edges; later
    meta-tasks start from the previous weights moved over by ``cfg.carry_rule``.
    """
    p_seed, run_seed = spawn(cfg.seed, 2)
    if population is None:
        population = make_population(cfg.n_users, cfg.n_questions, cfg.reliability, p_seed,
                                     cfg.truth)
    streams = spawn(run_seed, cfg.metatasks)
    out: list[SeriesStep] = []
    prev = None
    for k, ss in enumerate(streams, start=1):
        g_seed, a_seed, w_seed = ss.spawn(3)
        asg = degree_regular_assignment(cfg.n_questions, cfg.n_users, cfg.r, cfg.s, g_seed)
        answers = sample_answers(asg, population, a_seed)
        if prev is None:
            w0 = init_weights(asg, w_seed, cfg.init_mean, cfg.init_variance).weights
        else:
            w0 = carry_weights(asg, prev.assignment, prev.state.weights, cfg.carry_rule, w_seed)
        state = normalized_step(WeightState(w0, k - 1, Variant.SERIES), answers, asg)
        d = decide(answers, state, asg)
        prev = SeriesStep(asg, answers, state, d, float(error_rate(d, population.truth)))
        out.append(prev)
    return out
