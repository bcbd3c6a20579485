"""Degree-regular bipartite assignments of questions to users.

Edges are numbered question-major: edge ``i * r + m`` joins question ``i`` to
its ``m``-th user (users of a question are kept in ascending order).  All
per-edge arrays elsewhere in the package use this order.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ._rng import spawn


class AssignmentError(ValueError):
    pass


@dataclass(frozen=True)
class Assignment:
    n_questions: int
    n_users: int
    r: int
    s: int
    question_users: np.ndarray

    def __post_init__(self):
        qu = np.array(self.question_users, dtype=np.int64)
        Q, U, r, s = self.n_questions, self.n_users, self.r, self.s
        if r < 2 or s < 2:
            raise AssignmentError(f"need r >= 2 and s >= 2, got r={r}, s={s}")
        if r * Q != s * U:
            raise AssignmentError(f"r*|Q| = {r * Q} differs from s*|U| = {s * U}")
        if qu.shape != (Q, r):
            raise AssignmentError(f"question_users has shape {qu.shape}, expected {(Q, r)}")
        if qu.size and (qu.min() < 0 or qu.max() >= U):
            raise AssignmentError("user index out of range")
        qu = np.sort(qu, axis=1)
        if np.any(np.diff(qu, axis=1) == 0):
            raise AssignmentError("a question lists the same user twice")
        degrees = np.bincount(qu.ravel(), minlength=U)
        if np.any(degrees != s):
            bad = int(np.flatnonzero(degrees != s)[0])
            raise AssignmentError(f"user {bad} has {degrees[bad]} questions, expected {s}")

        edge_user = qu.ravel()
        edge_question = np.repeat(np.arange(Q), r)
        # stable sort by user keeps each user's edges in ascending question order
        user_edges = np.argsort(edge_user, kind="stable").reshape(U, s)
        for arr in (qu, edge_user, edge_question, user_edges):
            arr.setflags(write=False)
        object.__setattr__(self, "question_users", qu)
        object.__setattr__(self, "edge_user", edge_user)
        object.__setattr__(self, "edge_question", edge_question)
        object.__setattr__(self, "user_edges", user_edges)

    @property
    def n_edges(self) -> int:
        return self.n_questions * self.r

    @property
    def user_questions(self) -> np.ndarray:
        """``(n_users, s)`` array of each user's questions, ascending."""
        return self.edge_question[self.user_edges]

    def users_of(self, question: int) -> np.ndarray:
        return self.question_users[question]

    def questions_of(self, user: int) -> np.ndarray:
        return self.edge_question[self.user_edges[user]]

    def edge_id(self, user: int, question: int) -> int:
        row = self.question_users[question]
        m = int(np.searchsorted(row, user))
        if m >= self.r or row[m] != user:
            raise KeyError(f"({user}, {question}) is not an edge")
        return question * self.r + m

    def edges(self) -> list[tuple[int, int]]:
        """All ``(user, question)`` pairs in edge order."""
        return list(zip(self.edge_user.tolist(), self.edge_question.tolist()))

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return (self.n_questions, self.n_users, self.r, self.s) == (
            other.n_questions, other.n_users, other.r, other.s
        ) and np.array_equal(self.question_users, other.question_users)

    def __hash__(self):
        return hash((self.n_questions, self.n_users, self.r, self.s,
                     self.question_users.tobytes()))

    # text format: header "Q U r s", then one line of user indices per question
    def to_text(self) -> str:
        lines = [f"{self.n_questions} {self.n_users} {self.r} {self.s}"]
        lines += [" ".join(map(str, row)) for row in self.question_users.tolist()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Assignment":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not rows or len(rows[0]) != 4:
            raise AssignmentError("first line must be 'Q U r s'")
        Q, U, r, s = map(int, rows[0])
        if len(rows) - 1 != Q:
            raise AssignmentError(f"expected {Q} question lines, found {len(rows) - 1}")
        return cls(Q, U, r, s, np.array([[int(v) for v in row] for row in rows[1:]],
                                        dtype=np.int64).reshape(Q, r))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "Assignment":
        return cls.from_text(Path(path).read_text())


def check_parameters(n_questions: int, n_users: int, r: int, s: int) -> None:
    if min(n_questions, n_users) < 1:
        raise AssignmentError("need at least one question and one user")
    if r < 2 or s < 2:
        raise AssignmentError(f"need r >= 2 and s >= 2, got r={r}, s={s}")
    if r * n_questions != s * n_users:
        raise AssignmentError(f"r*|Q| = {r * n_questions} differs from s*|U| = {s * n_users}")
    if r > n_users or s > n_questions:
        raise AssignmentError(f"r={r} exceeds |U|={n_users} or s={s} exceeds |Q|={n_questions}")


def _completable(capacity: np.ndarray, questions_left: int, r: int) -> bool:
    # Gale-Ryser with equal row sums: k*r <= sum_a min(c_a, k) for k = 1..q
    c = capacity[capacity > 0]
    if c.sum() != questions_left * r or np.any(c > questions_left):
        return False
    if questions_left == 0:
        return True
    k = np.arange(1, questions_left + 1)
    return bool(np.all(np.minimum(c[None, :], k[:, None]).sum(axis=1) >= k * r))


def _greedy_attempt(n_questions, n_users, r, s, rng, redraws):
    capacity = np.full(n_users, s, dtype=np.int64)
    rows = np.empty((n_questions, r), dtype=np.int64)
    for i in range(n_questions):
        left = n_questions - i
        # a user with exactly `left` open slots must take every remaining question
        forced = np.flatnonzero(capacity == left)
        free = np.flatnonzero((capacity > 0) & (capacity < left))
        need = r - len(forced)
        if need < 0 or len(free) < need:
            return None
        for _ in range(redraws):
            pick = np.concatenate([forced, rng.choice(free, need, replace=False)])
            capacity[pick] -= 1
            if _completable(capacity, left - 1, r):
                break
            capacity[pick] += 1
        else:
            return None
        rows[i] = np.sort(pick)
    return rows


def degree_regular_assignment(n_questions: int, n_users: int, r: int, s: int,
                              seed=None, max_attempts: int = 100,
                              redraws: int = 20) -> Assignment:
    """Build a degree-regular assignment question by question.

    Each question takes ``r`` distinct users drawn uniformly from those with
    spare capacity.  Users whose spare capacity equals the number of questions
    still to assign are included outright, and a draw that would leave the
    remaining degree sequence unrealisable is redrawn.  An attempt that still
    gets stuck is restarted from a fresh stream, at most ``max_attempts``
    times.
    """
    check_parameters(n_questions, n_users, r, s)
    streams = None if isinstance(seed, np.random.Generator) else spawn(seed, max_attempts)
    for attempt in range(max_attempts):
        rng = seed if streams is None else np.random.default_rng(streams[attempt])
        rows = _greedy_attempt(n_questions, n_users, r, s, rng, redraws)
        if rows is not None:
            return Assignment(n_questions, n_users, r, s, rows)
    raise AssignmentError(
        f"greedy construction dead-ended {max_attempts} times for "
        f"|Q|={n_questions}, |U|={n_users}, r={r}, s={s}"
    )


def one_hop_neighbors(asg: Assignment, a: int, i: int) -> set[int]:
    """Users sharing one of ``a``'s other questions, excluding ``a``.

    Users that appear only through question ``i`` are not included.
    """
    asg.edge_id(a, i)  # raises KeyError when (a, i) is not an edge
    out: set[int] = set()
    for j in asg.questions_of(a):
        if j != i:
            out.update(int(b) for b in asg.users_of(j) if b != a)
    return out


def _adjacency(graph) -> dict:
    if isinstance(graph, Assignment):
        pairs: Iterable = graph.edges()
    else:
        pairs = graph
    adj: dict = {}
    for u, q in pairs:
        un, qn = ("u", u), ("q", q)
        adj.setdefault(un, set()).add(qn)
        adj.setdefault(qn, set()).add(un)
    return adj


def girth(graph) -> float:
    """Length of the shortest cycle, or ``math.inf`` for a forest.

    ``graph`` is an :class:`Assignment` or any iterable of ``(user, question)``
    pairs, so partial or irregular graphs can be measured too.
    """
    adj = _adjacency(graph)
    best = math.inf
    for root in adj:
        dist = {root: 0}
        parent = {root: None}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            if 2 * dist[v] + 1 >= best:
                break
            for w in adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    parent[w] = v
                    queue.append(w)
                elif parent[v] != w:
                    best = min(best, dist[v] + dist[w] + 1)
    return best
