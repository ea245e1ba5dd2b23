"""Plausibility/typicality vote collection, label derivation, and
inter-annotator agreement metrics.

The vote log is append-only and event-sourced: replaying votes.jsonl through
a fresh store reconstructs identical labels.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

logger = logging.getLogger(__name__)

PLAUSIBILITY = "plausibility"
TYPICALITY = "typicality"

PLAUSIBILITY_VALUES = (0.0, 1.0)
# strongly acceptable, weakly acceptable, rejected, implausible
TYPICALITY_VALUES = (1.0, 0.5, 0.0, -1.0)

DEFAULT_VOTE_TARGETS = {PLAUSIBILITY: 3, TYPICALITY: 5}


def majority_vote(votes: Sequence[float]) -> str:
    """Strict majority over binary plausibility votes. Requires an odd panel;
    an even count is a caller error (request a tie-breaker vote instead)."""
    if not votes:
        raise ValueError("majority_vote requires at least one vote")
    if len(votes) % 2 == 0:
        raise ValueError("even vote count; request a tie-breaker vote")
    ones = sum(1 for v in votes if v == 1)
    return "plausible" if ones * 2 > len(votes) else "implausible"


def typicality_score(ratings: Sequence[float]) -> float:
    """Arithmetic mean of the mapped 4-point ratings."""
    if not ratings:
        raise ValueError("typicality_score requires at least one rating")
    return sum(ratings) / len(ratings)


def pairwise_agreement(votes_by_item: Sequence[Sequence[float]]) -> float:
    """Micro-averaged fraction of unordered rater pairs that agree, over all
    items. Every item must carry at least two votes."""
    agree = 0
    total = 0
    for votes in votes_by_item:
        k = len(votes)
        if k < 2:
            raise ValueError("pairwise agreement needs >=2 votes per item")
        for i in range(k):
            for j in range(i + 1, k):
                total += 1
                if votes[i] == votes[j]:
                    agree += 1
    if total == 0:
        raise ValueError("no items")
    return agree / total


def fleiss_kappa(matrix: Sequence[Sequence[int]]) -> float:
    """Fleiss' kappa over an items x categories count matrix. All rows must
    sum to the same rater count n >= 2. Returns 1.0 in the degenerate case
    of perfect agreement on a single category (expected agreement 1)."""
    if not matrix:
        raise ValueError("empty matrix")
    n = sum(matrix[0])
    if n < 2:
        raise ValueError("need at least 2 raters")
    for row in matrix:
        if sum(row) != n:
            raise ValueError("unequal row sums")
    n_items = len(matrix)
    n_cats = len(matrix[0])
    p_bar = sum((sum(c * c for c in row) - n) / (n * (n - 1)) for row in matrix) / n_items
    totals = [sum(row[j] for row in matrix) for j in range(n_cats)]
    grand = n_items * n
    p_e = sum((t / grand) ** 2 for t in totals)
    if p_e == 1.0:
        return 1.0 if p_bar == 1.0 else 0.0
    return (p_bar - p_e) / (1 - p_e)


@dataclass(frozen=True)
class Vote:
    assertion_id: str
    worker_id: str
    task: str
    value: float
    timestamp: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "assertion_id": self.assertion_id,
                "worker_id": self.worker_id,
                "task": self.task,
                "value": self.value,
                "timestamp": self.timestamp,
            }
        )


@dataclass
class AgreementReport:
    pairwise_agreement: float
    fleiss_kappa: float
    n_items: int
    n_raters: int


@dataclass
class AnnotationItem:
    """One assertion as shown to annotators."""

    assertion_id: str
    sentence: str
    items: list[dict] = field(default_factory=list)


class VoteRejected(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class AnnotationStore:
    """In-memory annotation state with an append-only durable vote log.

    Batch assignment serves each worker only cards they have neither voted on
    nor been served before, fewest-votes-first, and stops serving an item once
    it reaches the task's vote target.
    """

    def __init__(
        self,
        items: dict[str, AnnotationItem] | None = None,
        vote_targets: dict[str, int] | None = None,
        log_path: str | None = None,
    ):
        self.items: dict[str, AnnotationItem] = dict(items or {})
        self.vote_targets = dict(vote_targets or DEFAULT_VOTE_TARGETS)
        self.log_path = log_path
        self.votes: dict[str, dict[str, dict[str, Vote]]] = {PLAUSIBILITY: {}, TYPICALITY: {}}
        self.served: dict[str, dict[str, set[str]]] = {PLAUSIBILITY: {}, TYPICALITY: {}}
        self.workers: dict[str, bool] = {}
        # One typicality candidate pool may be narrower than the plausibility pool.
        self.task_pools: dict[str, set[str]] = {
            PLAUSIBILITY: set(self.items),
            TYPICALITY: set(self.items),
        }
        self._lock = threading.Lock()

    # -- setup ------------------------------------------------------------

    def add_item(self, item: AnnotationItem) -> None:
        self.items[item.assertion_id] = item
        for pool in self.task_pools.values():
            pool.add(item.assertion_id)

    def set_task_pool(self, task: str, assertion_ids: set[str]) -> None:
        unknown = assertion_ids - set(self.items)
        if unknown:
            raise KeyError(f"unknown assertion ids in pool: {sorted(unknown)[:5]}")
        self.task_pools[task] = set(assertion_ids)

    def register_worker(self, worker_id: str, qualified: bool = True) -> None:
        self.workers[worker_id] = qualified

    # -- serving and voting -------------------------------------------------

    def _vote_count(self, task: str, assertion_id: str) -> int:
        return len(self.votes[task].get(assertion_id, {}))

    def batch(self, task: str, n: int, worker_id: str) -> list[dict]:
        """Up to ``n`` question cards the worker has not voted on or been
        served, fewest votes first."""
        if task not in (PLAUSIBILITY, TYPICALITY):
            raise ValueError(f"unknown task {task!r}")
        with self._lock:
            if worker_id not in self.workers:
                self.register_worker(worker_id)
            if not self.workers[worker_id]:
                raise VoteRejected("worker not qualified")
            served = self.served[task].setdefault(worker_id, set())
            target = self.vote_targets[task]
            eligible = []
            for aid in self.task_pools[task]:
                if aid in served:
                    continue
                by_worker = self.votes[task].get(aid, {})
                if worker_id in by_worker:
                    continue
                count = len(by_worker)
                if count >= target:
                    continue
                eligible.append((count, aid))
            eligible.sort()
            chosen = [aid for _, aid in eligible[:n]]
            served.update(chosen)
            return [self._card(task, aid) for aid in chosen]

    def _card(self, task: str, assertion_id: str) -> dict:
        item = self.items[assertion_id]
        legal = PLAUSIBILITY_VALUES if task == PLAUSIBILITY else TYPICALITY_VALUES
        return {
            "assertion_id": assertion_id,
            "task": task,
            "sentence": item.sentence,
            "items": item.items,
            "legal_values": list(legal),
        }

    def vote(self, assertion_id: str, worker_id: str, task: str, value: float) -> Vote:
        """Record a vote exactly once; duplicates and illegal values are
        rejected with a reason code."""
        if task not in (PLAUSIBILITY, TYPICALITY):
            raise VoteRejected("unknown task")
        legal = PLAUSIBILITY_VALUES if task == PLAUSIBILITY else TYPICALITY_VALUES
        with self._lock:
            if assertion_id not in self.items:
                raise VoteRejected("unknown assertion")
            if value not in legal:
                raise VoteRejected("illegal value")
            served = self.served[task].get(worker_id, set())
            if assertion_id not in served:
                raise VoteRejected("not served")
            by_worker = self.votes[task].setdefault(assertion_id, {})
            if worker_id in by_worker:
                raise VoteRejected("duplicate")
            vote = Vote(assertion_id, worker_id, task, float(value), time.time())
            by_worker[worker_id] = vote
            if self.log_path:
                with open(self.log_path, "a", encoding="utf-8") as fh:
                    fh.write(vote.to_json() + "\n")
                    fh.flush()
            return vote

    def replay(self, votes: list[Vote]) -> None:
        """Rebuild state from a vote log; serving state is implied."""
        for v in votes:
            self.served[v.task].setdefault(v.worker_id, set()).add(v.assertion_id)
            self.vote(v.assertion_id, v.worker_id, v.task, v.value)

    # -- aggregation --------------------------------------------------------

    def progress(self) -> dict:
        out = {}
        for task in (PLAUSIBILITY, TYPICALITY):
            target = self.vote_targets[task]
            pool = self.task_pools[task]
            counts = [self._vote_count(task, aid) for aid in pool]
            out[task] = {
                "items": len(pool),
                "votes": sum(counts),
                "complete": sum(1 for c in counts if c >= target),
                "target": target,
            }
        return out

    def labels(self) -> list[dict]:
        """Derived labels for items that reached their vote target."""
        rows = []
        for aid in sorted(self.items):
            row: dict = {"assertion_id": aid}
            p_votes = self.votes[PLAUSIBILITY].get(aid, {})
            target = self.vote_targets[PLAUSIBILITY]
            if len(p_votes) >= target:
                # First `target` votes in arrival order keep the panel odd even
                # if a replayed log carries extras.
                ordered = sorted(p_votes.values(), key=lambda v: (v.timestamp, v.worker_id))
                row["plausibility_label"] = majority_vote([v.value for v in ordered[:target]])
            t_votes = self.votes[TYPICALITY].get(aid, {})
            if len(t_votes) >= self.vote_targets[TYPICALITY]:
                row["typicality_score"] = typicality_score([v.value for v in t_votes.values()])
            if len(row) > 1:
                rows.append(row)
        return rows

    def agreement(self, task: str) -> AgreementReport:
        """Agreement metrics over items holding the full rater complement."""
        target = self.vote_targets[task]
        complete = [votes for votes in self.votes[task].values() if len(votes) == target]
        if not complete:
            raise ValueError(f"no items with {target} votes for {task}")
        values_by_item = [[v.value for v in votes.values()] for votes in complete]
        categories = sorted({v for values in values_by_item for v in values} | set(
            PLAUSIBILITY_VALUES if task == PLAUSIBILITY else TYPICALITY_VALUES
        ))
        matrix = []
        for values in values_by_item:
            matrix.append([sum(1 for v in values if v == c) for c in categories])
        return AgreementReport(
            pairwise_agreement=pairwise_agreement(values_by_item),
            fleiss_kappa=fleiss_kappa(matrix),
            n_items=len(complete),
            n_raters=target,
        )


def read_vote_log(path: str) -> list[Vote]:
    votes = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            votes.append(Vote(obj["assertion_id"], obj["worker_id"], obj["task"], float(obj["value"]), obj["timestamp"]))
    return votes


def write_labels(rows: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def read_labels(path: str) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows
