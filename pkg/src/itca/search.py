"""Searching the space of class combinations for the criterion maximum.

Three strategies share one evaluator: exhaustive enumeration of every allowed
combination with K >= 2, greedy merging from the identity, and breadth-first
expansion of strictly improving merges. Greedy and BFS can skip merges that
provably cannot raise population ITCA (``prune_check``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .classifiers import ClassifierSpec
from .criteria import CRITERIA, ConditionalAccuracyTable, CriterionReport, Evaluator
from .data import Dataset, stratified_folds
from .partitions import (
    NOMINAL_ENUMERATION_CAP,
    Partition,
    TooManyClasses,
    enumerate_nominal,
    enumerate_ordinal,
    merge_candidates,
    violates_forbidden,
)

__all__ = [
    "STRATEGIES",
    "SearchConfig",
    "SearchTrace",
    "prune_check",
    "prune_ratio",
    "make_evaluator",
    "allowed_partitions",
    "exhaustive_search",
    "greedy_search",
    "bfs_search",
    "search",
]

STRATEGIES = ("exhaustive", "greedy", "bfs")


@dataclass(frozen=True)
class SearchConfig:
    strategy: str = "greedy"
    criterion: str = "itca"
    classifier: ClassifierSpec = field(default_factory=lambda: ClassifierSpec("lda"))
    ordinal: bool = True
    forbidden_merges: tuple = ()
    prune: bool = False
    folds: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}")
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}; choose from {', '.join(CRITERIA)}")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if isinstance(self.classifier, dict):
            object.__setattr__(self, "classifier", ClassifierSpec.from_dict(self.classifier))
        pairs = tuple(tuple(sorted(int(v) for v in pair)) for pair in self.forbidden_merges)
        if any(len(pair) != 2 or pair[0] == pair[1] for pair in pairs):
            raise ValueError("forbidden merges must be pairs of distinct labels")
        object.__setattr__(self, "forbidden_merges", tuple(sorted(set(pairs))))

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "criterion": self.criterion,
            "classifier": self.classifier.to_dict(),
            "ordinal": self.ordinal,
            "forbidden_merges": [list(p) for p in self.forbidden_merges],
            "prune": self.prune,
            "folds": self.folds,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SearchConfig":
        kw = dict(obj)
        if "classifier" in kw:
            kw["classifier"] = ClassifierSpec.from_dict(kw["classifier"])
        if "forbidden_merges" in kw:
            kw["forbidden_merges"] = tuple(tuple(p) for p in kw["forbidden_merges"])
        return cls(**kw)


@dataclass
class SearchTrace:
    criterion: str
    evaluated: list = field(default_factory=list)  # (Partition, CriterionReport)
    pruned: list = field(default_factory=list)  # (Partition, reason)
    best: Partition | None = None
    best_value: float = -math.inf

    @property
    def evaluation_count(self) -> int:
        return len(self.evaluated)

    def record(self, p: Partition, rep: CriterionReport) -> None:
        self.evaluated.append((p, rep))
        if self.best is None or _better(rep.mean, p, self.best_value, self.best):
            self.best, self.best_value = p, rep.mean

    def value(self, p: Partition) -> float:
        for q, rep in self.evaluated:
            if q == p:
                return rep.mean
        raise KeyError(str(p))

    def jsonl(self) -> Iterable[str]:
        """One JSON object per evaluated partition, then the pruned ones, then the result."""
        for step, (p, rep) in enumerate(self.evaluated):
            yield json.dumps({"event": "evaluated", "step": step, "partition": str(p), "k": p.k,
                              "report": rep.to_dict()})
        for p, reason in self.pruned:
            yield json.dumps({"event": "pruned", "partition": str(p), "k": p.k, "reason": reason})
        yield json.dumps({"event": "best", "partition": str(self.best), "k": self.best.k,
                          "value": self.best_value, "evaluation_count": self.evaluation_count})


def _better(v1: float, p1: Partition, v2: float, p2: Partition) -> bool:
    """Higher value wins; ties go to larger K, then the lexicographically smaller assignment."""
    if v1 != v2:
        return v1 > v2
    return p1.sort_key() < p2.sort_key()


# ---------------------------------------------------------------------------
# pruning


def prune_ratio(p_i: float, p_j: float, a_i: float, a_j: float) -> float:
    """Accuracy the merged class would need for the merge to break even."""
    s = p_i + p_j
    if s >= 1.0:
        return math.inf
    num = 0.0
    for p, a in ((p_i, a_i), (p_j, a_j)):
        if p > 0 and a != 0:
            num += p * math.log(p) * a
    return num / (s * math.log(s))


def prune_check(p: Partition, i: int, j: int, cond_acc: ConditionalAccuracyTable) -> str:
    """``"prune"`` when merging combined classes ``i`` and ``j`` cannot help, else ``"keep"``."""
    if not (1 <= i <= p.k and 1 <= j <= p.k) or i == j:
        raise ValueError(f"bad merge pair ({i}, {j}) for K={p.k}")
    if cond_acc.k != p.k:
        raise ValueError("accuracy table does not match the partition")
    pr, acc = cond_acc.proportion, cond_acc.accuracy
    ratio = prune_ratio(pr[i - 1], pr[j - 1], acc[i - 1], acc[j - 1])
    return "prune" if ratio > 1.0 else "keep"


# ---------------------------------------------------------------------------


def make_evaluator(ds: Dataset, cfg: SearchConfig) -> Evaluator:
    folds = stratified_folds(ds, cfg.folds, cfg.seed)
    return Evaluator(ds, cfg.classifier, folds, cfg.seed)


def allowed_partitions(k0: int, ordinal: bool, forbidden_merges=()) -> list[Partition]:
    """Every allowed combination with K >= 2, identity included."""
    if ordinal:
        it = enumerate_ordinal(k0, include_identity=True)
    else:
        if k0 > NOMINAL_ENUMERATION_CAP:
            raise TooManyClasses(
                f"exhaustive nominal search over K0={k0} classes exceeds the cap of "
                f"{NOMINAL_ENUMERATION_CAP}"
            )
        it = enumerate_nominal(k0, include_identity=True)
    return [p for p in it if p.k >= 2 and not violates_forbidden(p, forbidden_merges)]


def _check(ds: Dataset, cfg: SearchConfig, evaluator: Evaluator | None) -> Evaluator:
    if ds.k0 < 2:
        raise ValueError("need at least two classes to search")
    for pair in cfg.forbidden_merges:
        if max(pair) > ds.k0 or min(pair) < 1:
            raise ValueError(f"forbidden merge {pair} names a class outside 1..{ds.k0}")
    if evaluator is None:
        return make_evaluator(ds, cfg)
    if evaluator.ds is not ds:
        raise ValueError("evaluator was built for a different dataset")
    return evaluator


def exhaustive_search(ds: Dataset, cfg: SearchConfig, evaluator: Evaluator | None = None,
                      on_step: Callable | None = None) -> SearchTrace:
    space = allowed_partitions(ds.k0, cfg.ordinal, cfg.forbidden_merges)
    ev = _check(ds, cfg, evaluator)
    trace = SearchTrace(cfg.criterion)
    for p in space:
        _evaluate(trace, ev, cfg, p, on_step)
    return trace


def _evaluate(trace, ev, cfg, p, on_step):
    rep = ev.report(cfg.criterion, p)
    trace.record(p, rep)
    if on_step is not None:
        on_step(p, rep)
    return rep.mean


def _candidates(p, ev, cfg, trace):
    """Allowed merges of ``p``, minus the pruned ones (which are logged)."""
    cands = merge_candidates(p, cfg.ordinal, cfg.forbidden_merges)
    if not cfg.prune:
        return [q for _, _, q in cands]
    table = ev.conditional_accuracy(p)
    keep = []
    for i, j, q in cands:
        if prune_check(p, i, j, table) == "prune":
            trace.pruned.append((q, f"merge of classes {i} and {j} of {p} cannot raise ITCA"))
        else:
            keep.append(q)
    return keep


def greedy_search(ds: Dataset, cfg: SearchConfig, evaluator: Evaluator | None = None,
                  on_step: Callable | None = None) -> SearchTrace:
    """Merge the best pair while that strictly improves the criterion."""
    ev = _check(ds, cfg, evaluator)
    trace = SearchTrace(cfg.criterion)
    current = Partition.identity(ds.k0)
    current_value = _evaluate(trace, ev, cfg, current, on_step)
    while current.k > 2:
        round_best, round_value = None, -math.inf
        for q in _candidates(current, ev, cfg, trace):
            v = _evaluate(trace, ev, cfg, q, on_step)
            if round_best is None or _better(v, q, round_value, round_best):
                round_best, round_value = q, v
        if round_best is None or not round_value > current_value:
            break
        current, current_value = round_best, round_value
    # the incumbent is the answer; it is also the trace maximum by construction
    trace.best, trace.best_value = current, current_value
    return trace


def bfs_search(ds: Dataset, cfg: SearchConfig, evaluator: Evaluator | None = None,
               on_step: Callable | None = None) -> SearchTrace:
    """Breadth-first expansion of strictly improving merges."""
    ev = _check(ds, cfg, evaluator)
    trace = SearchTrace(cfg.criterion)
    start = Partition.identity(ds.k0)
    values = {start: _evaluate(trace, ev, cfg, start, on_step)}
    queue = [start]
    head = 0
    while head < len(queue):
        p = queue[head]
        head += 1
        if p.k < 3:
            continue
        for q in _candidates(p, ev, cfg, trace):
            if q in values:
                continue
            values[q] = _evaluate(trace, ev, cfg, q, on_step)
            if values[q] > values[p]:
                queue.append(q)
    return trace


_DISPATCH = {"exhaustive": exhaustive_search, "greedy": greedy_search, "bfs": bfs_search}


def search(ds: Dataset, cfg: SearchConfig, evaluator: Evaluator | None = None,
           on_step: Callable | None = None) -> SearchTrace:
    return _DISPATCH[cfg.strategy](ds, cfg, evaluator, on_step)
