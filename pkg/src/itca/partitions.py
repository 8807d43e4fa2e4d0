"""Class combinations: surjective maps from K0 observed labels onto K combined labels.

A :class:`Partition` is stored in restricted-growth (canonical) form, so two
partitions with the same grouping compare and hash equal.  Labels are 1-based
throughout, matching the text form ``{(1,2),3,(4,5)}``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "PartitionError",
    "EmptyAssignment",
    "LabelOutOfRange",
    "TooManyClasses",
    "NotOrdinal",
    "LengthMismatch",
    "NOMINAL_ENUMERATION_CAP",
    "Partition",
    "OrdinalEncoding",
    "canonicalize",
    "apply",
    "enumerate_ordinal",
    "enumerate_nominal",
    "count_ordinal",
    "count_nominal",
    "bell_number",
    "merge_candidates",
    "neighbors",
    "violates_forbidden",
    "encode_ordinal",
    "decode_ordinal",
    "hamming",
    "parse_partition",
]

NOMINAL_ENUMERATION_CAP = 14


class PartitionError(ValueError):
    pass


class EmptyAssignment(PartitionError):
    pass


class LabelOutOfRange(PartitionError):
    pass


class TooManyClasses(PartitionError):
    pass


class NotOrdinal(PartitionError):
    pass


class LengthMismatch(PartitionError):
    pass


@dataclass(frozen=True)
class Partition:
    """A class combination in canonical form.

    ``assignment[i]`` is the combined label (1..K) of original class ``i + 1``.
    Construct through :func:`canonicalize` unless the sequence is already
    canonical; the constructor rejects non-canonical input.
    """

    assignment: tuple[int, ...]

    def __post_init__(self) -> None:
        a = tuple(int(v) for v in self.assignment)
        if not a:
            raise EmptyAssignment("assignment must be nonempty")
        next_label = 1
        for v in a:
            if v == next_label:
                next_label += 1
            elif not 1 <= v < next_label:
                raise PartitionError(
                    f"assignment {a} is not in restricted-growth form; use canonicalize()"
                )
        object.__setattr__(self, "assignment", a)

    @property
    def k0(self) -> int:
        return len(self.assignment)

    @property
    def k(self) -> int:
        return max(self.assignment)

    @classmethod
    def identity(cls, k0: int) -> "Partition":
        return cls(tuple(range(1, k0 + 1)))

    @classmethod
    def all_combined(cls, k0: int) -> "Partition":
        return cls((1,) * k0)

    @property
    def is_identity(self) -> bool:
        return self.k == self.k0

    @property
    def is_ordinal(self) -> bool:
        """True when every combined class is a block of adjacent original classes."""
        return all(b - a in (0, 1) for a, b in zip(self.assignment, self.assignment[1:]))

    def groups(self) -> tuple[tuple[int, ...], ...]:
        """Original labels (1-based) of each combined class, in combined-label order."""
        out: list[list[int]] = [[] for _ in range(self.k)]
        for i, v in enumerate(self.assignment):
            out[v - 1].append(i + 1)
        return tuple(tuple(g) for g in out)

    def preimage(self, k: int) -> tuple[int, ...]:
        return self.groups()[k - 1]

    def __call__(self, label: int) -> int:
        return apply(self, label)

    def map_labels(self, labels) -> np.ndarray:
        """Vectorised ``apply`` over an array of original labels."""
        lut = np.asarray((0,) + self.assignment, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size and (labels.min() < 1 or labels.max() > self.k0):
            raise LabelOutOfRange(f"labels must lie in 1..{self.k0}")
        return lut[labels]

    def merge(self, i: int, j: int) -> "Partition":
        """Combine combined classes ``i`` and ``j`` (1-based)."""
        if i == j or not (1 <= i <= self.k and 1 <= j <= self.k):
            raise LabelOutOfRange(f"cannot merge combined classes {i} and {j} of K={self.k}")
        lo, hi = min(i, j), max(i, j)
        return canonicalize([lo if v == hi else v for v in self.assignment])

    def refines(self, coarser: "Partition") -> bool:
        """True when every class of ``self`` lies inside one class of ``coarser``."""
        if coarser.k0 != self.k0:
            return False
        seen: dict[int, int] = {}
        for fine, coarse in zip(self.assignment, coarser.assignment):
            if seen.setdefault(fine, coarse) != coarse:
                return False
        return True

    def sort_key(self) -> tuple:
        # larger K first, then lexicographic assignment
        return (-self.k, self.assignment)

    def __str__(self) -> str:
        parts = []
        for g in self.groups():
            if len(g) == 1:
                parts.append(str(g[0]))
            else:
                parts.append("(" + ",".join(map(str, g)) + ")")
        return "{" + ",".join(parts) + "}"

    def __repr__(self) -> str:
        return f"Partition({self})"


def canonicalize(raw_assignment: Iterable[int]) -> Partition:
    """Relabel groups by order of first appearance.

    Any sequence of hashable group ids is accepted, so the only failure mode is
    an empty sequence (gaps in the ids disappear when relabelling).
    """
    raw = list(raw_assignment)
    if not raw:
        raise EmptyAssignment("raw assignment must be nonempty")
    relabel: dict = {}
    out = []
    for v in raw:
        if v not in relabel:
            relabel[v] = len(relabel) + 1
        out.append(relabel[v])
    return Partition(tuple(out))


def apply(p: Partition, label: int) -> int:
    if not 1 <= label <= p.k0:
        raise LabelOutOfRange(f"label {label} outside 1..{p.k0}")
    return p.assignment[label - 1]


_TOKEN = re.compile(r"\s*(?:\((\s*\d+(?:\s*,\s*\d+)*\s*)\)|(\d+))\s*(?:,|$)")


def parse_partition(text: str) -> Partition:
    """Parse the text form ``{(1,2),3,(4,5)}`` (whitespace tolerated)."""
    s = text.strip()
    if not (s.startswith("{") and s.endswith("}")):
        raise PartitionError(f"partition text must be wrapped in braces: {text!r}")
    body = s[1:-1]
    if not body.strip():
        raise EmptyAssignment("empty partition text")
    if body.rstrip().endswith(","):
        raise PartitionError(f"trailing comma in {text!r}")
    groups: list[list[int]] = []
    pos = 0
    while pos < len(body):
        m = _TOKEN.match(body, pos)
        if m is None or m.end() == pos:
            raise PartitionError(f"cannot parse partition text {text!r} at offset {pos}")
        tok = m.group(1) if m.group(1) is not None else m.group(2)
        groups.append([int(x) for x in tok.split(",")])
        pos = m.end()
    labels = sorted(x for g in groups for x in g)
    if labels != list(range(1, len(labels) + 1)):
        raise PartitionError(f"labels in {text!r} must cover 1..K0 exactly once")
    raw = [0] * len(labels)
    for gid, g in enumerate(groups):
        for x in g:
            raw[x - 1] = gid
    return canonicalize(raw)


# ---------------------------------------------------------------------------
# enumeration


def count_ordinal(k0: int, include_identity: bool = False) -> int:
    if k0 < 1:
        raise ValueError("k0 must be positive")
    return 2 ** (k0 - 1) - (0 if include_identity else 1)


@lru_cache(maxsize=None)
def bell_number(n: int) -> int:
    """Bell numbers via B(n+1) = sum_k C(n, k) B(k)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 1
    return sum(comb(n - 1, k) * bell_number(k) for k in range(n))


def count_nominal(k0: int, include_identity: bool = False) -> int:
    if k0 < 1:
        raise ValueError("k0 must be positive")
    return bell_number(k0) - (0 if include_identity else 1)


def enumerate_ordinal(k0: int, include_identity: bool = False) -> Iterator[Partition]:
    """Every contiguous-block partition of ``1..k0``.

    Ordered by the stars-and-bars encoding read as a binary number, so the
    all-combined partition comes first and the identity last.
    """
    if k0 < 1:
        raise ValueError("k0 must be positive")
    nbits = k0 - 1
    for code in range(2**nbits):
        bits = tuple((code >> (nbits - 1 - b)) & 1 for b in range(nbits))
        if not include_identity and all(bits):
            continue
        yield decode_ordinal(OrdinalEncoding(bits))


def _restricted_growth_strings(n: int) -> Iterator[tuple[int, ...]]:
    a = [1] * n
    m = [1] * n  # m[i] = max(a[:i+1])
    while True:
        yield tuple(a)
        i = n - 1
        while i > 0 and a[i] > m[i - 1]:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        m[i] = max(m[i - 1], a[i])
        for t in range(i + 1, n):
            a[t] = 1
            m[t] = m[i]


def enumerate_nominal(k0: int, include_identity: bool = False) -> Iterator[Partition]:
    """Every set partition of ``1..k0`` as restricted-growth strings (lexicographic)."""
    if k0 < 1:
        raise ValueError("k0 must be positive")
    if k0 > NOMINAL_ENUMERATION_CAP:
        raise TooManyClasses(
            f"nominal enumeration capped at K0={NOMINAL_ENUMERATION_CAP} (got {k0}); "
            "use greedy or bfs search"
        )
    for rgs in _restricted_growth_strings(k0):
        p = Partition(rgs)
        if not include_identity and p.is_identity:
            continue
        yield p


# ---------------------------------------------------------------------------
# neighbourhoods


def _normalize_forbidden(forbidden_merges) -> frozenset[frozenset[int]]:
    if not forbidden_merges:
        return frozenset()
    out = set()
    for pair in forbidden_merges:
        a, b = pair
        if a == b:
            raise ValueError(f"forbidden pair must name two distinct classes: {pair}")
        out.add(frozenset((int(a), int(b))))
    return frozenset(out)


def merge_candidates(
    p: Partition,
    ordinal: bool,
    forbidden_merges: Iterable[Sequence[int]] | None = None,
) -> list[tuple[int, int, Partition]]:
    """All single merges ``(i, j, merged)`` allowed from ``p``, with ``i < j``.

    Ordinal mode only merges adjacent blocks; ``p`` must then be ordinal.
    """
    forbidden = _normalize_forbidden(forbidden_merges)
    if ordinal and not p.is_ordinal:
        raise NotOrdinal(f"{p} combines non-adjacent classes")
    if p.k < 2:
        return []
    groups = p.groups()
    if ordinal:
        pairs: Iterable[tuple[int, int]] = ((i, i + 1) for i in range(1, p.k))
    else:
        pairs = combinations(range(1, p.k + 1), 2)
    out = []
    for i, j in pairs:
        if forbidden and any(
            frozenset((a, b)) in forbidden for a in groups[i - 1] for b in groups[j - 1]
        ):
            continue
        out.append((i, j, p.merge(i, j)))
    return out


def neighbors(
    p: Partition,
    ordinal: bool,
    forbidden_merges: Iterable[Sequence[int]] | None = None,
) -> list[Partition]:
    return [q for _, _, q in merge_candidates(p, ordinal, forbidden_merges)]


def violates_forbidden(p: Partition, forbidden_merges) -> bool:
    forbidden = _normalize_forbidden(forbidden_merges)
    return any(p.assignment[a - 1] == p.assignment[b - 1] for a, b in map(tuple, forbidden))


# ---------------------------------------------------------------------------
# stars-and-bars encoding


@dataclass(frozen=True)
class OrdinalEncoding:
    """``bits[i] == 0`` iff original classes ``i+1`` and ``i+2`` share a combined class."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("encoding bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


def encode_ordinal(p: Partition) -> OrdinalEncoding:
    if not p.is_ordinal:
        raise NotOrdinal(f"{p} combines non-adjacent classes")
    a = p.assignment
    return OrdinalEncoding(tuple(int(a[i + 1] != a[i]) for i in range(len(a) - 1)))


def decode_ordinal(e: OrdinalEncoding) -> Partition:
    label = 1
    out = [1]
    for b in e.bits:
        label += b
        out.append(label)
    return Partition(tuple(out))


def hamming(a: OrdinalEncoding, b: OrdinalEncoding) -> int:
    if len(a) != len(b):
        raise LengthMismatch(f"encodings have lengths {len(a)} and {len(b)}")
    return sum(x != y for x, y in zip(a.bits, b.bits))
