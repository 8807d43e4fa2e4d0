import itertools
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itca.partitions import (
    EmptyAssignment,
    LabelOutOfRange,
    LengthMismatch,
    NotOrdinal,
    OrdinalEncoding,
    Partition,
    PartitionError,
    apply,
    bell_number,
    canonicalize,
    count_nominal,
    count_ordinal,
    decode_ordinal,
    encode_ordinal,
    enumerate_nominal,
    enumerate_ordinal,
    hamming,
    merge_candidates,
    neighbors,
    parse_partition,
    violates_forbidden,
)


def bell_triangle(n):
    """Bell numbers B_0..B_n from the Bell triangle, independent of the library."""
    out = [1]
    row = [1]
    for _ in range(n):
        new = [row[-1]]
        for v in row:
            new.append(new[-1] + v)
        row = new
        out.append(row[0])
    return out


BELL = bell_triangle(16)


def test_bell_triangle_sanity():
    assert BELL[:8] == [1, 1, 2, 5, 15, 52, 203, 877]


# --- canonical form


@pytest.mark.parametrize("raw,expected,k", [
    ([2, 2, 1], (1, 1, 2), 2),
    ([1, 2, 3], (1, 2, 3), 3),
    ([3, 1, 3, 1], (1, 2, 1, 2), 2),
])
def test_canonicalize_examples(raw, expected, k):
    p = canonicalize(raw)
    assert p.assignment == expected
    assert p.k == k


def test_canonicalize_rejects_empty():
    with pytest.raises(EmptyAssignment):
        canonicalize([])


def test_partition_rejects_non_canonical():
    with pytest.raises(PartitionError):
        Partition((2, 1))


def test_apply_examples():
    assert apply(parse_partition("{1,2,(3,4)}"), 4) == 3
    assert apply(Partition.identity(3), 2) == 2
    assert apply(parse_partition("{(1,2),(3,4),(5,6)}"), 5) == 3


def test_apply_out_of_range():
    with pytest.raises(LabelOutOfRange):
        apply(Partition.identity(3), 4)


def test_text_round_trip():
    for text in ["{(1,2),3,(4,5)}", "{1,2,3}", "{(1,2,3)}", "{(1,3),2}"]:
        assert str(parse_partition(text)) == text


@pytest.mark.parametrize("bad", ["(1,2),3", "{1,1}", "{1,3}", "{}", "{(1,2),}", "{a}"])
def test_parse_rejects(bad):
    with pytest.raises(PartitionError):
        parse_partition(bad)


# --- counts

ORDINAL_TABLE = {2: 1, 4: 7, 6: 31, 8: 127, 12: 2047, 16: 32767}
NOMINAL_TABLE = {2: 1, 4: 14, 6: 202, 8: 4139, 12: 4213596}


@pytest.mark.parametrize("k0,count", ORDINAL_TABLE.items())
def test_ordinal_counts_match_table(k0, count):
    assert count_ordinal(k0) == count
    assert sum(1 for _ in enumerate_ordinal(k0)) == count


@pytest.mark.parametrize("k0,count", NOMINAL_TABLE.items())
def test_nominal_counts_match_table(k0, count):
    assert count_nominal(k0) == count
    if k0 <= 6:
        assert sum(1 for _ in enumerate_nominal(k0)) == count


def test_nominal_16_is_about_ten_billion():
    assert 1e10 <= count_nominal(16) < 2e10


@pytest.mark.parametrize("k0", range(1, 11))
def test_counts_against_bell_triangle(k0):
    assert count_ordinal(k0) == 2 ** (k0 - 1) - 1
    assert bell_number(k0) == BELL[k0]
    assert count_nominal(k0) == BELL[k0] - 1
    if k0 <= 8:
        assert sum(1 for _ in enumerate_nominal(k0)) == BELL[k0] - 1


def test_enumeration_excludes_or_includes_identity():
    ident = Partition.identity(4)
    assert ident not in set(enumerate_ordinal(4))
    assert ident in set(enumerate_ordinal(4, include_identity=True))
    assert ident in set(enumerate_nominal(4, include_identity=True))


@pytest.mark.parametrize("k0", range(1, 8))
def test_enumerations_are_canonical_and_distinct(k0):
    nominal = list(enumerate_nominal(k0, include_identity=True))
    assert len(set(nominal)) == len(nominal) == BELL[k0]
    for p in nominal:
        assert canonicalize(p.assignment) == p
    ordinal = list(enumerate_ordinal(k0, include_identity=True))
    assert all(p.is_ordinal for p in ordinal)
    assert set(ordinal) == {p for p in nominal if p.is_ordinal}


def test_nominal_matches_brute_force_set_partitions():
    # every map [5] -> [5], canonicalized, gives each set partition once
    seen = {canonicalize(m) for m in itertools.product(range(5), repeat=5)}
    assert seen == set(enumerate_nominal(5, include_identity=True))


# --- neighbors


def test_neighbor_examples():
    assert len(neighbors(Partition.identity(4), ordinal=True)) == 3
    assert len(neighbors(Partition.identity(4), ordinal=False)) == 6
    got = set(neighbors(parse_partition("{(1,2),3,4}"), ordinal=True))
    assert got == {parse_partition("{(1,2,3),4}"), parse_partition("{(1,2),(3,4)}")}


def test_ordinal_neighbors_need_ordinal_partition():
    with pytest.raises(NotOrdinal):
        neighbors(parse_partition("{(1,3),2}"), ordinal=True)


def test_forbidden_merges():
    p = Partition.identity(4)
    assert parse_partition("{(1,2),3,4}") not in neighbors(p, False, [(1, 2)])
    assert len(neighbors(p, False, [(1, 2)])) == 5
    # forbidding (1,3) also blocks merging (1,2) with 3 later on
    q = parse_partition("{(1,2),3,4}")
    assert parse_partition("{(1,2,3),4}") not in neighbors(q, False, [(1, 3)])
    assert violates_forbidden(parse_partition("{(1,2,3),4}"), [(1, 3)])
    assert not violates_forbidden(parse_partition("{(1,2),3,4}"), [(1, 3)])


def test_merge_candidates_report_block_indices():
    cands = merge_candidates(parse_partition("{(1,2),3,4}"), ordinal=True)
    assert [(i, j) for i, j, _ in cands] == [(1, 2), (2, 3)]


# --- encoding


def test_encoding_examples():
    assert encode_ordinal(parse_partition("{(1,2),3,4,5,6,7,8}")).bits == (0, 1, 1, 1, 1, 1, 1)
    assert encode_ordinal(Partition.identity(4)).bits == (1, 1, 1)
    assert encode_ordinal(Partition.all_combined(3)).bits == (0, 0)


def test_hamming_examples():
    e = OrdinalEncoding
    assert hamming(e((0, 1, 1)), e((0, 1, 1))) == 0
    assert hamming(e((0, 1, 1)), e((1, 1, 1))) == 1
    assert hamming(e((0, 0, 1, 1, 1, 1, 1)), e((1, 1, 1, 1, 1, 0, 0))) == 4
    with pytest.raises(LengthMismatch):
        hamming(e((0, 1)), e((0, 1, 1)))


def test_encode_rejects_nominal():
    with pytest.raises(NotOrdinal):
        encode_ordinal(parse_partition("{(1,3),2}"))


def test_acceptance_speed():
    t = time.perf_counter()
    for k0 in ORDINAL_TABLE:
        sum(1 for _ in enumerate_ordinal(k0))
    for k0 in (2, 4, 6):
        sum(1 for _ in enumerate_nominal(k0))
    count_nominal(8), count_nominal(12)
    assert time.perf_counter() - t < 1.0


# --- properties

assignments = st.integers(1, 9).flatmap(
    lambda n: st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
ordinal_bits = st.integers(1, 10).flatmap(
    lambda n: st.lists(st.integers(0, 1), min_size=n, max_size=n))


@given(assignments)
def test_canonical_is_idempotent_and_surjective(raw):
    p = canonicalize(raw)
    assert canonicalize(p.assignment) == p
    assert set(p.assignment) == set(range(1, p.k + 1))
    firsts = [p.assignment.index(v) for v in range(1, p.k + 1)]
    assert firsts == sorted(firsts)


@given(assignments)
def test_canonical_respects_grouping(raw):
    p = canonicalize(raw)
    for a, b in itertools.combinations(range(len(raw)), 2):
        assert (raw[a] == raw[b]) == (p.assignment[a] == p.assignment[b])


@given(ordinal_bits)
def test_encoding_round_trip(bits):
    e = OrdinalEncoding(tuple(bits))
    p = decode_ordinal(e)
    assert encode_ordinal(p) == e
    assert sum(bits) == p.k - 1


@given(assignments, st.booleans())
@settings(max_examples=60)
def test_neighbors_are_coarsenings(raw, ordinal):
    p = canonicalize(raw)
    if ordinal and not p.is_ordinal:
        return
    for q in neighbors(p, ordinal):
        assert q.k == p.k - 1
        assert p.refines(q)
        if ordinal:
            assert q.is_ordinal


@given(ordinal_bits, ordinal_bits, ordinal_bits)
def test_hamming_is_a_metric(a, b, c):
    n = min(len(a), len(b), len(c))
    a, b, c = (OrdinalEncoding(tuple(x[:n])) for x in (a, b, c))
    assert hamming(a, a) == 0
    assert hamming(a, b) == hamming(b, a)
    assert hamming(a, c) <= hamming(a, b) + hamming(b, c)
    if a != b:
        assert hamming(a, b) > 0
