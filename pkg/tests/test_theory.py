import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from itca.theory import (
    OutOfOmega,
    RegionGrid,
    lda_delta,
    normal_cdf,
    oracle_cr_statistic,
    oracle_delta,
    region_grid,
)

mpmath.mp.dps = 40


def mp_curve(p1, p2):
    p1, p2 = mpmath.mpf(p1), mpmath.mpf(p2)
    s = p1 + p2
    return p1**2 * mpmath.log(p1) + p2**2 * mpmath.log(p2) - s**2 * mpmath.log(s)


def test_oracle_zero_at_quarter():
    assert abs(oracle_delta(0.25, 0.25)) < 1e-12
    assert abs(oracle_cr_statistic(0.25, 0.25)) < 1e-12


def test_oracle_known_values():
    assert oracle_cr_statistic(0.05, 0.30) == pytest.approx(0.012757, abs=1e-6)
    assert oracle_delta(0.05, 0.30) == pytest.approx(float(mp_curve(0.05, 0.30) / 0.35), abs=1e-15)
    assert oracle_delta(0.4, 0.4) < 0


def test_oracle_delta_is_population_gain():
    # direct p-ITCA difference: unmerged accuracies p_k/s, merged accuracy 1
    p1, p2 = 0.12, 0.31
    s, p3 = p1 + p2, 1 - p1 - p2
    h = lambda v: -v * math.log(v)
    before = h(p1) * p1 / s + h(p2) * p2 / s + h(p3)
    after = h(s) + h(p3)
    assert oracle_delta(p1, p2) == pytest.approx(after - before, abs=1e-15)


def test_oracle_sign_matches_high_precision_on_grid():
    c = (np.arange(200) + 0.5) / 200
    mismatches = 0
    for a in c:
        for b in c:
            if a + b >= 1:
                continue
            want = mpmath.sign(mp_curve(a, b))
            got = np.sign(oracle_delta(a, b))
            mismatches += int(want != got)
    assert mismatches == 0


def test_oracle_diagonal_sign():
    for p in np.arange(0.001, 0.4995, 0.001):
        if abs(p - 0.25) < 1e-9:
            continue
        assert (oracle_delta(p, p) > 0) == (p < 0.25)


@given(st.floats(0.001, 0.998), st.floats(0.001, 0.998))
def test_symmetry(a, b):
    if a + b >= 0.999:
        return
    assert oracle_delta(a, b) == oracle_delta(b, a)
    assert lda_delta(a, b, limit=True) == lda_delta(b, a, limit=True)
    assert lda_delta(a, b, 4.0) == pytest.approx(lda_delta(b, a, 4.0), abs=1e-15)


def test_outside_omega():
    with pytest.raises(OutOfOmega):
        oracle_delta(0.6, 0.5)
    with pytest.raises(OutOfOmega):
        lda_delta(0.0, 0.5)


def test_lda_limit_examples():
    assert abs(lda_delta(0.25, 0.25, limit=True)) < 1e-15
    want = (0.2 * math.log(0.2)) - (0.3 * math.log(0.3))
    assert lda_delta(0.1, 0.2, limit=True) == pytest.approx(want, abs=1e-15)
    assert lda_delta(0.1, 0.2, limit=True) == pytest.approx(0.0393, abs=1e-4)


def test_lda_full_approaches_limit():
    assert abs(lda_delta(0.1, 0.2, 10.0) - lda_delta(0.1, 0.2, limit=True)) < 1e-3
    c = (np.arange(40) + 0.5) / 40
    worst = max(abs(lda_delta(a, b, 50.0) - lda_delta(a, b, limit=True))
                for a in c for b in c if a + b < 1)
    assert worst < 1e-6


def test_lda_limit_zero_locus_through_quarter():
    # the sign flips across (0.25, 0.25) along the diagonal
    assert lda_delta(0.24, 0.24, limit=True) > 0 > lda_delta(0.26, 0.26, limit=True)


def test_normal_cdf():
    assert normal_cdf(0.0) == 0.5
    for z in np.linspace(-6, 6, 25):
        assert normal_cdf(-z) == pytest.approx(1 - normal_cdf(z), abs=1e-12)
    assert normal_cdf(1.96) == pytest.approx(0.9750, abs=1e-4)
    assert abs(normal_cdf(1.3) - float(mpmath.ncdf(1.3))) < 1e-10


def test_region_grid_oracle():
    g = region_grid("oracle", 20)
    assert isinstance(g, RegionGrid)
    assert g.values.size == 190  # centers with p1 + p2 < 1
    for a, b, v in zip(g.p1, g.p2, g.values):
        assert v == oracle_delta(a, b)
    assert 0 < g.area_fraction < 1


def test_region_grid_restricted_domain():
    g = region_grid("lda_limit", 13, "restricted")
    assert g.values.size == 91
    assert np.all(g.p1 >= 0.1 - 1e-12) and np.all(g.p1 + g.p2 <= 0.8 + 1e-9)


def test_region_grid_csv(tmp_path):
    g = region_grid("lda", 10, separation=3.0)
    path = g.write_csv(tmp_path / "g.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "p1,p2,delta" and len(lines) == g.values.size + 1


def test_region_grid_unknown():
    with pytest.raises(ValueError):
        region_grid("svm")
    with pytest.raises(ValueError):
        region_grid("empirical")
