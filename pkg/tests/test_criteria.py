import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from itca.classifiers import ClassifierSpec
from itca.criteria import (
    CRITERIA,
    CriterionError,
    CriterionReport,
    Evaluator,
    GaussianMixture,
    aac_split,
    acc_split,
    ckl_split,
    conditional_accuracy,
    cv,
    derive_seed,
    gaussian_kl,
    gmm_kl_approx,
    gmm_kl_bounds,
    itca_alt_split,
    itca_split,
    mi_split,
    p_itca,
    p_pe,
    pe_split,
    score_predictions,
    split_predictions,
)
from itca.data import Dataset, SimulationConfig, simulate, stratified_folds
from itca.partitions import Partition, enumerate_ordinal, parse_partition

LOG2 = math.log(2)
TWO = Partition.identity(2)


def perfect(y0, p):
    return p.map_labels(np.asarray(y0))


# --- hand examples


def test_itca_examples():
    y = np.array([1, 1, 2, 2])
    assert score_predictions("itca", TWO, y, y) == pytest.approx(LOG2, abs=1e-15)
    assert score_predictions("itca", TWO, y, [1, 1, 1, 1]) == pytest.approx(0.5 * LOG2, abs=1e-15)
    all_in = Partition.all_combined(2)
    assert score_predictions("itca", all_in, y, [1, 1, 1, 1]) == 0.0


def test_itca_alt_examples():
    y = np.array([1, 1, 2, 2])
    assert score_predictions("itca_alt", TWO, y, y) == pytest.approx(LOG2, abs=1e-15)
    assert score_predictions("itca_alt", TWO, y, [2, 2, 1, 1]) == 0.0


def test_acc_examples():
    y = np.array([1, 1, 1, 2])
    assert score_predictions("acc", TWO, y, y) == 1.0
    assert score_predictions("acc", TWO, y, [1, 1, 1, 1]) == 0.75
    assert score_predictions("acc", Partition.all_combined(2), y, [1] * 4) == 1.0


def test_mi_examples():
    y = np.array([1, 1, 2, 2])
    assert score_predictions("mi", TWO, y, [1, 1, 1, 1]) == 0.0
    assert score_predictions("mi", TWO, y, y) == pytest.approx(LOG2, abs=1e-15)
    y4 = np.array([1, 2, 3, 4])
    p = parse_partition("{(1,2),(3,4)}")
    assert score_predictions("mi", p, y4, perfect(y4, p)) == pytest.approx(LOG2, abs=1e-15)


def test_aac_examples():
    y = np.array([1, 2, 3, 3])
    assert score_predictions("aac_proportion", Partition.identity(3), y, y) == pytest.approx(3.0)
    assert score_predictions("aac_cardinality", Partition.identity(3), y, y) == 1.0
    p = parse_partition("{(1,2),3}")
    assert score_predictions("aac_proportion", p, y, perfect(y, p)) == pytest.approx(2.0)


def test_pe_examples():
    y = np.array([1, 1, 2, 2])
    assert score_predictions("pe", TWO, y, [2, 2, 1, 1]) == 0.0
    assert score_predictions("pe", TWO, y, [1, 1, 1, 1]) == pytest.approx(-0.5 * math.log(0.5))
    assert score_predictions("pe", TWO, y, y) == pytest.approx(LOG2)


def test_unknown_criterion():
    with pytest.raises(CriterionError):
        score_predictions("f1", TWO, [1, 2], [1, 2])


def test_report_stats():
    rep = CriterionReport.from_values("itca", [0.4] * 5)
    assert rep.mean == pytest.approx(0.4) and rep.stderr == 0.0
    rep = CriterionReport.from_values("acc", [1.0, 2.0, 3.0, 4.0, 5.0])
    assert rep.stderr == pytest.approx(np.std([1, 2, 3, 4, 5], ddof=1) / math.sqrt(5))


def test_population_forms():
    assert p_itca([0.5, 0.5], [1, 0]) == pytest.approx(0.3466, abs=1e-4)
    probs = np.array([0.2, 0.3, 0.5])
    assert p_itca(probs, [1, 1, 1]) == pytest.approx(-np.sum(probs * np.log(probs)))
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = rng.dirichlet(np.ones(4))
        a = rng.uniform(0.05, 1, 4)
        lhs = p_pe(p * a)
        rhs = p_itca(p, a) + np.sum(-p * np.log(a) * a)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_derive_seed_is_stable_and_spread():
    assert derive_seed(0, "{1,2}", 0) == derive_seed(0, "{1,2}", 0)
    seeds = {derive_seed(0, "{1,2}", r) for r in range(100)}
    assert len(seeds) == 100 and all(0 <= s < 2**63 for s in seeds)


# --- brute-force oracle (random instances, n <= 12, K0 <= 3)


@st.composite
def instances(draw):
    k0 = draw(st.integers(2, 3))
    n_train = draw(st.integers(k0, 7))
    n_eval = draw(st.integers(1, 12 - n_train)) if n_train < 12 else 1
    y_train = list(range(1, k0 + 1)) + draw(
        st.lists(st.integers(1, k0), min_size=n_train - k0, max_size=n_train - k0))
    y_eval = draw(st.lists(st.integers(1, k0), min_size=n_eval, max_size=n_eval))
    floats = st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 3))
    x_train = draw(st.lists(floats, min_size=n_train, max_size=n_train))
    x_eval = draw(st.lists(floats, min_size=n_eval, max_size=n_eval))
    raw = draw(st.lists(st.integers(0, k0 - 1), min_size=k0, max_size=k0))
    from itca.partitions import canonicalize
    p = canonicalize(raw)
    kind = draw(st.sampled_from(["nearest_centroid", "majority", "soft_lda"]))
    seed = draw(st.integers(0, 2**32))
    return k0, np.array(x_train), np.array(y_train), np.array(x_eval), np.array(y_eval), p, kind, seed


@given(instances())
@settings(max_examples=100, deadline=None)
def test_split_criteria_match_brute_force(inst):
    k0, xt, yt, xe, ye, p, kind, seed = inst
    spec = ClassifierSpec(kind, seed=seed)
    train, ev = (xt, yt), (xe, ye)
    pred = split_predictions(train, ev, p, spec, seed).tolist()
    props = [np.mean(np.concatenate([yt, ye]) == c) for c in range(1, k0 + 1)]
    a, y0 = p.assignment, ye.tolist()
    tol = 1e-12
    assert itca_split(train, ev, p, spec, seed) == pytest.approx(oracles.itca(y0, pred, a, props), abs=tol)
    assert itca_alt_split(train, ev, p, spec, seed) == pytest.approx(oracles.itca_alt(y0, pred, a), abs=tol)
    assert acc_split(train, ev, p, spec, seed) == pytest.approx(oracles.acc(y0, pred, a), abs=tol)
    assert mi_split(train, ev, p, spec, seed) == pytest.approx(oracles.mi(y0, pred, a), abs=tol)
    assert aac_split(train, ev, p, spec, "proportion", seed) == pytest.approx(
        oracles.aac_proportion(y0, pred, a, props), abs=tol)
    assert aac_split(train, ev, p, spec, "cardinality", seed) == pytest.approx(
        oracles.aac_cardinality(y0, pred, a), abs=tol)
    assert pe_split(train, ev, p, spec, seed) == pytest.approx(oracles.pe(y0, pred, a), abs=tol)
    want = oracles.ckl_1d(xe.tolist(), y0, pred, a)
    # CKL terms scale like 1/ridge for one-point groups, so compare relatively
    assert ckl_split(train, ev, p, spec, seed) == pytest.approx(want, rel=1e-12, abs=tol)


@given(instances())
@settings(max_examples=60, deadline=None)
def test_itca_alt_equals_itca_with_eval_proportions(inst):
    _, xt, yt, xe, ye, p, kind, seed = inst
    spec = ClassifierSpec(kind, seed=seed)
    a = itca_alt_split((xt, yt), (xe, ye), p, spec, seed)
    b = itca_split((xt, yt), (xe, ye), p, spec, seed, proportions="eval")
    assert a == pytest.approx(b, abs=1e-12)


@given(instances())
@settings(max_examples=60, deadline=None)
def test_generic_bounds(inst):
    _, xt, yt, xe, ye, p, kind, seed = inst
    spec = ClassifierSpec(kind, seed=seed)
    pred = split_predictions((xt, yt), (xe, ye), p, spec, seed)
    assert itca_split((xt, yt), (xe, ye), p, spec, seed) >= 0
    mi = score_predictions("mi", p, ye, pred)
    assert mi >= -1e-12

    def entropy(v):
        q = np.bincount(v) / len(v)
        q = q[q > 0]
        return float(-np.sum(q * np.log(q)))

    assert mi <= min(entropy(pred), entropy(ye)) + 1e-12
    perm = np.random.default_rng(seed % 1000).permutation(len(ye))
    for name in CRITERIA:
        if name == "ckl":
            continue
        assert score_predictions(name, p, ye[perm], pred[perm]) == pytest.approx(
            score_predictions(name, p, ye, pred), abs=1e-12)


@given(st.lists(st.integers(1, 3), min_size=3, max_size=12), st.sampled_from(["{1,2,3}", "{(1,2),3}", "{1,(2,3)}"]))
def test_perfect_classifier_identities(labels, text):
    y = np.array(labels)
    k0 = 3
    p = parse_partition(text)
    props = np.bincount(y, minlength=k0 + 1)[1:] / y.size
    pred = perfect(y, p)
    P = np.zeros(p.k)
    np.add.at(P, np.asarray(p.assignment) - 1, props)
    present = P[P > 0]
    ent = float(-np.sum(present * np.log(present)))
    q = props[props > 0]
    label_ent = float(-np.sum(q * np.log(q)))
    assert score_predictions("itca", p, y, pred, props) == pytest.approx(ent, abs=1e-12)
    assert score_predictions("pe", p, y, pred) == pytest.approx(ent, abs=1e-12)
    assert score_predictions("aac_proportion", p, y, pred, props) == pytest.approx(present.size, abs=1e-12)
    if p.is_identity:
        assert score_predictions("mi", p, y, pred) == pytest.approx(label_ent, abs=1e-12)
    assert score_predictions("itca", Partition.all_combined(3), y, np.ones_like(y), props) == 0.0


def test_brute_force_speed():
    import time
    t = time.perf_counter()
    test_split_criteria_match_brute_force()
    assert time.perf_counter() - t < 10


# --- cross-validation


def test_cv_constant_folds_have_zero_stderr():
    ds = Dataset(np.arange(20, dtype=float)[:, None], np.repeat([1, 2], 10))
    rep = cv("acc", ds, Partition.all_combined(2), ClassifierSpec("majority"), stratified_folds(ds, 5, 0))
    assert rep.mean == 1.0 and rep.stderr == 0.0


def test_evaluator_caches_fits():
    ds = simulate(SimulationConfig(parse_partition("{(1,2),3}"), n=300, seed=1))
    ev = Evaluator(ds, ClassifierSpec("lda"), stratified_folds(ds, 5, 0))
    p = Partition.identity(3)
    ev.report("itca", p)
    fits = ev.fits
    for name in CRITERIA:
        ev.report(name, p)
    assert ev.fits == fits == 5


def test_evaluator_matches_split_functions():
    ds = simulate(SimulationConfig(parse_partition("{(1,2),3}"), n=300, seed=2))
    folds = stratified_folds(ds, 5, 0)
    ev = Evaluator(ds, ClassifierSpec("lda"), folds, base_seed=7)
    p = parse_partition("{(1,2),3}")
    vals = []
    for r, (tr, te) in enumerate(folds.splits()):
        seed = derive_seed(7, p, r)
        vals.append(itca_split(ds.subset(tr), ds.subset(te), p, ClassifierSpec("lda"), seed))
    assert ev.per_fold("itca", p) == pytest.approx(vals, abs=1e-15)


def test_conditional_accuracy_table():
    y = np.array([1, 1, 2, 2, 3, 3])
    t = conditional_accuracy(y, [1, 2, 2, 2, 1, 1], Partition.identity(3))
    assert t.accuracy.tolist() == [0.5, 1.0, 0.0]
    assert t.proportion.tolist() == pytest.approx([1 / 3] * 3)


def test_paired_itca_and_acc_maximizers():
    ds = simulate(SimulationConfig(parse_partition("{(1,2),(3,4),(5,6)}"), seed=0))
    ev = Evaluator(ds, ClassifierSpec("lda"), stratified_folds(ds, 5, 0))
    space = [p for p in enumerate_ordinal(6, include_identity=True) if p.k >= 2]
    best_itca = max(space, key=lambda p: ev.report("itca", p).mean)
    best_acc = max(space, key=lambda p: ev.report("acc", p).mean)
    assert str(best_itca) == "{(1,2),(3,4),(5,6)}"
    assert best_acc.k == 2


def test_oracle_no_ambiguity_is_monotone_in_k():
    cfg = SimulationConfig(Partition.identity(4), n=2000, seed=3)
    ds = simulate(cfg)
    ev = Evaluator(ds, ClassifierSpec("oracle"), stratified_folds(ds, 5, 0))
    chain = ["{(1,2,3,4)}", "{(1,2),(3,4)}", "{1,2,(3,4)}", "{1,2,3,4}"]
    reps = [ev.report("itca", parse_partition(t)) for t in chain]
    for a, b in zip(reps, reps[1:]):
        assert b.mean >= a.mean - b.stderr


# --- Gaussian mixtures


def _mix(rng, k, d):
    w = rng.dirichlet(np.ones(k))
    mu = rng.normal(0, 2, (k, d))
    covs = []
    for _ in range(k):
        a = rng.normal(size=(d, d))
        covs.append(a @ a.T + 0.5 * np.eye(d))
    return GaussianMixture(w, mu, np.array(covs))


def _sample(f, n, rng):
    comp = rng.choice(len(f.weights), size=n, p=f.weights)
    out = np.empty((n, f.d))
    for c in range(len(f.weights)):
        idx = comp == c
        out[idx] = rng.multivariate_normal(f.means[c], f.covs[c], idx.sum())
    return out


def _logpdf(f, X):
    from scipy.stats import multivariate_normal
    dens = sum(w * multivariate_normal(m, c).pdf(X) for w, m, c in zip(f.weights, f.means, f.covs))
    return np.log(dens)


def test_gaussian_kl_closed_form():
    assert gaussian_kl([0.0], [[1.0]], [1.0], [[1.0]]) == pytest.approx(0.5)
    assert gaussian_kl([0.0], [[1.0]], [0.0], [[2.0]]) == pytest.approx(0.5 * (math.log(2) + 0.5 - 1))


def test_identical_single_gaussians_give_zero():
    f = GaussianMixture([1.0], [[0.3, -1.0]], [[[2.0, 0.3], [0.3, 1.0]]])
    assert gmm_kl_approx(f, f) == 0.0


def test_self_bracket_contains_zero():
    f = _mix(np.random.default_rng(0), 2, 2)
    lo, hi = gmm_kl_bounds(f, f)
    assert lo <= 0 <= hi


@pytest.mark.parametrize("seed", range(4))
def test_bounds_bracket_monte_carlo_kl(seed):
    rng = np.random.default_rng(seed)
    f, g = _mix(rng, 2, 2), _mix(rng, 3, 2)
    X = _sample(f, 200_000, rng)
    kl = float(np.mean(_logpdf(f, X) - _logpdf(g, X)))
    lo, hi = gmm_kl_bounds(f, g)
    margin = 0.02 * max(1.0, abs(kl))
    assert lo - margin <= kl <= hi + margin


@pytest.mark.xfail(strict=True, reason="the variational bounds do not coincide for single components; "
                                       "their average differs from the closed-form KL")
def test_single_component_approx_equals_closed_form():
    f = GaussianMixture([1.0], [[0.0]], [[[1.0]]])
    g = GaussianMixture([1.0], [[1.0]], [[[1.0]]])
    assert gmm_kl_approx(f, g) == pytest.approx(gaussian_kl([0.0], [[1.0]], [1.0], [[1.0]]), abs=1e-9)


def test_ckl_identity_perfect_is_near_zero():
    ds = simulate(SimulationConfig(Partition.identity(3), n=600, step_length=8, seed=4))
    spec = ClassifierSpec("oracle")
    tr, te = next(stratified_folds(ds, 5, 0).splits())
    v = ckl_split(ds.subset(tr), ds.subset(te), Partition.identity(3), spec, seed=0)
    assert abs(v) < 0.5  # both terms compare identical mixtures; only bound slack remains
