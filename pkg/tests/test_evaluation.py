import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxembed.evaluation import (LabeledNodes, SplitError, check_split, classify_cv, eval_lp,
                                 f1_scores, fit_logreg, load_labels, logreg_gradient, make_labels,
                                 make_lp_split, max_vote, max_vote_cv, predict_and_score, roc_auc,
                                 train_logreg_ovr)
from ctxembed.graph import Graph, reciprocity
from ctxembed.sgns import SOURCE_SOURCE, EmbeddingSet
from ctxembed.synthetic import erdos_renyi, layered_dag

# -- link-prediction split -------------------------------------------------------


def test_four_cycle_reversal():
    g = Graph.from_edges(4, [0, 1, 2, 3], [1, 2, 3, 0], directed=True)
    split = make_lp_split(g, holdout=0.25, reversal=1.0, seed=0)
    assert len(split.positives) == 1
    a, b = split.positives[0]
    assert split.negatives.tolist() == [[b, a]]
    check_split(g, split)


def test_no_reversal_draws_uniform_non_edges():
    g = layered_dag((10, 10, 10), groups=2, seed=1)
    split = make_lp_split(g, 0.5, 0.0, seed=2)
    check_split(g, split)
    reversed_positives = {(b, a) for a, b in split.positives.tolist()}
    hits = sum(tuple(x) in reversed_positives for x in split.negatives.tolist())
    # a uniform non-edge is rarely the reverse of a test edge
    assert hits < len(split.negatives) // 4


def test_star_cannot_be_split():
    star = Graph.from_edges(6, [0] * 5, [1, 2, 3, 4, 5], directed=False)
    with pytest.raises(SplitError, match="single remaining edge") as info:
        make_lp_split(star, 0.5, seed=0)
    assert info.value.node in {1, 2, 3, 4, 5}


def test_wheel_splits_keep_every_leaf_attached():
    # star K1,5 plus a rim cycle: each leaf can lose one edge
    rim = [1, 2, 3, 4, 5]
    src = [0] * 5 + rim
    dst = rim + rim[1:] + rim[:1]
    g = Graph.from_edges(6, src, dst, directed=False)
    for seed in range(50):
        split = make_lp_split(g, 0.5, seed=seed)
        check_split(g, split)
        deg = split.train.out_degree()
        assert np.all(deg[1:] >= 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.5, 1.0]), st.booleans())
def test_split_invariants_hold(seed, rho, directed):
    g = erdos_renyi(25, 0.3, seed=seed, directed=directed)
    split = make_lp_split(g, 0.3, rho, seed=seed)
    check_split(g, split)
    assert len(split.positives) == round(0.3 * g.num_edges)


def test_reversal_fraction_counts():
    g = layered_dag(seed=3)
    assert reciprocity(g) == 0.0
    for rho in (0.0, 0.5, 1.0):
        split = make_lp_split(g, 0.5, rho, seed=4)
        pos = {tuple(x) for x in split.positives.tolist()}
        reversals = sum((b, a) in pos for a, b in split.negatives.tolist())
        assert reversals >= round(rho * len(split.positives))


def test_split_save(tmp_path):
    g = Graph.from_edges(4, [0, 1, 2, 3], [1, 2, 3, 0], directed=True, ids=list("wxyz"))
    split = make_lp_split(g, 0.25, 1.0, seed=0)
    split.save(tmp_path, g)
    assert len((tmp_path / "positives.txt").read_text().split()) == 2
    assert '"reversal": 1.0' in (tmp_path / "manifest.json").read_text()
    assert len((tmp_path / "train.txt").read_text().splitlines()) == 3


# -- AUC -----------------------------------------------------------------------


def test_auc_examples():
    assert roc_auc([0.9, 0.8], [0.1, 0.2]) == 1.0
    assert roc_auc([0.4, 0.4], [0.4, 0.4, 0.4]) == 0.5
    assert roc_auc([0.8, 0.3], [0.5, 0.1]) == 0.75
    with pytest.raises(ValueError):
        roc_auc([], [0.1])


scores = st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=30)


@given(scores, scores)
def test_auc_matches_pair_count(pos, neg):
    wins = sum((p > n) + 0.5 * (p == n) for p, n in itertools.product(pos, neg))
    assert roc_auc(pos, neg) == wins / (len(pos) * len(neg))


@given(scores, scores, st.floats(0.1, 10), st.floats(-5, 5))
def test_auc_invariant_under_monotone_maps(pos, neg, a, b):
    base = roc_auc(pos, neg)
    assert roc_auc(np.exp(pos), np.exp(neg)) == base
    assert roc_auc(a * np.array(pos) + b, a * np.array(neg) + b) == pytest.approx(base)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_symmetric_scorer_is_blind_to_direction(seed):
    g = layered_dag((15, 15, 15), groups=3, seed=seed)
    split = make_lp_split(g, 0.5, 1.0, seed=seed)
    e = EmbeddingSet(np.random.default_rng(seed).normal(size=(g.node_count, 4)))
    assert eval_lp(e, split, SOURCE_SOURCE) == 0.5


# -- logistic regression -----------------------------------------------------------


def test_separable_data_is_fit_exactly():
    x = np.array([[-2.0], [-1.0], [-0.5], [0.5], [1.0], [2.0]])
    y = np.array([-1, -1, -1, 1, 1, 1.0])
    w = fit_logreg(x, y, lam=1e-3)
    assert np.all(np.sign(x @ w[:-1] + w[-1]) == y)


def test_strong_regularization_gives_prior():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(100, 3))
    y = np.where(rng.random(100) < 0.3, 1.0, -1.0)
    w = fit_logreg(x, y, lam=1e8)
    assert np.abs(w[:-1]).max() < 1e-5
    prior = np.mean(y > 0)
    assert w[-1] == pytest.approx(np.log(prior / (1 - prior)), abs=1e-3)


def test_returned_weights_are_stationary():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(50, 4))
    y = np.where(x @ [1.0, -2.0, 0.5, 0.0] + rng.normal(size=50) > 0, 1.0, -1.0)
    w = fit_logreg(x, y, lam=1.0)
    assert np.linalg.norm(logreg_gradient(w, x, y, 1.0)) < 1e-4


def test_ovr_model_shapes_and_degenerate_labels():
    labels = make_labels({0: {0}, 1: {0}, 2: {1}, 3: {1}}, label_count=3)
    feats = np.array([[1.0, 0], [0.9, 0.1], [0, 1.0], [0.1, 0.9]])
    model = train_logreg_ovr(feats, labels, np.arange(4))
    assert model.weights.shape == (3, 3)
    # label 2 never occurs: constant score below the other labels' positives
    assert np.all(model.weights[2, :-1] == 0.0)
    with pytest.raises(ValueError):
        train_logreg_ovr(np.full((4, 2), np.nan), labels, np.arange(4))


# -- F1 ------------------------------------------------------------------------


def test_f1_examples():
    assert f1_scores([(0,), (1, 2)], [[0], [1, 2]], 3) == (1.0, 1.0)
    micro, macro = f1_scores([(0,), (1,)], [[0], [0]], 2)
    assert micro == pytest.approx(0.5)
    assert macro == pytest.approx(1 / 3)


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=30), st.randoms())
def test_f1_single_label_is_accuracy_and_order_free(pairs, rnd):
    truth = [(t,) for t, _ in pairs]
    pred = [[p] for _, p in pairs]
    micro, macro = f1_scores(truth, pred, 5)
    assert micro == pytest.approx(np.mean([t == p for t, p in pairs]))
    assert 0.0 <= micro <= 1.0 and 0.0 <= macro <= 1.0
    order = list(range(len(pairs)))
    rnd.shuffle(order)
    assert f1_scores([truth[i] for i in order], [pred[i] for i in order], 5) == pytest.approx((micro, macro))


def test_predict_and_score_top_k():
    labels = make_labels({0: {0, 2}, 1: {1}}, label_count=3)

    class Fixed:
        def scores(self, x):
            return np.array([[0.9, 0.1, 0.5], [0.2, 0.8, 0.8]])

    # node 1 ties labels 1 and 2; the smaller id wins
    assert predict_and_score(Fixed(), np.zeros((2, 1)), labels, [0, 1]) == (1.0, 1.0)


def test_classification_recovers_separable_labels():
    rng = np.random.default_rng(0)
    n = 200
    y = rng.integers(0, 3, n)
    feats = np.eye(3)[y] * 3 + rng.normal(scale=0.3, size=(n, 3))
    labels = make_labels({i: {int(y[i])} for i in range(n)})
    micro, macro = classify_cv(feats, labels)
    assert micro > 0.95 and macro > 0.95


# -- labels ----------------------------------------------------------------------


def test_load_labels(tmp_path):
    g = Graph.from_edges(3, [0, 1], [1, 2], directed=False, ids=["a", "b", "c"])
    path = tmp_path / "labels.txt"
    path.write_text("a 10\na 2\nb 2\n# note\nzz 3\nc 10\n")
    with pytest.warns(RuntimeWarning, match="1 label lines"):
        labels = load_labels(path, g, folds=3)
    assert labels.label_names == ["2", "10"]
    assert labels.labels == {0: (0, 1), 1: (0,), 2: (1,)}
    assert sorted(labels.folds.values()) == [0, 1, 2]
    path.write_text("a\n")
    with pytest.raises(ValueError, match="line 1"):
        load_labels(path, g)


def test_folds_partition_labeled_nodes():
    labels = make_labels({i: {i % 3} for i in range(23)}, folds=5, seed=1)
    parts = [set(labels.fold_nodes(f).tolist()) for f in range(5)]
    assert set().union(*parts) == set(range(23))
    assert sum(map(len, parts)) == 23
    assert max(map(len, parts)) - min(map(len, parts)) <= 1


# -- Max-Vote --------------------------------------------------------------------


def _vote_graph():
    # node 0 has neighbors 1, 2, 3 labeled A, A, B
    return Graph.from_edges(4, [0, 0, 0], [1, 2, 3], directed=True)


def test_max_vote_examples():
    g = _vote_graph()
    a, b = 0, 1
    for k, expected in [(1, [a]), (2, [a, b])]:
        truth = {0: tuple(range(k)), 1: (a,), 2: (a,), 3: (b,)}
        labels = LabeledNodes(truth, 10, {v: 0 for v in truth})
        assert max_vote(g, labels, [1, 2, 3], [0])[0] == expected


def test_max_vote_uses_incoming_edges_and_label_order():
    g = Graph.from_edges(3, [1, 2], [0, 0], directed=True)
    labels = LabeledNodes({0: (0,), 1: (4,), 2: (3,)}, 5, {0: 0, 1: 1, 2: 1})
    assert max_vote(g, labels, [1, 2], [0])[0] == [3]


def test_max_vote_uniform_fill():
    n = 100_000
    g = Graph.from_edges(n + 1, [0], [1], directed=False)
    labels = LabeledNodes({v: (0,) for v in range(2, n + 1)}, 10, {})
    pred = max_vote(g, labels, [], list(range(2, n + 1)), seed=5)
    freq = np.bincount([p[0] for p in pred.values()], minlength=10) / len(pred)
    np.testing.assert_allclose(freq, 0.1, atol=0.005)


def test_max_vote_deterministic_and_relabel_invariant():
    g = erdos_renyi(40, 0.15, seed=3)
    rng = np.random.default_rng(0)
    truth = {v: tuple(sorted(set(rng.integers(0, 4, 2).tolist()))) for v in range(40)}
    labels = make_labels(truth, label_count=4, seed=1)
    train, test = labels.train_nodes(0), labels.fold_nodes(0)
    a = max_vote(g, labels, train, test, seed=9)
    assert a == max_vote(g, labels, train, test, seed=9)
    perm = rng.permutation(40)
    h = g.relabel(perm)
    moved = LabeledNodes({int(perm[v]): ls for v, ls in truth.items()}, 4, {})
    b = max_vote(h, moved, perm[train], perm[test], seed=9)
    und = g.undirected_view()
    known = set(train.tolist())
    for v in test.tolist():
        seen = set().union(*[truth[u] for u in und.neighbors(v).tolist() if u in known])
        # without random fill the prediction depends only on the tally
        if len(seen) >= len(truth[v]):
            assert b[int(perm[v])] == a[v]


def test_max_vote_cv_runs():
    g = erdos_renyi(30, 0.2, seed=0)
    labels = make_labels({v: {v % 2} for v in range(30)})
    micro, macro = max_vote_cv(g, labels)
    assert 0.0 <= micro <= 1.0 and 0.0 <= macro <= 1.0
