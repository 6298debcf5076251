import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxembed.context import ArrayPairStream, WalkConfig, adjacency_pairs, uniform_walk_pairs
from ctxembed.errors import TrainingError
from ctxembed.graph import Graph
from ctxembed.sgns import (SOURCE_CONTEXT, EmbeddingSet, NegativeSampler, TrainConfig,
                           _check_finite, _ns_range, build_huffman, concat_normalized,
                           hs_leaf_probabilities, load_embedding, score_pair, score_pairs, sgns_grad,
                           sgns_loss, train)
from ctxembed.synthetic import erdos_renyi, layered_dag, two_cliques


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


# -- loss and gradient -----------------------------------------------------------


def test_loss_examples():
    z = np.zeros(2)
    assert sgns_loss(z, z, [z]) == pytest.approx(2 * math.log(2), abs=1e-12)
    big = np.array([100.0, 0.0])
    # clamped at +-30, so the loss is tiny but positive
    assert sgns_loss(big, big, [-big]) < 1e-12
    phi = np.array([1.0, 0.0])
    # -log s(1) - log s(1) = 2 * 0.31326168751822286
    assert sgns_loss(phi, phi, [-phi]) == pytest.approx(0.6265233750364457, abs=1e-12)


def _finite_difference_errors(rng, points=100, h=1e-5):
    worst = 0.0
    for _ in range(points):
        d = int(rng.integers(2, 9))
        k = int(rng.integers(1, 6))
        phi, pos = rng.normal(size=d), rng.normal(size=d)
        negs = [rng.normal(size=d) for _ in range(k)]
        g_phi, g_pos, g_negs = sgns_grad(phi, pos, negs)
        analytic = np.concatenate([g_phi, g_pos, *g_negs])
        x = np.concatenate([phi, pos, *negs])

        def f(v):
            return sgns_loss(v[:d], v[d:2 * d], [v[(2 + i) * d:(3 + i) * d] for i in range(k)])

        numeric = np.empty_like(x)
        for i in range(len(x)):
            e = np.zeros_like(x)
            e[i] = h
            numeric[i] = (f(x + e) - f(x - e)) / (2 * h)
        worst = max(worst, np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12))
    return worst


def test_gradient_matches_finite_differences():
    assert _finite_difference_errors(np.random.default_rng(0)) < 1e-4


def test_kernel_step_matches_reference_gradient():
    rng = np.random.default_rng(3)
    d, lr = 6, 0.05
    phi = rng.normal(size=(3, d))
    theta = rng.normal(size=(3, d))
    before_phi, before_theta = phi.copy(), theta.copy()
    cum = np.array([0.0, 0.0, 1.0])  # every negative is node 2
    src = np.array([0], dtype=np.int32)
    ctx = np.array([1], dtype=np.int32)
    loss = _ns_range(phi, theta, src, ctx, 0, 1, cum, 2, lr, 1e-4, 0, 1e9, 7)
    # negatives update theta in turn, so the second draw sees the first update
    t2 = [before_theta[2].copy()]
    for _ in range(2):
        t2.append(t2[-1] - lr * _sigmoid(before_phi[0] @ t2[-1]) * before_phi[0])
    negs = t2[:2]
    assert loss == pytest.approx(sgns_loss(before_phi[0], before_theta[1], negs), rel=1e-12)
    g_phi, g_pos, _ = sgns_grad(before_phi[0], before_theta[1], negs)
    np.testing.assert_allclose(phi[0], before_phi[0] - lr * g_phi, atol=1e-12)
    np.testing.assert_allclose(theta[1], before_theta[1] - lr * g_pos, atol=1e-12)
    np.testing.assert_allclose(theta[2], t2[2], atol=1e-12)


# -- negative sampler ------------------------------------------------------------


def test_negative_sampler_distribution():
    s = NegativeSampler([1, 16, 81])
    expected = np.array([1, 8, 27]) / 36
    np.testing.assert_allclose(s.probs, expected)
    assert s.cum[-1] == 1.0
    draws = s.sample(np.random.default_rng(0), 200_000)
    np.testing.assert_allclose(np.bincount(draws, minlength=3) / 2e5, expected, atol=0.005)
    with pytest.raises(ValueError):
        NegativeSampler([1, 0])


def test_negative_sampler_covers_isolated_nodes():
    g = Graph.from_edges(4, [0], [1], directed=True)
    assert np.all(NegativeSampler.from_graph(g).probs > 0)


# -- training ------------------------------------------------------------------


def _deepwalk(g, seed, dim=16, epochs=1, objective="negative-sampling"):
    stream = uniform_walk_pairs(g, WalkConfig(walks_per_node=20, walk_length=20, window=3, seed=seed))
    return train(stream, g, TrainConfig(dim=dim, epochs=epochs, objective=objective, seed=seed))


@pytest.mark.parametrize("objective", ["negative-sampling", "hierarchical-softmax"])
def test_cliques_separate(objective):
    g = two_cliques(4)
    same = np.equal.outer(np.arange(8) // 4, np.arange(8) // 4) & ~np.eye(8, dtype=bool)
    diff = ~np.equal.outer(np.arange(8) // 4, np.arange(8) // 4)
    for seed in range(5):
        e = _deepwalk(g, seed, objective=objective)
        gram = e.phi @ e.phi.T
        assert gram[same].mean() > gram[diff].mean()


def test_zero_epochs_returns_initialization():
    g = two_cliques(4)
    stream = adjacency_pairs(g, 100)
    e = train(stream, g, TrainConfig(dim=10, epochs=0, seed=1))
    assert np.all(np.abs(e.phi) <= 0.5 / 10)
    assert np.all(e.theta == 0.0)
    assert e.losses == []


def test_training_is_bitwise_deterministic():
    g = erdos_renyi(12, 0.3, seed=2)
    a = _deepwalk(g, 4, epochs=2)
    b = _deepwalk(g, 4, epochs=2)
    assert np.array_equal(a.phi, b.phi) and np.array_equal(a.theta, b.theta)
    assert a.losses == b.losses


def test_loss_decreases_over_epochs():
    wins = 0
    for seed in range(5):
        g = erdos_renyi(15, 0.3, seed=seed)
        stream = uniform_walk_pairs(g, WalkConfig(walks_per_node=5, walk_length=20, window=3, seed=seed))
        e = train(stream, g, TrainConfig(dim=16, epochs=5, seed=seed))
        wins += e.losses[4] < e.losses[0]
    assert wins >= 3


def test_shared_mode_has_no_context_matrix():
    g = two_cliques(4)
    e = train(adjacency_pairs(g, 5000), g, TrainConfig(dim=8, shared=True))
    assert e.theta is None
    with pytest.raises(ValueError):
        score_pair(e, 0, 1, SOURCE_CONTEXT)


def test_async_mode_trains():
    g = erdos_renyi(30, 0.2, seed=1)
    e = train(adjacency_pairs(g, 50_000), g, TrainConfig(dim=8, threads=2))
    assert np.all(np.isfinite(e.phi)) and np.all(np.isfinite(e.theta))


def test_non_finite_rows_abort_with_diagnostics():
    m = np.zeros((3, 2))
    m[1, 0] = np.nan
    with pytest.raises(TrainingError, match="row 1.*learning rate 0.01.*step 42"):
        _check_finite(m, 0.01, 42)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(negatives=0)
    with pytest.raises(ValueError):
        TrainConfig(objective="hierarchical-softmax", shared=True)
    with pytest.raises(ValueError):
        train(ArrayPairStream([], [], 2), two_cliques(1), TrainConfig())


# -- hierarchical softmax ----------------------------------------------------------


def test_two_leaf_tree():
    tree = build_huffman([1, 1])
    assert tree.internal_count == 1
    psi = np.array([[0.3, -0.2]])
    phi = np.array([1.0, 2.0])
    p = hs_leaf_probabilities(tree, phi, psi)
    x = phi @ psi[0]
    assert sorted(p) == pytest.approx(sorted([_sigmoid(x), _sigmoid(-x)]))
    assert p.sum() == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=50)
@given(st.lists(st.integers(1, 50), min_size=2, max_size=40), st.integers(0, 2**32 - 1))
def test_leaf_probabilities_normalize(counts, seed):
    tree = build_huffman(counts)
    rng = np.random.default_rng(seed)
    psi = rng.normal(scale=2.0, size=(tree.internal_count, 5))
    p = hs_leaf_probabilities(tree, rng.normal(size=5), psi)
    assert abs(p.sum() - 1.0) < 1e-12


@given(st.lists(st.integers(1, 100), min_size=2, max_size=60))
def test_huffman_codes_shorter_for_frequent_nodes(counts):
    tree = build_huffman(counts)
    order = np.argsort(-np.asarray(counts), kind="stable")
    lengths = tree.code_len[order]
    c = np.asarray(counts)[order]
    for i in range(len(c) - 1):
        if c[i] > c[i + 1]:
            assert lengths[i] <= lengths[i + 1]
    assert sum(2.0 ** -tree.code_len) == pytest.approx(1.0)


# -- scoring and output ------------------------------------------------------------


def test_score_examples():
    e = EmbeddingSet(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[0.0, 2.0], [0.0, 0.0]]))
    assert score_pair(e, 0, 1) == 0.5
    assert score_pair(e, 0, 1, SOURCE_CONTEXT) == pytest.approx(0.5)
    assert score_pair(e, 1, 0, SOURCE_CONTEXT) == pytest.approx(_sigmoid(2.0))
    with pytest.raises(ValueError):
        score_pairs(e, [0], [1], "context-context")


@given(st.integers(0, 10_000))
def test_source_source_scores_symmetric(seed):
    rng = np.random.default_rng(seed)
    e = EmbeddingSet(rng.normal(size=(6, 3)))
    u, v = rng.integers(0, 6, 20), rng.integers(0, 6, 20)
    assert np.array_equal(score_pairs(e, u, v), score_pairs(e, v, u))


def test_source_context_scores_directional_after_training():
    g = layered_dag((10, 10, 10), groups=2, seed=0)
    e = train(adjacency_pairs(g, 100_000), g, TrainConfig(dim=8, seed=0))
    src, dst = g.edges()
    forward = score_pairs(e, src, dst, SOURCE_CONTEXT)
    backward = score_pairs(e, dst, src, SOURCE_CONTEXT)
    assert forward.mean() > backward.mean() + 0.2


def test_embedding_file_format(tmp_path):
    e = EmbeddingSet(np.array([[1.0, 1 / 3], [2e-7, -5.0]]), np.array([[0.5, 0.25], [0.0, 1.0]]), ["a", "b"])
    path = tmp_path / "e.txt"
    e.save(path)
    assert path.read_text() == "2 2\na 1 0.333333\nb 2e-07 -5\n"
    assert (tmp_path / "e.txt.ctx").exists()
    back = load_embedding(path)
    assert back.ids == ["a", "b"]
    np.testing.assert_allclose(back.phi, e.phi, rtol=1e-6)
    np.testing.assert_allclose(back.theta, e.theta)


def test_concat_normalized_halves():
    rng = np.random.default_rng(1)
    a = EmbeddingSet(rng.normal(size=(5, 3)))
    b = EmbeddingSet(rng.normal(size=(5, 4)))
    c = concat_normalized(a, b)
    assert c.dim == 7
    np.testing.assert_allclose(np.linalg.norm(c.phi[:, :3], axis=1), 1.0)
    np.testing.assert_allclose(np.linalg.norm(c.phi, axis=1), math.sqrt(2))
