import json
import math

import numpy as np
import pytest

from tgxplain.errors import ShapeError
from tgxplain.graph import TemporalGraph, normalize_adjacency
from tgxplain.model import (
    EmbeddedOracle,
    ModelWeights,
    forward_full,
    hidden_state,
    load_weights,
    predict_with_hidden,
    predict_with_hidden_batch,
    save_weights,
    step,
    synth_model,
    weights_from_document,
    weights_to_document,
)


def fused_reference(w: ModelWeights, A, x_seq):
    """Independent single-pass rollout in plain Python loops.

    Shares no code with the package forward path; used to pin its values.
    """
    h_dim = w.hidden_dim
    f = w.feature_dim
    n = len(A)
    wu, wr, wc = w.w_u.tolist(), w.w_r.tolist(), w.w_c.tolist()
    bu, br, bc = w.b_u.tolist(), w.b_r.tolist(), w.b_c.tolist()
    wo, bo = w.w_o.tolist(), w.b_o
    H = [[0.0] * h_dim for _ in range(n)]
    for t in range(len(x_seq)):
        z = [
            [sum(A[i][j] * x_seq[t][j][k] for j in range(n)) for k in range(f)]
            for i in range(n)
        ]
        new_h = [[0.0] * h_dim for _ in range(n)]
        for i in range(n):
            zh = z[i] + H[i]
            u = [
                1.0 / (1.0 + math.exp(-(sum(zh[k] * wu[k][m] for k in range(f + h_dim)) + bu[m])))
                for m in range(h_dim)
            ]
            r = [
                1.0 / (1.0 + math.exp(-(sum(zh[k] * wr[k][m] for k in range(f + h_dim)) + br[m])))
                for m in range(h_dim)
            ]
            zrh = z[i] + [r[m] * H[i][m] for m in range(h_dim)]
            c = [
                math.tanh(sum(zrh[k] * wc[k][m] for k in range(f + h_dim)) + bc[m])
                for m in range(h_dim)
            ]
            for m in range(h_dim):
                new_h[i][m] = u[m] * H[i][m] + (1.0 - u[m]) * c[m]
        H = new_h
    y = [sum(H[i][m] * wo[m] for m in range(h_dim)) + bo for i in range(n)]
    return np.array(y)


def zero_weights(n, f, h, window=3):
    fh = f + h
    return ModelWeights(
        w_u=np.zeros((fh, h)),
        w_r=np.zeros((fh, h)),
        w_c=np.zeros((fh, h)),
        b_u=np.zeros(h),
        b_r=np.zeros(h),
        b_c=np.zeros(h),
        w_o=np.zeros(h),
        b_o=0.0,
        n_nodes=n,
        window=window,
    )


def grid_graph(n=4, T=3):
    adj = np.array(
        [[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]], dtype=float
    )[:n, :n]
    return TemporalGraph(adjacency=adj, features=np.zeros((T, n, 1)))


class TestStep:
    def test_zero_weights_zero_fixed_point(self):
        w = zero_weights(3, 1, 4)
        g = TemporalGraph(adjacency=np.zeros((3, 3)), features=np.zeros((3, 3, 1)))
        a = normalize_adjacency(g)
        h_next = step(w, a, np.ones((3, 1)), np.zeros((3, 4)))
        # u = sigmoid(0) = 1/2, c = tanh(0) = 0, h' = (1 - u) * 0 = 0
        assert np.array_equal(h_next, np.zeros((3, 4)))

    def test_scalar_gate_hand_value(self):
        # one node, one hidden unit, only the update-gate bias nonzero:
        # c = tanh(0) = 0 so h' = sigmoid(b_u) * h
        b_u = 0.7
        w = ModelWeights(
            w_u=np.zeros((2, 1)),
            w_r=np.zeros((2, 1)),
            w_c=np.zeros((2, 1)),
            b_u=np.array([b_u]),
            b_r=np.zeros(1),
            b_c=np.zeros(1),
            w_o=np.zeros(1),
            b_o=0.0,
            n_nodes=1,
            window=2,
        )
        g = TemporalGraph(adjacency=np.zeros((1, 1)), features=np.zeros((2, 1, 1)))
        a = normalize_adjacency(g)
        h_prev = np.array([[0.3]])
        h_next = step(w, a, np.array([[2.0]]), h_prev)
        u = 1.0 / (1.0 + math.exp(-b_u))
        assert abs(h_next[0, 0] - u * 0.3) < 1e-15

    def test_hidden_range_after_steps(self):
        rng = np.random.default_rng(3)
        g = grid_graph()
        a = normalize_adjacency(g)
        w = synth_model(4, 1, 5, seed=3)
        h = np.zeros((4, 5))
        for _ in range(1000):
            x = rng.normal(0, 2, size=(4, 1))
            h = step(w, a, x, h)
            assert np.all(h > -1) and np.all(h < 1)

    def test_shape_errors(self):
        w = zero_weights(3, 1, 4)
        g = TemporalGraph(adjacency=np.zeros((3, 3)), features=np.zeros((3, 3, 1)))
        a = normalize_adjacency(g)
        with pytest.raises(ShapeError):
            step(w, a, np.ones((2, 1)), np.zeros((3, 4)))
        with pytest.raises(ShapeError):
            step(w, a, np.ones((3, 1)), np.zeros((3, 5)))

    def test_gate_ranges(self):
        # recompute the gates the way step() defines them and probe ranges
        rng = np.random.default_rng(9)
        w = synth_model(4, 1, 5, seed=9)
        g = grid_graph()
        a = normalize_adjacency(g)
        for _ in range(50):
            x = rng.normal(0, 3, size=(4, 1))
            h = rng.uniform(-0.99, 0.99, size=(4, 5))
            z = a.matrix @ x
            zh = np.concatenate([z, h], axis=1)
            u = 1 / (1 + np.exp(-(zh @ w.w_u + w.b_u)))
            r = 1 / (1 + np.exp(-(zh @ w.w_r + w.b_r)))
            c = np.tanh(np.concatenate([z, r * h], axis=1) @ w.w_c + w.b_c)
            assert np.all((u > 0) & (u < 1))
            assert np.all((r > 0) & (r < 1))
            assert np.all((c > -1) & (c < 1))


class TestForward:
    def test_window_of_one(self):
        w = synth_model(4, 1, 3, seed=2, window=1)
        g = grid_graph(T=1)
        a = normalize_adjacency(g)
        x_seq = np.ones((1, 4, 1))
        y, h = forward_full(w, a, x_seq)
        assert np.array_equal(h, np.zeros((4, 3)))
        assert np.array_equal(y, predict_with_hidden(w, a, x_seq[0], np.zeros((4, 3))))

    def test_definitional_decomposition(self):
        w = synth_model(4, 1, 3, seed=4, window=3)
        g = grid_graph()
        a = normalize_adjacency(g)
        rng = np.random.default_rng(0)
        x_seq = rng.normal(0, 1, size=(3, 4, 1))
        y, h = forward_full(w, a, x_seq)
        assert np.array_equal(h, hidden_state(w, a, x_seq))
        assert np.array_equal(y, predict_with_hidden(w, a, x_seq[-1], h))

    def test_against_independent_fused_reference(self):
        rng = np.random.default_rng(42)
        for trial in range(100):
            n = int(rng.integers(1, 7))
            T = int(rng.integers(1, 5))
            h_dim = int(rng.integers(1, 5))
            adj = (rng.random((n, n)) < 0.4).astype(float)
            adj = np.maximum(adj, adj.T)
            np.fill_diagonal(adj, 0.0)
            g = TemporalGraph(adjacency=adj, features=np.zeros((T, n, 1)))
            a = normalize_adjacency(g)
            w = synth_model(n, 1, h_dim, seed=trial, window=T)
            x_seq = rng.normal(0, 1.5, size=(T, n, 1))
            y, _ = forward_full(w, a, x_seq)
            y_ref = fused_reference(w, a.matrix.tolist(), x_seq.tolist())
            assert np.max(np.abs(y - y_ref)) <= 1e-12

    def test_golden_vector_seed_11(self):
        # pinned by the plain-loop reference at first correct run
        w = synth_model(4, 1, 3, seed=11, window=3)
        g = grid_graph()
        a = normalize_adjacency(g)
        x_seq = (np.arange(12, dtype=float).reshape(3, 4, 1) / 10.0) - 0.5
        y, _ = forward_full(w, a, x_seq)
        golden = np.array(
            [
                -0.49038253395614406,
                -0.49171471909576336,
                -0.48770513936819276,
                -0.48904599914196417,
            ]
        )
        assert np.max(np.abs(y - golden)) < 1e-14


class TestPredictWithHidden:
    def test_zero_weights_constant_output(self):
        w = zero_weights(4, 1, 3)
        w2 = ModelWeights(
            w_u=w.w_u, w_r=w.w_r, w_c=w.w_c, b_u=w.b_u, b_r=w.b_r, b_c=w.b_c,
            w_o=w.w_o, b_o=2.5, n_nodes=4, window=3,
        )
        g = grid_graph()
        a = normalize_adjacency(g)
        y = predict_with_hidden(w2, a, np.ones((4, 1)), np.zeros((4, 3)))
        assert np.allclose(y, 2.5, atol=0)

    def test_output_head_linearity(self):
        w = synth_model(4, 1, 3, seed=6)
        doubled = ModelWeights(
            w_u=w.w_u, w_r=w.w_r, w_c=w.w_c, b_u=w.b_u, b_r=w.b_r, b_c=w.b_c,
            w_o=2 * np.asarray(w.w_o), b_o=w.b_o, n_nodes=4, window=w.window,
        )
        g = grid_graph()
        a = normalize_adjacency(g)
        rng = np.random.default_rng(1)
        x = rng.normal(size=(4, 1))
        h = rng.uniform(-0.5, 0.5, size=(4, 3))
        y1 = predict_with_hidden(w, a, x, h)
        y2 = predict_with_hidden(doubled, a, x, h)
        assert np.allclose(y2 - w.b_o, 2 * (y1 - w.b_o), atol=1e-14)

    def test_hidden_argument_not_mutated(self):
        w = synth_model(4, 1, 3, seed=8)
        g = grid_graph()
        a = normalize_adjacency(g)
        h = np.random.default_rng(2).uniform(-0.5, 0.5, size=(4, 3))
        before = h.copy()
        predict_with_hidden(w, a, np.ones((4, 1)), h)
        assert np.array_equal(h, before)

    def test_batch_equals_loop(self):
        w = synth_model(4, 1, 3, seed=12)
        g = grid_graph()
        a = normalize_adjacency(g)
        rng = np.random.default_rng(3)
        xb = rng.normal(size=(20, 4, 1))
        h = rng.uniform(-0.5, 0.5, size=(4, 3))
        batch = predict_with_hidden_batch(w, a, xb, h)
        loop = np.stack([predict_with_hidden(w, a, x, h) for x in xb])
        assert np.max(np.abs(batch - loop)) < 1e-14


class TestSynthModel:
    def test_same_seed_identical(self):
        a = synth_model(5, 1, 4, seed=0)
        b = synth_model(5, 1, 4, seed=0)
        for name in ("w_u", "w_r", "w_c", "b_u", "b_r", "b_c", "w_o"):
            assert np.array_equal(getattr(a, name), getattr(b, name))
        assert a.b_o == b.b_o

    def test_different_seeds_differ(self):
        a = synth_model(5, 1, 4, seed=0)
        b = synth_model(5, 1, 4, seed=1)
        assert not np.array_equal(a.w_u, b.w_u)

    def test_shapes_and_bounds(self):
        w = synth_model(6, 2, 5, seed=3)
        assert w.feature_dim == 2 and w.hidden_dim == 5
        assert w.w_u.shape == (7, 5) and w.w_o.shape == (5,)
        for name in ("w_u", "w_r", "w_c", "b_u", "b_r", "b_c", "w_o"):
            arr = getattr(w, name)
            assert np.all(arr >= -0.5) and np.all(arr <= 0.5)


class TestWeightsDocument:
    def test_round_trip_bit_exact(self, tmp_path):
        w = synth_model(5, 1, 4, seed=13, window=6, model_name="roundtrip")
        path = tmp_path / "w.json"
        save_weights(w, path)
        w2 = load_weights(path)
        for name in ("w_u", "w_r", "w_c", "b_u", "b_r", "b_c", "w_o"):
            assert np.array_equal(getattr(w, name), getattr(w2, name))
        assert w2.b_o == w.b_o
        assert (w2.n_nodes, w2.window, w2.model_name) == (5, 6, "roundtrip")

    def test_version_gate(self):
        doc = weights_to_document(synth_model(3, 1, 2, seed=0))
        doc["format_version"] = 99
        with pytest.raises(ValueError):
            weights_from_document(doc)

    def test_declared_shape_checked(self, tmp_path):
        w = synth_model(3, 1, 2, seed=0)
        doc = weights_to_document(w)
        doc["arrays"]["w_u"]["shape"] = [1, 1]
        path = tmp_path / "w.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ShapeError):
            load_weights(path)


class TestEmbeddedOracle:
    def test_metadata(self, small_graph, small_oracle):
        assert small_oracle.n_nodes == small_graph.n_nodes
        assert small_oracle.feature_dim == 1
        assert small_oracle.window == 3

    def test_pure(self, small_graph, small_oracle):
        x_seq = small_graph.features[0:3]
        h1 = small_oracle.hidden_state(x_seq)
        h2 = small_oracle.hidden_state(x_seq)
        assert np.array_equal(h1, h2)

    def test_node_count_checked(self, small_graph):
        w = synth_model(5, 1, 4, seed=3)
        with pytest.raises(ShapeError):
            EmbeddedOracle(w, normalize_adjacency(small_graph))
