import numpy as np
import pytest

from selfheal.errors import ConfigurationError, InputError, SchemaError
from selfheal.depgraph import (
    FailurePrediction,
    GnnParams,
    embedding_width,
    gnn_layer,
    init_embeddings,
    init_gnn,
    mttfp,
    predict_failures,
    prediction_rates,
    read_graph,
    train_gnn,
    write_graph,
)
from selfheal.depgraph.gnn import _forward_probs, edge_arrays
from selfheal.numerics import GradientTape, ParamSet, Tensor, bce_loss, finite_diff_grad, grad, tape
from selfheal.simulator import ComponentGraph, propagate_cascade
from selfheal.simulator.cascade import make_cascade_dataset, make_tree_graph


def chain3() -> ComponentGraph:
    nodes = [
        ("n0", "query", (0.5, 0.5)),
        ("n1", "table", (0.5, 0.5)),
        ("n2", "index", (0.5, 0.5)),
    ]
    return ComponentGraph(nodes, [("n0", "n1", 1.0), ("n1", "n2", 1.0)])


def flat_telemetry(graph, ticks=6, value=0.2):
    return {nid: np.full((ticks, 5), value) for nid in graph.node_ids}


class TestInitEmbeddings:
    def test_width_is_kinds_plus_static_plus_metrics(self):
        graph = chain3()
        emb = init_embeddings(graph, flat_telemetry(graph), tick=0)
        assert emb.width == 5 + 2 + 5
        assert embedding_width(graph) == 12

    def test_identical_nodes_get_identical_vectors(self):
        nodes = [("a", "table", (0.3, 0.7)), ("b", "table", (0.3, 0.7))]
        graph = ComponentGraph(nodes, [])
        emb = init_embeddings(graph, flat_telemetry(graph), tick=2)
        assert np.array_equal(emb.vector("a"), emb.vector("b"))

    def test_hand_assembled_concatenation(self):
        graph = ComponentGraph([("a", "index", (0.25, 0.75))], [])
        telemetry = {"a": np.tile([0.4, 0.5, 20.0, 100.0, 300.0], (8, 1))}
        emb = init_embeddings(graph, telemetry, tick=7)
        expected = np.array(
            [0, 0, 1, 0, 0, 0.25, 0.75, 0.4, 0.5, 0.2, 0.1, 0.3]
        )
        assert np.allclose(emb.vector("a"), expected, atol=1e-15)

    def test_missing_telemetry_rejected(self):
        graph = chain3()
        with pytest.raises(InputError, match="n2"):
            init_embeddings(graph, {"n0": np.zeros((4, 5)), "n1": np.zeros((4, 5))}, 0)


class TestGnnLayer:
    def test_zero_weights_give_activation_of_bias(self):
        graph = chain3()
        emb = init_embeddings(graph, flat_telemetry(graph), 0)
        b = np.array([0.3, -0.2])
        out = gnn_layer(graph, emb, (np.zeros((12, 2)), b, "relu"))
        expected = np.maximum(b, 0.0)
        for nid in graph.node_ids:
            assert np.array_equal(out.vector(nid), expected)

    def test_identity_on_isolated_node(self):
        graph = ComponentGraph([("a", "query", ())], [])
        emb_width = embedding_width(graph)
        telemetry = {"a": np.full((3, 5), 0.4)}
        emb = init_embeddings(graph, telemetry, 0)
        out = gnn_layer(graph, emb, (np.eye(emb_width), np.zeros(emb_width), "relu"))
        # h is nonnegative, so relu(I h + 0) == h
        assert np.array_equal(out.vector("a"), emb.vector("a"))

    def test_two_node_hand_computed_fixture(self):
        graph = ComponentGraph(
            [("a", "query", ()), ("b", "table", ())], [("a", "b", 0.9)]
        )
        from selfheal.depgraph.gnn import NodeEmbeddings

        h = NodeEmbeddings(0, ("a", "b"), np.array([[1.0, 2.0], [0.5, -1.0]]))
        w = np.array([[0.3, -0.2], [0.1, 0.4]])
        b = np.array([0.05, -0.05])
        out = gnn_layer(graph, h, (w, b, "relu"))
        # N(a) = {a}: relu([1,2] @ W + b); N(b) = {a,b}: relu([1.5,1] @ W + b)
        expected_a = np.maximum(np.array([1.0, 2.0]) @ w + b, 0.0)
        expected_b = np.maximum(np.array([1.5, 1.0]) @ w + b, 0.0)
        assert np.allclose(out.vector("a"), expected_a, atol=1e-12)
        assert np.allclose(out.vector("b"), expected_b, atol=1e-12)

    def test_permutation_equivariance_exact(self):
        nodes = [
            ("x", "query", (0.1, 0.2)),
            ("y", "table", (0.3, 0.4)),
            ("z", "disk", (0.5, 0.6)),
        ]
        edges = [("x", "y", 0.8), ("y", "z", 0.6), ("x", "z", 0.3)]
        g1 = ComponentGraph(nodes, edges)
        g2 = ComponentGraph([nodes[2], nodes[0], nodes[1]], edges)
        telemetry = {
            "x": np.full((2, 5), 0.2),
            "y": np.full((2, 5), 0.4),
            "z": np.full((2, 5), 0.6),
        }
        rng = np.random.default_rng(0)
        layer = (rng.normal(size=(12, 3)), rng.normal(size=3), "relu")
        out1 = gnn_layer(g1, init_embeddings(g1, telemetry, 0), layer)
        out2 = gnn_layer(g2, init_embeddings(g2, telemetry, 0), layer)
        for nid in ("x", "y", "z"):
            assert np.array_equal(out1.vector(nid), out2.vector(nid))

    def test_added_edge_only_changes_target(self):
        nodes = [
            ("x", "query", (0.1, 0.2)),
            ("y", "table", (0.3, 0.4)),
            ("z", "disk", (0.5, 0.6)),
        ]
        g1 = ComponentGraph(nodes, [("x", "y", 0.5)])
        g2 = ComponentGraph(nodes, [("x", "y", 0.5), ("x", "z", 0.5)])
        telemetry = {
            "x": np.full((2, 5), 0.2),
            "y": np.full((2, 5), 0.4),
            "z": np.full((2, 5), 0.6),
        }
        rng = np.random.default_rng(1)
        layer = (rng.normal(size=(12, 4)), rng.normal(size=4), "relu")
        out1 = gnn_layer(g1, init_embeddings(g1, telemetry, 0), layer)
        out2 = gnn_layer(g2, init_embeddings(g2, telemetry, 0), layer)
        assert np.array_equal(out1.vector("x"), out2.vector("x"))
        assert np.array_equal(out1.vector("y"), out2.vector("y"))
        assert not np.array_equal(out1.vector("z"), out2.vector("z"))

    def test_width_mismatch_rejected(self):
        graph = chain3()
        emb = init_embeddings(graph, flat_telemetry(graph), 0)
        with pytest.raises(ConfigurationError):
            gnn_layer(graph, emb, (np.zeros((7, 2)), np.zeros(2), "relu"))


class TestPredictFailures:
    def test_zero_readout_gives_half_probabilities(self):
        graph = chain3()
        gnn = init_gnn(graph, seed=0)
        zeroed = ParamSet(
            {
                k: (Tensor(np.zeros(v.shape)) if k.startswith("readout") else v)
                for k, v in gnn.params.items()
            }
        )
        gnn = GnnParams(gnn.input_width, gnn.hidden_widths, zeroed)
        pred = predict_failures(graph, flat_telemetry(graph), gnn, horizon=3)
        for prob, _tick in pred.per_node.values():
            assert prob == 0.5

    def test_unreachable_threshold_never_flags(self):
        graph = chain3()
        gnn = init_gnn(graph, seed=1)
        pred = predict_failures(
            graph, flat_telemetry(graph), gnn, horizon=4, flag_threshold=1.0
        )
        assert all(tick is None for _, tick in pred.per_node.values())


class TestTrainGnn:
    def test_zero_epochs_returns_initialization(self):
        traces = make_cascade_dataset(4, seed=5)
        result = train_gnn(traces, epochs=0, seed=9)
        assert result.gnn.params == init_gnn(
            traces[0].graph, seed=9, label_horizon=result.gnn.label_horizon
        ).params
        assert result.loss_curve == []

    def test_fixed_seed_reproducible(self):
        traces = make_cascade_dataset(6, seed=6)
        a = train_gnn(traces, epochs=10, seed=4)
        b = train_gnn(traces, epochs=10, seed=4)
        assert a.gnn.params == b.gnn.params
        assert a.loss_curve == b.loss_curve

    def test_loss_decreases(self):
        traces = make_cascade_dataset(20, seed=7)
        result = train_gnn(traces, epochs=60, seed=2)
        assert result.loss_curve[-1] <= result.loss_curve[0]

    def test_empty_dataset_rejected(self):
        with pytest.raises(InputError):
            train_gnn([], epochs=1, seed=0)

    def test_gradient_matches_finite_differences_on_chain(self):
        graph = chain3()
        gnn = init_gnn(graph, seed=11, hidden_widths=(4,))
        edges = edge_arrays(graph)
        h0 = init_embeddings(graph, flat_telemetry(graph), 0).vectors
        labels = np.array([[1.0], [0.0], [1.0]])

        def loss_fn(ps: ParamSet) -> float:
            arrays = {k: v.values for k, v in ps.items()}
            probs = _forward_probs(arrays, edges, h0, (4,))
            return float(tape.value_of(bce_loss(probs, labels)))

        recorder = GradientTape(gnn.params)
        probs = _forward_probs(recorder.leaves, edges, h0, (4,))
        reverse = grad(bce_loss(probs, labels), gnn.params)
        oracle = finite_diff_grad(loss_fn, gnn.params, 1e-4)
        for name in gnn.params:
            assert np.allclose(
                reverse[name].values, oracle[name].values, rtol=1e-5, atol=1e-8
            ), name

    def test_trained_model_flags_seed_before_deep_downstream(self):
        # chain deeper than the model's receptive field: the far node can only
        # be flagged once the failure wave degrades telemetry within two hops
        traces = make_cascade_dataset(60, seed=21)
        result = train_gnn(traces, epochs=150, lr=0.3, seed=8)
        nodes = [(f"n{i}", "table", (0.5, 0.5)) for i in range(5)]
        edges = [(f"n{i}", f"n{i + 1}", 1.0) for i in range(4)]
        trace = propagate_cascade(ComponentGraph(nodes, edges), "n0", onset=3,
                                  horizon=14, fail_threshold=0.5, seed=13)
        pred = predict_failures(
            trace.graph, trace.node_telemetry, result.gnn, horizon=trace.ticks
        )
        flags = {nid: tick for nid, (_, tick) in pred.per_node.items()}
        assert flags["n0"] is not None and flags["n4"] is not None
        assert flags["n0"] < flags["n4"]
        assert flags["n4"] < trace.failure_times["n4"]


class TestMttfp:
    def _prediction(self, flags):
        return FailurePrediction(
            horizon=10, per_node={n: (0.9, t) for n, t in flags.items()}
        )

    def _truth(self, failure_times):
        trace = propagate_cascade(chain3(), "n0", 0, 10, 0.5, seed=0)
        trace.failure_times = failure_times
        return trace

    def test_flags_at_failure_tick_do_not_qualify(self):
        truth = self._truth({"n0": 2, "n1": 3, "n2": 4})
        pred = self._prediction({"n0": 2, "n1": 3, "n2": 4})
        assert mttfp(pred, truth, 1.0) is None

    def test_uniformly_five_ticks_early(self):
        truth = self._truth({"n0": 7, "n1": 8, "n2": 9})
        pred = self._prediction({"n0": 2, "n1": 3, "n2": 4})
        assert mttfp(pred, truth, 1.0) == pytest.approx(5.0)

    def test_tick_seconds_scaling(self):
        truth = self._truth({"n0": 7, "n1": None, "n2": None})
        pred = self._prediction({"n0": 3, "n1": None, "n2": None})
        assert mttfp(pred, truth, 0.5) == pytest.approx(2.0)

    def test_nonnegative_when_defined(self):
        traces = make_cascade_dataset(10, seed=31)
        gnn = init_gnn(traces[0].graph, seed=0)
        for trace in traces:
            pred = predict_failures(trace.graph, trace.node_telemetry, gnn, trace.ticks)
            value = mttfp(pred, trace, 1.0)
            assert value is None or value > 0

    def test_graph_mismatch_rejected(self):
        truth = self._truth({"n0": 2, "n1": 3, "n2": 4})
        pred = FailurePrediction(horizon=5, per_node={"other": (0.5, None)})
        with pytest.raises(InputError):
            mttfp(pred, truth, 1.0)

    def test_rates(self):
        truth = self._truth({"n0": 2, "n1": None, "n2": None})
        pred = self._prediction({"n0": 1, "n1": 5, "n2": None})
        rates = prediction_rates(pred, truth)
        assert rates["false_alarm_rate"] == pytest.approx(0.5)
        assert rates["miss_rate"] == 0.0


class TestGraphIo:
    def test_roundtrip(self, tmp_path):
        graph = make_tree_graph(8, seed=3)
        path = tmp_path / "graph.json"
        write_graph(graph, path)
        assert read_graph(path) == graph

    def test_unknown_node_field_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            '{"nodes": [{"id": "a", "kind": "query", "static_features": [], '
            '"color": "red"}], "edges": []}'
        )
        with pytest.raises(SchemaError, match="color"):
            read_graph(path)

    def test_unknown_edge_field_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            '{"nodes": [{"id": "a", "kind": "query", "static_features": []}, '
            '{"id": "b", "kind": "disk", "static_features": []}], '
            '"edges": [{"from": "a", "to": "b", "weight": 0.5, "latency": 3}]}'
        )
        with pytest.raises(SchemaError, match="latency"):
            read_graph(path)

    def test_missing_section_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"nodes": []}')
        with pytest.raises(SchemaError, match="edges"):
            read_graph(path)
