import json

import numpy as np
import pytest

from conftest import random_dag, random_evaluable_dag

from nqsent.activations import Activation
from nqsent.core import RngStream, SpinConfig
from nqsent.errors import ContractError, CycleError
from nqsent.graph import (
    ComputationGraph,
    Node,
    eval_full,
    eval_reduced,
    feature_reduce,
    from_json,
    to_json,
    validate_and_sort,
)
from nqsent.ansatz import MlpSpec, SnnqsSpec, build_mlp, build_snnqs


def chain_graph():
    return ComputationGraph(
        [
            Node(0, "input", ((("s", 0), 1.0),)),
            Node(1, "nonlinear", (((0), 1.0),), activation=Activation("tanh")),
            Node(2, "output", ((1, 1.0),), output_mode="amplitude"),
        ],
        n=1,
    )


def test_toposort_chain():
    g = chain_graph()
    assert validate_and_sort(g) == [0, 1, 2]


def test_toposort_4in_4hidden_example():
    # 4 inputs feed 2 first-level neurons, those feed 2 more, then the output
    tanh = Activation("tanh")
    nodes = [Node(i, "input", ((("s", i), 1.0),)) for i in range(4)]
    nodes += [
        Node(4, "nonlinear", ((0, 0.5), (1, 0.5), (2, 0.5), (3, 0.5)), activation=tanh),
        Node(5, "nonlinear", ((0, 0.3), (1, 0.3), (3, 0.3)), activation=tanh),
        Node(6, "nonlinear", ((4, 1.0), (5, -1.0)), activation=tanh),
        Node(7, "nonlinear", ((5, 0.7),), activation=tanh),
        Node(8, "output", ((6, 1.0), (7, 1.0)), output_mode="amplitude"),
    ]
    g = ComputationGraph(nodes, n=4)
    order = validate_and_sort(g)
    pos = {nid: i for i, nid in enumerate(order)}
    for inp in range(4):
        for hid in (4, 5, 6, 7):
            assert pos[inp] < pos[hid]
    for hid in (4, 5, 6, 7):
        assert pos[hid] < pos[8]


def test_cycle_detected_and_named():
    tanh = Activation("tanh")
    nodes = [
        Node(0, "nonlinear", ((1, 1.0), (("s", 0), 1.0)), activation=tanh),
        Node(1, "nonlinear", ((0, 1.0),), activation=tanh),
        Node(2, "output", ((0, 1.0),), output_mode="amplitude"),
    ]
    with pytest.raises(CycleError) as err:
        ComputationGraph(nodes, n=1)
    assert set(err.value.cycle) >= {0, 1}


def test_self_loop_cycle():
    nodes = [
        Node(0, "nonlinear", ((0, 0.5),), activation=Activation("tanh")),
        Node(1, "output", ((0, 1.0),), output_mode="amplitude"),
    ]
    with pytest.raises(CycleError):
        ComputationGraph(nodes, n=1)


def test_eval_linear_direct():
    g = ComputationGraph(
        [Node(0, "output", ((("s", 0), 1.0), (("s", 1), 1.0)), output_mode="amplitude")], n=2
    )
    assert eval_full(g, SpinConfig(0b11, 2)) == 2.0
    assert eval_full(g, SpinConfig(0b00, 2)) == -2.0


def test_eval_dicke_graph_is_indicator():
    from nqsent.ansatz import DickeSpec, build_dicke

    g = build_dicke(DickeSpec(4))
    for bits in range(16):
        s = SpinConfig(bits, 4)
        expect = 1.0 if bin(bits).count("1") == 2 else 0.0
        assert eval_full(g, s) == expect


def test_eval_identity_activation_equals_affine():
    gen = np.random.default_rng(0)
    w = gen.normal(size=4)
    b = float(gen.normal())
    g = ComputationGraph(
        [
            Node(0, "nonlinear", tuple((("s", i), w[i]) for i in range(4)), bias=b, activation=Activation("identity")),
            Node(1, "output", ((0, 1.0),), output_mode="amplitude"),
        ],
        n=4,
    )
    for bits in range(16):
        s = SpinConfig(bits, 4)
        expect = w @ s.values() + b
        assert eval_full(g, s) == pytest.approx(expect, rel=1e-14)


def test_feature_reduce_linear_net():
    g = ComputationGraph(
        [Node(0, "output", ((("s", 0), 0.5), (("s", 1), -1.5)), bias=0.25, output_mode="amplitude")], n=2
    )
    r = feature_reduce(g)
    assert r.mu == 1
    for bits in range(4):
        s = SpinConfig(bits, 2)
        assert eval_reduced(r, s) == pytest.approx(eval_full(g, s), rel=1e-13)


def test_feature_reduce_single_nonlinearity():
    g = build_snnqs(SnnqsSpec(n=6, activation="tanh", parameterization="direct"), RngStream(1).child(0))
    r = feature_reduce(g)
    assert r.mu == 1  # the output row is a pure constant and is folded


def test_feature_reduce_snnqs_wrap_exp_matches_composition():
    g = build_snnqs(SnnqsSpec(n=5, activation="sin", parameterization="wrap_exp"), RngStream(2).child(0))
    r = feature_reduce(g)
    assert r.mu == 1
    t = 0.37
    assert r.g_eval(np.array([t])) == pytest.approx(np.exp(np.sin(t)), rel=1e-13)


def test_feature_reduce_mlp_width3_depth2():
    g = build_mlp(MlpSpec(n=10, width=3, depth=2, layernorm=False), RngStream(7).child(0))
    r = feature_reduce(g)
    assert g.k == 6
    assert r.mu == 3  # second-layer pre-activations carry no direct spin part


def test_reduced_matches_full_exhaustive_mlp():
    g = build_mlp(MlpSpec(n=10, width=3, depth=2, layernorm=False), RngStream(8).child(1))
    r = feature_reduce(g)
    bits = np.arange(1 << 10)
    full = g.eval_bits(bits)
    red = r.eval_bits(bits)
    scale = np.abs(full).max()
    assert np.abs(full - red).max() <= 1e-12 * scale


def test_feature_reduce_idempotent():
    for seed in range(5):
        g = random_evaluable_dag(np.random.default_rng(seed), n=6, max_k=5)
        r = feature_reduce(g)
        r2 = feature_reduce(r.residual)
        assert r2.mu == r.mu


def test_mu_bounded_by_k_plus_one_randomized():
    gen = np.random.default_rng(99)
    for _ in range(50):
        g = random_dag(gen, n=int(gen.integers(2, 9)), max_k=8)
        r = feature_reduce(g)
        assert r.mu <= g.k + 1


def test_dead_node_elimination_preserves_eval():
    tanh = Activation("tanh")
    nodes = [
        Node(0, "nonlinear", ((("s", 0), 0.8), (("s", 1), -0.2)), activation=tanh),
        Node(1, "nonlinear", ((("s", 1), 0.5),), activation=tanh),  # dead: not co-reachable
        Node(2, "linear", ((1, 2.0),)),  # dead chain
        Node(3, "output", ((0, 1.0),), bias=0.1, output_mode="amplitude"),
    ]
    g = ComputationGraph(nodes, n=2)
    assert g.dead == {1, 2}
    assert g.k == 1  # live nonlinear count
    pruned = g.pruned()
    bits = np.arange(4)
    assert np.array_equal(g.eval_bits(bits), pruned.eval_bits(bits))


def test_constant_source_nodes_still_count():
    # a bias-only linear node feeding the output is co-reachable, not dead
    nodes = [
        Node(0, "linear", (), bias=2.5),
        Node(1, "output", ((0, 1.0), (("s", 0), 1.0)), output_mode="amplitude"),
    ]
    g = ComputationGraph(nodes, n=1)
    assert g.dead == set()
    assert eval_full(g, SpinConfig(1, 1)) == pytest.approx(3.5)


def test_json_roundtrip_preserves_eval():
    gen = np.random.default_rng(12)
    for _ in range(10):
        g = random_evaluable_dag(gen, n=5, max_k=6)
        doc = json.loads(json.dumps(to_json(g)))
        g2 = from_json(doc)
        bits = np.arange(32)
        assert np.array_equal(g.eval_bits(bits), g2.eval_bits(bits))
        assert g2.k == g.k


def test_json_raw_spin_reference_format():
    g = chain_graph()
    doc = to_json(g)
    assert doc["nodes"][0]["inputs"][0]["from"] == "s_1"
    assert from_json(doc).n == 1


def test_complex_weight_restrictions():
    tanh = Activation("tanh")
    with pytest.raises(ContractError):
        # complex weight on a non-output node
        ComputationGraph(
            [
                Node(0, "nonlinear", ((("s", 0), 1.0 + 1.0j),), activation=tanh),
                Node(1, "output", ((0, 1.0),), output_mode="amplitude"),
            ],
            n=1,
        )
    with pytest.raises(ContractError):
        # complex output weight on an edge with direct spin dependence
        ComputationGraph(
            [Node(0, "output", ((("s", 0), 1.0j),), output_mode="amplitude")], n=1
        )
    # complex output weight on a nonlinear-fed edge is fine
    g = ComputationGraph(
        [
            Node(0, "nonlinear", ((("s", 0), 1.0),), activation=tanh),
            Node(1, "output", ((0, 1.0j),), output_mode="amplitude"),
        ],
        n=1,
    )
    assert eval_full(g, SpinConfig(1, 1)) == pytest.approx(1j * np.tanh(1.0))


def test_output_uniqueness_enforced():
    with pytest.raises(ContractError):
        ComputationGraph([Node(0, "linear", ((("s", 0), 1.0),))], n=1)
    with pytest.raises(ContractError):
        ComputationGraph(
            [
                Node(0, "output", ((("s", 0), 1.0),), output_mode="amplitude"),
                Node(1, "output", ((("s", 0), 1.0),), output_mode="amplitude"),
            ],
            n=1,
        )


def test_eval_bits_thread_determinism():
    g = build_mlp(MlpSpec(n=8, width=4, depth=2), RngStream(5).child(3))
    bits = np.arange(256)
    a = g.eval_bits(bits, threads=1, chunk=32)
    b = g.eval_bits(bits, threads=4, chunk=32)
    assert np.array_equal(a, b)


def test_random_graphs_reduced_eval_matches():
    gen = np.random.default_rng(77)
    for _ in range(25):
        n = int(gen.integers(2, 8))
        g = random_evaluable_dag(gen, n=n, max_k=6)
        r = feature_reduce(g)
        bits = np.arange(1 << n)
        full = g.eval_bits(bits)
        red = r.eval_bits(bits)
        scale = max(np.abs(full).max(), 1e-300)
        assert np.abs(full - red).max() <= 1e-12 * scale
