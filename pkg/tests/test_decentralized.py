import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ambdg.decentralized import (
    CommMatrix,
    WorkerGraph,
    build_comm_matrix,
    consensus_phase,
    exact_weighted_mean,
    format_graph,
    lambda2,
    load_graph,
    min_consensus_rounds,
    node_dual_update,
    parse_graph,
    random_dual_instance,
    run_decentralized,
)
from ambdg.errors import ConfigError, NumericalError
from ambdg.hub import run_ambdg

from helpers import small_cfg


def dense_lambda2(q):
    return float(np.sort(np.linalg.eigvalsh(q))[-2])


def random_connected(n, p, seed):
    rng = np.random.default_rng(seed)
    edges = {(i, i + 1) for i in range(n - 1)}  # spanning path keeps it connected
    edges |= {(i, j) for i in range(n) for j in range(i + 1, n) if rng.uniform() < p}
    return WorkerGraph(n, frozenset(edges))


def test_graph_validation():
    with pytest.raises(ConfigError):
        WorkerGraph(3, frozenset({(0, 0)}))
    with pytest.raises(ConfigError):
        WorkerGraph(3, frozenset({(0, 3)}))
    assert WorkerGraph(3, frozenset({(2, 0)})).edges == {(0, 2)}
    assert not WorkerGraph(4, frozenset({(0, 1), (2, 3)})).is_connected()
    assert WorkerGraph.ring(5).is_connected()


def test_graph_file_round_trip(tmp_path):
    g = WorkerGraph.ring(6)
    p = tmp_path / "ring.txt"
    p.write_text(format_graph(g))
    assert load_graph(p) == g
    with pytest.raises(ConfigError, match="x:2"):
        parse_graph("3\n0 1 2\n", "x")
    with pytest.raises(ConfigError, match="out of range"):
        parse_graph("2\n0 5\n")


def test_two_node_path_matrix():
    q = build_comm_matrix(WorkerGraph.path(2)).q
    np.testing.assert_array_equal(q, [[0.75, 0.25], [0.25, 0.75]])


def test_disconnected_rejected():
    with pytest.raises(ConfigError, match="not connected"):
        build_comm_matrix(WorkerGraph(4, frozenset({(0, 1), (2, 3)})))


def test_comm_matrix_validation():
    with pytest.raises(ConfigError, match="doubly"):
        CommMatrix(np.array([[0.5, 0.6], [0.5, 0.4]]))
    with pytest.raises(ConfigError, match="semi-definite"):
        CommMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ConfigError, match="non-edge"):
        CommMatrix(np.full((3, 3), 1 / 3), WorkerGraph.path(3))


@given(st.integers(2, 14), st.floats(0, 1), st.integers(0, 10**6))
def test_comm_matrix_invariants(n, p, seed):
    g = random_connected(n, p, seed)
    cm = build_comm_matrix(g)
    assert np.all(np.abs(cm.q.sum(axis=0) - 1) <= 1e-12)
    assert np.all(np.abs(cm.q.sum(axis=1) - 1) <= 1e-12)
    assert np.linalg.eigvalsh(cm.q).min() >= -1e-10
    for i in range(n):
        for j in range(n):
            if cm.q[i, j] > 0 and i != j:
                assert (min(i, j), max(i, j)) in g.edges


def test_complete_graph_rounds():
    g = WorkerGraph.complete(4)
    raw = build_comm_matrix(g, lazy=False)
    np.testing.assert_allclose(raw.q, np.full((4, 4), 0.25), atol=1e-15)
    x = np.random.default_rng(0).standard_normal((4, 3))
    out, _ = consensus_phase(x, np.ones(4), raw, 1)
    np.testing.assert_allclose(out, np.tile(x.mean(axis=0), (4, 1)), atol=1e-14)
    lazy = build_comm_matrix(g)
    out, _ = consensus_phase(x, np.ones(4), lazy, 1)
    np.testing.assert_allclose(out - x.mean(axis=0), (x - x.mean(axis=0)) / 2, atol=1e-14)
    assert lambda2(raw) == pytest.approx(0.0, abs=1e-10)
    assert lambda2(lazy) == pytest.approx(0.5, abs=1e-10)


def test_lambda2_single_node():
    assert lambda2(build_comm_matrix(WorkerGraph(1))) == 0.0


@pytest.mark.parametrize("g", [WorkerGraph.ring(8), WorkerGraph.ring(16), WorkerGraph.path(7), random_connected(12, 0.3, 5)])
def test_lambda2_matches_dense_solver(g):
    q = build_comm_matrix(g)
    assert lambda2(q) == pytest.approx(dense_lambda2(q.q), abs=1e-8)


def test_lambda2_nonconvergence_reported():
    q = build_comm_matrix(WorkerGraph.ring(30))
    with pytest.raises(NumericalError, match="did not converge"):
        lambda2(q, max_iter=3)


def test_min_rounds_examples():
    assert min_consensus_rounds(1, 0.0, 1.0, 0.0) == 1
    # 2 log(2 sqrt(10) 21) = 9.7779..., 40-digit evaluation
    assert min_consensus_rounds(10, 1.0, 0.1, 0.5) == 10
    assert min_consensus_rounds(16, 1.0, math.inf, 0.9) == math.ceil(math.log(8) / 0.1)
    with pytest.raises(ConfigError):
        min_consensus_rounds(4, 1.0, 0.1, 1.0)
    with pytest.raises(ConfigError):
        min_consensus_rounds(4, 1.0, 0.0, 0.5)


@given(st.integers(1, 100), st.floats(0, 10), st.floats(1e-4, 10), st.floats(0, 0.99))
def test_min_rounds_monotone(n, J, delta, lam):
    r = min_consensus_rounds(n, J, delta, lam)
    assert min_consensus_rounds(n + 1, J, delta, lam) >= r
    assert min_consensus_rounds(n, J, delta / 2, lam) >= r
    assert min_consensus_rounds(n, J, delta, min(lam + 0.005, 0.995)) >= r


def test_consensus_fixed_point():
    q = build_comm_matrix(WorkerGraph.ring(5))
    x = np.tile(np.arange(3.0), (5, 1))
    out, s = consensus_phase(x, np.full(5, 2.0), q, 17)
    np.testing.assert_allclose(out, x, atol=1e-14)
    np.testing.assert_allclose(s, 2.0, atol=1e-14)


def test_consensus_matches_matrix_power():
    rng = np.random.default_rng(6)
    q = build_comm_matrix(WorkerGraph.ring(6))
    x = rng.standard_normal((6, 4))
    out, _ = consensus_phase(x, np.ones(6), q, 50)
    np.testing.assert_allclose(out, np.linalg.matrix_power(q.q, 50) @ x, atol=1e-12)
    dev0 = np.linalg.norm(x - x.mean(axis=0))
    dev = np.linalg.norm(out - x.mean(axis=0))
    assert dev <= dense_lambda2(q.q) ** 50 * dev0 + 1e-12


@given(st.integers(2, 10), st.integers(1, 30), st.integers(0, 10**6))
def test_mass_conservation_and_contraction(n, r, seed):
    rng = np.random.default_rng(seed)
    q = build_comm_matrix(random_connected(n, 0.3, seed))
    x = rng.standard_normal((n, 3)) * 10
    s = rng.uniform(1, 100, n)
    out, so = consensus_phase(x, s, q, r)
    np.testing.assert_allclose(out.sum(axis=0), x.sum(axis=0), rtol=1e-9, atol=1e-9)
    assert so.sum() == pytest.approx(s.sum(), rel=1e-9)
    one, _ = consensus_phase(x, s, q, 1)
    spread = lambda m: max(np.linalg.norm(a - b) for a in m for b in m)
    assert spread(one) <= spread(x) + 1e-9
    lam = dense_lambda2(q.q)
    assert np.linalg.norm(out - x.mean(axis=0)) <= lam**r * np.linalg.norm(x - x.mean(axis=0)) + 1e-9


def test_consensus_dimension_mismatch():
    q = build_comm_matrix(WorkerGraph.ring(4))
    with pytest.raises(ConfigError):
        consensus_phase(np.zeros((3, 2)), np.ones(3), q, 1)
    with pytest.raises(ConfigError):
        consensus_phase(np.zeros((4, 2)), np.ones(4), q, 0)


def test_node_dual_update():
    with pytest.raises(NumericalError):
        node_dual_update(np.ones(2), 0.0)
    # two nodes with equal weights: the average of z + g
    zg = np.array([[1.0, 3.0], [3.0, -1.0]])
    b = np.array([5.0, 5.0])
    q = build_comm_matrix(WorkerGraph.path(2))
    mixed, s = consensus_phase(2 * b[:, None] * zg, 2 * b, q, 200)
    for i in range(2):
        np.testing.assert_allclose(node_dual_update(mixed[i], s[i]), zg.mean(axis=0), atol=1e-12)


def test_ratio_consensus_within_delta():
    rng = np.random.default_rng(4)
    n, d, J, delta = 4, 6, 1.0, 0.05
    q = build_comm_matrix(random_connected(n, 0.4, 4))
    r = min_consensus_rounds(n, J, delta, lambda2(q))
    z, g = random_dual_instance(n, d, J, delta, rng)
    b = rng.integers(40, 120, n).astype(float)
    target = exact_weighted_mean(z + g, b)
    mixed, s = consensus_phase(n * b[:, None] * (z + g), n * b, q, r)
    for i in range(n):
        assert np.linalg.norm(node_dual_update(mixed[i], s[i]) - target) <= delta


def test_exact_weighted_mean_bitwise_when_equal():
    v = np.array([0.1, 0.7, 1 / 3])
    out = exact_weighted_mean(np.tile(v, (5, 1)), np.arange(1.0, 6.0))
    assert np.array_equal(out, v)


def dcfg(**changes):
    base = dict(scheme="decentralized", n=4, graph="unused", t_round=1.0, r=10, horizon_updates=25)
    base.update(changes)
    return small_cfg(**base)


def test_single_node_is_serial_dual_averaging():
    cfg = dcfg(n=1, T_c=0.0, r=1, t_round=1e-9, L=2.0)
    dt = run_decentralized(cfg, graph=WorkerGraph(1))
    hub = run_ambdg(small_cfg(n=1, T_c=0.0, L=2.0, horizon_updates=25))
    assert [r.error_rate for r in dt.nodes[0].records] == [r.error_rate for r in hub.records]


@pytest.mark.parametrize("t_round", [0.25, 1.0])
def test_exact_consensus_matches_hub_bitwise(t_round):
    g = WorkerGraph.ring(4)
    cfg = dcfg(r=10, t_round=t_round, consensus="exact")
    dt = run_decentralized(cfg, graph=g, keep_params=True)
    hub = run_ambdg(small_cfg(T_c=10 * t_round, horizon_updates=25), keep_params=True)
    for tr in dt.nodes:
        for a, b in zip(tr.params, hub.params):
            assert np.array_equal(a, b)
    assert [r.staleness for r in dt.nodes[0].records] == [r.staleness for r in hub.records]


def test_staleness_and_timing():
    dt = run_decentralized(dcfg(r=10, t_round=1.0), graph=WorkerGraph.ring(4))
    assert dt.tau == 4
    recs = dt.nodes[0].records
    assert [r.staleness for r in recs[:6]] == [0, 1, 2, 3, 4, 4]
    assert recs[0].wall_clock == pytest.approx(2.5 + 10.0)


def test_gossip_close_to_hub_with_many_rounds():
    g = WorkerGraph.ring(4)
    lam = lambda2(build_comm_matrix(g))
    r = 10 * min_consensus_rounds(4, 1.0, 0.1, lam)
    dt = run_decentralized(dcfg(r=r, t_round=10.0 / r), graph=g)
    hub = run_ambdg(small_cfg(horizon_updates=25))
    he = np.array([r.error_rate for r in hub.records])
    for tr in dt.nodes:
        ne = np.array([r.error_rate for r in tr.records])
        assert np.max(np.abs(ne / he - 1)) <= 0.01


@pytest.mark.parametrize("T_c", [2.5, 10.0])
def test_delta_emp_within_delta_when_J_bounds_gradients(T_c):
    g = WorkerGraph.ring(4)
    lam = lambda2(build_comm_matrix(g))
    probe = run_decentralized(dcfg(consensus="exact", r=1, t_round=T_c), graph=g)
    J = max(probe.grad_norm_max)
    for delta in (0.1, 0.01):
        r = min_consensus_rounds(4, J, delta, lam)
        dt = run_decentralized(dcfg(r=r, t_round=T_c / r), graph=g)
        assert max(dt.delta_emp) <= delta


def test_graph_size_mismatch():
    with pytest.raises(ConfigError, match="nodes"):
        run_decentralized(dcfg(), graph=WorkerGraph.ring(5))


def test_auto_rounds():
    g = WorkerGraph.ring(4)
    dt = run_decentralized(dcfg(r=None, t_round=0.1), graph=g)
    assert dt.r == min_consensus_rounds(4, 1.0, 0.1, lambda2(build_comm_matrix(g)))
