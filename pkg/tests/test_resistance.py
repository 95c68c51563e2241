import importlib
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logfield.errors import DisconnectedGraph, ParseError, RankDeficiency, SingularSystem
from logfield.resistance import (Graph, complete_graph, gaussian_draws, gaussian_variance_mc,
                                 laplacian, metric_check, parse_edge_list, path_graph,
                                 pseudoinverse_G, random_connected_graph, read_edge_list,
                                 resistance, resistance_matrix, solve_resistances,
                                 variational_phi, variational_resistance)
from logfield.sampling import replica_rng

# the package re-exports the function `resistance`, which shadows the submodule
res = importlib.import_module("logfield.resistance")


def test_single_edge_laplacian_and_G():
    K = laplacian(Graph(2, [(0, 1, 1.0)]))
    np.testing.assert_array_equal(K, [[1, -1], [-1, 1]])
    G = pseudoinverse_G(K)
    np.testing.assert_allclose(G, [[0.25, -0.25], [-0.25, 0.25]], atol=1e-15)
    assert resistance(G, 0, 1) == pytest.approx(1.0, abs=1e-14)


def test_path_laplacian():
    K = laplacian(path_graph(3, 2.0))
    np.testing.assert_array_equal(K, [[2, -2, 0], [-2, 4, -2], [0, -2, 2]])


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2 ** 32 - 1), st.booleans())
def test_G_is_the_moore_penrose_inverse(n, seed, weighted):
    g = random_connected_graph(n, np.random.default_rng(seed), weighted=weighted)
    K = laplacian(g)
    G = pseudoinverse_G(K)
    np.testing.assert_allclose(G, np.linalg.pinv(K), atol=1e-10)
    np.testing.assert_allclose(G.sum(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(K @ G, np.eye(n) - 1 / n, atol=1e-10)


@pytest.mark.parametrize("weights", [[1.0, 1.0, 1.0], [0.5, 2.0, 4.0]])
def test_series_resistors_add(weights):
    g = Graph(4, [(i, i + 1, w) for i, w in enumerate(weights)])
    G = pseudoinverse_G(laplacian(g))
    assert resistance(G, 0, 3) == pytest.approx(sum(1 / w for w in weights), rel=1e-13)


def test_parallel_conductances_add():
    g = Graph(2, [(0, 1, 1.0), (0, 1, 3.0)])
    assert resistance(pseudoinverse_G(laplacian(g)), 0, 1) == pytest.approx(0.25, rel=1e-13)


@pytest.mark.parametrize("n", [3, 4, 7])
def test_complete_graph(n):
    R = resistance_matrix(pseudoinverse_G(laplacian(complete_graph(n))))
    off = R[~np.eye(n, dtype=bool)]
    np.testing.assert_allclose(off, 2 / n, rtol=1e-13)
    assert np.all(np.diag(R) == 0)


def test_path_is_colinear():
    R = solve_resistances(path_graph(4)).R_matrix
    assert R[0, 3] == pytest.approx(R[0, 1] + R[1, 2] + R[2, 3], abs=1e-13)
    report = metric_check(R)
    assert report.ok
    assert report.worst_slack_R == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 10), st.integers(0, 2 ** 32 - 1))
def test_resistance_and_its_root_are_metrics(n, seed):
    g = random_connected_graph(n, np.random.default_rng(seed), weighted=True)
    report = metric_check(solve_resistances(g).R_matrix)
    assert report.ok
    assert report.triples == n * (n - 1) * (n - 2)


def test_metric_check_detects_violations():
    R = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    report = metric_check(R)
    assert not report.ok
    assert report.violations_R > 0 and report.worst_slack_R == pytest.approx(-3.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 10), st.integers(0, 2 ** 32 - 1), st.floats(0.1, 10.0))
def test_rayleigh_monotonicity(n, seed, w):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(n, rng, p=0.2, weighted=True)
    i, j = (int(x) for x in rng.choice(n, 2, replace=False))
    before = resistance_matrix(pseudoinverse_G(laplacian(g)))
    after = resistance_matrix(pseudoinverse_G(laplacian(g.with_edge(i, j, w))))
    assert np.all(after <= before + 1e-12)
    assert after[i, j] < before[i, j]


def test_variational_route_agrees():
    g = random_connected_graph(9, np.random.default_rng(7), weighted=True)
    result = solve_resistances(g)
    assert result.diagnostics["max_variational_diff"] < 1e-12
    assert result.diagnostics["residual_KG"] < 1e-12
    assert result.diagnostics["residual_column_sums"] < 1e-12


def test_variational_potential_is_gauge_invariant():
    g = random_connected_graph(6, np.random.default_rng(3), weighted=True)
    phi = variational_phi(g, 1, 4)
    assert phi[1] - phi[4] == pytest.approx(1.0)
    assert phi.sum() == pytest.approx(0.0, abs=1e-12)
    # adding a constant changes neither the constraint nor the power
    assert res.power(g, phi + 3.7) == pytest.approx(res.power(g, phi), rel=1e-12)
    # Kirchhoff: the optimum carries no net current at interior nodes
    current = laplacian(g) @ phi
    interior = [v for v in range(6) if v not in (1, 4)]
    np.testing.assert_allclose(current[interior], 0.0, atol=1e-12)


def test_variational_rejects_equal_endpoints():
    with pytest.raises(ValueError):
        variational_resistance(path_graph(3), 1, 1)


def test_singular_lagrange_system(monkeypatch):
    def broken(K, k, l):
        n = K.shape[0]
        return np.zeros((n + 2, n + 2)), np.zeros(n + 2)

    monkeypatch.setattr(res, "_lagrange_system", broken)
    with pytest.raises(SingularSystem):
        variational_phi(path_graph(3), 0, 2)


def test_disconnected_graph():
    with pytest.raises(DisconnectedGraph):
        Graph(4, [(0, 1, 1.0), (2, 3, 1.0)])


def test_rank_deficient_laplacian():
    K = np.zeros((4, 4))
    K[:2, :2] = [[1, -1], [-1, 1]]
    K[2:, 2:] = [[1, -1], [-1, 1]]
    with pytest.raises(RankDeficiency):
        pseudoinverse_G(K)


@pytest.mark.parametrize("edges", [[(0, 0, 1.0)], [(0, 1, -1.0)], [(0, 5, 1.0)]])
def test_graph_validation(edges):
    with pytest.raises(ValueError):
        Graph(2, edges)


def test_gaussian_draws_are_zero_sum():
    phi = gaussian_draws(path_graph(5), 10, replica_rng(0))
    np.testing.assert_allclose(phi.sum(axis=1), 0.0, atol=1e-12)


def test_gaussian_covariance_is_G():
    g = random_connected_graph(5, np.random.default_rng(2), weighted=True)
    G = pseudoinverse_G(laplacian(g))
    n = 40000
    phi = gaussian_draws(g, n, replica_rng(21))
    emp = phi.T @ phi / n
    se = np.sqrt((G ** 2 + np.outer(np.diag(G), np.diag(G))) / n)
    assert np.max(np.abs(emp - G) / se) < 4.5


@pytest.mark.parametrize("g, k, l", [
    (complete_graph(4), 0, 2),
    (path_graph(5), 0, 4),
    (random_connected_graph(8, np.random.default_rng(4), weighted=True), 1, 6),
])
def test_mc_variance_matches_resistance(g, k, l):
    exact = resistance(pseudoinverse_G(laplacian(g)), k, l)
    mean, se = gaussian_variance_mc(g, k, l, 20000, replica_rng(99))
    assert abs(mean - exact) < 3 * se


def test_mc_needs_samples():
    with pytest.raises(ValueError):
        gaussian_variance_mc(path_graph(2), 0, 1, 10, replica_rng(0))


def test_parse_edge_list_comments_and_defaults():
    text = """# a triangle
    0 1
    1 2 2.5   # heavier

    0 2 0.5
    """
    g = parse_edge_list(text.splitlines())
    assert g.n == 3
    assert g.edges == ((0, 1, 1.0), (1, 2, 2.5), (0, 2, 0.5))


@pytest.mark.parametrize("text, lineno", [
    ("0 1\n0 x\n", 2),
    ("0 1\n\n1 2 3 4\n", 3),
    ("0 0\n", 1),
    ("# c\n0 1 -2\n", 2),
    ("0 -1\n", 1),
    ("0 1 nan\n", 1),
])
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(ParseError) as info:
        parse_edge_list(text.splitlines())
    assert info.value.lineno == lineno
    assert str(info.value).startswith(f"line {lineno}:")


def test_parse_empty_input():
    with pytest.raises(ParseError):
        parse_edge_list(["# nothing", ""])


def test_parse_disconnected_input():
    with pytest.raises(DisconnectedGraph):
        parse_edge_list(["0 1", "2 3"])


def test_read_edge_list(tmp_path):
    path = tmp_path / "k4.txt"
    path.write_text("\n".join(f"{i} {j}" for i, j in itertools.combinations(range(4), 2)))
    g = read_edge_list(path)
    assert resistance(pseudoinverse_G(laplacian(g)), 0, 3) == pytest.approx(0.5, rel=1e-13)
