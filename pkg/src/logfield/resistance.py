"""Effective resistance on weighted graphs.

Edges are conductances and each edge is counted once in the dissipated
power, ``P(phi) = sum_edges w (phi_i - phi_j)**2 = phi^T K phi``, so a
single unit resistor has resistance 1. Resistances are computed three ways:
from the constrained pseudoinverse G, from the constrained minimum of the
power, and as the variance of phi_k - phi_l under the Gaussian measure
exp(-phi^T K phi / 2) on zero-sum potentials.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedGraph, ParseError, RankDeficiency, SingularSystem

__all__ = [
    "Graph",
    "ResistanceResult",
    "MetricReport",
    "laplacian",
    "pseudoinverse_G",
    "resistance",
    "resistance_matrix",
    "variational_resistance",
    "gaussian_variance_mc",
    "metric_check",
    "solve_resistances",
    "parse_edge_list",
    "read_edge_list",
    "path_graph",
    "complete_graph",
    "random_connected_graph",
]


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a graph needs at least two nodes")
        edges = tuple((int(i), int(j), float(w)) for i, j, w in self.edges)
        for i, j, w in edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) outside 0..{self.n - 1}")
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not w > 0:
                raise ValueError(f"edge ({i}, {j}) has non-positive weight {w}")
        object.__setattr__(self, "edges", edges)
        if self.components() != 1:
            raise DisconnectedGraph(f"graph has {self.components()} components")

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            a[i, j] += w
            a[j, i] += w
        return a

    def components(self) -> int:
        return connected_components(self.adjacency() != 0, directed=False)[0]

    def with_edge(self, i: int, j: int, w: float = 1.0) -> "Graph":
        return Graph(self.n, self.edges + ((i, j, w),))


def path_graph(n: int, w: float = 1.0) -> Graph:
    return Graph(n, [(i, i + 1, w) for i in range(n - 1)])


def complete_graph(n: int, w: float = 1.0) -> Graph:
    return Graph(n, [(i, j, w) for i, j in itertools.combinations(range(n), 2)])


def random_connected_graph(n: int, rng: np.random.Generator, p: float = 0.3,
                           weighted: bool = False) -> Graph:
    """A random spanning tree plus independent extra edges with probability p."""
    order = rng.permutation(n)
    pairs = {tuple(sorted((int(order[k]), int(order[rng.integers(k)])))) for k in range(1, n)}
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p:
            pairs.add((i, j))
    pairs = sorted(pairs)
    weights = rng.uniform(0.2, 5.0, len(pairs)) if weighted else np.ones(len(pairs))
    return Graph(n, [(i, j, float(w)) for (i, j), w in zip(pairs, weights)])


def laplacian(g: Graph) -> np.ndarray:
    """K = D - A, with P(phi) = phi^T K phi counting every edge once."""
    a = g.adjacency()
    return np.diag(a.sum(axis=1)) - a


def _null_dimension(K: np.ndarray, tol: float = 1e-10) -> int:
    ev = np.linalg.eigvalsh(K)
    return int(np.sum(np.abs(ev) <= tol * max(1.0, float(np.max(np.abs(ev))))))


def pseudoinverse_G(K: np.ndarray) -> np.ndarray:
    """G with K G = I - c c^T / n and sum_i G_ij = 0, c = (1, ..., 1).

    Found from the bordered system [[K, c], [c^T, 0]] [G; mu] = [I - cc^T/n; 0].
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if K.shape != (n, n) or not np.allclose(K, K.T, atol=1e-12):
        raise ValueError("K must be square and symmetric")
    if _null_dimension(K) != 1:
        raise RankDeficiency(f"null space of K has dimension {_null_dimension(K)}, expected 1")
    c = np.ones(n)
    bordered = np.zeros((n + 1, n + 1))
    bordered[:n, :n] = K
    bordered[:n, n] = c
    bordered[n, :n] = c
    rhs = np.zeros((n + 1, n))
    rhs[:n] = np.eye(n) - np.outer(c, c) / n
    G = np.linalg.solve(bordered, rhs)[:n]
    return 0.5 * (G + G.T)


def resistance(G: np.ndarray, k: int, l: int) -> float:
    return float(G[k, k] + G[l, l] - 2.0 * G[k, l])


def resistance_matrix(G: np.ndarray) -> np.ndarray:
    d = np.diag(G)
    R = d[:, None] + d[None, :] - 2.0 * G
    np.fill_diagonal(R, 0.0)
    return 0.5 * (R + R.T)


def _lagrange_system(K: np.ndarray, k: int, l: int):
    # stationarity 2 K phi + lam (e_k - e_l) + nu c = 0, with phi_k - phi_l = 1
    # and the gauge sum(phi) = 0 fixing the free constant
    n = K.shape[0]
    b = np.zeros(n)
    b[k], b[l] = 1.0, -1.0
    c = np.ones(n)
    A = np.zeros((n + 2, n + 2))
    A[:n, :n] = 2.0 * K
    A[:n, n] = b
    A[:n, n + 1] = c
    A[n, :n] = b
    A[n + 1, :n] = c
    rhs = np.zeros(n + 2)
    rhs[n] = 1.0
    return A, rhs


def variational_phi(g: Graph, k: int, l: int) -> np.ndarray:
    """Potentials minimizing the power subject to phi_k - phi_l = 1, sum phi = 0."""
    if k == l:
        raise ValueError("k and l must differ")
    A, rhs = _lagrange_system(laplacian(g), k, l)
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"no unique potential between {k} and {l}") from exc
    if not np.allclose(A @ sol, rhs, atol=1e-9):
        raise SingularSystem(f"Lagrange system is inconsistent for ({k}, {l})")
    return sol[: g.n]


def power(g: Graph, phi) -> float:
    phi = np.asarray(phi, dtype=float)
    return float(sum(w * (phi[i] - phi[j]) ** 2 for i, j, w in g.edges))


def variational_resistance(g: Graph, k: int, l: int) -> float:
    """1 / (minimum power at unit potential difference)."""
    return 1.0 / power(g, variational_phi(g, k, l))


def _zero_sum_factor(K: np.ndarray) -> np.ndarray:
    """B with B B^T the covariance of exp(-phi^T K phi / 2) on c-perp."""
    if _null_dimension(K) != 1:
        raise RankDeficiency("null space of K has dimension other than 1")
    ev, vec = np.linalg.eigh(K)
    # eigh sorts ascending; the first column spans c
    return vec[:, 1:] / np.sqrt(ev[1:])


def gaussian_draws(g: Graph, samples: int, rng: np.random.Generator) -> np.ndarray:
    B = _zero_sum_factor(laplacian(g))
    return rng.standard_normal((samples, B.shape[1])) @ B.T


def gaussian_variance_mc(g: Graph, k: int, l: int, samples: int,
                         rng: np.random.Generator) -> tuple[float, float]:
    """Sample variance of phi_k - phi_l and its standard error."""
    if samples < 100:
        raise ValueError("samples must be at least 100")
    phi = gaussian_draws(g, samples, rng)
    d2 = (phi[:, k] - phi[:, l]) ** 2
    # the mean is exactly zero, so the variance estimate is the mean square
    return float(d2.mean()), float(d2.std(ddof=1) / math.sqrt(samples))


@dataclass
class MetricReport:
    triples: int
    violations_R: int
    violations_sqrtR: int
    worst_slack_R: float
    worst_slack_sqrtR: float

    @property
    def ok(self) -> bool:
        return self.violations_R == 0 and self.violations_sqrtR == 0


def _triangle(D: np.ndarray, tol: float) -> tuple[int, float]:
    n = len(D)
    if n < 3:
        return 0, math.inf
    # slack[i, j, k] = D_ik + D_kj - D_ij
    slack = D[:, None, :] + D.T[None, :, :] - D[:, :, None]
    idx = np.arange(n)
    distinct = ((idx[:, None, None] != idx[None, :, None]) & (idx[:, None, None] != idx[None, None, :])
                & (idx[None, :, None] != idx[None, None, :]))
    s = slack[distinct]
    return int(np.sum(s < -tol)), float(s.min())


def metric_check(R: np.ndarray, tol: float = 1e-10) -> MetricReport:
    R = np.asarray(R, dtype=float)
    n = len(R)
    vr, sr = _triangle(R, tol)
    vq, sq = _triangle(np.sqrt(np.clip(R, 0.0, None)), tol)
    return MetricReport(n * (n - 1) * (n - 2), vr, vq, sr, sq)


@dataclass
class ResistanceResult:
    G_matrix: np.ndarray
    R_matrix: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def solve_resistances(g: Graph) -> ResistanceResult:
    K = laplacian(g)
    G = pseudoinverse_G(K)
    n = g.n
    c = np.ones(n)
    R = resistance_matrix(G)
    variational = np.zeros_like(R)
    for k, l in itertools.combinations(range(n), 2):
        variational[k, l] = variational[l, k] = variational_resistance(g, k, l)
    diag = {
        "residual_KG": float(np.max(np.abs(K @ G - (np.eye(n) - np.outer(c, c) / n)))),
        "residual_column_sums": float(np.max(np.abs(G.sum(axis=0)))),
        "max_variational_diff": float(np.max(np.abs(variational - R))),
    }
    return ResistanceResult(G, R, diag)


def parse_edge_list(lines: Iterable[str]) -> Graph:
    """Graph from ``i j [weight]`` lines; ``#`` starts a comment.

    The node count is one more than the largest index seen.
    """
    edges = []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) not in (2, 3):
            raise ParseError(f"expected 'i j weight', got {raw.strip()!r}", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if i < 0 or j < 0:
            raise ParseError("negative node index", lineno)
        if i == j:
            raise ParseError(f"self-loop at node {i}", lineno)
        if not (w > 0 and math.isfinite(w)):
            raise ParseError(f"weight must be positive, got {w}", lineno)
        edges.append((i, j, w))
    if not edges:
        raise ParseError("no edges found")
    n = 1 + max(max(i, j) for i, j, _ in edges)
    return Graph(n, edges)


def read_edge_list(path) -> Graph:
    with open(Path(path)) as fh:
        return parse_edge_list(fh)
