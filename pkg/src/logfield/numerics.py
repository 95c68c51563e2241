"""Quadrature routines and brute-force integral oracles.

Everything else in the package is checked against these. ``integrate_1d``
delegates to QUADPACK through :func:`scipy.integrate.quad`; the semi-infinite
rule and the double-integral oracle are composite Gauss-Legendre schemes
written out here so their error control is explicit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import NonConvergence, TailBoundViolation

__all__ = [
    "QuadratureSpec",
    "integrate_1d",
    "integrate_semi_infinite",
    "double_integral_oracle",
    "log_kernel",
    "log_diagonal",
    "abs_kernel",
    "abs_diagonal",
]


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_subdivisions: int = 100_000
    singularity_points: Sequence[float] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")
        object.__setattr__(self, "singularity_points",
                           tuple(float(p) for p in self.singularity_points))


DEFAULT_SPEC = QuadratureSpec()


def integrate_1d(f: Callable[[float], float], a: float, b: float,
                 spec: Optional[QuadratureSpec] = None) -> float:
    """Adaptive integral of ``f`` over ``[a, b]``.

    Declared singularities strictly inside the interval become breakpoints,
    so logarithmic singularities there (and at the endpoints) are handled
    by QUADPACK's extrapolation.
    """
    spec = spec or DEFAULT_SPEC
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    points = sorted(p for p in spec.singularity_points if a < p < b)
    kwargs = dict(epsabs=spec.abs_tol, epsrel=spec.rel_tol,
                  limit=max(spec.max_subdivisions, len(points) + 2),
                  full_output=1)
    if points:
        kwargs["points"] = points
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            out = integrate.quad(f, a, b, **kwargs)
        except integrate.IntegrationWarning as exc:
            raise NonConvergence(str(exc)) from exc
    value, err = out[0], out[1]
    if len(out) > 3 and out[3]:
        raise NonConvergence(str(out[3]))
    if err > spec.abs_tol + spec.rel_tol * abs(value):
        raise NonConvergence(f"error estimate {err:.3g} above tolerance")
    return float(value)


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _composite_gl(f, edges: np.ndarray, order: int) -> float:
    x, w = _gauss_legendre(order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(f(nodes), dtype=float)
    return float(np.sum(vals * w[None, :] * half[:, None]))


def _panel_edges(cutoff: float, scale: float, grading: int) -> np.ndarray:
    """Breakpoints on [0, cutoff]: geometric near 0, then widths growing
    with k but never exceeding ``scale``."""
    first = min(scale, 1.0, cutoff)
    edges = [0.0] + [first * 2.0 ** (-j) for j in range(grading, 0, -1)] + [first]
    k = first
    while k < cutoff:
        k = min(cutoff, k + min(scale, k))
        edges.append(k)
    return np.asarray(edges)


def integrate_semi_infinite(f: Callable[[np.ndarray], np.ndarray],
                            spec: Optional[QuadratureSpec] = None, *,
                            tail_decay: float, tail_const: float = 1.0,
                            scale: float = math.inf, order: int = 16,
                            grading: int = 40) -> float:
    """Integral of a vectorized ``f`` over ``(0, inf)``.

    The range is truncated at the point ``K`` where the analytic tail bound
    ``tail_const / ((tail_decay - 1) K**(tail_decay - 1))`` drops below
    ``spec.abs_tol``. ``[0, K]`` is covered by Gauss-Legendre panels no wider
    than ``scale`` (set it to a fraction of the oscillation period), and the
    panels are halved until two successive estimates agree.
    """
    spec = spec or DEFAULT_SPEC
    if tail_decay <= 1:
        raise ValueError("tail_decay must exceed 1")
    # half the absolute budget goes to the truncated tail
    cutoff = (2 * tail_const / ((tail_decay - 1) * spec.abs_tol)) ** (1.0 / (tail_decay - 1))
    cutoff = max(cutoff, 1.0)

    probe = cutoff * np.geomspace(1.0, 8.0, 33)
    bound = tail_const * probe ** (-tail_decay)
    if np.any(np.abs(f(probe)) > bound * (1 + 1e-9) + 1e-300):
        raise TailBoundViolation(
            f"|f(k)| exceeds {tail_const}/k^{tail_decay} beyond k={cutoff:.4g}")

    if math.isfinite(scale) and cutoff / scale > spec.max_subdivisions:
        raise NonConvergence(
            f"cutoff {cutoff:.3g} needs more than {spec.max_subdivisions} panels of width {scale:.3g}")
    edges = _panel_edges(cutoff, scale, grading)
    estimate = _composite_gl(f, edges, order)
    while True:
        if 2 * (len(edges) - 1) > spec.max_subdivisions:
            raise NonConvergence(
                f"panel budget {spec.max_subdivisions} exhausted at {len(edges) - 1} panels")
        mids = 0.5 * (edges[:-1] + edges[1:])
        edges = np.sort(np.concatenate([edges, mids]))
        refined = _composite_gl(f, edges, order)
        if abs(refined - estimate) <= 0.5 * spec.abs_tol + spec.rel_tol * abs(refined):
            return refined
        estimate = refined


# --- double-integral oracle -------------------------------------------------

def log_kernel(x, y):
    """-log|x - y|."""
    return -np.log(np.abs(x - y))


def log_diagonal(h):
    """Exact -log|x-y| integral over the square [0, h]^2."""
    return h * h * (1.5 - math.log(h))


def abs_kernel(x, y):
    return np.abs(x - y)


def abs_diagonal(h):
    return h ** 3 / 3.0


def _nodes(lo: float, hi: float, n: int) -> np.ndarray:
    return lo + (hi - lo) * np.arange(n + 1) / n


def _split_cells(a: float, b: float, breaks: Sequence[float], n: int) -> list[np.ndarray]:
    pts = [a] + [p for p in breaks if a < p < b] + [b]
    return [_nodes(p, q, n) for p, q in zip(pts[:-1], pts[1:])]


def _diagonal_gap(cells: np.ndarray) -> np.ndarray:
    """Smallest |x - y| over each cell (0 if the cell meets the diagonal)."""
    x0, x1, y0, y1 = cells.T
    return np.maximum(0.0, np.maximum(y0 - x1, x0 - y1))


def _cell_size(cells: np.ndarray) -> np.ndarray:
    return np.maximum(cells[:, 1] - cells[:, 0], cells[:, 3] - cells[:, 2])


def _tensor_gl(kernel, cells: np.ndarray, order: int) -> float:
    """Sum of tensor-product GL estimates over rectangles (x0, x1, y0, y1)."""
    if len(cells) == 0:
        return 0.0
    t, w = _gauss_legendre(order)
    total = 0.0
    for chunk in np.array_split(cells, max(1, len(cells) * order * order // 2_000_000 + 1)):
        x0, x1, y0, y1 = chunk.T
        hx, hy = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
        xs = (0.5 * (x0 + x1))[:, None] + hx[:, None] * t[None, :]
        ys = (0.5 * (y0 + y1))[:, None] + hy[:, None] * t[None, :]
        vals = kernel(xs[:, :, None], ys[:, None, :])
        cell = np.einsum("cij,i,j->c", vals, w, w)
        total += float(np.sum(cell * hx * hy))
    return total


def double_integral_oracle(kernel: Callable, a: float, b: float, c: float, d: float,
                           n: int, *, order: int = 10,
                           diagonal: Optional[Callable[[float], float]] = None,
                           depth: int = 30) -> float:
    """Brute-force estimate of the integral of ``kernel(x, y)`` over
    ``[a, b] x [c, d]``.

    Both axes share breakpoints at ``a, b, c, d`` and every elementary
    segment is cut into ``n`` equal cells, so cells are either identical
    squares on the diagonal x = y or meet it at most in a corner. Diagonal
    squares use ``diagonal(h)`` when given; otherwise the kernel is taken to
    depend only on |x - y| and each square is reduced to the 1-D integral
    2 int_0^h (h - t) k(t, 0) dt. Any other cell lying closer to
    the diagonal than its own size is quartered, up to ``depth`` times,
    before the tensor rule is applied; this keeps a log singularity on or
    just outside a cell from stalling convergence.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not (a < b and c < d):
        raise ValueError("need a < b and c < d")
    if diagonal is None:
        def diagonal(h):
            return 2.0 * integrate_1d(lambda t: (h - t) * float(kernel(t, 0.0)), 0.0, h)
    breaks = sorted({a, b, c, d})
    xsegs = _split_cells(a, b, breaks, n)
    ysegs = _split_cells(c, d, breaks, n)

    regular, corner = [], []
    diag_total = 0.0
    for xs in xsegs:
        for ys in ysegs:
            same = xs[0] == ys[0] and xs[-1] == ys[-1]
            X0, Y0 = np.meshgrid(xs[:-1], ys[:-1], indexing="ij")
            X1, Y1 = np.meshgrid(xs[1:], ys[1:], indexing="ij")
            cells = np.stack([X0.ravel(), X1.ravel(), Y0.ravel(), Y1.ravel()], axis=1)
            on_diag = np.zeros(len(cells), dtype=bool)
            if same:
                idx = np.arange(n)
                on_diag[idx * n + idx] = True
            touch = (~on_diag) & ((cells[:, 1] == cells[:, 2]) | (cells[:, 3] == cells[:, 0]))
            # equal-width squares share one value
            for h in np.unique(cells[on_diag, 1] - cells[on_diag, 0]):
                count = int(np.sum(cells[on_diag, 1] - cells[on_diag, 0] == h))
                diag_total += count * diagonal(float(h))
            plain = ~on_diag & ~touch
            regular.append(cells[plain])
            corner.append(cells[touch])

    regular = np.concatenate(regular) if regular else np.empty((0, 4))
    corner = np.concatenate(corner) if corner else np.empty((0, 4))
    # cells closer to the diagonal than their own size are quartered too
    far = _diagonal_gap(regular) >= _cell_size(regular)
    corner = np.concatenate([corner, regular[~far]])

    pieces = [regular[far]]
    for _ in range(depth):
        if len(corner) == 0:
            break
        x0, x1, y0, y1 = corner.T
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        quads = np.concatenate([
            np.stack([x0, xm, y0, ym], 1), np.stack([xm, x1, y0, ym], 1),
            np.stack([x0, xm, ym, y1], 1), np.stack([xm, x1, ym, y1], 1),
        ])
        far = _diagonal_gap(quads) >= _cell_size(quads)
        pieces.append(quads[far])
        corner = quads[~far]
    pieces.append(corner)
    return diag_total + _tensor_gl(kernel, np.concatenate(pieces), order)
