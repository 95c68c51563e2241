"""Sample paths of the fields and their moving averages.

Three routes:

* a truncated random Fourier series with a 1/m power spectrum, averaged
  over windows in closed form (the quick picture of the field);
* exact Gaussian draws from the pinned covariance
  ``Cov(u, v) = (rho2(u) + rho2(v) - rho2(|u - v|)) / 2``, by Cholesky on
  arbitrary grids or by circulant embedding of the stationary increments
  on uniform grids;
* plain Brownian walks.

Random streams come from :class:`numpy.random.SeedSequence`; replica ``i``
of a run seeded with ``seed`` uses ``replica_rng(seed, i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DomainError, NotPSD
from .kernels import CovarianceModel, Family

__all__ = [
    "Method",
    "FourierFieldSpec",
    "FourierCoefficients",
    "PathSample",
    "replica_rng",
    "draw_fourier_coefficients",
    "eval_field",
    "moving_average_field",
    "fourier_ma_variance",
    "pinned_covariance",
    "cholesky_factor",
    "cholesky_sample",
    "cholesky_draws",
    "circulant_draws",
    "circulant_sample",
    "brownian_path",
]


class Method(str, Enum):
    FOURIER_MA = "FourierMA"
    CHOLESKY_EXACT = "CholeskyExact"
    CIRCULANT_EXACT = "CirculantExact"
    BROWNIAN_WALK = "BrownianWalk"


def replica_rng(seed: int, index: Optional[int] = None) -> np.random.Generator:
    """Generator for ``seed``, or for replica ``index`` of a run seeded with it."""
    if index is None:
        return np.random.default_rng(np.random.SeedSequence(seed))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


@dataclass(frozen=True)
class FourierFieldSpec:
    """Truncated series on (-L_box, L_box) with modes m = 1..Lambda."""
    Lambda: int = 4000
    L_box: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if int(self.Lambda) < 1:
            raise DomainError("Lambda must be at least 1")
        if not self.L_box > 0:
            raise DomainError("L_box must be positive")

    @property
    def wavenumbers(self) -> np.ndarray:
        return math.pi * np.arange(1, self.Lambda + 1) / self.L_box


@dataclass(frozen=True)
class FourierCoefficients:
    X: np.ndarray
    Y: np.ndarray

    def __len__(self):
        return len(self.X)


@dataclass(frozen=True)
class PathSample:
    u_grid: np.ndarray
    values: np.ndarray
    method: Method
    model: Optional[CovarianceModel]
    seed: Optional[int]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        u = np.array(self.u_grid, dtype=float)
        v = np.array(self.values, dtype=float)
        if u.shape != v.shape or u.ndim != 1:
            raise ValueError("u_grid and values must be 1-D arrays of equal length")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "u_grid", u)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "method", Method(self.method))

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "method": self.method.value,
            "model": self.model.to_dict() if self.model else None,
            **self.meta,
        }


def draw_fourier_coefficients(spec: FourierFieldSpec,
                              rng: Optional[np.random.Generator] = None) -> FourierCoefficients:
    rng = rng if rng is not None else replica_rng(spec.seed)
    z = rng.standard_normal((2, spec.Lambda))
    return FourierCoefficients(z[0], z[1])


def eval_field(coeffs: FourierCoefficients, spec: FourierFieldSpec, x):
    """Partial sum of the 1/sqrt(m) series at ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > spec.L_box):
        raise DomainError(f"x outside the box (-{spec.L_box}, {spec.L_box})")
    k = spec.wavenumbers
    amp = 1.0 / np.sqrt(np.arange(1, spec.Lambda + 1))
    phase = np.multiply.outer(x, k)
    out = (np.cos(phase) * (amp * coeffs.X)).sum(-1) + (np.sin(phase) * (amp * coeffs.Y)).sum(-1)
    return out if out.ndim else float(out)


def _window_factor(k: np.ndarray, s: float) -> np.ndarray:
    # mean of cos/sin(k x) over a window of width s, relative to its centre
    half = 0.5 * k * s
    return np.sin(half) / half


def _check_windows(spec: FourierFieldSpec, s: float, u: np.ndarray) -> None:
    if s <= 0:
        raise DomainError("s must be positive")
    reach = s * (np.max(np.abs(u)) + 0.5) if len(u) else 0.5 * s
    if reach > spec.L_box:
        raise DomainError(f"windows reach {reach:.4g}, beyond the box half-length {spec.L_box}")


def moving_average_field(coeffs: FourierCoefficients, spec: FourierFieldSpec, s: float,
                         u_grid, chunk: int = 512) -> PathSample:
    """Width-s moving average of the truncated series, pinned at u = 0.

    Each mode is averaged exactly, so cos(kx) over the window at s*u becomes
    A cos(k s u) with A = sin(ks/2)/(ks/2); subtracting the window at 0 turns
    the cosine part into A (cos(k s u) - 1).
    """
    u = np.asarray(u_grid, dtype=float)
    _check_windows(spec, s, u)
    k = spec.wavenumbers
    w = _window_factor(k, s) / np.sqrt(np.arange(1, spec.Lambda + 1))
    wx, wy = w * coeffs.X, w * coeffs.Y
    values = np.empty_like(u)
    for start in range(0, len(u), chunk):
        phase = np.multiply.outer(s * u[start:start + chunk], k)
        # 1 - cos via sin^2 keeps u = 0 exactly zero
        values[start:start + chunk] = (-2.0 * np.sin(0.5 * phase) ** 2) @ wx + np.sin(phase) @ wy
    return PathSample(u, values, Method.FOURIER_MA, CovarianceModel(Family.LOG1D, width_s=s),
                      spec.seed, {"s": s, "Lambda": spec.Lambda, "L": spec.L_box})


def fourier_ma_variance(spec: FourierFieldSpec, s: float, u) -> float:
    """Exact variance of the truncated-series moving average at ``u``."""
    u = np.asarray(u, dtype=float)
    _check_windows(spec, s, np.atleast_1d(u))
    k = spec.wavenumbers
    a2 = _window_factor(k, s) ** 2 / np.arange(1, spec.Lambda + 1)
    out = (4.0 * np.sin(0.5 * np.multiply.outer(s * u, k)) ** 2) @ a2
    return out if np.ndim(out) else float(out)


# --- exact Gaussian sampling ---------------------------------------------------

def pinned_covariance(model: CovarianceModel, u_grid) -> np.ndarray:
    u = np.asarray(u_grid, dtype=float)
    r2 = model.rho2(u)
    return 0.5 * (r2[:, None] + r2[None, :] - model.rho2(np.subtract.outer(u, u)))


def cholesky_factor(model: CovarianceModel, u_grid, max_jitter: float = 1e-10):
    """Lower factor of the pinned covariance on the grid points away from 0.

    Returns ``(factor, free)`` where ``free`` masks the grid points that are
    not pinned. Jitter up to ``max_jitter * trace`` is added to the diagonal
    before giving up with :class:`NotPSD`.
    """
    u = np.asarray(u_grid, dtype=float)
    if len(np.unique(u)) != len(u):
        raise DomainError("u_grid has duplicate points")
    free = u != 0
    cov = pinned_covariance(model, u[free])
    trace = float(np.trace(cov))
    eye = np.eye(len(cov))
    for jitter in [0.0] + [10.0 ** e for e in range(-16, 1 + int(round(math.log10(max_jitter))))]:
        try:
            return np.linalg.cholesky(cov + jitter * trace * eye), free
        except np.linalg.LinAlgError:
            continue
    raise NotPSD(f"covariance not positive definite after jitter {max_jitter} * trace")


def cholesky_draws(model: CovarianceModel, u_grid, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` exact draws, shape (n, len(u_grid))."""
    u = np.asarray(u_grid, dtype=float)
    factor, free = cholesky_factor(model, u)
    out = np.zeros((n, len(u)))
    out[:, free] = rng.standard_normal((n, factor.shape[0])) @ factor.T
    return out


def cholesky_sample(model: CovarianceModel, u_grid, rng: np.random.Generator,
                    seed: Optional[int] = None) -> PathSample:
    u = np.asarray(u_grid, dtype=float)
    values = cholesky_draws(model, u, 1, rng)[0]
    return PathSample(u, values, Method.CHOLESKY_EXACT, model, seed)


def _increment_autocov(model: CovarianceModel, h: float, lags: np.ndarray) -> np.ndarray:
    r2 = lambda k: model.rho2(np.abs(k) * h)
    return 0.5 * (r2(lags + 1) + r2(lags - 1) - 2.0 * r2(lags))


def circulant_draws(model: CovarianceModel, n_intervals: int, n: int,
                    rng: np.random.Generator, length: float = 1.0,
                    tol: float = 1e-10) -> np.ndarray:
    """``n`` exact paths on ``length * j / n_intervals``, shape (n, n_intervals + 1).

    The increments are stationary, so their covariance is Toeplitz and is
    embedded in a circulant that the FFT diagonalizes. The embedding is
    doubled until its spectrum is non-negative within ``tol``.
    """
    h = length / n_intervals
    size = n_intervals
    for _ in range(4):
        lags = np.arange(size + 1, dtype=float)
        gamma = _increment_autocov(model, h, lags)
        row = np.concatenate([gamma, gamma[-2:0:-1]])
        lam = np.fft.fft(row).real
        if lam.min() >= -tol * lam.max():
            break
        size *= 2
    else:
        raise NotPSD("circulant embedding has negative eigenvalues")
    lam = np.clip(lam, 0.0, None)
    m = len(row)
    z = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    incr = np.fft.fft(np.sqrt(lam / m) * z, axis=1).real[:, :n_intervals]
    paths = np.zeros((n, n_intervals + 1))
    np.cumsum(incr, axis=1, out=paths[:, 1:])
    return paths


def circulant_sample(model: CovarianceModel, n_intervals: int, rng: np.random.Generator,
                     length: float = 1.0, seed: Optional[int] = None) -> PathSample:
    u = length * np.arange(n_intervals + 1) / n_intervals
    values = circulant_draws(model, n_intervals, 1, rng, length)[0]
    return PathSample(u, values, Method.CIRCULANT_EXACT, model, seed)


def brownian_path(u_grid, rng: np.random.Generator, seed: Optional[int] = None,
                  diffusion: float = 1.0) -> PathSample:
    """Cumulative sum of N(0, diffusion * du) increments with B(u_0) = 0."""
    u = np.asarray(u_grid, dtype=float)
    if np.any(np.diff(u) <= 0):
        raise DomainError("u_grid must be increasing")
    if u[0] != 0:
        raise DomainError("u_grid must start at 0")
    steps = rng.standard_normal(len(u) - 1) * np.sqrt(diffusion * np.diff(u))
    values = np.concatenate([[0.0], np.cumsum(steps)])
    return PathSample(u, values, Method.BROWNIAN_WALK, CovarianceModel(Family.BROWNIAN), seed,
                      {"diffusion": diffusion} if diffusion != 1.0 else {})
