"""Variograms of moving-averaged Gaussian fields.

Each field family is specified by the bilinear form of its covariance,
``<phi[h] phi[h']> = int int k(x - y) h(x) h'(y) dx dy``, with

* ``Log1D``:      k(t) = -log|t|
* ``Brownian``:   the raw Wiener process, d(x, y) = sqrt|x - y|
* ``BrownianMA``: k(t) = -|t|, averaged over windows of width s
* ``PowerLaw``:   k(t) = +-|t|**alpha, the sign chosen to make the form
  positive on zero-mean test functions (finite part for alpha <= -1)
* ``Log3D``:      -log|x - y| in three dimensions, averaged over balls

For the moving average of width ``s`` the test function is the indicator of
one window minus the indicator of another, scaled by ``1/s``. The variogram
``rho2(r)`` is the variance of that difference and ``rho = sqrt(rho2)`` is
the metric the continuity analysis runs on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import xlogy

from .errors import DomainError
from .numerics import QuadratureSpec, integrate_semi_infinite

__all__ = [
    "Family",
    "Asymptote",
    "CovarianceModel",
    "MetricProfile",
    "L",
    "F_log",
    "scale_anomaly_check",
    "rho2_log1d",
    "rho2_log1d_from_F",
    "rho2_brownian",
    "rho2_brownian_ma",
    "brownian_ma_branches",
    "rho2_powerlaw",
    "G_3d",
    "G_3d_small_r_constant",
    "rho2_log3d",
    "LOG3D_PREFACTOR",
    "metric_profile",
]


class Family(str, Enum):
    LOG1D = "Log1D"
    BROWNIAN = "Brownian"
    BROWNIAN_MA = "BrownianMA"
    POWER_LAW = "PowerLaw"
    LOG3D = "Log3D"


class Asymptote(str, Enum):
    """Leading small-r behaviour of rho(r)."""
    R_SQRT_LOG = "RSqrtLog"                 # r sqrt(log 1/r)
    LINEAR = "Linear"                       # r
    POWER_HALF_ALPHA_PLUS_ONE = "PowerHalfAlphaPlusOne"  # r**(alpha/2 + 1)
    SQRT_R_LOG = "SqrtRLog"                 # sqrt(r log 1/r)
    SQRT = "Sqrt"                           # sqrt(r)


@dataclass(frozen=True)
class CovarianceModel:
    """A field family plus its parameters.

    ``width_s`` is the averaging window width (the sphere radius for
    ``Log3D``). ``alpha`` is only meaningful for ``PowerLaw``.
    """
    family: Family
    alpha: Optional[float] = None
    width_s: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.width_s > 0:
            raise DomainError("width_s must be positive")
        if self.family is Family.POWER_LAW:
            if self.alpha is None:
                raise DomainError("PowerLaw needs alpha")
            _check_alpha(self.alpha)
            object.__setattr__(self, "alpha", float(self.alpha))
        elif self.alpha is not None:
            raise DomainError(f"alpha is not a parameter of {self.family.value}")

    def rho2(self, r):
        """Variogram at separation ``r`` (array or scalar)."""
        r = np.abs(np.asarray(r, dtype=float))
        fam, s = self.family, self.width_s
        if fam is Family.LOG1D:
            return rho2_log1d(r)
        if fam is Family.BROWNIAN:
            return rho2_brownian(r)
        if fam is Family.BROWNIAN_MA:
            return rho2_brownian_ma(r, s)
        if fam is Family.POWER_LAW:
            return rho2_powerlaw(r, self.alpha, s)
        return np.vectorize(lambda x: rho2_log3d(x / s))(r)

    @property
    def closed_form(self) -> bool:
        return self.family is not Family.LOG3D

    @property
    def asymptote(self) -> Asymptote:
        fam = self.family
        if fam is Family.LOG1D:
            return Asymptote.R_SQRT_LOG
        if fam is Family.BROWNIAN:
            return Asymptote.SQRT
        if fam is Family.POWER_LAW:
            if self.alpha > 0:
                return Asymptote.LINEAR
            if self.alpha == -1:
                return Asymptote.SQRT_R_LOG
            return Asymptote.POWER_HALF_ALPHA_PLUS_ONE
        return Asymptote.LINEAR

    def to_dict(self) -> dict:
        return {"family": self.family.value, "alpha": self.alpha, "width_s": self.width_s}

    @classmethod
    def from_dict(cls, d: dict) -> "CovarianceModel":
        return cls(Family(d["family"]), d.get("alpha"), float(d.get("width_s", 1.0)))


def _check_alpha(alpha: float) -> None:
    if not (alpha > -2) or alpha == 0 or not math.isfinite(alpha):
        raise DomainError(f"alpha must lie in (-2, 0) or (0, inf), got {alpha}")


# --- log-correlated field in one dimension ---------------------------------

def L(r):
    """(1/2) r^2 log r^2, continuous at 0."""
    r2 = np.square(np.asarray(r, dtype=float))
    out = 0.5 * xlogy(r2, r2)
    return out if out.ndim else float(out)


def F_log(a: float, b: float, c: float, d: float) -> float:
    """-int_a^b dx int_c^d dy log|x - y| in closed form."""
    return (1.5 * (a - b) * (c - d)
            + 0.5 * (L(c - a) - L(d - a) - L(c - b) + L(d - b)))


def scale_anomaly_check(a, b, c, d, lam) -> float:
    """Residual of F(lam a, ...) = lam^2 F(a, ...) - lam^2 (b-a)(d-c) log lam.

    Zero up to rounding for every rectangle and every lam > 0.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    return (F_log(lam * a, lam * b, lam * c, lam * d) - lam ** 2 * F_log(a, b, c, d)
            + lam ** 2 * (b - a) * (d - c) * math.log(lam))


# coefficients of r^n in L(1 + r) + L(1 - r) beyond 3 r^2
_LOG1D_SERIES = [(n, -4.0 / (n * (n - 1) * (n - 2))) for n in range(4, 16, 2)]


def rho2_log1d(r):
    """L(r + 1) + L(r - 1) - 2 L(r), with r the centre separation in window widths.

    A short even series replaces the first two terms below r = 0.05, where
    they cancel to O(r^2).
    """
    r = np.abs(np.asarray(r, dtype=float))
    out = np.empty_like(r)
    small = r < 0.05
    rs = r[small]
    series = 3.0 * rs ** 2
    for n, coef in _LOG1D_SERIES:
        series = series + coef * rs ** n
    out[small] = series - 2.0 * L(rs)
    rb = r[~small]
    out[~small] = L(rb + 1.0) + L(rb - 1.0) - 2.0 * L(rb)
    return out if out.ndim else float(out)


def rho2_log1d_from_F(u: float, v: float, s: float) -> float:
    """The same variogram built from F on two windows of width s."""
    return (3.0 - 2.0 * math.log(s)
            - (2.0 / s ** 2) * F_log(s * u - s / 2, s * u + s / 2, s * v - s / 2, s * v + s / 2))


# --- Brownian families -------------------------------------------------------

def rho2_brownian(r):
    """d(x, y)^2 = |x - y| for the raw Wiener process."""
    return np.abs(r)


def rho2_brownian_ma(r, s: float = 1.0):
    """Variogram of the width-s moving average for the kernel -|x - y|.

    ``r`` is the distance between window centres; the two branches meet
    where the windows stop overlapping, r = s.
    """
    r = np.abs(np.asarray(r, dtype=float))
    near, far = brownian_ma_branches(r, s)
    out = np.where(r < s, near, far)
    return out if out.ndim else float(out)


def brownian_ma_branches(r, s: float = 1.0):
    """The overlapping (r < s) and disjoint (r >= s) window formulas."""
    if s <= 0:
        raise DomainError("s must be positive")
    r = np.asarray(r, dtype=float)
    return 2.0 * r ** 2 / s - 2.0 * r ** 3 / (3.0 * s ** 2), 2.0 * r - 2.0 * s / 3.0


# --- power-law correlations -----------------------------------------------

def _second_antiderivative(t, alpha: float):
    """K2 with K2'' = |t|**alpha and K2(0) = 0; analytically continued
    (finite part) for alpha < -1, log form at alpha = -1."""
    t = np.abs(np.asarray(t, dtype=float))
    if alpha == -1:
        return xlogy(t, t) - t
    return t ** (alpha + 2) / ((alpha + 1) * (alpha + 2))


def _even_part(r, alpha: float, s: float, terms: int = 10):
    """K2(s + r) + K2(s - r) - 2 K2(s) as a Taylor series in r (r < s)."""
    total = np.zeros_like(r)
    coef = 1.0  # alpha (alpha - 1) ... falling factorial for K2^(j)
    for m in range(terms):
        j = 2 * m + 2
        total = total + 2.0 * coef * s ** (alpha - j + 2) * r ** j / math.factorial(j)
        coef *= (alpha - j + 2) * (alpha - j + 1)
    return total


def rho2_powerlaw(r, alpha: float, s: float = 1.0):
    """Moving-average variogram for the power-law kernel.

    Uses the closed-form second antiderivative of |t|**alpha; ``r`` is the
    centre separation. For alpha <= -1 the window self-energy diverges and
    the finite part is taken; the sign of the kernel is fixed so that the
    result is non-negative in every regime.
    """
    _check_alpha(alpha)
    if s <= 0:
        raise DomainError("s must be positive")
    r = np.abs(np.asarray(r, dtype=float))
    sign = 1.0 if -1 < alpha < 0 else -1.0

    def K2(t):
        return _second_antiderivative(t, alpha)

    out = np.empty_like(r)
    small = r < 0.1 * s
    rs = r[small]
    out[small] = (2 * sign / s ** 2) * (2.0 * K2(rs) - _even_part(rs, alpha, s))
    rb = r[~small]
    d0 = 2.0 * K2(s)
    dr = K2(rb + s) + K2(rb - s) - 2.0 * K2(rb)
    out[~small] = (2 * sign / s ** 2) * (d0 - dr)
    return out if out.ndim else float(out)


# --- log-correlated field in three dimensions ----------------------------------

#: ball-average variogram = LOG3D_PREFACTOR * G(r) for unit radius; matches the
#: large-r limit 2 (4 pi / 3)^2 log r with G ~ log(r) / 9
LOG3D_PREFACTOR = 32.0 * math.pi ** 2


def _sin_minus_kcos(k):
    """sin k - k cos k, by series for small k."""
    k = np.asarray(k, dtype=float)
    out = np.sin(k) - k * np.cos(k)
    small = k < 0.3
    ks = k[small]
    ser = np.zeros_like(ks)
    term_sign = 1.0
    for n in range(1, 8):
        ser = ser + term_sign * (2 * n) / math.factorial(2 * n + 1) * ks ** (2 * n + 1)
        term_sign = -term_sign
    out[small] = ser
    return out


def _one_minus_sinc(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 1.0 - np.sin(x) / x
    small = np.abs(x) < 0.3
    xs = x[small] ** 2
    ser = np.zeros_like(xs)
    term_sign = 1.0
    for n in range(1, 8):
        ser = ser + term_sign * xs ** n / math.factorial(2 * n + 1)
        term_sign = -term_sign
    out[small] = ser
    return out


def _g3d_spec(r: float) -> QuadratureSpec:
    return QuadratureSpec(abs_tol=1e-10 * min(1.0, r * r), rel_tol=1e-10,
                          max_subdivisions=10 ** 7)


def G_3d(r: float, spec: Optional[QuadratureSpec] = None) -> float:
    """int_0^inf [sin k - k cos k]^2 [1 - sin(kr)/(kr)] / k^7 dk."""
    r = abs(float(r))
    if r == 0:
        return 0.0
    spec = spec or _g3d_spec(r)

    def integrand(k):
        q = _sin_minus_kcos(k)
        return q * q / k ** 7 * _one_minus_sinc(k * r)

    # two tail bounds hold for k >= 1: 4/k^5 always, r^2/(3 k^3) from
    # 1 - sinc(x) <= x^2/6; the cheaper truncation wins
    cut5 = (2 * 4.0 / (4 * spec.abs_tol)) ** 0.25
    cut3 = (2 * (r * r / 3.0) / (2 * spec.abs_tol)) ** 0.5
    if cut3 < cut5:
        decay, const = 3.0, r * r / 3.0
    else:
        decay, const = 5.0, 4.0
    return integrate_semi_infinite(integrand, spec, tail_decay=decay, tail_const=const,
                                   scale=min(1.0, math.pi / r))


def G_3d_small_r_constant(spec: Optional[QuadratureSpec] = None) -> float:
    """lim G(r)/r^2 = int_0^inf [sin k - k cos k]^2 / (6 k^5) dk."""
    spec = spec or QuadratureSpec(abs_tol=1e-12, rel_tol=1e-12, max_subdivisions=10 ** 7)

    def integrand(k):
        q = _sin_minus_kcos(k)
        return q * q / (6.0 * k ** 5)

    return integrate_semi_infinite(integrand, spec, tail_decay=3.0, tail_const=1.0 / 3.0)


def rho2_log3d(r: float) -> float:
    """Variogram of unit-radius ball averages, r in radii."""
    return LOG3D_PREFACTOR * G_3d(r)


# --- metric profiles ----------------------------------------------------------

def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MetricProfile:
    """rho(r) tabulated on a grid, with its small-r behaviour.

    ``rho`` evaluates the exact kernel for the closed-form families and a
    monotone log-log interpolant (continued linearly below the grid) for
    ``Log3D``, whose kernel costs a quadrature per point.
    """
    model: CovarianceModel
    r_grid: np.ndarray
    rho_values: np.ndarray
    small_r_asymptote: Asymptote
    subadditivity_slack: float = 0.0
    monotone_up_to: float = math.inf
    _interp: Optional[PchipInterpolator] = field(default=None, repr=False, compare=False)

    @property
    def rho2_values(self) -> np.ndarray:
        return self.rho_values ** 2

    def rho(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        if self.model.closed_form:
            out = np.sqrt(np.maximum(self.model.rho2(r), 0.0))
            return out if out.ndim else float(out)
        lo, hi = self.r_grid[0], self.r_grid[-1]
        if np.any(r > hi * (1 + 1e-12)):
            raise DomainError(f"r beyond tabulated range {hi}")
        out = np.zeros_like(r)
        pos = r > 0
        rp = np.clip(r[pos], None, hi)
        inside = rp >= lo
        vals = np.empty_like(rp)
        vals[inside] = np.exp(self._interp(np.log(rp[inside])))
        # rho ~ r below the grid for the ball-averaged field
        vals[~inside] = self.rho_values[0] * rp[~inside] / lo
        out[pos] = vals
        return out if out.ndim else float(out)

    def rho_inverse(self, eps: float, r_hi: float = 1.0) -> float:
        """Largest r <= r_hi with rho(r) <= eps (rho is nondecreasing)."""
        if eps <= 0:
            raise DomainError("eps must be positive")
        if self.rho(r_hi) <= eps:
            return r_hi
        lo = 1e-300
        if self.rho(lo) >= eps:
            raise DomainError(f"eps={eps} below resolvable range")
        g = lambda t: float(self.rho(math.exp(t))) - eps
        t = brentq(g, math.log(lo), math.log(r_hi), xtol=1e-14, rtol=1e-15, maxiter=500)
        return math.exp(t)

    def to_rows(self):
        return [(float(r), float(p), float(p * p)) for r, p in zip(self.r_grid, self.rho_values)]


def metric_profile(model: CovarianceModel, r_grid, *, tol: float = 1e-9) -> MetricProfile:
    """Tabulate rho on ``r_grid`` and validate it as a metric on [0, max r].

    Raises DomainError if rho fails to be nondecreasing or subadditive on
    the grid beyond ``tol`` (relative).
    """
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or len(r) < 2:
        raise DomainError("r_grid needs at least two points")
    if np.any(r < 0) or np.any(np.diff(r) <= 0):
        raise DomainError("r_grid must be sorted, increasing and non-negative")
    rho2 = np.asarray(model.rho2(r), dtype=float)
    if np.any(rho2 < -tol * max(1.0, float(np.max(np.abs(rho2))))):
        raise DomainError("negative variogram value")
    rho = np.sqrt(np.maximum(rho2, 0.0))

    # for kernels with anticorrelated tails (PowerLaw, alpha <= -1) rho peaks
    # where the windows stop overlapping, so monotonicity is a small-r property
    drops = np.flatnonzero(np.diff(rho) < -tol * np.maximum(rho[1:], 1e-300))
    monotone_up_to = float(r[drops[0]]) if len(drops) else math.inf
    if monotone_up_to < min(model.width_s, r[-1]):
        raise DomainError(f"rho decreases after r={monotone_up_to:.4g}, inside the window width")

    interp = None
    if not model.closed_form:
        pos = r > 0
        interp = PchipInterpolator(np.log(r[pos]), np.log(rho[pos]))
    profile = MetricProfile(model, _frozen(r), _frozen(rho), model.asymptote, 0.0,
                            monotone_up_to, interp)

    # subadditivity on grid pairs whose sum stays in range
    ri, rj = np.meshgrid(r, r, indexing="ij")
    mask = (ri <= rj) & (ri + rj <= r[-1]) & (ri > 0)
    if np.any(mask):
        pi_, pj = np.meshgrid(rho, rho, indexing="ij")
        lhs = profile.rho(ri[mask] + rj[mask])
        rhs = pi_[mask] + pj[mask]
        slack = float(np.min(rhs - lhs))
        if slack < -tol * float(np.max(rhs)):
            raise DomainError(f"rho violates subadditivity by {-slack:.3g}")
        object.__setattr__(profile, "subadditivity_slack", slack)
    return profile
