"""Covering numbers, the Dudley integral, moduli of continuity and the
empirical statistics that test them on sampled paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import DegenerateModulus, DomainError, NonConvergence
from .kernels import CovarianceModel, Family, MetricProfile
from .sampling import circulant_draws, replica_rng

__all__ = [
    "CoveringProfile",
    "ModulusForm",
    "Modulus",
    "covering_number",
    "covering_profile",
    "dudley_integral",
    "modulus",
    "model_forms",
    "max_increments",
    "lipschitz_statistic",
    "RefinementReport",
    "refinement_study",
]


# --- covering numbers ----------------------------------------------------------

def _covered(profile: MetricProfile, count: int, eps: float) -> bool:
    # ``count`` open rho-balls of radius eps cover [0, 1] iff a ball
    # reaches half a cell, i.e. rho(1 / (2 count)) < eps
    return float(profile.rho(0.5 / count)) < eps


def _require_unit_domain(profile: MetricProfile) -> None:
    if profile.monotone_up_to < 1.0:
        raise DomainError(f"rho is monotone only up to r={profile.monotone_up_to:.4g}; "
                          "ball covers of [0, 1] need it on the whole interval")


def covering_number(profile: MetricProfile, eps: float) -> int:
    """Fewest open rho-balls of radius ``eps`` covering [0, 1].

    A ball covers an interval of half-width h = sup{r : rho(r) < eps}, so
    the count is 1 + floor(1 / (2h)). The estimate from ``rho_inverse`` is
    corrected by direct comparisons so ties at cell boundaries are exact.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    _require_unit_domain(profile)
    smallest = profile.rho_values[profile.rho_values > 0]
    if not profile.model.closed_form and eps < smallest[0]:
        raise DomainError(f"eps={eps} below the smallest tabulated rho {smallest[0]:.3g}")
    h = profile.rho_inverse(eps)
    count = 1 + int(math.floor(0.5 / h)) if h < 0.5 else 1
    while not _covered(profile, count, eps):
        count += 1
    while count > 1 and _covered(profile, count - 1, eps):
        count -= 1
    return count


@dataclass(frozen=True)
class CoveringProfile:
    """N(eps) as a step function.

    ``eps_grid[m-1] = rho(1 / (2m))`` for m = 1..M (decreasing) and
    N(eps) = m + 1 on (eps_grid[m], eps_grid[m-1]]; N = 1 above
    ``eps_grid[0]``. Below ``eps_grid[-1]`` the count is continued by the
    smooth asymptote 1/(2 rho^{-1}(eps)) + 1/2.
    """
    eps_grid: np.ndarray
    counts: np.ndarray
    domain_diameter: float
    profile: Optional[MetricProfile] = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.eps_grid) > 0):
            raise ValueError("eps_grid must be decreasing")
        if np.any(np.diff(self.counts) < 0):
            raise ValueError("counts must not decrease as eps decreases")

    def N(self, eps: float) -> float:
        if eps >= self.eps_grid[0]:
            return 1
        if eps > self.eps_grid[-1]:
            idx = int(np.searchsorted(-self.eps_grid, -eps, side="right"))
            return int(self.counts[idx - 1])
        return self.asymptotic_N(eps)

    def asymptotic_N(self, eps: float) -> float:
        if self.profile is None:
            raise NonConvergence("no asymptote below the tabulated covering grid")
        return 0.5 / self.profile.rho_inverse(eps) + 0.5


def covering_profile(profile: MetricProfile, max_count: int = 2 ** 16) -> CoveringProfile:
    _require_unit_domain(profile)
    m = np.arange(1, max_count + 1)
    eps = np.asarray(profile.rho(0.5 / m), dtype=float)
    return CoveringProfile(eps, m + 1, float(profile.rho(1.0)), profile)


_TAIL_T = 60.0
_R_FLOOR = 1e-290


def dudley_integral(covering: CoveringProfile, delta: float) -> float:
    """J(delta) = int_0^delta sqrt(log N(eps)) d eps.

    Exact on the tabulated steps; the part below the last step uses the
    asymptotic count, integrated after the substitution eps = e0 exp(-t).
    """
    if delta < 0:
        raise DomainError("delta must be non-negative")
    if delta == 0:
        return 0.0
    if delta > covering.domain_diameter * (1 + 1e-12):
        raise DomainError(f"delta={delta} exceeds the diameter {covering.domain_diameter}")
    eps, counts = covering.eps_grid, covering.counts
    upper = np.minimum(delta, eps[:-1])
    widths = np.clip(upper - eps[1:], 0.0, None)
    total = float(np.sum(np.sqrt(np.log(counts[:-1])) * widths))

    e0 = min(delta, float(eps[-1]))
    if e0 > 0:
        def integrand(t):
            return math.exp(-t) * math.sqrt(math.log(covering.asymptotic_N(e0 * math.exp(-t))))
        # t = 60 leaves < 1e-24 relative; very flat metrics (rho ~ r**0.05)
        # stop earlier, at the smallest eps rho^{-1} can resolve, and the
        # rest is its leading term eps sqrt(log N(eps))
        floor = float(covering.profile.rho(_R_FLOOR)) if covering.profile is not None else 0.0
        t_max = _TAIL_T if floor <= 0 else min(_TAIL_T, math.log(e0 / floor))
        value, err = integrate.quad(integrand, 0.0, t_max, epsabs=0.0, epsrel=1e-10, limit=500)
        if not err <= 1e-8 * max(value, 1e-300):
            raise NonConvergence(f"tail of the Dudley integral: error {err:.3g}")
        total += e0 * value
        if t_max < _TAIL_T:
            total += e0 * integrand(t_max)
    return total


# --- moduli --------------------------------------------------------------------

class ModulusForm(str, Enum):
    R_LOG_INV = "RLogInv"             # r log(1/r)
    SQRT_R_LOG_INV = "SqrtRLogInv"    # sqrt(r log(1/r))
    POWER_LOG = "PowerLog"            # r**(alpha/2 + 1) log(1/r)
    LINEAR = "Linear"                 # r
    SQRT = "Sqrt"                     # sqrt(r)
    R_SQRT_LOG_INV = "RSqrtLogInv"    # r sqrt(log(1/r))
    POWER_SQRT_LOG = "PowerSqrtLog"   # r**(alpha/2 + 1) sqrt(log(1/r))


def _closed_form(form: ModulusForm, alpha: Optional[float] = None) -> Callable:
    form = ModulusForm(form)
    if form is ModulusForm.R_LOG_INV:
        return lambda r: r * np.log(1.0 / r)
    if form is ModulusForm.SQRT_R_LOG_INV:
        return lambda r: np.sqrt(np.clip(r * np.log(1.0 / r), 0.0, None))
    if form is ModulusForm.POWER_LOG:
        if alpha is None:
            raise DomainError("PowerLog needs alpha")
        return lambda r: r ** (alpha / 2 + 1) * np.log(1.0 / r)
    if form is ModulusForm.LINEAR:
        return lambda r: np.asarray(r, dtype=float) * 1.0
    if form is ModulusForm.SQRT:
        return np.sqrt
    if form is ModulusForm.R_SQRT_LOG_INV:
        return lambda r: r * np.sqrt(np.log(1.0 / r))
    if alpha is None:
        raise DomainError("PowerSqrtLog needs alpha")
    return lambda r: r ** (alpha / 2 + 1) * np.sqrt(np.log(1.0 / r))


@dataclass(frozen=True)
class Modulus:
    """omega(r) on a grid, tagged with the closed form it is compared to.

    Built by :func:`modulus` from the Dudley integral (evaluated between
    grid points by log-log interpolation), or directly from a closed form
    with :meth:`from_closed_form` (evaluated exactly).

    ``closed_form`` is the shape claimed for the family in the literature;
    ``derived_form`` is the shape the integral actually approaches. They
    differ by sqrt(log(1/r)) whenever rho(r) is a pure power at small r.
    """
    r_grid: np.ndarray
    omega_values: np.ndarray
    closed_form: ModulusForm
    alpha: Optional[float] = None
    exact: bool = False
    name: str = ""
    derived_form: Optional[ModulusForm] = None

    @classmethod
    def from_closed_form(cls, form, r_grid=None, alpha=None) -> "Modulus":
        form = ModulusForm(form)
        r = np.geomspace(1e-8, 0.5, 200) if r_grid is None else np.asarray(r_grid, dtype=float)
        return cls(r, _closed_form(form, alpha)(r), form, alpha, True, form.value, form)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.exact:
            return _closed_form(self.closed_form, self.alpha)(r)
        lo, hi = self.r_grid[0], self.r_grid[-1]
        if np.any(r < lo * (1 - 1e-12)) or np.any(r > hi * (1 + 1e-12)):
            raise DomainError("r outside the tabulated modulus range")
        return np.exp(np.interp(np.log(r), np.log(self.r_grid), np.log(self.omega_values)))

    def closed_form_values(self, r=None, form=None):
        r = self.r_grid if r is None else np.asarray(r, dtype=float)
        return _closed_form(form or self.closed_form, self.alpha)(r)

    def ratio_to_closed_form(self, form=None) -> np.ndarray:
        return self.omega_values / self.closed_form_values(form=form)


def model_forms(model: CovarianceModel) -> tuple[ModulusForm, ModulusForm, Optional[float]]:
    """(claimed, derived, alpha) modulus shapes for a family."""
    fam = model.family
    if fam is Family.BROWNIAN:
        return ModulusForm.SQRT_R_LOG_INV, ModulusForm.SQRT_R_LOG_INV, None
    if fam is Family.LOG1D:
        return ModulusForm.R_LOG_INV, ModulusForm.R_LOG_INV, None
    if fam is Family.POWER_LAW and model.alpha < 0:
        # at alpha = -1, rho^2 ~ r log(1/r) supplies the missing sqrt(log)
        derived = ModulusForm.POWER_LOG if model.alpha == -1 else ModulusForm.POWER_SQRT_LOG
        return ModulusForm.POWER_LOG, derived, model.alpha
    # rho ~ r: BrownianMA, Log3D, PowerLaw alpha > 0
    return ModulusForm.R_LOG_INV, ModulusForm.R_SQRT_LOG_INV, None


def modulus(profile: MetricProfile, covering: Optional[CoveringProfile] = None,
            r_grid=None) -> Modulus:
    """omega(r) = J(rho(r)) on the profile grid (points in (0, 1))."""
    covering = covering or covering_profile(profile)
    r = np.asarray(profile.r_grid if r_grid is None else r_grid, dtype=float)
    r = r[(r > 0) & (r < 1)]
    omega = np.array([dudley_integral(covering, float(profile.rho(x))) for x in r])
    form, derived, alpha = model_forms(profile.model)
    return Modulus(r, omega, form, alpha, False, "dudley", derived)


# --- empirical statistics -------------------------------------------------------

def _uniform_step(u: np.ndarray) -> Optional[float]:
    d = np.diff(u)
    if len(d) and np.allclose(d, d[0], rtol=1e-9, atol=0):
        return float(d[0])
    return None


def max_increments(values: np.ndarray, max_lag: int) -> np.ndarray:
    """max_j |X[j + k] - X[j]| for k = 1..max_lag."""
    values = np.asarray(values, dtype=float)
    max_lag = min(max_lag, len(values) - 1)
    return np.array([np.max(np.abs(values[k:] - values[:-k])) for k in range(1, max_lag + 1)])


def _ratio_max(incr: np.ndarray, lags: np.ndarray, mod) -> float:
    omega = np.asarray(mod(lags), dtype=float)
    if np.any(~(omega > 0)):
        bad = lags[~(omega > 0)][0]
        raise DegenerateModulus(f"modulus vanishes at r={bad:.4g}")
    return float(np.max(incr / omega))


def lipschitz_statistic(path, mod, r_max: Optional[float] = None) -> float:
    """max |X(u) - X(v)| / omega(|u - v|) over grid pairs with 0 < |u - v| <= r_max.

    ``r_max`` defaults to a quarter of the path's extent. ``mod`` is any
    callable in r, e.g. a :class:`Modulus`.
    """
    u, x = path.u_grid, path.values
    if r_max is None:
        r_max = 0.25 * (u[-1] - u[0])
    h = _uniform_step(u)
    if h is not None:
        max_lag = int(math.floor(r_max / h * (1 + 1e-9)))
        if max_lag < 1:
            raise DomainError("grid spacing does not resolve r_max")
        incr = max_increments(x, max_lag)
        return _ratio_max(incr, h * np.arange(1, len(incr) + 1), mod)
    best = 0.0
    for i in range(len(u) - 1):
        sep = u[i + 1:] - u[i]
        sel = sep <= r_max * (1 + 1e-12)
        if not np.any(sel):
            continue
        best = max(best, _ratio_max(np.abs(x[i + 1:][sel] - x[i]), sep[sel], mod))
    return best


@dataclass
class RefinementReport:
    model: dict
    levels: list
    moduli: list
    replicas: int
    seed: int
    r_max: float
    statistics: dict            # modulus name -> [level][replica]
    medians: dict = field(default_factory=dict)
    iqr: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, table in self.statistics.items():
            arr = np.asarray(table)
            self.medians[name] = [float(v) for v in np.median(arr, axis=1)]
            q75, q25 = np.percentile(arr, [75, 25], axis=1)
            self.iqr[name] = [float(v) for v in q75 - q25]

    def growth(self, name: str) -> float:
        """Median at the finest level over the median at the coarsest."""
        med = self.medians[name]
        return med[-1] / med[0]

    def to_dict(self) -> dict:
        return {
            "model": self.model, "levels": self.levels, "moduli": self.moduli,
            "replicas": self.replicas, "seed": self.seed, "r_max": self.r_max,
            "replica_streams": [[self.seed, i] for i in range(self.replicas)],
            "medians": self.medians, "iqr": self.iqr,
            "growth": {name: self.growth(name) for name in self.medians},
        }

    def rows(self):
        for name in self.moduli:
            for lvl, med, iqr in zip(self.levels, self.medians[name], self.iqr[name]):
                yield name, lvl, med, iqr


def _sample_finest(model: CovarianceModel, n_intervals: int, rng, length: float) -> np.ndarray:
    if model.family is Family.BROWNIAN:
        steps = rng.standard_normal(n_intervals) * math.sqrt(length / n_intervals)
        return np.concatenate([[0.0], np.cumsum(steps)])
    return circulant_draws(model, n_intervals, 1, rng, length)[0]


def refinement_study(model: CovarianceModel, moduli: Sequence, levels: Sequence[int],
                     replicas: int, seed: int = 0, r_max: float = 0.25,
                     length: float = 1.0) -> RefinementReport:
    """Lipschitz statistics of exact sample paths over a ladder of grids.

    ``levels`` are interval counts on [0, length]; each replica is drawn
    once on the finest grid and subsampled, which leaves the law on every
    coarser grid exact. Replica i uses ``replica_rng(seed, i)``.
    """
    levels = [int(n) for n in levels]
    if replicas < 1:
        raise ValueError("replicas must be at least 1")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be increasing")
    finest = levels[-1]
    if any(finest % n for n in levels):
        raise ValueError("every level must divide the finest level")
    names = [getattr(m, "name", "") or f"modulus{i}" for i, m in enumerate(moduli)]
    stats = {name: np.zeros((len(levels), replicas)) for name in names}
    for rep in range(replicas):
        path = _sample_finest(model, finest, replica_rng(seed, rep), length)
        for li, n in enumerate(levels):
            x = path[:: finest // n]
            h = length / n
            max_lag = int(math.floor(r_max / h * (1 + 1e-9)))
            if max_lag < 1:
                raise DomainError(f"r_max={r_max} is below the spacing of level {n}")
            incr = max_increments(x, max_lag)
            lags = h * np.arange(1, len(incr) + 1)
            for name, mod in zip(names, moduli):
                stats[name][li, rep] = _ratio_max(incr, lags, mod)
    return RefinementReport(model.to_dict(), levels, names, replicas, seed, r_max,
                            {k: v.tolist() for k, v in stats.items()})
