import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logfield.errors import DomainError
from logfield.kernels import (LOG3D_PREFACTOR, Asymptote, CovarianceModel, F_log, G_3d,
                              G_3d_small_r_constant, L, brownian_ma_branches, metric_profile,
                              rho2_brownian_ma, rho2_log1d, rho2_log1d_from_F, rho2_powerlaw,
                              scale_anomaly_check)
from logfield.numerics import double_integral_oracle, log_diagonal, log_kernel

coord = st.floats(-20, 20, allow_nan=False)
width = st.floats(0.05, 10, allow_nan=False)


# --- Log1D -------------------------------------------------------------------

def test_L_is_continuous_at_zero():
    assert L(0.0) == 0.0
    assert abs(L(1e-8)) < 1e-14


@given(coord, width, coord, width)
def test_F_is_symmetric(a, w, c, h):
    assert F_log(a, a + w, c, c + h) == pytest.approx(F_log(c, c + h, a, a + w), rel=1e-12, abs=1e-12)


@given(coord, width, st.floats(0.1, 0.9), coord, width)
def test_F_is_additive_in_the_first_interval(a, w, t, c, h):
    m = a + t * w
    whole = F_log(a, a + w, c, c + h)
    split = F_log(a, m, c, c + h) + F_log(m, a + w, c, c + h)
    assert whole == pytest.approx(split, rel=1e-9, abs=1e-9)


@given(coord, width, coord, width, st.floats(0.01, 100))
def test_scale_anomaly_holds(a, w, c, h, lam):
    resid = scale_anomaly_check(a, a + w, c, c + h, lam)
    scale = lam ** 2 * (1 + abs(F_log(a, a + w, c, c + h)) + w * h * abs(math.log(lam)))
    assert abs(resid) <= 1e-11 * scale


def test_scale_anomaly_rejects_bad_lambda():
    with pytest.raises(DomainError):
        scale_anomaly_check(0, 1, 0, 1, 0.0)


@pytest.mark.parametrize("rect", [(0, 1, 2, 3), (-1, 0.5, 0, 2), (0, 3, 1, 2)])
def test_F_against_oracle(rect):
    oracle = double_integral_oracle(log_kernel, *rect, 8, diagonal=log_diagonal)
    assert F_log(*rect) == pytest.approx(oracle, abs=1e-10)


def test_log1d_known_values():
    assert rho2_log1d(1.0) == pytest.approx(4 * math.log(2), abs=1e-14)
    assert rho2_log1d(0.0) == 0.0


def test_log1d_series_meets_direct_formula():
    below, above = rho2_log1d(np.nextafter(0.05, 0)), rho2_log1d(0.05)
    assert below == pytest.approx(above, rel=1e-13)


def test_log1d_is_even():
    r = np.linspace(-3, 3, 61)
    np.testing.assert_allclose(rho2_log1d(r), rho2_log1d(-r), rtol=0, atol=0)


@pytest.mark.parametrize("r", [1e-2, 1e-3, 1e-5, 1e-8])
def test_log1d_small_r_leading_terms(r):
    # rho^2 = 3 r^2 - 2 r^2 log r + O(r^4)
    assert rho2_log1d(r) / (r * r * (3 - 2 * math.log(r))) == pytest.approx(1, abs=r * r)


def test_log1d_small_r_ratio_converges_slowly():
    # rho^2 / (r^2 (-log r^2)) = 1 + 3 / (2 log(1/r)): still 22% off at 1e-3
    for r in [1e-3, 1e-6, 1e-12]:
        ratio = rho2_log1d(r) / (r * r * -math.log(r * r))
        assert ratio == pytest.approx(1 + 3 / (2 * math.log(1 / r)), rel=1e-6)


@pytest.mark.parametrize("r", [10.0, 100.0, 1000.0])
def test_log1d_large_r(r):
    # L'' = 2 log r + 3 and the central difference is accurate to O(1/r^2)
    assert rho2_log1d(r) == pytest.approx(2 * math.log(r) + 3, abs=1 / r ** 2)


@settings(max_examples=50)
@given(st.floats(0.01, 10), st.sampled_from([0.05, 0.2, 1.0, 5.0]))
def test_log1d_from_F_is_s_independent(r, s):
    assert rho2_log1d_from_F(r, 0.0, s) == pytest.approx(rho2_log1d(r), rel=1e-9)


# --- Brownian families -------------------------------------------------------

def test_brownian_ma_values():
    assert rho2_brownian_ma(1.0) == pytest.approx(4 / 3, abs=1e-15)
    assert rho2_brownian_ma(2.0) == pytest.approx(10 / 3, abs=1e-15)


@pytest.mark.parametrize("s", [0.1, 1.0, 3.0])
def test_brownian_ma_branches_meet(s):
    near, far = brownian_ma_branches(s, s)
    assert near == pytest.approx(far, abs=1e-12)


@given(st.floats(0.01, 5), st.floats(0.1, 4), st.floats(0.1, 10))
def test_brownian_ma_scales_linearly(r, s, lam):
    assert rho2_brownian_ma(lam * r, lam * s) == pytest.approx(lam * rho2_brownian_ma(r, s), rel=1e-12)


def test_brownian_ma_rejects_bad_width():
    with pytest.raises(DomainError):
        rho2_brownian_ma(1.0, 0.0)


def _oracle_variogram(alpha, r, s=1.0):
    sign = 1.0 if -1 < alpha < 0 else -1.0
    k = lambda x, y: sign * np.abs(x - y) ** alpha
    own = double_integral_oracle(k, 0, s, 0, s, 8)
    cross = double_integral_oracle(k, 0, s, r, r + s, 8)
    return 2 * (own - cross) / s ** 2


@pytest.mark.parametrize("alpha", [1.5, 0.5, -0.5, -0.9])
@pytest.mark.parametrize("r", [0.05, 0.3, 1.0, 2.5])
def test_powerlaw_against_oracle(alpha, r):
    assert rho2_powerlaw(r, alpha) == pytest.approx(_oracle_variogram(alpha, r), rel=1e-7)


@pytest.mark.parametrize("r", [0.01, 0.5, 1.0, 3.0])
def test_powerlaw_alpha_one_is_brownian_ma(r):
    assert rho2_powerlaw(r, 1.0) == pytest.approx(rho2_brownian_ma(r), rel=1e-12)


@pytest.mark.parametrize("alpha", [1.5, 0.5, -0.5, -1.0, -1.5])
def test_powerlaw_series_meets_direct_formula(alpha):
    below, above = rho2_powerlaw(np.nextafter(0.1, 0), alpha), rho2_powerlaw(0.1, alpha)
    assert below == pytest.approx(above, rel=1e-9)


@pytest.mark.parametrize("alpha", [0.5, -0.5, -1.5])
def test_powerlaw_small_r_exponent(alpha):
    r = np.array([1e-6, 1e-5])
    slope = np.diff(np.log(rho2_powerlaw(r, alpha))) / np.diff(np.log(r))
    assert slope[0] == pytest.approx(min(2.0, alpha + 2), abs=1e-3)


def test_powerlaw_alpha_minus_one_has_log():
    r = np.array([1e-8, 1e-4])
    vals = rho2_powerlaw(r, -1.0) / (r * np.log(1 / r))
    assert vals[0] == pytest.approx(vals[1], rel=0.15)


@pytest.mark.parametrize("alpha", [0.0, -2.0, -3.0, float("nan")])
def test_powerlaw_rejects_bad_alpha(alpha):
    with pytest.raises(DomainError):
        rho2_powerlaw(0.5, alpha)


# --- 3D ----------------------------------------------------------------------

def test_g3d_small_r_constant_is_one_over_24():
    assert G_3d_small_r_constant() == pytest.approx(1 / 24, rel=1e-9)


@pytest.mark.parametrize("r", [1e-3, 3e-3, 1e-2])
def test_g3d_small_r(r):
    assert G_3d(r) / r ** 2 == pytest.approx(1 / 24, rel=1e-3)


def test_g3d_large_r_slope_is_one_ninth():
    # [sin k - k cos k]^2 ~ k^6 / 9 near 0, so G ~ log(r) / 9
    slope = (G_3d(1000.0) - G_3d(100.0)) / math.log(10)
    assert slope == pytest.approx(1 / 9, rel=1e-3)


def test_g3d_increasing():
    vals = [G_3d(r) for r in [0.1, 0.5, 1, 2, 5]]
    assert np.all(np.diff(vals) > 0)


def test_log3d_prefactor_matches_point_limit():
    # far apart, two unit balls of volume V see 2 V^2 log r
    V = 4 * math.pi / 3
    r1, r2 = 200.0, 400.0
    growth = LOG3D_PREFACTOR * (G_3d(r2) - G_3d(r1))
    assert growth == pytest.approx(2 * V ** 2 * math.log(r2 / r1), rel=1e-3)


# --- models and profiles -------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"family": "PowerLaw"}, {"family": "Log1D", "alpha": 0.5},
    {"family": "BrownianMA", "width_s": 0.0}, {"family": "PowerLaw", "alpha": -2.0},
])
def test_model_validation(kwargs):
    with pytest.raises(DomainError):
        CovarianceModel(**kwargs)


def test_unknown_family():
    with pytest.raises(ValueError):
        CovarianceModel("Log2D")


@pytest.mark.parametrize("model", [
    CovarianceModel("Log1D"), CovarianceModel("PowerLaw", alpha=-0.5, width_s=2.0),
    CovarianceModel("BrownianMA", width_s=0.3),
])
def test_model_round_trip(model):
    assert CovarianceModel.from_dict(model.to_dict()) == model


@pytest.mark.parametrize("model, asym", [
    (CovarianceModel("Log1D"), Asymptote.R_SQRT_LOG),
    (CovarianceModel("Brownian"), Asymptote.SQRT),
    (CovarianceModel("BrownianMA"), Asymptote.LINEAR),
    (CovarianceModel("PowerLaw", alpha=-1.0), Asymptote.SQRT_R_LOG),
    (CovarianceModel("PowerLaw", alpha=-0.5), Asymptote.POWER_HALF_ALPHA_PLUS_ONE),
])
def test_model_asymptotes(model, asym):
    assert model.asymptote is asym


@pytest.mark.parametrize("model", [
    CovarianceModel("Log1D"), CovarianceModel("Brownian"), CovarianceModel("BrownianMA"),
    CovarianceModel("PowerLaw", alpha=0.5), CovarianceModel("PowerLaw", alpha=-1.5),
])
def test_profiles_are_metrics(model):
    p = metric_profile(model, np.linspace(0, 4, 81))
    assert p.subadditivity_slack >= 0
    mono = p.r_grid <= p.monotone_up_to
    assert np.all(np.diff(p.rho_values[mono]) >= 0)
    assert p.to_rows()[0] == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("grid", [[0.1], [0.2, 0.1, 0.3], [-0.1, 0.5]])
def test_profile_rejects_bad_grids(grid):
    with pytest.raises(DomainError):
        metric_profile(CovarianceModel("Log1D"), grid)


def test_profile_rejects_non_metric():
    class Squared:
        # rho = r^2 is not subadditive
        closed_form, asymptote, width_s = True, Asymptote.LINEAR, 1.0

        def rho2(self, r):
            return np.asarray(r, dtype=float) ** 4

    with pytest.raises(DomainError):
        metric_profile(Squared(), np.linspace(0, 1, 11))


@given(st.floats(1e-6, 0.99))
def test_rho_inverse_round_trip(r):
    p = metric_profile(CovarianceModel("Log1D"), np.geomspace(1e-6, 1, 20))
    assert p.rho_inverse(p.rho(r)) == pytest.approx(r, rel=1e-9)


def test_log3d_profile_interpolates():
    model = CovarianceModel("Log3D")
    p = metric_profile(model, np.geomspace(1e-2, 1, 9))
    r = 0.1 * math.sqrt(2)
    assert p.rho(r) == pytest.approx(math.sqrt(model.rho2(r)), rel=2e-3)
    # rho ~ r below the tabulated range
    assert p.rho(1e-4) == pytest.approx(p.rho(1e-2) * 1e-2, rel=1e-12)
    with pytest.raises(DomainError):
        p.rho(2.0)


def test_anticorrelated_powerlaw_peaks_at_window_width():
    p = metric_profile(CovarianceModel("PowerLaw", alpha=-1.5), np.linspace(0, 4, 81))
    assert p.monotone_up_to == pytest.approx(1.0)
    assert rho2_powerlaw(4.0, -1.5) < rho2_powerlaw(1.0, -1.5)
