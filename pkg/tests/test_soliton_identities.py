import math
from dataclasses import replace

import numpy as np
import pytest

from solitonlab.soliton_identities import (
    QUANTITIES,
    RATE_BOUNDS,
    RATE_SLACK,
    check_gradient_identity,
    check_level_set_geometry,
    check_scalar_evolution,
    check_T_identity,
    check_trace_identity,
    curvature_fields,
    fit_asymptotic_rate,
    gauss_residual,
    identity_suite,
    rate_suite,
    tip_limits,
)
from solitonlab.warped_soliton import integrate_profile

WINDOW = (2.0, 100.0)


def test_identity_suite_passes(report):
    results = identity_suite(report, WINDOW)
    assert len(results) == 7
    for r in results:
        assert r.passed, (r.check, r.value)
        assert r.as_record()["pass"] is True


def test_individual_checks(report):
    assert check_scalar_evolution(report, WINDOW) <= 1e-6
    assert check_gradient_identity(report, WINDOW) <= 1e-6
    assert check_trace_identity(report, WINDOW) <= 1e-6
    assert max(check_T_identity(report, WINDOW)) <= 1e-6
    geo = check_level_set_geometry(report, WINDOW)
    assert max(geo.gauss, geo.gauss_soliton, geo.mean_curvature) <= 1e-6


def test_pure_gauss_equation_is_exact(report):
    mask = report.window_mask(WINDOW)
    assert np.max(np.abs(gauss_residual(report)[mask])) <= 1e-12


def test_empty_window_raises(report):
    with pytest.raises(ValueError):
        check_trace_identity(report, (1e9, 2e9))


@pytest.fixture(scope="module")
def corrupted_function(profile):
    """phi replaced by 1.01 phi as a function (value and derivative)."""
    return curvature_fields(replace(profile, phi=profile.phi * 1.01, phi_prime=profile.phi_prime * 1.01))


@pytest.fixture(scope="module")
def corrupted_column(profile):
    """Only the stored phi samples scaled by 1.01."""
    return curvature_fields(replace(profile, phi=profile.phi * 1.01))


def test_corruption_is_detected(corrupted_function, corrupted_column):
    by_function = {r.check: r.value for r in identity_suite(corrupted_function, WINDOW)}
    by_column = {r.check: r.value for r in identity_suite(corrupted_column, WINDOW)}
    for name in by_function:
        assert max(by_function[name], by_column[name]) >= 1e-3, name
    assert by_column["scalar_evolution"] >= 1e-3


def test_trace_identity_blind_to_rescaling(corrupted_function):
    # Only phi'/phi enters the trace identity.
    assert check_trace_identity(corrupted_function, WINDOW) <= 1e-6


def test_rate_bounds(report):
    fits = rate_suite(report)
    for name, bound in RATE_BOUNDS.items():
        assert fits[name].exponent <= bound + RATE_SLACK, name


def test_rate_exponents_stable_under_tolerance_halving(expansion, report):
    half = curvature_fields(integrate_profile(expansion, tolerance=5e-11))
    for name in RATE_BOUNDS:
        a = fit_asymptotic_rate(report, name).exponent
        b = fit_asymptotic_rate(half, name).exponent
        assert abs(a - b) <= 0.02, name


def test_roundness_vanishes_for_rotational_symmetry(report):
    fit = fit_asymptotic_rate(report, "roundness_l2")
    assert fit.vanishes and fit.exponent == -math.inf


def test_fR_approaches_one(report):
    fit = fit_asymptotic_rate(report, "fR_minus_1")
    assert fit.rms_residual < 0.05
    i = np.argmin(np.abs(report.f - 1e3))
    assert abs(report.f[i] * report.R[i] - 1) <= 0.178


@pytest.mark.parametrize("window", [(50.0, 1e4), (1e3, 1e2), (1e2, 1e9)])
def test_rate_window_validation(report, window):
    with pytest.raises(ValueError):
        fit_asymptotic_rate(report, "grad_R", window)


def test_unknown_quantity(report):
    with pytest.raises(ValueError):
        fit_asymptotic_rate(report, "nope")
    assert "warp_drift" in QUANTITIES


def test_tip_limits_exact(expansion):
    lim = tip_limits(expansion)
    assert lim["R"] == pytest.approx(1.0, abs=1e-15)
    assert lim["sec_rad"] == pytest.approx(1 / 6, abs=1e-15)
    assert lim["sec_sph"] == pytest.approx(1 / 6, abs=1e-15)
    # R'' = -2/9 so Delta R = 3 R''(0) = -2/3 balances 2|Ric|^2 = 2/3.
    assert lim["R_second"] == pytest.approx(-2 / 9, abs=1e-14)
    assert lim["laplacian_R"] + lim["two_ric_norm_sq"] == pytest.approx(0.0, abs=1e-14)
    assert lim["gradient_residual"] == 0.0


def test_tip_limits_match_grid_near_tip(expansion, report):
    lim = tip_limits(expansion, float(report.s[0]))
    assert lim["R"] == pytest.approx(report.R[0], abs=1e-9)
    assert lim["sec_sph"] == pytest.approx(report.sec_sph[0], abs=1e-8)
