import csv
import io
import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from switchlab.errors import ValidationError
from switchlab.schrodinger1d import (CRITICAL, DIRICHLET, NEUMANN, SUBCRITICAL, SUPERCRITICAL,
                                     CompactPotential, Problem1D, agmon_box, classify_comparison,
                                     comparison_bottom, critical_coupling, eigenvalues_1d, gamma_curve,
                                     gamma_minimum, gamma_p, indicator_well, neumann_cut_ground,
                                     power_potential, square_well_threshold)


def harmonic(t):
    return t ** 2


def test_oscillator_levels():
    res = eigenvalues_1d(Problem1D.whole_line(harmonic, 8.0, 0.02), 3)
    assert res.extrapolated
    assert np.allclose(res.values, [1, 3, 5], atol=1e-6, rtol=0)
    assert np.all(res.errors < 1e-3)


def test_observed_order_is_two():
    res = eigenvalues_1d(Problem1D.whole_line(harmonic, 8.0, 0.05), 2)
    # ratio of successive differences is 2^2 for a second-order scheme
    assert np.allclose(res.order, 4.0, atol=0.05)


def test_neumann_box_levels():
    k = 1.3
    res = eigenvalues_1d(Problem1D.interval(lambda t: 0 * t, k, NEUMANN, 0.01), 3)
    expected = [(n * math.pi / (2 * k)) ** 2 for n in range(3)]
    assert np.allclose(res.values, expected, atol=1e-8)


def test_dirichlet_box_levels():
    k = 1.3
    res = eigenvalues_1d(Problem1D.interval(lambda t: 0 * t, k, DIRICHLET, 0.01), 2)
    expected = [(n * math.pi / (2 * k)) ** 2 for n in (1, 2)]
    assert np.allclose(res.values, expected, atol=1e-8)


def test_problem_validation():
    with pytest.raises(ValueError):
        Problem1D(harmonic, 1.0, 1.0)
    with pytest.raises(ValueError):
        Problem1D(harmonic, 0.0, 1.0, h=0.0)
    with pytest.raises(ValueError):
        Problem1D(harmonic, 0.0, 1.0, boundary="robin")
    with pytest.raises(ValueError):
        eigenvalues_1d(Problem1D(harmonic, 0.0, 1.0), count=0)


def test_unresolved_grid_warns_and_returns_raw():
    # a wall far steeper than the grid step leaves the asymptotic regime
    prob = Problem1D.whole_line(power_potential(60.0), 1.3, 0.1)
    with pytest.warns(RuntimeWarning):
        res = eigenvalues_1d(prob, 1)
    assert not res.extrapolated
    assert np.array_equal(res.values, res.raw)


def test_gamma_two_is_one():
    assert gamma_p(2.0) == pytest.approx(1.0, abs=1e-6)


def airy_gamma_one():
    # -u'' + |t| u: the even ground state has u'(0) = 0, so gamma_1 = -a'_1
    return float(-mpmath.airyaizero(1, derivative=1))


def test_gamma_one_airy():
    assert gamma_p(1.0) == pytest.approx(airy_gamma_one(), abs=1e-7)


def test_gamma_minimum():
    p_min, g_min = gamma_minimum()
    assert g_min == pytest.approx(0.998995, abs=2e-4)
    assert p_min == pytest.approx(1.788, abs=0.02)
    assert gamma_p(p_min + 0.1) > g_min and gamma_p(p_min - 0.1) > g_min


def test_large_p_trend():
    ps = [5.0, 10.0, 20.0, 50.0, 100.0]
    g = [gamma_p(p) for p in ps]
    assert np.all(np.diff(g) > 0)
    # the approach to pi^2/4 is slow (a wall of finite steepness), so only
    # the bound and the shrinking distance are checked
    dist = math.pi ** 2 / 4 - np.array(g)
    assert np.all(dist > 0) and np.all(np.diff(dist) < 0)


def test_gamma_rejects_small_p():
    with pytest.raises(ValueError):
        gamma_p(0.5)


def test_box_grows_with_tolerance():
    assert agmon_box(2.0, 1e-12) > agmon_box(2.0, 1e-6)
    # doubling the box does not change the eigenvalue
    T = agmon_box(2.0, 1e-9)
    a = eigenvalues_1d(Problem1D.whole_line(harmonic, T, 0.01), 1).values[0]
    b = eigenvalues_1d(Problem1D.whole_line(harmonic, 2 * T, 0.01), 1).values[0]
    assert abs(a - b) < 1e-9


def test_gamma_continuity_in_p():
    coarse = np.array(gamma_curve(np.arange(1.0, 20.01, 1.0)))[:, 1]
    fine = np.array(gamma_curve(np.arange(1.0, 20.01, 0.5)))[:, 1]
    jump_c = np.abs(np.diff(coarse)).max()
    jump_f = np.abs(np.diff(fine)).max()
    assert jump_f < 0.6 * jump_c


@settings(max_examples=15)
@given(st.floats(1.0, 6.0), st.floats(0.3, 4.0))
def test_dirichlet_above_neumann(p, k):
    V = power_potential(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        d = eigenvalues_1d(Problem1D.interval(V, k, DIRICHLET, k / 200), 1)
        n = eigenvalues_1d(Problem1D.interval(V, k, NEUMANN, k / 200), 1)
    assert d.values[0] + d.errors[0] >= n.values[0] - n.errors[0]


def test_neumann_cut_converges():
    g = gamma_p(2.0)
    gaps = [abs(neumann_cut_ground(2.0, k) - g) for k in (2.0, 3.0, 4.0)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert abs(neumann_cut_ground(2.0, 10.0) - g) <= abs(neumann_cut_ground(2.0, 6.0) - g) + 1e-10


def test_neumann_cut_small_interval():
    # on a short interval the constant function dominates: value ~ mean of t^2
    val = neumann_cut_ground(2.0, 0.5)
    assert val < gamma_p(2.0)
    assert val == pytest.approx(0.5 ** 2 / 3, rel=0.02)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_neumann_cut_gap_decays_faster_than_power(p):
    g = gamma_p(p)
    ks = np.array([8.0, 10.0, 12.0])
    gaps = np.abs([neumann_cut_ground(p, k) - g for k in ks])
    scaled = gaps * ks ** (p / 2)
    noise = 1e-9
    # either the scaled gap keeps shrinking or it is already at rounding level
    assert np.all((np.diff(scaled) < 0) | (gaps[1:] < noise))
    assert scaled[-1] < 1e-3


def sharp_well_oracle(a=1.0, omega=1.0):
    # even zero-energy state: cos(q t) inside, exp(-omega |t|) outside, q^2 = lam - omega^2
    q = mpmath.findroot(lambda q: q * mpmath.tan(q * a) - omega, 0.8)
    return float(omega ** 2 + q ** 2)


def test_well_threshold_matches_matching_condition():
    V = indicator_well(1.0, 0.01)
    oracle = sharp_well_oracle()
    assert square_well_threshold() == pytest.approx(oracle, abs=1e-12)
    assert critical_coupling(V, 1.0) == pytest.approx(oracle, abs=1e-4)


def test_doubling_potential_halves_threshold():
    V = indicator_well(1.0, 0.01)
    V2 = CompactPotential(lambda t: 2 * V(t), V.a, scale=V.scale)
    assert critical_coupling(V2, 1.0) == pytest.approx(critical_coupling(V, 1.0) / 2, rel=1e-8)


def test_threshold_brackets_zero():
    V = indicator_well(1.0, 0.01)
    lc = critical_coupling(V, 1.0)
    assert comparison_bottom(V, 1.0, lc - 1e-3) > 0
    assert comparison_bottom(V, 1.0, lc + 1e-3) < 0


def test_classification_regimes():
    V = indicator_well(1.0, 0.01)
    free = classify_comparison(V, 1.0, 0.0)
    assert free.regime == SUBCRITICAL
    assert free.bottom == pytest.approx(1.0, abs=1e-12)
    assert classify_comparison(V, 1.0, 3.0).regime == SUPERCRITICAL
    at = classify_comparison(V, 1.0, free.lam_crit, atol=1e-6)
    assert at.regime == CRITICAL


def test_raw_indicator_rejected():
    V = CompactPotential(lambda t: (np.abs(t) <= 1.0).astype(float), 1.0)
    with pytest.raises(ValidationError):
        V.validate()


def test_negative_or_wide_potential_rejected():
    with pytest.raises(ValidationError):
        CompactPotential(lambda t: -np.exp(-t ** 2), 1.0).validate()
    with pytest.raises(ValidationError):
        CompactPotential(lambda t: np.exp(-t ** 2), 1.0).validate()


def test_gamma_curve_csv_export(tmp_path):
    from switchlab.io import Table, dump_csv, parse_csv
    rows = gamma_curve([1.0, 2.0])
    text = dump_csv(Table("gamma", {"p_grid": "1:2:1"}, ["p", "gamma", "error"], rows))
    table = parse_csv(text)
    assert table.column("p") == [1.0, 2.0]
    assert table.column("gamma")[1] == pytest.approx(1.0, abs=1e-9)
    assert list(csv.reader(io.StringIO(text.splitlines()[-1])))[0][0] == "2"
