import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import polynomial as npoly

import shuntlab as sl
from helpers import tuned
from oracles import least_squares_normal_equations
from shuntlab.freq_analysis import resonant_band

TAUS = (0.01, 0.1, 0.5)


def peak_ratio(model, Y_mod, Y, tau, n=20001):
    """Highest delayed modified peak over the highest nominal peak."""
    lo, hi = resonant_band(model.kc)
    w = np.linspace(lo, hi, n) * model.omega_sc
    nom = max(a for _, a in sl.closed_loop_frf(model, Y, omega=w).peaks())
    mod = max(a for _, a in sl.closed_loop_frf(model, Y_mod, sl.DelayModel.zoh(tau), omega=w).peaks())
    return mod / nom


# -- system assembly ----------------------------------------------------------------

def test_zero_delay_gives_zero_rhs():
    m, _, Y = tuned(0.1)
    P, d = sl.build_modification_system(Y, sl.nominal_poles(m, Y), 0.0)
    assert P.shape == (8, 3)
    assert np.all(d == 0.0)


def test_conjugate_poles_give_conjugate_rows():
    m, _, Y = tuned(0.1)
    poles = sl.nominal_poles(m, Y)
    P, d = sl.build_modification_system(Y, poles, 0.3, stack=False)
    for k, p in enumerate(poles):
        j = int(np.argmin(np.abs(poles - np.conj(p))))
        np.testing.assert_allclose(P[j], np.conj(P[k]), rtol=1e-12, atol=1e-14)
        assert d[j] == pytest.approx(np.conj(d[k]), rel=1e-12, abs=1e-14)
    Ps, _ = sl.build_modification_system(Y, poles, 0.3)
    assert np.linalg.matrix_rank(Ps) <= len(poles)


@given(st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=3))
def test_rows_match_direct_substitution(delta):
    # with the nominal pole p, 1 + H(p) = 0, so the delayed modified loop
    # vanishes at p exactly when A_mod(p)/A(p) - Z(p) B_mod(p)/B(p) = 0
    m, _, Y = tuned(0.1)
    tau = 0.5
    poles = sl.nominal_poles(m, Y)
    P, d = sl.build_modification_system(Y, poles, tau, stack=False)
    delta = np.asarray(delta)
    b, a = np.asarray(Y.num), np.asarray(Y.den)
    bm, am = b * (1 + delta[:1]), a * (1 + delta[1:])
    for k, p in enumerate(poles):
        z = (1 - np.exp(-tau * p)) / (tau * p)
        direct = npoly.polyval(p, am) / npoly.polyval(p, a) - z * npoly.polyval(p, bm) / npoly.polyval(p, b)
        assert d[k] - P[k] @ delta == pytest.approx(direct, abs=1e-12)


def test_singular_configuration():
    Y = sl.RationalTF([1.0, 1.0], [1.0, 1.0, 1.0])
    with pytest.raises(sl.SingularConfigurationError):
        sl.build_modification_system(Y, [-1.0 + 0j], 0.1)


def test_negative_delay_rejected():
    _, _, Y = tuned(0.1)
    with pytest.raises(sl.DomainError):
        sl.build_modification_system(Y, [-0.1 + 1j], -0.1)


# -- least-squares solve ------------------------------------------------------------

def test_zero_delay_gives_zero_factors():
    m, s, Y = tuned(0.05)
    Y_mod, f, _ = sl.stabilize(m, Y, 0.0)
    assert np.all(f.stacked == 0.0) and f.residual_norm == 0.0
    assert Y_mod == Y


@pytest.mark.parametrize("pinned", [0, 1, 2])
def test_matches_normal_equations(pinned):
    m, _, Y = tuned(0.1)
    P, d = sl.build_modification_system(Y, sl.nominal_poles(m, Y), 0.2)
    f = sl.solve_modification(P, d, 1, pinned)
    expected = least_squares_normal_equations(P, d, pinned)
    np.testing.assert_allclose(f.stacked, expected, rtol=1e-10, atol=1e-12)
    assert f.stacked[pinned] == 0.0
    assert f.residual_norm == pytest.approx(np.linalg.norm(P @ expected - d), rel=1e-8)


@pytest.mark.parametrize("tau", [0.05, 0.3, 0.7])
def test_complex_and_stacked_solutions_agree(tau):
    m, _, Y = tuned(0.1)
    poles = sl.nominal_poles(m, Y)
    fc = sl.solve_modification(*sl.build_modification_system(Y, poles, tau, stack=False), 1)
    fr = sl.solve_modification(*sl.build_modification_system(Y, poles, tau), 1)
    assert np.isrealobj(fc.stacked)
    np.testing.assert_allclose(fc.stacked, fr.stacked, rtol=1e-12, atol=1e-12)


def test_invalid_pin():
    P, d = np.eye(3), np.ones(3)
    with pytest.raises(sl.DomainError):
        sl.solve_modification(P, d, 1, 3)


def test_rank_deficient_system_flagged():
    P = np.array([[1.0, 1.0, 2.0], [2.0, 2.0, 4.0]])
    f = sl.solve_modification(P, np.array([1.0, 2.0]), 1, 0)
    assert f.degenerate and f.rank == 1
    # minimum-norm: the two remaining columns are identical up to scale
    assert f.stacked[2] == pytest.approx(2 * f.stacked[1], rel=1e-12)


def test_peak_restored_at_moderate_delay():
    m, _, Y = tuned(0.1)
    Y_mod, _, _ = sl.stabilize(m, Y, 0.1)
    assert abs(peak_ratio(m, Y_mod, Y, 0.1) - 1) < 0.05


def test_exact_placement_when_square():
    # biproper second-order admittance: five poles, five free factors
    m = sl.PiezoModel.normalized(0.1)
    Y = sl.RationalTF([1.0, 0.3, 0.05], [8.0, 1.0, 0.2])
    poles = sl.nominal_poles(m, Y)
    assert poles.size == 5
    Y_mod, f, _ = sl.stabilize(m, Y, 0.05)
    assert not f.degenerate and f.residual_norm < 1e-10
    chk = sl.verify_pole_placement(m, Y_mod, 0.05, poles)
    assert chk.converged.all()
    assert np.all(chk.displacement <= 1e-8 * np.abs(poles))


# -- applying factors -----------------------------------------------------------------

def test_apply_zero_factors_is_identity():
    Y = sl.RationalTF([1.0], [2961.0, 105.7])
    f = sl.ModificationFactors((0.0,), (0.0, 0.0), 0, 0.0)
    assert sl.apply_modification(Y, f) == Y


def test_apply_halves_resistance():
    Y = sl.RationalTF([1.0], [2961.0, 105.7])
    f = sl.ModificationFactors((0.0,), (-0.5, 0.0), 0, 0.0)
    assert sl.apply_modification(Y, f).den == (2961.0 / 2, 105.7)


def test_apply_rejects_vanishing_leading_coefficient():
    Y = sl.RationalTF([1.0], [2.0, 1.0])
    with pytest.raises(sl.DomainError):
        sl.apply_modification(Y, sl.ModificationFactors((0.0,), (0.0, -1.0), 0, 0.0))
    with pytest.raises(sl.DomainError):
        sl.apply_modification(Y, sl.ModificationFactors((0.0, 0.0), (0.0, 0.0), 0, 0.0))


@given(st.lists(st.floats(-0.9, 5.0), min_size=3, max_size=3))
def test_factor_round_trip(delta):
    Y = sl.RationalTF([0.7], [2961.0, 105.7])
    f = sl.ModificationFactors((0.0,), tuple(delta[1:]), 0, 0.0)
    back = sl.stabilization.factors_between(Y, sl.apply_modification(Y, f))
    np.testing.assert_allclose(back.stacked, f.stacked, rtol=0, atol=1e-14 * (1 + max(map(abs, delta))))


def test_sign_flip_flag():
    f = sl.ModificationFactors((0.0,), (-1.2, 0.3), 0, 0.0)
    assert f.sign_flips == (1,)


# -- verification -------------------------------------------------------------------

def test_zero_delay_placement_residuals():
    m, _, Y = tuned(0.1)
    Y_mod, _, poles = sl.stabilize(m, Y, 0.0)
    chk = sl.verify_pole_placement(m, Y_mod, 0.0, poles)
    assert np.all(chk.residuals < 1e-12)


def test_unmodified_admittance_at_critical_delay():
    m, _, Y = tuned(0.1)
    tau_c = sl.critical_delay_numeric(m, Y).tau_c
    chk = sl.verify_pole_placement(m, Y, tau_c, sl.nominal_poles(m, Y))
    assert chk.converged.all()
    # the pair on the axis sits at Re = 0 up to the solver tolerance
    assert chk.max_real >= -1e-9


@pytest.mark.parametrize("kc", [0.01, 0.1])
@pytest.mark.parametrize("tau", TAUS)
def test_modified_poles_stable(kc, tau):
    m, _, Y = tuned(kc)
    Y_mod, _, poles = sl.stabilize(m, Y, tau)
    chk = sl.verify_pole_placement(m, Y_mod, tau, poles)
    assert chk.converged.all()
    assert chk.max_real < 0


@pytest.mark.parametrize("kc", [0.01, 0.1])
@pytest.mark.parametrize("tau", TAUS)
def test_peak_relative_change_independent_of_coupling(kc, tau):
    other = 0.1 if kc == 0.01 else 0.01
    ratios = []
    for k in (kc, other):
        m, _, Y = tuned(k)
        ratios.append(peak_ratio(m, sl.stabilize(m, Y, tau)[0], Y, tau))
    assert ratios[0] == pytest.approx(ratios[1], rel=0.15)


def test_half_period_delay_peaks_within_ten_percent():
    # stated target for the largest modified delay; two free factors cannot
    # place four poles, and the least-squares compromise leaves the peaks
    # about 14% high whichever factor is pinned
    m, _, Y = tuned(0.1)
    Y_mod, _, _ = sl.stabilize(m, Y, 0.5)
    assert abs(peak_ratio(m, Y_mod, Y, 0.5) - 1) < 0.10
