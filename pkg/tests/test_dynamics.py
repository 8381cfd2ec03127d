import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinbench.core import Orientation
from spinbench.dynamics import (
    ELECTRON_FLIPFLOP,
    NUCLEAR_FLIPFLOP,
    FlipFlopModel,
    SlrModel,
    boltzmann_populations,
    effective_g,
    effective_zeeman_temperature,
    flipflop_rate,
    flipflop_t2_us,
    flipflop_terms,
    flipflop_terms_cosh,
    nuclear_flipflop_rate,
    slr_rate,
    slr_t1,
    zeeman_temperature_from_frequency,
)

# Frozen from a 30-digit mpmath evaluation of the same closed forms with
# CODATA kB/h = 20.836619123 GHz/K and T_1 = h*9.56 GHz/kB.
T1_ZEEMAN = 0.458807637821
E_RATE_01, E_T2_01 = 8.52210146179, 117.341949575
E_RATE_09, E_T2_09 = 22.3696641308, 44.7033980552
N_T2_01, N_T2_09 = 1057.8662915, 165.073908374
SLR_T1_01, SLR_T1_09, SLR_T1_X1 = 28.7348990278, 7.31708906051, 22.3341394708
POP_UP_01, POP_UP_T1 = 0.0100699715758, 0.26894142137

SLR = SlrModel(0.0341, 9.56)


def test_frozen_values_match_mpmath():
    """Recompute the frozen constants above at 30 digits."""
    with mpmath.workdps(30):
        kb = mpmath.mpf("20.836619123")
        t1 = mpmath.mpf("9.56") / kb
        ti = [t1, mpmath.mpf("5.19"), mpmath.mpf("5.91"), mpmath.mpf("7.35")]

        def rate(c, d, T):
            T = mpmath.mpf(T)
            return c * sum(1 / ((1 + mpmath.exp(x / T)) * (1 + mpmath.exp(-x / T))) for x in ti) + d

        def slr(T):
            return 1 / (mpmath.mpf("0.0341") * mpmath.coth(mpmath.mpf("9.56") / (2 * kb * mpmath.mpf(T))))

        e01 = rate(mpmath.mpf("60.4"), mpmath.mpf("7.92"), "0.1")
        e09 = rate(mpmath.mpf("60.4"), mpmath.mpf("7.92"), "0.9")
        n01 = rate(mpmath.mpf("22.3"), mpmath.mpf("0.723"), "0.1")
        n09 = rate(mpmath.mpf("22.3"), mpmath.mpf("0.723"), "0.9")
        up01 = 1 / (1 + mpmath.exp(t1 / mpmath.mpf("0.1")))
        oracle = {
            T1_ZEEMAN: t1, E_RATE_01: e01, E_T2_01: 1000 / e01, E_RATE_09: e09, E_T2_09: 1000 / e09,
            N_T2_01: 1000 / n01, N_T2_09: 1000 / n09, SLR_T1_01: slr("0.1"), SLR_T1_09: slr("0.9"),
            SLR_T1_X1: 1 / (mpmath.mpf("0.0341") * mpmath.coth(1)), POP_UP_01: up01,
            POP_UP_T1: 1 / (1 + mpmath.e),
        }
        for frozen, exact in oracle.items():
            assert frozen == pytest.approx(float(exact), rel=1e-10)


def test_zeeman_temperature_from_frequency():
    assert zeeman_temperature_from_frequency(9.56) == pytest.approx(T1_ZEEMAN, rel=1e-9)
    assert ELECTRON_FLIPFLOP.zeeman_temperatures[0] == pytest.approx(T1_ZEEMAN, rel=1e-9)


def test_boltzmann_examples():
    e = [0.0, 9560.0]
    assert boltzmann_populations(e, 0.1)[1] == pytest.approx(POP_UP_01, rel=1e-9)
    assert boltzmann_populations(e, T1_ZEEMAN)[1] == pytest.approx(POP_UP_T1, rel=1e-9)
    p = boltzmann_populations(np.linspace(0, 5e4, 16), 1e9)
    np.testing.assert_allclose(p, 1 / 16, atol=1e-9)
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            boltzmann_populations(e, bad)


@given(st.lists(st.floats(-1e5, 1e5), min_size=2, max_size=16, unique=True), st.floats(1e-3, 1e3))
def test_population_invariants(energies, T):
    p = boltzmann_populations(energies, T)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1) < 1e-12
    assert p[np.argmin(energies)] == p.max()


def test_effective_g():
    assert effective_g(2 * np.eye(3), Orientation.from_plane("bD1", 33).direction) == pytest.approx(2.0)
    assert effective_g(np.diag([2.0, 4, 8]), [0, 0, 1]) == pytest.approx(8.0)
    with pytest.raises(ValueError):
        effective_g(np.eye(3), [1, 1, 0])


def test_effective_zeeman_temperature():
    assert effective_zeeman_temperature(9.895, 781) == pytest.approx(5.19, rel=1e-3)
    assert effective_zeeman_temperature(3.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        effective_zeeman_temperature(3.0, -1.0)


def test_slr_examples():
    assert slr_t1(SLR, 1e-4) == pytest.approx(1 / 0.0341, rel=1e-12)
    assert slr_rate(SLR, 1e-4) == 0.0341
    assert slr_t1(SLR, 0.1) == pytest.approx(SLR_T1_01, rel=1e-9)
    assert slr_t1(SLR, 0.9) == pytest.approx(SLR_T1_09, rel=1e-9)
    assert slr_t1(SLR, 9.56 / (2 * 20.836619123)) == pytest.approx(SLR_T1_X1, rel=1e-8)
    assert slr_t1(SLR, 0.9) == pytest.approx(7.31, abs=0.01)
    with pytest.raises(ValueError):
        slr_rate(SLR, 0.0)
    with pytest.raises(ValueError):
        SlrModel(-1, 9.56)


def test_slr_large_argument_is_exact():
    # x = dE / 2 kB T far beyond 50 returns the prefactor exactly
    assert slr_rate(SlrModel(0.5, 100.0), 0.01) == 0.5


@given(st.floats(1e-3, 50), st.floats(1e-3, 50))
def test_slr_monotone(t_a, t_b):
    if t_a == t_b:
        return
    lo, hi = sorted((t_a, t_b))
    assert slr_rate(SLR, lo) <= slr_rate(SLR, hi)


def test_slr_strictly_decreasing_t1_on_grid():
    t = np.linspace(0.1, 0.9, 81)
    assert np.all(np.diff(slr_t1(SLR, t)) < 0)


def test_flipflop_examples():
    assert flipflop_rate(ELECTRON_FLIPFLOP, 0.1) == pytest.approx(E_RATE_01, rel=1e-9)
    assert flipflop_t2_us(ELECTRON_FLIPFLOP, 0.1) == pytest.approx(E_T2_01, rel=1e-9)
    assert flipflop_rate(ELECTRON_FLIPFLOP, 0.9) == pytest.approx(E_RATE_09, rel=1e-9)
    assert flipflop_t2_us(ELECTRON_FLIPFLOP, 0.9) == pytest.approx(E_T2_09, rel=1e-9)
    assert 1e3 / nuclear_flipflop_rate(NUCLEAR_FLIPFLOP, 0.1) == pytest.approx(N_T2_01, rel=1e-9)
    assert 1e3 / nuclear_flipflop_rate(NUCLEAR_FLIPFLOP, 0.9) == pytest.approx(N_T2_09, rel=1e-9)


def test_flipflop_with_rounded_first_temperature():
    # T_1 rounded to 0.46 K reproduces the one-decimal model values
    e = FlipFlopModel(60.4, 7.92, (0.46, 5.19, 5.91, 7.35))
    n = FlipFlopModel(22.3, 0.723, (0.46, 5.19, 5.91, 7.35))
    assert flipflop_t2_us(e, 0.1) == pytest.approx(117.4, abs=0.05)
    assert flipflop_t2_us(n, 0.1) == pytest.approx(1061, abs=0.5)


def test_zero_coupling_is_flat():
    m = FlipFlopModel(0.0, 7.92, ELECTRON_FLIPFLOP.zeeman_temperatures)
    t = np.linspace(0.05, 5, 30)
    np.testing.assert_array_equal(flipflop_t2_us(m, t), np.full(30, 1e3 / 7.92))


def test_large_d_limit():
    m = FlipFlopModel(22.3, 1e9, NUCLEAR_FLIPFLOP.zeeman_temperatures)
    assert flipflop_rate(m, 0.5) == pytest.approx(1e9, rel=1e-7)


def test_flipflop_overflow_safe():
    terms = flipflop_terms([7.35], np.array([1e-3, 0.01]))
    assert np.all(np.isfinite(terms)) and terms[0, 0] == 0.0
    assert flipflop_rate(ELECTRON_FLIPFLOP, 1e-4) == pytest.approx(7.92, rel=1e-15)


@given(st.floats(1e-2, 100), st.lists(st.floats(0.01, 20), min_size=1, max_size=6))
def test_summand_forms_agree(T, ti):
    a = flipflop_terms(ti, T)
    b = flipflop_terms_cosh(ti, T)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


@given(st.floats(0.01, 50), st.floats(0.01, 50))
def test_flipflop_monotone_and_bounded(t_a, t_b):
    if t_a == t_b:
        return
    lo, hi = sorted((t_a, t_b))
    r_lo = flipflop_rate(ELECTRON_FLIPFLOP, lo)
    r_hi = flipflop_rate(ELECTRON_FLIPFLOP, hi)
    assert r_lo <= r_hi
    assert r_hi <= 60.4 * 4 / 4 + 7.92


def test_flipflop_strictly_increasing_on_grid():
    t = np.linspace(0.1, 0.9, 81)
    assert np.all(np.diff(flipflop_rate(ELECTRON_FLIPFLOP, t)) > 0)


def test_hot_subsites_small_below_0_9_k():
    hot = FlipFlopModel(60.4, 0.0, (1e6,) + ELECTRON_FLIPFLOP.zeeman_temperatures[1:])
    assert flipflop_rate(hot, np.linspace(0.1, 0.9, 9)).max() < 0.3


def test_model_validation():
    with pytest.raises(ValueError):
        FlipFlopModel(1.0, 1.0, (1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        FlipFlopModel(-1.0, 1.0, (1.0, 2.0, 3.0, 4.0))
    with pytest.raises(ValueError):
        FlipFlopModel(1.0, 1.0, (1.0, 2.0, 3.0, 0.0))
    with pytest.raises(ValueError):
        flipflop_rate(ELECTRON_FLIPFLOP, -0.1)


def test_literature_subsite_temperatures_are_contingent(er167):
    """Zeeman temperatures of the bundled subsites at 781 mT, 57 deg in bD1.

    Only sanity bounds are asserted; the values depend on the transcribed
    g matrices.
    """
    n = Orientation.from_plane("bD1", 57).direction
    temps = [effective_zeeman_temperature(effective_g(s.g_matrix, n), 781) for s in er167]
    assert all(0 < t < 15 for t in temps)
    assert math.isfinite(sum(temps))
