import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinbench.constants import DEFAULT_CONSTANTS
from spinbench.core import Orientation, SpinSystem, field_vector, make_subsite_family
from spinbench.hamiltonian import diagonalize
from spinbench.spectra import (
    ResonanceSearchWarning,
    StickSpectrum,
    apparent_g,
    classify,
    enumerate_transitions,
    moment_matrix,
    moment_operator,
    nmr_transitions,
    resonance_fields,
    rotation_pattern,
    transition_dipole,
)

from conftest import iso_system, random_er_like

MU_B = DEFAULT_CONSTANTS.mu_b_mhz_per_mt


def analytic_field(g, nu_ghz):
    return 1e3 * nu_ghz / (g * MU_B)


def test_classify():
    assert classify(1, 0) == "allowed"
    assert classify(-1, 1) == "forbidden"
    assert classify(1, -1) == "forbidden"
    assert classify(1, 2) == "other"
    assert classify(0, 1) == "other"


def test_iso_moment_is_one():
    s = iso_system()
    eig = diagonalize(s, [0, 0, 350.0])
    assert transition_dipole(eig, 0, 1, s, [1, 0, 0]) == pytest.approx(1.0, abs=1e-12)
    assert transition_dipole(eig, 0, 1, s, [0, 1, 0]) == pytest.approx(1.0, abs=1e-12)


def test_e_perp_must_be_perpendicular_and_unit():
    s = iso_system()
    eig = diagonalize(s, [0, 0, 350.0])
    with pytest.raises(ValueError):
        transition_dipole(eig, 0, 1, s, [0, 0, 1], field_direction=[0, 0, 1])
    with pytest.raises(ValueError):
        transition_dipole(eig, 0, 1, s, [0, 1e-8, 1], field_direction=[0, 0, 1])
    with pytest.raises(ValueError):
        transition_dipole(eig, 0, 1, s, [2, 0, 0])
    with pytest.raises(ValueError):
        transition_dipole(eig, 0, 0, s, [1, 0, 0])


def test_decoupled_nucleus_has_no_forbidden_intensity():
    rng = np.random.default_rng(5)
    s0 = random_er_like(rng)
    s = SpinSystem(0.5, 3.5, s0.g_matrix, np.zeros((3, 3)), np.zeros((3, 3)), g_n=s0.g_n)
    o = Orientation.from_plane("bD1", 40)
    eig = diagonalize(s, field_vector(o, 300))
    trs = enumerate_transitions(eig, s, o.default_e_perp(), moment_floor=0.0)
    forb = [t for t in trs if t.delta_MI != 0]
    # zero up to eigenvector round-off, eps * |H| / (nuclear Zeeman gap) ~ 1e-11
    assert forb and max(t.dipole_moment for t in forb) < 1e-9
    assert sum(t.kind == "allowed" for t in trs) == 8


def test_i0_single_transition():
    s = iso_system()
    eig = diagonalize(s, [0, 0, 350.0])
    trs = enumerate_transitions(eig, s, [1, 0, 0])
    assert len(trs) == 1 and trs[0].kind == "allowed"
    assert trs[0].frequency == pytest.approx(2 * MU_B * 350, rel=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_moment_symmetric_and_sum_rule(seed):
    rng = np.random.default_rng(seed)
    s = random_er_like(rng)
    o = Orientation.from_plane("bD2", rng.uniform(0, 180))
    e = o.default_e_perp()
    eig = diagonalize(s, field_vector(o, rng.uniform(50, 800)))
    m = moment_matrix(eig, s, e)
    np.testing.assert_array_equal(m, m.T)
    assert transition_dipole(eig, 3, 12, s, e) == transition_dipole(eig, 12, 3, s, e)
    op = moment_operator(s, e)
    v = eig.states
    diag = np.real(np.einsum("ai,ab,bc,ci->i", v.conj(), op, op, v))
    np.testing.assert_allclose((m**2).sum(axis=1), diag, atol=1e-8)


@given(st.integers(0, 2**32 - 1))
def test_generic_mixing_counts(seed):
    rng = np.random.default_rng(seed)
    s = random_er_like(rng)
    o = Orientation.from_vector(rng.normal(size=3))
    eig = diagonalize(s, field_vector(o, rng.uniform(100, 600)))
    trs = enumerate_transitions(eig, s, o.default_e_perp())
    assert sum(t.kind == "allowed" for t in trs) == 8
    assert sum(t.kind == "forbidden" for t in trs) == 14
    for t in trs:
        assert t.frequency >= 0 and t.dipole_moment >= 1e-4
        assert abs(t.delta_MS) == 1


def test_nmr_transitions_share_ms():
    rng = np.random.default_rng(2)
    s = random_er_like(rng)
    eig = diagonalize(s, [100.0, 0, 500.0])
    trs = nmr_transitions(eig)
    assert len(trs) == 14
    assert all(t.delta_MS == 0 and abs(t.delta_MI) == 1 for t in trs)


@pytest.mark.parametrize("nu,expected", [(9.7974, 350.0), (9.56, 341.52)])
def test_isotropic_resonance(nu, expected):
    spec = resonance_fields(iso_system(), Orientation.from_plane("bD1", 0), nu, (100, 600))
    assert len(spec) == 1
    assert spec.lines[0].field_mT == pytest.approx(expected, abs=0.01)
    assert spec.lines[0].field_mT == pytest.approx(analytic_field(2, nu), abs=1e-4)
    assert spec.lines[0].moment == pytest.approx(1.0, abs=1e-9)


def test_spectrum_sorted_and_in_range(er167):
    o = Orientation.from_plane("bD1", 57)
    parts = [resonance_fields(s, o, 9.56, (200, 1400)) for s in er167]
    spec = StickSpectrum.merge(parts)
    assert np.all(np.diff(spec.fields) >= 0)
    assert np.all((spec.fields >= 200) & (spec.fields <= 1400))
    assert len(spec) <= 88


def test_rejects_bad_search_inputs():
    s = iso_system()
    o = Orientation.from_plane("bD1", 0)
    for rng in [(400, 300), (100, 100), (-5, 10)]:
        with pytest.raises(ValueError):
            resonance_fields(s, o, 9.56, rng)
    with pytest.raises(ValueError):
        resonance_fields(s, o, 9.56, (0, 100), grid_step=0)
    with pytest.raises(ValueError):
        resonance_fields(s, o, -1.0, (0, 100))


def test_close_roots_warn():
    # nuclear levels of one M_S manifold cross near 262 mT; a 20 kHz "carrier"
    # has two roots ~1 mT apart, closer than the 2 mT grid
    s = SpinSystem(0.5, 0.5, 2 * np.eye(3), np.diag([0, 0, 20.0]), g_n=5.0)
    o = Orientation.from_plane("bD1", 0)
    with pytest.warns(ResonanceSearchWarning, match="closer than grid step"):
        resonance_fields(s, o, 2e-5, (250, 280), grid_step=2.0, moment_floor=0.0, kinds=None)


def test_isotropic_rotation_is_flat():
    pat = rotation_pattern(iso_system(), "bD1", np.arange(0, 180, 15), 9.56, (300, 400))
    f = np.array([s.fields[0] for s in pat.spectra])
    assert np.ptp(f) < 1e-4
    assert all(len(s) == 1 for s in pat.spectra)


def test_axial_rotation_matches_effective_g():
    s = SpinSystem(0.5, 0, np.diag([2.0, 2.0, 8.0]))
    angles = np.arange(0, 180, 10.0)
    pat = rotation_pattern(s, "bD1", angles, 9.56, (50, 450))
    fields = np.array([sp.fields[0] for sp in pat.spectra])
    th = np.radians(angles)
    g = np.sqrt(64 * np.cos(th) ** 2 + 4 * np.sin(th) ** 2)
    np.testing.assert_allclose(fields, analytic_field(g, 9.56), atol=1e-3)
    half = fields[angles <= 90]
    assert np.all(np.diff(half) > 0)
    assert fields[0] == pytest.approx(analytic_field(8, 9.56), abs=1e-3)
    assert fields[9] == pytest.approx(analytic_field(2, 9.56), abs=1e-3)


def test_rotation_grid_validation():
    s = iso_system()
    for grid in ([0, 10, 10], [20, 10], [0, 180], [-1, 5], []):
        with pytest.raises(ValueError):
            rotation_pattern(s, "bD1", grid, 9.56, (300, 400))


def _fields(spec):
    return sorted((round(ln.lower_label[1] * 2), round(ln.upper_label[1] * 2), ln.field_mT) for ln in spec.lines)


def test_c2_partners_mirror_about_b(er_detected):
    fam = make_subsite_family(er_detected)
    for theta in (20.0, 57.0, 75.0):
        a = resonance_fields(fam.base, Orientation.from_plane("bD1", theta), 9.56, (0, 1500))
        b = resonance_fields(fam.partner, Orientation.from_plane("bD1", 180 - theta), 9.56, (0, 1500))
        assert len(a) == len(b) > 0
        np.testing.assert_allclose(a.fields, b.fields, atol=1e-3)
        np.testing.assert_allclose(a.moments, b.moments, atol=1e-6)


def test_c2_partners_coincide_along_b(er_detected):
    fam = make_subsite_family(er_detected)
    o = Orientation.from_plane("bD1", 0)
    a = resonance_fields(fam.base, o, 9.56, (0, 1500))
    b = resonance_fields(fam.partner, o, 9.56, (0, 1500))
    assert len(a) == len(b) > 0
    np.testing.assert_allclose(a.fields, b.fields, atol=0.05)


def test_rotation_warnings_carry_angle(monkeypatch):
    s = SpinSystem(0.5, 0.5, 2 * np.eye(3), np.diag([0, 0, 20.0]), g_n=5.0, site_label="x")
    with pytest.warns(ResonanceSearchWarning, match=r"^angle 0 deg"):
        rotation_pattern(s, "bD1", [0.0], 2e-5, (250, 280), grid_step=2.0, moment_floor=0.0, kinds=None)


def test_rotation_parallel_matches_serial(monkeypatch, er167):
    grid = [10.0, 50.0, 90.0]
    monkeypatch.setenv("SPINBENCH_THREADS", "1")
    serial = rotation_pattern(er167[:2], "D1D2", grid, 9.56, (0, 1500))
    monkeypatch.setenv("SPINBENCH_THREADS", "3")
    par = rotation_pattern(er167[:2], "D1D2", grid, 9.56, (0, 1500))
    assert serial.lines() == par.lines()
    monkeypatch.setenv("SPINBENCH_THREADS", "many")
    with pytest.raises(ValueError):
        rotation_pattern(er167[:2], "D1D2", grid, 9.56, (0, 1500))


def test_er167_forbidden_comparable_to_allowed(er_detected):
    o = Orientation.from_plane("bD1", 57)
    spec = resonance_fields(er_detected, o, 9.56, (0, 1500))
    allowed = [ln.moment for ln in spec.lines if ln.kind == "allowed"]
    forbidden = [ln.moment for ln in spec.lines if ln.kind == "forbidden"]
    assert (len(allowed), len(forbidden)) == (8, 14)
    assert max(forbidden) > 0.3 * max(allowed)


def test_apparent_g():
    assert apparent_g(350.0010372, 9.7974) == pytest.approx(2.0, rel=1e-6)
    # 9.56 GHz line at 781 mT
    assert apparent_g(781, 9.56) == pytest.approx(0.8746, abs=1e-4)


def test_spectrum_is_deterministic(er_detected):
    o = Orientation.from_plane("bD1", 30)
    a = resonance_fields(er_detected, o, 9.56, (0, 1500))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        b = resonance_fields(er_detected, o, 9.56, (0, 1500))
    assert a.lines == b.lines
    assert not math.isnan(a.lines[0].angle_deg)
