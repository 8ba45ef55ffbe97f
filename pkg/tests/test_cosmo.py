import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import constants as sc

from pairtrap import cosmo
from pairtrap import gaussian as g
from pairtrap import ramps
from pairtrap.errors import DomainError, TachyonicWindowError, UnmappableModeError

H = 1.0


def spec(kind, **kw):
    return cosmo.ScenarioSpec(kind, **kw)


def test_vector_field_static_is_constant():
    s = spec("vector_field", k=3.0, mass=4.0)
    prof = cosmo.compile(s, (0.0, 1.0), 101)
    np.testing.assert_allclose(prof.omega, 5.0, rtol=1e-15)


def test_vector_field_si_units():
    m, k = sc.m_e, 1e6
    s = spec("vector_field", k=k, mass=m, natural_units=False)
    w2 = cosmo.omega_squared(s, np.array([0.0]))
    assert w2[0] == pytest.approx((sc.c * k) ** 2 + (m * sc.c**2 / sc.hbar) ** 2, rel=1e-14)


@given(st.floats(-5.0, 5.0), st.floats(0.1, 10.0))
def test_de_sitter_proper_potential(t, hubble):
    hist = cosmo.de_sitter_proper(hubble)
    assert cosmo.proper_potential(hist, t) == pytest.approx(-2.25 * hubble**2, rel=1e-12)


def test_flrw_kinds_formulas():
    t = np.linspace(-1.0, -0.1, 5)
    conf = spec("flrw_conformal", k=1.0, mass=2.0, scale={"preset": "de_sitter_conformal", "hubble": H})
    a = -1 / (H * t)
    np.testing.assert_allclose(cosmo.omega_squared(conf, t), 4 * a**2 + 1 - 2 / t**2, rtol=1e-13)
    tau = np.linspace(0.0, 2.0, 5)
    prop = spec("flrw_proper", k=1.0, mass=2.0, scale={"preset": "de_sitter_proper", "hubble": H})
    np.testing.assert_allclose(cosmo.omega_squared(prop, tau), 4 + np.exp(-2 * tau) - 2.25, rtol=1e-13)


def test_sauter_without_field_is_free_massive_mode():
    s = spec("sauter_schwinger", k=0.5, mass=1.0, charge=1.0, vector_potential={"preset": "sauter", "field": 0.0, "tau": 1.0})
    prof = cosmo.compile(s, (-3.0, 3.0), 61)
    np.testing.assert_allclose(prof.omega, math.sqrt(1.25), rtol=1e-15)
    assert cosmo.keldysh(1.0, 1.0, 1.0, 0.0, cosmo.NATURAL).gamma == math.inf


def test_sauter_pulse_shifts_momentum():
    s = spec("sauter_schwinger", k=0.0, mass=1.0, charge=1.0, vector_potential={"preset": "sauter", "field": 2.0, "tau": 0.5})
    t = np.array([-50.0, 50.0])
    # A -> +/- E0 tau at the pulse tails
    np.testing.assert_allclose(cosmo.omega_squared(s, t), 1.0 + 1.0, rtol=1e-12)


def test_sampled_vector_potential():
    t = np.linspace(0, 1, 21)
    s = spec("sauter_schwinger", k=1.0, mass=1.0, charge=1.0, vector_potential={"times": t.tolist(), "values": (0.5 * t).tolist()})
    np.testing.assert_allclose(cosmo.omega_squared(s, [0.0, 1.0]), [2.0, 1.25], rtol=1e-12)


def test_hawking_profile_and_cutoff():
    s = spec("hawking", k=1.0, mass=1.0, surface_gravity=2.0, hawking_cutoff=0.1)
    T = np.array([0.5, 1.0])
    np.testing.assert_allclose(cosmo.omega_squared(s, T), 1.0 + 1.0 / (2.0 * T) ** 2)
    with pytest.raises(DomainError):
        cosmo.compile(s, (0.01, 1.0))


def test_tachyonic_window_reports_interval():
    # m^2 = 0.25 < 9/4, so 0.25 + 4 e^{-2 tau} - 9/4 < 0 once tau > ln(2)/2
    s = spec("flrw_proper", k=2.0, mass=0.5, scale={"preset": "de_sitter_proper", "hubble": H})
    with pytest.raises(TachyonicWindowError) as exc:
        cosmo.compile(s, (0.0, 3.0), 3001)
    lo, hi = exc.value.interval
    assert lo == pytest.approx(0.5 * math.log(2), abs=1e-3)
    assert hi == pytest.approx(3.0)


def test_scenario_json_round_trip_and_unknown_fields():
    s = spec("flrw_conformal", k=1.0, mass=2.0, scale={"preset": "de_sitter_conformal", "hubble": H})
    back = cosmo.ScenarioSpec.from_dict(json.loads(s.to_json()))
    assert back.to_dict() == s.to_dict()
    with pytest.raises(DomainError):
        cosmo.ScenarioSpec.from_dict({"kind": "hawking", "colour": "red"})


def test_scenario_validation():
    with pytest.raises(DomainError):
        spec("wormhole")
    with pytest.raises(DomainError):
        spec("sauter_schwinger")
    with pytest.raises(DomainError):
        spec("vector_field", k=-1.0)


def test_sampled_scale_derivatives():
    t = np.linspace(0.0, 1.0, 401)
    a = np.exp(0.7 * t)
    hist = cosmo.sampled_scale(t, a)
    tm = np.linspace(0.1, 0.9, 9)
    np.testing.assert_allclose(hist.da(tm), 0.7 * np.exp(0.7 * tm), rtol=1e-6)
    np.testing.assert_allclose(hist.dda(tm), 0.49 * np.exp(0.7 * tm), rtol=1e-5)


def test_sampled_scale_rejects_bad_grid():
    with pytest.raises(DomainError):
        cosmo.sampled_scale([0, 1, 3, 4, 5], [1, 1, 1, 1, 1])
    with pytest.raises(DomainError):
        cosmo.sampled_scale([0, 1, 2, 3, 4], [1, 1, -1, 1, 1])


def test_tanh_expansion_limits():
    hist = cosmo.tanh_expansion(1.0, 3.0, 0.1)
    assert hist.a(-10.0) == pytest.approx(1.0) and hist.a(10.0) == pytest.approx(3.0)
    t, h = np.linspace(-0.5, 0.5, 11), 1e-5
    np.testing.assert_allclose(hist.da(t), (hist.a(t + h) - hist.a(t - h)) / (2 * h), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(hist.dda(t), (hist.da(t + h) - hist.da(t - h)) / (2 * h), rtol=1e-6, atol=1e-6)


def test_compiled_profile_feeds_gaussian_engine():
    s = spec("flrw_conformal", k=1.0, mass=2.0, scale={"preset": "de_sitter_conformal", "hubble": H})
    prof = cosmo.compile(s, (-1.0, -0.05))
    assert isinstance(prof, ramps.FrequencyProfile)
    tr = g.evolve(g.GaussianState.vacuum(prof.omega_initial), prof, t_eval=[prof.t_end])
    assert tr.final.cov.shape == (2, 2)


def test_pair_spectrum_decays_with_k():
    s = spec("flrw_conformal", mass=2.0, scale={"preset": "de_sitter_conformal", "hubble": H})
    n = cosmo.pair_spectrum(s, (-1.0, -0.05), [0.1, 1.0, 10.0, 50.0])
    assert np.all(n >= 0)
    assert np.all(np.diff(n) < 0)


def test_static_spacetime_creates_no_pairs():
    s = spec("vector_field", k=1.0, mass=1.0)
    np.testing.assert_allclose(cosmo.pair_spectrum(s, (0.0, 5.0), [0.5, 2.0]), 0.0, atol=1e-12)


# -- proper / conformal frames -----------------------------------------------


def _proper_time(eta):
    return -math.log(-H * eta) / H


@pytest.mark.parametrize("window", [(-1.0, -0.05), (-2.0, -0.5), (-0.5, -0.01)])
def test_de_sitter_frames_agree(window):
    k, m = 1.0, 2.0
    conf = spec("flrw_conformal", k=k, mass=m, scale={"preset": "de_sitter_conformal", "hubble": H})
    prop = spec("flrw_proper", k=k, mass=m, scale={"preset": "de_sitter_proper", "hubble": H})
    pc = cosmo.compile(conf, window)
    pp = cosmo.compile(prop, tuple(_proper_time(e) for e in window))
    a0, a1 = (-1 / (H * e) for e in window)
    raw = cosmo.proper_from_conformal_transfer(g.transfer(pc).S, pc.omega_initial, a0, H, a1, H)
    w0 = pp.omega_initial
    mapped = np.diag([1, 1 / w0]) @ raw @ np.diag([1, w0])
    direct = g.bogoliubov(g.transfer(pp), pp.omega_initial, pp.omega_final).n_pair
    via_conformal = g.bogoliubov(mapped, pp.omega_initial, pp.omega_final).n_pair
    assert direct > 0
    assert via_conformal == pytest.approx(direct, rel=1e-4)


def test_frame_map_is_unimodular():
    assert np.linalg.det(cosmo.conformal_to_proper(3.0, 0.7)) == pytest.approx(1.0, abs=1e-15)


# -- Keldysh -----------------------------------------------------------------


def test_keldysh_schwinger_field():
    E_s = sc.m_e**2 * sc.c**3 / (sc.e * sc.hbar)
    omega = 1.55 * sc.e / sc.hbar
    kr = cosmo.keldysh(omega, sc.m_e, sc.e, E_s)
    assert kr.gamma == pytest.approx(sc.hbar * omega / (sc.m_e * sc.c**2), rel=1e-12)
    assert kr.gamma == pytest.approx(3.03e-6, abs=0.01e-6)
    assert kr.regime == "tunneling"


def test_keldysh_linear_in_field():
    a = cosmo.keldysh(1.0, 1.0, 1.0, 2.0, cosmo.NATURAL).gamma
    b = cosmo.keldysh(1.0, 1.0, 1.0, 4.0, cosmo.NATURAL).gamma
    assert b == pytest.approx(a / 2)


def test_keldysh_regimes():
    assert cosmo.keldysh(10.0, 1.0, 1.0, 1.0, cosmo.NATURAL).regime == "multi-photon"
    assert cosmo.keldysh(1.0, 1.0, 1.0, 1.0, cosmo.NATURAL).regime == "crossover"
    with pytest.raises(DomainError):
        cosmo.keldysh(1.0, 1.0, 1.0, -1.0)


# -- analog maps -------------------------------------------------------------


@pytest.mark.parametrize("k", [0.0, 0.5, 2.0])
def test_vector_field_round_trip(k):
    s = spec("vector_field", k=k, mass=1.5, scale={"preset": "tanh", "a_initial": 1.0, "a_final": 4.0, "t_scale": 0.3})
    prof = cosmo.compile(s, (-2.0, 2.0), 401)
    amap = cosmo.trap_to_cosmo(prof, k, 1.5, cosmo.NATURAL)
    a_true = s.scale_history().a(prof.times)
    np.testing.assert_allclose(amap.values, a_true, rtol=1e-9)


def test_zero_k_efoldings_equal():
    prof = ramps.build_pulse(ramps.reference_pulse(), ramps.reference_calibration())
    amap = cosmo.trap_to_cosmo(prof, 0.0, sc.m_e)
    assert amap.e_foldings == pytest.approx(cosmo.e_foldings(prof.omega), rel=1e-12)


def test_pulse_efoldings_exceed_frequency_efoldings(ref_pulse_profile):
    prof = ref_pulse_profile
    w_min = float(prof.omega.min())
    ln_w = cosmo.e_foldings(prof.omega)
    assert ln_w == pytest.approx(math.log(5), rel=1e-6)
    for frac in (1e-3, 0.3, 0.9):
        k = frac * w_min / sc.c
        amap = cosmo.trap_to_cosmo(prof, k, sc.m_e)
        assert amap.e_foldings > ln_w
        assert amap.e_foldings > 1.609


def test_constant_profile_has_no_efoldings():
    prof = ramps.constant_profile(2 * math.pi * 1e6, 1e-6)
    assert cosmo.trap_to_cosmo(prof, 1e-3, sc.m_e).e_foldings == 0.0


def test_unmappable_mode():
    prof = ramps.constant_profile(2 * math.pi * 1e6, 1e-6)
    with pytest.raises(UnmappableModeError):
        cosmo.trap_to_cosmo(prof, 2 * math.pi * 1e6 / sc.c, sc.m_e)


def test_cosmo_to_trap_efoldings():
    s = spec("vector_field", k=1.0, mass=1.0, scale={"preset": "de_sitter_proper", "hubble": 1.0})
    amap = cosmo.cosmo_to_trap(s, (0.0, 2.0), 101)
    assert amap.e_foldings == pytest.approx(2.0, rel=1e-12)
    assert amap.to_csv().splitlines()[0] == "t_seconds,omega_rad_per_s"


# -- ion crystals ------------------------------------------------------------


def test_ion_modes():
    w_mf, w_lf = 2 * math.pi * 2.5e6, 2 * math.pi * 0.8e6
    lam = cosmo.two_ion_lambdas(w_lf)
    modes = cosmo.ion_mode_decomposition(w_mf, lam)
    assert modes[0] == w_mf
    assert modes[1] == pytest.approx(ramps.rocking_from_modes(w_mf, w_lf), rel=1e-14)
    assert modes[0] != modes[1]


def test_ion_mode_instability():
    with pytest.raises(DomainError):
        cosmo.ion_mode_decomposition(1.0, [-2.0])


def test_ion_modes_follow_common_drive():
    w = np.linspace(1.0, 3.0, 5)
    out = cosmo.ion_mode_decomposition(w, [0.0, -0.5])
    assert out.shape == (2, 5)
    np.testing.assert_allclose(out[0], w)
