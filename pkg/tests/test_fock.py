import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pairtrap import fock
from pairtrap import gaussian as g
from pairtrap import ramps
from pairtrap.errors import DomainError, TruncationError

W_HI, W_LO = 2.5 * ramps.MHZ, 0.5 * ramps.MHZ


def squeezed_vacuum_exact(r, n):
    """P_2m = (2m)! tanh^2m r / (4^m (m!)^2 cosh r), zero for odd n."""
    p = np.zeros(n + 1)
    for m in range(n // 2 + 1):
        p[2 * m] = math.factorial(2 * m) * math.tanh(r) ** (2 * m) / (4**m * math.factorial(m) ** 2 * math.cosh(r))
    return p


# -- state construction ------------------------------------------------------


def test_thermal_zero_is_vacuum():
    rho = fock.make_thermal(0.0, 20).rho
    assert rho[0, 0] == 1.0
    assert np.count_nonzero(rho) == 1


def test_thermal_residual_occupation():
    assert fock.make_thermal(0.03, 40).rho[0, 0].real == pytest.approx(1 / 1.03, rel=1e-14)
    assert 1 / 1.03 == pytest.approx(0.9709, abs=1e-4)


def test_thermal_unit_occupation_is_geometric():
    p = fock.pn(fock.make_thermal(1.0, 80)).p
    np.testing.assert_allclose(p[:20], 2.0 ** -(np.arange(20) + 1.0), rtol=1e-12)


def test_thermal_truncation_leak_raises():
    with pytest.raises(TruncationError) as exc:
        fock.make_thermal(5.0, 10)
    assert exc.value.leaked > 1e-8


def test_thermal_rejects_negative_occupation():
    with pytest.raises(DomainError):
        fock.make_thermal(-0.1, 10)


def test_squeezed_vacuum_ratio_and_parity():
    p = fock.pn(fock.squeeze(fock.vacuum(), 0.83)).p
    assert p[2] / p[0] == pytest.approx(0.5 * math.tanh(0.83) ** 2, rel=1e-10)
    assert p[2] / p[0] == pytest.approx(0.232, abs=1e-3)
    assert p[2] == pytest.approx(0.170, abs=1e-3)
    assert np.max(p[1::2]) < 1e-12


@pytest.mark.parametrize("r", [0.1, 0.5, 0.83, 1.0])
def test_squeezed_vacuum_matches_closed_form(r):
    p = fock.pn(fock.squeeze(fock.vacuum(), r)).p
    np.testing.assert_allclose(p[:30], squeezed_vacuum_exact(r, 29), atol=1e-12)
    np.testing.assert_allclose(fock.squeezed_vacuum_pn(r, 29), squeezed_vacuum_exact(r, 29), atol=1e-14)


def test_coherent_state_is_poisson():
    p = fock.pn(fock.displace(fock.vacuum(), 1.0)).p
    n = np.arange(15)
    expected = np.exp(-1.0) / np.array([math.factorial(k) for k in n])
    np.testing.assert_allclose(p[:15], expected, atol=1e-13)


def test_vacuum_distribution():
    p = fock.pn(fock.vacuum(10)).p
    assert p[0] == 1.0 and np.all(p[1:] == 0.0)


def test_experimental_state_even_dominance():
    p = fock.pn(fock.squeeze(fock.displace(fock.make_thermal(0.03), 0.29), 0.83)).p
    assert p[2] > p[1] and p[2] > p[3]
    assert p[4] > p[3] and p[4] > p[5]
    assert p.sum() == pytest.approx(1.0, abs=1e-9)


def test_displacement_leak_raises():
    with pytest.raises(TruncationError):
        fock.displace(fock.vacuum(20), 3.0)


xi_strategy = st.tuples(st.floats(0.0, 1.0), st.floats(-math.pi, math.pi))
alpha_strategy = st.tuples(st.floats(0.0, 1.5), st.floats(-math.pi, math.pi))


@given(xi_strategy, st.floats(0.0, 0.1))
def test_squeeze_inverse(xi, n_bar):
    v = fock.make_thermal(n_bar, fock.N_MAX_STATES)
    z = xi[0] * np.exp(1j * xi[1])
    back = fock.squeeze(fock.squeeze(v, z), -z)
    np.testing.assert_allclose(back.rho, v.rho, atol=1e-9)


@given(alpha_strategy, st.floats(0.0, 0.1))
def test_displace_inverse(alpha, n_bar):
    v = fock.make_thermal(n_bar, fock.N_MAX_STATES)
    a = alpha[0] * np.exp(1j * alpha[1])
    back = fock.displace(fock.displace(v, a), -a)
    np.testing.assert_allclose(back.rho, v.rho, atol=1e-9)


@given(xi_strategy, alpha_strategy, st.floats(0.0, 0.1))
def test_trace_and_hermiticity_preserved(xi, alpha, n_bar):
    s = fock.squeeze(fock.displace(fock.make_thermal(n_bar, 160), alpha[0] * np.exp(1j * alpha[1])), xi[0] * np.exp(1j * xi[1]))
    assert np.trace(s.rho).real == pytest.approx(1.0, abs=1e-9)
    assert np.max(np.abs(s.rho - s.rho.conj().T)) < 1e-12
    assert np.min(np.linalg.eigvalsh(s.rho)) > -1e-10


@given(xi_strategy)
def test_squeezed_vacuum_odd_populations_vanish(xi):
    p = fock.pn(fock.squeeze(fock.vacuum(), xi[0] * np.exp(1j * xi[1]))).p
    assert np.max(p[1::2]) < 1e-12


@pytest.mark.parametrize(
    "r, alpha, n_bar",
    [(0.0, 0.0, 0.03), (0.5, 0.0, 0.0), (0.83, 0.29, 0.03), (0.54, 0.88, 0.03), (1.0, 1.5, 0.03)],
)
def test_truncation_convergence(r, alpha, n_bar):
    def dist(n_max):
        return fock.pn(fock.squeeze(fock.displace(fock.make_thermal(n_bar, n_max), alpha), r)).p[:9]

    np.testing.assert_allclose(dist(fock.N_MAX_STATES), dist(2 * fock.N_MAX_STATES), atol=1e-8)


@pytest.mark.parametrize("r, theta, alpha, n_th", [(0.0, 0.0, 0.0, 0.0), (0.6, 0.7, 0.4 - 0.3j, 0.05), (0.9, -2.0, 1.1j, 0.0)])
def test_from_gaussian_reproduces_moments(r, theta, alpha, n_th):
    gs = g.GaussianState.squeezed(r, theta, 1.0, alpha=alpha, n_th=n_th)
    back = fock.quadrature_moments(fock.from_gaussian(gs))
    np.testing.assert_allclose(back.mean, gs.mean, atol=1e-10)
    np.testing.assert_allclose(back.cov, gs.cov, atol=1e-10)


# -- serialization -----------------------------------------------------------


def test_fock_state_json_round_trip():
    s = fock.squeeze(fock.displace(fock.make_thermal(0.03, 30), 0.2 + 0.1j), 0.3j)
    back = fock.FockState.from_json(s.to_json())
    np.testing.assert_array_equal(back.rho, s.rho)
    assert back.omega0 == s.omega0


def test_phonon_distribution_csv_round_trip(tmp_path):
    d = fock.PhononDistribution(np.array([0.7, 0.1, 0.2]), np.array([0.01, 0.02, 0.0]))
    path = tmp_path / "pn.csv"
    d.to_csv(path)
    back = fock.PhononDistribution.from_csv(path)
    np.testing.assert_array_equal(back.p, d.p)
    np.testing.assert_array_equal(back.sigma, d.sigma)


def test_phonon_distribution_rejects_negative():
    with pytest.raises(DomainError):
        fock.PhononDistribution(np.array([1.1, -0.1]))


# -- dynamics ----------------------------------------------------------------


@pytest.mark.parametrize("evolve", [fock.evolve_fixed_basis, fock.evolve_instantaneous_frame])
def test_constant_frequency_is_stationary(evolve):
    prof = ramps.constant_profile(W_HI, 2e-6)
    ft = evolve(fock.vacuum(20, W_HI), prof)
    np.testing.assert_allclose(ft.final.rho, fock.vacuum(20, W_HI).rho, atol=1e-10)
    np.testing.assert_allclose(ft.covs, np.broadcast_to(0.5 * np.eye(2), ft.covs.shape), atol=1e-10)


def test_frames_identical_at_constant_frequency():
    prof = ramps.constant_profile(W_LO, 1e-6)
    start = fock.squeeze(fock.make_thermal(0.03, 40, W_LO), 0.2)
    a = fock.evolve_fixed_basis(start, prof)
    b = fock.evolve_instantaneous_frame(start, prof)
    np.testing.assert_allclose(a.final.rho, b.final.rho, atol=1e-9)


@pytest.fixture(scope="module")
def pulse_results(ref_pulse_profile):
    prof = ref_pulse_profile
    drive = g.Drive.stray_field(11e-3)
    ends = prof.times[[0, -1]]
    gm = g.final_metrics(g.evolve(g.GaussianState.vacuum(prof.omega_initial), prof, drive))
    out = {}
    for evolve in (fock.evolve_fixed_basis, fock.evolve_instantaneous_frame):
        ft = evolve(fock.vacuum(fock.N_MAX_DYNAMICS, prof.omega_initial), prof, drive, t_eval=ends)
        out[evolve.__name__] = ft
    return gm, out


@pytest.mark.parametrize("name", ["evolve_fixed_basis", "evolve_instantaneous_frame"])
def test_pulse_matches_gaussian(pulse_results, name):
    gm, out = pulse_results
    st_ = out[name].state_moments(-1)
    assert g.squeeze_params(st_).r == pytest.approx(gm["r"], abs=1e-6)
    assert abs(g.displacement(st_)) == pytest.approx(gm["abs_alpha"], abs=1e-6)
    assert out[name].norm_drift < 1e-8


def test_frames_agree_on_pulse(pulse_results):
    _, out = pulse_results
    a = out["evolve_fixed_basis"].state_moments(-1)
    b = out["evolve_instantaneous_frame"].state_moments(-1)
    assert g.squeeze_params(a).r == pytest.approx(g.squeeze_params(b).r, abs=1e-6)
    assert abs(g.displacement(a)) == pytest.approx(abs(g.displacement(b)), abs=1e-6)


@pytest.mark.parametrize("evolve", [fock.evolve_fixed_basis, fock.evolve_instantaneous_frame])
def test_sudden_quench_pair_number(evolve):
    q = ramps.step_profile(W_HI, W_LO, 0.2e-6, 0.4e-6)
    ft = evolve(fock.vacuum(fock.N_MAX_DYNAMICS, W_HI), q, t_eval=q.times[[0, -1]])
    r = g.squeeze_params(ft.state_moments(-1).at_frequency(q.omega_final)).r
    assert math.sinh(r) ** 2 == pytest.approx(0.8, abs=1e-6)


@pytest.mark.slow
def test_adiabatic_ramp_instantaneous_frame(cal):
    prof = ramps.build_ramp(cal.voltage_for(W_LO), cal.voltage_for(W_HI), 100e-6, cal)
    ft = fock.evolve_instantaneous_frame(fock.vacuum(16, prof.omega_initial), prof, t_eval=[prof.t_end], to_fixed_frame=False)
    assert g.squeeze_params(ft.state_moments(-1)).r < 0.01


def test_leak_during_evolution_is_detected(ref_pulse_profile):
    # the final state of this run looks well truncated; the hold does not
    prof = ref_pulse_profile
    with pytest.raises(TruncationError):
        fock.evolve_fixed_basis(fock.vacuum(6, prof.omega_initial), prof, g.Drive.stray_field(11e-3), t_eval=[prof.t_end])
