import dataclasses
import math

import numpy as np
import pytest

from quad_eit.exceptions import ConfigError, DomainError
from quad_eit.oracle import (
    DimensionlessParams,
    Scales,
    Trajectory,
    analytic_state,
    convergence_order,
    extract_harmonics,
    integrate_mean_field,
    nondimensionalize,
    verify_against_analytic,
)
from quad_eit.params import HBAR, solve
from quad_eit.response import probe_plus_coefficient

TWO_PI = 2 * math.pi


@pytest.fixture(scope='module')
def desk():
    return DimensionlessParams.desk_point()


@pytest.fixture(scope='module')
def verification(desk):
    report, trajectory = verify_against_analytic(desk, probe_ratios=(1e-3, 1e-4), keep_trajectory=True)
    return report, trajectory


def test_desk_point_working_point(desk):
    assert abs(desk.c0) ** 2 == pytest.approx(10.0)
    assert desk.alpha == pytest.approx(0.15)
    steady, _ = analytic_state(desk)
    assert steady.beta == pytest.approx(0.121, abs=1e-3)
    assert desk.Delta0_t + steady.beta == pytest.approx(desk.Delta_t)
    assert desk.eps_p_t / desk.eps_c_t == pytest.approx(1e-3)


def test_probe_ratio_guard(desk):
    with pytest.raises(ConfigError):
        dataclasses.replace(desk, eps_p_t=0.05 * desk.eps_c_t)


def test_step_size_guard(desk):
    with pytest.raises(ConfigError):
        integrate_mean_field(desk, tau_end=10.0, dtau=0.5)


def test_fixed_point_is_stationary():
    p = DimensionlessParams.desk_point(probe_ratio=0.0)
    traj = integrate_mean_field(p, tau_end=TWO_PI * 1000, dtau=TWO_PI / 200)
    assert np.max(np.abs(traj.c - p.c0)) / abs(p.c0) < 1e-6
    assert np.max(np.abs(traj.u - p.u0)) / p.u0 < 1e-6
    assert np.max(np.abs(traj.v - p.v0)) / p.v0 < 1e-6
    assert np.max(np.abs(traj.w)) < 1e-6 * p.v0


def test_rk4_convergence_order():
    p = DimensionlessParams.desk_point(probe_ratio=1e-2)
    order = convergence_order(p, tau_end=TWO_PI * 4, dtau=TWO_PI / 120, initial=(0j, p.v0, p.v0, 0.0))
    assert 3.0 < order < 5.0


def test_uncoupled_system_relaxes_to_free_values():
    p = DimensionlessParams(
        kappa_t=1.0, gamma_t=0.5, delta_t=2.2, Delta0_t=1.5, Delta_t=1.5,
        g_t=0.0, eps_c_t=2.0, eps_p_t=0.0, n_th=3.0,
    )
    traj = integrate_mean_field(p, tau_end=100.0, dtau=0.05, initial=(0j, 0.5, 0.5, 0.0))
    assert traj.c[-1] == pytest.approx(2.0 / complex(1.0, 1.5), abs=1e-8)
    assert traj.u[-1] == pytest.approx(3.5, abs=1e-8)
    assert traj.v[-1] == pytest.approx(3.5, abs=1e-8)
    assert traj.w[-1] == pytest.approx(0.0, abs=1e-8)


def test_conjugate_closure_matches_reduced_system(desk):
    reduced = integrate_mean_field(desk, tau_end=TWO_PI * 10, dtau=TWO_PI / 200)
    full = integrate_mean_field(desk, tau_end=TWO_PI * 10, dtau=TWO_PI / 200, carry_conjugate=True)
    assert np.allclose(full.c_dagger, np.conj(full.c), rtol=0, atol=1e-10)
    assert np.allclose(full.c, reduced.c, rtol=0, atol=1e-10)
    assert np.allclose(full.u, reduced.u, rtol=0, atol=1e-9)


def test_extract_harmonics_recovers_synthetic_tones(desk):
    delta_t = desk.delta_t
    tau = np.arange(0, 60 * 200 + 1) * (TWO_PI / delta_t / 200)
    fwd, back = np.exp(-1j * delta_t * tau), np.exp(1j * delta_t * tau)
    c = 3 + 1j + (0.02 - 0.01j) * fwd + (0.005 + 0.003j) * back
    u = 8.0 + 2 * np.real((0.01 + 0.02j) * fwd)
    traj = Trajectory(params=desk, tau=tau, c=c, u=u, v=np.full_like(tau, 10.5), w=np.zeros_like(tau))
    h = extract_harmonics(traj, delta_t, window_cycles=40)
    assert h['c'].A0 == pytest.approx(3 + 1j, abs=1e-10)
    assert h.c_plus == pytest.approx((0.02 - 0.01j) / desk.eps_p_t, rel=1e-8)
    assert h.c_minus == pytest.approx((0.005 + 0.003j) / desk.eps_p_t, rel=1e-8)
    # real variables have conjugate sidebands
    assert h['u'].A_minus == pytest.approx(np.conj(h['u'].A_plus), abs=1e-12)
    assert h.X0 == pytest.approx(8.0)
    assert h.Y0 == pytest.approx(10.5)
    assert not h.poor_separation


def test_extract_harmonics_rejects_short_windows(desk):
    traj = integrate_mean_field(desk, tau_end=TWO_PI * 2, dtau=TWO_PI / 200)
    with pytest.raises(DomainError):
        extract_harmonics(traj, desk.delta_t, window_cycles=10)
    with pytest.raises(DomainError):
        extract_harmonics(traj, desk.delta_t, window_cycles=20)


def test_oracle_matches_closed_form(verification):
    report, _ = verification
    for result in report.results:
        assert result.error_plus <= result.tolerance
        assert result.error_minus <= result.tolerance
    assert report.passed


def test_oracle_error_shrinks_with_probe_strength(verification):
    report, _ = verification
    strong, weak = sorted(report.results, key=lambda r: r.probe_ratio, reverse=True)
    for attr in ('error_plus', 'error_minus'):
        e_strong, e_weak = getattr(strong, attr), getattr(weak, attr)
        assert e_weak <= e_strong / 3 or max(e_strong, e_weak) < 1e-6


def test_trajectory_stays_positive(verification):
    _, traj = verification
    assert np.all(traj.u > 0)
    assert np.all(traj.v > 0)
    frame = traj.to_frame()
    assert list(frame.columns) == ['tau', 're_c', 'im_c', 'u', 'v', 'w']


def test_nondimensionalize_set2(set2_run):
    cfg = set2_run.physical
    rates, steady = solve(cfg)
    p = nondimensionalize(cfg, rates, steady, 2.3 * cfg.omega_m)
    assert p.alpha == pytest.approx(steady.alpha, rel=1e-12)
    assert p.u0 == pytest.approx(steady.X0 * cfg.mass * cfg.omega_m / HBAR, rel=1e-12)
    assert p.Delta0_t + p.g_t * p.u0 == pytest.approx(steady.Delta / cfg.omega_m, rel=1e-12)
    # scaled c+ is ω_m times the SI coefficient
    s_steady, s_rates = analytic_state(p)
    scaled = probe_plus_coefficient(p.delta_t, s_steady, s_rates)
    si = probe_plus_coefficient(2.3 * cfg.omega_m, steady, rates)
    scales = Scales(omega_m=cfg.omega_m, mass=cfg.mass)
    assert scales.probe_coefficient_to_si(scaled) == pytest.approx(si, rel=1e-9)
    assert scales.probe_coefficient_from_si(scales.probe_coefficient_to_si(scaled)) == pytest.approx(scaled, rel=1e-14)
    assert p.u0 * scales.q2 == pytest.approx(steady.X0, rel=1e-12)
    assert p.v0 * scales.p2 == pytest.approx(steady.Y0, rel=1e-12)


def test_integrated_moments_have_conjugate_sidebands(verification, desk):
    _, traj = verification
    h = extract_harmonics(traj, desk.delta_t, window_cycles=40)
    for name in ('u', 'v', 'w'):
        fit = h[name]
        assert abs(fit.A_plus) > 0
        assert fit.A_minus == pytest.approx(np.conj(fit.A_plus), rel=1e-6, abs=1e-12)
    assert h['c_dagger'].A_plus == pytest.approx(np.conj(h['c'].A_minus), rel=1e-6, abs=1e-12)


def test_transient_trajectory_is_flagged(desk, caplog):
    period = TWO_PI / desk.delta_t
    traj = integrate_mean_field(desk, tau_end=25 * period, dtau=period / 200, initial=(0j, desk.v0, desk.v0, 0.0))
    with caplog.at_level('WARNING', logger='quad_eit.oracle'):
        h = extract_harmonics(traj, desk.delta_t, window_cycles=20)
    assert h.poor_separation
    assert 'poor harmonic separation' in caplog.text
