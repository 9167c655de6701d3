"""Direct integration of the mean-value equations as an independent check.

Everything here runs in scaled units: time in 1/ω_m, ⟨q²⟩ in ħ/(mω_m),
⟨p²⟩ in mħω_m, ⟨qp+pq⟩ in ħ, rates and drive amplitudes divided by ω_m.
State variables are u = ⟨q²⟩mω_m/ħ, v = ⟨p²⟩/(mħω_m), w = ⟨qp+pq⟩/ħ.
"""
from __future__ import annotations
import cmath
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .exceptions import ConfigError, DomainError
from .integrator import rk4_integrate
from .params import HBAR, DerivedRates, PhysicalConfig, SteadyState, bare_detuning
from .response import probe_minus_coefficient, probe_plus_coefficient

logger = logging.getLogger(__name__)

MAX_PROBE_RATIO = 1e-2
MIN_WINDOW_CYCLES = 20
STEPS_PER_FASTEST_PERIOD = 50


@dataclass(frozen=True)
class DimensionlessParams:
    """Scaled parameters of the mean-value system.

    ``Delta_t`` is the effective detuning Δ/ω_m belonging to ``Delta0_t``;
    the builders keep the two consistent (Δ_t = Δ₀_t + g̃·u₀).
    """
    kappa_t: float
    gamma_t: float
    delta_t: float
    Delta0_t: float
    Delta_t: float
    g_t: float
    eps_c_t: float
    eps_p_t: float
    n_th: float

    def __post_init__(self) -> None:
        for name in ('kappa_t', 'gamma_t', 'g_t', 'eps_c_t', 'eps_p_t', 'n_th'):
            if getattr(self, name) < 0:
                raise DomainError(f'{name} must be non-negative (got {getattr(self, name)})')
        if self.eps_c_t > 0 and self.eps_p_t > MAX_PROBE_RATIO * self.eps_c_t * (1.0 + 1e-12):
            raise ConfigError(
                f'probe too strong for first-order comparison: eps_p/eps_c = {self.eps_p_t / self.eps_c_t:.3g} > {MAX_PROBE_RATIO}'
            )

    @classmethod
    def desk_point(
        cls,
        kappa_t: float = 1.6,
        gamma_t: float = 0.05,
        alpha: float = 0.15,
        n_th: float = 10.0,
        Delta_t: float = 2.0,
        delta_t: float = 2.2,
        photon_number: float = 10.0,
        probe_ratio: float = 1e-3,
    ) -> 'DimensionlessParams':
        if photon_number <= 0:
            raise DomainError(f'photon_number must be positive (got {photon_number})')
        eps_c_t = math.sqrt(photon_number * (kappa_t ** 2 + Delta_t ** 2))
        g_t = alpha / photon_number
        u0 = (1.0 + 2.0 * n_th) / (2.0 * (1.0 + 2.0 * alpha))
        return cls(
            kappa_t=kappa_t,
            gamma_t=gamma_t,
            delta_t=delta_t,
            Delta0_t=Delta_t - g_t * u0,
            Delta_t=Delta_t,
            g_t=g_t,
            eps_c_t=eps_c_t,
            eps_p_t=probe_ratio * eps_c_t,
            n_th=n_th,
        )

    @property
    def c0(self) -> complex:
        return self.eps_c_t / complex(self.kappa_t, self.Delta_t)

    @property
    def alpha(self) -> float:
        return self.g_t * abs(self.c0) ** 2

    @property
    def v0(self) -> float:
        return (1.0 + 2.0 * self.n_th) / 2.0

    @property
    def u0(self) -> float:
        return self.v0 / (1.0 + 2.0 * self.alpha)

    @property
    def max_dtau(self) -> float:
        fastest = max(1.0, self.kappa_t, abs(self.Delta0_t), self.delta_t)
        return 2.0 * math.pi / (STEPS_PER_FASTEST_PERIOD * fastest)


@dataclass(frozen=True)
class Scales:
    """Conversion between scaled oracle quantities and SI."""
    omega_m: float
    mass: float

    @property
    def q2(self) -> float:
        return HBAR / (self.mass * self.omega_m)

    @property
    def p2(self) -> float:
        return self.mass * HBAR * self.omega_m

    def probe_coefficient_to_si(self, value):
        # ⟨c⟩ = ε_p c₊ and ε_p is scaled by ω_m, so c₊ carries one factor of 1/ω_m
        return value / self.omega_m

    def probe_coefficient_from_si(self, value):
        return value * self.omega_m


def nondimensionalize(cfg: PhysicalConfig, rates: DerivedRates, steady: SteadyState, delta: float) -> DimensionlessParams:
    """Scale an SI configuration (already solved) at probe detuning ``delta`` rad/s."""
    wm = cfg.omega_m
    return DimensionlessParams(
        kappa_t=rates.kappa / wm,
        gamma_t=cfg.gamma_m / wm,
        delta_t=delta / wm,
        Delta0_t=bare_detuning(steady, wm) / wm,
        Delta_t=steady.Delta / wm,
        g_t=HBAR * rates.g / (cfg.mass * wm ** 2),
        eps_c_t=rates.eps_c / wm,
        eps_p_t=rates.eps_p / wm,
        n_th=rates.n_th,
    )


def analytic_state(p: DimensionlessParams) -> Tuple[SteadyState, DerivedRates]:
    """Closed-form steady state and rates in scaled units (ω_m = 1, ħ = m = 1)."""
    c0 = p.c0
    alpha = p.alpha
    steady = SteadyState(
        c0=c0,
        photon_number=abs(c0) ** 2,
        X0=p.u0,
        Y0=p.v0,
        Z0=0.0,
        alpha=alpha,
        beta=p.g_t * p.u0,
        Delta=p.Delta_t,
    )
    rates = DerivedRates(
        omega_c=math.nan,
        kappa=p.kappa_t,
        g=p.g_t,
        eps_c=p.eps_c_t,
        eps_p=p.eps_p_t,
        n_th=p.n_th,
        quality=1.0 / p.gamma_t if p.gamma_t > 0 else math.inf,
        omega_m=1.0,
        gamma_m=p.gamma_t,
    )
    return steady, rates


@dataclass(frozen=True)
class Trajectory:
    params: DimensionlessParams
    tau: np.ndarray
    c: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    c_dagger: Optional[np.ndarray] = None

    @property
    def dtau(self) -> float:
        return float(self.tau[1] - self.tau[0])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'tau': self.tau,
            're_c': self.c.real,
            'im_c': self.c.imag,
            'u': self.u,
            'v': self.v,
            'w': self.w,
        })


def _reduced_rhs(p: DimensionlessParams):
    kappa, gamma, g = p.kappa_t, p.gamma_t, p.g_t
    detuning, eps_c, eps_p, probe = p.Delta0_t, p.eps_c_t, p.eps_p_t, p.delta_t
    bath = gamma * (1.0 + 2.0 * p.n_th)

    def rhs(tau: float, y: np.ndarray) -> np.ndarray:
        cr, ci, u, v, w = y.tolist()
        c = complex(cr, ci)
        stiffness = 1.0 + 2.0 * g * (cr * cr + ci * ci)
        dc = -(kappa + 1j * (detuning + g * u)) * c + eps_c + eps_p * cmath.exp(-1j * probe * tau)
        return np.array([
            dc.real,
            dc.imag,
            w,
            -stiffness * w - 2.0 * gamma * v + bath,
            2.0 * v - 2.0 * stiffness * u - gamma * w,
        ])

    return rhs


def _conjugate_rhs(p: DimensionlessParams):
    kappa, gamma, g = p.kappa_t, p.gamma_t, p.g_t
    detuning, eps_c, eps_p, probe = p.Delta0_t, p.eps_c_t, p.eps_p_t, p.delta_t
    bath = gamma * (1.0 + 2.0 * p.n_th)

    def rhs(tau: float, y: np.ndarray) -> np.ndarray:
        c, cd, u, v, w = y.tolist()
        stiffness = 1.0 + 2.0 * g * cd * c
        shift = detuning + g * u
        return np.array([
            -(kappa + 1j * shift) * c + eps_c + eps_p * cmath.exp(-1j * probe * tau),
            -(kappa - 1j * shift) * cd + eps_c + eps_p * cmath.exp(1j * probe * tau),
            w,
            -stiffness * w - 2.0 * gamma * v + bath,
            2.0 * v - 2.0 * stiffness * u - gamma * w,
        ], dtype=complex)

    return rhs


def integrate_mean_field(
    p: DimensionlessParams,
    tau_end: float,
    dtau: float,
    initial: Optional[Tuple[complex, float, float, float]] = None,
    carry_conjugate: bool = False,
) -> Trajectory:
    """Fixed-step RK4 integration of the five mean-value equations.

    ``initial`` is (⟨c⟩, u, v, w); the default is the analytic steady state.
    """
    if dtau <= 0 or dtau > p.max_dtau * (1.0 + 1e-12):
        raise ConfigError(f'dtau={dtau:.6g} exceeds the stability limit {p.max_dtau:.6g}')
    if p.gamma_t > 0 and tau_end < 10.0 / p.gamma_t:
        logger.warning('tau_end=%.4g is shorter than 10/gamma_t=%.4g; transients may persist', tau_end, 10.0 / p.gamma_t)
    n_steps = int(round(tau_end / dtau))
    if n_steps < 1:
        raise ConfigError(f'tau_end={tau_end} shorter than one step')
    c_init, u_init, v_init, w_init = initial if initial is not None else (p.c0, p.u0, p.v0, 0.0)
    logger.info('integrating %d RK4 steps (dtau=%.4g, tau_end=%.4g)', n_steps, dtau, n_steps * dtau)

    if carry_conjugate:
        y0 = np.array([c_init, np.conj(c_init), u_init, v_init, w_init], dtype=complex)
        tau, states = rk4_integrate(_conjugate_rhs(p), y0, n_steps, dtau)
        return Trajectory(
            params=p, tau=tau, c=states[:, 0], u=states[:, 2].real,
            v=states[:, 3].real, w=states[:, 4].real, c_dagger=states[:, 1],
        )

    c_init = complex(c_init)
    y0 = np.array([c_init.real, c_init.imag, u_init, v_init, w_init], dtype=float)
    tau, states = rk4_integrate(_reduced_rhs(p), y0, n_steps, dtau)
    return Trajectory(
        params=p, tau=tau, c=states[:, 0] + 1j * states[:, 1],
        u=states[:, 2], v=states[:, 3], w=states[:, 4],
    )


@dataclass(frozen=True)
class Harmonic:
    """Fit A₀ + A₊e^{-iδτ} + A₋e^{+iδτ} of one variable."""
    A0: complex
    A_plus: complex
    A_minus: complex
    residual_rms: float


@dataclass(frozen=True)
class HarmonicDecomposition:
    harmonics: Dict[str, Harmonic]
    eps_p_t: float
    poor_separation: bool = False

    def __getitem__(self, name: str) -> Harmonic:
        return self.harmonics[name]

    def _per_probe(self, value: complex) -> complex:
        if self.eps_p_t == 0:
            return complex('nan')
        return value / self.eps_p_t

    @property
    def c0(self) -> complex:
        return self['c'].A0

    @property
    def c_plus(self) -> complex:
        return self._per_probe(self['c'].A_plus)

    @property
    def c_minus(self) -> complex:
        return self._per_probe(self['c'].A_minus)

    @property
    def X0(self) -> float:
        return self['u'].A0.real

    @property
    def X_plus(self) -> complex:
        return self._per_probe(self['u'].A_plus)

    @property
    def X_minus(self) -> complex:
        return self._per_probe(self['u'].A_minus)

    @property
    def Y0(self) -> float:
        return self['v'].A0.real

    @property
    def Y_plus(self) -> complex:
        return self._per_probe(self['v'].A_plus)

    @property
    def Y_minus(self) -> complex:
        return self._per_probe(self['v'].A_minus)

    @property
    def Z0(self) -> float:
        return self['w'].A0.real

    @property
    def Z_plus(self) -> complex:
        return self._per_probe(self['w'].A_plus)

    @property
    def Z_minus(self) -> complex:
        return self._per_probe(self['w'].A_minus)

    @property
    def residual_rms(self) -> float:
        return max(h.residual_rms for h in self.harmonics.values())


def fit_harmonics(tau: np.ndarray, values: np.ndarray, delta_t: float) -> Harmonic:
    """Least-squares lock-in at ±δ plus a constant."""
    basis = np.column_stack([
        np.ones_like(tau, dtype=complex),
        np.exp(-1j * delta_t * tau),
        np.exp(1j * delta_t * tau),
    ])
    y = np.asarray(values, dtype=complex)
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    residual = y - basis @ coef
    return Harmonic(
        A0=complex(coef[0]),
        A_plus=complex(coef[1]),
        A_minus=complex(coef[2]),
        residual_rms=float(np.sqrt(np.mean(np.abs(residual) ** 2))),
    )


def _expected_level(h: Harmonic) -> float:
    # second-order products of the sidebands plus a round-off floor
    scale = max(abs(h.A0), np.finfo(float).tiny)
    return (abs(h.A_plus) + abs(h.A_minus)) ** 2 / scale + 1e-9 * max(abs(h.A0), 1.0)


def extract_harmonics(traj: Trajectory, delta_t: float, window_cycles: int) -> HarmonicDecomposition:
    """Fit the tail window of ``window_cycles`` probe periods for every variable."""
    if window_cycles < MIN_WINDOW_CYCLES:
        raise DomainError(f'window_cycles must be at least {MIN_WINDOW_CYCLES} (got {window_cycles})')
    if delta_t <= 0:
        raise DomainError(f'delta_t must be positive (got {delta_t})')
    n_window = int(round(window_cycles * 2.0 * math.pi / delta_t / traj.dtau))
    if n_window + 1 > len(traj.tau):
        raise DomainError(
            f'analysis window of {window_cycles} cycles ({n_window} samples) exceeds the trajectory ({len(traj.tau)} samples)'
        )
    tail = slice(len(traj.tau) - n_window, None)
    tau = traj.tau[tail]
    c_dagger = traj.c_dagger if traj.c_dagger is not None else np.conj(traj.c)
    series = {'c': traj.c, 'c_dagger': c_dagger, 'u': traj.u, 'v': traj.v, 'w': traj.w}
    harmonics = {name: fit_harmonics(tau, values[tail], delta_t) for name, values in series.items()}
    poor = [name for name, h in harmonics.items() if h.residual_rms > 10.0 * _expected_level(h)]
    if poor:
        logger.warning('poor harmonic separation for %s', ', '.join(poor))
    return HarmonicDecomposition(harmonics=harmonics, eps_p_t=traj.params.eps_p_t, poor_separation=bool(poor))


def convergence_order(
    p: DimensionlessParams,
    tau_end: float,
    dtau: float,
    initial: Optional[Tuple[complex, float, float, float]] = None,
) -> float:
    """log2 of the ratio of successive Richardson differences at dtau, dtau/2, dtau/4."""
    finals = []
    for refinement in (1, 2, 4):
        traj = integrate_mean_field(p, tau_end, dtau / refinement, initial=initial)
        finals.append(np.array([traj.c[-1].real, traj.c[-1].imag, traj.u[-1], traj.v[-1], traj.w[-1]]))
    coarse = np.linalg.norm(finals[0] - finals[1])
    fine = np.linalg.norm(finals[1] - finals[2])
    return float(np.log2(coarse / fine))


@dataclass(frozen=True)
class ProbeStrengthResult:
    probe_ratio: float
    c_plus_num: complex
    c_plus: complex
    c_minus_num: complex
    c_minus: complex
    residual_rms: float
    poor_separation: bool

    @property
    def error_plus(self) -> float:
        return abs(self.c_plus_num - self.c_plus) / abs(self.c_plus)

    @property
    def error_minus(self) -> float:
        return abs(self.c_minus_num - self.c_minus) / abs(self.c_minus)

    @property
    def tolerance(self) -> float:
        return max(1e-3, 5.0 * self.probe_ratio)

    @property
    def passed(self) -> bool:
        return self.error_plus <= self.tolerance and self.error_minus <= self.tolerance


@dataclass(frozen=True)
class VerificationReport:
    base: DimensionlessParams
    results: List[ProbeStrengthResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def error_ratio(self, which: str = 'plus') -> float:
        """Error at the strongest probe over error at the weakest."""
        ordered = sorted(self.results, key=lambda r: r.probe_ratio, reverse=True)
        attr = 'error_plus' if which == 'plus' else 'error_minus'
        return getattr(ordered[0], attr) / getattr(ordered[-1], attr)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                'probe_ratio': r.probe_ratio,
                'abs_c_plus': abs(r.c_plus),
                'err_c_plus': r.error_plus,
                'abs_c_minus': abs(r.c_minus),
                'err_c_minus': r.error_minus,
                'tolerance': r.tolerance,
                'residual_rms': r.residual_rms,
                'passed': r.passed,
            }
            for r in self.results
        ])


def _run_probe_strength(
    p: DimensionlessParams, steps_per_cycle: int, transient_tau: float, window_cycles: int,
) -> Tuple[ProbeStrengthResult, Trajectory]:
    period = 2.0 * math.pi / p.delta_t
    dtau = period / steps_per_cycle
    cycles = math.ceil(transient_tau / period) + window_cycles
    traj = integrate_mean_field(p, cycles * period, dtau)
    decomposition = extract_harmonics(traj, p.delta_t, window_cycles)
    steady, rates = analytic_state(p)
    result = ProbeStrengthResult(
        probe_ratio=p.eps_p_t / p.eps_c_t,
        c_plus_num=decomposition.c_plus,
        c_plus=probe_plus_coefficient(p.delta_t, steady, rates),
        c_minus_num=decomposition.c_minus,
        c_minus=probe_minus_coefficient(p.delta_t, steady, rates),
        residual_rms=decomposition.residual_rms,
        poor_separation=decomposition.poor_separation,
    )
    return result, traj


def verify_against_analytic(
    base: DimensionlessParams,
    probe_ratios: Sequence[float] = (1e-3, 1e-4),
    steps_per_cycle: int = 200,
    transient_tau: float = 400.0,
    window_cycles: int = 40,
    workers: int = 1,
    keep_trajectory: bool = False,
) -> Tuple[VerificationReport, Optional[Trajectory]]:
    """Integrate at each probe strength and compare c₊, c₋ with the closed form.

    Returns the report and, when ``keep_trajectory`` is set, the trajectory of
    the first probe strength.
    """
    runs = [dataclasses.replace(base, eps_p_t=ratio * base.eps_c_t) for ratio in probe_ratios]
    args = (steps_per_cycle, transient_tau, window_cycles)
    if workers > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(runs))) as pool:
            outcomes = list(pool.map(_run_probe_strength, runs, *[[a] * len(runs) for a in args]))
    else:
        outcomes = [_run_probe_strength(p, *args) for p in runs]
    report = VerificationReport(base=base, results=[result for result, _ in outcomes])
    for r in report.results:
        logger.info('probe ratio %.1e: err(c+)=%.3e err(c-)=%.3e', r.probe_ratio, r.error_plus, r.error_minus)
    trajectory = outcomes[0][1] if keep_trajectory else None
    return report, trajectory
