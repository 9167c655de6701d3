"""Experiment description, derived rates and the zeroth-order steady state.

All quantities are SI; angular frequencies and rates are in rad/s.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import scipy.constants as const

from .exceptions import ConfigError, ConvergenceError, DomainError

logger = logging.getLogger(__name__)

HBAR = const.hbar
K_B = const.k
C_LIGHT = const.c

MAX_ITERATIONS = 200
TOLERANCE_OVER_OMEGA_M = 1e-10
RELAXATION = 0.5


class DetuningMode(str, Enum):
    EFFECTIVE = 'effective'
    BARE = 'bare'


@dataclass(frozen=True)
class PhysicalConfig:
    """Membrane-in-the-middle experiment in SI units.

    Exactly one of ``finesse``/``kappa`` and exactly one of
    ``reflectivity``/``g_override`` must be given. ``detuning_value`` is the
    effective detuning Δ in EFFECTIVE mode and ω₀−ω_c in BARE mode.
    """
    wavelength: float
    cavity_length: float
    mass: float
    omega_m: float
    gamma_m: float
    pump_power: float
    temperature: float
    detuning_mode: DetuningMode
    detuning_value: float
    finesse: Optional[float] = None
    kappa: Optional[float] = None
    reflectivity: Optional[float] = None
    g_override: Optional[float] = None
    probe_power: float = 0.0

    def __post_init__(self) -> None:
        for name in ('wavelength', 'cavity_length', 'mass', 'omega_m', 'pump_power', 'temperature'):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise DomainError(f'{name} must be strictly positive (got {value})')
        if not math.isfinite(self.gamma_m) or self.gamma_m < 0:
            raise DomainError(f'gamma_m must be non-negative (got {self.gamma_m})')
        if not math.isfinite(self.probe_power) or self.probe_power < 0:
            raise DomainError(f'probe_power must be non-negative (got {self.probe_power})')
        if not math.isfinite(self.detuning_value):
            raise DomainError('detuning_value must be finite')
        if (self.finesse is None) == (self.kappa is None):
            raise ConfigError('exactly one of finesse or kappa must be given')
        if (self.reflectivity is None) == (self.g_override is None):
            raise ConfigError('exactly one of reflectivity or g_override must be given')
        if self.finesse is not None and self.finesse <= 0:
            raise DomainError(f'finesse must be strictly positive (got {self.finesse})')
        if self.kappa is not None and self.kappa <= 0:
            raise DomainError(f'kappa must be strictly positive (got {self.kappa})')
        if self.reflectivity is not None:
            if self.reflectivity >= 1:
                raise DomainError('coupling formula singular at unit reflectivity')
            if self.reflectivity < 0:
                raise DomainError(f'reflectivity must lie in [0, 1) (got {self.reflectivity})')
        if self.g_override is not None and self.g_override < 0:
            raise DomainError(f'g_override must be non-negative (got {self.g_override})')
        object.__setattr__(self, 'detuning_mode', DetuningMode(self.detuning_mode))


@dataclass(frozen=True)
class DerivedRates:
    """Secondary quantities computed once from a PhysicalConfig.

    ``omega_m`` and ``gamma_m`` are repeated here so the response formulas only
    need (steady, rates). In scaled units ``omega_c`` is undefined (nan).
    """
    omega_c: float
    kappa: float
    g: float
    eps_c: float
    eps_p: float
    n_th: float
    quality: float
    omega_m: float
    gamma_m: float


@dataclass(frozen=True)
class SteadyState:
    c0: complex
    photon_number: float
    X0: float
    Y0: float
    Z0: float
    alpha: float
    beta: float
    Delta: float


def thermal_occupation(omega_m: float, temperature: float) -> float:
    """Bose-Einstein occupation 1/(exp(ħω_m/k_BT) − 1) via expm1."""
    if omega_m <= 0:
        raise DomainError(f'omega_m must be strictly positive (got {omega_m})')
    if temperature < 0:
        raise DomainError(f'temperature must be non-negative (got {temperature})')
    if temperature == 0:
        return 0.0
    return float(1.0 / np.expm1(HBAR * omega_m / (K_B * temperature)))


def cavity_decay_from_finesse(cavity_length: float, finesse: float) -> float:
    if cavity_length <= 0 or finesse <= 0:
        raise DomainError(f'cavity length and finesse must be positive (got L={cavity_length}, F={finesse})')
    return math.pi * C_LIGHT / (2.0 * finesse * cavity_length)


def coupling_constant_from_geometry(cavity_length: float, wavelength: float, reflectivity: float) -> float:
    """Quadratic coupling 8π²c/(Lλ²√(2(1−r_c))) in rad/(s·m²)."""
    if cavity_length <= 0 or wavelength <= 0:
        raise DomainError(f'cavity length and wavelength must be positive (got L={cavity_length}, λ={wavelength})')
    if reflectivity >= 1:
        raise DomainError('coupling formula singular at unit reflectivity')
    if reflectivity < 0:
        raise DomainError(f'reflectivity must lie in [0, 1) (got {reflectivity})')
    return 8.0 * math.pi ** 2 * C_LIGHT / (cavity_length * wavelength ** 2 * math.sqrt(2.0 * (1.0 - reflectivity)))


def drive_amplitude(kappa: float, power: float, omega: float) -> float:
    """Input drive √(2κ℘/(ħω)) in √photons/s."""
    if power < 0:
        raise DomainError(f'power must be non-negative (got {power})')
    if kappa <= 0 or omega <= 0:
        raise DomainError(f'kappa and omega must be positive (got κ={kappa}, ω={omega})')
    return math.sqrt(2.0 * kappa * power / (HBAR * omega))


def derive_rates(cfg: PhysicalConfig) -> DerivedRates:
    omega_c = 2.0 * math.pi * C_LIGHT / cfg.wavelength
    if cfg.kappa is not None:
        kappa = cfg.kappa
    else:
        kappa = cavity_decay_from_finesse(cfg.cavity_length, cfg.finesse)
    if cfg.g_override is not None:
        g = cfg.g_override
    else:
        g = coupling_constant_from_geometry(cfg.cavity_length, cfg.wavelength, cfg.reflectivity)
    quality = cfg.omega_m / cfg.gamma_m if cfg.gamma_m > 0 else math.inf
    return DerivedRates(
        omega_c=omega_c,
        kappa=kappa,
        g=g,
        eps_c=drive_amplitude(kappa, cfg.pump_power, omega_c),
        # the probe sits δ ≪ ω_c away from the pump, so ω_c stands in for ω_p
        eps_p=drive_amplitude(kappa, cfg.probe_power, omega_c),
        n_th=thermal_occupation(cfg.omega_m, cfg.temperature),
        quality=quality,
        omega_m=cfg.omega_m,
        gamma_m=cfg.gamma_m,
    )


def steady_state_given_detuning(cfg: PhysicalConfig, rates: DerivedRates, Delta: float) -> SteadyState:
    if not math.isfinite(Delta):
        raise DomainError(f'effective detuning must be finite (got {Delta})')
    c0 = rates.eps_c / complex(rates.kappa, Delta)
    photon_number = abs(c0) ** 2
    m_omega2 = cfg.mass * cfg.omega_m ** 2
    alpha = HBAR * rates.g * photon_number / m_omega2
    Y0 = (1.0 + 2.0 * rates.n_th) * cfg.mass * HBAR * cfg.omega_m / 2.0
    X0 = Y0 / (cfg.mass * m_omega2 * (1.0 + 2.0 * alpha))
    beta = rates.g * X0 / cfg.omega_m
    return SteadyState(
        c0=c0,
        photon_number=photon_number,
        X0=X0,
        Y0=Y0,
        Z0=0.0,
        alpha=alpha,
        beta=beta,
        Delta=Delta,
    )


def steady_state_self_consistent(
    cfg: PhysicalConfig,
    rates: DerivedRates,
    max_iterations: int = MAX_ITERATIONS,
    tolerance: float = TOLERANCE_OVER_OMEGA_M,
) -> SteadyState:
    """Close Δ = (ω₀−ω_c) + β(Δ)·ω_m by fixed-point iteration.

    In EFFECTIVE mode the configured value already is Δ and no loop runs.
    """
    if cfg.detuning_mode is DetuningMode.EFFECTIVE:
        return steady_state_given_detuning(cfg, rates, cfg.detuning_value)

    bare = cfg.detuning_value
    threshold = tolerance * cfg.omega_m
    delta_k = bare
    relax = 1.0
    prev_step: Optional[float] = None
    prev_delta = delta_k
    for k in range(1, max_iterations + 1):
        steady = steady_state_given_detuning(cfg, rates, delta_k)
        step = bare + steady.beta * cfg.omega_m - delta_k
        if prev_step is not None and relax == 1.0 and step * prev_step < 0:
            relax = RELAXATION
            logger.info('detuning iterates oscillate at k=%d; under-relaxing by %.1f', k, relax)
        delta_next = delta_k + relax * step
        logger.debug('k=%d Delta=%.12e beta=%.6e', k, delta_next, steady.beta)
        if abs(delta_next - delta_k) < threshold:
            logger.info('self-consistent detuning converged after %d iteration(s)', k)
            return steady_state_given_detuning(cfg, rates, delta_next)
        prev_step = step
        prev_delta, delta_k = delta_k, delta_next
    raise ConvergenceError(
        f'detuning fixed point not reached after {max_iterations} iterations',
        (prev_delta, delta_k),
    )


def fixed_point_residual(steady: SteadyState, cfg: PhysicalConfig) -> float:
    """|Δ − (ω₀−ω_c) − βω_m| for a BARE-mode configuration."""
    return abs(steady.Delta - cfg.detuning_value - steady.beta * cfg.omega_m)


def bare_detuning(steady: SteadyState, omega_m: float) -> float:
    """ω₀−ω_c that produces ``steady`` once the coupling shift is added."""
    return steady.Delta - steady.beta * omega_m


def solve(cfg: PhysicalConfig) -> tuple[DerivedRates, SteadyState]:
    rates = derive_rates(cfg)
    return rates, steady_state_self_consistent(cfg, rates)
