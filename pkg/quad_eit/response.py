"""First-order probe response of the quadratically coupled cavity.

Time dependence of the probe sideband is e^{-iδt} ↔ c₊ and e^{+iδt} ↔ c₋;
every function accepts a scalar δ or a numpy array of them.
"""
from __future__ import annotations
import dataclasses
from dataclasses import dataclass
from typing import Any

import numpy as np

from .exceptions import DomainError, NumericalError
from .params import DerivedRates, SteadyState

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class ProbeResponse:
    """Probe-normalised output amplitudes at one δ (or an array of δ)."""
    delta: Any
    c_plus: Any
    c_minus: Any
    eps_T: Any
    eps_out0: complex
    eps_out_plus: Any
    eps_out_minus: Any
    v_p: Any
    v_p_tilde: Any


def _scalar_or_array(value: np.ndarray, like: Any) -> Any:
    if np.ndim(like) == 0:
        return np.asarray(value).item()
    return value


def _factors(delta: np.ndarray, steady: SteadyState, rates: DerivedRates):
    """Shared pieces of c₊ and d(δ): cavity factors, G=(γ_m−iδ), M and the coupling term."""
    kappa, Delta = rates.kappa, steady.Delta
    wm, gm = rates.omega_m, rates.gamma_m
    a_plus = kappa + 1j * (Delta - delta)
    a_minus = kappa - 1j * (Delta + delta)
    mech = delta ** 2 - 4.0 * wm ** 2 + 2j * gm * delta - 8.0 * steady.alpha * wm ** 2
    core = a_minus * (gm - 1j * delta) * mech
    coupling = steady.alpha * steady.beta * wm ** 3 * (2.0 * gm - 1j * delta)
    return a_plus, core, coupling


def _checked(d: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(d)) or np.any(np.abs(d) < _TINY):
        raise NumericalError('denominator d(δ) vanished or is not finite')
    return d


def denominator_d(delta: Any, steady: SteadyState, rates: DerivedRates) -> Any:
    d_arr = np.asarray(delta, dtype=float)
    a_plus, core, coupling = _factors(d_arr, steady, rates)
    return _scalar_or_array(a_plus * core + 8.0 * steady.Delta * coupling, delta)


def probe_plus_coefficient(delta: Any, steady: SteadyState, rates: DerivedRates) -> Any:
    d_arr = np.asarray(delta, dtype=float)
    a_plus, core, coupling = _factors(d_arr, steady, rates)
    d = _checked(a_plus * core + 8.0 * steady.Delta * coupling)
    return _scalar_or_array((core - 4j * coupling) / d, delta)


def probe_minus_coefficient(delta: Any, steady: SteadyState, rates: DerivedRates) -> Any:
    if abs(steady.c0) == 0:
        raise DomainError('pump phase undefined: |c0| = 0')
    d_arr = np.asarray(delta, dtype=float)
    a_plus, core, coupling = _factors(d_arr, steady, rates)
    d = _checked(a_plus * core + 8.0 * steady.Delta * coupling)
    phase = steady.c0 ** 2 / abs(steady.c0) ** 2
    # conj(coupling) carries (2γ_m + iδ)
    c_minus = -4j * np.conj(coupling) * phase / np.conj(d)
    return _scalar_or_array(c_minus, delta)


def total_output_field(delta: Any, steady: SteadyState, rates: DerivedRates) -> ProbeResponse:
    c_plus = np.asarray(probe_plus_coefficient(delta, steady, rates))
    c_minus = np.asarray(probe_minus_coefficient(delta, steady, rates))
    eps_T = 2.0 * rates.kappa * c_plus
    return ProbeResponse(
        delta=delta,
        c_plus=_scalar_or_array(c_plus, delta),
        c_minus=_scalar_or_array(c_minus, delta),
        eps_T=_scalar_or_array(eps_T, delta),
        eps_out0=complex(2.0 * rates.kappa * steady.c0 - rates.eps_c),
        eps_out_plus=_scalar_or_array(eps_T - 1.0, delta),
        eps_out_minus=_scalar_or_array(2.0 * rates.kappa * c_minus, delta),
        v_p=_scalar_or_array(eps_T.real, delta),
        v_p_tilde=_scalar_or_array(eps_T.imag, delta),
    )


def baseline_response(delta: Any, Delta: float, kappa: float) -> Any:
    """Uncoupled (g = 0) transmission 2κ/(κ + i(Δ−δ))."""
    if kappa <= 0:
        raise DomainError(f'kappa must be strictly positive (got {kappa})')
    d_arr = np.asarray(delta, dtype=float)
    return _scalar_or_array(2.0 * kappa / (kappa + 1j * (Delta - d_arr)), delta)


def envelope_response(delta: Any, steady: SteadyState, rates: DerivedRates) -> Any:
    """ε_T with the X₀-mediated pathway switched off (β forced to 0, α kept)."""
    no_pathway = dataclasses.replace(steady, beta=0.0)
    return _scalar_or_array(2.0 * rates.kappa * np.asarray(probe_plus_coefficient(delta, no_pathway, rates)), delta)


def predicted_dip(steady: SteadyState, rates: DerivedRates) -> float:
    """Zero of the shifted mechanical factor, 2ω_m√(1+2α)."""
    return 2.0 * rates.omega_m * float(np.sqrt(1.0 + 2.0 * steady.alpha))
