"""Probe-detuning sweeps, dip metrics and the dispersion profile."""
from __future__ import annotations
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.signal import find_peaks

from .exceptions import DomainError, InsufficientSpanError, NoDipError
from .params import DerivedRates, PhysicalConfig, SteadyState, solve
from .response import (
    ProbeResponse,
    baseline_response,
    envelope_response,
    predicted_dip,
    total_output_field,
)

logger = logging.getLogger(__name__)

SEARCH_HALF_WIDTH_OVER_OMEGA_M = 0.5
MIN_POINTS_PER_WIDTH = 10

CSV_COLUMNS = [
    'delta_over_omega_m',
    'v_p',
    'v_p_tilde',
    'abs_eps_T',
    're_eps_out_minus',
    'im_eps_out_minus',
    'baseline_v_p',
    'baseline_v_p_tilde',
]


@dataclass(frozen=True)
class SweepSpec:
    """Uniform δ grid in rad/s, endpoints included."""
    delta_min: float
    delta_max: float
    points: int
    include_baseline: bool = True

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta_min) and math.isfinite(self.delta_max)):
            raise DomainError('sweep bounds must be finite')
        if self.delta_min >= self.delta_max:
            raise DomainError(f'sweep needs delta_min < delta_max (got {self.delta_min} >= {self.delta_max})')
        if int(self.points) != self.points or self.points < 2:
            raise DomainError(f'sweep needs an integer number of points >= 2 (got {self.points})')

    @classmethod
    def in_units_of(cls, omega_m: float, start: float, stop: float, points: int, include_baseline: bool = True) -> 'SweepSpec':
        return cls(start * omega_m, stop * omega_m, int(points), include_baseline)

    def grid(self) -> np.ndarray:
        return np.linspace(self.delta_min, self.delta_max, int(self.points))


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    delta: np.ndarray
    response: ProbeResponse
    baseline: Optional[np.ndarray]
    steady: SteadyState
    rates: DerivedRates

    def __len__(self) -> int:
        return len(self.delta)

    @property
    def delta_over_omega_m(self) -> np.ndarray:
        return self.delta / self.rates.omega_m

    def to_frame(self) -> pd.DataFrame:
        eps_minus = np.asarray(self.response.eps_out_minus)
        frame = pd.DataFrame({
            'delta_over_omega_m': self.delta_over_omega_m,
            'v_p': self.response.v_p,
            'v_p_tilde': self.response.v_p_tilde,
            'abs_eps_T': np.abs(self.response.eps_T),
            're_eps_out_minus': eps_minus.real,
            'im_eps_out_minus': eps_minus.imag,
        })
        if self.baseline is not None:
            frame['baseline_v_p'] = self.baseline.real
            frame['baseline_v_p_tilde'] = self.baseline.imag
        return frame


@dataclass(frozen=True)
class DipMetrics:
    delta_dip: float
    depth: float
    fwhm: float
    predicted_dip: float
    omega_m: float

    @property
    def fwhm_hz(self) -> float:
        return self.fwhm / (2.0 * math.pi)

    def to_footer(self) -> dict:
        return {
            'delta_dip_over_omega_m': self.delta_dip / self.omega_m,
            'fwhm_rad_s': self.fwhm,
            'fwhm_hz': self.fwhm_hz,
            'depth': self.depth,
            'predicted_dip_over_omega_m': self.predicted_dip / self.omega_m,
        }


def _concat_responses(parts: list[ProbeResponse]) -> ProbeResponse:
    if len(parts) == 1:
        return parts[0]
    merged = {}
    for f in fields(ProbeResponse):
        if f.name == 'eps_out0':
            merged[f.name] = parts[0].eps_out0
        else:
            merged[f.name] = np.concatenate([np.asarray(getattr(p, f.name)) for p in parts])
    return ProbeResponse(**merged)


def run_sweep(
    cfg: PhysicalConfig,
    spec: SweepSpec,
    workers: int = 1,
    solved: Optional[Tuple[DerivedRates, SteadyState]] = None,
) -> SweepResult:
    """Evaluate the closed-form response on ``spec``'s grid.

    ``solved`` skips the steady-state solve when the caller already has it.
    """
    rates, steady = solved if solved is not None else solve(cfg)
    delta = spec.grid()
    logger.info('sweeping %d points over [%.6g, %.6g] omega_m', len(delta), delta[0] / cfg.omega_m, delta[-1] / cfg.omega_m)
    if workers > 1:
        chunks = np.array_split(delta, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda chunk: total_output_field(chunk, steady, rates), chunks))
        response = _concat_responses(parts)
    else:
        response = total_output_field(delta, steady, rates)
    baseline = None
    if spec.include_baseline:
        baseline = np.asarray(baseline_response(delta, steady.Delta, rates.kappa))
    return SweepResult(spec=spec, delta=delta, response=response, baseline=baseline, steady=steady, rates=rates)


def dip_zoom_spec(
    steady: SteadyState,
    rates: DerivedRates,
    half_width_over_omega_m: float,
    points: int,
    include_baseline: bool = True,
) -> SweepSpec:
    """Grid centred on the predicted dip, for dips narrower than any full-axis grid resolves."""
    if not half_width_over_omega_m > 0:
        raise DomainError(f'zoom half-width must be positive (got {half_width_over_omega_m})')
    centre = predicted_dip(steady, rates)
    half = half_width_over_omega_m * rates.omega_m
    return SweepSpec(centre - half, centre + half, points, include_baseline)


def half_depth_crossings(x: np.ndarray, deficit: np.ndarray, k: int, level: float) -> Tuple[float, float]:
    """First crossings of ``level`` on either flank of index ``k``, linearly interpolated."""
    below_left = np.flatnonzero(deficit[:k] < level)
    below_right = np.flatnonzero(deficit[k + 1:] < level)
    if below_left.size == 0 or below_right.size == 0:
        raise InsufficientSpanError('half-depth crossing not bracketed by the sweep grid')
    i = int(below_left[-1])
    j = k + 1 + int(below_right[0])
    # np.interp needs increasing abscissae: deficit rises towards k on both flanks
    left = float(np.interp(level, deficit[i:i + 2], x[i:i + 2]))
    right = float(np.interp(level, deficit[[j, j - 1]], x[[j, j - 1]]))
    return left, right


def find_dip(sweep: SweepResult, steady: Optional[SteadyState] = None) -> DipMetrics:
    """Locate the transparency dip and measure it against the β = 0 envelope."""
    steady = steady if steady is not None else sweep.steady
    rates = sweep.rates
    wm = rates.omega_m
    predicted = predicted_dip(steady, rates)
    lo = max(predicted - SEARCH_HALF_WIDTH_OVER_OMEGA_M * wm, sweep.delta[0])
    hi = min(predicted + SEARCH_HALF_WIDTH_OVER_OMEGA_M * wm, sweep.delta[-1])
    mask = (sweep.delta >= lo) & (sweep.delta <= hi)
    x = sweep.delta[mask]
    if len(x) < 3:
        raise InsufficientSpanError(
            f'sweep does not cover the dip search window around {predicted / wm:.6g} omega_m'
        )
    v_p = np.asarray(sweep.response.v_p)[mask]
    envelope = np.asarray(envelope_response(x, steady, rates)).real
    deficit = envelope - v_p

    if np.max(deficit) <= 0:
        raise NoDipError('coupled response never falls below its envelope')
    # interior local minima of v_p only; the one furthest below the envelope is the dip
    minima, _ = find_peaks(-v_p)
    if minima.size == 0:
        raise NoDipError('no interior minimum of v_p inside the search window')
    k = int(minima[np.argmax(deficit[minima])])
    if deficit[k] <= 0:
        raise NoDipError('no minimum of v_p lies below the envelope')

    y0, y1, y2 = v_p[k - 1], v_p[k], v_p[k + 1]
    curvature = y0 - 2.0 * y1 + y2
    shift = 0.5 * (y0 - y2) / curvature if curvature > 0 else 0.0
    spacing = x[k + 1] - x[k]
    delta_dip = float(x[k] + shift * spacing)
    v_min = float(y1 - 0.25 * (y0 - y2) * shift)

    depth = float(np.real(envelope_response(delta_dip, steady, rates))) - v_min
    if depth <= 0:
        raise NoDipError(f'dip depth is not positive ({depth:.3e})')
    level = depth / 2.0
    if deficit[k] < level:
        raise NoDipError('grid minimum lies above half depth; dip not resolved')
    left, right = half_depth_crossings(x, deficit, k, level)
    fwhm = right - left
    if fwhm / spacing < MIN_POINTS_PER_WIDTH:
        raise InsufficientSpanError(
            f'only {fwhm / spacing:.1f} grid points across the dip; need {MIN_POINTS_PER_WIDTH}'
        )
    logger.info('dip at %.8f omega_m, fwhm %.4g rad/s, depth %.4g', delta_dip / wm, fwhm, depth)
    return DipMetrics(delta_dip=delta_dip, depth=depth, fwhm=fwhm, predicted_dip=predicted, omega_m=wm)


def dispersion_profile(sweep: SweepResult) -> pd.DataFrame:
    """Out-of-phase quadrature next to its uncoupled baseline.

    ``anomalous`` marks the contiguous run, nearest the predicted dip, where the
    slope of ῡ_p has the opposite sign to the baseline slope.
    """
    rates, steady = sweep.rates, sweep.steady
    baseline = sweep.baseline
    if baseline is None:
        baseline = np.asarray(baseline_response(sweep.delta, steady.Delta, rates.kappa))
    coupled = np.asarray(sweep.response.v_p_tilde)
    slope = np.gradient(coupled, sweep.delta)
    baseline_slope = np.gradient(baseline.imag, sweep.delta)
    inverted = np.sign(slope) * np.sign(baseline_slope) < 0

    anomalous = np.zeros_like(inverted)
    if inverted.any():
        centre = int(np.argmin(np.abs(sweep.delta - predicted_dip(steady, rates))))
        candidates = np.flatnonzero(inverted)
        k = int(candidates[np.argmin(np.abs(candidates - centre))])
        lo, hi = k, k
        while lo > 0 and inverted[lo - 1]:
            lo -= 1
        while hi < len(inverted) - 1 and inverted[hi + 1]:
            hi += 1
        anomalous[lo:hi + 1] = True
    return pd.DataFrame({
        'delta_over_omega_m': sweep.delta_over_omega_m,
        'v_p_tilde': coupled,
        'baseline_v_p_tilde': baseline.imag,
        'slope': slope,
        'baseline_slope': baseline_slope,
        'anomalous': anomalous,
    })
