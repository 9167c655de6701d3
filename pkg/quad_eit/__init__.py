"""Two-phonon transparency in a quadratically coupled membrane cavity."""
from .params import PhysicalConfig, DerivedRates, SteadyState, solve
from .response import total_output_field, baseline_response, predicted_dip
from .sweep import SweepSpec, run_sweep, find_dip, dispersion_profile

__all__ = [
    'PhysicalConfig',
    'DerivedRates',
    'SteadyState',
    'solve',
    'total_output_field',
    'baseline_response',
    'predicted_dip',
    'SweepSpec',
    'run_sweep',
    'find_dip',
    'dispersion_profile',
]
