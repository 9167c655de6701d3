"""Run configuration: JSON experiment file + YAML defaults + CLI overrides."""
from __future__ import annotations
import copy
import dataclasses
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import yaml
from jsonschema import Draft7Validator
from jsonschema.exceptions import best_match

from .exceptions import ConfigError, DomainError
from .oracle import DimensionlessParams
from .params import DetuningMode, PhysicalConfig

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEFAULTS_PATH = PROJECT_ROOT / 'config' / 'run_defaults.yaml'
SCHEMA_PATH = PROJECT_ROOT / 'schemas' / 'run_config.schema.json'

TWO_PI = 2.0 * math.pi

# (config stem, PhysicalConfig field, unit suffixes); *_hz values are multiplied by 2π
FREQUENCY_KEYS = [
    ('omega_m', 'omega_m', ('_rad_s', '_hz')),
    ('gamma_m', 'gamma_m', ('_rad_s', '_hz')),
    ('kappa', 'kappa', ('_rad_s', '_hz')),
    ('g_override', 'g_override', ('_rad_s_m2', '_hz_m2')),
]


@dataclass(frozen=True)
class SweepSettings:
    from_over_omega_m: float
    to_over_omega_m: float
    points: int
    include_baseline: bool = True
    workers: int = 1


@dataclass(frozen=True)
class DipSettings:
    half_width_over_omega_m: float
    points: int


@dataclass(frozen=True)
class SolverSettings:
    max_iterations: int
    tolerance_over_omega_m: float


@dataclass(frozen=True)
class VerifySettings:
    kappa_t: float
    gamma_t: float
    alpha: float
    n_th: float
    Delta_t: float
    delta_t: float
    photon_number: float
    probe_ratios: Tuple[float, ...]
    steps_per_cycle: int
    transient_tau: float
    window_cycles: int
    workers: int = 1

    def desk_point(self) -> DimensionlessParams:
        return DimensionlessParams.desk_point(
            kappa_t=self.kappa_t,
            gamma_t=self.gamma_t,
            alpha=self.alpha,
            n_th=self.n_th,
            Delta_t=self.Delta_t,
            delta_t=self.delta_t,
            photon_number=self.photon_number,
            probe_ratio=max(self.probe_ratios),
        )


@dataclass(frozen=True)
class RunConfig:
    physical: PhysicalConfig
    detuning_over_omega_m: float
    sweep: SweepSettings
    solver: SolverSettings
    verify: VerifySettings
    dip: Optional[DipSettings] = None
    output: Optional[str] = None

    def with_overrides(
        self,
        start: Optional[float] = None,
        stop: Optional[float] = None,
        points: Optional[int] = None,
        output: Optional[str] = None,
    ) -> 'RunConfig':
        sweep = dataclasses.replace(
            self.sweep,
            from_over_omega_m=self.sweep.from_over_omega_m if start is None else float(start),
            to_over_omega_m=self.sweep.to_over_omega_m if stop is None else float(stop),
            points=self.sweep.points if points is None else int(points),
        )
        return dataclasses.replace(self, sweep=sweep, output=self.output if output is None else output)

    def to_dict(self) -> Dict[str, Any]:
        p = self.physical
        doc: Dict[str, Any] = {
            'wavelength_m': p.wavelength,
            'cavity_length_m': p.cavity_length,
            'mass_kg': p.mass,
            'omega_m_rad_s': p.omega_m,
            'gamma_m_rad_s': p.gamma_m,
        }
        if p.finesse is not None:
            doc['finesse'] = p.finesse
        else:
            doc['kappa_rad_s'] = p.kappa
        if p.reflectivity is not None:
            doc['reflectivity'] = p.reflectivity
        else:
            doc['g_override_rad_s_m2'] = p.g_override
        doc.update({
            'pump_power_w': p.pump_power,
            'probe_power_w': p.probe_power,
            'temperature_k': p.temperature,
            'detuning_mode': p.detuning_mode.value,
            'detuning_over_omega_m': self.detuning_over_omega_m,
            'sweep': dataclasses.asdict(self.sweep),
            'solver': dataclasses.asdict(self.solver),
            'verify': {**dataclasses.asdict(self.verify), 'probe_ratios': list(self.verify.probe_ratios)},
            'output': self.output,
        })
        if self.dip is not None:
            doc['dip'] = dataclasses.asdict(self.dip)
        return doc

    def to_json(self) -> str:
        # json writes floats with repr, so a re-parse restores identical values
        return json.dumps(self.to_dict(), indent=2)


def load_defaults(path: Path = DEFAULTS_PATH) -> Dict[str, Any]:
    with path.open('r', encoding='utf-8') as f:
        return yaml.safe_load(f) or {}


def _load_schema() -> Dict[str, Any]:
    return json.loads(SCHEMA_PATH.read_text(encoding='utf-8'))


def _line_of(text: str, path: Sequence[Any]) -> int:
    """1-based line of the last key in ``path`` (searched in nesting order); 1 if not found."""
    pos = 0
    found = None
    for part in path:
        if not isinstance(part, str):
            continue
        m = re.compile(r'"' + re.escape(part) + r'"\s*:').search(text, pos)
        if m is None:
            break
        found, pos = m.start(), m.end()
    if found is None:
        return 1
    return text.count('\n', 0, found) + 1


def _fail(text: str, path: Sequence[Any], message: str, exc: type = ConfigError) -> None:
    raise exc(f'line {_line_of(text, path)}: {message}')


def _merge(defaults: Dict[str, Any], doc: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(defaults)
    for key, value in doc.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return merged


def _frequency(text: str, doc: Dict[str, Any], stem: str, suffixes: Tuple[str, str]) -> Optional[float]:
    rad_key, hz_key = stem + suffixes[0], stem + suffixes[1]
    if rad_key in doc and hz_key in doc:
        _fail(text, [hz_key], f'give either {rad_key} or {hz_key}, not both')
    if rad_key in doc:
        return float(doc[rad_key])
    if hz_key in doc:
        return TWO_PI * float(doc[hz_key])
    return None


def _validate_structure(text: str, doc: Any) -> None:
    error = best_match(Draft7Validator(_load_schema()).iter_errors(doc))
    if error is None:
        return
    path: List[Any] = list(error.absolute_path)
    if error.validator == 'additionalProperties' and isinstance(error.instance, dict):
        known = set(error.schema.get('properties', {}))
        unknown = sorted(set(error.instance) - known)
        if unknown:
            _fail(text, path + [unknown[0]], f"unknown key '{unknown[0]}'")
    if error.validator == 'required':
        _fail(text, path, f'missing required key: {error.message}')
    _fail(text, path, error.message)


def parse_config(text: str, defaults: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Parse and fully validate a JSON experiment description."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f'line {exc.lineno}: invalid JSON ({exc.msg})') from exc
    if not isinstance(doc, dict):
        raise ConfigError('line 1: config must be a JSON object')
    _validate_structure(text, doc)

    freqs = {field_name: _frequency(text, doc, stem, suffixes) for stem, field_name, suffixes in FREQUENCY_KEYS}
    if freqs['omega_m'] is None:
        _fail(text, [], 'missing required key: omega_m_rad_s or omega_m_hz')
    if freqs['gamma_m'] is None:
        _fail(text, [], 'missing required key: gamma_m_rad_s or gamma_m_hz')
    if ('finesse' in doc) == (freqs['kappa'] is not None):
        _fail(text, ['finesse'] if 'finesse' in doc else [], 'exactly one of finesse or kappa must be given')
    if ('reflectivity' in doc) == (freqs['g_override'] is not None):
        _fail(text, ['reflectivity'] if 'reflectivity' in doc else [], 'exactly one of reflectivity or g_override must be given')
    if 'reflectivity' in doc and doc['reflectivity'] >= 1:
        _fail(text, ['reflectivity'], f"coupling formula singular at unit reflectivity (reflectivity={doc['reflectivity']})", DomainError)

    checks = [
        ('wavelength_m', doc['wavelength_m'] > 0, 'must be strictly positive'),
        ('cavity_length_m', doc['cavity_length_m'] > 0, 'must be strictly positive'),
        ('mass_kg', doc['mass_kg'] > 0, 'must be strictly positive'),
        ('pump_power_w', doc['pump_power_w'] > 0, 'must be strictly positive'),
        ('temperature_k', doc['temperature_k'] > 0, 'must be strictly positive'),
        ('probe_power_w', doc.get('probe_power_w', 0.0) >= 0, 'must be non-negative'),
        ('omega_m', freqs['omega_m'] > 0, 'must be strictly positive'),
        ('gamma_m', freqs['gamma_m'] >= 0, 'must be non-negative'),
        ('finesse', doc.get('finesse', 1.0) > 0, 'must be strictly positive'),
        ('kappa', freqs['kappa'] is None or freqs['kappa'] > 0, 'must be strictly positive'),
        ('reflectivity', doc.get('reflectivity', 0.0) >= 0, 'must lie in [0, 1)'),
        ('g_override', freqs['g_override'] is None or freqs['g_override'] >= 0, 'must be non-negative'),
    ]
    for key, ok, message in checks:
        if not ok:
            # frequency stems resolve to whichever unit key is present
            keys = [k for k in doc if k == key or k.startswith(key + '_')]
            _fail(text, keys[:1], f'{keys[0] if keys else key} {message}', DomainError)

    merged = _merge(defaults if defaults is not None else load_defaults(), doc)
    try:
        physical = PhysicalConfig(
            wavelength=float(doc['wavelength_m']),
            cavity_length=float(doc['cavity_length_m']),
            mass=float(doc['mass_kg']),
            omega_m=freqs['omega_m'],
            gamma_m=freqs['gamma_m'],
            pump_power=float(doc['pump_power_w']),
            temperature=float(doc['temperature_k']),
            detuning_mode=DetuningMode(doc['detuning_mode']),
            detuning_value=float(doc['detuning_over_omega_m']) * freqs['omega_m'],
            finesse=float(doc['finesse']) if 'finesse' in doc else None,
            kappa=freqs['kappa'],
            reflectivity=float(doc['reflectivity']) if 'reflectivity' in doc else None,
            g_override=freqs['g_override'],
            probe_power=float(doc.get('probe_power_w', 0.0)),
        )
    except ConfigError as exc:
        raise ConfigError(f'line 1: {exc}') from exc

    sweep = SweepSettings(**merged['sweep'])
    if not sweep.from_over_omega_m < sweep.to_over_omega_m:
        _fail(text, ['sweep', 'to_over_omega_m'], 'sweep needs from_over_omega_m < to_over_omega_m', DomainError)
    dip = None
    if 'dip' in doc:
        dip = DipSettings(**merged['dip'])
        if not dip.half_width_over_omega_m > 0:
            _fail(text, ['dip', 'half_width_over_omega_m'], 'half_width_over_omega_m must be positive', DomainError)
    verify_doc = dict(merged['verify'])
    verify_doc['probe_ratios'] = tuple(float(r) for r in verify_doc['probe_ratios'])
    verify = VerifySettings(**verify_doc)
    if verify.window_cycles < 20:
        _fail(text, ['verify', 'window_cycles'], 'window_cycles must be at least 20', DomainError)
    if any(not 0 < r <= 1e-2 for r in verify.probe_ratios):
        _fail(text, ['verify', 'probe_ratios'], 'probe_ratios must lie in (0, 1e-2]', DomainError)
    return RunConfig(
        physical=physical,
        detuning_over_omega_m=float(doc['detuning_over_omega_m']),
        sweep=sweep,
        solver=SolverSettings(**merged['solver']),
        verify=verify,
        dip=dip,
        output=merged.get('output'),
    )


def load_config(path: Path, defaults: Optional[Dict[str, Any]] = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f'cannot read config {path}: {exc}') from exc
    return parse_config(text, defaults)
