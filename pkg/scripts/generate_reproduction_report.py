"""Generate the reproduction report for the two shipped experiment configs.

Usage (from project root):
    python scripts/generate_reproduction_report.py [--validate]

Writes reports/reproduction_report.json and reports/reproduction_report.md.
Numbers are deterministic; only generated_at_utc changes between runs.
"""
from __future__ import annotations
import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from quad_eit.config import RunConfig, load_config
from quad_eit.params import HBAR, solve
from quad_eit.storage import utc_now_iso
from quad_eit.sweep import SweepSpec, dip_zoom_spec, dispersion_profile, find_dip, run_sweep

CONFIG_DIR = PROJECT_ROOT / 'config'
REPORTS_DIR = PROJECT_ROOT / 'reports'
SCHEMA_PATH = PROJECT_ROOT / 'schemas' / 'reproduction_report.schema.json'
SCHEMA_VERSION = '1.0.0'
TEMPERATURES_K = (20.0, 60.0, 100.0)
SETS = ('set1', 'set2')


def _dip_spec(run: RunConfig, rates, steady) -> SweepSpec:
    if run.dip is not None:
        return dip_zoom_spec(steady, rates, run.dip.half_width_over_omega_m, run.dip.points)
    s = run.sweep
    return SweepSpec.in_units_of(run.physical.omega_m, s.from_over_omega_m, s.to_over_omega_m, s.points)


def evaluate_set(run: RunConfig) -> Dict[str, Any]:
    cfg = run.physical
    wm = cfg.omega_m
    rates, steady = solve(cfg)
    sweep = run_sweep(cfg, _dip_spec(run, rates, steady), solved=(rates, steady))
    metrics = find_dip(sweep, steady)
    profile = dispersion_profile(sweep)
    at_dip = int(abs(profile['delta_over_omega_m'] - metrics.delta_dip / wm).idxmin())
    inverted = bool(profile['slope'][at_dip] * profile['baseline_slope'][at_dip] < 0)
    return {
        'derived': {
            'kappa_rad_s': rates.kappa,
            'g_rad_s_m2': rates.g,
            'quality': rates.quality,
            'n_th': rates.n_th,
            'two_omega_m_over_kappa': 2.0 * wm / rates.kappa,
            'coupling_energy_j_m2': HBAR * rates.g * steady.photon_number,
            'spring_energy_j_m2': cfg.mass * wm ** 2,
        },
        'steady': {
            'photon_number': steady.photon_number,
            'alpha': steady.alpha,
            'beta': steady.beta,
            'delta_over_omega_m': steady.Delta / wm,
        },
        'dip': metrics.to_footer(),
        'dispersion_inverted_at_dip': inverted,
    }


def temperature_series(run: RunConfig, temperatures=TEMPERATURES_K) -> List[Dict[str, float]]:
    series = []
    for temperature in temperatures:
        cfg = dataclasses.replace(run.physical, temperature=temperature)
        rates, steady = solve(cfg)
        sweep = run_sweep(cfg, _dip_spec(run, rates, steady), solved=(rates, steady))
        metrics = find_dip(sweep, steady)
        series.append({'temperature_k': temperature, 'beta': steady.beta, 'depth': metrics.depth, 'fwhm_rad_s': metrics.fwhm})
    return series


def build_report(config_dir: Path = CONFIG_DIR) -> Dict[str, Any]:
    runs = {name: load_config(config_dir / f'{name}.json') for name in SETS}
    return {
        '$schema': SCHEMA_PATH.relative_to(PROJECT_ROOT).as_posix(),
        'schema_version': SCHEMA_VERSION,
        'generated_at_utc': utc_now_iso(),
        'sets': {name: evaluate_set(run) for name, run in runs.items()},
        'temperature_series': temperature_series(runs['set1']),
    }


def render_markdown(report: Dict[str, Any]) -> str:
    lines = ['# Reproduction Report', 'Generated: ' + report['generated_at_utc'], '']
    for name, data in report['sets'].items():
        d, s, dip = data['derived'], data['steady'], data['dip']
        lines.append(f'## {name}')
        lines.append(f"- kappa: {d['kappa_rad_s']:.6g} rad/s, 2ω_m/κ = {d['two_omega_m_over_kappa']:.4f}")
        lines.append(f"- g: {d['g_rad_s_m2']:.6g} rad/(s·m²), Q = {d['quality']:.4g}")
        lines.append(f"- ħg|c₀|² = {d['coupling_energy_j_m2']:.4g} J/m², mω_m² = {d['spring_energy_j_m2']:.4g} J/m²")
        lines.append(f"- α = {s['alpha']:.4f}, β = {s['beta']:.4g}")
        lines.append(
            f"- dip at {dip['delta_dip_over_omega_m']:.5f} ω_m (predicted {dip['predicted_dip_over_omega_m']:.5f}),"
            f" fwhm {dip['fwhm_rad_s']:.4g} rad/s = {dip['fwhm_hz']:.4g} Hz, depth {dip['depth']:.4g}"
        )
        lines.append(f"- dispersion inverted at dip: {'yes' if data['dispersion_inverted_at_dip'] else 'no'}")
        lines.append('')
    lines.append('## Dip depth vs temperature (set1 geometry)')
    lines.append('| T (K) | β | depth | fwhm (rad/s) |')
    lines.append('|---|---|---|---|')
    for row in report['temperature_series']:
        lines.append(f"| {row['temperature_k']:g} | {row['beta']:.4g} | {row['depth']:.4g} | {row['fwhm_rad_s']:.4g} |")
    lines.append('')
    return '\n'.join(lines)


def write_outputs(report: Dict[str, Any], out_dir: Path = REPORTS_DIR) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / 'reproduction_report.json'
    md_path = out_dir / 'reproduction_report.md'
    json_path.write_text(json.dumps(report, ensure_ascii=False, indent=2), encoding='utf-8')
    md_path.write_text(render_markdown(report), encoding='utf-8')
    return json_path, md_path


def validate(report: Dict[str, Any]) -> None:
    import jsonschema
    schema = json.loads(SCHEMA_PATH.read_text(encoding='utf-8'))
    jsonschema.validate(instance=report, schema=schema)


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description='Generate the reproduction report (JSON + Markdown).')
    parser.add_argument('--out-dir', type=Path, default=REPORTS_DIR)
    parser.add_argument('--validate', action='store_true', help='Validate the JSON against schemas/reproduction_report.schema.json')
    args = parser.parse_args(argv)
    report = build_report()
    json_path, md_path = write_outputs(report, args.out_dir)
    print('JSON report written to', json_path)
    print('Markdown report written to', md_path)
    if args.validate:
        import jsonschema
        try:
            validate(report)
            print('[validate] JSON schema validation: PASS')
        except jsonschema.ValidationError as ve:
            print('[validate] JSON schema validation FAILED:', ve.message, file=sys.stderr)
            return 5
    return 0


if __name__ == '__main__':
    sys.exit(main())
