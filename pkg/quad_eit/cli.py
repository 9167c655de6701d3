"""quad-eit command line: steady | sweep | dip | verify | baseline."""
from __future__ import annotations
import argparse
import logging
import sys
import uuid
from pathlib import Path
from typing import Callable, Dict, List, Optional, TextIO

import numpy as np
import pandas as pd

from .config import RunConfig, load_config, load_defaults
from .exceptions import QuadEitError, VerificationError
from .oracle import DimensionlessParams, nondimensionalize, verify_against_analytic
from .params import HBAR, DerivedRates, SteadyState, derive_rates, steady_state_self_consistent
from .response import baseline_response, predicted_dip
from .storage import append_run_log, sha256_json, utc_now_iso, write_table
from .sweep import DipMetrics, SweepSpec, dip_zoom_spec, find_dip, run_sweep

logger = logging.getLogger('quad_eit')

COMMANDS = ('steady', 'sweep', 'dip', 'verify', 'baseline')


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    p = argparse.ArgumentParser(prog='quad-eit', description='Probe response of a quadratically coupled membrane cavity')
    p.add_argument('command', choices=COMMANDS)
    p.add_argument('--config', required=True, type=Path, help='JSON experiment description')
    p.add_argument('--out', help='Output file (default: stdout)')
    p.add_argument('--from', dest='start', type=float, help='Sweep start in units of omega_m')
    p.add_argument('--to', dest='stop', type=float, help='Sweep end in units of omega_m')
    p.add_argument('--points', type=int, help='Number of sweep points')
    p.add_argument('--around-dip', action='store_true', help='dip: use the zoomed grid even if the config has no dip section')
    p.add_argument('--dump-trajectory', type=Path, help='verify: write the first oracle trajectory as CSV')
    p.add_argument('--from-config', action='store_true', help='verify: scale the solved physical config instead of using the desk point')
    p.add_argument('--run-log', type=Path, help='Append one JSON line per invocation')
    p.add_argument('--verbose', action='store_true')
    return p.parse_args(argv)


def _solve(run: RunConfig) -> tuple[DerivedRates, SteadyState]:
    rates = derive_rates(run.physical)
    steady = steady_state_self_consistent(
        run.physical,
        rates,
        max_iterations=run.solver.max_iterations,
        tolerance=run.solver.tolerance_over_omega_m,
    )
    return rates, steady


def _out_path(run: RunConfig) -> Optional[Path]:
    return Path(run.output) if run.output else None


def _sweep_spec(run: RunConfig) -> SweepSpec:
    s = run.sweep
    return SweepSpec.in_units_of(run.physical.omega_m, s.from_over_omega_m, s.to_over_omega_m, s.points, s.include_baseline)


def steady_table(run: RunConfig, rates: DerivedRates, steady: SteadyState) -> pd.DataFrame:
    cfg = run.physical
    wm = cfg.omega_m
    rows = [
        ('re_c0', steady.c0.real, steady.c0.real),
        ('im_c0', steady.c0.imag, steady.c0.imag),
        ('photon_number', steady.photon_number, steady.photon_number),
        ('alpha', steady.alpha, steady.alpha),
        ('beta', steady.beta, steady.beta),
        ('X0', steady.X0, steady.X0 * cfg.mass * wm / HBAR),
        ('Y0', steady.Y0, steady.Y0 / (cfg.mass * HBAR * wm)),
        ('n_th', rates.n_th, rates.n_th),
        ('kappa', rates.kappa, rates.kappa / wm),
        ('g', rates.g, HBAR * rates.g / (cfg.mass * wm ** 2)),
        ('Delta', steady.Delta, steady.Delta / wm),
        ('quality', rates.quality, rates.quality),
        ('coupling_energy', HBAR * rates.g * steady.photon_number, steady.alpha),
        ('spring_energy', cfg.mass * wm ** 2, 1.0),
        ('predicted_dip', predicted_dip(steady, rates), predicted_dip(steady, rates) / wm),
    ]
    return pd.DataFrame(rows, columns=['quantity', 'si', 'scaled'])


def cmd_steady(run: RunConfig, args: argparse.Namespace, stream: TextIO) -> int:
    rates, steady = _solve(run)
    write_table(steady_table(run, rates, steady), _out_path(run), stream)
    return 0


def cmd_sweep(run: RunConfig, args: argparse.Namespace, stream: TextIO) -> int:
    solved = _solve(run)
    result = run_sweep(run.physical, _sweep_spec(run), workers=run.sweep.workers, solved=solved)
    write_table(result.to_frame(), _out_path(run), stream)
    return 0


def cmd_dip(run: RunConfig, args: argparse.Namespace, stream: TextIO) -> int:
    rates, steady = _solve(run)
    dip = run.dip
    if dip is None and args.around_dip:
        defaults = load_defaults()['dip']
        half_width, points = defaults['half_width_over_omega_m'], defaults['points']
    elif dip is not None:
        half_width, points = dip.half_width_over_omega_m, dip.points
    else:
        half_width = points = None
    if half_width is not None:
        spec = dip_zoom_spec(steady, rates, half_width, points, run.sweep.include_baseline)
    else:
        spec = _sweep_spec(run)
    result = run_sweep(run.physical, spec, workers=run.sweep.workers, solved=(rates, steady))
    metrics: DipMetrics = find_dip(result, steady)
    write_table(result.to_frame(), _out_path(run), stream, footer=metrics.to_footer())
    return 0


def _oracle_params(run: RunConfig, from_config: bool) -> DimensionlessParams:
    if not from_config:
        return run.verify.desk_point()
    rates, steady = _solve(run)
    return nondimensionalize(run.physical, rates, steady, run.verify.delta_t * run.physical.omega_m)


def cmd_verify(run: RunConfig, args: argparse.Namespace, stream: TextIO) -> int:
    v = run.verify
    report, trajectory = verify_against_analytic(
        _oracle_params(run, args.from_config),
        probe_ratios=v.probe_ratios,
        steps_per_cycle=v.steps_per_cycle,
        transient_tau=v.transient_tau,
        window_cycles=v.window_cycles,
        workers=v.workers,
        keep_trajectory=args.dump_trajectory is not None,
    )
    write_table(report.to_frame(), _out_path(run), stream)
    if trajectory is not None:
        write_table(trajectory.to_frame(), args.dump_trajectory, stream)
    if len(report.results) > 1:
        logger.info('error ratio c+: %.3g, c-: %.3g', report.error_ratio('plus'), report.error_ratio('minus'))
    if not report.passed:
        raise VerificationError('oracle and closed-form coefficients disagree beyond tolerance')
    return 0


def cmd_baseline(run: RunConfig, args: argparse.Namespace, stream: TextIO) -> int:
    rates, steady = _solve(run)
    spec = _sweep_spec(run)
    delta = spec.grid()
    eps = np.asarray(baseline_response(delta, steady.Delta, rates.kappa))
    frame = pd.DataFrame({
        'delta_over_omega_m': delta / run.physical.omega_m,
        'baseline_v_p': eps.real,
        'baseline_v_p_tilde': eps.imag,
        'abs_baseline': np.abs(eps),
    })
    write_table(frame, _out_path(run), stream)
    return 0


HANDLERS: Dict[str, Callable[[RunConfig, argparse.Namespace, TextIO], int]] = {
    'steady': cmd_steady,
    'sweep': cmd_sweep,
    'dip': cmd_dip,
    'verify': cmd_verify,
    'baseline': cmd_baseline,
}


def main(argv: Optional[List[str]] = None, stream: Optional[TextIO] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format='[%(levelname)s] %(message)s')
    stream = stream if stream is not None else sys.stdout
    record = {
        'run_id': uuid.uuid4().hex[:12],
        'command': args.command,
        'config': str(args.config),
        'config_sha256': None,
        'started_at_utc': utc_now_iso(),
    }
    status, code = 'failed', 1
    try:
        run = load_config(args.config).with_overrides(args.start, args.stop, args.points, args.out)
        record['config_sha256'] = sha256_json(run.to_dict())
        code = HANDLERS[args.command](run, args, stream)
        status = 'success'
    except QuadEitError as exc:
        status, code = exc.category, exc.exit_code
        print(f'[error] {exc.category}: {exc}', file=sys.stderr)
    finally:
        if args.run_log is not None:
            record.update({'status': status, 'exit_code': code, 'finished_at_utc': utc_now_iso()})
            append_run_log(args.run_log, record)
    return code
