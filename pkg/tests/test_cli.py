import io
import json
from pathlib import Path

import pandas as pd
import pytest

from quad_eit.cli import main
from quad_eit.sweep import CSV_COLUMNS

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'config'
SET1 = CONFIG_DIR / 'set1.json'
SET2 = CONFIG_DIR / 'set2.json'


def _write_config(tmp_path, source, **changes):
    doc = json.loads(source.read_text(encoding='utf-8'))
    for key, value in changes.items():
        if value is None:
            doc.pop(key, None)
        else:
            doc[key] = value
    path = tmp_path / 'run.json'
    path.write_text(json.dumps(doc, indent=2), encoding='utf-8')
    return path


def _run(argv):
    out = io.StringIO()
    code = main(argv, stream=out)
    return code, out.getvalue()


def test_steady_prints_alpha():
    code, text = _run(['steady', '--config', str(SET1)])
    assert code == 0
    table = pd.read_csv(io.StringIO(text)).set_index('quantity')
    assert table.loc['alpha', 'si'] == pytest.approx(0.013, abs=1e-3)
    assert table.loc['kappa', 'scaled'] == pytest.approx(1 / 0.62, rel=1e-2)


def test_sweep_header_and_zero_coupling(tmp_path):
    config = _write_config(tmp_path, SET1, reflectivity=None, g_override_rad_s_m2=0.0)
    out = tmp_path / 'sweep.csv'
    code, _ = _run(['sweep', '--config', str(config), '--out', str(out), '--points', '401'])
    assert code == 0
    assert out.read_text(encoding='utf-8').splitlines()[0] == ','.join(CSV_COLUMNS)
    frame = pd.read_csv(out)
    assert len(frame) == 401
    pd.testing.assert_series_equal(frame['v_p'], frame['baseline_v_p'], check_names=False, rtol=1e-10)
    pd.testing.assert_series_equal(frame['v_p_tilde'], frame['baseline_v_p_tilde'], check_names=False, rtol=1e-10, atol=1e-12)


def test_sweep_output_is_byte_identical(tmp_path):
    first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
    for out in (first, second):
        code, _ = _run(['sweep', '--config', str(SET2), '--out', str(out), '--points', '501'])
        assert code == 0
    assert first.read_bytes() == second.read_bytes()


def test_dip_footer_set2():
    code, text = _run(['dip', '--config', str(SET2)])
    assert code == 0
    footer = json.loads(text.strip().splitlines()[-1])
    assert set(footer) == {
        'delta_dip_over_omega_m', 'fwhm_rad_s', 'fwhm_hz', 'depth', 'predicted_dip_over_omega_m'
    }
    assert footer['delta_dip_over_omega_m'] == pytest.approx(2.285, abs=1e-2)


def test_dip_set1_uses_zoomed_grid():
    code, text = _run(['dip', '--config', str(SET1)])
    assert code == 0
    footer = json.loads(text.strip().splitlines()[-1])
    assert 5 <= footer['fwhm_rad_s'] <= 20 or 5 <= footer['fwhm_hz'] <= 20


def test_unresolved_dip_exits_numerical(tmp_path, capsys):
    config = _write_config(tmp_path, SET1, dip=None)
    code, _ = _run(['dip', '--config', str(config)])
    assert code == 4
    assert '[error] numerical:' in capsys.readouterr().err


def test_around_dip_flag_zooms_without_dip_section(tmp_path):
    config = _write_config(tmp_path, SET1, dip=None)
    code, _ = _run(['dip', '--config', str(config), '--around-dip'])
    assert code == 0


def test_config_error_exit_code(tmp_path, capsys):
    config = _write_config(tmp_path, SET1, reflectivity=1.0)
    code, _ = _run(['steady', '--config', str(config)])
    assert code == 2
    assert '[error] config:' in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    code, _ = _run(['steady', '--config', str(tmp_path / 'nope.json')])
    assert code == 2


def test_baseline_command():
    code, text = _run(['baseline', '--config', str(SET1), '--from', '1', '--to', '3', '--points', '201'])
    assert code == 0
    frame = pd.read_csv(io.StringIO(text))
    assert list(frame.columns) == ['delta_over_omega_m', 'baseline_v_p', 'baseline_v_p_tilde', 'abs_baseline']
    assert frame['baseline_v_p'].max() == pytest.approx(2.0)
    assert frame.loc[frame['baseline_v_p'].idxmax(), 'delta_over_omega_m'] == pytest.approx(2.0)


def test_run_log_records_each_invocation(tmp_path):
    log = tmp_path / 'runs.jsonl'
    _run(['steady', '--config', str(SET1), '--run-log', str(log)])
    _run(['steady', '--config', str(tmp_path / 'nope.json'), '--run-log', str(log)])
    records = [json.loads(line) for line in log.read_text(encoding='utf-8').splitlines()]
    assert [r['exit_code'] for r in records] == [0, 2]
    assert records[0]['status'] == 'success'
    assert len(records[0]['config_sha256']) == 64
    assert records[1]['status'] == 'config'


def test_verify_dumps_trajectory(tmp_path):
    dump = tmp_path / 'traj.csv'
    code, text = _run(['verify', '--config', str(SET2), '--dump-trajectory', str(dump)])
    assert code == 0
    report = pd.read_csv(io.StringIO(text))
    assert list(report['probe_ratio']) == [1e-3, 1e-4]
    assert report['passed'].all()
    assert list(pd.read_csv(dump, nrows=2).columns) == ['tau', 're_c', 'im_c', 'u', 'v', 'w']


def test_verify_from_config_scales_the_experiment(tmp_path):
    # ω_m-scaled damping of 0.05 keeps the transient short enough for the default window
    config = _write_config(
        tmp_path, SET2, gamma_m_rad_s=0.05 * 2 * 3.141592653589793e5, temperature_k=1.0,
    )
    desk_code, desk_text = _run(['verify', '--config', str(config)])
    code, text = _run(['verify', '--config', str(config), '--from-config'])
    assert desk_code == 0
    assert code == 0
    report = pd.read_csv(io.StringIO(text))
    assert report['passed'].all()
    assert text != desk_text
