import json
from pathlib import Path

import pytest

from scripts.generate_reproduction_report import SCHEMA_PATH, build_report, write_outputs


@pytest.fixture(scope='module')
def report_paths(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp('reports')
    return write_outputs(build_report(), out_dir)


@pytest.fixture(scope='module')
def report(report_paths):
    json_path, _ = report_paths
    return json.loads(json_path.read_text(encoding='utf-8'))


@pytest.mark.dependency()
def test_schema_file_exists():
    assert SCHEMA_PATH.exists(), 'Schema file missing. Expected at schemas/reproduction_report.schema.json'


@pytest.mark.dependency(depends=['test_schema_file_exists'])
def test_report_written(report_paths):
    json_path, md_path = report_paths
    assert json_path.exists()
    assert md_path.read_text(encoding='utf-8').startswith('# Reproduction Report')


@pytest.mark.dependency(depends=['test_schema_file_exists', 'test_report_written'])
def test_report_validates_against_schema(report):
    import jsonschema
    schema = json.loads(SCHEMA_PATH.read_text(encoding='utf-8'))
    jsonschema.validate(instance=report, schema=schema)


@pytest.mark.dependency(depends=['test_report_written'])
def test_reported_dips(report):
    set1, set2 = report['sets']['set1'], report['sets']['set2']
    assert set2['dip']['delta_dip_over_omega_m'] == pytest.approx(2.285, abs=1e-2)
    assert set2['dip']['fwhm_rad_s'] / (2 * 3.141592653589793e5) == pytest.approx(0.02, rel=0.2)
    assert set1['steady']['alpha'] == pytest.approx(0.013, abs=1e-3)
    assert set2['steady']['alpha'] == pytest.approx(0.155, abs=5e-3)
    for data in (set1, set2):
        dip = data['dip']
        assert abs(dip['delta_dip_over_omega_m'] - dip['predicted_dip_over_omega_m']) < 1e-2
        assert data['dispersion_inverted_at_dip']


@pytest.mark.dependency(depends=['test_report_written'])
def test_temperature_series_is_increasing(report):
    depths = [row['depth'] for row in report['temperature_series']]
    assert [row['temperature_k'] for row in report['temperature_series']] == [20.0, 60.0, 100.0]
    assert depths == sorted(depths) and len(set(depths)) == 3


@pytest.mark.dependency(depends=['test_report_written'])
def test_schema_reference_is_repo_relative(report):
    assert report['$schema'] == 'schemas/reproduction_report.schema.json'
