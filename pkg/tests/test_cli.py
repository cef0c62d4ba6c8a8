import os

import pytest

from flex_tpu.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_VERIFY, main, parse_sizes
from flex_tpu.errors import ValidationError
from flex_tpu.pe_grid_sim import SimResult
from flex_tpu.report import parse_report_csv, parse_speedup_table

TINY = ('Layer name,IFMAP Height,IFMAP Width,Filter Height,Filter Width,Channels,Num Filter,Strides,Padding\n'
        'c1,4,4,3,3,2,3,1,1\n'
        'fc,1,1,1,1,12,4,1,0\n')


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """ An empty working directory, so no default cfg/ file is picked up. """
    monkeypatch.chdir(tmp_path)
    (tmp_path / 'tiny.csv').write_text(TINY)
    return tmp_path


def test_parse_sizes():
    assert parse_sizes('32x32, 128X64') == [(32, 32), (128, 64)]
    with pytest.raises(ValidationError):
        parse_sizes('32by32')


def test_run(workdir):
    status = main(['run', '--topology', 'tiny.csv', '--rows', '2', '--cols', '2', '--out', 'out/report.csv'])
    assert status == EXIT_OK
    with open(str(workdir / 'out' / 'report.csv')) as f:
        assert [row.layer_name for row in parse_report_csv(f.read())] == ['c1', 'fc']


def test_run_bundled_model(workdir):
    status = main(['run', '--topology', 'resnet18', '--dataflow', 'os', '--out', 'r.csv'])
    assert status == EXIT_OK
    with open(str(workdir / 'r.csv')) as f:
        rows = parse_report_csv(f.read())
    assert len(rows) == 21
    assert rows[0].cycles == 188944


def test_run_with_verify(workdir):
    assert main(['run', '--topology', 'tiny.csv', '--rows', '2', '--cols', '2', '--verify']) == EXIT_OK


def test_missing_topology_is_io_error(workdir):
    assert main(['run', '--topology', 'nowhere.csv']) == EXIT_IO


def test_malformed_topology_is_invalid(workdir):
    (workdir / 'bad.csv').write_text(TINY + 'c3,4,4\n')
    assert main(['run', '--topology', 'bad.csv']) == EXIT_INVALID


def test_missing_topology_argument_is_invalid(workdir):
    assert main(['run']) == EXIT_INVALID


def test_no_command_is_invalid(workdir):
    assert main([]) == EXIT_INVALID


def test_verify_mismatch_exit_status(workdir, monkeypatch):
    def broken(a, b, array, df, trace_cap=None):
        return SimResult(a.dot(b), 1, [1], df)

    monkeypatch.setattr('flex_tpu.scheduler.simulate_gemm', broken)
    status = main(['run', '--topology', 'tiny.csv', '--rows', '2', '--cols', '2', '--verify'])
    assert status == EXIT_VERIFY


def test_sweep(workdir):
    status = main(['sweep', '--topology', 'tiny.csv', '--sizes', '2x2,4x4', '--out', 'sweep.csv'])
    assert status == EXIT_OK
    with open(str(workdir / 'sweep.csv')) as f:
        lines = f.read().splitlines()
    assert len(lines) == 1 + 2 * 2


def test_sweep_without_sizes_is_invalid(workdir):
    assert main(['sweep', '--topology', 'tiny.csv', '--sizes', '']) == EXIT_INVALID


def test_table(workdir):
    (workdir / 'other.csv').write_text(TINY.replace('c1,', 'c0,'))
    status = main(['table', '--topology', 'tiny.csv', 'other.csv', '--rows', '2', '--cols', '2',
                   '--out', 't.csv', '--plot-out', 'p.csv'])
    assert status == EXIT_OK
    with open(str(workdir / 't.csv')) as f:
        comparisons, means = parse_speedup_table(f.read())
    assert [c.model_name for c in comparisons] == ['tiny', 'other']
    assert all(value >= 1.0 for value in means.values())
    with open(str(workdir / 'p.csv')) as f:
        assert len(f.read().splitlines()) == 1 + 2 * 4


def test_yaml_config_and_flag_override(workdir):
    (workdir / 'run.yaml').write_text(
        'topology: tiny.csv\n'
        'dataflow: ws\n'
        'array:\n'
        '  rows: 2\n'
        '  cols: 2\n'
        'output:\n'
        '  dir: results\n'
        '  report: report.csv\n'
        '  schedule: schedule.csv\n'
        'save_conf_name: config.yaml\n')
    status = main(['run', '--config', 'run.yaml', '--dataflow', 'os'])
    assert status == EXIT_OK
    assert os.path.exists(str(workdir / 'results' / 'config.yaml'))
    assert os.path.exists(str(workdir / 'results' / 'schedule.csv'))
    with open(str(workdir / 'results' / 'report.csv')) as f:
        assert {row.dataflow.name for row in parse_report_csv(f.read())} == {'OS'}


def test_non_utf8_topology_is_invalid(workdir):
    (workdir / 'latin.csv').write_bytes(b'\xff\xfe' + TINY.encode())
    assert main(['run', '--topology', 'latin.csv']) == EXIT_INVALID


@pytest.mark.parametrize('setting', ['array:\n  rows: abc\n', 'trace_cap: many\n',
                                     'clock:\n  static_ns: fast\n'])
def test_non_numeric_config_value_is_invalid(workdir, setting):
    (workdir / 'run.yaml').write_text('topology: tiny.csv\n' + setting)
    assert main(['run', '--config', 'run.yaml']) == EXIT_INVALID


def test_malformed_sweep_sizes_in_config_are_invalid(workdir):
    (workdir / 'sweep.yaml').write_text('topology: tiny.csv\nsizes:\n  - 4\n')
    assert main(['sweep', '--config', 'sweep.yaml']) == EXIT_INVALID
