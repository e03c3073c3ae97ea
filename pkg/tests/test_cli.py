import csv
import json
import os

import pytest

from nogap import nogap
from nogap.modules.python import SweepInterface
from nogap.modules.python.SweepInterface import evaluate_point
from nogap.version import __version__
from nogap.modules.python.ExperimentConfig import ExperimentConfig, load_config
from nogap.modules.python.RunInterface import run
from nogap.modules.python.DataStore import DataStore
from nogap.modules.python.FileManager import FileManager
from nogap.modules.python.Options import SweepOptions
from nogap.modules.python.Exceptions import ConfigInvalid, PartialFailure, ComputeFailed

FINITE = {'kind': 'explicit', 'terms': [1, 4, 9]}
SQUARES = {'kind': 'quadratic', 'params': {'inv_p': 1, 'omega': 0}}
CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, 'configs')


def _write_config(tmp_path, values, name='config.json'):
    path = tmp_path / name
    path.write_text(json.dumps(values) if name.endswith('.json') else values)
    return str(path)


def _read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_empty_config_is_invalid(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_config(_write_config(tmp_path, {}), 'cost')
    with pytest.raises(ConfigInvalid):
        load_config(_write_config(tmp_path, '', 'empty.yaml'))
    with pytest.raises(ConfigInvalid):
        load_config(str(tmp_path / 'missing.json'))


def test_unknown_fields_are_rejected():
    with pytest.raises(ConfigInvalid) as error:
        ExperimentConfig.from_dict({'command': 'cost', 'sequence': FINITE, 'horizon': 1})
    assert error.value.witness['fields'] == 'horizon'


def test_defaults_and_overrides():
    config = ExperimentConfig.from_dict({'command': 'biortho', 'sequence': FINITE, 'k': {'from': 2, 'to': 4}})
    assert config.k == [2, 3, 4]
    assert config.T == [1.0]
    config.override(precision_bits=256, threads=2)
    assert config.precision().bits == 256
    assert config.threads == 2
    with pytest.raises(ConfigInvalid):
        config.override(precision_bits=8)


def test_grid_only_for_sweep():
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.from_dict({'command': 'cost', 'sequence': FINITE, 'grid': {'T': [1]}})
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.from_dict({'command': 'sweep', 'sequence': FINITE, 'grid': {'gamma': [0.5]}})


def test_yaml_config(tmp_path):
    text = "command: cost\nsequence:\n  kind: explicit\n  terms: [1, 4]\nT: [0.5, 1.0]\nrtol: 1.0e-8\n"
    config = load_config(_write_config(tmp_path, text, 'cost.yaml'))
    assert config.command == 'cost'
    assert config.T == [0.5, 1.0]
    assert config.rtol == 1e-8


def test_command_mismatch(tmp_path):
    path = _write_config(tmp_path, {'command': 'cost', 'sequence': FINITE})
    with pytest.raises(ConfigInvalid):
        load_config(path, 'sweep')


def test_cost_run_and_replay(tmp_path, output_dir):
    config = ExperimentConfig.from_dict({'command': 'cost', 'sequence': FINITE, 'T': [0.5, 1.0],
                                         'precision_bits': 256, 'output_dir': output_dir})
    assert run(config) == 0
    manifest_path = os.path.join(output_dir, 'manifest.json')
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    assert manifest['status'] == 'ok'
    assert manifest['nogap_version'] == __version__
    assert 'cost.json' in manifest['artifacts']
    assert 'results.csv' in manifest['artifacts']
    rows = _read_rows(os.path.join(output_dir, 'results.csv'))
    assert rows[0] == ['T', 'K', 'M_star', 'precision_bits']
    assert len(rows) == 3

    with open(manifest_path) as fh:
        first = fh.read()
    replay = load_config(manifest_path, 'cost')
    assert replay.to_dict() == config.to_dict()
    assert run(replay) == 0
    with open(manifest_path) as fh:
        assert fh.read() == first


def test_classify_run(output_dir):
    config = ExperimentConfig.from_dict({'command': 'classify', 'sequence': {'kind': 'grouped', 'params': {'m': 2}},
                                         'prefix': 30, 'precision_bits': 256, 'output_dir': output_dir})
    assert run(config) == 0
    with open(os.path.join(output_dir, 'classify.json')) as fh:
        record = json.load(fh)
    assert record['lowered_q']['H5'] == 'FAIL'


def test_classify_without_parameters(output_dir):
    config = ExperimentConfig.from_dict({'command': 'classify', 'sequence': FINITE, 'output_dir': output_dir})
    assert run(config) == ConfigInvalid.exit_code
    with open(os.path.join(output_dir, 'manifest.json')) as fh:
        assert json.load(fh)['status'] == 'config_invalid'


def test_sweep_grid_is_cached(output_dir):
    horizons = [0.25 + 0.05 * i for i in range(16)]
    values = {'command': 'sweep', 'sequence': FINITE, 'grid': {'T': horizons}, 'precision_bits': 256,
              'output_dir': output_dir}
    assert run(ExperimentConfig.from_dict(values)) == 0
    rows = _read_rows(os.path.join(output_dir, 'results.csv'))
    assert len(rows) == 17
    assert [float(row[1]) for row in rows[1:]] == pytest.approx(horizons)
    assert all(row[5] == 'ok' for row in rows[1:])
    with DataStore(os.path.join(output_dir, SweepOptions.CACHE_FILE), 'r') as store:
        assert len(store.result_keys()) == 16
        assert store.meta['created_by'] == 'nogap sweep'
    assert run(ExperimentConfig.from_dict(values)) == 0
    assert _read_rows(os.path.join(output_dir, 'results.csv')) == rows


def test_data_store(tmp_path):
    path = str(tmp_path / 'store.h5')
    key = FileManager.content_hash({'T': 1.0, 'sequence': FINITE})
    assert key == FileManager.content_hash({'sequence': FINITE, 'T': 1.0})
    with DataStore(path, 'w') as store:
        assert store.read_result(key) is None
        store.write_result(key, {'K': '2.5', 'M_star': 3})
        store.update_meta({'nogap_version': __version__})
    with DataStore(path, 'r') as store:
        assert store.has_result(key)
        assert store.read_result(key) == {'K': '2.5', 'M_star': 3}
        assert store.meta['nogap_version'] == __version__


def test_main_version(capsys):
    nogap.main(['version'])
    assert __version__ in capsys.readouterr().out


def test_main_runs_config(tmp_path, output_dir):
    path = _write_config(tmp_path, {'command': 'cost', 'sequence': FINITE, 'T': [1.0]})
    with pytest.raises(SystemExit) as status:
        nogap.main(['cost', '-c', path, '-o', output_dir, '-p', '256'])
    assert status.value.code == 0
    assert os.path.isfile(os.path.join(output_dir, 'cost.svg'))


def test_main_bad_config(tmp_path):
    path = _write_config(tmp_path, {'command': 'cost', 'sequence': FINITE, 'M_max': 0})
    with pytest.raises(SystemExit) as status:
        nogap.main(['cost', '-c', path])
    assert status.value.code == ConfigInvalid.exit_code


def test_point_without_plateau_is_an_error():
    record = evaluate_point(SQUARES, None, 1.0, 10, 256, 1e-60)
    assert record['status'] == 'error'
    assert 'PLATEAU' in record['error']
    assert record['K'] == ''


def test_serial_sweep_survives_unexpected_failures(monkeypatch, output_dir):
    exact = SweepInterface.control_cost

    def flaky(problem, rtol, m_max):
        if problem.T < 0.75:
            raise RuntimeError("worker lost")
        return exact(problem, rtol, m_max=m_max)

    monkeypatch.setattr(SweepInterface, 'control_cost', flaky)
    values = {'command': 'sweep', 'sequence': FINITE, 'grid': {'T': [0.5, 1.0]}, 'precision_bits': 256,
              'threads': 1, 'output_dir': output_dir}
    assert run(ExperimentConfig.from_dict(values)) == PartialFailure.exit_code
    rows = _read_rows(os.path.join(output_dir, 'results.csv'))
    assert [row[5] for row in rows[1:]] == ['error', 'ok']
    assert 'RuntimeError' in rows[1][6]
    # failed points are never cached
    with DataStore(os.path.join(output_dir, SweepOptions.CACHE_FILE), 'r') as store:
        assert len(store.result_keys()) == 1


def test_bounds_run_reports_certificates(output_dir):
    config = ExperimentConfig.from_dict({'command': 'bounds', 'sequence': SQUARES, 'T': [1.0], 'k': [3],
                                         'rtol': 1e-6, 'M_max': 40, 'precision_bits': 256,
                                         'output_dir': output_dir})
    assert run(config) == 0
    rows = _read_rows(os.path.join(output_dir, 'results.csv'))
    assert rows[0][:5] == ['k', 'T', 'lower', 'observed', 'estimated']
    assert rows[1][rows[0].index('certificate')] == 'holds'
    with open(os.path.join(output_dir, 'bounds.json')) as fh:
        record = json.load(fh)
    assert record['per_order_violations'] == []
    assert record['reports'][0]['provenance']['M_max'] == 40


def test_bounds_run_honours_the_order_cap(output_dir):
    config = ExperimentConfig.from_dict({'command': 'bounds', 'sequence': SQUARES, 'T': [1.0], 'k': [3],
                                         'rtol': 1e-60, 'M_max': 10, 'precision_bits': 256,
                                         'output_dir': output_dir})
    assert run(config) == ComputeFailed.exit_code


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(os.listdir(CONFIG_DIR)))
def test_shipped_configs_run(name, tmp_path):
    with pytest.raises(SystemExit) as status:
        nogap.main([load_config(os.path.join(CONFIG_DIR, name)).command, '-c', os.path.join(CONFIG_DIR, name),
                    '-o', str(tmp_path / 'out')])
    assert status.value.code == 0
