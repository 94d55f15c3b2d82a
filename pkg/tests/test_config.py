import os

import pytest

from beltrami_waves.config import (DEFAULT_CONFIG_PATH, RunConfig, apply_overrides, build_solver,
                                   load_config, load_environment, read_yaml)
from beltrami_waves.errors import AlphaTooLarge, ConfigError


def test_packaged_defaults_match_models():
    assert load_config() == RunConfig()
    assert read_yaml(DEFAULT_CONFIG_PATH)['physical']['alpha'] == pytest.approx(0.1)


def test_overrides_are_applied():
    config = load_config(overrides={'alpha': 0.4, 'nx': 16, 'tol': 1e-8, 'c3': None})
    assert config.physical.alpha == 0.4
    assert config.grid.Nx == 16
    assert config.solver.tol == 1e-8
    assert config.physical.c3 == 0.0


def test_unknown_override():
    with pytest.raises(ConfigError):
        apply_overrides({}, {'beta': 1.0})


def test_alpha_too_large():
    with pytest.raises(AlphaTooLarge) as info:
        load_config(overrides={'alpha': 1.6})
    assert info.value.exit_code == 2


def test_odd_grid_is_rejected():
    with pytest.raises(ConfigError, match="grid.Nx"):
        load_config(overrides={'nx': 31})


def test_large_kh_is_rejected():
    with pytest.raises(ConfigError):
        load_config(overrides={'lx': 0.5, 'nx': 64})


def test_malformed_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("physical: [alpha: 0.1\n", encoding='utf-8')
    with pytest.raises(ConfigError, match="malformed"):
        load_config(str(path))


def test_top_level_must_be_mapping(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n", encoding='utf-8')
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "nope.yaml"))


def test_partial_file_keeps_defaults(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text("grid:\n  Nx: 16\n  Nz: 16\n", encoding='utf-8')
    config = load_config(str(path))
    assert config.grid.Nx == 16
    assert config.grid.Ny == RunConfig().grid.Ny
    assert config.solver == RunConfig().solver


def test_environment_file(tmp_path, monkeypatch):
    for key in ('BWAVE_CONFIG', 'BWAVE_OUT_DIR', 'BWAVE_SEED'):
        monkeypatch.setenv(key, '')
        monkeypatch.delenv(key)
    monkeypatch.chdir(tmp_path)
    os.makedirs("env")
    (tmp_path / "env" / "bwave.env").write_text("BWAVE_SEED=7\nBWAVE_OUT_DIR=results\n", encoding='utf-8')
    monkeypatch.setenv('BWAVE_OUT_DIR', 'from_shell')
    env = load_environment()
    assert env['BWAVE_SEED'] == '7'
    # 既存の環境変数が優先
    assert env['BWAVE_OUT_DIR'] == 'from_shell'
    assert env['BWAVE_CONFIG'] is None


def test_build_solver_from_config():
    config = load_config(overrides={'nx': 16, 'nz': 16, 'ny': 8, 'alpha': 0.2})
    solver = build_solver(config)
    assert solver.grid.shape == (16, 16)
    assert solver.vgrid.Ny == 8
    assert solver.alpha == 0.2
    reduced = build_solver(config, config.verify.reduced_grid)
    assert reduced.grid.shape == (16, 16)
    assert reduced.vgrid.Ny == 16
