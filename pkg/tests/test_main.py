import numpy as np
import pytest
import yaml

from beltrami_waves import fieldio, verify
from beltrami_waves.grid import HorizontalGrid
from beltrami_waves.main import build_parser, main
from beltrami_waves.schema import CheckResult

TWO_PI = 2.0 * np.pi


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    for key in ('BWAVE_CONFIG', 'BWAVE_OUT_DIR', 'BWAVE_SEED'):
        monkeypatch.setenv(key, '')
        monkeypatch.delenv(key)
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _write_config(path, N=8, Ny=12, alpha=0.3, **verify):
    doc = {
        'physical': {'alpha': alpha, 'h': 1.0, 'g': 1.0, 'sigma': 0.25, 'c1': 0.5, 'c3': 0.1},
        'grid': {'Nx': N, 'Nz': N, 'Ny': Ny, 'Lx': TWO_PI, 'Lz': TWO_PI},
        'solver': {'tol': 1e-12, 'maxit': 200},
        'verify': verify,
    }
    path.write_text(yaml.safe_dump(doc), encoding='utf-8')
    return str(path)


def test_parser_knows_every_command():
    parser = build_parser()
    for command in ('verify', 'apply-h', 'solve-bvp', 'find-wave', 'export'):
        args = parser.parse_args([command])
        assert args.command == command


def test_alpha_too_large(capsys):
    assert main(['apply-h', '--alpha', '1.6']) == 2
    err = capsys.readouterr().err
    assert "error: AlphaTooLarge:" in err
    assert len(err.strip().splitlines()) == 1


def test_odd_grid(capsys):
    assert main(['solve-bvp', '--nx', '31']) == 2
    assert "error: ConfigError:" in capsys.readouterr().err


def test_bad_field_file(workdir, capsys):
    config = _write_config(workdir / "run.yaml")
    (workdir / "eta.bwav").write_bytes(b"NOPE" + bytes(40))
    assert main(['apply-h', '--config', config, '--eta', 'eta.bwav']) == 2
    assert "error: FieldFormatError:" in capsys.readouterr().err


def test_invalid_seed_from_environment(workdir, monkeypatch, capsys):
    config = _write_config(workdir / "run.yaml")
    monkeypatch.setenv('BWAVE_SEED', 'abc')
    assert main(['solve-bvp', '--config', config]) == 2
    assert "BWAVE_SEED" in capsys.readouterr().err


def test_apply_h_on_flat_surface(workdir):
    config = _write_config(workdir / "run.yaml", alpha=0.0)
    grid = HorizontalGrid(8, 8, TWO_PI, TWO_PI)
    phi = grid.mode(1, 0) + 0.5 * grid.mode(1, 2, phase=0.3)
    fieldio.write_field("eta.bwav", np.zeros(grid.shape))
    fieldio.write_field("phi.bwav", phi)

    assert main(['apply-h', '--config', config, '--eta', 'eta.bwav', '--phi', 'phi.bwav', '--out', 'out']) == 0
    Hphi = fieldio.read_field("out/Hphi.bwav")
    expected = grid.fft_inverse(grid.kmag * np.tanh(grid.kmag) * grid.fft_forward(phi))
    np.testing.assert_allclose(Hphi, expected, atol=1e-9)
    assert fieldio.read_field("out/Kphi.bwav").shape == (2, 8, 8)
    assert (workdir / "out" / "summary.csv").read_text().startswith("quantity,value\n")


def test_solve_bvp_writes_diagnostics(workdir):
    config = _write_config(workdir / "run.yaml")
    assert main(['solve-bvp', '--config', config, '--seed', '3', '--out', 'out']) == 0
    assert fieldio.read_field("out/A_tilde.bwav").shape == (3, 12, 8, 8)
    lines = (workdir / "out" / "diagnostics.csv").read_text().splitlines()
    assert lines[0] == "iteration,residual,gauge_div,gauge_normal"
    assert len(lines) >= 2


def test_export_is_deterministic(workdir):
    config = _write_config(workdir / "run.yaml")
    assert main(['export', '--config', config, '--seed', '11', '--out', 'a']) == 0
    assert main(['export', '--config', config, '--seed', '11', '--out', 'b']) == 0
    for name in ('eta.bwav', 'phi.bwav', 'functional.csv', 'R2.bwav'):
        assert (workdir / "a" / name).read_bytes() == (workdir / "b" / name).read_bytes()
    terms = [line.split(",")[0] for line in (workdir / "a" / "functional.csv").read_text().splitlines()]
    assert terms[0] == "term"
    assert "L_volume" in terms and "L_surface" in terms


def test_output_directory_from_environment(workdir, monkeypatch):
    config = _write_config(workdir / "run.yaml")
    monkeypatch.setenv('BWAVE_OUT_DIR', 'env_out')
    assert main(['solve-bvp', '--config', config]) == 0
    assert (workdir / "env_out" / "A_tilde.bwav").exists()


def test_find_wave_from_trivial_state(workdir):
    config = _write_config(workdir / "run.yaml")
    assert main(['find-wave', '--config', config, '--out', 'out']) == 0
    lines = (workdir / "out" / "waves.csv").read_text().splitlines()
    assert lines[0] == "c1,c3,residual_R1,residual_R2,newton_steps,max_abs_eta"
    assert len(lines) == 2
    assert (workdir / "out" / "newton.csv").exists()


def test_verify_identity_suite(workdir):
    config = _write_config(workdir / "run.yaml", N=32, n_fields=2)
    assert main(['verify', '--config', config, '--suite', 'identity', '--seed', '5', '--out', 'out']) == 0
    lines = (workdir / "out" / "verify_report.csv").read_text().splitlines()
    assert lines[0] == "seed,suite,check,value,bound,passed"
    assert all(line.endswith(",true") for line in lines[1:])
    assert all(line.startswith("5,identity,") for line in lines[1:])


def test_failed_verification_exits_with_3(workdir, monkeypatch, capsys):
    def failing(config, rng):
        return [CheckResult(suite="identity", check="perp_dot", value=1.0, bound=1e-10, passed=False)]

    monkeypatch.setitem(verify.SUITES, "identity", failing)
    config = _write_config(workdir / "run.yaml")
    assert main(['verify', '--config', config, '--suite', 'identity', '--seed', '5', '--out', 'out']) == 3
    err = capsys.readouterr().err
    assert "error: VerificationFailed:" in err
    assert "identity/perp_dot" in err
    # レポートは失敗時にも書き出される
    lines = (workdir / "out" / "verify_report.csv").read_text().splitlines()
    assert lines[1].endswith(",false")
