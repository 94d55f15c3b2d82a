import numpy as np
import pytest

from beltrami_waves import fieldio
from beltrami_waves.errors import FieldFormatError
from beltrami_waves.schema import BvpSolution, IterationRecord


@pytest.mark.parametrize("shape", [(8, 8), (2, 8, 8), (5, 8, 8), (3, 5, 8, 8)])
def test_roundtrip_is_bit_identical(tmp_path, rng, shape):
    field = rng.standard_normal(shape)
    path = tmp_path / "f.bwav"
    fieldio.write_field(str(path), field)
    back = fieldio.read_field(str(path))
    assert back.shape == field.shape
    assert back.tobytes() == field.tobytes()


def test_header_layout(tmp_path, rng):
    path = tmp_path / "f.bwav"
    fieldio.write_field(str(path), rng.standard_normal((3, 5, 8, 6)))
    blob = path.read_bytes()
    assert blob[:4] == b"BWAV"
    assert np.frombuffer(blob[4:24], dtype="<u4").tolist() == [1, 8, 6, 5, 3]
    assert len(blob) == 24 + 8 * 8 * 6 * 5 * 3


def _blob(dims, version=1, extra=0, missing=0):
    header = b"BWAV" + np.array([version, *dims], dtype="<u4").tobytes()
    body = np.zeros(int(np.prod(dims)) * 8 + extra - missing, dtype=np.uint8).tobytes()
    return header + body


@pytest.mark.parametrize("blob, offset", [
    (b"XWAV" + bytes(20), 0),
    (b"BWAV" + bytes(10), 14),
    (_blob((2, 2, 1, 1), version=2), 4),
    (_blob((2, 0, 1, 1)), 12),
    (_blob((2, 2, 1, 1), missing=3), 24 + 32 - 3),
    (_blob((2, 2, 1, 1), extra=5), 24 + 32),
])
def test_format_errors_report_offset(blob, offset):
    with pytest.raises(FieldFormatError) as info:
        fieldio.parse_raw(blob)
    assert info.value.offset == offset
    assert info.value.exit_code == 2


def test_surface_field_must_match_grid(tmp_path, grid, tiny_grid):
    path = tmp_path / "eta.bwav"
    fieldio.write_field(str(path), np.zeros(tiny_grid.shape))
    assert fieldio.read_surface_field(str(path), tiny_grid).shape == tiny_grid.shape
    with pytest.raises(FieldFormatError):
        fieldio.read_surface_field(str(path), grid)


def test_surface_csv(tmp_path, tiny_grid):
    path = tmp_path / "eta.csv"
    fieldio.write_surface_csv(str(path), tiny_grid.mode(1, 0), tiny_grid)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,z,value"
    assert len(lines) == tiny_grid.Nx * tiny_grid.Nz + 1
    x, z, value = (float(v) for v in lines[1].split(","))
    assert (x, z, value) == (0.0, 0.0, 1.0)


def test_gnuplot_blocks(tmp_path, tiny_grid):
    path = tmp_path / "eta.dat"
    fieldio.write_gnuplot(str(path), tiny_grid.mode(0, 1), tiny_grid)
    blocks = path.read_text().split("\n\n")
    # 末尾の空ブロックを除く
    blocks = [b for b in blocks if b.strip()]
    assert len(blocks) == tiny_grid.Nx
    assert len(blocks[1].strip().splitlines()) == tiny_grid.Nz


def test_table_formatting(tmp_path):
    path = tmp_path / "t.csv"
    fieldio.write_table_csv(str(path), ("name", "n", "value", "passed"),
                            [("a", 3, 0.1, True), ("b", np.int64(4), np.float64(2.5), np.bool_(False))])
    assert path.read_text().splitlines() == [
        "name,n,value,passed",
        "a,3,0.10000000000000001,true",
        "b,4,2.5,false",
    ]


def test_diagnostics_csv(tmp_path):
    records = [IterationRecord(iteration=i, residual=10.0 ** -i, gauge_div=0.0, gauge_normal=0.0)
               for i in (1, 2)]
    solution = BvpSolution(A_tilde=np.zeros((3, 4, 8, 8)), iterations=2, residual_history=[0.1, 0.01],
                           gauge_div=0.0, gauge_normal=0.0, diagnostics=records)
    path = tmp_path / "diagnostics.csv"
    fieldio.write_diagnostics_csv(str(path), solution)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,residual,gauge_div,gauge_normal"
    assert lines[2].startswith("2,0.01,")
