import io

import numpy as np
import pytest

from sparsedom.cli import main, parse_cube, read_grid_csv, write_grid_csv
from sparsedom.dyadic_core import DyadicCube


@pytest.fixture
def grids(tmp_path):
    rng = np.random.default_rng(0)
    paths = []
    for name, shape in [("a", (16,)), ("b", (16,)), ("c", (8, 8))]:
        f = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        p = tmp_path / f"{name}.csv"
        with open(p, "w") as fh:
            write_grid_csv(f, fh)
        paths.append((p, f))
    return paths


def test_grid_csv_roundtrip(grids):
    for p, f in grids:
        assert np.array_equal(np.asarray(read_grid_csv(p)), f)


def test_parse_cube():
    assert parse_cube("8,0@3", 16, 2) == DyadicCube((8, 0), 3)
    assert parse_cube(None, 16, 1) == DyadicCube((0,), 4)
    with pytest.raises(ValueError):
        parse_cube("8@3", 16, 2)


def _run(args, tmp_path, name):
    out = tmp_path / name
    assert main([*args, "--out", str(out)]) == 0
    return out.read_bytes()


def test_decompose(grids, tmp_path):
    text = _run(["decompose", str(grids[2][0]), "--s0", "0,0@2", "--mode", "paper"], tmp_path, "d.csv").decode()
    lines = text.splitlines()
    assert lines[0] == "lemma,seed,measured,bound,pass"
    assert all(line.endswith("true") for line in lines[1:])
    assert any(line.startswith("exceptional_set_size") for line in lines)


def test_sparse_and_norms(grids, tmp_path):
    text = _run(["sparse", str(grids[0][0]), str(grids[1][0]), "--p1", "1.5"], tmp_path, "s.csv").decode()
    assert "value," in text and "log_side,corner0,carleson_sum" in text
    text = _run(["sparse", str(grids[0][0]), str(grids[1][0]), "--localized", "--s0", "4@2"], tmp_path, "s2.csv").decode()
    assert "lambda_double_star" in text
    text = _run(["norms", "oscillatory a=2 b=0.5", "--k", "0,1", "--ell-max", "1", "--p", "1", "--q", "inf"], tmp_path, "n.csv").decode()
    assert text.splitlines()[0].startswith("k,ell,lower,upper")
    assert len(text.splitlines()) == 5


def test_experiment_config_and_determinism(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("a=2\nb=0.5\nt=4,8,16,32,64\nseed=9\n")
    a = _run(["experiment", "stationary_phase", "--config", str(cfg)], tmp_path, "e1.csv")
    b = _run(["experiment", "stationary_phase", "--config", str(cfg)], tmp_path, "e2.csv")
    assert a == b
    assert b"seed,9" in a and b"a,2.0" in a
    c = _run(["experiment", "stationary_phase", "--config", str(cfg), "--seed", "3", "--set", "b=0"], tmp_path, "e3.csv")
    assert b"seed,3" in c and b"b,0.0" in c


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("i,re\n0,1\n")
    assert main(["sparse", str(bad), str(bad)]) == 2
    assert "error" in capsys.readouterr().err
