import json

import numpy as np

import pytest

from divput.cli import main


def test_price_points(capsys):
    assert main(["price", "--config", "coarse", "-x", "0", "-x", "90", "-t", "4"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "t,x,value"
    assert out[1] == "4,0,100"
    assert out[2] == "4,90,10"


def test_price_at_zero_is_strike(capsys):
    assert main(["price", "--config", "coarse", "-x", "0", "-t", "0"]) == 0
    assert capsys.readouterr().out.splitlines()[1] == "0,0,100"


def test_boundary_csv_is_stable(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["boundary", "--config", "coarse", "--out", str(a)]) == 0
    assert main(["boundary", "--config", "coarse", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().splitlines()
    assert rows[0] == "t,c"
    ts = [float(r.split(",")[0]) for r in rows[1:]]
    assert ts == sorted(ts) and len(ts) == len(set(ts))


def test_escrowed_boundary(tmp_path):
    cfg = tmp_path / "esc.json"
    cfg.write_text(json.dumps({
        "market": {"r": 0.04, "sigma": 0.3}, "option": {"K": 100, "T": 3},
        "dividends": [{"date": 2.0, "family": "constant", "amount": 5}],
        "engine": {"grid": {"n_log": 200}, "time_steps": {"dt_min": 0.002, "growth": 1.1, "dt_max": 0.02}},
    }))
    out = tmp_path / "c.csv"
    assert main(["boundary", "--config", str(cfg), "--escrowed", "--out", str(out)]) == 0
    rows = [tuple(map(float, r.split(","))) for r in out.read_text().splitlines()[1:]]
    inside = [c for t, c in rows if 2.0 - 1.15 < t < 2.0]
    assert inside and all(c == 0 for c in inside)


def test_verify_exit_codes(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["verify", "coarse", "--out", str(out)]) == 1
    err = capsys.readouterr().err
    assert "failing checks" in err and "smooth_contact_pre[3.5]" in err
    assert json.loads(out.read_text())["overall"] is False
    bad = tmp_path / "bad.json"
    bad.write_text('{"market": {}}')
    assert main(["verify", "--config", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_figure1_requires_interpretation():
    with pytest.raises(SystemExit) as e:
        main(["figure1"])
    assert e.value.code == 2


@pytest.mark.slow
def test_verify_default_passes(tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", "--config", "default", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["overall"] is True


@pytest.mark.parametrize("flag", [["--rho-literal", "0.05"], ["--dividend-fraction", "0.05"]])
def test_figure1_shape(tmp_path, capsys, flag):
    out = tmp_path / "f.csv"
    assert main(["figure1", *flag, "--steps", "400", "--out", str(out)]) == 0
    assert "max |c(N) - c(N/2)|" in capsys.readouterr().err
    rows = np.array([list(map(float, r.split(","))) for r in out.read_text().splitlines()[1:]])
    t, c = rows[:, 0], rows[:, 1]
    pre = c[(t < 3.5) & (t > 3.4)]
    assert pre.min() < 1.0 and np.all(c[t < 3.5] > 0)
    assert np.all(c[(t >= 3.5) & (t < 4.0)] > 47.0)
