import numpy as np
import pytest

from splinestab.cli import load_centers, main


@pytest.fixture
def pts(tmp_path):
    path = tmp_path / "pts.txt"
    assert main(["gen-centers", "--spec", "uniform-grid(n=17)", "--out", str(path)]) == 0
    return path


def csv_body(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def test_lebesgue_contract(pts, tmp_path):
    out = tmp_path / "rep.csv"
    assert main(["lebesgue", "--centers", str(pts), "--m", "2", "--sigma", "0",
                 "--out", str(out)]) == 0
    body = csv_body(out)
    assert body[0] == "x0,lebesgue_sum,penalized_sum,rho"
    assert len(body) > 10


def test_missing_file(tmp_path, capsys):
    missing = tmp_path / "nope.txt"
    assert main(["lebesgue", "--centers", str(missing), "--out", str(tmp_path / "r.csv")]) == 4
    assert str(missing) in capsys.readouterr().err


def test_collinear_is_numerical(tmp_path, capsys):
    path = tmp_path / "line.txt"
    path.write_text("0 0\n0.5 0.5\n1 1\n")
    assert main(["lebesgue", "--centers", str(path), "--domain", "box:0,1;0,1",
                 "--out", str(tmp_path / "r.csv")]) == 3
    assert "unisolvent" in capsys.readouterr().err


def test_usage_errors(pts, tmp_path):
    assert main(["lebesgue", "--out", "x.csv"]) == 2
    assert main(["bogus"]) == 2
    assert main(["lagrange", "--centers", str(pts), "--index", "99",
                 "--out", str(tmp_path / "l.csv")]) == 2
    assert main(["sweep", "--set", "nodot=1", "--out", str(tmp_path / "s.csv")]) == 2


def test_domain_header_roundtrip(tmp_path):
    path = tmp_path / "c.txt"
    assert main(["gen-centers", "--spec", "graded(n=9, g=2, focus=0)", "--domain", "box:-1,2",
                 "--r0", "0.2", "--out", str(path)]) == 0
    cs = load_centers(str(path))
    assert cs.domain.lower == (-1.0,) and cs.domain.upper == (2.0,) and cs.domain.r0 == 0.2
    assert len(cs) == 9 and 0.0 in cs.points[:, 0]


@pytest.mark.parametrize("cmd", [
    ["density", "--degree", "2"],
    ["interp", "--function", "bump(center=0.5, radius=0.4)"],
    ["lagrange", "--index", "0", "8"],
    ["lebesgue", "--sigma", "1", "--eps", "0.5", "--grid", "interval"],
    ["decay", "--eps", "0.5", "--index", "8"],
])
def test_subcommands_repeatable(pts, tmp_path, cmd):
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}.csv"
        assert main([cmd[0], "--centers", str(pts), *cmd[1:], "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert b"# centers_sha256=" in outs[0]


def test_interp_values(pts, tmp_path):
    data = tmp_path / "d.txt"
    x = np.linspace(0, 1, 17)
    np.savetxt(data, 3 * x - 1)
    out = tmp_path / "i.csv"
    assert main(["interp", "--centers", str(pts), "--data", str(data), "--out", str(out)]) == 0
    body = csv_body(out)
    vals = np.array([[float(v) for v in line.split(",")] for line in body[1:]])
    np.testing.assert_allclose(vals[:, 1], 3 * vals[:, 0] - 1, atol=1e-10)


def test_sweep_and_converge(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[centers]\nlevels = 9, 17, 33\n[stability]\nsigma = 1\nrestrict = all\n")
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    body = csv_body(out)
    assert body[0] == "n,lebesgue,penalized,c0,eps_star,max_rho,grid_points" and len(body) == 4
    out2 = tmp_path / "v.csv"
    assert main(["converge", "--config", str(cfg), "--set", "spline.m=2", "--out", str(out2)]) == 0
    text = out2.read_text()
    assert "# order_probe0=" in text and "# config_sha256=" in text
