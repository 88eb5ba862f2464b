import numpy as np
import pytest

from mpiga import bench, cli, multipatch, quadlayout


@pytest.fixture
def fig_obj(tmp_path):
    mesh = quadlayout.mesh_from_multipatch(multipatch.make_fig_domain(), 2)
    path = tmp_path / "fig.obj"
    path.write_text(quadlayout.dump_quad_obj(mesh))
    return path


def test_trace_command(fig_obj, tmp_path, capsys):
    out = tmp_path / "fig.mpatch"
    assert cli.main(["trace", str(fig_obj), "-o", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "patches=6 iEV=2 bEV=0"
    mp = multipatch.loads(out.read_text())
    assert len(mp.patches) == 6


def test_trace_bad_mesh(tmp_path, capsys):
    bad = tmp_path / "bad.obj"
    bad.write_text("v 0 0\nv 1 0\nv 1 1\nf 1 2 3\n")
    assert cli.main(["trace", str(bad), "-o", str(tmp_path / "x.mpatch")]) == 2
    assert cli.main(["trace", str(tmp_path / "missing.obj"), "-o", str(tmp_path / "x.mpatch")]) == 2
    assert "error" in capsys.readouterr().err


def test_gate_rejection_exit_code(tmp_path, capsys):
    rc = cli.main(["bench", "biharmonic", "--domain", "fig6", "--coupling", "smooth-c1",
                   "-p", "2", "-r", "0", "-o", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "requirement gate" in err and "iEV=2" in err
    assert not (tmp_path / "biharmonic.csv").exists()


@pytest.mark.parametrize("argv", [
    ["bench", "biharmonic", "--coupling", "glue"],
    ["bench", "biharmonic", "-p", "2", "-r", "2"],
    ["bench"],
    ["bench", "--config", "/nonexistent/file.cfg"],
])
def test_config_rejection_exit_code(argv, capsys):
    assert cli.main(argv) == 2


def test_numerical_failure_exit_code(monkeypatch, tmp_path, capsys):
    def broken(*args, **kwargs):
        raise np.linalg.LinAlgError("factorization broke down")

    monkeypatch.setattr(bench.linalg, "solve_spd", broken)
    rc = cli.main(["bench", "biharmonic", "-L", "1", "-o", str(tmp_path)])
    assert rc == 1
    assert "numerical failure" in capsys.readouterr().err


def test_bench_writes_csv_and_rates(tmp_path, capsys):
    rc = cli.main(["bench", "biharmonic", "-p", "3", "-r", "2", "-L", "3", "-o", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "L2=" in out and "wrote" in out
    assert (tmp_path / "biharmonic.csv").read_text().startswith("level,h,dofs,L2,H1,H2")
    assert (tmp_path / "rates.txt").exists()


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"study = biharmonic\np = 2\nr = 1\nL = 2\no = {tmp_path / 'from_file'}\n")
    assert cli.main(["bench", "--config", str(cfg), "-p", "3", "-o", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "biharmonic.csv").exists()
    assert not (tmp_path / "from_file").exists()
    assert "p=3 r=1" in capsys.readouterr().out
    args = cli._parser().parse_args(["bench", "--config", str(cfg), "-L", "4"])
    c = cli.config_from_args(args)
    assert (c.degree, c.regularity, c.levels) == (2, 1, 4)


def test_dump_maps_flag(tmp_path):
    rc = cli.main(["bench", "biharmonic", "--domain", "fig6", "--coupling", "nitsche", "-p", "2",
                   "-r", "1", "-L", "1", "-o", str(tmp_path), "--dump-maps", str(tmp_path / "m")])
    assert rc == 0
    text = (tmp_path / "m" / "E_level0.mtx").read_text()
    assert text.startswith("%%MatrixMarket matrix coordinate")
