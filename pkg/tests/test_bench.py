import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpiga import bench, multipatch
from mpiga.bench import BenchConfig, ConfigError


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 6.0), st.floats(1e-3, 1e3), st.integers(3, 6))
def test_rates_of_exact_power_law(rate, const, levels):
    h = 1.0 / (4 * 2.0 ** np.arange(levels))
    assert np.isclose(bench.compute_rates(h, const * h ** rate), rate, atol=1e-9)


def test_rates_need_positive_data():
    with pytest.raises(ValueError):
        bench.compute_rates([0.5, 0.25], [1.0, 0.5])
    with pytest.raises(ValueError):
        bench.compute_rates([0.5, 0.25, 0.125], [1.0, 0.0, 0.5])


@pytest.mark.parametrize("text, expected", [
    ("nitsche(1e5)", ("nitsche", 1e5)),
    ("penalty( 10 )", ("penalty", 10.0)),
    ("smooth-c1", ("smooth-c1", None)),
    ("single", ("single", None)),
])
def test_parse_coupling(text, expected):
    assert bench.parse_coupling(text) == expected


@pytest.mark.parametrize("text", ["glue", "nitsche(abc)", "smooth-c1(3)", "penalty(-1)", "penalty(0)"])
def test_parse_coupling_rejects(text):
    with pytest.raises(ConfigError):
        bench.parse_coupling(text)


def test_read_config():
    cfg = bench.read_config("""
# plate run
study = spectrum
domain = fig6   # six patches
p = 2
r=1
coupling = nitsche(1e4)
dump-maps = /tmp/x
""")
    assert cfg == {"study": "spectrum", "domain": "fig6", "degree": 2, "regularity": 1,
                   "coupling": "nitsche(1e4)", "dump_maps": "/tmp/x"}


@pytest.mark.parametrize("text", ["p 3", "colour = red", "p = three"])
def test_read_config_errors(text):
    with pytest.raises(ConfigError):
        bench.read_config(text)


@pytest.mark.parametrize("kwargs", [
    {"study": "nope"},
    {"study": "biharmonic", "domain": "torus"},
    {"study": "biharmonic", "degree": 3, "regularity": 3},
    {"study": "biharmonic", "levels": 0},
    {"study": "biharmonic", "domain": "file"},
    {"study": "biharmonic", "coupling": "penalty", "alpha": -2.0},
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        BenchConfig(**kwargs)


def test_coupling_defaults():
    assert BenchConfig("biharmonic", coupling="nitsche").coupling_alpha == 1e5
    assert BenchConfig("shell-elliptic", coupling="penalty").coupling_alpha == 10.0
    cfg = BenchConfig("biharmonic", coupling="penalty(3)")
    assert cfg.coupling == "penalty" and cfg.coupling_label == "penalty(3)"
    assert BenchConfig("biharmonic", coupling="smooth-c1").coupling_alpha is None


def test_plate_constants():
    plate = bench.PlateSpec()
    # closed form 2 pi^2 sqrt(D / (rho t)) with D = E t^3 / (12 (1 - nu^2))
    D = 1e5 * 1e-6 / (12 * 0.96)
    assert np.isclose(plate.frequency(1, 1), 2 * np.pi ** 2 * np.sqrt(D / 1e3), rtol=1e-14)
    assert np.isclose(plate.frequency(1, 1), 5.8157e-2, rtol=1e-4)
    w = plate.analytic_spectrum(6) / (np.pi ** 2 * np.sqrt(D / 1e3))
    assert np.allclose(w, [2, 5, 5, 8, 10, 10])


def test_gate_rejects_unsupported_degree():
    cfg = BenchConfig("biharmonic", domain="fig6", coupling="smooth-c1", degree=2, regularity=0)
    with pytest.raises(bench.RequirementGateError) as info:
        bench.run(cfg)
    assert "iEV=2" in str(info.value)
    with pytest.raises(ConfigError):
        bench.gate(BenchConfig("biharmonic", domain="fig6"), multipatch.make_fig_domain())


def test_inadmissible_studies():
    with pytest.raises(ConfigError):
        bench.run(BenchConfig("biharmonic", domain="fig6", coupling="c0"))
    with pytest.raises(ConfigError):
        bench.run(BenchConfig("shell-elliptic", domain="fig6", coupling="nitsche"))
    with pytest.raises(ConfigError):
        bench.run(BenchConfig("trace"))


def test_small_biharmonic_study(tmp_path):
    cfg = BenchConfig("biharmonic", domain="fig6", coupling="smooth-c1", degree=3, regularity=1,
                      levels=3, output=str(tmp_path), dump_maps=str(tmp_path / "maps"))
    rep = bench.run(cfg)
    assert [r["h"] for r in rep.rows] == [0.5, 0.25, 0.125]
    assert set(rep.rates) == {"L2", "H1", "H2"}
    assert all(np.diff(rep.column("L2")) < 0)
    paths = bench.write_outputs(cfg, rep)
    with open(tmp_path / "biharmonic.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 and float(rows[2]["L2"]) == rep.rows[2]["L2"]
    assert (tmp_path / "rates.txt").read_text().startswith("L2 ")
    assert tmp_path / "rates.txt" in paths
    dumped = sorted(p.name for p in (tmp_path / "maps").iterdir())
    assert dumped == [f"{m}_level{i}.mtx" for m in "CE" for i in range(3)]


def test_spectrum_study_single_patch_is_upper_bound():
    cfg = BenchConfig("spectrum", degree=3, regularity=2, base_elements=6)
    rep = bench.run(cfg)
    ratio = rep.extra[0]["ratio"]
    assert ratio.min() >= 1 - 1e-10
    assert abs(ratio[0] - 1) < 1e-3


def test_shell_study_rows(tmp_path):
    cfg = BenchConfig("shell-hyperbolic", domain="single", coupling="single", levels=2,
                      output=str(tmp_path))
    rep = bench.run(cfg)
    assert [r["h"] for r in rep.rows] == [0.5, 0.25]
    assert all(r["W_int"] > 0 for r in rep.rows)
    bench.write_outputs(cfg, rep)
    assert not (tmp_path / "rates.txt").exists()


def test_stress_study_outputs(tmp_path):
    cfg = BenchConfig("stress", domain="fig6", coupling="penalty", degree=3, regularity=1,
                      base_elements=2, samples=6, jump_points=20, output=str(tmp_path))
    rep = bench.run(cfg)
    assert sum(r["points"] for r in rep.rows) == 20
    assert len(rep.rows) == 7
    names = {p.name for p in bench.write_outputs(cfg, rep)}
    assert {"stress.csv", "rates.txt", "stress_field.csv", "stress_contours.csv",
            "stress_patch0.vtk"} <= names


def test_memory_guard(monkeypatch):
    mp = multipatch.make_paraboloid("elliptic").refined(4, 2, 64)
    assert bench.estimate_shell_memory(mp, "penalty") > 2**30
    monkeypatch.setattr(bench, "available_memory", lambda: 2**20)
    with pytest.raises(bench.ProblemTooLarge):
        bench.require_memory(mp, "penalty")


def test_locate_patch():
    mp = multipatch.make_fig_domain()
    k = bench.locate_patch(mp, (0.0, 0.0))
    assert 0 <= k < 6
    with pytest.raises(ValueError):
        bench.locate_patch(mp, (5.0, 5.0))
