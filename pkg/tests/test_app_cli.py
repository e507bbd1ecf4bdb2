import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esbgk_ilw.boundary_ilw import Maxwell
from esbgk_ilw.cli import main
from esbgk_ilw.config import dump_config, parse_config
from esbgk_ilw.errors import IoError, ParseError, ValidationError
from esbgk_ilw.io import moment_table, read_moments_csv, write_field_vtk, write_moments_csv
from esbgk_ilw.moments import maxwellian
from esbgk_ilw.phase_mesh import INTERIOR
from esbgk_ilw.scenarios import DEFAULTS, GAMMA, build_scenario

SMALL = 'scenario = "smooth_1d"\nnx = 16\nnv = 4\nt_end = 0.02\n'


# -- config --------------------------------------------------------------------------


def test_minimal_config_resolves_defaults():
    cfg = parse_config('scenario = "smooth_1d"')
    d = DEFAULTS["smooth_1d"]
    for key in ("epsilon", "nu", "nx", "nv", "vmax", "t_end", "cfl"):
        assert cfg.params[key] == d[key]
    assert cfg.params["dt"] is None
    assert cfg.cadence is None and cfg.outputs == ("moments-csv",) and cfg.walls == {}


def test_negative_epsilon_names_key():
    with pytest.raises(ValidationError, match="epsilon must be > 0") as exc:
        parse_config('scenario = "smooth_1d"\nepsilon = -1')
    assert exc.value.key == "epsilon"


def test_knudsen_alias_for_trapezoid():
    cfg = parse_config('scenario = "trapezoid_2d"\nknudsen = 5')
    assert cfg.params["epsilon"] == 5.0
    sc = build_scenario(cfg.scenario, {**cfg.overrides(), "nx": 24, "ny": 12, "nv": [6, 6, 4]})
    assert sc.cfg.eps == 5.0 and sc.params["mach_in"] == 5.0


@pytest.mark.parametrize(
    "text, key",
    [
        ('scenario = "smooth_1d"\nfoo = 1', "foo"),
        ('scenario = "smooth_1d"\nmach_in = 2.0', "mach_in"),
        ('scenario = "smooth_1d"\nnu = 1.0', "nu"),
        ('scenario = "smooth_1d"\nnx = 2.5', "nx"),
        ('scenario = "smooth_1d"\nnv = [4, 4, 4]', "nv"),
        ('scenario = "smooth_1d"\ncadence = 0', "cadence"),
        ('scenario = "smooth_1d"\noutputs = ["png"]', "outputs"),
        ('scenario = "smooth_1d"\nepsilon = 1.0\nknudsen = 2.0', "knudsen"),
        ('scenario = "nope"', "scenario"),
        ("nx = 4", "scenario"),
        ('scenario = "smooth_1d"\n[wall.top]\nTw = 1.0', "wall.top"),
        ('scenario = "smooth_1d"\n[wall.left]\nkind = "sticky"', "wall.left.kind"),
        ('scenario = "smooth_1d"\n[wall.left]\nkind = "maxwell"\nalpha = 1.5', "wall.left.alpha"),
        ('scenario = "smooth_1d"\n[wall.left]\nTw = 0', "wall.left.Tw"),
        ('scenario = "smooth_1d"\n[wall.left]\ncolour = 1', "wall.left.colour"),
    ],
)
def test_validation_errors(text, key):
    with pytest.raises(ValidationError) as exc:
        parse_config(text)
    assert exc.value.key == key


def test_parse_error_location():
    with pytest.raises(ParseError) as exc:
        parse_config('scenario = "smooth_1d"\nnx = = 3\n')
    assert (exc.value.line, exc.value.column) == (2, 6)
    with pytest.raises(ParseError) as exc:
        parse_config('scenario = "smooth_1d"\nnx = ')
    assert exc.value.line == 2


def test_wall_tables_become_specs():
    cfg = parse_config(
        'scenario = "smooth_1d"\n[wall.left]\nkind = "maxwell"\nalpha = 0.5\nTw = 1.2\n[wall.right]\nkind = "specular"\n'
    )
    sc = build_scenario(cfg.scenario, cfg.overrides())
    assert sc.wallspecs["left"] == Maxwell(0.5, 1.2)
    assert sc.wallspecs["right"].alpha == 0.0


def test_dt_and_cfl_resolution():
    assert parse_config('scenario = "temp_gradient_1d"').params["dt"] == 0.001
    p = parse_config('scenario = "temp_gradient_1d"\ncfl = 0.4').params
    assert p["dt"] is None and p["cfl"] == 0.4
    p = parse_config('scenario = "smooth_1d"\ndt = 0.002').params
    assert p["dt"] == 0.002 and p["cfl"] is None
    assert parse_config('scenario = "temp_gradient_1d"\nepsilon = 0.05').params["t_end"] == pytest.approx(50.0)


_SCEN = st.sampled_from(sorted(DEFAULTS))


@settings(max_examples=40, deadline=None)
@given(
    _SCEN,
    st.floats(1e-6, 10.0),
    st.floats(-0.5, 0.99),
    st.integers(8, 200),
    st.one_of(st.none(), st.floats(1e-4, 0.9)),
    st.one_of(st.none(), st.integers(1, 50)),
    st.sampled_from([["moments-csv"], ["field-vtk"], ["moments-csv", "field-vtk"]]),
    st.floats(0.1, 3.0),
)
def test_config_roundtrip(name, eps, nu, nx, cfl, cadence, outputs, tw):
    lines = [f'scenario = "{name}"', f"epsilon = {eps!r}", f"nu = {nu!r}", f"nx = {nx}"]
    if cfl is not None:
        lines.append(f"cfl = {cfl!r}")
    if cadence is not None:
        lines.append(f"cadence = {cadence}")
    lines.append("outputs = [" + ", ".join(f'"{o}"' for o in outputs) + "]")
    label = {"smooth_1d": "left", "temp_gradient_1d": "right", "trapezoid_2d": "top", "airfoil_2d": "airfoil"}[name]
    lines += [f"[wall.{label}]", f"Tw = {tw!r}"]
    cfg = parse_config("\n".join(lines))
    assert parse_config(dump_config(cfg)) == cfg


# -- io ------------------------------------------------------------------------------


def uniform_state(mesh):
    return np.tile(maxwellian(1.3, (0.2, 0.0, 0.0), 0.9, mesh.vgrid), (mesh.n_active, 1))


@pytest.fixture(scope="module")
def small1d():
    return build_scenario("smooth_1d", {"nx": 16, "nv": 4}).mesh


@pytest.fixture(scope="module")
def small2d():
    return build_scenario("trapezoid_2d", {"nx": 24, "ny": 12, "nv": [6, 6, 4]}).mesh


def test_csv_uniform_rows_and_count(tmp_path, small1d, small2d):
    for mesh, head in ((small1d, "x,rho"), (small2d, "x,y,rho")):
        path = tmp_path / "m.csv"
        write_moments_csv(uniform_state(mesh), mesh, path)
        lines = path.read_text().splitlines()
        assert lines[0] == head + ",ux,uy,uz,T,p,mach"
        assert len(lines) - 1 == len(mesh.interior)
        t = read_moments_csv(path)
        for c in ("rho", "ux", "uy", "uz", "T", "p", "mach"):
            assert np.all(t[c] == t[c][0])


def test_csv_mach_roundtrip(tmp_path, small2d):
    mesh = small2d
    rng = np.random.default_rng(3)
    x = mesh.active_points
    f = np.stack([maxwellian(1 + 0.1 * a, (0.5 * b, 0.2 * a, 0.0), 1 + 0.2 * b, mesh.vgrid) for a, b in x])
    f *= 1 + 0.01 * rng.random(f.shape)
    path = tmp_path / "m.csv"
    write_moments_csv(f, mesh, path)
    t = read_moments_csv(path)
    mach = np.sqrt(t["ux"] ** 2 + t["uy"] ** 2 + t["uz"] ** 2) / np.sqrt(GAMMA * t["T"])
    assert np.abs(mach - t["mach"]).max() <= 1e-15 * max(1.0, t["mach"].max())
    assert np.array_equal(t["p"], t["rho"] * t["T"])


def test_csv_unwritable(tmp_path, small1d):
    with pytest.raises(IoError):
        write_moments_csv(uniform_state(small1d), small1d, tmp_path / "missing" / "m.csv")


def _vtk_scalar(text, name, n):
    lines = text.splitlines()
    k = lines.index(f"SCALARS {name} {'int' if name == 'blank' else 'double'} 1")
    return np.array([float(v) for v in lines[k + 2 : k + 2 + n]])


def test_vtk_1d_and_blanking(tmp_path, small1d, small2d):
    path = tmp_path / "a.vtk"
    write_field_vtk(uniform_state(small1d), small1d, path)
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0\n")
    assert "DATASET STRUCTURED_POINTS" in text
    assert f"DIMENSIONS {small1d.grid.counts[0]} 1 1" in text

    mesh = small2d
    write_field_vtk(uniform_state(mesh), mesh, path)
    text = path.read_text()
    nx, ny = mesh.grid.counts
    blank = _vtk_scalar(text, "blank", nx * ny).reshape(ny, nx).T
    labels = mesh.labeling.reshape(nx, ny)
    assert np.array_equal(blank == 1, labels == INTERIOR)
    assert np.all(blank[labels != INTERIOR] == 0)
    rho = _vtk_scalar(text, "rho", nx * ny).reshape(ny, nx).T
    assert np.array_equal(rho[labels == INTERIOR], moment_table(uniform_state(mesh), mesh)["rho"])
    assert np.all(rho[labels != INTERIOR] == 0)


# -- cli -----------------------------------------------------------------------------


def test_cli_run_outputs_and_determinism(tmp_path):
    cfg = tmp_path / "a.toml"
    cfg.write_text(SMALL + 'outputs = ["moments-csv", "field-vtk"]\n')
    out = tmp_path / "o"
    assert main(["-q", "run", str(cfg), "--output-dir", str(out), "--cadence", "2"]) == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert {"moments_final.csv", "field_final.vtk", "moments_000002.csv", "config.toml"} <= set(first)
    assert main(["-q", "run", str(cfg), "--output-dir", str(out), "--cadence", "2"]) == 0
    assert {p.name: p.read_bytes() for p in out.iterdir()} == first
    assert parse_config((out / "config.toml").read_text()).output_dir == str(out)


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('scenario = "smooth_1d"\nepsilon = -1\n')
    assert main(["-q", "run", str(bad)]) == 2
    bad.write_text("scenario = ")
    assert main(["-q", "run", str(bad)]) == 2
    assert main(["-q", "run", str(tmp_path / "absent.toml")]) == 2
    ok = tmp_path / "a.toml"
    ok.write_text(SMALL)
    assert main(["-q", "converge", str(ok), "--ladder", "8,12"]) == 2
    # far beyond the CFL limit the state blows up -> numerical abort
    blow = tmp_path / "blow.toml"
    blow.write_text('scenario = "smooth_1d"\nnx = 16\nnv = 4\ndt = 0.05\nt_end = 2.0\n')
    assert main(["-q", "run", str(blow), "--output-dir", str(tmp_path / "o")]) == 3


def test_cli_scenarios_and_converge(tmp_path, capsys):
    assert main(["scenarios"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in DEFAULTS)
    cfg = tmp_path / "a.toml"
    cfg.write_text(SMALL)
    assert main(["-q", "converge", str(cfg), "--ladder", "8,16,32"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[2].split()[0] == "8/16" and rows[3].split()[0] == "16/32"
    assert math.isfinite(float(rows[3].split()[2]))
