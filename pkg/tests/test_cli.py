import csv
import json
import math

import pytest

from eitchain import AtomParams, ChainConfig, WaveguideParams
from eitchain.bidirectional import chain_scatter
from eitchain.chiral import chain_transmission
from eitchain.cli import fmt, main
from eitchain.config import PRESET_DIR, ExperimentConfig, load_config, preset_names


def _run(capsys, tmp_path, *args, name="out.csv"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    captured = capsys.readouterr()
    trailer = json.loads(captured.out) if code == 0 else None
    rows = list(csv.reader(out.open())) if code == 0 else None
    return code, trailer, rows, captured.err


def test_fmt_round_trips():
    assert fmt(0.1) == "0.1"
    assert float(fmt(1 / 3)) == 1 / 3
    assert fmt(math.inf) == "inf" and fmt(True) == "true" and fmt(7) == "7"


def test_every_preset_loads():
    names = preset_names()
    assert len(names) >= 20
    for name in names:
        load_config(PRESET_DIR / f"{name}.cfg").validate()


def test_preset_fig2a_values(capsys, tmp_path):
    code, trailer, rows, _ = _run(capsys, tmp_path, "preset", "fig2a", "--set", "sweep.points=11")
    assert code == 0
    assert rows[0] == ["series", "omega", "T"]
    assert trailer["rows"] == 33 and trailer["summary"]["series_key"] == "atom.gamma_r"
    for series, w, T in rows[1:]:
        atom = AtomParams(1.0, rabi=0.2, gamma2=0.1, gamma_r=float(series))
        assert float(T) == chain_transmission(float(w), ChainConfig((atom,), 0.5))


def test_preset_fig5a_closed_form_widths(capsys, tmp_path):
    code, _, rows, _ = _run(capsys, tmp_path, "preset", "fig5a", "--set", "sweep.points=5")
    assert code == 0 and rows[0] == ["omega", "T", "R"]
    atom = AtomParams(1.0, rabi=0.2, gamma2=0.05, gamma_r=0.1, gamma_l=0.1)
    for w, T, R in rows[1:]:
        res = chain_scatter(float(w), ChainConfig.periodic(atom, 1, 0.5), WaveguideParams(1.0, 1.0))
        assert float(T) == pytest.approx(res.T, rel=1e-14) and float(R) == pytest.approx(res.R, rel=1e-14)


def test_single_point_sweep(capsys, tmp_path):
    code, trailer, rows, _ = _run(capsys, tmp_path, "spectrum", "--set", "sweep.points=1",
                                  "--set", "sweep.start=1", "--set", "sweep.stop=1")
    assert code == 0 and trailer["rows"] == 1 and rows[1] == ["1.0", "1.0"]


@pytest.mark.parametrize("args", [
    ["spectrum", "--set", "atom.rabi=-1"],
    ["spectrum", "--set", "atom.colour=red"],
    ["spectrum", "--set", "sweep.points=0"],
    ["spectrum", "--set", "sweep.axis=sigma"],
    ["spectrum", "--set", "atom.rabi=nan"],
    ["preset", "no-such-preset"],
    ["preset"],
    ["bands", "--set", "waveguide.v_l=0"],
    ["ensemble", "--set", "sweep.axis=n", "--set", "ensemble.n_list=2,4"],
    ["ensemble", "--seed", "-3"],
])
def test_config_errors_exit_2(capsys, tmp_path, args):
    code, _, _, err = _run(capsys, tmp_path, *args)
    assert code == 2
    assert "config error" in err


def test_config_file_reports_line(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("mode = spectrum\n# fine\natom.rabi = x\n")
    code, _, _, err = _run(capsys, tmp_path, "spectrum", "--config", str(cfg))
    assert code == 2 and "bad.cfg:3" in err


def test_numerical_failure_exits_3(capsys, tmp_path):
    # a decoupled emitter exactly on two-level resonance has no transfer matrix
    code, _, _, err = _run(capsys, tmp_path, "spectrum", "--set", "waveguide.v_l=1", "--set", "atom.rabi=0",
                           "--set", "atom.gamma_r=0", "--set", "atom.gamma2=0", "--set", "sweep.points=3",
                           "--set", "sweep.start=0.9", "--set", "sweep.stop=1.1")
    assert code == 3 and "numerical error" in err


def test_trailer_keys(capsys, tmp_path):
    code, trailer, _, _ = _run(capsys, tmp_path, "ensemble", "--set", "sweep.axis=sigma", "--set", "sweep.points=2",
                               "--set", "sweep.start=0.1", "--set", "sweep.stop=0.2",
                               "--set", "ensemble.realizations=50", "--seed", "4")
    assert code == 0
    for key in ("mode", "name", "output", "rows", "parameters", "seed", "realizations", "threads",
                "duration_s", "summary"):
        assert key in trailer
    assert trailer["seed"] == 4 and trailer["summary"]["excluded"] == 0


@pytest.mark.parametrize("kind", ["frequency", "position"])
def test_ensemble_csv_identical_across_threads(capsys, tmp_path, kind):
    args = ["ensemble", "--set", "waveguide.v_l=1", "--set", "atom.gamma_l=0.1", "--set", "chain.n=20",
            "--set", f"disorder.kind={kind}", "--set", "sweep.axis=sigma", "--set", "sweep.start=0.05",
            "--set", "sweep.stop=0.5", "--set", "sweep.points=3", "--set", "ensemble.realizations=2500"]
    if kind == "position":
        args += ["--set", "disorder.mean=0.5"]
    blobs = []
    for threads in ("1", "3", "8"):
        out = tmp_path / f"t{threads}.csv"
        assert main([*args, "--threads", threads, "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    capsys.readouterr()
    assert blobs[0] == blobs[1] == blobs[2]


def test_bands_forces_lossless(capsys, tmp_path):
    code, trailer, rows, err = _run(capsys, tmp_path, "bands", "--set", "waveguide.v_l=1", "--set", "atom.gamma_l=0.1",
                                    "--set", "atom.rabi=0", "--set", "sweep.points=101")
    assert code == 0 and "gamma2" in err
    assert rows[0] == ["omega", "cos_KL", "K_real", "K_imag", "allowed"]
    assert trailer["summary"]["symmetric"] is True
    assert any(a < 1.0 < b for a, b in trailer["summary"]["gaps"])


def test_analytic_zero_sigma_row(capsys, tmp_path):
    code, _, rows, _ = _run(capsys, tmp_path, "preset", "fig3a-analytic", "--set", "sweep.points=3")
    assert code == 0 and rows[0] == ["sigma", "avg_tau_sq", "avg_T_N", "xi_analytic"]
    assert rows[1] == ["0.0", "1.0", "1.0", "inf"]


def test_n_axis_reports_fit(capsys, tmp_path):
    code, trailer, rows, _ = _run(capsys, tmp_path, "ensemble", "--set", "sweep.axis=n",
                                  "--set", "ensemble.n_list=5,10,15,20", "--set", "disorder.sigma=1",
                                  "--set", "atom.gamma_r=0.1", "--set", "ensemble.realizations=200")
    assert code == 0 and len(rows) == 5
    assert trailer["summary"]["fit_r_squared"] > 0.99 and trailer["summary"]["fit_xi"] > 0


def test_defaults_validate():
    ExperimentConfig().validate()
