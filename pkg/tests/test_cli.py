"""Command-line front end: parsing, presets, CSV/manifest output, exit codes."""

import csv
import json
import math
import subprocess
import sys

import pytest

from rismimo import cli
from rismimo.alamouti import sep_theory
from rismimo.channel import Geometry, path_loss_ris
from rismimo.harness import SchemeConfig, run_sweep

TINY_EXPERIMENT = """
[output]
dir = "{out}"

[defaults]
mod_kind = "psk"
mod_order = 2
r_s = 1.0
r_d = 9.0
r_direct = 9.85
snr_db = [40.0, 60.0]
max_trials = 2048
min_bit_errors = 1000000
seed = 9

[[entry]]
name = "surface"
scheme = "ris_alamouti"
n_ris = 16

[[entry]]
name = "baseline"
scheme = "classical_alamouti"
"""


@pytest.fixture
def experiment(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(TINY_EXPERIMENT.format(out=tmp_path / "default_out"))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- parser and simple verbs -----------------------------------------------


def test_parser_requires_a_verb():
    with pytest.raises(SystemExit) as err:
        cli.build_parser().parse_args([])
    assert err.value.code == 2


def test_theory_table_matches_quadrature(capsys):
    rc = cli.main(["theory", "--elements", "64",
                   "--snr-start", "80", "--snr-stop", "84", "--snr-step", "2"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("# order=2 elements=64")
    assert lines[1] == "snr_db,sep"
    pl = path_loss_ris(Geometry(r_s=1.0, r_d=9.0, r_direct=9.85))
    assert len(lines) == 5
    for line in lines[2:]:
        snr_text, sep_text = line.split(",")
        expected = sep_theory(2, 64, pl, 10.0 ** (float(snr_text) / 10.0))
        assert float(sep_text) == pytest.approx(expected, rel=1e-5)


def test_theory_honours_explicit_path_gain(capsys):
    rc = cli.main(["theory", "--elements", "2", "--pl-db", "0",
                   "--snr-start", "0", "--snr-stop", "0"])
    assert rc == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert float(line.split(",")[1]) == pytest.approx(sep_theory(2, 2, 1.0, 1.0), rel=1e-6)


@pytest.mark.parametrize(
    "argv",
    [
        ["theory", "--elements", "15", "--snr-start", "0", "--snr-stop", "10"],
        ["theory", "--elements", "16", "--order", "1", "--snr-start", "0", "--snr-stop", "10"],
        ["theory", "--elements", "16", "--snr-start", "10", "--snr-stop", "0"],
    ],
)
def test_theory_rejects_bad_arguments(argv, capsys):
    assert cli.main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_presets_list(capsys):
    assert cli.main(["presets", "list"]) == 0
    names = capsys.readouterr().out.split()
    assert names == sorted(names)
    assert "alamouti-bpsk" in names and "vblast-rayleigh" in names


def test_every_bundled_preset_validates():
    for name in cli.list_presets():
        entries, out_dir = cli.load_experiment(cli.resolve_config_path(name))
        assert entries, name
        assert out_dir.startswith("results"), name


def test_resolve_config_path_falls_back_to_presets(tmp_path):
    assert cli.resolve_config_path("alamouti-bpsk").name == "alamouti-bpsk.toml"
    with pytest.raises(FileNotFoundError):
        cli.resolve_config_path(str(tmp_path / "missing.toml"))


# --- run verb --------------------------------------------------------------


def test_run_writes_csv_and_manifest(experiment, tmp_path, capsys):
    out = tmp_path / "out"
    rc = cli.main(["run", "--config", str(experiment), "--out", str(out)])
    assert rc == 0
    assert "2 result file(s)" in capsys.readouterr().out

    rows = read_csv(out / "surface.csv")
    assert list(rows[0]) == list(cli.CSV_COLUMNS)
    assert [float(r["snr_db"]) for r in rows] == [40.0, 60.0]
    assert all(int(r["trials"]) == 2048 for r in rows)
    assert all(0.0 <= float(r["ber"]) <= 1.0 for r in rows)

    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["entries"]) == {"surface", "baseline"}
    entry = manifest["entries"]["surface"]
    assert entry["csv"] == "surface.csv"
    assert entry["config"]["scheme"] == "ris_alamouti"
    assert entry["config"]["n_ris"] == 16
    assert manifest["workers"] == 1
    assert manifest["version"] != ""


def test_run_is_bit_stable_across_invocations(experiment, tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--config", str(experiment), "--out", str(out_a)]) == 0
    assert cli.main(["run", "--config", str(experiment), "--out", str(out_b)]) == 0
    for name in ("surface.csv", "baseline.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_run_uses_output_dir_from_file(experiment, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(["run", "--config", str(experiment)]) == 0
    assert (tmp_path / "default_out" / "surface.csv").exists()


def test_run_csv_floats_round_trip(experiment, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(experiment), "--out", str(out)]) == 0
    cfg = SchemeConfig(
        scheme="ris_alamouti", n_ris=16, snr_db=(40.0, 60.0),
        max_trials=2048, min_bit_errors=10**6, seed=9,
        r_s=1.0, r_d=9.0, r_direct=9.85,
    )
    curve = run_sweep(cfg)
    rows = read_csv(out / "surface.csv")
    for i, row in enumerate(rows):
        assert float(row["ber"]) == curve.ber[i]
        assert float(row["ci95"]) == curve.ci95[i]
        assert int(row["bit_errors"]) == curve.bit_errors[i]


def test_run_seed_and_override_flags(experiment, tmp_path):
    out = tmp_path / "out"
    rc = cli.main(["run", "--config", str(experiment), "--out", str(out),
                   "--seed", "77", "--override", "max_trials=128",
                   "--override", "snr_db=[50.0]"])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    for entry in manifest["entries"].values():
        assert entry["config"]["seed"] == 77
        assert entry["config"]["max_trials"] == 128
        assert entry["config"]["snr_db"] == [50.0]
    rows = read_csv(out / "surface.csv")
    assert len(rows) == 1 and int(rows[0]["trials"]) == 128


def test_run_k_factor_alias_sets_both_hops(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        "[[entry]]\nname='k'\nscheme='ris_im_vblast'\nn_ris=8\nk_factor_db=5.0\n"
        "snr_db=[40.0]\nmax_trials=1024\nmin_bit_errors=1\n"
    )
    entries, _ = cli.load_experiment(path)
    cfg = entries[0][1]
    assert cfg.k_factor_sr_db == 5.0 and cfg.k_factor_rd_db == 5.0


def test_run_payload_only_entry_writes_payload_rate(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        "[[entry]]\nname='im'\nscheme='ris_im_vblast'\nn_ris=8\n"
        "im_mode='full'\ndetector='suboptimal'\npayload_ber_only=true\n"
        "snr_db=[10.0]\nmax_trials=1024\nmin_bit_errors=1000000\nseed=4\n"
        "r_s=3.0\nr_d=3.0\nr_direct=5.91\n"
    )
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(path), "--out", str(out)]) == 0
    cfg = cli.load_experiment(path)[0][0][1]
    curve = run_sweep(cfg)
    (row,) = read_csv(out / "im.csv")
    assert float(row["ber"]) == curve.payload_ber[0]
    assert float(row["ber"]) != curve.ber[0]


def test_run_check_theory_prints_report(experiment, tmp_path, capsys):
    out = tmp_path / "out"
    rc = cli.main(["run", "--config", str(experiment), "--out", str(out), "--check-theory"])
    assert rc == 0
    assert "# theory comparison for surface" in capsys.readouterr().out
    manifest = json.loads((out / "manifest.json").read_text())
    assert "theory_flagged_points" in manifest["entries"]["surface"]
    assert "theory_flagged_points" not in manifest["entries"]["baseline"]


def test_workers_env_variable(experiment, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "2")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(experiment), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["workers"] == 2


def test_workers_env_must_be_integer(experiment, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.WORKERS_ENV, "many")
    rc = cli.main(["run", "--config", str(experiment), "--out", str(tmp_path / "out")])
    assert rc == 3
    assert cli.WORKERS_ENV in capsys.readouterr().err


# --- failure modes ---------------------------------------------------------


def test_missing_config_exits_2(tmp_path, capsys):
    rc = cli.main(["run", "--config", str(tmp_path / "nope.toml")])
    assert rc == 2
    assert "no such config file or preset" in capsys.readouterr().err


def test_malformed_toml_exits_2_with_position(tmp_path, capsys):
    path = tmp_path / "broken.toml"
    path.write_text("[[entry]\nname = 'x'\n")
    rc = cli.main(["run", "--config", str(path)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "config parse failure" in err and "line 1" in err


def bad_entry_case(tmp_path, body):
    path = tmp_path / "exp.toml"
    path.write_text(body)
    return cli.main(["run", "--config", str(path), "--out", str(tmp_path / "out")])


@pytest.mark.parametrize(
    "body,needle",
    [
        ("[[entry]]\nname='x'\nscheme='mrc'\nsnr_db=[10.0]\n", "scheme"),
        ("[[entry]]\nname='x'\nscheme='ris_alamouti'\nn_ris=16\nsnr_db=[10.0]\nturbo=1\n", "turbo"),
        ("[[entry]]\nname='x'\nscheme='ris_alamouti'\nn_ris=16\n", "snr_db"),
        ("[[entry]]\nscheme='ris_alamouti'\n", "name"),
        ("[[entry]]\nname='x'\nsnr_db=[10.0]\n", "scheme"),
        ("[defaults]\nsnr_db=[10.0]\n", "entry"),
        (
            "[[entry]]\nname='x'\nscheme='classical_alamouti'\nsnr_db=[10.0]\n"
            "[[entry]]\nname='x'\nscheme='classical_alamouti'\nsnr_db=[10.0]\n",
            "duplicate",
        ),
    ],
)
def test_invalid_experiments_exit_3(tmp_path, capsys, body, needle):
    assert bad_entry_case(tmp_path, body) == 3
    assert needle in capsys.readouterr().err


def test_malformed_override_exits_2(experiment, tmp_path, capsys):
    rc = cli.main(["run", "--config", str(experiment), "--out", str(tmp_path / "out"),
                   "--override", "max_trials"])
    assert rc == 2
    assert "key=value" in capsys.readouterr().err


def test_unknown_override_key_exits_3(experiment, tmp_path, capsys):
    rc = cli.main(["run", "--config", str(experiment), "--out", str(tmp_path / "out"),
                   "--override", "turbo=1"])
    assert rc == 3
    assert "turbo" in capsys.readouterr().err


def test_console_script_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "rismimo.cli", "presets", "list"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "alamouti-bpsk" in proc.stdout
