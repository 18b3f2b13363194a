import json
import subprocess
import sys

import numpy as np
import pytest

from spectrosat.cli import main
from spectrosat.fileio import read_json, read_spectrum_csv, read_timeseries_csv, write_spectrum_csv
from spectrosat.radtran import SpectralGrid, Spectrum, SpectrumKind

FEATURES = (7880.0, 6350.0, 6250.0, 6024.0)


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def sim15(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim") / "run"
    assert main(["simulate", "--seed", "7", "--frames", "15", "--out", str(out)]) == 0
    return out


def test_simulate_outputs(sim15):
    frames = sorted((sim15 / "frames").glob("*.csv"))
    assert len(frames) == 15
    assert [p.name for p in frames][:2] == ["frame_0000.csv", "frame_0001.csv"]
    assert sorted(p.name for p in sim15.iterdir()) == ["frames", "manifest.json", "truth_transmittance.csv"]
    m = read_json(sim15 / "manifest.json")
    assert m["command"] == "simulate"
    assert m["arguments"]["seed"] == 7 and m["arguments"]["frames"] == 15
    assert m["config"]["noise"]["base_seed"] == 7
    listed = {o["path"] for o in m["outputs"]}
    assert listed == {f"frames/{p.name}" for p in frames} | {"truth_transmittance.csv"}


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--seed", "7", "--frames", "2", "--out", str(a)]) == 0
    assert main(["simulate", "--seed", "7", "--frames", "2", "--out", str(b)]) == 0
    assert tree(a) == tree(b)
    c = tmp_path / "c"
    assert main(["simulate", "--seed", "8", "--frames", "2", "--out", str(c)]) == 0
    assert tree(a)["frames/frame_0000.csv"] != tree(c)["frames/frame_0000.csv"]


def test_simulate_unwritable_out(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["simulate", "--out", str(blocker / "out")]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_config_exit_1(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"instrument": {"aperture": 1}}')
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    cfg.write_text("{not json")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists() or not any((tmp_path / "o").iterdir())


def test_usage_error_exit_1():
    with pytest.raises(SystemExit) as info:
        main(["simulate"])
    assert info.value.code == 1


def test_transform_single_frame_minima(sim15, tmp_path):
    out = tmp_path / "t"
    assert main(["transform", str(sim15 / "frames" / "frame_0000.csv"), "--out", str(out)]) == 0
    spec = read_spectrum_csv(out / "spectrum.csv")
    v, nu = spec.values, spec.nu
    is_min = np.zeros(v.size, bool)
    is_min[1:-1] = (v[1:-1] < v[:-2]) & (v[1:-1] < v[2:])
    for f in FEATURES:
        assert np.any(is_min & (np.abs(nu - f) <= 2.0)), f
    report = read_json(out / "snr_report.json")
    assert report["frames"] == 1 and report["report"]["snr"] > 0


def test_transform_average_records_gain(sim15, tmp_path):
    out = tmp_path / "avg"
    files = sorted(str(p) for p in (sim15 / "frames").glob("*.csv"))
    assert main(["transform", *files, "--average", "--out", str(out)]) == 0
    report = read_json(out / "snr_report.json")
    assert report["frames"] == 15 and report["averaged"]
    assert report["expected_gain"] == pytest.approx(15**0.5)
    assert report["snr_gain"] > 1.5
    m = read_json(out / "manifest.json")
    assert len(m["inputs"]) == 15


def test_transform_per_file(sim15, tmp_path):
    out = tmp_path / "each"
    files = [str(sim15 / "frames" / f"frame_000{i}.csv") for i in range(2)]
    assert main(["transform", *files, "--apodization", "boxcar", "--zero-fill", "1", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert "frame_0000.spectrum.csv" in names and "frame_0001.snr_report.json" in names


def test_transform_corrupt_header(sim15, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    lines = (sim15 / "frames" / "frame_0000.csv").read_text().splitlines()
    lines[5] = "idx,val"
    bad.write_text("\n".join(lines) + "\n")
    out = tmp_path / "o"
    assert main(["transform", str(bad), "--out", str(out)]) == 2
    err = capsys.readouterr().err
    assert f"{bad}:6:" in err
    assert not out.exists() or not any(out.iterdir())


def test_retrieve_flat_transmittance(tmp_path, capsys):
    flat = tmp_path / "flat.csv"
    write_spectrum_csv(flat, Spectrum(SpectralGrid(5800.0, 0.5, 4401), np.ones(4401), SpectrumKind.TRANSMITTANCE))
    out = tmp_path / "r"
    assert main(["retrieve", str(flat), "--input-kind", "transmittance", "--out", str(out)]) == 0
    doc = read_json(out / "retrieval.json")
    assert all(v == 0.0 for v in doc["columns"].values())
    assert set(doc["columns"]) == {"CO2", "CH4", "O2"}


def test_retrieve_recovered(sim15, tmp_path):
    t = tmp_path / "t"
    assert main(["transform", *sorted(str(p) for p in (sim15 / "frames").glob("*.csv")), "--average", "--out", str(t)]) == 0
    out = tmp_path / "r"
    assert main(["retrieve", str(t / "spectrum.csv"), "--out", str(out)]) == 0
    doc = read_json(out / "retrieval.json")
    assert abs(doc["volume_mixing_ratio_ppm"]["CO2"] / 420 - 1) < 0.05


def test_lines_stdout(capsys):
    assert main(["lines", "--species", "CO2", "--band", "6200", "6400"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    header, body = rows[0].split(","), [r.split(",") for r in rows[1:]]
    nus = [float(r[header.index("nu0_cm-1")]) for r in body]
    assert nus == sorted(nus) and all(6200 <= x <= 6400 for x in nus)
    assert any(abs(x - 6250) < 2 for x in nus) and any(abs(x - 6350) < 2 for x in nus)


def test_lines_to_dir_and_invalid(tmp_path):
    assert main(["lines", "--band", "6000", "6050", "--out", str(tmp_path / "l")]) == 0
    assert (tmp_path / "l" / "lines.csv").exists() and (tmp_path / "l" / "manifest.json").exists()
    assert main(["lines", "--band", "6400", "6200"]) == 1
    assert main(["lines", "--band", "6200", "6400", "--catalog", str(tmp_path / "none.par")]) == 2


def test_threads_env(monkeypatch, tmp_path):
    monkeypatch.setenv("SPECTROSAT_THREADS", "zero")
    assert main(["lines", "--band", "6200", "6400"]) == 1
    monkeypatch.setenv("SPECTROSAT_THREADS", "2")
    assert main(["lines", "--band", "6200", "6400"]) == 0


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "spectrosat.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "spectrosat" in proc.stdout


@pytest.mark.slow
def test_timeseries_ramp_420(tmp_path):
    cfg = tmp_path / "ramp.json"
    cfg.write_text(json.dumps({"simulation": {"frames": 420, "ramp": {"species": "CO2", "start_ppm": 400, "end_ppm": 450}}}))
    sim = tmp_path / "sim"
    assert main(["simulate", "--config", str(cfg), "--seed", "7", "--out", str(sim)]) == 0
    ts = tmp_path / "ts"
    assert main(["timeseries", str(sim / "frames"), "--config", str(cfg), "--out", str(ts)]) == 0
    rows = read_timeseries_csv(ts / "timeseries.csv")
    assert len(rows) == 420
    assert [r["frame_index"] for r in rows] == list(range(420))
    co2 = np.array([r["co2_ppm"] for r in rows])
    slope, intercept = np.polyfit(np.arange(420), co2, 1)
    assert slope > 0
    start, end = intercept, intercept + slope * 419
    assert abs(start / 400 - 1) < 0.05 and abs(end / 450 - 1) < 0.05
    assert sum(1 for _ in open(ts / "retrievals.jsonl")) == 420
