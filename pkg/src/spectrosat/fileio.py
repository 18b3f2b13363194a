"""Bit-stable readers and writers for the CSV and JSON artifacts.

Floats are written with ``repr`` (shortest string that round-trips), so a
value read back is bit-identical to the value written. Every file is written
to a temporary sibling and renamed into place.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataIOError, FileFormatError, IoFailure, SpectrosatError
from .instrument import Interferogram
from .radtran import SpectralGrid, Spectrum, SpectrumKind

SPECTRUM_HEADER = "wavenumber_cm-1,value"
INTERFEROGRAM_HEADER = "index,value"
INTERFEROGRAM_KEYS = ("lambda_ref_nm", "opd_step_nm", "n_samples", "channel", "seed")
TIMESERIES_HEADER = "frame_index,time_s,co2_ppm,ch4_ppm,o2_column,snr"


def fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return h.hexdigest()


def atomic_write(path, data: str | bytes) -> Path:
    """Write `data` to `path` through a temporary file and an atomic rename."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)  # mkstemp creates 0600
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def dumps_json(obj) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


class OutputDir:
    """Output directory that removes what it wrote if the job fails.

    Use as a context manager; on an exception every file written through
    it is deleted so a failed job leaves no partial outputs behind.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.written: list[Path] = []
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoFailure(f"cannot create output directory {self.root}: {exc}") from exc
        if not os.access(self.root, os.W_OK | os.X_OK):
            raise IoFailure(f"output directory {self.root} is not writable")

    def write(self, name: str, data: str | bytes) -> Path:
        path = atomic_write(self.root / name, data)
        self.written.append(path)
        return path

    def rollback(self) -> None:
        for path in self.written:
            try:
                path.unlink()
            except OSError:
                pass
        self.written.clear()

    def digests(self) -> list[dict]:
        return [
            {"path": p.relative_to(self.root).as_posix(), "sha256": sha256_file(p)}
            for p in sorted(self.written)
        ]

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self.rollback()
        return False


def _read_lines(path) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read().splitlines()
    except UnicodeDecodeError as exc:
        raise FileFormatError(path, 1, f"not UTF-8 text ({exc.reason})") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _parse_rows(path, lines: Sequence[str], first: int, columns: int) -> np.ndarray:
    """Parse numeric CSV rows starting at 0-based line index `first`."""
    out = np.empty((len(lines) - first, columns))
    n = 0
    for i in range(first, len(lines)):
        text = lines[i].strip()
        if not text:
            continue
        parts = text.split(",")
        if len(parts) != columns:
            raise FileFormatError(path, i + 1, f"expected {columns} fields, found {len(parts)}")
        try:
            out[n] = [float(p) for p in parts]
        except ValueError:
            raise FileFormatError(path, i + 1, f"non-numeric field in {text!r}") from None
        n += 1
    return out[:n]


# --------------------------------------------------------------------------
# spectra

def format_spectrum_csv(spectrum: Spectrum) -> str:
    rows = [SPECTRUM_HEADER]
    rows += [f"{fmt(n)},{fmt(v)}" for n, v in zip(spectrum.nu.tolist(), spectrum.values.tolist())]
    return "\n".join(rows) + "\n"


def write_spectrum_csv(path, spectrum: Spectrum) -> Path:
    return atomic_write(path, format_spectrum_csv(spectrum))


def read_spectrum_csv(path, kind: SpectrumKind = SpectrumKind.RECOVERED) -> Spectrum:
    """Read a spectrum CSV; the wavenumber column must be a uniform grid."""
    lines = _read_lines(path)
    if not lines or lines[0].strip() != SPECTRUM_HEADER:
        found = lines[0].strip() if lines else "<empty file>"
        raise FileFormatError(path, 1, f"expected header {SPECTRUM_HEADER!r}, found {found!r}")
    data = _parse_rows(path, lines, 1, 2)
    if data.shape[0] < 2:
        raise FileFormatError(path, len(lines), "spectrum needs at least 2 rows")
    nu = data[:, 0]
    step = (nu[-1] - nu[0]) / (nu.size - 1)
    if not step > 0:
        raise FileFormatError(path, 2, "wavenumbers must increase")
    grid = SpectralGrid(float(nu[0]), float(step), nu.size)
    off = np.abs(nu - grid.nu) > 1e-6 * step
    if np.any(off):
        row = int(np.argmax(off)) + 2
        raise FileFormatError(path, row, "wavenumber column is not a uniform grid")
    try:
        return Spectrum(grid, data[:, 1], kind)
    except SpectrosatError as exc:
        raise DataIOError(f"{path}: {exc}") from exc


# --------------------------------------------------------------------------
# interferograms

def format_interferogram_csv(frame: Interferogram) -> str:
    seed = "none" if frame.seed is None else str(int(frame.seed))
    rows = [
        f"# lambda_ref_nm={fmt(frame.lambda_ref)}",
        f"# opd_step_nm={fmt(frame.opd_step * 1e7)}",
        f"# n_samples={frame.n_samples}",
        f"# channel={frame.channel}",
        f"# seed={seed}",
        INTERFEROGRAM_HEADER,
    ]
    rows += [f"{k},{fmt(v)}" for k, v in enumerate(frame.samples.tolist())]
    return "\n".join(rows) + "\n"


def write_interferogram_csv(path, frame: Interferogram) -> Path:
    return atomic_write(path, format_interferogram_csv(frame))


def read_interferogram_csv(path) -> Interferogram:
    lines = _read_lines(path)
    meta = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        key, sep, value = body.partition("=")
        if not sep:
            raise FileFormatError(path, i + 1, f"malformed header line {lines[i]!r}")
        meta[key.strip()] = value.strip()
        i += 1
    missing = [k for k in INTERFEROGRAM_KEYS if k not in meta]
    if missing:
        raise FileFormatError(path, i + 1, f"missing header field(s): {', '.join(missing)}")
    if i >= len(lines) or lines[i].strip() != INTERFEROGRAM_HEADER:
        found = lines[i].strip() if i < len(lines) else "<end of file>"
        raise FileFormatError(path, i + 1, f"expected {INTERFEROGRAM_HEADER!r}, found {found!r}")
    try:
        lambda_ref = float(meta["lambda_ref_nm"])
        opd_step_nm = float(meta["opd_step_nm"])
        n_samples = int(meta["n_samples"])
        seed = None if meta["seed"].lower() == "none" else int(meta["seed"])
    except ValueError as exc:
        raise FileFormatError(path, 1, f"bad header value: {exc}") from None
    if not (math.isfinite(opd_step_nm) and opd_step_nm > 0):
        raise FileFormatError(path, 1, "opd_step_nm must be positive")
    data = _parse_rows(path, lines, i + 1, 2)
    if data.shape[0] != n_samples:
        raise FileFormatError(
            path, len(lines), f"header declares {n_samples} samples, found {data.shape[0]}"
        )
    if not np.array_equal(data[:, 0], np.arange(n_samples)):
        row = int(np.argmax(data[:, 0] != np.arange(n_samples))) + i + 2
        raise FileFormatError(path, row, "sample indices must run 0, 1, 2, ...")
    try:
        return Interferogram(data[:, 1], opd_step_nm * 1e-7, lambda_ref, meta["channel"], seed)
    except SpectrosatError as exc:
        raise DataIOError(f"{path}: {exc}") from exc


# --------------------------------------------------------------------------
# retrieval results

def timeseries_rows(entries: Iterable) -> str:
    """Aggregate CSV for a list of ``TimeseriesEntry``; failed frames get empty fields."""
    from .linelist import GasSpecies

    rows = [TIMESERIES_HEADER]
    for e in entries:
        r = e.result
        if r is None:
            rows.append(f"{e.frame_index},{fmt(e.time_s)},,,,")
            continue
        snr = None if r.snr is None else r.snr.snr
        rows.append(",".join([
            str(e.frame_index),
            fmt(e.time_s),
            fmt(r.vmr_ppm.get(GasSpecies.CO2)),
            fmt(r.vmr_ppm.get(GasSpecies.CH4)),
            fmt(r.columns.get(GasSpecies.O2)),
            fmt(snr),
        ]))
    return "\n".join(rows) + "\n"


def read_timeseries_csv(path) -> list[dict]:
    lines = _read_lines(path)
    if not lines or lines[0].strip() != TIMESERIES_HEADER:
        raise FileFormatError(path, 1, f"expected header {TIMESERIES_HEADER!r}")
    keys = TIMESERIES_HEADER.split(",")
    out = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(keys):
            raise FileFormatError(path, i, f"expected {len(keys)} fields, found {len(parts)}")
        try:
            row = {k: (float(v) if v else None) for k, v in zip(keys, parts)}
        except ValueError:
            raise FileFormatError(path, i, f"non-numeric field in {line!r}") from None
        row["frame_index"] = int(row["frame_index"])
        out.append(row)
    return out


def timeseries_jsonl(entries: Iterable) -> str:
    """One JSON object per frame, one frame per line."""
    lines = []
    for e in entries:
        obj = {"frame_index": e.frame_index, "time_s": e.time_s, "error": e.error}
        obj["result"] = None if e.result is None else e.result.to_dict()
        lines.append(json.dumps(obj, sort_keys=True, allow_nan=False))
    return "\n".join(lines) + "\n"


def read_json(path) -> dict:
    text = "\n".join(_read_lines(path))
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(path, exc.lineno, exc.msg) from None
