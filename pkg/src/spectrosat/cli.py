"""Command line: ``spectrosat simulate|transform|retrieve|timeseries|lines``.

Exit codes: 0 success, 1 configuration error, 2 file I/O error, 3 numerical
failure. Each job writes its files atomically and leaves a ``manifest.json``
in its output directory; a failing job removes whatever it already wrote.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import scipy.fft

from . import __version__
from .config import RunConfig, RunManifest, default_config, load_config
from .dsp import ApodizationKind, average_interferograms, estimate_snr
from .errors import (
    ConfigError,
    DataIOError,
    EmptyInput,
    SpectrosatError,
    ZeroOxygenColumn,
)
from .fileio import (
    OutputDir,
    dumps_json,
    fmt,
    format_interferogram_csv,
    format_spectrum_csv,
    read_interferogram_csv,
    read_spectrum_csv,
    sha256_file,
    timeseries_jsonl,
    timeseries_rows,
)
from .instrument import Interferogram, detector_noise, frame_seed, noiseless_samples, scan_sequence
from .linelist import GasSpecies, fixture_catalog, load_catalog, query_band
from .pipeline import Processing, modeled_reference, ramp_factors, recover, simulate_scene, to_transmittance
from .radtran import SpectrumKind
from .retrieval import process_timeseries, retrieve

log = logging.getLogger("spectrosat")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3

THREADS_ENV = "SPECTROSAT_THREADS"


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; keep exit code 2 for I/O
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    return cfg


def _inputs(paths) -> dict:
    return {str(p): sha256_file(p) for p in paths}


def _finish(out: OutputDir, manifest: RunManifest, timings: Optional[dict]) -> None:
    manifest.outputs = out.digests()
    if timings is not None:
        manifest.timings_s = {k: round(v, 6) for k, v in timings.items()}
    out.write("manifest.json", dumps_json(manifest.to_dict()))


def _config_inputs(args, cfg: RunConfig) -> dict:
    paths = []
    if getattr(args, "config", None):
        paths.append(args.config)
    if cfg.catalog_path is not None:
        paths.append(cfg.catalog_path)
    return _inputs(paths)


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg = _config(args).with_overrides(
        seed=args.seed, frames=args.frames, noise=False if args.no_noise else None
    )
    catalog = cfg.catalog()
    scene = simulate_scene(
        catalog, cfg.atmosphere, cfg.geometry, cfg.instrument, cfg.channel, cfg.oversample
    )
    t_scene = time.perf_counter()
    base_seed = cfg.base_seed if cfg.noise_enabled else None

    if cfg.ramp is None:
        frames = scan_sequence(scene.radiance, cfg.instrument, cfg.channel, cfg.frames, base_seed)
        truth_ramp = None
    else:
        species = GasSpecies[cfg.ramp["species"]]
        base_ppm = cfg.atmosphere.gas_column(species) / cfg.atmosphere.air_column() * 1e6
        targets = ramp_factors(cfg.ramp["start_ppm"], cfg.ramp["end_ppm"], cfg.frames)
        if not base_ppm > 0:
            raise ConfigError(f"simulation.ramp: base {species.name} mixing ratio is zero")
        sigma = cfg.instrument.noise_sigma(cfg.channel)
        frames = []
        for i, ppm in enumerate(targets):
            radiance = scene.scaled({species: ppm / base_ppm}).radiance
            samples = noiseless_samples(radiance, cfg.instrument, cfg.channel)
            seed = None if base_seed is None else frame_seed(base_seed, i)
            if seed is not None:
                samples = samples + detector_noise(seed, samples.size, sigma)
            frames.append(Interferogram(
                samples, cfg.instrument.opd_step_cm, cfg.instrument.lambda_ref, cfg.channel, seed))
        truth_ramp = (species, targets)
    t_frames = time.perf_counter()

    with OutputDir(args.out) as out:
        (out.root / "frames").mkdir(exist_ok=True)
        out.write("truth_transmittance.csv", format_spectrum_csv(scene.transmittance))
        width = max(4, len(str(len(frames) - 1)))
        for i, frame in enumerate(frames):
            out.write(f"frames/frame_{i:0{width}d}.csv", format_interferogram_csv(frame))
        if truth_ramp is not None:
            species, targets = truth_ramp
            rows = [f"frame_index,time_s,{species.name.lower()}_ppm"]
            rows += [f"{i},{fmt(i * cfg.instrument.scan_period)},{fmt(v)}" for i, v in enumerate(targets)]
            out.write("truth_ramp.csv", "\n".join(rows) + "\n")
        manifest = RunManifest(
            command="simulate",
            config=cfg.to_dict(),
            defaults_applied=cfg.defaults_applied,
            inputs=_config_inputs(args, cfg),
            arguments={"seed": args.seed, "frames": args.frames, "no_noise": args.no_noise},
        )
        timings = None
        if args.timings:
            timings = {"scene": t_scene - t0, "frames": t_frames - t_scene,
                       "total": time.perf_counter() - t0}
        _finish(out, manifest, timings)
    print(f"wrote {len(frames)} interferogram(s) to {Path(args.out) / 'frames'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# transform


def _processing(args, cfg: Optional[RunConfig]) -> Processing:
    base = cfg.processing if cfg is not None else Processing()
    changes = {}
    if args.apodization is not None:
        changes["apodization"] = ApodizationKind.parse(args.apodization)
    if args.no_phase_correction:
        changes["phase_correction"] = False
    if args.zero_fill is not None:
        if args.zero_fill < 1:
            raise ConfigError("--zero-fill must be >= 1")
        changes["zero_fill"] = args.zero_fill
    return dataclasses.replace(base, **changes)


def _snr_doc(spectrum) -> dict:
    try:
        return {"report": estimate_snr(spectrum).to_dict(), "error": None}
    except SpectrosatError as exc:
        return {"report": None, "error": f"{type(exc).__name__}: {exc}"}


def _processing_doc(p: Processing) -> dict:
    return {
        "apodization": p.apodization.value,
        "phase_correction": p.phase_correction,
        "zero_fill": p.zero_fill,
    }


def cmd_transform(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config) if args.config else None
    processing = _processing(args, cfg)
    paths = [Path(p) for p in args.inputs]
    frames = [read_interferogram_csv(p) for p in paths]
    if not frames:
        raise EmptyInput("no interferogram files given")
    results = []
    if args.average or len(frames) == 1:
        mean = average_interferograms(frames) if len(frames) > 1 else frames[0]
        spectrum = recover(mean, processing)
        doc = {"frames": len(frames), "averaged": bool(args.average), **_snr_doc(spectrum)}
        if args.average and len(frames) > 1:
            single = _snr_doc(recover(frames[0], processing))
            doc["single_frame"] = single
            doc["expected_gain"] = math.sqrt(len(frames))
            if doc["report"] and single["report"]:
                doc["snr_gain"] = doc["report"]["snr"] / single["report"]["snr"]
            else:
                doc["snr_gain"] = None
        results.append(("spectrum.csv", "snr_report.json", spectrum, doc))
    else:
        for p, frame in zip(paths, frames):
            spectrum = recover(frame, processing)
            doc = {"frames": 1, "averaged": False, **_snr_doc(spectrum)}
            results.append((f"{p.stem}.spectrum.csv", f"{p.stem}.snr_report.json", spectrum, doc))
    t_proc = time.perf_counter()

    with OutputDir(args.out) as out:
        for spec_name, snr_name, spectrum, doc in results:
            out.write(spec_name, format_spectrum_csv(spectrum))
            doc["processing"] = _processing_doc(processing)
            out.write(snr_name, dumps_json(doc))
        inputs = _inputs(paths + ([Path(args.config)] if args.config else []))
        manifest = RunManifest(
            command="transform",
            config=None if cfg is None else cfg.to_dict(),
            defaults_applied=() if cfg is None else cfg.defaults_applied,
            inputs=inputs,
            arguments={
                "inputs": [str(p) for p in paths],
                "average": bool(args.average),
                **_processing_doc(processing),
            },
        )
        timings = {"processing": t_proc - t0, "total": time.perf_counter() - t0} if args.timings else None
        _finish(out, manifest, timings)
    for spec_name, _, _, doc in results:
        snr = doc["report"]["snr"] if doc["report"] else None
        print(f"{spec_name}: snr={'n/a' if snr is None else f'{snr:.1f}'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# retrieve


def _retrieve_with_fallback(spectrum, cfg: RunConfig, catalog):
    try:
        return retrieve(spectrum, cfg.bands, catalog, cfg.geometry)
    except ZeroOxygenColumn:
        # no O2 absorption at all: columns are still meaningful, mixing ratios are not
        res = retrieve(spectrum, cfg.bands, catalog, cfg.geometry, vmr=False)
        return dataclasses.replace(res, flags=res.flags + ("vmr_undefined:zero_o2_column",))


def cmd_retrieve(args) -> int:
    t0 = time.perf_counter()
    cfg = _config(args)
    catalog = cfg.catalog()
    if args.input_kind == "transmittance":
        spectrum = read_spectrum_csv(args.spectrum, SpectrumKind.TRANSMITTANCE)
    else:
        spectrum = read_spectrum_csv(args.spectrum, SpectrumKind.RECOVERED)
        if cfg.processing.reference == "modeled":
            reference = modeled_reference(
                cfg.instrument, cfg.channel, cfg.geometry, cfg.processing, cfg.oversample
            )
            spectrum = to_transmittance(spectrum, reference, cfg.evaluation_band)
    result = _retrieve_with_fallback(spectrum, cfg, catalog)
    with OutputDir(args.out) as out:
        out.write("retrieval.json", dumps_json(result.to_dict()))
        inputs = _config_inputs(args, cfg)
        inputs.update(_inputs([args.spectrum]))
        manifest = RunManifest(
            command="retrieve",
            config=cfg.to_dict(),
            defaults_applied=cfg.defaults_applied,
            inputs=inputs,
            arguments={"spectrum": str(args.spectrum), "input_kind": args.input_kind},
        )
        _finish(out, manifest, {"total": time.perf_counter() - t0} if args.timings else None)
    for sp, v in result.vmr_ppm.items():
        print(f"{sp.name}: {v:.4f} ppm")
    for flag in result.flags:
        print(f"flag: {flag}")
    return EXIT_OK


# --------------------------------------------------------------------------
# timeseries


def cmd_timeseries(args) -> int:
    t0 = time.perf_counter()
    cfg = _config(args)
    catalog = cfg.catalog()
    frame_dir = Path(args.frame_dir)
    if not frame_dir.is_dir():
        raise DataIOError(f"{frame_dir} is not a directory")
    paths = sorted(frame_dir.glob("*.csv"))
    if not paths:
        raise EmptyInput(f"no interferogram CSV files in {frame_dir}")
    frames = [read_interferogram_csv(p) for p in paths]
    block = args.block or cfg.processing.averaging_block
    reference = None
    band = None
    if cfg.processing.reference == "modeled":
        reference = modeled_reference(
            cfg.instrument, cfg.channel, cfg.geometry, cfg.processing, cfg.oversample
        )
        band = cfg.evaluation_band
    entries = process_timeseries(
        frames, cfg.instrument, cfg.bands, catalog, cfg.geometry,
        reference=reference, evaluation_band=band,
        apodization=cfg.processing.apodization,
        phase_correction=cfg.processing.phase_correction,
        zero_fill=cfg.processing.zero_fill,
        block=block,
        workers=thread_count(),
    )
    with OutputDir(args.out) as out:
        out.write("retrievals.jsonl", timeseries_jsonl(entries))
        out.write("timeseries.csv", timeseries_rows(entries))
        inputs = _config_inputs(args, cfg)
        inputs.update({p.name: sha256_file(p) for p in paths})
        manifest = RunManifest(
            command="timeseries",
            config=cfg.to_dict(),
            defaults_applied=cfg.defaults_applied,
            inputs=inputs,
            arguments={"frame_dir": str(frame_dir), "block": block},
        )
        _finish(out, manifest, {"total": time.perf_counter() - t0} if args.timings else None)
    failed = sum(e.error is not None for e in entries)
    print(f"processed {len(entries)} block(s), {failed} failed")
    return EXIT_OK


# --------------------------------------------------------------------------
# lines

LINE_COLUMNS = "molecule,isotopologue,nu0_cm-1,intensity,einstein_a,gamma_air,gamma_self,elower,n_air,delta_air"


def cmd_lines(args) -> int:
    catalog = load_catalog(args.catalog) if args.catalog else fixture_catalog()
    for d in catalog.diagnostics:
        log.warning("%s line %d: %s", args.catalog, d.line_number, d.message)
    species = GasSpecies.parse(args.species) if args.species else None
    lo, hi = args.band
    kinds = [species] if species is not None else list(GasSpecies)
    lines = sorted((ln for sp in kinds for ln in query_band(catalog, sp, lo, hi)), key=lambda l: l.nu0)
    rows = [LINE_COLUMNS]
    for ln in lines:
        rows.append(",".join([
            str(ln.molecule_id), str(ln.isotopologue), fmt(ln.nu0), fmt(ln.intensity),
            fmt(ln.einstein_a), fmt(ln.gamma_air), fmt(ln.gamma_self), fmt(ln.elower),
            fmt(ln.n_air), fmt(ln.delta_air),
        ]))
    text = "\n".join(rows) + "\n"
    if args.out is None:
        sys.stdout.write(text)
        return EXIT_OK
    with OutputDir(args.out) as out:
        out.write("lines.csv", text)
        manifest = RunManifest(
            command="lines",
            inputs=_inputs([args.catalog]) if args.catalog else {},
            arguments={"catalog": args.catalog, "species": args.species, "band": [lo, hi]},
        )
        _finish(out, manifest, None)
    print(f"{len(lines)} line(s) written to {Path(args.out) / 'lines.csv'}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spectrosat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"spectrosat {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="forward-model a scene and synthesize interferograms")
    p.add_argument("--config", help="JSON run configuration (defaults when omitted)")
    p.add_argument("--seed", type=int, help="base noise seed (overrides noise.base_seed)")
    p.add_argument("--frames", type=int, help="number of scans (overrides simulation.frames)")
    p.add_argument("--no-noise", action="store_true", help="write noiseless interferograms")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--timings", action="store_true", help="record wall-clock timings in the manifest")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("transform", help="interferogram CSV(s) to spectrum CSV and SNR report")
    p.add_argument("inputs", nargs="+", help="interferogram CSV files")
    p.add_argument("--config", help="take processing settings from this configuration")
    p.add_argument("--average", action="store_true", help="average all inputs before transforming")
    p.add_argument("--apodization", choices=[k.value for k in ApodizationKind])
    p.add_argument("--no-phase-correction", action="store_true", help="magnitude spectrum instead of Mertz")
    p.add_argument("--zero-fill", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--timings", action="store_true")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("retrieve", help="columns and mixing ratios from one spectrum CSV")
    p.add_argument("spectrum", help="spectrum CSV")
    p.add_argument("--config", help="JSON run configuration (defaults when omitted)")
    p.add_argument(
        "--input-kind", choices=("recovered", "transmittance"), default="recovered",
        help="recovered spectra are ratioed per processing.reference; transmittance is used as is",
    )
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--timings", action="store_true")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("timeseries", help="retrieve every interferogram in a directory")
    p.add_argument("frame_dir", help="directory of interferogram CSV files, processed in name order")
    p.add_argument("--config", help="JSON run configuration (defaults when omitted)")
    p.add_argument("--average", dest="block", type=int, metavar="N",
                   help="average blocks of N frames (overrides processing.averaging_block)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--timings", action="store_true")
    p.set_defaults(func=cmd_timeseries)

    p = sub.add_parser("lines", help="tabulate catalog lines in a band")
    p.add_argument("--catalog", help=".par catalog (bundled fixture when omitted)")
    p.add_argument("--species", help="CO2, CH4 or O2 (all when omitted)")
    p.add_argument("--band", nargs=2, type=float, required=True, metavar=("LO", "HI"))
    p.add_argument("--out", help="output directory (stdout when omitted)")
    p.set_defaults(func=cmd_lines)
    return parser


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataIOError, OSError)):
        return EXIT_IO
    return EXIT_NUMERICAL


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        with scipy.fft.set_workers(thread_count()):
            return args.func(args)
    except (SpectrosatError, OSError, ValueError, FloatingPointError) as exc:
        if isinstance(exc, ValueError) and not isinstance(exc, SpectrosatError):
            # invalid values reaching a constructor are configuration problems
            code = EXIT_CONFIG
        else:
            code = exit_code_for(exc)
        print(f"spectrosat: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
