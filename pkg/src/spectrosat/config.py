"""Strict JSON run configuration and the run manifest.

Every section is optional; omitted fields take documented defaults and the
dotted path of each default applied is kept in ``RunConfig.defaults_applied``.
Unknown keys anywhere are rejected. ``RunConfig.to_dict()`` returns the fully
resolved document, which loads back to an identical configuration.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from . import __version__
from .errors import ConfigError, IoFailure, ParseError, UnknownKey, ValidationError
from .fileio import dumps_json, sha256_bytes
from .instrument import INGAAS_SWIR, SI_O2, DetectorSpec, InstrumentConfig
from .linelist import GasSpecies, LineCatalog, fixture_catalog, load_catalog
from .pipeline import Processing, evaluation_band
from .radtran import AtmosphereColumn, Layer, ObservationGeometry, default_atmosphere
from .retrieval import DEFAULT_BANDS, RetrievalBand

# --------------------------------------------------------------------------
# field checkers: (value, path) -> normalized JSON value


def _number(positive=False, nonneg=False, lo=None, hi=None):
    def check(v, path):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValidationError(path, f"expected a finite number, got {v!r}")
        v = float(v)
        if positive and not v > 0:
            raise ValidationError(path, f"must be positive, got {v}")
        if nonneg and v < 0:
            raise ValidationError(path, f"must be >= 0, got {v}")
        if lo is not None and v < lo or hi is not None and v > hi:
            raise ValidationError(path, f"must lie in [{lo}, {hi}], got {v}")
        return v
    return check


def _integer(minimum=None):
    def check(v, path):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValidationError(path, f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            raise ValidationError(path, f"must be >= {minimum}, got {v}")
        return v
    return check


def _boolean(v, path):
    if not isinstance(v, bool):
        raise ValidationError(path, f"expected true or false, got {v!r}")
    return v


def _string(v, path):
    if not isinstance(v, str) or not v:
        raise ValidationError(path, f"expected a non-empty string, got {v!r}")
    return v


def _optional(check):
    def wrapped(v, path):
        return None if v is None else check(v, path)
    return wrapped


def _choice(*options):
    def check(v, path):
        if v not in options:
            raise ValidationError(path, f"expected one of {list(options)}, got {v!r}")
        return v
    return check


def _species(v, path):
    try:
        return GasSpecies.parse(v).name
    except (ValueError, KeyError, ConfigError):
        raise ValidationError(path, f"unknown species {v!r}") from None


def _interval(v, path):
    if not isinstance(v, list) or len(v) != 2:
        raise ValidationError(path, "expected [low, high]")
    lo, hi = (_number()(x, f"{path}[{i}]") for i, x in enumerate(v))
    if not lo < hi:
        raise ValidationError(path, "low must be below high")
    return [lo, hi]


def _vmr_map(v, path):
    if not isinstance(v, dict):
        raise ValidationError(path, "expected an object of species -> ppm")
    out = {}
    for k, x in v.items():
        name = _species(k, f"{path}.{k}")
        out[name] = _number(nonneg=True, hi=1e6)(x, f"{path}.{k}")
    return out


def _list_of(fields):
    def check(v, path):
        if not isinstance(v, list):
            raise ValidationError(path, "expected a list")
        return [_section(item, f"{path}[{i}]", fields, None) for i, item in enumerate(v)]
    return check


def _section(raw, path: str, fields: dict, defaults: Optional[list]) -> dict:
    """Validate one object against `fields` = {key: (default, checker)}.

    A default of ``REQUIRED`` makes the key mandatory. Paths of defaults
    applied are appended to `defaults` when it is a list.
    """
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValidationError(path or "<root>", "expected an object")
    for key in raw:
        if key not in fields:
            raise UnknownKey(f"{path}.{key}" if path else key)
    out = {}
    for key, (default, check) in fields.items():
        sub = f"{path}.{key}" if path else key
        if key in raw:
            out[key] = check(raw[key], sub)
        elif default is REQUIRED:
            raise ValidationError(sub, "required field is missing")
        else:
            out[key] = copy.deepcopy(default)
            if defaults is not None:
                defaults.append(sub)
    return out


REQUIRED = object()

# --------------------------------------------------------------------------
# schema


def _channel_doc(d: DetectorSpec) -> dict:
    return {
        "name": d.name,
        "band_lo_um": d.band_lo,
        "band_hi_um": d.band_hi,
        "active_side_mm": d.active_side,
        "d_star": d.d_star,
        "nep": d.nep,
        "material": d.material,
        "filter_edge_cm-1": d.filter_edge,
    }


CHANNEL_FIELDS = {
    "name": (REQUIRED, _string),
    "band_lo_um": (REQUIRED, _number(positive=True)),
    "band_hi_um": (REQUIRED, _number(positive=True)),
    "active_side_mm": (1.0, _number(positive=True)),
    "d_star": (None, _optional(_number(positive=True))),
    "nep": (None, _optional(_number(positive=True))),
    "material": ("InGaAs", _string),
    "filter_edge_cm-1": (20.0, _number(nonneg=True)),
}

INSTRUMENT_FIELDS = {
    "aperture_diameter_mm": (100.0, _number(positive=True)),
    "fov_rad": (0.01, _number(positive=True)),
    "input_magnification": (4.0, _number(positive=True)),
    "lambda_ref_nm": (632.8, _number(positive=True)),
    "opd_step_nm": (None, _optional(_number(positive=True))),
    "n_samples": (32_000, _integer(minimum=2)),
    "scan_period_s": (4.0, _number(positive=True)),
    "optical_efficiency": (0.5, _number(positive=True, hi=1.0)),
    "stroke_mm": (4.0, _number(positive=True)),
    "channels": ([_channel_doc(INGAAS_SWIR), _channel_doc(SI_O2)], _list_of(CHANNEL_FIELDS)),
    "channel": (INGAAS_SWIR.name, _string),
}

LAYER_FIELDS = {
    "pressure_atm": (REQUIRED, _number(positive=True)),
    "temperature_k": (REQUIRED, _number(positive=True)),
    "thickness_km": (REQUIRED, _number(positive=True)),
    "vmr_ppm": ({}, _vmr_map),
}

ATMOSPHERE_FIELDS = {
    "vmr_ppm": ({"CO2": 420.0, "CH4": 1.9, "O2": 209500.0}, _vmr_map),
    "n_layers": (20, _integer(minimum=1)),
    "layer_thickness_km": (1.0, _number(positive=True)),
    "surface_pressure_atm": (1.0, _number(positive=True)),
    "temperature_k": (296.0, _number(positive=True)),
    "scale_height_km": (8.0, _number(positive=True)),
    "layers": (None, _optional(_list_of(LAYER_FIELDS))),
}

GEOMETRY_FIELDS = {
    "altitude_km": (550.0, _number(positive=True)),
    "solar_zenith_deg": (30.0, _number(nonneg=True)),
    "view_zenith_deg": (0.0, _number(nonneg=True)),
    "surface_albedo": (0.2, _number(nonneg=True, hi=1.0)),
}

BAND_FIELDS = {
    "species": (REQUIRED, _species),
    "nu_center": (REQUIRED, _number(positive=True)),
    "window_halfwidth": (15.0, _number(positive=True)),
    "baseline_margin": (10.0, _number(positive=True)),
}

NOISE_FIELDS = {
    "enabled": (True, _boolean),
    "base_seed": (0, _integer(minimum=0)),
}

PROCESSING_FIELDS = {
    "apodization": ("norton_beer_medium", _choice("boxcar", "hann", "norton_beer_medium")),
    "phase_correction": (True, _boolean),
    "zero_fill": (2, _integer(minimum=1)),
    "averaging_block": (1, _integer(minimum=1)),
    "reference": ("modeled", _choice("modeled", "none")),
    "evaluation_band": (None, _optional(_interval)),
}

RAMP_FIELDS = {
    "species": ("CO2", _species),
    "start_ppm": (REQUIRED, _number(nonneg=True)),
    "end_ppm": (REQUIRED, _number(nonneg=True)),
}


def _ramp(v, path):
    return _section(v, path, RAMP_FIELDS, None)


SIMULATION_FIELDS = {
    "frames": (1, _integer(minimum=1)),
    "oversample": (200, _integer(minimum=2)),
    "ramp": (None, _optional(_ramp)),
}

TOP_FIELDS = {
    "instrument": None,
    "atmosphere": None,
    "geometry": None,
    "bands": None,
    "noise": None,
    "processing": None,
    "simulation": None,
    "catalog": None,
}

# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RunConfig:
    instrument: InstrumentConfig
    channel: str
    atmosphere: AtmosphereColumn
    geometry: ObservationGeometry
    bands: tuple[RetrievalBand, ...]
    noise_enabled: bool
    base_seed: int
    processing: Processing
    frames: int
    oversample: int
    ramp: Optional[dict]
    catalog_path: Optional[Path]
    resolved: dict = field(repr=False)
    defaults_applied: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return copy.deepcopy(self.resolved)

    @property
    def digest(self) -> str:
        return sha256_bytes(dumps_json(self.resolved).encode())

    @property
    def evaluation_band(self) -> tuple[float, float]:
        return evaluation_band(self.instrument, self.channel, self.processing)

    def catalog(self) -> LineCatalog:
        if self.catalog_path is None:
            return fixture_catalog()
        return load_catalog(self.catalog_path)

    def with_overrides(
        self,
        *,
        seed: Optional[int] = None,
        frames: Optional[int] = None,
        noise: Optional[bool] = None,
    ) -> "RunConfig":
        """Copy with command-line overrides folded into the resolved document."""
        doc = self.to_dict()
        touched = []
        if seed is not None:
            doc["noise"]["base_seed"] = seed
            touched.append("noise.base_seed")
        if frames is not None:
            doc["simulation"]["frames"] = frames
            touched.append("simulation.frames")
        if noise is not None:
            doc["noise"]["enabled"] = noise
            touched.append("noise.enabled")
        out = config_from_dict(doc, base_dir=None)
        kept = tuple(p for p in self.defaults_applied if p not in touched)
        object.__setattr__(out, "defaults_applied", kept)
        return out


def _build(path: str, fn: Callable[[], Any]):
    try:
        return fn()
    except (ValidationError, UnknownKey):
        raise
    except ConfigError as exc:
        raise ValidationError(path, str(exc)) from None


def _make_atmosphere(doc: dict) -> AtmosphereColumn:
    if doc["layers"] is not None:
        base = {k: v / 1e6 for k, v in doc["vmr_ppm"].items()}
        layers = []
        for i, ld in enumerate(doc["layers"]):
            vmr = {**base, **{k: v / 1e6 for k, v in ld["vmr_ppm"].items()}}
            layers.append(_build(f"atmosphere.layers[{i}]", lambda ld=ld, vmr=vmr: Layer(
                ld["pressure_atm"], ld["temperature_k"], ld["thickness_km"], vmr)))
        return AtmosphereColumn(tuple(layers))
    return default_atmosphere(
        {k: v / 1e6 for k, v in doc["vmr_ppm"].items()},
        n_layers=doc["n_layers"],
        layer_thickness=doc["layer_thickness_km"],
        surface_pressure=doc["surface_pressure_atm"],
        temperature=doc["temperature_k"],
        scale_height=doc["scale_height_km"],
    )


def config_from_dict(raw: Any, base_dir: Optional[Path] = None) -> RunConfig:
    """Validate a parsed JSON document and build the run configuration."""
    if not isinstance(raw, dict):
        raise ValidationError("<root>", "configuration must be a JSON object")
    for key in raw:
        if key not in TOP_FIELDS:
            raise UnknownKey(key)
    defaults: list[str] = []
    inst = _section(raw.get("instrument"), "instrument", INSTRUMENT_FIELDS, defaults)
    atm = _section(raw.get("atmosphere"), "atmosphere", ATMOSPHERE_FIELDS, defaults)
    geo = _section(raw.get("geometry"), "geometry", GEOMETRY_FIELDS, defaults)
    noise = _section(raw.get("noise"), "noise", NOISE_FIELDS, defaults)
    proc = _section(raw.get("processing"), "processing", PROCESSING_FIELDS, defaults)
    sim = _section(raw.get("simulation"), "simulation", SIMULATION_FIELDS, defaults)
    if "bands" in raw:
        bands_doc = _list_of(BAND_FIELDS)(raw["bands"], "bands")
    else:
        bands_doc = [
            {"species": b.species.name, "nu_center": b.nu_center,
             "window_halfwidth": b.window_halfwidth, "baseline_margin": b.baseline_margin}
            for b in DEFAULT_BANDS
        ]
        defaults.append("bands")
    if "catalog" in raw:
        catalog = _optional(_string)(raw["catalog"], "catalog")
    else:
        catalog = None
        defaults.append("catalog")
    if atm["layers"] is not None:
        given = raw.get("atmosphere") or {}
        clash = [k for k in ("n_layers", "layer_thickness_km", "surface_pressure_atm",
                             "temperature_k", "scale_height_km") if k in given]
        if clash:
            raise ValidationError(f"atmosphere.{clash[0]}", "cannot be combined with explicit layers")

    channels = []
    for i, c in enumerate(inst["channels"]):
        channels.append(_build(f"instrument.channels[{i}]", lambda c=c: DetectorSpec(
            c["name"], c["band_lo_um"], c["band_hi_um"], c["active_side_mm"], c["d_star"],
            c["nep"], c["material"], c["filter_edge_cm-1"])))
    for i, c in enumerate(inst["channels"]):
        if c["d_star"] is None and c["nep"] is None:
            raise ValidationError(f"instrument.channels[{i}]",
                                  f"channel {c['name']} needs d_star or nep")
    instrument = _build("instrument", lambda: InstrumentConfig(
        aperture_diameter=inst["aperture_diameter_mm"],
        fov=inst["fov_rad"],
        input_magnification=inst["input_magnification"],
        lambda_ref=inst["lambda_ref_nm"],
        opd_step=inst["opd_step_nm"],
        n_samples=inst["n_samples"],
        scan_period=inst["scan_period_s"],
        channels=tuple(channels),
        optical_efficiency=inst["optical_efficiency"],
        stroke=inst["stroke_mm"],
    ))
    names = [c.name for c in channels]
    if inst["channel"] not in names:
        raise ValidationError("instrument.channel", f"{inst['channel']!r} is not one of {names}")

    atmosphere = _build("atmosphere", lambda: _make_atmosphere(atm))
    geometry = _build("geometry", lambda: ObservationGeometry(
        altitude=geo["altitude_km"],
        solar_zenith=math.radians(geo["solar_zenith_deg"]),
        view_zenith=math.radians(geo["view_zenith_deg"]),
        surface_albedo=geo["surface_albedo"],
        fov=inst["fov_rad"],
    ))
    bands = tuple(
        _build(f"bands[{i}]", lambda b=b: RetrievalBand(
            GasSpecies[b["species"]], b["nu_center"], b["window_halfwidth"], b["baseline_margin"]))
        for i, b in enumerate(bands_doc)
    )
    processing = Processing(
        apodization=proc["apodization"],
        phase_correction=proc["phase_correction"],
        zero_fill=proc["zero_fill"],
        averaging_block=proc["averaging_block"],
        reference=proc["reference"],
        evaluation_band=None if proc["evaluation_band"] is None else tuple(proc["evaluation_band"]),
    )

    # band coverage: every retrieval band must sit inside the evaluated part of the channel
    lo, hi = evaluation_band(instrument, inst["channel"], processing)
    for i, b in enumerate(bands):
        b_lo, b_hi = b.extent
        if b_lo < lo or b_hi > hi:
            raise ValidationError(
                f"bands[{i}]",
                f"{b.label} needs [{b_lo:g}, {b_hi:g}] cm-1 but channel "
                f"{inst['channel']} is evaluated over [{lo:.1f}, {hi:.1f}] cm-1",
            )

    catalog_path = None
    if catalog is not None:
        catalog_path = Path(catalog)
        if base_dir is not None and not catalog_path.is_absolute():
            catalog_path = base_dir / catalog_path

    resolved = {
        "instrument": inst,
        "atmosphere": atm,
        "geometry": geo,
        "bands": bands_doc,
        "noise": noise,
        "processing": proc,
        "simulation": sim,
        "catalog": None if catalog_path is None else str(catalog_path),
    }
    return RunConfig(
        instrument=instrument,
        channel=inst["channel"],
        atmosphere=atmosphere,
        geometry=geometry,
        bands=bands,
        noise_enabled=noise["enabled"],
        base_seed=noise["base_seed"],
        processing=processing,
        frames=sim["frames"],
        oversample=sim["oversample"],
        ramp=sim["ramp"],
        catalog_path=catalog_path,
        resolved=resolved,
        defaults_applied=tuple(defaults),
    )


def parse_config(text: str, base_dir: Optional[Path] = None) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return config_from_dict(raw, base_dir)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)


def default_config() -> RunConfig:
    return config_from_dict({})


# --------------------------------------------------------------------------


@dataclass
class RunManifest:
    """What a job read, what it wrote and how to run it again."""

    command: str
    config: Optional[dict] = None
    defaults_applied: tuple[str, ...] = ()
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: list = field(default_factory=list)  # [{path, sha256}]
    arguments: dict = field(default_factory=dict)
    timings_s: Optional[dict] = None
    tool_version: str = __version__

    @property
    def config_digest(self) -> Optional[str]:
        return None if self.config is None else sha256_bytes(dumps_json(self.config).encode())

    def to_dict(self) -> dict:
        out = {
            "tool": "spectrosat",
            "tool_version": self.tool_version,
            "command": self.command,
            "arguments": self.arguments,
            "config_digest": self.config_digest,
            "config": self.config,
            "defaults_applied": list(self.defaults_applied),
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": self.outputs,
        }
        if self.timings_s is not None:
            out["timings_s"] = self.timings_s
        return out
