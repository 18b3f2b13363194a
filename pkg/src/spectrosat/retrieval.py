"""Line-depth retrieval of gas columns and O2-normalized mixing ratios.

Each band is reduced to an integrated absorbance relative to a linear
baseline fitted on two flanking strips, then inverted with the weak-line
relation ``column = A / (AMF * sum S)``. Mixing ratios divide by the dry-air
column implied by the O2 band.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .dsp import (
    ApodizationKind,
    SnrReport,
    average_interferograms,
    estimate_snr,
    interferogram_to_spectrum,
    transmittance_ratio,
)
from .errors import (
    BandOutOfRange,
    ConfigError,
    EmptyInput,
    MissingLines,
    MissingO2Band,
    NegativeTransmittance,
    SaturatedBandWarning,
    SpectrosatError,
    ZeroOxygenColumn,
)
from .instrument import InstrumentConfig, Interferogram
from .linelist import O2_DRY_AIR_FRACTION, GasSpecies, LineCatalog, query_band
from .radtran import ObservationGeometry, Spectrum, SpectrumKind

log = logging.getLogger(__name__)

ABSORBANCE_FLOOR = 1e-6
SATURATION_DEPTH = 0.9
LOW_SIGNAL_SIGMAS = 3.0


@dataclass(frozen=True)
class RetrievalBand:
    species: GasSpecies
    nu_center: float  # cm-1
    window_halfwidth: float = 15.0
    baseline_margin: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "species", GasSpecies.parse(self.species))
        if not self.window_halfwidth > 0:
            raise ConfigError("window_halfwidth must be positive")
        if not self.baseline_margin > 0:
            raise ConfigError("baseline_margin must be positive")

    @property
    def window(self) -> tuple[float, float]:
        return self.nu_center - self.window_halfwidth, self.nu_center + self.window_halfwidth

    @property
    def extent(self) -> tuple[float, float]:
        lo, hi = self.window
        return lo - self.baseline_margin, hi + self.baseline_margin

    @property
    def label(self) -> str:
        return f"{self.species.name}@{self.nu_center:g}"


DEFAULT_BANDS = (
    RetrievalBand(GasSpecies.O2, 7880.0),
    RetrievalBand(GasSpecies.CO2, 6250.0),
    RetrievalBand(GasSpecies.CO2, 6350.0),
    RetrievalBand(GasSpecies.CH4, 6024.0),
)


@dataclass(frozen=True)
class LineDepth:
    depth: float
    integrated_absorbance: float  # cm-1
    baseline: tuple[float, float]  # slope (per cm-1), value at band center
    saturated: bool


def measure_line_depth(spectrum: Spectrum, band: RetrievalBand) -> LineDepth:
    """Depth and integrated absorbance of one band against a linear baseline.

    The baseline is a least-squares line through the two strips of width
    ``baseline_margin`` flanking the window. ``depth = 1 - min(T / baseline)``
    inside the window and ``A = integral of -ln(T / baseline)`` with the ratio
    floored at 1e-6.
    """
    lo, hi = band.extent
    if not spectrum.grid.contains(lo, hi):
        raise BandOutOfRange(
            f"{band.label}: [{lo}, {hi}] outside grid "
            f"[{spectrum.grid.nu_start:.2f}, {spectrum.grid.nu_end:.2f}]"
        )
    w_lo, w_hi = band.window
    nu, values = spectrum.band(lo, hi)
    if np.any(values < 0):
        raise NegativeTransmittance(f"{band.label}: negative spectrum values")
    inside = (nu >= w_lo) & (nu <= w_hi)
    strips = ~inside
    if strips.sum() < 2 or inside.sum() < 2:
        raise BandOutOfRange(f"{band.label}: grid too coarse for window and baseline strips")
    x = nu - band.nu_center
    # centered closed-form fit; exact for a constant spectrum
    xs, ys = x[strips], values[strips]
    xm, ym = xs.mean(), ys.mean()
    slope = float(np.dot(xs - xm, ys - ym) / np.dot(xs - xm, xs - xm))
    offset = ym - slope * xm
    base = offset + slope * x[inside]
    if np.any(base <= 0):
        raise NegativeTransmittance(f"{band.label}: baseline is not positive")
    ratio = values[inside] / base
    depth = float(np.clip(1.0 - ratio.min(), 0.0, 1.0))
    absorbance = -np.log(np.maximum(ratio, ABSORBANCE_FLOOR))
    integrated = float(trapezoid(absorbance, nu[inside]))
    return LineDepth(depth, integrated, (float(slope), float(offset)), depth >= SATURATION_DEPTH)


def band_strength(catalog: LineCatalog, band: RetrievalBand) -> float:
    lines = query_band(catalog, band.species, *band.window)
    if not lines:
        raise MissingLines(f"no {band.species.name} lines in the {band.label} window")
    return math.fsum(ln.intensity for ln in lines)


def integral_column(
    integrated_absorbance: float,
    band: RetrievalBand,
    catalog: LineCatalog,
    geometry: ObservationGeometry,
    saturated: bool = False,
) -> float:
    """Weak-line column (molecules/cm2) from an integrated absorbance (cm-1)."""
    amf = geometry.air_mass_factor
    if not amf > 0:
        raise ConfigError("air-mass factor must be positive")
    strength = band_strength(catalog, band)
    if saturated:
        warnings.warn(
            f"{band.label} is saturated; weak-line column is biased low",
            SaturatedBandWarning,
            stacklevel=2,
        )
    return max(integrated_absorbance, 0.0) / (amf * strength)


def volume_mixing_ratio(gas_column: float, o2_column: float) -> float:
    """Dry-air mixing ratio in ppm, using O2 as the air-column proxy."""
    if not o2_column > 0:
        raise ZeroOxygenColumn(f"O2 column must be positive, got {o2_column}")
    return gas_column / (o2_column / O2_DRY_AIR_FRACTION) * 1e6


@dataclass(frozen=True)
class BandResult:
    band: RetrievalBand
    line_depth: float
    integrated_absorbance: float
    integral_column: float
    saturated: bool
    low_signal: bool

    def to_dict(self) -> dict:
        return {
            "species": self.band.species.name,
            "nu_center": self.band.nu_center,
            "window_halfwidth": self.band.window_halfwidth,
            "baseline_margin": self.band.baseline_margin,
            "line_depth": self.line_depth,
            "integrated_absorbance": self.integrated_absorbance,
            "integral_column": self.integral_column,
            "saturated": self.saturated,
            "low_signal": self.low_signal,
        }


@dataclass(frozen=True)
class RetrievalResult:
    bands: tuple[BandResult, ...]
    columns: dict  # GasSpecies -> molecules/cm2
    vmr_ppm: dict  # GasSpecies -> ppm, O2 excluded
    snr: Optional[SnrReport]
    flags: tuple[str, ...] = ()

    @property
    def clean(self) -> bool:
        return not self.flags

    def to_dict(self) -> dict:
        return {
            "bands": [b.to_dict() for b in self.bands],
            "columns": {sp.name: v for sp, v in self.columns.items()},
            "volume_mixing_ratio_ppm": {sp.name: v for sp, v in self.vmr_ppm.items()},
            "snr": None if self.snr is None else self.snr.to_dict(),
            "flags": list(self.flags),
        }


def retrieve(
    spectrum: Spectrum,
    bands: Sequence[RetrievalBand],
    catalog: LineCatalog,
    geometry: ObservationGeometry,
    *,
    vmr: bool = True,
    snr: Optional[SnrReport] = None,
) -> RetrievalResult:
    """Columns for every band and O2-normalized mixing ratios per gas.

    Bands of the same gas are pooled: ``sum A / (AMF * sum S)``. The SNR of
    the input is estimated on the default bands when not supplied and the
    spectrum covers them; it drives the low-signal flag.
    """
    bands = list(bands)
    if not bands:
        raise EmptyInput("no retrieval bands")
    has_o2 = any(b.species is GasSpecies.O2 for b in bands)
    if vmr and not has_o2:
        raise MissingO2Band("mixing ratios need an O2 band for normalization")
    if snr is None:
        try:
            snr = estimate_snr(spectrum)
        except SpectrosatError:
            snr = None
    amf = geometry.air_mass_factor
    results = []
    flags = []
    absorbance: dict[GasSpecies, float] = {}
    strength: dict[GasSpecies, float] = {}
    for band in bands:
        d = measure_line_depth(spectrum, band)
        # saturation is reported through the flags rather than a warning
        col = integral_column(d.integrated_absorbance, band, catalog, geometry)
        low = snr is not None and d.depth < LOW_SIGNAL_SIGMAS / snr.snr
        if d.saturated:
            flags.append(f"saturated:{band.label}")
        if low:
            flags.append(f"low_signal:{band.label}")
        results.append(BandResult(band, d.depth, d.integrated_absorbance, col, d.saturated, low))
        absorbance[band.species] = absorbance.get(band.species, 0.0) + max(d.integrated_absorbance, 0.0)
        strength[band.species] = strength.get(band.species, 0.0) + band_strength(catalog, band)
    columns = {sp: absorbance[sp] / (amf * strength[sp]) for sp in absorbance}
    ratios = {}
    if vmr:
        o2 = columns[GasSpecies.O2]
        for sp, col in columns.items():
            if sp is not GasSpecies.O2:
                ratios[sp] = volume_mixing_ratio(col, o2)
    return RetrievalResult(tuple(results), columns, ratios, snr, tuple(flags))


@dataclass(frozen=True)
class TimeseriesEntry:
    frame_index: int
    time_s: float
    result: Optional[RetrievalResult]
    error: Optional[str] = None


def process_timeseries(
    frames: Sequence[Interferogram],
    config: InstrumentConfig,
    bands: Sequence[RetrievalBand],
    catalog: LineCatalog,
    geometry: ObservationGeometry,
    *,
    reference: Optional[Spectrum] = None,
    evaluation_band: Optional[tuple[float, float]] = None,
    apodization: ApodizationKind = ApodizationKind.NORTON_BEER_MEDIUM,
    phase_correction: bool = True,
    zero_fill: int = 2,
    block: int = 1,
    workers: Optional[int] = None,
) -> list[TimeseriesEntry]:
    """Retrieve every frame (or every block of `block` averaged frames), in order.

    When `reference` is given each recovered spectrum is ratioed against it
    over `evaluation_band` before retrieval; otherwise the band baselines
    absorb the continuum. A failing frame yields an entry with ``error`` set.
    Blocks are independent; with ``workers > 1`` they run on a thread pool
    and the entries are still returned in input order.
    """
    frames = list(frames)
    if not frames:
        raise EmptyInput("no frames to process")
    if block < 1:
        raise ConfigError("block must be >= 1")

    def one(start: int) -> TimeseriesEntry:
        chunk = frames[start : start + block]
        t = start * config.scan_period
        try:
            frame = chunk[0] if len(chunk) == 1 else average_interferograms(chunk)
            spec = interferogram_to_spectrum(frame, apodization, phase_correction, zero_fill)
            if reference is not None:
                spec = transmittance_ratio(spec, reference, evaluation_band).transmittance
            return TimeseriesEntry(start, t, retrieve(spec, bands, catalog, geometry))
        except SpectrosatError as exc:
            log.warning("frame %d failed: %s", start, exc)
            return TimeseriesEntry(start, t, None, f"{type(exc).__name__}: {exc}")

    starts = range(0, len(frames), block)
    if workers is None or workers <= 1:
        return [one(s) for s in starts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, starts))
