"""Glue between the forward model, the instrument and spectrum recovery."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .dsp import ApodizationKind, interferogram_to_spectrum, transmittance_ratio
from .instrument import InstrumentConfig, Interferogram, instrument_grid, noiseless_samples
from .linelist import GasSpecies, LineCatalog
from .radtran import (
    AtmosphereColumn,
    ObservationGeometry,
    SpectralGrid,
    Spectrum,
    SpectrumKind,
    at_aperture_radiance,
    optical_depth,
    transmittance,
)

DEFAULT_OVERSAMPLE = 200


@dataclass(frozen=True)
class Processing:
    apodization: ApodizationKind = ApodizationKind.NORTON_BEER_MEDIUM
    phase_correction: bool = True
    zero_fill: int = 2
    averaging_block: int = 1
    reference: str = "modeled"  # "modeled" or "none"
    evaluation_band: Optional[tuple[float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "apodization", ApodizationKind.parse(self.apodization))
        if self.reference not in ("modeled", "none"):
            raise ConfigError(f"reference must be 'modeled' or 'none', got {self.reference!r}")


@dataclass(frozen=True, eq=False)
class Scene:
    """Monochromatic truth for one observation on a fine grid."""

    grid: SpectralGrid
    optical_depths: Mapping[GasSpecies, Spectrum]
    geometry: ObservationGeometry

    @property
    def optical_depth(self) -> Spectrum:
        total = sum(s.values for s in self.optical_depths.values())
        return Spectrum(self.grid, total, SpectrumKind.OPTICAL_DEPTH)

    @property
    def transmittance(self) -> Spectrum:
        return transmittance(self.optical_depth, self.geometry)

    @property
    def radiance(self) -> Spectrum:
        return at_aperture_radiance(self.transmittance, self.geometry)

    def scaled(self, factors: Mapping[GasSpecies, float]) -> "Scene":
        """Same scene with each absorber's optical depth multiplied by a factor.

        Optical depth is linear in absorber amount; the small change of the
        self-broadened width with mixing ratio is not propagated.
        """
        taus = {
            sp: (tau if sp not in factors else tau.scaled(factors[sp]))
            for sp, tau in self.optical_depths.items()
        }
        return Scene(self.grid, taus, self.geometry)


def simulate_scene(
    catalog: LineCatalog,
    atmosphere: AtmosphereColumn,
    geometry: ObservationGeometry,
    config: InstrumentConfig,
    channel: str,
    oversample: int = DEFAULT_OVERSAMPLE,
    species: Sequence[GasSpecies] = tuple(GasSpecies),
) -> Scene:
    grid = instrument_grid(config, channel, oversample)
    taus = {
        sp: optical_depth(catalog, atmosphere, sp, grid, require_lines=False) for sp in species
    }
    return Scene(grid, taus, geometry)


def clear_sky_radiance(grid: SpectralGrid, geometry: ObservationGeometry) -> Spectrum:
    ones = Spectrum(grid, np.ones(grid.count), SpectrumKind.TRANSMITTANCE)
    return at_aperture_radiance(ones, geometry)


def recover(frame: Interferogram, processing: Processing = Processing()) -> Spectrum:
    return interferogram_to_spectrum(
        frame, processing.apodization, processing.phase_correction, processing.zero_fill
    )


def modeled_reference(
    config: InstrumentConfig,
    channel: str,
    geometry: ObservationGeometry,
    processing: Processing = Processing(),
    oversample: int = DEFAULT_OVERSAMPLE,
) -> Spectrum:
    """Recovered spectrum of the same observation with no absorbers."""
    grid = instrument_grid(config, channel, oversample)
    samples = noiseless_samples(clear_sky_radiance(grid, geometry), config, channel)
    frame = Interferogram(samples, config.opd_step_cm, config.lambda_ref, channel)
    return recover(frame, processing)


def evaluation_band(
    config: InstrumentConfig, channel: str, processing: Processing = Processing()
) -> tuple[float, float]:
    """Part of the channel where the filter is fully open."""
    if processing.evaluation_band is not None:
        return tuple(processing.evaluation_band)
    det = config.channel(channel)
    lo, hi = det.band_wavenumbers
    return lo + det.filter_edge, hi - det.filter_edge


def to_transmittance(
    recovered: Spectrum,
    reference: Spectrum,
    band: tuple[float, float],
) -> Spectrum:
    return transmittance_ratio(recovered, reference, band).transmittance


def ramp_factors(start: float, end: float, count: int) -> np.ndarray:
    """Linear ramp from `start` to `end` over `count` frames."""
    if count == 1:
        return np.array([float(start)])
    return np.linspace(start, end, count)
