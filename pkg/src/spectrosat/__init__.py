"""Simulation and processing toolkit for a small-satellite FTIR greenhouse-gas sounder.

Modules, bottom-up:

* ``linelist``   fixed-width molecular line catalogs
* ``radtran``    line-by-line optical depth, transmittance and at-aperture radiance
* ``instrument`` interferogram synthesis and detector noise
* ``dsp``        interferogram to spectrum, transmittance ratio, SNR
* ``retrieval``  line-depth columns and O2-normalized mixing ratios
* ``config``, ``fileio``, ``cli``  run configuration, artifacts and the command line
"""

__version__ = "0.1.0"

from .dsp import (
    ApodizationKind,
    SnrReport,
    apodization_window,
    average_interferograms,
    estimate_snr,
    interferogram_to_spectrum,
    transmittance_ratio,
)
from .errors import ConfigError, DataIOError, NumericalError, SpectrosatError
from .instrument import (
    DetectorSpec,
    InstrumentConfig,
    Interferogram,
    nep_of,
    scan_sequence,
    spectral_resolution,
    synthesize_interferogram,
)
from .linelist import GasSpecies, LineCatalog, SpectralLine, fixture_catalog, load_catalog, query_band
from .radtran import (
    AtmosphereColumn,
    Layer,
    ObservationGeometry,
    SpectralGrid,
    Spectrum,
    SpectrumKind,
    at_aperture_radiance,
    default_atmosphere,
    footprint_diameter,
    optical_depth,
    transmittance,
    voigt,
)
from .retrieval import (
    RetrievalBand,
    RetrievalResult,
    integral_column,
    measure_line_depth,
    process_timeseries,
    retrieve,
    volume_mixing_ratio,
)
from .config import RunConfig, load_config

__all__ = [
    "__version__",
    "ApodizationKind", "SnrReport", "apodization_window", "average_interferograms",
    "estimate_snr", "interferogram_to_spectrum", "transmittance_ratio",
    "ConfigError", "DataIOError", "NumericalError", "SpectrosatError",
    "DetectorSpec", "InstrumentConfig", "Interferogram", "nep_of", "scan_sequence",
    "spectral_resolution", "synthesize_interferogram",
    "GasSpecies", "LineCatalog", "SpectralLine", "fixture_catalog", "load_catalog", "query_band",
    "AtmosphereColumn", "Layer", "ObservationGeometry", "SpectralGrid", "Spectrum",
    "SpectrumKind", "at_aperture_radiance", "default_atmosphere", "footprint_diameter",
    "optical_depth", "transmittance", "voigt",
    "RetrievalBand", "RetrievalResult", "integral_column", "measure_line_depth",
    "process_timeseries", "retrieve", "volume_mixing_ratio",
    "RunConfig", "load_config",
]
