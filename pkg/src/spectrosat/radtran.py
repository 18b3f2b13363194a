"""Line-by-line transmittance and reflected-sunlight radiance.

The forward model is deliberately simple: a stack of homogeneous layers,
Voigt line shapes with pressure-scaled Lorentz widths, a two-way geometric
air-mass factor, a Lambertian surface and a blackbody Sun.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy import constants

from .errors import ConfigError, DegenerateProfile, MissingLines
from .linelist import (
    O2_DRY_AIR_FRACTION,
    REFERENCE_TEMPERATURE,
    GasSpecies,
    LineCatalog,
    line_arrays,
    query_band,
)

LOSCHMIDT_ATM = constants.atm / constants.k * 1e-6  # molecules cm-3 K at 1 atm
SOLAR_TEMPERATURE = 5772.0  # K
SOLAR_SOLID_ANGLE = 6.794e-5  # sr, Sun seen from 1 au
WING_CUTOFF = 25.0  # cm-1

DEFAULT_VMR = {GasSpecies.CO2: 420e-6, GasSpecies.CH4: 1.9e-6, GasSpecies.O2: O2_DRY_AIR_FRACTION}


# --------------------------------------------------------------------------
# grids and spectra

@dataclass(frozen=True)
class SpectralGrid:
    """Uniform wavenumber grid ``nu_start + k * nu_step``, k < count (cm-1)."""

    nu_start: float
    nu_step: float
    count: int

    def __post_init__(self):
        if not self.nu_step > 0:
            raise ConfigError(f"nu_step must be positive, got {self.nu_step}")
        if int(self.count) != self.count or self.count < 2:
            raise ConfigError(f"grid needs at least 2 points, got {self.count}")
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def covering(cls, nu_min: float, nu_max: float, nu_step: float) -> "SpectralGrid":
        """Smallest grid on multiples of `nu_step` that spans [nu_min, nu_max]."""
        k0 = math.floor(nu_min / nu_step)
        k1 = math.ceil(nu_max / nu_step)
        return cls(k0 * nu_step, nu_step, k1 - k0 + 1)

    @property
    def nu(self) -> np.ndarray:
        return self.nu_start + self.nu_step * np.arange(self.count)

    @property
    def nu_end(self) -> float:
        return self.nu_start + self.nu_step * (self.count - 1)

    def contains(self, nu_min: float, nu_max: float) -> bool:
        tol = 1e-9 * self.nu_step
        return nu_min >= self.nu_start - tol and nu_max <= self.nu_end + tol

    def indices(self, nu_min: float, nu_max: float) -> slice:
        """Slice of grid points with ``nu_min <= nu <= nu_max``."""
        lo = math.ceil((nu_min - self.nu_start) / self.nu_step - 1e-9)
        hi = math.floor((nu_max - self.nu_start) / self.nu_step + 1e-9)
        return slice(max(lo, 0), min(hi + 1, self.count))

    def matches(self, other: "SpectralGrid") -> bool:
        return (
            self.count == other.count
            and math.isclose(self.nu_step, other.nu_step, rel_tol=1e-12)
            and abs(self.nu_start - other.nu_start) <= 1e-9 * self.nu_step
        )


class SpectrumKind(enum.Enum):
    TRANSMITTANCE = "transmittance"
    RADIANCE = "radiance"
    RECOVERED = "recovered"
    OPTICAL_DEPTH = "optical_depth"


# measured transmittance may overshoot 1 through noise; see dsp.transmittance_ratio
TRANSMITTANCE_CEILING = 1.05


@dataclass(frozen=True, eq=False)
class Spectrum:
    grid: SpectralGrid
    values: np.ndarray
    kind: SpectrumKind

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.count,):
            raise ConfigError(
                f"spectrum has {values.size} values for a grid of {self.grid.count}"
            )
        if self.kind is SpectrumKind.TRANSMITTANCE and values.size:
            if values.min() < 0 or values.max() > TRANSMITTANCE_CEILING:
                raise ConfigError("transmittance values outside [0, 1.05]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def nu(self) -> np.ndarray:
        return self.grid.nu

    def band(self, nu_min: float, nu_max: float) -> tuple[np.ndarray, np.ndarray]:
        sl = self.grid.indices(nu_min, nu_max)
        return self.nu[sl], self.values[sl]

    def scaled(self, factor: float) -> "Spectrum":
        return Spectrum(self.grid, self.values * factor, self.kind)

    def with_values(self, values, kind: SpectrumKind | None = None) -> "Spectrum":
        return Spectrum(self.grid, values, kind or self.kind)


# --------------------------------------------------------------------------
# atmosphere and geometry

@dataclass(frozen=True)
class Layer:
    pressure: float  # atm
    temperature: float  # K
    thickness: float  # km
    vmr: Mapping[GasSpecies, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.thickness > 0:
            raise ConfigError(f"layer thickness must be positive, got {self.thickness}")
        if not self.pressure > 0:
            raise ConfigError(f"layer pressure must be positive, got {self.pressure}")
        if not 150.0 < self.temperature < 350.0:
            raise ConfigError(f"layer temperature {self.temperature} K outside (150, 350)")
        vmr = {GasSpecies.parse(k): float(v) for k, v in dict(self.vmr).items()}
        for sp, v in vmr.items():
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{sp.name} mixing ratio {v} outside [0, 1]")
        object.__setattr__(self, "vmr", vmr)

    @property
    def number_density(self) -> float:
        """Total molecules per cm3."""
        return LOSCHMIDT_ATM * self.pressure / self.temperature

    def gas_column(self, species: GasSpecies) -> float:
        """Absorber molecules per cm2 in this layer."""
        return self.vmr.get(species, 0.0) * self.number_density * self.thickness * 1e5


@dataclass(frozen=True)
class AtmosphereColumn:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError("atmosphere needs at least one layer")

    def gas_column(self, species: GasSpecies) -> float:
        species = GasSpecies.parse(species)
        return sum(layer.gas_column(species) for layer in self.layers)

    def air_column(self) -> float:
        return sum(layer.number_density * layer.thickness * 1e5 for layer in self.layers)

    def with_vmr(self, species: GasSpecies, value: float) -> "AtmosphereColumn":
        species = GasSpecies.parse(species)
        return AtmosphereColumn(
            tuple(replace(l, vmr={**l.vmr, species: value}) for l in self.layers)
        )

    def scaled(self, species: GasSpecies, factor: float) -> "AtmosphereColumn":
        species = GasSpecies.parse(species)
        return AtmosphereColumn(
            tuple(
                replace(l, vmr={**l.vmr, species: l.vmr.get(species, 0.0) * factor})
                for l in self.layers
            )
        )

    def stacked(self, other: "AtmosphereColumn") -> "AtmosphereColumn":
        return AtmosphereColumn(self.layers + other.layers)


def default_atmosphere(
    vmr: Mapping | None = None,
    n_layers: int = 20,
    layer_thickness: float = 1.0,
    surface_pressure: float = 1.0,
    temperature: float = REFERENCE_TEMPERATURE,
    scale_height: float = 8.0,
) -> AtmosphereColumn:
    """Isothermal column with exponential pressure falloff.

    Layer pressures are taken at mid-layer height. `vmr` overrides the
    default mixing ratios (mol/mol) per species.
    """
    mix = dict(DEFAULT_VMR)
    for k, v in (vmr or {}).items():
        mix[GasSpecies.parse(k)] = float(v)
    layers = []
    for i in range(n_layers):
        z = (i + 0.5) * layer_thickness
        layers.append(
            Layer(surface_pressure * math.exp(-z / scale_height), temperature, layer_thickness, mix)
        )
    return AtmosphereColumn(tuple(layers))


@dataclass(frozen=True)
class ObservationGeometry:
    altitude: float = 550.0  # km
    solar_zenith: float = math.radians(30.0)
    view_zenith: float = 0.0
    surface_albedo: float = 0.2
    fov: float = 0.01  # rad, full angle

    def __post_init__(self):
        if not 0.0 <= self.solar_zenith < math.pi / 2:
            raise ConfigError(f"solar_zenith {self.solar_zenith} outside [0, pi/2)")
        if not 0.0 <= self.view_zenith < math.pi / 3:
            raise ConfigError(f"view_zenith {self.view_zenith} outside [0, pi/3)")
        if not 0.0 <= self.surface_albedo <= 1.0:
            raise ConfigError(f"surface_albedo {self.surface_albedo} outside [0, 1]")
        if not 0.0 < self.fov < 0.1:
            raise ConfigError(f"fov {self.fov} outside (0, 0.1)")
        if not self.altitude > 0:
            raise ConfigError(f"altitude must be positive, got {self.altitude}")

    @property
    def air_mass_factor(self) -> float:
        return 1.0 / math.cos(self.solar_zenith) + 1.0 / math.cos(self.view_zenith)


def footprint_diameter(fov: float, altitude: float) -> float:
    """Ground diameter (km) seen at nadir by a full-angle `fov` from `altitude` km."""
    if fov < 0 or not altitude > 0:
        raise ConfigError("fov must be >= 0 and altitude > 0")
    return fov * altitude


# --------------------------------------------------------------------------
# line shape

_SQRT_PI = math.sqrt(math.pi)
_SQRT_LN2 = math.sqrt(math.log(2.0))
_ASYMPTOTIC_EDGE = 15.0
_RATIONAL_TERMS = 40


def _rational_coefficients(n: int):
    m = 2 * n
    k = np.arange(-m + 1, m)
    scale = math.sqrt(n / math.sqrt(2.0))
    t = scale * np.tan(k * math.pi / (2 * m))
    f = np.concatenate([[0.0], np.exp(-t * t) * (scale * scale + t * t)])
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / (2 * m)
    return scale, a[1 : n + 1][::-1].copy()


_RAT_L, _RAT_A = _rational_coefficients(_RATIONAL_TERMS)


def faddeeva(z) -> np.ndarray:
    """Complex probability function w(z) for Im z >= 0.

    Region switched: Humlicek's two-term continued-fraction asymptote where
    ``|x| + y >= 15`` and Weideman's 40-term rational series inside. Relative
    error of the real part stays below 1e-7 over the upper half plane.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    far = (np.abs(z.real) + z.imag) >= _ASYMPTOTIC_EDGE
    if far.any():
        t = -1j * z[far]
        u = t * t
        out[far] = t * (u + 2.5) / (_SQRT_PI * (0.75 + u * (3.0 + u)))
    near = ~far
    if near.any():
        zn = z[near]
        den = _RAT_L - 1j * zn
        zz = (_RAT_L + 1j * zn) / den
        p = np.zeros_like(zn)
        for c in _RAT_A:
            p = p * zz + c
        out[near] = 2.0 * p / (den * den) + 1.0 / (_SQRT_PI * den)
    return out


def voigt(delta_nu, gamma_l: float, gamma_g: float) -> np.ndarray:
    """Area-normalized Voigt profile in 1/cm-1.

    Parameters
    ----------
    delta_nu : array_like
        Offset from line center, cm-1.
    gamma_l, gamma_g : float
        Lorentz and Gaussian half widths at half maximum, cm-1.
    """
    if gamma_l < 0 or gamma_g < 0:
        raise ConfigError("Voigt widths must be non-negative")
    if gamma_l == 0 and gamma_g == 0:
        raise DegenerateProfile("both Voigt widths are zero")
    d = np.asarray(delta_nu, dtype=float)
    if gamma_g == 0:
        return gamma_l / (math.pi * (d * d + gamma_l * gamma_l))
    norm = _SQRT_LN2 / (_SQRT_PI * gamma_g)
    x = _SQRT_LN2 * d / gamma_g
    if gamma_l == 0:
        return norm * np.exp(-x * x)
    y = _SQRT_LN2 * gamma_l / gamma_g
    return norm * faddeeva(x + 1j * y).real


def doppler_hwhm(nu0, temperature: float, molar_mass: float):
    mass = molar_mass * 1e-3 / constants.N_A
    return np.asarray(nu0) * math.sqrt(
        2.0 * math.log(2.0) * constants.k * temperature / (mass * constants.c**2)
    )


# --------------------------------------------------------------------------
# optical depth, transmittance, radiance

def optical_depth(
    catalog: LineCatalog,
    column: AtmosphereColumn,
    species: GasSpecies,
    grid: SpectralGrid,
    *,
    wing_cutoff: float = WING_CUTOFF,
    require_lines: bool = True,
) -> Spectrum:
    """Vertical optical depth of one absorber on `grid`.

    Sums Voigt lines over layers; each layer uses its own pressure-broadened
    (and self-broadened) Lorentz width scaled by ``(296/T)**n_air``, a
    Doppler width at the layer temperature, and the pressure-shifted center.
    Line strengths stay at the 296 K reference.
    """
    species = GasSpecies.parse(species)
    lines = query_band(catalog, species, grid.nu_start - wing_cutoff, grid.nu_end + wing_cutoff)
    if not lines:
        if require_lines:
            raise MissingLines(
                f"no {species.name} lines within [{grid.nu_start}, {grid.nu_end}] cm-1"
            )
        return Spectrum(grid, np.zeros(grid.count), SpectrumKind.OPTICAL_DEPTH)
    arr = line_arrays(lines)
    nu = grid.nu
    tau = np.zeros(grid.count)
    for layer in column.layers:
        vmr = layer.vmr.get(species, 0.0)
        if vmr == 0.0:
            continue
        amount = vmr * layer.number_density * layer.thickness * 1e5
        p_self = vmr * layer.pressure
        t_scale = (REFERENCE_TEMPERATURE / layer.temperature) ** arr["n_air"]
        gamma_l = t_scale * (arr["gamma_air"] * (layer.pressure - p_self) + arr["gamma_self"] * p_self)
        gamma_g = doppler_hwhm(arr["nu0"], layer.temperature, species.molar_mass)
        centers = arr["nu0"] + arr["delta_air"] * layer.pressure
        for i in range(len(lines)):
            sl = grid.indices(centers[i] - wing_cutoff, centers[i] + wing_cutoff)
            if sl.start >= sl.stop:
                continue
            tau[sl] += (arr["intensity"][i] * amount) * voigt(
                nu[sl] - centers[i], gamma_l[i], gamma_g[i]
            )
    return Spectrum(grid, tau, SpectrumKind.OPTICAL_DEPTH)


def total_optical_depth(
    catalog: LineCatalog,
    column: AtmosphereColumn,
    grid: SpectralGrid,
    species: Sequence[GasSpecies] = tuple(GasSpecies),
    **kwargs,
) -> Spectrum:
    kwargs.setdefault("require_lines", False)
    total = np.zeros(grid.count)
    for sp in species:
        total += optical_depth(catalog, column, sp, grid, **kwargs).values
    return Spectrum(grid, total, SpectrumKind.OPTICAL_DEPTH)


def transmittance(optical_depth: Spectrum, geometry: ObservationGeometry) -> Spectrum:
    """Two-way (sun to surface to sensor) transmittance ``exp(-AMF * tau)``."""
    tau = optical_depth.values
    if tau.size and tau.min() < 0:
        raise ConfigError("optical depth must be non-negative")
    values = np.exp(-geometry.air_mass_factor * tau)
    return Spectrum(optical_depth.grid, values, SpectrumKind.TRANSMITTANCE)


def planck_radiance(nu, temperature: float) -> np.ndarray:
    """Blackbody spectral radiance in W m-2 sr-1 (cm-1)-1 at wavenumber `nu` (cm-1)."""
    nu_m = np.asarray(nu, dtype=float) * 100.0
    h, c, k = constants.h, constants.c, constants.k
    return 100.0 * 2.0 * h * c**2 * nu_m**3 / np.expm1(h * c * nu_m / (k * temperature))


def solar_irradiance(nu, temperature: float = SOLAR_TEMPERATURE) -> np.ndarray:
    """Top-of-atmosphere solar irradiance, W m-2 (cm-1)-1, for a blackbody Sun."""
    return SOLAR_SOLID_ANGLE * planck_radiance(nu, temperature)


def at_aperture_radiance(
    transmittance: Spectrum,
    geometry: ObservationGeometry,
    solar_temperature: float = SOLAR_TEMPERATURE,
) -> Spectrum:
    """Reflected-sunlight radiance reaching the sensor, W m-2 sr-1 (cm-1)-1."""
    if transmittance.kind is not SpectrumKind.TRANSMITTANCE:
        raise ConfigError(f"expected a transmittance spectrum, got {transmittance.kind.value}")
    e_sun = solar_irradiance(transmittance.nu, solar_temperature)
    values = e_sun * math.cos(geometry.solar_zenith) * geometry.surface_albedo / math.pi
    return Spectrum(transmittance.grid, values * transmittance.values, SpectrumKind.RADIANCE)
