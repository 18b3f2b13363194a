"""Michelson interferometer and detector forward model.

Interferogram samples are taken on a uniform optical-path-difference grid
derived from the reference laser: one sample every quarter wavelength. The
mechanical mirror stroke is carried as metadata only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.signal import ZoomFFT

from .errors import BandMismatch, ConfigError, MissingNoiseSpec, NyquistViolation
from .radtran import SpectralGrid, Spectrum, SpectrumKind

HENE_WAVELENGTH_NM = 632.8


@dataclass(frozen=True)
class DetectorSpec:
    """Photodetector plus the bandpass filter in front of it.

    ``name`` identifies the channel. ``filter_edge`` is the width (cm-1) of
    the raised-cosine roll-off just inside each band edge.
    """

    name: str
    band_lo: float  # um
    band_hi: float  # um
    active_side: float = 1.0  # mm
    d_star: Optional[float] = None  # cm sqrt(Hz) / W
    nep: Optional[float] = None  # W / sqrt(Hz)
    material: str = "InGaAs"
    filter_edge: float = 20.0  # cm-1

    def __post_init__(self):
        if not 0 < self.band_lo < self.band_hi:
            raise ConfigError(f"channel {self.name}: band_lo must be below band_hi")
        if not self.active_side > 0:
            raise ConfigError(f"channel {self.name}: active_side must be positive")
        if self.d_star is not None and not self.d_star > 0:
            raise ConfigError(f"channel {self.name}: d_star must be positive")
        if self.nep is not None and not self.nep > 0:
            raise ConfigError(f"channel {self.name}: nep must be positive")
        if self.filter_edge < 0:
            raise ConfigError(f"channel {self.name}: filter_edge must be >= 0")

    @property
    def band_wavenumbers(self) -> tuple[float, float]:
        """Filter band as (low, high) wavenumbers in cm-1."""
        return 1e4 / self.band_hi, 1e4 / self.band_lo

    def bandpass(self, nu) -> np.ndarray:
        lo, hi = self.band_wavenumbers
        nu = np.asarray(nu, dtype=float)
        t = ((nu >= lo) & (nu <= hi)).astype(float)
        w = self.filter_edge
        if w > 0:
            for edge, sign in ((lo, 1.0), (hi, -1.0)):
                ramp = (sign * (nu - edge) >= 0) & (sign * (nu - edge) < w)
                t[ramp] = 0.5 * (1.0 - np.cos(math.pi * sign * (nu[ramp] - edge) / w))
        return t


# detectors as characterized for the flight unit
INGAAS_2UM = DetectorSpec("InGaAs-2um", 2.0, 2.2, 1.0, d_star=2.0e12, material="InGaAs")
SI_O2 = DetectorSpec("Si", 0.75, 0.80, 1.0, nep=6.2e-15, material="Si")
# InGaAs channel opened to 1.25-1.72 um to cover the CH4, CO2 and 1.27 um O2 features
INGAAS_SWIR = DetectorSpec("InGaAs", 1.25, 1.72, 1.0, d_star=2.0e12, material="InGaAs")


def nep_of(detector: DetectorSpec) -> float:
    """Noise-equivalent power in W/sqrt(Hz): the NEP if given, else sqrt(A)/D*."""
    if detector.nep is not None:
        return detector.nep
    if detector.d_star is None:
        raise MissingNoiseSpec(f"detector {detector.name} has neither nep nor d_star")
    side_cm = detector.active_side / 10.0
    return side_cm / detector.d_star


@dataclass(frozen=True)
class InstrumentConfig:
    aperture_diameter: float = 100.0  # mm
    fov: float = 0.01  # rad, full angle
    input_magnification: float = 4.0
    lambda_ref: float = HENE_WAVELENGTH_NM  # nm
    opd_step: Optional[float] = None  # nm; None means lambda_ref / 4
    n_samples: int = 32_000
    scan_period: float = 4.0  # s
    channels: tuple[DetectorSpec, ...] = (INGAAS_SWIR, SI_O2)
    optical_efficiency: float = 0.5
    stroke: float = 4.0  # mm, mechanical; not used by the OPD model

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.opd_step is None:
            object.__setattr__(self, "opd_step", self.lambda_ref / 4.0)
        if not self.opd_step > 0:
            raise ConfigError("opd_step must be positive")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise ConfigError("n_samples must be an integer >= 2")
        object.__setattr__(self, "n_samples", int(self.n_samples))
        if not 0 < self.optical_efficiency <= 1:
            raise ConfigError("optical_efficiency must be in (0, 1]")
        for name in ("aperture_diameter", "fov", "input_magnification", "scan_period", "lambda_ref"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate channel names: {names}")
        for ch in self.channels:
            check_nyquist(self, ch)

    @property
    def opd_step_cm(self) -> float:
        return self.opd_step * 1e-7

    @property
    def max_opd_cm(self) -> float:
        return self.opd_step_cm * self.n_samples

    @property
    def nyquist(self) -> float:
        """Highest unaliased wavenumber, cm-1."""
        return 1.0 / (2.0 * self.opd_step_cm)

    @property
    def native_step(self) -> float:
        """Spectral bin width of the untruncated transform, cm-1."""
        return 1.0 / self.max_opd_cm

    @property
    def etendue(self) -> float:
        """Aperture area times field solid angle, m2 sr."""
        area = math.pi * (self.aperture_diameter * 1e-3 / 2.0) ** 2
        omega = 2.0 * math.pi * (1.0 - math.cos(self.fov / 2.0))
        return area * omega

    @property
    def throughput(self) -> float:
        # magnification enters only as a 1/m**2 bookkeeping factor
        return self.optical_efficiency / self.input_magnification**2

    @property
    def electrical_bandwidth(self) -> float:
        return self.n_samples / (2.0 * self.scan_period)

    def channel(self, name: str) -> DetectorSpec:
        for ch in self.channels:
            if ch.name == name:
                return ch
        raise ConfigError(f"no channel named {name!r}; have {[c.name for c in self.channels]}")

    def noise_sigma(self, channel: str) -> float:
        """Per-sample noise standard deviation, W."""
        return nep_of(self.channel(channel)) * math.sqrt(self.electrical_bandwidth)


def check_nyquist(config: InstrumentConfig, detector: DetectorSpec) -> None:
    nu_hi = detector.band_wavenumbers[1]
    if nu_hi >= config.nyquist:
        raise NyquistViolation(
            f"channel {detector.name}: band edge {nu_hi:.1f} cm-1 exceeds Nyquist "
            f"{config.nyquist:.1f} cm-1"
        )


def spectral_resolution(config: InstrumentConfig) -> float:
    """Unapodized resolution ``1 / (n_samples * opd_step)`` in cm-1."""
    return 1.0 / (config.n_samples * config.opd_step_cm)


def instrument_grid(config: InstrumentConfig, channel: str, oversample: int = 200) -> SpectralGrid:
    """Fine grid over a channel band with step ``native_step / oversample``."""
    lo, hi = config.channel(channel).band_wavenumbers
    return SpectralGrid.covering(lo, hi, config.native_step / oversample)


@dataclass(frozen=True, eq=False)
class Interferogram:
    samples: np.ndarray  # W at the detector, responsivity 1
    opd_step: float  # cm
    lambda_ref: float  # nm
    channel: str
    seed: Optional[int] = None

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise ConfigError("interferogram needs a 1-D array of at least 2 samples")
        if not np.all(np.isfinite(s)):
            raise ConfigError("interferogram contains non-finite samples")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def opd(self) -> np.ndarray:
        return self.opd_step * np.arange(self.n_samples)


@lru_cache(maxsize=8)
def _zoom(n_in: int, f_hi: float, m: int) -> ZoomFFT:
    return ZoomFFT(n_in, [0.0, f_hi], m=m, fs=1.0, endpoint=False)


def _cosine_sum(power: np.ndarray, nu_start: float, nu_step: float, dx: float, n: int) -> np.ndarray:
    """``sum_j power[j] * cos(2 pi nu_j x_k)`` for x_k = k dx, k < n."""
    f_hi = n * nu_step * dx
    k = np.arange(n)
    if f_hi < 1.0:
        spec = _zoom(power.size, f_hi, n)(power)
        # zoom transform uses exp(-2 pi i f j); cosine is even so the sign is immaterial
        return np.real(np.exp(-2j * np.pi * nu_start * dx * k) * spec)
    out = np.empty(n)
    nu = nu_start + nu_step * np.arange(power.size)
    for a in range(0, n, 256):
        x = dx * k[a : a + 256]
        out[a : a + 256] = np.cos(2 * np.pi * np.outer(x, nu)) @ power
    return out


def optical_power_density(radiance: Spectrum, config: InstrumentConfig, channel: str) -> np.ndarray:
    """In-band optical power per cm-1 reaching the detector, W/(cm-1)."""
    det = config.channel(channel)
    return radiance.values * config.etendue * config.throughput * det.bandpass(radiance.nu)


def frame_seed(base_seed: int, index: int) -> int:
    """Independent per-frame seed derived from a base seed and frame index."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def detector_noise(seed: int, n: int, sigma: float) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(int(seed)))
    return sigma * rng.standard_normal(n)


def noiseless_samples(radiance: Spectrum, config: InstrumentConfig, channel: str) -> np.ndarray:
    det = config.channel(channel)
    check_nyquist(config, det)
    lo, hi = det.band_wavenumbers
    if not radiance.grid.contains(lo, hi):
        raise BandMismatch(
            f"radiance grid [{radiance.grid.nu_start:.2f}, {radiance.grid.nu_end:.2f}] cm-1 "
            f"does not cover channel {det.name} [{lo:.2f}, {hi:.2f}] cm-1"
        )
    sl = radiance.grid.indices(lo, hi)
    power = optical_power_density(radiance, config, channel)[sl] * radiance.grid.nu_step
    nu_start = radiance.grid.nu_start + sl.start * radiance.grid.nu_step
    modulated = _cosine_sum(power, nu_start, radiance.grid.nu_step, config.opd_step_cm, config.n_samples)
    return 0.5 * (power.sum() + modulated)


def synthesize_interferogram(
    radiance: Spectrum,
    config: InstrumentConfig,
    channel: str,
    noise_seed: Optional[int] = None,
) -> Interferogram:
    """Sampled detector signal for one scan.

    ``samples[k] = 1/2 * integral P(nu) (1 + cos(2 pi nu x_k)) dnu + n_k`` with
    P the in-band power density and n_k white Gaussian noise of standard
    deviation ``NEP * sqrt(n_samples / (2 * scan_period))``. Noise is only
    added when `noise_seed` is given.
    """
    samples = noiseless_samples(radiance, config, channel)
    if noise_seed is not None:
        samples = samples + detector_noise(noise_seed, config.n_samples, config.noise_sigma(channel))
    return Interferogram(samples, config.opd_step_cm, config.lambda_ref, channel, noise_seed)


def scan_sequence(
    radiance: Spectrum,
    config: InstrumentConfig,
    channel: str,
    count: int,
    base_seed: Optional[int],
) -> list[Interferogram]:
    """`count` scans of one scene; frame i uses ``frame_seed(base_seed, i)``.

    With ``base_seed=None`` every frame is noiseless.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    clean = noiseless_samples(radiance, config, channel)
    sigma = config.noise_sigma(channel)
    frames = []
    for i in range(count):
        seed = None if base_seed is None else frame_seed(base_seed, i)
        samples = clean if seed is None else clean + detector_noise(seed, config.n_samples, sigma)
        frames.append(Interferogram(samples, config.opd_step_cm, config.lambda_ref, channel, seed))
    return frames
