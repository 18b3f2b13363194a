"""Interferogram to spectrum: averaging, apodization, FFT, phase correction, SNR."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft

from .errors import (
    BandOutOfRange,
    DegenerateBand,
    DegenerateNoise,
    EmptyInput,
    GridMismatch,
    IncompatibleFrames,
    ZeroReference,
)
from .instrument import Interferogram
from .radtran import TRANSMITTANCE_CEILING, SpectralGrid, Spectrum, SpectrumKind

log = logging.getLogger(__name__)

PHASE_POINTS = 256
SNR_SIGNAL_BAND = (6100.0, 6200.0)
SNR_NOISE_BAND = (6600.0, 6700.0)
MIN_BAND_POINTS = 8


class ApodizationKind(enum.Enum):
    BOXCAR = "boxcar"
    HANN = "hann"
    NORTON_BEER_MEDIUM = "norton_beer_medium"

    @classmethod
    def parse(cls, value) -> "ApodizationKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"nortonbeermedium": "norton_beer_medium", "nb_medium": "norton_beer_medium"}
        return cls(aliases.get(key, key))


# Norton-Beer "medium" polynomial in (1 - u**2), u = OPD / max OPD
_NB_MEDIUM = (0.152442, -0.136176, 0.983734)


def apodization_window(kind: ApodizationKind, n: int) -> np.ndarray:
    """One-sided window over ``n`` samples; 1 at zero path difference."""
    kind = ApodizationKind.parse(kind)
    u = np.arange(n) / n
    if kind is ApodizationKind.BOXCAR:
        return np.ones(n)
    if kind is ApodizationKind.HANN:
        return 0.5 * (1.0 + np.cos(np.pi * u))
    q = 1.0 - u * u
    return _NB_MEDIUM[0] + q * (_NB_MEDIUM[1] + q * _NB_MEDIUM[2])


def average_interferograms(frames: Sequence[Interferogram]) -> Interferogram:
    """Pointwise mean of compatible frames; the result carries no seed."""
    frames = list(frames)
    if not frames:
        raise EmptyInput("no interferograms to average")
    first = frames[0]
    for f in frames[1:]:
        if (
            f.n_samples != first.n_samples
            or f.channel != first.channel
            or not np.isclose(f.opd_step, first.opd_step, rtol=1e-12, atol=0)
        ):
            raise IncompatibleFrames(
                f"frame ({f.channel}, n={f.n_samples}, dx={f.opd_step}) does not match "
                f"({first.channel}, n={first.n_samples}, dx={first.opd_step})"
            )
    # running mean: exact when all frames are identical
    mean = first.samples.copy()
    for i, f in enumerate(frames[1:], start=2):
        mean += (f.samples - mean) / i
    return Interferogram(mean, first.opd_step, first.lambda_ref, first.channel, None)


def _mertz_phase(samples: np.ndarray, n_fft: int, points: int) -> np.ndarray:
    """Low-resolution phase from a mirrored double-sided segment around ZPD."""
    m = min(points, samples.size)
    tri = 1.0 - np.arange(m) / m
    seg = np.zeros(n_fft)
    seg[:m] = samples[:m] * tri
    seg[n_fft - m + 1 :] = (samples[1:m] * tri[1:])[::-1]
    return np.angle(scipy.fft.rfft(seg))


def interferogram_to_spectrum(
    frame: Interferogram,
    apodization: ApodizationKind = ApodizationKind.NORTON_BEER_MEDIUM,
    phase_correction: bool = True,
    zero_fill: int = 2,
    phase_points: int = PHASE_POINTS,
) -> Spectrum:
    """Recover the single-sided spectrum of one interferogram.

    The DC level is removed and the window applied before a real FFT of
    length ``zero_fill * n_samples``. With phase correction the ZPD sample is
    half-weighted, the Mertz estimate from the first `phase_points` samples
    rotates each bin and the real part is returned; otherwise the magnitude
    of the plain DFT is returned. Values are raw (unnormalized) DFT units on
    a grid starting at 0 cm-1.
    """
    if zero_fill < 1 or int(zero_fill) != zero_fill:
        raise ValueError("zero_fill must be a positive integer")
    n = frame.n_samples
    n_fft = int(zero_fill) * n
    centered = frame.samples - frame.samples.mean()
    weighted = centered * apodization_window(apodization, n)
    if phase_correction:
        # single-sided cosine transform: the ZPD sample counts once, not twice
        weighted[0] *= 0.5
        spec = scipy.fft.rfft(weighted, n=n_fft)
        phase = _mertz_phase(centered, n_fft, phase_points)
        values = np.real(spec * np.exp(-1j * phase))
    else:
        spec = scipy.fft.rfft(weighted, n=n_fft)
        values = np.abs(spec)
    grid = SpectralGrid(0.0, 1.0 / (n_fft * frame.opd_step), spec.size)
    return Spectrum(grid, values, SpectrumKind.RECOVERED)


def parseval_residual(frame: Interferogram) -> float:
    """Relative mismatch between interferogram energy and Boxcar spectrum energy."""
    centered = frame.samples - frame.samples.mean()
    n = centered.size
    mag = interferogram_to_spectrum(frame, ApodizationKind.BOXCAR, False, zero_fill=1).values
    weights = np.full(mag.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    energy_f = np.sum(weights * mag**2) / n
    energy_t = np.sum(centered**2)
    return abs(energy_f - energy_t) / energy_t


@dataclass(frozen=True)
class RatioResult:
    transmittance: Spectrum
    clipped: int


def transmittance_ratio(
    sample: Spectrum,
    reference: Spectrum,
    band: tuple[float, float] | None = None,
) -> RatioResult:
    """Pointwise ``sample / reference`` over `band`, clipped to [0, 1.05].

    The returned spectrum lives on the sub-grid covering `band` (the whole
    grid when `band` is None). ``clipped`` counts the points that were clipped.
    """
    if not sample.grid.matches(reference.grid):
        raise GridMismatch("sample and reference spectra are on different grids")
    sl = slice(None) if band is None else sample.grid.indices(*band)
    if band is not None and not sample.grid.contains(*band):
        raise BandOutOfRange(f"band {band} outside the spectral grid")
    ref = reference.values[sl]
    if ref.size == 0 or np.any(ref <= 0):
        raise ZeroReference("reference spectrum is not positive over the evaluation band")
    ratio = sample.values[sl] / ref
    clipped = int(np.count_nonzero((ratio < 0) | (ratio > TRANSMITTANCE_CEILING)))
    if clipped:
        log.info("transmittance ratio: %d points clipped", clipped)
    start = sl.start or 0
    grid = SpectralGrid(
        sample.grid.nu_start + start * sample.grid.nu_step, sample.grid.nu_step, ratio.size
    )
    values = np.clip(ratio, 0.0, TRANSMITTANCE_CEILING)
    return RatioResult(Spectrum(grid, values, SpectrumKind.TRANSMITTANCE), clipped)


@dataclass(frozen=True)
class SnrReport:
    signal_level: float
    noise_sigma: float
    snr: float
    signal_band: tuple[float, float]
    noise_band: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "signal_level": self.signal_level,
            "noise_sigma": self.noise_sigma,
            "snr": self.snr,
            "signal_band": list(self.signal_band),
            "noise_band": list(self.noise_band),
        }


def _band_values(spectrum: Spectrum, band) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = band
    if not lo < hi or not spectrum.grid.contains(lo, hi):
        raise BandOutOfRange(
            f"band [{lo}, {hi}] outside grid [{spectrum.grid.nu_start}, {spectrum.grid.nu_end}]"
        )
    nu, values = spectrum.band(lo, hi)
    if nu.size < MIN_BAND_POINTS:
        raise DegenerateBand(f"band [{lo}, {hi}] holds only {nu.size} grid points")
    return nu, values


def estimate_snr(
    spectrum: Spectrum,
    signal_band: tuple[float, float] = SNR_SIGNAL_BAND,
    noise_band: tuple[float, float] = SNR_NOISE_BAND,
) -> SnrReport:
    """Mean over `signal_band` divided by the detrended scatter over `noise_band`."""
    _, sig = _band_values(spectrum, signal_band)
    nu, noise = _band_values(spectrum, noise_band)
    x = nu - nu.mean()
    residual = noise - np.polyval(np.polyfit(x, noise, 1), x)
    sigma = float(np.std(residual, ddof=2))
    scale = float(np.max(np.abs(noise))) if noise.size else 0.0
    if sigma <= 1e-12 * scale or sigma == 0.0:
        raise DegenerateNoise("noise band shows no scatter; SNR undefined")
    level = float(np.mean(sig))
    return SnrReport(level, sigma, level / sigma, tuple(signal_band), tuple(noise_band))
