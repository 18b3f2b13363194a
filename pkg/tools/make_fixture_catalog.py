"""Regenerate ``src/spectrosat/data/fixture_lines.par``.

The bundled catalog is synthetic. Each absorption feature is a compact line
manifold whose strongest member sits on the feature position; manifolds are
confined to +/-12 cm-1 so the retrieval windows (+/-15 cm-1) and their
baseline strips stay clean, and nothing is placed in the SNR signal
(6100-6200 cm-1) or noise (6600-6700 cm-1) bands.

Run from the repository root::

    python tools/make_fixture_catalog.py
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from spectrosat.linelist import SpectralLine, write_catalog

OUT = Path(__file__).resolve().parents[1] / "src" / "spectrosat" / "data" / "fixture_lines.par"

# peak line intensities, cm-1/(molecule cm-2); chosen so the default
# atmosphere gives a peak vertical optical depth near 0.08 per feature
S_CO2 = 8.0e-25
S_CH4 = 1.8e-22
S_O2 = 1.6e-27


def branch(mol, center, spacing, n_side, s_peak, envelope, b_rot, *,
           gamma_air, gamma_self, n_air, delta_air, iso=1, offset=0.0, einstein_a=1e-2):
    """Evenly spaced rotational-like manifold with a Gaussian intensity envelope."""
    out = []
    for m in range(-n_side, n_side + 1):
        j = 2 * abs(m)
        out.append(SpectralLine(
            molecule_id=mol, isotopologue=iso,
            nu0=round(center + offset + m * spacing, 6),
            intensity=float(f"{s_peak * math.exp(-(m / envelope) ** 2):.3e}"),
            gamma_air=gamma_air, gamma_self=gamma_self,
            elower=round(b_rot * j * (j + 1), 4),
            n_air=n_air, delta_air=delta_air, einstein_a=einstein_a,
        ))
    return out


def methane_manifold(center, s_peak, rng):
    comps = [(0.0, 1.0), (-0.34, 0.42), (-0.17, 0.63), (0.13, 0.55), (0.29, 0.36), (0.44, 0.18)]
    out = []
    for shift, scale in ((0.0, 1.0), (-5.2, 0.45), (5.3, 0.40), (-10.4, 0.15), (10.5, 0.12)):
        for off, frac in comps:
            jitter = 0.0 if (shift == 0.0 and off == 0.0) else rng.uniform(-0.02, 0.02)
            out.append(SpectralLine(
                molecule_id=6, isotopologue=1,
                nu0=round(center + shift + off + jitter, 6),
                intensity=float(f"{s_peak * scale * frac:.3e}"),
                gamma_air=0.0600, gamma_self=0.078,
                elower=round(104.78 + 52.4 * abs(shift), 4),
                n_air=0.65, delta_air=-0.0090, einstein_a=2e-1,
            ))
    return out


def build():
    rng = np.random.default_rng(20230601)
    co2 = dict(gamma_air=0.0720, gamma_self=0.095, n_air=0.73, delta_air=-0.0065)
    o2 = dict(gamma_air=0.0450, gamma_self=0.045, n_air=0.72, delta_air=-0.0060)
    lines = []
    for center in (6250.0, 6350.0):
        lines += branch(2, center, 1.56, 7, S_CO2, 4.0, 0.3902, **co2)
        # 13CO2 and a hot band, interleaved
        lines += branch(2, center, 1.50, 5, S_CO2 * 0.012, 3.0, 0.3902, iso=2, offset=0.71, **co2)
        lines += branch(2, center, 1.56, 5, S_CO2 * 0.05, 3.0, 0.3902, offset=0.48, **co2)
    lines += methane_manifold(6024.0, S_CH4, rng)
    lines += branch(7, 7880.0, 1.82, 6, S_O2, 3.5, 1.4377, **o2)
    lines += branch(7, 7880.0, 1.82, 5, S_O2 * 0.35, 3.0, 1.4377, offset=0.61, **o2)
    # bands of the two filter channels listed for the flight unit
    lines += branch(7, 13122.0, 1.86, 7, S_O2 * 40, 4.0, 1.4377, **o2)
    lines += branch(2, 4855.0, 1.56, 7, S_CO2 * 2.5, 4.0, 0.3902, **co2)
    return lines


if __name__ == "__main__":
    lines = build()
    write_catalog(sorted(lines, key=lambda ln: ln.nu0), OUT)
    print(f"wrote {len(lines)} lines to {OUT}")
