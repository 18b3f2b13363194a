"""A CO2 ramp tracked frame by frame.

Sixty scans whose CO2 rises linearly from 400 to 450 ppm, each with its own
detector noise, processed as a time series. Single scans scatter by several
percent; the linear trend comes through.

    python demos/co2_ramp.py
"""
import numpy as np

from spectrosat.config import default_config
from spectrosat.instrument import Interferogram, detector_noise, frame_seed, noiseless_samples
from spectrosat.linelist import GasSpecies, fixture_catalog
from spectrosat.pipeline import modeled_reference, ramp_factors, simulate_scene
from spectrosat.retrieval import process_timeseries

FRAMES = 60

cfg = default_config()
inst, ch = cfg.instrument, cfg.channel
catalog = fixture_catalog()
scene = simulate_scene(catalog, cfg.atmosphere, cfg.geometry, inst, ch, cfg.oversample)
sigma = inst.noise_sigma(ch)

targets = ramp_factors(400.0, 450.0, FRAMES)
frames = []
for i, ppm in enumerate(targets):
    # optical depth scales with the absorber amount
    clean = noiseless_samples(scene.scaled({GasSpecies.CO2: ppm / 420.0}).radiance, inst, ch)
    seed = frame_seed(11, i)
    frames.append(Interferogram(clean + detector_noise(seed, clean.size, sigma),
                                inst.opd_step_cm, inst.lambda_ref, ch, seed))

reference = modeled_reference(inst, ch, cfg.geometry, cfg.processing, cfg.oversample)
entries = process_timeseries(frames, inst, cfg.bands, catalog, cfg.geometry,
                             reference=reference, evaluation_band=cfg.evaluation_band)
co2 = np.array([e.result.vmr_ppm[GasSpecies.CO2] for e in entries])

for e, truth, got in list(zip(entries, targets, co2))[::10]:
    print(f"t = {e.time_s:6.1f} s  truth {truth:6.1f}  retrieved {got:6.1f} ppm")
slope, intercept = np.polyfit(np.arange(FRAMES), co2, 1)
print(f"fitted ramp {intercept:.1f} -> {intercept + slope * (FRAMES - 1):.1f} ppm; "
      f"scatter {np.std(co2 - (intercept + slope * np.arange(FRAMES))):.1f} ppm per scan")
