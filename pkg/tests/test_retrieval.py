import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectrosat.errors import (
    BandOutOfRange,
    ConfigError,
    EmptyInput,
    MissingLines,
    MissingO2Band,
    SaturatedBandWarning,
    ZeroOxygenColumn,
)
from spectrosat.instrument import Interferogram, noiseless_samples
from spectrosat.linelist import GasSpecies
from spectrosat.pipeline import (
    Processing,
    evaluation_band,
    recover,
    simulate_scene,
    to_transmittance,
)
from spectrosat.radtran import (
    AtmosphereColumn,
    Layer,
    ObservationGeometry,
    SpectralGrid,
    Spectrum,
    SpectrumKind,
    optical_depth,
    transmittance,
)
from spectrosat.retrieval import (
    DEFAULT_BANDS,
    RetrievalBand,
    integral_column,
    measure_line_depth,
    process_timeseries,
    retrieve,
    volume_mixing_ratio,
)

CO2_BAND = RetrievalBand(GasSpecies.CO2, 6250.0)


def t_spectrum(nu, values):
    grid = SpectralGrid(float(nu[0]), float(nu[1] - nu[0]), nu.size)
    return Spectrum(grid, values, SpectrumKind.TRANSMITTANCE)


@pytest.fixture(scope="module")
def nu():
    return np.linspace(6200.0, 6300.0, 10_001)


def test_flat_spectrum(nu):
    d = measure_line_depth(t_spectrum(nu, np.ones(nu.size)), CO2_BAND)
    assert d.depth == 0.0 and d.integrated_absorbance == 0.0 and not d.saturated


def test_gaussian_dip_on_sloped_baseline(nu):
    base = 0.9 + 1e-3 * (nu - 6250.0)
    values = base * (1 - 0.30 * np.exp(-0.5 * ((nu - 6250.0) / 2.0) ** 2))
    d = measure_line_depth(t_spectrum(nu, values), CO2_BAND)
    assert abs(d.depth - 0.30) <= 0.01
    slope, offset = d.baseline
    assert slope == pytest.approx(1e-3, rel=1e-6) and offset == pytest.approx(0.9, rel=1e-6)
    # integral of -ln(1 - 0.3 g) over the window, by quadrature on a finer grid
    x = np.linspace(-15, 15, 300_001)
    expected = np.trapezoid(-np.log(1 - 0.30 * np.exp(-0.5 * (x / 2.0) ** 2)), x)
    assert d.integrated_absorbance == pytest.approx(expected, rel=1e-4)


def test_saturated_line(nu, catalog):
    values = 1 - np.exp(-0.5 * ((nu - 6250.0) / 1.0) ** 2)
    spec = t_spectrum(nu, values)
    d = measure_line_depth(spec, CO2_BAND)
    assert d.depth == 1.0 and d.saturated
    # the log is floored, so the absorbance stays finite
    assert math.isfinite(d.integrated_absorbance)
    with pytest.warns(SaturatedBandWarning):
        integral_column(d.integrated_absorbance, CO2_BAND, catalog, ObservationGeometry(), saturated=True)


def test_line_depth_out_of_grid(nu):
    with pytest.raises(BandOutOfRange):
        measure_line_depth(t_spectrum(nu, np.ones(nu.size)), RetrievalBand(GasSpecies.CO2, 6350.0))


def test_band_invariants():
    with pytest.raises(ConfigError):
        RetrievalBand(GasSpecies.CO2, 6250.0, window_halfwidth=0.0)
    with pytest.raises(ConfigError):
        RetrievalBand(GasSpecies.CO2, 6250.0, baseline_margin=-1.0)
    centers = sorted((b.species.name, b.nu_center) for b in DEFAULT_BANDS)
    assert centers == [("CH4", 6024.0), ("CO2", 6250.0), ("CO2", 6350.0), ("O2", 7880.0)]


def test_column_examples(catalog):
    nadir = ObservationGeometry(solar_zenith=0.0, view_zenith=0.0)
    assert nadir.air_mass_factor == 2.0
    double = ObservationGeometry(solar_zenith=math.acos(1 / 3), view_zenith=0.0)
    assert double.air_mass_factor == pytest.approx(4.0, rel=1e-14)
    assert integral_column(0.0, CO2_BAND, catalog, nadir) == 0.0
    a = integral_column(0.37, CO2_BAND, catalog, nadir)
    b = integral_column(0.37, CO2_BAND, catalog, double)
    assert b == pytest.approx(a / 2, rel=1e-14)
    strengths = sum(l.intensity for l in catalog.lines if l.molecule_id == 2 and 6235 <= l.nu0 <= 6265)
    assert a == pytest.approx(0.37 / (2.0 * strengths), rel=1e-12)


def test_column_missing_lines(catalog):
    with pytest.raises(MissingLines):
        integral_column(1.0, RetrievalBand(GasSpecies.CO2, 7000.0), catalog, ObservationGeometry())


def test_vmr_identities():
    assert volume_mixing_ratio(0.0, 1e24) == 0.0
    assert volume_mixing_ratio(3e23, 3e23) == pytest.approx(209_500.0, rel=1e-15)
    with pytest.raises(ZeroOxygenColumn):
        volume_mixing_ratio(1.0, 0.0)


def test_missing_o2_band(nu, catalog):
    with pytest.raises(MissingO2Band):
        retrieve(t_spectrum(nu, np.ones(nu.size)), [CO2_BAND], catalog, ObservationGeometry())
    r = retrieve(t_spectrum(nu, np.ones(nu.size)), [CO2_BAND], catalog, ObservationGeometry(), vmr=False)
    assert r.columns[GasSpecies.CO2] == 0.0 and r.vmr_ppm == {}


# --------------------------------------------------------------------------
# weak-line inversion against the line-by-line forward model


def single_layer_t(catalog, band, target_tau, geometry):
    sp = band.species
    grid = SpectralGrid.covering(*band.extent, 0.005)
    layer = Layer(1.0, 296.0, 1.0, {sp: 1e-3})
    tau = optical_depth(catalog, AtmosphereColumn((layer,)), sp, grid)
    slant_max = geometry.air_mass_factor * tau.band(*band.window)[1].max()
    # optical depth is exactly linear in layer thickness
    thickness = target_tau / slant_max
    layer = Layer(1.0, 296.0, thickness, {sp: 1e-3})
    tau = optical_depth(catalog, AtmosphereColumn((layer,)), sp, grid)
    return transmittance(tau, geometry), layer.gas_column(sp)


@pytest.mark.parametrize("band", DEFAULT_BANDS, ids=lambda b: b.label)
@pytest.mark.parametrize("target,limit", [(0.1, 0.02), (0.3, 0.05)])
def test_single_layer_line_by_line(catalog, band, target, limit):
    geom = ObservationGeometry()
    t, truth = single_layer_t(catalog, band, target, geom)
    r = retrieve(t, [band], catalog, geom, vmr=False)
    assert abs(r.columns[band.species] / truth - 1) <= limit


@pytest.fixture(scope="module")
def instrument_chain(catalog, cfg, scene, reference):
    inst, ch = cfg.instrument, cfg.channel
    band = evaluation_band(inst, ch)

    def run(scaled_scene, processing=Processing()):
        samples = noiseless_samples(scaled_scene.radiance, inst, ch)
        frame = Interferogram(samples, inst.opd_step_cm, inst.lambda_ref, ch)
        t = to_transmittance(recover(frame, processing), reference, band)
        return retrieve(t, DEFAULT_BANDS, catalog, cfg.geometry)

    return run


@pytest.mark.parametrize("target,limit", [(0.05, 0.02), (0.1, 0.02), (0.2, 0.05), (0.3, 0.05)])
def test_weak_line_bias_through_instrument(instrument_chain, scene, cfg, target, limit):
    # max slant optical depth in each band's window is set to `target`
    amf = cfg.geometry.air_mass_factor
    factors = {}
    for sp in GasSpecies:
        peak = max(amf * scene.optical_depths[sp].band(*b.window)[1].max() for b in DEFAULT_BANDS if b.species is sp)
        factors[sp] = target / peak
    r = instrument_chain(scene.scaled(factors))
    for sp in GasSpecies:
        truth = factors[sp] * cfg.atmosphere.gas_column(sp)
        assert abs(r.columns[sp] / truth - 1) <= limit, sp


def test_end_to_end_420_ppm(instrument_chain, scene):
    r = instrument_chain(scene)
    assert abs(r.vmr_ppm[GasSpecies.CO2] / 420.0 - 1) < 0.05
    assert abs(r.vmr_ppm[GasSpecies.CH4] / 1.9 - 1) < 0.05


def test_default_retrieval_smoke(instrument_chain, scene):
    r = instrument_chain(scene)
    assert r.clean, r.flags
    assert len(r.bands) == 4
    assert all(math.isfinite(b.integral_column) and b.integral_column > 0 for b in r.bands)
    assert all(0 <= b.line_depth <= 1 for b in r.bands)
    assert all(math.isfinite(v) and v >= 0 for v in r.vmr_ppm.values())


@pytest.fixture(scope="module")
def raw_recovered(clean_samples, make_frame):
    return recover(make_frame(clean_samples))


@given(st.floats(1e-3, 1e3))
@settings(max_examples=25)
def test_scale_invariance(raw_recovered, catalog, cfg, c):
    base = retrieve(raw_recovered, DEFAULT_BANDS, catalog, cfg.geometry)
    scaled = retrieve(raw_recovered.scaled(c), DEFAULT_BANDS, catalog, cfg.geometry)
    for sp, v in base.vmr_ppm.items():
        assert abs(scaled.vmr_ppm[sp] / v - 1) < 1e-3


def test_half_scaling_example(raw_recovered, catalog, cfg):
    base = retrieve(raw_recovered, DEFAULT_BANDS, catalog, cfg.geometry)
    half = retrieve(raw_recovered.scaled(0.5), DEFAULT_BANDS, catalog, cfg.geometry)
    assert all(abs(half.vmr_ppm[sp] / v - 1) < 1e-3 for sp, v in base.vmr_ppm.items())


def test_detector_unit_invariance(clean_samples, make_frame, catalog, cfg):
    # responsivity rescales the interferogram; vmr must not move
    p = Processing(reference="none")
    a = retrieve(recover(make_frame(clean_samples), p), DEFAULT_BANDS, catalog, cfg.geometry)
    b = retrieve(recover(make_frame(clean_samples * 7.3e5), p), DEFAULT_BANDS, catalog, cfg.geometry)
    for sp, v in a.vmr_ppm.items():
        assert abs(b.vmr_ppm[sp] / v - 1) < 1e-3


def test_monotone_in_true_co2(catalog, cfg, reference):
    inst, ch = cfg.instrument, cfg.channel
    band = evaluation_band(inst, ch)
    columns = []
    for ppm in (300.0, 380.0, 420.0, 500.0):
        atm = cfg.atmosphere.with_vmr(GasSpecies.CO2, ppm * 1e-6)
        sc = simulate_scene(catalog, atm, cfg.geometry, inst, ch, species=(GasSpecies.CO2, GasSpecies.O2))
        frame = Interferogram(noiseless_samples(sc.radiance, inst, ch), inst.opd_step_cm, inst.lambda_ref, ch)
        t = to_transmittance(recover(frame), reference, band)
        columns.append(retrieve(t, DEFAULT_BANDS[:3], catalog, cfg.geometry).columns[GasSpecies.CO2])
    assert all(b > a for a, b in zip(columns, columns[1:]))


# --------------------------------------------------------------------------
# time series


def test_timeseries_constant_scene(clean_samples, make_frame, catalog, cfg, reference):
    frames = [make_frame(clean_samples)] * 5
    band = evaluation_band(cfg.instrument, cfg.channel)
    out = process_timeseries(frames, cfg.instrument, DEFAULT_BANDS, catalog, cfg.geometry,
                             reference=reference, evaluation_band=band)
    assert [e.frame_index for e in out] == list(range(5))
    assert [e.time_s for e in out] == [0.0, 4.0, 8.0, 12.0, 16.0]
    series = np.array([e.result.vmr_ppm[GasSpecies.CO2] for e in out])
    assert np.std(series) < 1e-9


def test_timeseries_noiseless_ramp(scene, catalog, cfg, reference):
    inst, ch = cfg.instrument, cfg.channel
    targets = np.linspace(400.0, 450.0, 5)
    frames = []
    for ppm in targets:
        sc = scene.scaled({GasSpecies.CO2: ppm / 420.0})
        frames.append(Interferogram(noiseless_samples(sc.radiance, inst, ch), inst.opd_step_cm, inst.lambda_ref, ch))
    out = process_timeseries(frames, inst, DEFAULT_BANDS, catalog, cfg.geometry,
                             reference=reference, evaluation_band=evaluation_band(inst, ch))
    got = np.array([e.result.vmr_ppm[GasSpecies.CO2] for e in out])
    assert np.all(np.abs(got / targets - 1) < 0.05)
    assert np.all(np.diff(got) > 0)


def test_timeseries_errors_and_failures(clean_samples, make_frame, catalog, cfg):
    with pytest.raises(EmptyInput):
        process_timeseries([], cfg.instrument, DEFAULT_BANDS, catalog, cfg.geometry)
    frames = [make_frame(clean_samples), make_frame(np.zeros(clean_samples.size)), make_frame(clean_samples)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = process_timeseries(frames, cfg.instrument, DEFAULT_BANDS, catalog, cfg.geometry)
    assert [e.result is None for e in out] == [False, True, False]
    assert out[1].error


def test_timeseries_blocks_and_workers(clean_samples, make_frame, catalog, cfg):
    sigma = cfg.instrument.noise_sigma(cfg.channel)
    rng = np.random.default_rng(5)
    frames = [make_frame(clean_samples + sigma * rng.standard_normal(clean_samples.size)) for _ in range(6)]
    seq = process_timeseries(frames, cfg.instrument, DEFAULT_BANDS, catalog, cfg.geometry, block=3)
    par = process_timeseries(frames, cfg.instrument, DEFAULT_BANDS, catalog, cfg.geometry, block=3, workers=2)
    assert [e.frame_index for e in seq] == [0, 3]
    assert [e.time_s for e in seq] == [0.0, 12.0]
    assert [e.result.to_dict() for e in seq] == [e.result.to_dict() for e in par]
    with pytest.raises(ConfigError):
        process_timeseries(frames, cfg.instrument, DEFAULT_BANDS, catalog, cfg.geometry, block=0)
