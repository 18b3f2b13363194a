import numpy as np
import pytest
from hypothesis import settings

from spectrosat.config import default_config
from spectrosat.instrument import Interferogram, noiseless_samples
from spectrosat.linelist import fixture_catalog
from spectrosat.pipeline import Processing, modeled_reference, simulate_scene

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def catalog():
    return fixture_catalog()


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def scene(catalog, cfg):
    return simulate_scene(catalog, cfg.atmosphere, cfg.geometry, cfg.instrument, cfg.channel)


@pytest.fixture(scope="session")
def clean_samples(scene, cfg):
    return noiseless_samples(scene.radiance, cfg.instrument, cfg.channel)


@pytest.fixture(scope="session")
def make_frame(cfg):
    def build(samples, seed=None):
        inst = cfg.instrument
        return Interferogram(np.asarray(samples), inst.opd_step_cm, inst.lambda_ref, cfg.channel, seed)
    return build


@pytest.fixture(scope="session")
def reference(cfg):
    return modeled_reference(cfg.instrument, cfg.channel, cfg.geometry, Processing())


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one acceptance line: ``acceptance(n, title, passed, detail)``."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, title, passed, detail):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
