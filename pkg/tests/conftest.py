import pytest

from anharmonic.classical import OscillatorModel


@pytest.fixture(scope="session")
def m1():
    return OscillatorModel(1)


@pytest.fixture(scope="session")
def m2():
    return OscillatorModel(2)


@pytest.fixture(scope="session")
def spectrum_cache(tmp_path_factory):
    from anharmonic.quantum import SpectrumCache
    return SpectrumCache(tmp_path_factory.mktemp("spectra"))
