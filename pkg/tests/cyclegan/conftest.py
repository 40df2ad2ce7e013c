import pytest

from mictrans.dsp import StftConfig
from mictrans.eval.corpus import synthetic_rest_corpus
from mictrans.micsim import generate_domains, get_profile

DESK = StftConfig(window_ms=8, hop_ms=8, fft_size=128)


@pytest.fixture(scope="session")
def desk():
    return DESK


@pytest.fixture(scope="session")
def unpaired_domains():
    profiles = [get_profile("ref", DESK), get_profile("lowpass", DESK)]
    return generate_domains(synthetic_rest_corpus(12, seed=5), profiles, True, 0, DESK)


@pytest.fixture(scope="session")
def paired_domains():
    profiles = [get_profile("ref", DESK), get_profile("lowpass", DESK)]
    return generate_domains(synthetic_rest_corpus(6, seed=6), profiles, False, 0, DESK)
