import pytest

from mictrans.dsp import StftConfig
from mictrans.eval.corpus import synthetic_keyword_corpus, synthetic_rest_corpus
from mictrans.eval.keyword import KeywordTrainConfig, train_keyword
from mictrans.micsim import generate_domains, get_profile

STFT = StftConfig()
KEYWORD_CFG = KeywordTrainConfig(epochs=40, batch_size=16, seed=0)


def _render(per_class, seed, unpaired=False):
    clips, labels = synthetic_keyword_corpus(per_class, seed=seed)
    profiles = [get_profile("ref", STFT), get_profile("lowpass", STFT)]
    return generate_domains(clips, profiles, unpaired, 0, STFT, labels=labels)


@pytest.fixture(scope="session")
def keyword_cfg():
    return KEYWORD_CFG


@pytest.fixture(scope="session")
def train_domains():
    return _render(6, seed=1)


@pytest.fixture(scope="session")
def test_domains():
    return _render(3, seed=2)


@pytest.fixture(scope="session")
def keyword(train_domains):
    return train_keyword([train_domains[0]], KEYWORD_CFG, STFT)


@pytest.fixture(scope="session")
def pools():
    # (lowpass, ref): unpaired translation pools, test microphone first.
    profiles = [get_profile("lowpass", STFT), get_profile("ref", STFT)]
    return generate_domains(synthetic_rest_corpus(12, seed=3), profiles, True, 0, STFT)
