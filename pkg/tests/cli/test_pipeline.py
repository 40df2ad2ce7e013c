import numpy as np
import pytest

from mictrans.calibrate import CalibrationOffset
from mictrans.cli.pipeline import (
    NO_SPEECH,
    Deployment,
    ModelMetadata,
    NoTranslationNeeded,
    PipelineConfig,
    TrainTranslation,
    training_manager_decide,
)
from mictrans.cyclegan import CycleGanModel
from mictrans.dsp import AudioClip, StftConfig
from mictrans.error import ConfigError, ContractError
from mictrans.eval import KeywordModel, Pipeline
from mictrans.eval.corpus import CLASSES
from mictrans.util import deterministic

SR = 16000


def meta(*mics):
    return ModelMetadata(frozenset(mics), "keyword-spotting", "contract")


@pytest.mark.parametrize(
    "training,deployed,expected",
    [
        (("micA",), "micA", NoTranslationNeeded()),
        (("micA", "micB"), "micC", TrainTranslation("micA")),
        (("micB",), "micC", TrainTranslation("micB")),
        (("micA", "micB"), "micB", NoTranslationNeeded()),
    ],
)
def test_training_manager(training, deployed, expected):
    assert training_manager_decide(meta(*training), deployed) == expected


def test_training_manager_needs_a_training_mic():
    with pytest.raises(ConfigError):
        training_manager_decide(meta(), "micA")


@pytest.fixture(scope="module")
def keyword():
    deterministic(0)
    return KeywordModel(training_mic_ids=["ref"])


@pytest.fixture(scope="module")
def export():
    deterministic(1)
    return CycleGanModel("lowpass", "ref", StftConfig(), (32, 32)).freeze().export()


def cfg(mic="lowpass", pipeline=Pipeline.TRANSLATED):
    return PipelineConfig(mic, "unused.m2mckpt", pipeline)


def burst(seconds=2.0):
    t = np.arange(int(seconds * SR)) / SR
    wave = np.zeros_like(t)
    voiced = (t > 0.8) & (t < 1.2)
    wave[voiced] = 0.3 * np.sin(2 * np.pi * 700 * t[voiced])
    return AudioClip(wave, SR, "burst")


def test_silence_skips_the_classifier(keyword, export, monkeypatch):
    def fail(spec):
        raise AssertionError("classifier ran on silence")

    deployment = Deployment(cfg(), keyword, translation=export)
    monkeypatch.setattr(deployment.keyword, "classify", fail)
    result = deployment.run(AudioClip(np.zeros(SR), SR, "quiet"))
    assert result.label == NO_SPEECH
    assert result.probabilities is None
    assert set(result.timings_ms) == {"vad"}


def test_translated_run(keyword, export):
    result = Deployment(cfg(), keyword, translation=export).run(burst())
    assert result.label in CLASSES
    assert result.probabilities.shape == (len(CLASSES),)
    assert set(result.timings_ms) == {"vad", "features", "treat", "classify"}
    assert result.total_ms == pytest.approx(sum(result.timings_ms.values()))


def test_unmodified_run_has_no_treatment(keyword):
    result = Deployment(cfg(pipeline=Pipeline.UNMODIFIED), keyword).run(burst())
    assert result.timings_ms["treat"] == 0.0


def test_calibrated_run(keyword):
    offset = CalibrationOffset(np.full(256, 2.0))
    deployment = Deployment(cfg(pipeline=Pipeline.CALIBRATED), keyword, offset=offset)
    assert deployment.artifact is offset
    assert deployment.run(burst()).label in CLASSES


def test_training_microphone_runs_unmodified(keyword, export):
    deployment = Deployment(cfg(mic="ref"), keyword, translation=export)
    assert deployment.pipeline is Pipeline.UNMODIFIED
    assert deployment.artifact is None


def test_missing_translator(keyword):
    with pytest.raises(ConfigError):
        Deployment(cfg(), keyword)


def test_mismatched_artifacts(keyword):
    desk = StftConfig(window_ms=8, hop_ms=8, fft_size=128)
    foreign = CycleGanModel("lowpass", "ref", desk, (32, 32)).freeze().export()
    with pytest.raises(ContractError):
        Deployment(cfg(), keyword, translation=foreign)
    with pytest.raises(ConfigError):
        Deployment(
            cfg(pipeline=Pipeline.CALIBRATED), keyword, offset=CalibrationOffset(np.ones(64))
        )


def test_config_from_mapping():
    parsed = PipelineConfig.from_cfg(
        {"deployment_mic": "usbC", "keyword": "k.m2mckpt", "pipeline": "CALIBRATED"}
    )
    assert parsed.pipeline is Pipeline.CALIBRATED
    assert parsed.translation_path is None and parsed.vad_frame_ms == 20.0
    with pytest.raises(ConfigError):
        PipelineConfig.from_cfg({"deployment_mic": "m", "keyword": "k", "pipeline": "magic"})
