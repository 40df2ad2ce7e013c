import numpy as np
import pytest

from mictrans.calibrate import CalibrationOffset, measure_offset
from mictrans.cyclegan import CycleGanModel, TrainConfig
from mictrans.dsp import StftConfig, stft_log_spectrogram
from mictrans.error import (
    ConfigError,
    ContractError,
    InsufficientDataError,
    PairingViolationError,
)
from mictrans.eval.experiment import (
    EvalReport,
    Pipeline,
    data_amount_sweep,
    dump_curve,
    evaluate,
    pipeline_artifact,
    subsample,
    treat,
)
from mictrans.eval.keyword import clip_features
from mictrans.eval.metrics import PSNR_CAP_DB
from mictrans.micsim import check_unpaired, get_profile

STFT = StftConfig()
DESK = StftConfig(window_ms=8, hop_ms=8, fft_size=128)


def tiny_gan_cfg(**kwargs):
    return TrainConfig(patch_freq=32, patch_time=32, batch_size=4, epochs=1, seed=3, **kwargs)


@pytest.fixture(scope="module")
def lowpass_offset():
    return measure_offset(get_profile("lowpass", STFT), get_profile("ref", STFT), STFT)


def test_unmodified_matches_direct_prediction(keyword, train_domains):
    ref = train_domains[0]
    report = evaluate(keyword, ref, Pipeline.UNMODIFIED)
    pairs = ref.labeled()
    probs = keyword.predict_proba([clip_features(c, STFT) for c, _ in pairs])
    expected = np.mean([keyword.classes[i] == l for i, (_, l) in zip(probs.argmax(1), pairs)])
    assert report.accuracy == pytest.approx(expected)
    assert report.train_domain == "ref" and report.test_domain == "ref"
    assert report.psnr_mean is None and report.recovery is None


def test_report_row(keyword, test_domains):
    report = evaluate(keyword, test_domains[0], Pipeline.UNMODIFIED, reference=test_domains[0])
    assert report.psnr_mean == PSNR_CAP_DB
    row = report.row()
    assert len(row) == len(EvalReport.HEADER)
    assert row[:3] == ("ref", "ref", "unmodified")
    assert row[-2:] == ("-", "-")
    assert str(report) == "\t".join(row)


def test_missing_artifacts_are_config_errors():
    assert pipeline_artifact(Pipeline.UNMODIFIED) is None
    with pytest.raises(ConfigError):
        pipeline_artifact(Pipeline.CALIBRATED)
    for pipeline in (Pipeline.TRANSLATED, Pipeline.PAIRED_GAN):
        with pytest.raises(ConfigError):
            pipeline_artifact(pipeline)


def test_translator_contract(keyword, test_domains):
    foreign = CycleGanModel("lowpass", "ref", DESK, (32, 32))
    with pytest.raises(ContractError):
        evaluate(keyword, test_domains[1], Pipeline.TRANSLATED, translation=foreign)


def test_offset_bins_must_match(keyword, test_domains):
    offset = CalibrationOffset(np.ones(64))
    with pytest.raises(ConfigError):
        evaluate(keyword, test_domains[1], Pipeline.CALIBRATED, offset=offset)


def test_reference_must_be_aligned(keyword, test_domains, train_domains):
    with pytest.raises(PairingViolationError):
        evaluate(keyword, test_domains[1], Pipeline.UNMODIFIED, reference=train_domains[0])


def test_treat_dispatch(lowpass_offset, test_domains):
    clip = test_domains[1].clips[0]
    plain = treat(None, clip, STFT)
    np.testing.assert_array_equal(plain.bins, stft_log_spectrogram(clip, STFT).bins)
    calibrated = treat(lowpass_offset, clip, STFT)
    assert calibrated.bins.shape == plain.bins.shape
    assert not np.allclose(calibrated.bins, plain.bins)

    export = CycleGanModel("lowpass", "ref", STFT, (32, 32)).freeze().export()
    translated = treat(export, clip, STFT)
    assert translated.bins.shape == plain.bins.shape
    # Bins above the patch height pass through.
    np.testing.assert_array_equal(translated.bins[32:], plain.bins[32:])


def test_calibration_restores_spectrograms(keyword, test_domains, lowpass_offset):
    ref, lowpass = test_domains
    upper = evaluate(keyword, ref, Pipeline.UNMODIFIED).accuracy
    plain = evaluate(keyword, lowpass, Pipeline.UNMODIFIED, reference=ref)
    calibrated = evaluate(
        keyword,
        lowpass,
        Pipeline.CALIBRATED,
        offset=lowpass_offset,
        reference=ref,
        upper=upper,
        unmodified=plain.accuracy,
    )
    assert calibrated.psnr_mean > plain.psnr_mean + 3.0
    assert calibrated.accuracy >= upper - 0.15
    if upper > plain.accuracy:
        assert calibrated.recovery is not None
        assert 0.0 <= calibrated.recovery.clamped <= 1.0
    else:
        assert calibrated.recovery is None


def test_subsample(pools):
    pool = pools[0]
    picked = subsample(pool, 2.5, seed=4)
    assert picked.duration_s >= 2.5
    assert len(picked.clips) == 3
    assert set(picked.source_ids) <= set(pool.source_ids)
    assert picked.source_ids == subsample(pool, 2.5, seed=4).source_ids
    assert subsample(pool, 0.0, seed=4).clips == []
    with pytest.raises(InsufficientDataError):
        subsample(pool, pool.duration_s + 1.0, seed=4)


def test_subsamples_stay_unpaired(pools):
    check_unpaired(subsample(pools[0], 3.0, 0), subsample(pools[1], 3.0, 1))


def test_sweep_zero_minutes_is_unmodified(keyword, test_domains, pools):
    curve = data_amount_sweep([0], *pools, keyword, test_domains[1], tiny_gan_cfg())
    unmodified = evaluate(keyword, test_domains[1], Pipeline.UNMODIFIED).accuracy
    assert curve == [(0.0, pytest.approx(unmodified))]


def test_sweep_trains_one_translator_per_budget(keyword, test_domains, pools):
    curve = data_amount_sweep([0, 0.05], *pools, keyword, test_domains[1], tiny_gan_cfg())
    assert [x for x, _ in curve] == [0.0, 0.05]
    assert all(0.0 <= y <= 1.0 for _, y in curve)


@pytest.mark.parametrize("minutes", [[0, 5, 1], [1, 1], [-1, 0]])
def test_sweep_rejects_bad_budgets(keyword, test_domains, pools, minutes):
    with pytest.raises(ConfigError):
        data_amount_sweep(minutes, *pools, keyword, test_domains[1], tiny_gan_cfg())


def test_sweep_budget_beyond_pool(keyword, test_domains, pools):
    with pytest.raises(InsufficientDataError):
        data_amount_sweep([0, 10], *pools, keyword, test_domains[1], tiny_gan_cfg())


def test_dump_curve(tmp_path):
    path = tmp_path / "curve.txt"
    dump_curve(path, [(0.0, 0.5), (1.5, 0.75)])
    assert path.read_text() == "x y\n0 0.500000\n1.5 0.750000\n"
