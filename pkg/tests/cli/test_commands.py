"""Run the hydra entry points in-process, as `mictrans.<command> key=value ...` would."""

import sys

import pytest
from hydra.core.global_hydra import GlobalHydra

from mictrans.calibrate import CalibrationOffset
from mictrans.cli import bench_latency, calibrate, eval as eval_cmd, pipeline, simulate
from mictrans.cli import sweep_data_amount, train_cyclegan, train_keyword, translate
from mictrans.dsp import Spectrogram
from mictrans.eval import EvalReport, KeywordModel
from mictrans.macro import EXIT_CONFIG, EXIT_DATA
from mictrans.micsim import DomainDataset

DESK = ["stft.window_ms=8", "stft.hop_ms=8", "stft.fft_size=128"]
SMALL_PATCH = ["patch.freq=32", "patch.time=32"]


@pytest.fixture(autouse=True)
def fresh_hydra():
    GlobalHydra.instance().clear()
    yield
    GlobalHydra.instance().clear()


def run(command, tmp_path, *overrides):
    argv = [
        command.__name__,
        *overrides,
        f"hydra.run.dir={tmp_path}/hydra",
        "hydra/job_logging=console",
    ]
    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(sys, "argv", argv)
        command.main()


def exit_code(command, tmp_path, *overrides):
    with pytest.raises(SystemExit) as e:
        run(command, tmp_path, *overrides)
    return e.value.code


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "data"
    GlobalHydra.instance().clear()
    run(
        simulate,
        root.parent,
        f"simulate.root={root}",
        "simulate.per_class=1",
        "simulate.rest_clips=4",
        *DESK,
    )
    GlobalHydra.instance().clear()
    return root


def test_simulate_layout(data):
    assert sorted(p.name for p in data.iterdir()) == [
        "lowpass",
        "lowpass_rest",
        "ref",
        "ref_rest",
    ]
    ref = DomainDataset.load(data / "ref")
    lowpass = DomainDataset.load(data / "lowpass")
    assert ref.source_ids == lowpass.source_ids
    assert len(ref.labels) == len(ref.clips) == 13
    rest = DomainDataset.load(data / "ref_rest")
    assert rest.unpaired_with == {"lowpass_rest"}
    assert not rest.labels


def test_train_translate_and_evaluate(data, tmp_path):
    kws = tmp_path / "kws.m2mckpt"
    run(
        train_keyword,
        tmp_path,
        f"keyword.domains={data / 'ref'}",
        f"keyword.save={kws}",
        f"keyword.val_domain={data / 'lowpass'}",
        "keyword.epochs=1",
        "keyword.batch_size=8",
        *DESK,
    )
    assert KeywordModel.load(kws).training_mic_ids == ["ref"]

    gan = tmp_path / "gan"
    run(
        train_cyclegan,
        tmp_path,
        f"train.domain_a={data / 'lowpass_rest'}",
        f"train.domain_b={data / 'ref_rest'}",
        f"train.save={gan}",
        "train.epochs=1",
        "train.batch_size=2",
        *DESK,
        *SMALL_PATCH,
    )
    assert (gan / "cyclegan.m2mckpt").is_file()
    assert (gan / "cyclegan-export.m2mckpt").is_file()
    assert len((gan / train_cyclegan.LOG_NAME).read_text().splitlines()) == 2

    offset = tmp_path / "lowpass.offset.json"
    run(
        calibrate,
        tmp_path,
        f"calibrate.test_profile={data / 'lowpass'}",
        "calibrate.train_profile=ref",
        f"calibrate.output={offset}",
        "calibrate.duration_s=1.0",
        *DESK,
    )
    assert len(CalibrationOffset.load(offset)) == 64

    report = tmp_path / "report.tsv"
    common = [f"eval.keyword={kws}", f"eval.test={data / 'lowpass'}", f"eval.report={report}"]
    run(
        eval_cmd,
        tmp_path,
        *common,
        "eval.pipeline=translated",
        f"eval.translation={gan / 'cyclegan-export.m2mckpt'}",
        f"eval.reference={data / 'ref'}",
    )
    run(eval_cmd, tmp_path, *common, "eval.pipeline=calibrated", f"eval.offset={offset}")
    lines = report.read_text().splitlines()
    assert lines[0] == "\t".join(EvalReport.HEADER)
    assert [line.split("\t")[2] for line in lines[1:]] == ["translated", "calibrated"]

    wav = sorted((data / "lowpass").glob("*.wav"))[0]
    spec = tmp_path / "out.m2mspec"
    run(
        translate,
        tmp_path,
        f"translate.model={gan / 'cyclegan.m2mckpt'}",
        f"translate.input={wav}",
        f"translate.output={spec}",
    )
    assert Spectrogram.load(spec).bins.shape == (64, 125)

    run(
        pipeline,
        tmp_path,
        f"pipeline.input={wav}",
        "pipeline.deployment_mic=lowpass",
        f"pipeline.keyword={kws}",
        f"pipeline.translation={gan / 'cyclegan-export.m2mckpt'}",
    )

    curve = tmp_path / "curve.txt"
    run(
        sweep_data_amount,
        tmp_path,
        "sweep.minutes=[0]",
        f"sweep.pool_test_mic={data / 'lowpass_rest'}",
        f"sweep.pool_train_mic={data / 'ref_rest'}",
        f"sweep.keyword={kws}",
        f"sweep.test={data / 'lowpass'}",
        f"sweep.output={curve}",
    )
    assert curve.read_text().splitlines()[0] == "x y"


def test_bench_untrained_translator(tmp_path):
    run(bench_latency, tmp_path, "bench.seconds=1", "bench.repeat=2", "bench.warmup=0", *DESK, *SMALL_PATCH)


def test_unknown_override_is_a_config_error(tmp_path):
    assert exit_code(simulate, tmp_path, "simulate.bogus=1") == EXIT_CONFIG


def test_missing_value_is_a_config_error(tmp_path):
    assert exit_code(calibrate, tmp_path) == EXIT_CONFIG


def test_bad_enum_is_a_config_error(data, tmp_path):
    assert exit_code(
        train_cyclegan,
        tmp_path,
        f"train.domain_a={data / 'lowpass_rest'}",
        f"train.domain_b={data / 'ref_rest'}",
        f"train.save={tmp_path / 'gan'}",
        "train.mode=semi",
    ) == EXIT_CONFIG


def test_overlapping_domains_are_a_data_error(data, tmp_path):
    assert exit_code(
        train_cyclegan,
        tmp_path,
        f"train.domain_a={data / 'lowpass'}",
        f"train.domain_b={data / 'ref'}",
        f"train.save={tmp_path / 'gan'}",
        *DESK,
        *SMALL_PATCH,
    ) == EXIT_DATA


def test_missing_domain_is_a_data_error(tmp_path):
    assert exit_code(
        train_keyword,
        tmp_path,
        f"keyword.domains={tmp_path / 'nowhere'}",
        f"keyword.save={tmp_path / 'kws.m2mckpt'}",
    ) == EXIT_DATA
