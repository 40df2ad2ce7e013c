"""Downstream evaluation of the inference pipelines and the experiments built on it."""

from dataclasses import dataclass, replace
from enum import Enum, unique
from os import PathLike
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from multipledispatch import dispatch

from mictrans.calibrate import CalibrationOffset, apply_offset
from mictrans.cyclegan.model import CycleGanModel, TrainConfig, TranslatorExport
from mictrans.cyclegan.train import train
from mictrans.cyclegan.translate import translate
from mictrans.dsp import (
    AudioClip,
    Spectrogram,
    StftConfig,
    fit_length,
    stft_log_spectrogram,
    stft_magnitude,
)
from mictrans.error import (
    ConfigCheck,
    ConfigError,
    ContractError,
    InsufficientDataError,
    PairingViolationError,
    UndefinedRecoveryError,
)
from mictrans.eval.corpus import CLIP_SECONDS
from mictrans.eval.keyword import KeywordModel, spectrogram_features
from mictrans.eval.metrics import Recovery, psnr, recovery
from mictrans.logging import EVAL_LOG
from mictrans.micsim import DomainDataset
from mictrans.util import ordered_map

UPPER_BOUND_SLACK = 0.02

Translator = Union[CycleGanModel, TranslatorExport]


@unique
class Pipeline(Enum):
    UNMODIFIED = "unmodified"
    CALIBRATED = "calibrated"
    TRANSLATED = "translated"
    PAIRED_GAN = "paired_gan"

    def __str__(self) -> str:
        return self.value


@dataclass
class EvalReport:
    train_domain: str
    test_domain: str
    pipeline: Pipeline
    accuracy: float
    psnr_mean: Optional[float] = None
    recovery: Optional[Recovery] = None

    HEADER = ("train", "test", "pipeline", "accuracy", "psnr_db", "recovery", "recovery_raw")

    def row(self) -> Tuple[str, ...]:
        def fmt(v):
            return "-" if v is None else f"{v:.4f}"

        return (
            self.train_domain,
            self.test_domain,
            self.pipeline.value,
            fmt(self.accuracy),
            fmt(self.psnr_mean),
            fmt(self.recovery.clamped if self.recovery else None),
            fmt(self.recovery.raw if self.recovery else None),
        )

    def __str__(self) -> str:
        return "\t".join(self.row())


@dispatch(type(None), AudioClip, StftConfig)
def treat(artifact, clip, stft):
    return stft_log_spectrogram(clip, stft)


@dispatch(CalibrationOffset, AudioClip, StftConfig)
def treat(artifact, clip, stft):
    return apply_offset(stft_magnitude(clip, stft), artifact, stft)


@dispatch((CycleGanModel, TranslatorExport), AudioClip, StftConfig)
def treat(artifact, clip, stft):
    return translate(artifact, stft_log_spectrogram(clip, stft))


def pipeline_artifact(
    pipeline: Pipeline,
    translation: Optional[Translator] = None,
    offset: Optional[CalibrationOffset] = None,
):
    """The artifact `treat` needs for `pipeline`; a missing one is a configuration error."""
    if pipeline is Pipeline.UNMODIFIED:
        return None
    if pipeline is Pipeline.CALIBRATED:
        if offset is None:
            raise ConfigError("The calibrated pipeline needs a calibration offset")
        return offset
    if translation is None:
        raise ConfigError(f"The {pipeline} pipeline needs a translation model")
    return translation


def check_contract(model: KeywordModel, artifact) -> None:
    if isinstance(artifact, (CycleGanModel, TranslatorExport)):
        if artifact.stft.contract_hash() != model.stft.contract_hash():
            raise ContractError(
                f"Translator features {artifact.stft} differ from the keyword model's {model.stft}"
            )
    elif isinstance(artifact, CalibrationOffset):
        ConfigCheck.eq(len(artifact), model.stft.freq_bins, "calibration bins")


def evaluate(
    model: KeywordModel,
    test: DomainDataset,
    pipeline: Pipeline,
    translation: Optional[Translator] = None,
    offset: Optional[CalibrationOffset] = None,
    reference: Optional[DomainDataset] = None,
    upper: Optional[float] = None,
    unmodified: Optional[float] = None,
) -> EvalReport:
    """Classify every labeled clip of `test` after the pipeline's treatment.

    `reference` is the same corpus rendered by the training microphone; when given, the
    mean PSNR of treated spectrograms against it is reported. Recovery is reported when
    both `upper` and `unmodified` accuracies are known and recovery is defined.
    """
    artifact = pipeline_artifact(pipeline, translation, offset)
    check_contract(model, artifact)
    n_samples = int(CLIP_SECONDS * model.stft.sample_rate_hz)
    pairs = test.labeled()

    def run(pair):
        spec = treat(artifact, fit_length(pair[0], n_samples), model.stft)
        return spec, spectrogram_features(spec)

    treated = ordered_map(run, pairs)
    probs = model.predict_proba([f for _, f in treated])
    predicted = [model.classes[int(i)] for i in probs.argmax(axis=1)]
    accuracy = float(np.mean([p == label for p, (_, label) in zip(predicted, pairs)]))

    psnr_mean = None
    if reference is not None:
        aligned = {c.clip_id: c for c in reference.clips}
        scores = []
        for (clip, _), (spec, _) in zip(pairs, treated):
            if clip.clip_id not in aligned:
                raise PairingViolationError(
                    f"Clip {clip.clip_id} has no counterpart in {reference.domain_id}"
                )
            target = stft_log_spectrogram(fit_length(aligned[clip.clip_id], n_samples), model.stft)
            if pipeline is Pipeline.CALIBRATED:
                # Calibrated magnitudes are compared on the reference's log scale.
                spec = spec.on_range(target.log_range)
            scores.append(psnr(spec, target))
        psnr_mean = float(np.mean(scores))

    rec = None
    if upper is not None and unmodified is not None:
        try:
            rec = recovery(upper, unmodified, accuracy)
        except UndefinedRecoveryError as e:
            EVAL_LOG.warning(str(e))
        if accuracy > upper + UPPER_BOUND_SLACK:
            EVAL_LOG.warning(
                f"{pipeline} accuracy {accuracy:.3f} exceeds the upper bound {upper:.3f}"
            )

    report = EvalReport(
        ",".join(model.training_mic_ids), test.domain_id, pipeline, accuracy, psnr_mean, rec
    )
    EVAL_LOG.info(str(report))
    return report


def translation_psnr(
    model: Translator, source: DomainDataset, target: DomainDataset
) -> Tuple[float, float]:
    """Mean PSNR to the aligned target spectrograms before and after translation."""
    aligned = {c.clip_id: c for c in target.clips}
    before, after = [], []
    for clip in source.clips:
        if clip.clip_id not in aligned:
            raise PairingViolationError(
                f"Clip {clip.clip_id} has no counterpart in {target.domain_id}"
            )
        src = stft_log_spectrogram(clip, model.stft)
        tgt = stft_log_spectrogram(aligned[clip.clip_id], model.stft)
        before.append(psnr(src, tgt))
        after.append(psnr(translate(model, src), tgt))
    return float(np.mean(before)), float(np.mean(after))


def subsample(domain: DomainDataset, seconds: float, seed: int) -> DomainDataset:
    """Seeded random subset of whole clips totalling at least `seconds` of audio."""
    if seconds > domain.duration_s + 1e-9:
        raise InsufficientDataError(
            f"{seconds / 60:.2f} min requested from {domain.domain_id}, "
            f"which holds {domain.duration_s / 60:.2f} min"
        )
    order = np.random.default_rng(seed).permutation(len(domain.clips))
    picked, total = [], 0.0
    for i in order:
        if total >= seconds:
            break
        picked.append(int(i))
        total += domain.clips[i].duration_s
    return replace(domain, clips=[domain.clips[i] for i in sorted(picked)])


def data_amount_sweep(
    minutes: Sequence[float],
    pool_test_mic: DomainDataset,
    pool_train_mic: DomainDataset,
    keyword: KeywordModel,
    test: DomainDataset,
    cfg: TrainConfig,
    seed: int = 0,
) -> List[Tuple[float, float]]:
    """Accuracy of the translated pipeline against minutes of unpaired translation data.

    A budget of 0 minutes trains nothing and reports the unmodified pipeline.
    """
    ConfigCheck.true(
        all(b > a for a, b in zip(minutes, minutes[1:])) and all(m >= 0 for m in minutes),
        f"minutes must be non-negative and increasing, got {list(minutes)}",
    )
    budget_s = max(minutes, default=0) * 60
    available = min(pool_test_mic.duration_s, pool_train_mic.duration_s)
    if budget_s > available + 1e-9:
        raise InsufficientDataError(
            f"Largest budget {budget_s / 60:.2f} min exceeds the {available / 60:.2f} min available"
        )

    curve = []
    for m in minutes:
        if m == 0:
            report = evaluate(keyword, test, Pipeline.UNMODIFIED)
        else:
            sub_a = subsample(pool_test_mic, m * 60, seed)
            sub_b = subsample(pool_train_mic, m * 60, seed + 1)
            model, _ = train(sub_a, sub_b, cfg, keyword.stft)
            report = evaluate(keyword, test, Pipeline.TRANSLATED, translation=model)
        EVAL_LOG.info(f"{m:g} min -> accuracy {report.accuracy:.4f}")
        curve.append((float(m), report.accuracy))
    return curve


def dump_curve(path: PathLike, curve: Sequence[Tuple[float, float]]) -> None:
    with open(path, "w") as f:
        f.write("x y\n")
        for x, y in curve:
            f.write(f"{x:g} {y:.6f}\n")


def epochs_to_psnr_bar(
    domain_a: DomainDataset,
    domain_b: DomainDataset,
    cfg: TrainConfig,
    held_a: DomainDataset,
    held_b: DomainDataset,
    gain_db: float = 2.0,
    stft: StftConfig = StftConfig(),
) -> Optional[int]:
    """First epoch after which translation lifts held-out PSNR by `gain_db`; None if never."""
    reached = []

    def on_epoch_end(model, row) -> bool:
        before, after = translation_psnr(model, held_a, held_b)
        EVAL_LOG.info(f"[{cfg.mode}] epoch {row.epoch}: PSNR {before:.2f} -> {after:.2f} dB")
        if after - before >= gain_db:
            reached.append(row.epoch)
            return True
        return False

    train(domain_a, domain_b, cfg, stft, on_epoch_end=on_epoch_end)
    return reached[0] if reached else None
