"""Deployment glue: the training manager's decision and the on-device inference graph.

    clip -> VAD gate -> 1 s window -> features -> [translate | calibrate] -> keyword model
"""

import time
from dataclasses import dataclass, field
from os import PathLike
from typing import Any, Dict, FrozenSet, Mapping, Optional, Union

import numpy as np
from omegaconf import DictConfig

from mictrans.calibrate import CalibrationOffset, apply_offset
from mictrans.cli import command
from mictrans.cyclegan.translate import translate
from mictrans.dsp import (
    AudioClip,
    fit_length,
    log_normalize,
    read_wav,
    stft_magnitude,
    vad_segments,
)
from mictrans.error import ConfigError
from mictrans.eval.corpus import CLIP_SECONDS
from mictrans.eval.experiment import Pipeline, check_contract, pipeline_artifact
from mictrans.eval.keyword import KeywordModel
from mictrans.logging import CLI_LOG
from mictrans.nncore.model import Model
from mictrans.util import parse_enum

NO_SPEECH = "no-speech"


@dataclass(frozen=True)
class ModelMetadata:
    training_mic_ids: FrozenSet[str]
    task_name: str
    feature_contract: str
    clip_seconds: float = CLIP_SECONDS

    @staticmethod
    def of(model: KeywordModel) -> "ModelMetadata":
        return ModelMetadata(
            frozenset(model.training_mic_ids), model.task_name, model.stft.contract_hash()
        )


@dataclass(frozen=True)
class NoTranslationNeeded:
    pass


@dataclass(frozen=True)
class TrainTranslation:
    target_mic: str


Decision = Union[NoTranslationNeeded, TrainTranslation]


def training_manager_decide(meta: ModelMetadata, deployment_mic: str) -> Decision:
    if not meta.training_mic_ids:
        raise ConfigError(f"Model for {meta.task_name!r} declares no training microphone")
    if deployment_mic in meta.training_mic_ids:
        return NoTranslationNeeded()
    # Several training microphones: the lexicographically smallest is the target.
    return TrainTranslation(min(meta.training_mic_ids))


@dataclass
class PipelineConfig:
    deployment_mic_id: str
    keyword_path: PathLike
    pipeline: Pipeline = Pipeline.TRANSLATED
    translation_path: Optional[PathLike] = None
    offset_path: Optional[PathLike] = None
    vad_frame_ms: float = 20.0
    vad_threshold_db: float = -30.0

    @staticmethod
    def from_cfg(cfg: Mapping[str, Any]) -> "PipelineConfig":
        return PipelineConfig(
            deployment_mic_id=str(cfg["deployment_mic"]),
            keyword_path=cfg["keyword"],
            pipeline=parse_enum(Pipeline, cfg["pipeline"]),
            translation_path=cfg.get("translation"),
            offset_path=cfg.get("offset"),
            vad_frame_ms=float(cfg.get("vad_frame_ms", 20.0)),
            vad_threshold_db=float(cfg.get("vad_threshold_db", -30.0)),
        )


@dataclass
class PipelineResult:
    label: str
    probabilities: Optional[np.ndarray] = None
    timings_ms: Dict[str, float] = field(default_factory=dict)

    @property
    def total_ms(self) -> float:
        return sum(self.timings_ms.values())


class Deployment:
    """Loaded artifacts for one microphone; `run` is reentrant and never mutates them."""

    def __init__(
        self,
        cfg: PipelineConfig,
        keyword: Optional[KeywordModel] = None,
        translation=None,
        offset: Optional[CalibrationOffset] = None,
    ):
        self.cfg = cfg
        self.keyword = keyword or KeywordModel.load(cfg.keyword_path)
        if translation is None and cfg.translation_path is not None:
            translation = Model.load_any(cfg.translation_path)
        if offset is None and cfg.offset_path is not None:
            offset = CalibrationOffset.load(cfg.offset_path)

        self.pipeline = cfg.pipeline
        decision = training_manager_decide(ModelMetadata.of(self.keyword), cfg.deployment_mic_id)
        if isinstance(decision, NoTranslationNeeded):
            if self.pipeline is not Pipeline.UNMODIFIED:
                CLI_LOG.info(
                    f"{cfg.deployment_mic_id} is a training microphone, running unmodified"
                )
            self.pipeline = Pipeline.UNMODIFIED
        elif translation is not None and translation.target_domain != decision.target_mic:
            CLI_LOG.warning(
                f"Translator targets {translation.target_domain} but the training manager "
                f"selected {decision.target_mic}"
            )
        self.artifact = pipeline_artifact(self.pipeline, translation, offset)
        check_contract(self.keyword, self.artifact)

    def run(self, clip: AudioClip) -> PipelineResult:
        stft = self.keyword.stft
        timings = {}

        begin = time.perf_counter()
        segments = vad_segments(clip, self.cfg.vad_frame_ms, self.cfg.vad_threshold_db)
        timings["vad"] = (time.perf_counter() - begin) * 1000
        if not segments:
            return PipelineResult(NO_SPEECH, None, timings)

        begin = time.perf_counter()
        center = (segments[0][0] + segments[-1][1]) // 2
        window = fit_length(clip, int(CLIP_SECONDS * clip.sample_rate_hz), center)
        magnitude = stft_magnitude(window, stft)
        spec = log_normalize(magnitude, stft)
        timings["features"] = (time.perf_counter() - begin) * 1000

        begin = time.perf_counter()
        if isinstance(self.artifact, CalibrationOffset):
            spec = apply_offset(magnitude, self.artifact, stft)
        elif self.artifact is not None:
            spec = translate(self.artifact, spec)
        timings["treat"] = (time.perf_counter() - begin) * 1000 if self.artifact is not None else 0.0

        begin = time.perf_counter()
        label, probs = self.keyword.classify(spec)
        timings["classify"] = (time.perf_counter() - begin) * 1000

        CLI_LOG.info(
            f"{clip.clip_id}: {label} ({self.pipeline}) "
            + " ".join(f"{k}={v:.2f}ms" for k, v in timings.items())
        )
        return PipelineResult(label, probs, timings)


def run_pipeline(clip: AudioClip, cfg: PipelineConfig) -> PipelineResult:
    return Deployment(cfg).run(clip)


@command
def main(cfg: DictConfig):
    pipe_cfg = cfg["pipeline"]
    result = run_pipeline(read_wav(pipe_cfg["input"]), PipelineConfig.from_cfg(pipe_cfg))
    CLI_LOG.info(f"{pipe_cfg['input']}: {result.label} in {result.total_ms:.1f} ms")


if __name__ == "__main__":
    main()
