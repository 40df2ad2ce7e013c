from omegaconf import DictConfig

from mictrans.cli import command
from mictrans.cyclegan import CycleGanModel, Direction, TranslatorExport, translate
from mictrans.dsp import read_wav, stft_log_spectrogram
from mictrans.error import ConfigError
from mictrans.logging import CLI_LOG
from mictrans.nncore import Model
from mictrans.util import parse_enum


@command
def main(cfg: DictConfig):
    tr_cfg = cfg["translate"]
    model = Model.load_any(tr_cfg["model"])
    if not isinstance(model, (CycleGanModel, TranslatorExport)):
        raise ConfigError(f"{tr_cfg['model']} holds a {model.kind()!r} model, not a translator")

    # Features follow the checkpoint, not the `stft` group.
    spec = stft_log_spectrogram(read_wav(tr_cfg["input"]), model.stft)
    out = translate(model, spec, parse_enum(Direction, tr_cfg["direction"]))
    out.dump(tr_cfg["output"])
    CLI_LOG.info(
        f"Translated {tr_cfg['input']} ({spec.freq_bins}x{spec.frames}) -> {tr_cfg['output']}"
    )


if __name__ == "__main__":
    main()
