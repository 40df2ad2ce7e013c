from pathlib import Path

from omegaconf import DictConfig

from mictrans.calibrate import measure_offset
from mictrans.cli import command
from mictrans.dsp import StftConfig
from mictrans.logging import CLI_LOG
from mictrans.macro import MANIFEST_NAME
from mictrans.micsim import DomainDataset, MicProfile, get_profile


def _profile(name_or_domain: str, stft: StftConfig) -> MicProfile:
    """A preset name, or a domain folder whose manifest records its profile."""
    if (Path(name_or_domain) / MANIFEST_NAME).is_file():
        return DomainDataset.load(name_or_domain).profile
    return get_profile(name_or_domain, stft)


@command
def main(cfg: DictConfig):
    cal_cfg = cfg["calibrate"]
    stft = StftConfig.from_cfg(cfg["stft"])
    offset = measure_offset(
        _profile(cal_cfg["test_profile"], stft),
        _profile(cal_cfg["train_profile"], stft),
        stft,
        duration_s=cal_cfg["duration_s"],
        f_lo=cal_cfg["f_lo"],
        f_hi=cal_cfg["f_hi"],
    )
    offset.dump(cal_cfg["output"])
    CLI_LOG.info(
        f"Offset over {len(offset)} bins, {int(offset.floored.sum())} floored, "
        f"gamma in [{offset.gamma.min():.3f}, {offset.gamma.max():.3f}] -> {cal_cfg['output']}"
    )


if __name__ == "__main__":
    main()
