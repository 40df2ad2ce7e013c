import os
import time
from pathlib import Path

from omegaconf import DictConfig

from mictrans.cli import command
from mictrans.cyclegan import TrainConfig, train
from mictrans.dsp import StftConfig
from mictrans.logging import CLI_LOG
from mictrans.micsim import DomainDataset

LOG_NAME = "train_log.tsv"


@command
def main(cfg: DictConfig):
    train_cfg = cfg["train"]
    stft = StftConfig.from_cfg(cfg["stft"])
    tcfg = TrainConfig.from_cfg(train_cfg, cfg["patch"])

    domain_a = DomainDataset.load(train_cfg["domain_a"])
    domain_b = DomainDataset.load(train_cfg["domain_b"])
    CLI_LOG.info(
        f"Training {tcfg.mode} translation {domain_a.domain_id} -> {domain_b.domain_id} "
        f"({domain_a.duration_s / 60:.1f} + {domain_b.duration_s / 60:.1f} min)"
    )

    begin = time.time()
    model, log = train(domain_a, domain_b, tcfg, stft)
    CLI_LOG.info(f"Trained {len(log)} epochs in {time.time() - begin:.1f}s")

    save = Path(train_cfg["save"])
    os.makedirs(save, exist_ok=True)
    model.dump(save / f"{model.kind()}{model.name_suffix()}")
    export = model.export()
    export.dump(save / f"{export.kind()}{export.name_suffix()}")
    log.dump(save / LOG_NAME)
    CLI_LOG.info(f"Saved model, export and {LOG_NAME} to {save}")


if __name__ == "__main__":
    main()
