from omegaconf import DictConfig

from mictrans.cli import command
from mictrans.dsp import StftConfig
from mictrans.eval import KeywordTrainConfig, Pipeline, evaluate, train_keyword
from mictrans.logging import CLI_LOG
from mictrans.micsim import DomainDataset


@command
def main(cfg: DictConfig):
    kw_cfg = cfg["keyword"]
    stft = StftConfig.from_cfg(cfg["stft"])
    paths = kw_cfg["domains"]
    if isinstance(paths, str):
        paths = [paths]
    domains = [DomainDataset.load(p) for p in paths]

    model = train_keyword(domains, KeywordTrainConfig.from_cfg(kw_cfg), stft)
    model.dump(kw_cfg["save"])
    CLI_LOG.info(
        f"Saved keyword model trained on {model.training_mic_ids} to {kw_cfg['save']}"
    )

    if kw_cfg["val_domain"] is not None:
        report = evaluate(model, DomainDataset.load(kw_cfg["val_domain"]), Pipeline.UNMODIFIED)
        CLI_LOG.info(f"Validation accuracy: {report.accuracy:.4f}")


if __name__ == "__main__":
    main()
