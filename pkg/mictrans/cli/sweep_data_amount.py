from omegaconf import DictConfig

from mictrans.cli import command
from mictrans.cyclegan import TrainConfig
from mictrans.eval import KeywordModel
from mictrans.eval.experiment import data_amount_sweep, dump_curve
from mictrans.logging import CLI_LOG
from mictrans.micsim import DomainDataset


@command
def main(cfg: DictConfig):
    sweep_cfg = cfg["sweep"]
    keyword = KeywordModel.load(sweep_cfg["keyword"])
    curve = data_amount_sweep(
        [float(m) for m in sweep_cfg["minutes"]],
        DomainDataset.load(sweep_cfg["pool_test_mic"]),
        DomainDataset.load(sweep_cfg["pool_train_mic"]),
        keyword,
        DomainDataset.load(sweep_cfg["test"]),
        TrainConfig.from_cfg(cfg["train"], cfg["patch"]),
        seed=sweep_cfg["seed"],
    )
    dump_curve(sweep_cfg["output"], curve)
    CLI_LOG.info(f"Accuracy curve over {len(curve)} budgets -> {sweep_cfg['output']}")


if __name__ == "__main__":
    main()
