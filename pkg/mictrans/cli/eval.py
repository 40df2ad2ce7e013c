import os

from omegaconf import DictConfig

from mictrans.calibrate import CalibrationOffset
from mictrans.cli import command
from mictrans.eval import EvalReport, KeywordModel, Pipeline, evaluate
from mictrans.logging import CLI_LOG
from mictrans.micsim import DomainDataset
from mictrans.nncore import Model
from mictrans.util import parse_enum


def _optional(path, loader):
    return None if path is None else loader(path)


@command
def main(cfg: DictConfig):
    eval_cfg = cfg["eval"]
    report = evaluate(
        KeywordModel.load(eval_cfg["keyword"]),
        DomainDataset.load(eval_cfg["test"]),
        parse_enum(Pipeline, eval_cfg["pipeline"]),
        translation=_optional(eval_cfg["translation"], Model.load_any),
        offset=_optional(eval_cfg["offset"], CalibrationOffset.load),
        reference=_optional(eval_cfg["reference"], DomainDataset.load),
        upper=eval_cfg["upper"],
        unmodified=eval_cfg["unmodified"],
    )

    CLI_LOG.info("\t".join(EvalReport.HEADER))
    CLI_LOG.info(str(report))
    if eval_cfg["report"] is not None:
        fresh = not os.path.exists(eval_cfg["report"])
        with open(eval_cfg["report"], "a") as f:
            if fresh:
                f.write("\t".join(EvalReport.HEADER) + "\n")
            f.write(str(report) + "\n")


if __name__ == "__main__":
    main()
