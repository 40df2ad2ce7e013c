from dataclasses import dataclass, field
from typing import Any, Iterable, List, Mapping, Sequence

import torch

from mictrans.error import ConfigCheck, ShapeCheck


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        ConfigCheck.gt(self.lr, 0, "lr")
        ConfigCheck.true(0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, "Adam betas")
        ConfigCheck.gt(self.eps, 0, "eps")

    @staticmethod
    def from_cfg(cfg: Mapping[str, Any]) -> "AdamConfig":
        return AdamConfig(
            lr=float(cfg.get("lr", 2e-4)),
            beta1=float(cfg.get("beta1", 0.5)),
            beta2=float(cfg.get("beta2", 0.999)),
        )


@dataclass
class AdamState:
    step: int
    exp_avg: List[torch.Tensor] = field(default_factory=list)
    exp_avg_sq: List[torch.Tensor] = field(default_factory=list)
    config: AdamConfig = field(default_factory=AdamConfig)


def make_adam(params: Iterable[torch.Tensor], cfg: AdamConfig = AdamConfig()):
    return torch.optim.Adam(
        list(params), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2), eps=cfg.eps
    )


def adam_state(opt: torch.optim.Adam) -> AdamState:
    group = opt.param_groups[0]
    cfg = AdamConfig(
        lr=group["lr"], beta1=group["betas"][0], beta2=group["betas"][1], eps=group["eps"]
    )
    params = [p for g in opt.param_groups for p in g["params"]]
    states = [opt.state.get(p, {}) for p in params]
    step = int(states[0].get("step", 0)) if states else 0
    return AdamState(
        step=step,
        exp_avg=[s["exp_avg"] for s in states if "exp_avg" in s],
        exp_avg_sq=[s["exp_avg_sq"] for s in states if "exp_avg_sq" in s],
        config=cfg,
    )


def adam_step(
    params: Sequence[torch.Tensor],
    grads: Sequence[torch.Tensor],
    opt: torch.optim.Adam,
) -> AdamState:
    """One bias-corrected Adam update of `params` with explicit `grads`."""
    ShapeCheck.eq(len(params), len(grads), "one gradient per parameter")
    for p, g in zip(params, grads):
        ShapeCheck.eq(tuple(p.shape), tuple(g.shape), "gradient shape")
        p.grad = g.detach().clone()
    opt.step()
    return adam_state(opt)
