"""Least-squares adversarial, cycle and identity objectives."""

from dataclasses import dataclass

import torch

from mictrans.nncore.layers import l1_mean, lsq_mean


def loss_adv_generator(d_out_on_generated: torch.Tensor) -> torch.Tensor:
    return lsq_mean(d_out_on_generated, 1.0)


def loss_cycle(x: torch.Tensor, x_roundtrip: torch.Tensor) -> torch.Tensor:
    return l1_mean(x, x_roundtrip)


def loss_identity(y: torch.Tensor, g_of_y: torch.Tensor) -> torch.Tensor:
    return l1_mean(y, g_of_y)


def loss_discriminator(d_on_fake: torch.Tensor, d_on_real: torch.Tensor) -> torch.Tensor:
    return lsq_mean(d_on_fake, 0.0) + lsq_mean(d_on_real, 1.0)


@dataclass
class GeneratorLossParts:
    adv: torch.Tensor
    cycle: torch.Tensor
    id: torch.Tensor
    # Supervised L1 to the aligned target; only non-zero in paired mode.
    paired: torch.Tensor = None


def total_generator_loss(parts: GeneratorLossParts, cfg) -> torch.Tensor:
    total = cfg.alpha * parts.adv + cfg.beta * parts.cycle + cfg.gamma * parts.id
    if parts.paired is not None:
        total = total + cfg.delta * parts.paired
    return total
