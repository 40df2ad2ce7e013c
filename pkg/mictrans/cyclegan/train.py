"""Alternating least-squares CycleGAN optimisation over precomputed spectrogram patches."""

import csv
from dataclasses import astuple, dataclass, fields
from os import PathLike
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import torch

from mictrans.cyclegan.loss import (
    GeneratorLossParts,
    loss_adv_generator,
    loss_cycle,
    loss_discriminator,
    loss_identity,
    total_generator_loss,
)
from mictrans.cyclegan.model import CycleGanModel, TrainConfig, TrainMode
from mictrans.dsp import StftConfig, extract_patches, stft_log_spectrogram
from mictrans.error import InsufficientDataError, PairingViolationError
from mictrans.logging import GAN_LOG
from mictrans.micsim import DomainDataset, check_unpaired
from mictrans.nncore.layers import l1_mean
from mictrans.nncore.optim import make_adam
from mictrans.util import deterministic, ordered_map


@dataclass
class EpochLoss:
    epoch: int
    L_adv_ab: float
    L_adv_ba: float
    L_cycle: float
    L_id: float
    L_D_a: float
    L_D_b: float
    g_total: float


class TrainLog:
    COLUMNS = tuple(f.name for f in fields(EpochLoss))

    def __init__(self, rows: Optional[List[EpochLoss]] = None):
        self.rows: List[EpochLoss] = rows or []

    def __len__(self) -> int:
        return len(self.rows)

    def __eq__(self, other) -> bool:
        return isinstance(other, TrainLog) and self.rows == other.rows

    def append(self, row: EpochLoss) -> None:
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def dump(self, path: PathLike) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, delimiter="\t")
            writer.writerow(self.COLUMNS)
            for row in self.rows:
                writer.writerow([row.epoch] + [repr(v) for v in astuple(row)[1:]])

    @staticmethod
    def load(path: PathLike) -> "TrainLog":
        with open(path, "r", newline="") as f:
            reader = csv.DictReader(f, delimiter="\t")
            return TrainLog(
                [
                    EpochLoss(int(r["epoch"]), *(float(r[c]) for c in TrainLog.COLUMNS[1:]))
                    for r in reader
                ]
            )


def domain_patches(
    domain: DomainDataset, stft: StftConfig, cfg: TrainConfig
) -> np.ndarray:
    """All patches of a domain as a `[N, 1, patch_freq, patch_time]` float32 array, in clip order."""
    specs = ordered_map(lambda c: stft_log_spectrogram(c, stft), domain.clips)
    patches = [
        p.bins for s in specs for p in extract_patches(s, cfg.patch, cfg.patch_stride)
    ]
    if not patches:
        return np.zeros((0, 1) + cfg.patch, dtype=np.float32)
    return np.stack(patches)[:, None].astype(np.float32)


def _check_domains(a: DomainDataset, b: DomainDataset, mode: TrainMode) -> None:
    if not a.clips or not b.clips:
        raise InsufficientDataError(
            f"Cannot train on empty domains ({a.domain_id}: {len(a.clips)} clips, "
            f"{b.domain_id}: {len(b.clips)} clips)"
        )
    if mode is TrainMode.UNPAIRED:
        check_unpaired(a, b)
    elif a.source_ids != b.source_ids:
        raise PairingViolationError(
            f"Paired training needs aligned domains; {a.domain_id} and {b.domain_id} "
            "render different source clips"
        )


def _batches(n_a: int, n_b: int, cfg: TrainConfig, rng: np.random.Generator):
    """Index batches for one epoch. Paired mode draws the same indices from both sides."""
    n = min(n_a, n_b) if cfg.mode is TrainMode.PAIRED else max(n_a, n_b)
    order_a = rng.permutation(n_a if cfg.mode is TrainMode.UNPAIRED else n)
    order_b = order_a if cfg.mode is TrainMode.PAIRED else rng.permutation(n_b)
    batches = []
    for start in range(0, n, cfg.batch_size):
        idx = np.arange(start, min(start + cfg.batch_size, n))
        # Train-mode BatchNorm cannot run on a single sample.
        if len(idx) < 2:
            continue
        batches.append((order_a[idx % n_a], order_b[idx % n_b]))
    return batches


def discriminator_losses(
    model: CycleGanModel,
    real_a: torch.Tensor,
    real_b: torch.Tensor,
    fake_a: torch.Tensor,
    fake_b: torch.Tensor,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Least-squares losses of both discriminators; the fakes are scored detached."""
    l_d_a = loss_discriminator(model.d_a(fake_a.detach()), model.d_a(real_a))
    l_d_b = loss_discriminator(model.d_b(fake_b.detach()), model.d_b(real_b))
    return l_d_a, l_d_b


def generator_losses(
    model: CycleGanModel,
    real_a: torch.Tensor,
    real_b: torch.Tensor,
    cfg: TrainConfig,
    fakes: Optional[Tuple[torch.Tensor, torch.Tensor]] = None,
) -> Dict[str, torch.Tensor]:
    """Loss terms of both generators on one batch; `total` is the weighted objective.

    `fakes` is `(fake_a, fake_b)` when the generators already ran on this batch.
    """
    if fakes is None:
        fakes = (model.g_ba(real_b), model.g_ab(real_a))
    fake_a, fake_b = fakes
    terms = {
        "L_adv_ab": loss_adv_generator(model.d_b(fake_b)),
        "L_adv_ba": loss_adv_generator(model.d_a(fake_a)),
        "L_cycle": torch.zeros(()),
        "L_id": torch.zeros(()),
    }
    if cfg.beta > 0:
        terms["L_cycle"] = loss_cycle(real_a, model.g_ba(fake_b)) + loss_cycle(
            real_b, model.g_ab(fake_a)
        )
    if cfg.gamma > 0:
        terms["L_id"] = loss_identity(real_b, model.g_ab(real_b)) + loss_identity(
            real_a, model.g_ba(real_a)
        )
    paired = None
    if cfg.mode is TrainMode.PAIRED:
        paired = l1_mean(fake_b, real_b) + l1_mean(fake_a, real_a)
    terms["total"] = total_generator_loss(
        GeneratorLossParts(
            terms["L_adv_ab"] + terms["L_adv_ba"], terms["L_cycle"], terms["L_id"], paired
        ),
        cfg,
    )
    return terms


def _step(
    model: CycleGanModel,
    real_a: torch.Tensor,
    real_b: torch.Tensor,
    cfg: TrainConfig,
    opt_g,
    opt_d,
) -> Tuple[float, ...]:
    # One generator pass per batch: BatchNorm running statistics move once.
    fake_b = model.g_ab(real_a)
    fake_a = model.g_ba(real_b)

    opt_d.zero_grad()
    l_d_a, l_d_b = discriminator_losses(model, real_a, real_b, fake_a, fake_b)
    (l_d_a + l_d_b).backward()
    opt_d.step()

    opt_g.zero_grad()
    terms = generator_losses(model, real_a, real_b, cfg, (fake_a, fake_b))
    terms["total"].backward()
    opt_g.step()

    return tuple(
        float(terms[k]) for k in ("L_adv_ab", "L_adv_ba", "L_cycle", "L_id")
    ) + (float(l_d_a), float(l_d_b), float(terms["total"]))


def train(
    domain_a: DomainDataset,
    domain_b: DomainDataset,
    cfg: TrainConfig,
    stft: StftConfig = StftConfig(),
    on_epoch_end: Optional[Callable[[CycleGanModel, EpochLoss], bool]] = None,
) -> Tuple[CycleGanModel, TrainLog]:
    """Learn A->B and B->A translators. `on_epoch_end` returning True stops training early."""
    _check_domains(domain_a, domain_b, cfg.mode)
    deterministic(cfg.seed)

    patches_a = domain_patches(domain_a, stft, cfg)
    patches_b = domain_patches(domain_b, stft, cfg)
    if min(len(patches_a), len(patches_b)) < 2:
        raise InsufficientDataError(
            f"Need >= 2 patches per domain, got {len(patches_a)} and {len(patches_b)}"
        )
    GAN_LOG.info(
        f"Training {cfg.mode} {domain_a.domain_id} -> {domain_b.domain_id} on "
        f"{len(patches_a)} + {len(patches_b)} patches of {cfg.patch}"
    )

    model = CycleGanModel(domain_a.domain_id, domain_b.domain_id, stft, cfg.patch)
    opt_g = make_adam(
        list(model.g_ab.parameters()) + list(model.g_ba.parameters()), cfg.adam
    )
    opt_d = make_adam(
        list(model.d_a.parameters()) + list(model.d_b.parameters()), cfg.adam
    )
    tensor_a = torch.from_numpy(patches_a)
    tensor_b = torch.from_numpy(patches_b)
    rng = np.random.default_rng(cfg.seed)
    log = TrainLog()

    for epoch in range(1, cfg.epochs + 1):
        for net in model.networks.values():
            net.train()
        sums = np.zeros(7)
        batches = _batches(len(patches_a), len(patches_b), cfg, rng)
        for idx_a, idx_b in batches:
            sums += _step(
                model,
                tensor_a[torch.from_numpy(idx_a)],
                tensor_b[torch.from_numpy(idx_b)],
                cfg,
                opt_g,
                opt_d,
            )
        means = sums / max(len(batches), 1)
        row = EpochLoss(epoch, *(float(v) for v in means))
        log.append(row)
        GAN_LOG.info(
            f"epoch {epoch}/{cfg.epochs} "
            + " ".join(f"{k}={getattr(row, k):.4f}" for k in TrainLog.COLUMNS[1:])
        )
        if on_epoch_end is not None and on_epoch_end(model, row):
            GAN_LOG.info(f"Stopped after epoch {epoch} by callback")
            break

    return model.freeze(), log
