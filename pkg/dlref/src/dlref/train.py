"""Per-split training with early stopping and best-epoch checkpointing.

One model is trained from scratch for every (held-out seizure, run) split:
binary cross-entropy loss, Adam with the AMSGrad variant, shuffled
mini-batches, validation loss tracked every epoch. Training stops after
``patience`` epochs without strict improvement and the returned weights
are those of the best epoch, not the last.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch.nn.functional import binary_cross_entropy_with_logits as bce_logits

from . import EmptySplitError
from .data import SegmentBatch, SplitData
from .model import CnnTransformer, ModelConfig, build_model


@dataclass(frozen=True)
class EpochRecord:
    epoch: int          # 1-based
    train_loss: float
    val_loss: float


@dataclass
class Checkpoint:
    patient: str
    seizure: int
    run: int
    state_dict: dict[str, torch.Tensor]
    best_epoch: int
    best_val_loss: float
    history: list[EpochRecord]

    def rebuild(self, config: ModelConfig) -> CnnTransformer:
        """Fresh model carrying this checkpoint's weights."""
        model = build_model(config)
        model.load_state_dict(self.state_dict)
        model.eval()
        return model


def _mean_loss(model: CnnTransformer, batch: SegmentBatch,
               batch_size: int) -> float:
    model.eval()
    total = 0.0
    with torch.no_grad():
        for lo in range(0, len(batch), batch_size):
            xb = batch.x[lo:lo + batch_size]
            yb = batch.y[lo:lo + batch_size]
            total += bce_logits(model.logits(xb), yb, reduction="sum").item()
    return total / len(batch)


def train_split(split: SplitData, config: ModelConfig,
                seed: int = 0) -> Checkpoint:
    """Train one model on one split; returns the lowest-val-loss weights."""
    if len(split.train) == 0 or len(split.validation) == 0:
        raise EmptySplitError(
            f"{split.patient} seizure {split.seizure} run {split.run}: "
            f"{len(split.train)} train / {len(split.validation)} validation "
            "segments")
    torch.manual_seed(seed)
    model = build_model(config)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr, amsgrad=True)
    shuffler = torch.Generator().manual_seed(seed)

    best_state: dict[str, torch.Tensor] = {}
    best_val = float("inf")
    best_epoch = 0
    history: list[EpochRecord] = []
    since_best = 0
    n = len(split.train)
    for epoch in range(1, config.max_epochs + 1):
        model.train()
        order = torch.randperm(n, generator=shuffler)
        running = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            opt.zero_grad()
            loss = bce_logits(model.logits(split.train.x[idx]),
                              split.train.y[idx])
            loss.backward()
            opt.step()
            running += loss.item() * len(idx)
        val = _mean_loss(model, split.validation, config.batch_size)
        history.append(EpochRecord(epoch, running / n, val))
        if val < best_val:
            best_val = val
            best_epoch = epoch
            best_state = {k: v.detach().clone()
                          for k, v in model.state_dict().items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    return Checkpoint(patient=split.patient, seizure=split.seizure,
                      run=split.run, state_dict=best_state,
                      best_epoch=best_epoch, best_val_loss=best_val,
                      history=history)


def train_loocv(splits: list[SplitData], config: ModelConfig,
                seed: int = 0) -> dict[tuple[int, int], Checkpoint]:
    """Train every split; checkpoints keyed by (held-out seizure, run).

    Per-split seeds are derived from the base seed and the key, so one
    split retrains identically no matter which subset of splits runs.
    """
    if not splits:
        raise EmptySplitError("no splits to train")
    checkpoints = {}
    for split in splits:
        split_seed = int(np.random.SeedSequence(
            [seed, split.seizure, split.run]).generate_state(1)[0])
        checkpoints[(split.seizure, split.run)] = train_split(
            split, config, seed=split_seed)
    return checkpoints
