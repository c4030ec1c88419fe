"""
Desk-scale autoregressive training with Adam.

Every step draws a batch of windows, takes the mean next-token cross-entropy on
one tape and applies one Adam update. The run is deterministic given the seed.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

from biopars.config import TrainConfig
from biopars.errors import InputError, TrainingError
from biopars.models import autodiff as ad
from biopars.models.block import BlockConfig
from biopars.models.lm import ByteVocab, LmModel
from biopars.models.tensor import Rng, Tensor
from biopars.training.corpus import sample_batch

logger = logging.getLogger(__name__)


class Adam:
    """Adam with bias correction over a dict of parameters."""

    def __init__(self, params: dict[str, Tensor], lr: float, beta1: float, beta2: float, eps: float):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, Tensor], grads: dict[str, Tensor]) -> dict[str, Tensor]:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        updated = {}
        for name, value in params.items():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            updated[name] = value - self.lr * (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.eps)
        return updated


@dataclass
class TrainResult:
    model: LmModel
    history: list[float] = field(default_factory=list)
    eval_loss: float = float("nan")

    @property
    def eval_perplexity(self) -> float:
        return math.exp(self.eval_loss)


def build_model(cfg: TrainConfig, vocab: ByteVocab) -> LmModel:
    block = BlockConfig(d=cfg.d, h=cfg.h, z=cfg.z, v=cfg.v, chunk=cfg.chunk, norm=cfg.norm, groups=cfg.groups)
    return LmModel.init(vocab, block, cfg.blocks, seed=cfg.seed)


def evaluate_loss(model: LmModel, windows: list[np.ndarray]) -> float:
    """Mean next-token cross-entropy over the windows, without gradients."""
    if not windows:
        raise InputError("cannot evaluate on an empty corpus")
    tape = ad.Tape(requires_grad=False)
    return float(model.batch_loss(model.leaves(tape), windows).value)


def perplexity(model: LmModel, windows: list[np.ndarray]) -> float:
    """exp of the mean next-token cross-entropy."""
    return math.exp(evaluate_loss(model, windows))


def train(model: LmModel, windows: list[np.ndarray], cfg: TrainConfig, progress: bool = True) -> TrainResult:
    """
    Train the model in place.

    Args:
        model: Model whose parameters are updated
        windows: Token windows of length window + 1
        cfg: Steps, optimizer settings and seed
        progress: Show a tqdm progress bar

    Returns:
        Loss per step (before that step's update) and the final loss over all windows

    Raises:
        TrainingError: A step produced a non-finite loss
    """
    if not windows:
        raise InputError("corpus yields no training window")
    rng = Rng(cfg.seed).child(7)
    optimizer = Adam(model.params, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    result = TrainResult(model)

    for step in tqdm(range(cfg.steps), desc="Training", disable=not progress):
        batch = sample_batch(windows, cfg.batch_windows, rng)
        tape = ad.Tape()
        loss = model.batch_loss(model.leaves(tape), batch)
        value = float(loss.value)
        if not math.isfinite(value):
            raise TrainingError(f"non-finite loss {value} at step {step}", step=step)
        grads = tape.backward(loss)
        model.params = optimizer.step(model.params, grads)
        result.history.append(value)
        if (step + 1) % cfg.log_every == 0 or step == 0:
            logger.info("step %d/%d loss %.4f", step + 1, cfg.steps, value)

    result.eval_loss = evaluate_loss(model, windows)
    logger.info("final loss %.4f (perplexity %.3f)", result.eval_loss, result.eval_perplexity)
    return result


def write_loss_history(history: list[float], path: str | Path) -> None:
    """Loss history as a CSV with columns step,loss (steps count from 1)."""
    frame = pd.DataFrame({"step": range(1, len(history) + 1), "loss": [repr(v) for v in history]})
    frame.to_csv(path, index=False, lineterminator="\n")
