"""Weighted multi-task pre-training loss used to aggregate BLEURT-style supervision signals."""

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from biopars.errors import SpecError

LossKind = Literal["l2", "xent"]


@dataclass(frozen=True)
class PretrainLossSpec:
    """
    K tasks over M examples.

    signals[k] and predictions[k] have shape (M,) or (M, c). For ``l2`` tasks
    the loss is the squared Euclidean distance; for ``xent`` tasks the signal
    is a target distribution and the prediction a probability vector.
    """

    weights: Sequence[float]
    kinds: Sequence[LossKind]
    signals: Sequence[np.ndarray]
    predictions: Sequence[np.ndarray]

    def __post_init__(self):
        k = len(self.weights)
        if not (len(self.kinds) == len(self.signals) == len(self.predictions) == k):
            raise SpecError("weights, kinds, signals and predictions must list the same tasks")
        if any(w < 0.0 for w in self.weights):
            raise SpecError("task weights must be non-negative")
        m = None
        for kind, tau, pred in zip(self.kinds, self.signals, self.predictions):
            tau, pred = np.asarray(tau), np.asarray(pred)
            if kind not in ("l2", "xent"):
                raise SpecError(f"unknown loss kind {kind!r}")
            if tau.shape != pred.shape or tau.ndim not in (1, 2):
                raise SpecError(f"signal {tau.shape} and prediction {pred.shape} do not match")
            if kind == "xent" and (tau.ndim != 2 or np.any(pred <= 0.0) or np.any(pred > 1.0)):
                raise SpecError("cross-entropy tasks need (M, c) probability vectors in (0, 1]")
            if m is not None and tau.shape[0] != m:
                raise SpecError("all tasks must cover the same examples")
            m = tau.shape[0]
        if not m:
            raise SpecError("at least one example is required")

    @property
    def examples(self) -> int:
        return int(np.asarray(self.signals[0]).shape[0])


def task_losses(kind: LossKind, signal: np.ndarray, prediction: np.ndarray) -> np.ndarray:
    """Per-example loss of one task, shape (M,)."""
    signal = np.asarray(signal, dtype=np.float64)
    prediction = np.asarray(prediction, dtype=np.float64)
    if kind == "l2":
        diff = (signal - prediction).reshape(signal.shape[0], -1)
        return np.sum(diff * diff, axis=1)
    return -np.sum(signal * np.log(prediction), axis=1)


def bleurt_pretrain_loss(spec: PretrainLossSpec) -> float:
    """(1/M) sum_m sum_k gamma_k * loss_k(tau_k^m, pred_k^m)."""
    total = np.zeros(spec.examples)
    for weight, kind, tau, pred in zip(spec.weights, spec.kinds, spec.signals, spec.predictions):
        total = total + weight * task_losses(kind, tau, pred)
    return float(np.mean(total))
