"""
Streaming normalizers: TimestepNorm and layer normalization.

TimestepNorm standardizes each token with the running mean and variance of its
feature group over every token seen so far, so it is causal and can be carried
across chunk or shard boundaries with a NormState.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from biopars.config import TIMESTEP_NORM_EPS
from biopars.errors import DimensionError, ParameterError, StateError
from biopars.models.tensor import Tensor, sum_last

logger = logging.getLogger(__name__)

NORM_STATE_DTYPE = np.dtype([("count", "<u8"), ("mean", "<f8"), ("m2", "<f8")])


def default_groups(d: int) -> int:
    """Largest divisor of d not above d // 8 (at least 1)."""
    target = max(1, d // 8)
    for g in range(target, 0, -1):
        if d % g == 0:
            return g
    return 1


@dataclass(frozen=True)
class NormState:
    """Per-group running statistics: token-feature count, mean and sum of squared deviations."""

    count: np.ndarray
    mean: Tensor
    m2: Tensor

    def __post_init__(self):
        if not (self.count.shape == self.mean.shape == self.m2.shape) or self.count.ndim != 1:
            raise StateError("count, mean and m2 must be vectors of equal length")
        if np.any(self.m2 < 0.0):
            raise StateError("m2 must be non-negative")

    @classmethod
    def empty(cls, groups: int) -> "NormState":
        return cls(np.zeros(groups, dtype=np.uint64), np.zeros(groups), np.zeros(groups))

    @property
    def groups(self) -> int:
        return self.count.shape[0]

    def merge(self, other: "NormState") -> "NormState":
        """Statistics of this prefix followed by the other (Chan et al. parallel update)."""
        if other.groups != self.groups:
            raise StateError(f"cannot merge states with {self.groups} and {other.groups} groups")
        na = self.count.astype(np.float64)
        nb = other.count.astype(np.float64)
        n = na + nb
        safe = np.where(n > 0, n, 1.0)
        delta = other.mean - self.mean
        mean = np.where(n > 0, self.mean + delta * nb / safe, 0.0)
        m2 = np.where(n > 0, self.m2 + other.m2 + delta * delta * na * nb / safe, 0.0)
        return NormState(self.count + other.count, mean, m2)

    def variance(self) -> Tensor:
        n = self.count.astype(np.float64)
        return np.where(n > 0, self.m2 / np.where(n > 0, n, 1.0), 0.0)

    def to_bytes(self) -> bytes:
        """Wire format: per group (count u64, mean f64, m2 f64), little-endian."""
        record = np.zeros(self.groups, dtype=NORM_STATE_DTYPE)
        record["count"] = self.count
        record["mean"] = self.mean
        record["m2"] = self.m2
        return record.tobytes()

    @classmethod
    def from_bytes(cls, payload: bytes, groups: int) -> "NormState":
        if len(payload) != groups * NORM_STATE_DTYPE.itemsize:
            raise StateError(f"norm state payload has {len(payload)} bytes, expected {groups * NORM_STATE_DTYPE.itemsize}")
        record = np.frombuffer(payload, dtype=NORM_STATE_DTYPE)
        return cls(
            record["count"].astype(np.uint64),
            record["mean"].astype(np.float64),
            record["m2"].astype(np.float64),
        )


@dataclass(frozen=True)
class GroupSpec:
    """Feature grouping for TimestepNorm; gain and bias default to identity."""

    groups: int
    eps: float = TIMESTEP_NORM_EPS
    gain: Optional[Tensor] = field(default=None)
    bias: Optional[Tensor] = field(default=None)

    def __post_init__(self):
        if self.groups < 1:
            raise ParameterError(f"groups must be >= 1, got {self.groups}")
        if self.eps <= 0.0:
            raise ParameterError(f"epsilon must be positive, got {self.eps}")

    def check_width(self, d: int) -> int:
        if d % self.groups != 0:
            raise DimensionError(f"feature width {d} is not divisible by {self.groups} groups")
        for name, arr in (("gain", self.gain), ("bias", self.bias)):
            if arr is not None and arr.shape != (d,):
                raise DimensionError(f"{name} has shape {arr.shape}, expected ({d},)")
        return d // self.groups


def timestep_norm(
    x: Tensor, spec: GroupSpec, s0: NormState | None = None
) -> tuple[Tensor, NormState]:
    """
    Causal per-group normalization with running statistics.

    Each token merges its group values (width d / g) into the running state;
    the token is then standardized with the updated mean and population variance.

    Args:
        x: Input of shape (n, d)
        spec: Group count, epsilon and optional affine
        s0: Statistics carried in from earlier tokens (empty when omitted)

    Returns:
        Normalized output (n, d) and the statistics after the last token
    """
    if x.ndim != 2:
        raise DimensionError(f"input has shape {x.shape}, expected (n, d)")
    n, d = x.shape
    width = spec.check_width(d)
    state = NormState.empty(spec.groups) if s0 is None else s0
    if state.groups != spec.groups:
        raise StateError(f"state carries {state.groups} groups, spec has {spec.groups}")

    batch_count = np.full(spec.groups, width, dtype=np.uint64)
    y = np.zeros(x.shape)
    for t in range(n):
        xg = x[t].reshape(spec.groups, width)
        batch_mean = sum_last(xg) / width
        dev = xg - batch_mean[:, None]
        state = state.merge(NormState(batch_count, batch_mean, sum_last(dev * dev)))
        inv_std = 1.0 / np.sqrt(state.variance() + spec.eps)
        y[t] = ((xg - state.mean[:, None]) * inv_std[:, None]).reshape(d)
    if spec.gain is not None:
        y = y * spec.gain
    if spec.bias is not None:
        y = y + spec.bias
    return y, state


def timestep_norm_backward(
    x: Tensor, spec: GroupSpec, s0: NormState | None, grad_y: Tensor
) -> dict[str, Tensor]:
    """
    Gradients of timestep_norm with respect to x, gain and bias.

    The carried-in state is treated as a constant. Running statistics are
    rewritten as prefix sums S_t (values) and P_t (squares) so that each input
    receives the reverse cumulative sum of the per-step sensitivities.
    """
    n, d = x.shape
    width = spec.check_width(d)
    g = spec.groups
    state = NormState.empty(g) if s0 is None else s0
    c0 = state.count.astype(np.float64)

    xg = x.reshape(n, g, width)
    counts = c0[None, :] + width * np.arange(1, n + 1, dtype=np.float64)[:, None]
    sums = c0 * state.mean + np.cumsum(xg.sum(axis=2), axis=0)
    squares = state.m2 + c0 * state.mean**2 + np.cumsum((xg * xg).sum(axis=2), axis=0)
    mean = sums / counts
    var = np.maximum(squares / counts - mean**2, 0.0)
    inv_std = 1.0 / np.sqrt(var + spec.eps)
    centered = xg - mean[:, :, None]
    xhat = centered * inv_std[:, :, None]

    gy = grad_y.reshape(n, g, width)
    gain = np.ones(d) if spec.gain is None else spec.gain
    g_xhat = gy * gain.reshape(g, width)

    g_x = g_xhat * inv_std[:, :, None]
    g_inv_std = np.sum(g_xhat * centered, axis=2)
    g_var = -0.5 * inv_std**3 * g_inv_std
    g_mean = -inv_std * np.sum(g_xhat, axis=2) - 2.0 * mean * g_var
    g_sums = g_mean / counts
    g_squares = g_var / counts
    tail_sums = np.cumsum(g_sums[::-1], axis=0)[::-1]
    tail_squares = np.cumsum(g_squares[::-1], axis=0)[::-1]
    g_x = g_x + tail_sums[:, :, None] + 2.0 * xg * tail_squares[:, :, None]

    return {
        "x": g_x.reshape(n, d),
        "gain": np.sum((gy * xhat).reshape(n, d), axis=0),
        "bias": np.sum(grad_y, axis=0),
    }


def layer_norm(
    x: Tensor, eps: float = TIMESTEP_NORM_EPS, gain: Optional[Tensor] = None, bias: Optional[Tensor] = None
) -> Tensor:
    """Per-token standardization over the feature axis (population variance), then affine."""
    if x.shape[-1] < 1:
        raise DimensionError("layer_norm needs at least one feature")
    d = x.shape[-1]
    mean = sum_last(x) / d
    centered = x - mean[..., None]
    var = sum_last(centered * centered) / d
    y = centered / np.sqrt(var + eps)[..., None]
    if gain is not None:
        y = y * gain
    if bias is not None:
        y = y + bias
    return y


def layer_norm_backward(
    x: Tensor, eps: float, gain: Optional[Tensor], grad_y: Tensor
) -> dict[str, Tensor]:
    d = x.shape[-1]
    mean = np.mean(x, axis=-1, keepdims=True)
    centered = x - mean
    inv_std = 1.0 / np.sqrt(np.mean(centered * centered, axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    g_xhat = grad_y * (np.ones(d) if gain is None else gain)
    g_x = inv_std * (
        g_xhat - np.mean(g_xhat, axis=-1, keepdims=True) - xhat * np.mean(g_xhat * xhat, axis=-1, keepdims=True)
    )
    return {"x": g_x, "gain": np.sum(grad_y * xhat, axis=0), "bias": np.sum(grad_y, axis=0)}
