"""
Gated-attention encoder block

    X' = CEMA(Norm(X))
    Z' = l2norm(X' Wz + bz)
    Q = kq * Z' + mq,  K = kk * Z' + mk,  V = swish(X' Wv + bv)
    O = chunked softmax(Q K^T) V
    A = u * swish(X' Wh + (r * O) Wo + bh) + (1 - u) * X'
    Y^ = A + X
    Y = FFN(LayerNorm(Y^)) + Y^

with reset gate r = sigmoid(X' Wr + br) and update gate u = sigmoid(X' Wu + bu).
The block is written once against the autodiff tape; encoder_block() runs it on
a tape without gradients.
"""

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from biopars.config import DEFAULT_CHUNK, DEFAULT_EMA_EXPANSION, L2_NORM_EPS, TIMESTEP_NORM_EPS
from biopars.errors import DimensionError, ParameterError, StateError
from biopars.models import autodiff as ad
from biopars.models.attention import OpCounter
from biopars.models.ema import CEMA_PARAM_NAMES, CemaParams, EmaState, cema_apply, init_cema_params
from biopars.models.norms import NormState, default_groups
from biopars.models.tensor import Rng, Tensor, l2_normalize_rows, matmul, sigmoid, swish


@dataclass(frozen=True)
class BlockConfig:
    """Widths and options of one encoder block; z defaults to d // 2 and v to d."""

    d: int
    h: int = DEFAULT_EMA_EXPANSION
    z: Optional[int] = None
    v: Optional[int] = None
    chunk: int = DEFAULT_CHUNK
    norm: Literal["timestep", "layer"] = "timestep"
    groups: Optional[int] = None
    eps: float = TIMESTEP_NORM_EPS
    causal: bool = True

    def __post_init__(self):
        if self.z is None:
            object.__setattr__(self, "z", max(1, self.d // 2))
        if self.v is None:
            object.__setattr__(self, "v", self.d)
        if self.groups is None:
            object.__setattr__(self, "groups", default_groups(self.d))
        for name in ("d", "h", "z", "v", "chunk", "groups"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.norm not in ("timestep", "layer"):
            raise ParameterError(f"unknown norm {self.norm!r}")
        if self.d % self.groups != 0:
            raise ParameterError(f"d={self.d} is not divisible by groups={self.groups}")

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        """Parameter names and shapes in declaration order."""
        d, h, z, v = self.d, self.h, self.z, self.v
        shapes = {f"cema.{name}": (d, h) for name in CEMA_PARAM_NAMES}
        shapes.update(
            {
                "attn.wz": (d, z),
                "attn.bz": (z,),
                "attn.kq": (z,),
                "attn.mq": (z,),
                "attn.kk": (z,),
                "attn.mk": (z,),
                "attn.wv": (d, v),
                "attn.bv": (v,),
                "attn.wr": (d, v),
                "attn.br": (v,),
                "attn.wu": (d, d),
                "attn.bu": (d,),
                "attn.wh": (d, d),
                "attn.bh": (d,),
                "attn.wo": (v, d),
                "norm1.gain": (d,),
                "norm1.bias": (d,),
                "norm2.gain": (d,),
                "norm2.bias": (d,),
                "ffn.w1": (d, 2 * d),
                "ffn.b1": (2 * d,),
                "ffn.w2": (2 * d, d),
                "ffn.b2": (d,),
            }
        )
        return shapes

    def boundary_doubles(self) -> int:
        """Size of the state one block hands to the next shard."""
        norm = 3 * self.groups if self.norm == "timestep" else 0
        return 2 * self.d * self.h + norm


@dataclass(frozen=True)
class AttnParams:
    wz: Tensor
    bz: Tensor
    kq: Tensor
    mq: Tensor
    kk: Tensor
    mk: Tensor
    wv: Tensor
    bv: Tensor
    wr: Tensor
    br: Tensor
    wu: Tensor
    bu: Tensor
    wh: Tensor
    bh: Tensor
    wo: Tensor

    @classmethod
    def from_block(cls, params: dict[str, Tensor]) -> "AttnParams":
        return cls(**{name: params[f"attn.{name}"] for name in cls.__dataclass_fields__})


@dataclass(frozen=True)
class BlockState:
    """What one block carries from a prefix of the sequence into the rest of it."""

    ema: EmaState
    norm: Optional[NormState] = field(default=None)

    @classmethod
    def initial(cls, cfg: BlockConfig) -> "BlockState":
        norm = NormState.empty(cfg.groups) if cfg.norm == "timestep" else None
        return cls(EmaState.zeros(cfg.d, cfg.h), norm)

    def to_bytes(self) -> bytes:
        return self.ema.to_bytes() + (self.norm.to_bytes() if self.norm is not None else b"")

    @classmethod
    def from_bytes(cls, payload: bytes, cfg: BlockConfig) -> "BlockState":
        ema_size = 16 * cfg.d * cfg.h
        ema = EmaState.from_bytes(payload[:ema_size], cfg.d, cfg.h)
        if cfg.norm != "timestep":
            if len(payload) != ema_size:
                raise StateError(f"block state payload has {len(payload) - ema_size} unexpected bytes")
            return cls(ema)
        return cls(ema, NormState.from_bytes(payload[ema_size:], cfg.groups))


def init_block_params(cfg: BlockConfig, rng: Rng) -> dict[str, Tensor]:
    """Seeded initial parameters in declaration order."""
    d, z, v = cfg.d, cfg.z, cfg.v
    params = {f"cema.{k}": val for k, val in init_cema_params(d, cfg.h, rng.child(0)).items()}
    w = rng.child(1)
    params.update(
        {
            "attn.wz": w.normal((d, z), 1.0 / np.sqrt(d)),
            "attn.bz": np.zeros(z),
            "attn.kq": 1.0 + w.normal(z, 0.1),
            "attn.mq": w.normal(z, 0.02),
            "attn.kk": 1.0 + w.normal(z, 0.1),
            "attn.mk": w.normal(z, 0.02),
            "attn.wv": w.normal((d, v), 1.0 / np.sqrt(d)),
            "attn.bv": np.zeros(v),
            "attn.wr": w.normal((d, v), 1.0 / np.sqrt(d)),
            "attn.br": np.zeros(v),
            "attn.wu": w.normal((d, d), 1.0 / np.sqrt(d)),
            "attn.bu": np.zeros(d),
            "attn.wh": w.normal((d, d), 1.0 / np.sqrt(d)),
            "attn.bh": np.zeros(d),
            "attn.wo": w.normal((v, d), 1.0 / np.sqrt(v)),
            "norm1.gain": np.ones(d),
            "norm1.bias": np.zeros(d),
            "norm2.gain": np.ones(d),
            "norm2.bias": np.zeros(d),
            "ffn.w1": w.normal((d, 2 * d), 1.0 / np.sqrt(d)),
            "ffn.b1": np.zeros(2 * d),
            "ffn.w2": w.normal((2 * d, d), 1.0 / np.sqrt(2 * d)),
            "ffn.b2": np.zeros(d),
        }
    )
    check_block_params(cfg, params)
    return params


def check_block_params(cfg: BlockConfig, params: dict[str, Tensor]) -> None:
    for name, shape in cfg.param_shapes().items():
        if name not in params:
            raise ParameterError(f"missing block parameter {name}")
        if params[name].shape != shape:
            raise DimensionError(f"{name} has shape {params[name].shape}, expected {shape}")
        if not np.all(np.isfinite(params[name])):
            raise ParameterError(f"{name} contains non-finite values")


# --- Public single-purpose operations ---


def shared_representation(
    x: Tensor, cema: CemaParams, wz: Tensor, bz: Tensor, s0: EmaState | None = None
) -> tuple[Tensor, Tensor, EmaState]:
    """
    Contextualize x with the CEMA and project it to the unit-norm shared vector Z'.

    Returns:
        X' (n, d), Z' (n, z) and the CEMA state after the last token
    """
    xp, state = cema_apply(x, cema, s0)
    zprime = l2_normalize_rows(matmul(xp, wz) + bz, L2_NORM_EPS)
    return xp, zprime, state


def gated_merge(xp: Tensor, o: Tensor, gates: AttnParams) -> Tensor:
    """Merge the attention output into the contextualized stream with reset/update gates."""
    r = sigmoid(matmul(xp, gates.wr) + gates.br)
    u = sigmoid(matmul(xp, gates.wu) + gates.bu)
    candidate = swish(matmul(xp, gates.wh) + matmul(r * o, gates.wo) + gates.bh)
    return u * candidate + (1.0 - u) * xp


# --- The block on a tape ---


def _gated_merge(xp: ad.Var, o: ad.Var, p: dict[str, ad.Var]) -> ad.Var:
    r = ad.sigmoid(xp @ p["attn.wr"] + p["attn.br"])
    u = ad.sigmoid(xp @ p["attn.wu"] + p["attn.bu"])
    candidate = ad.swish(xp @ p["attn.wh"] + (r * o) @ p["attn.wo"] + p["attn.bh"])
    return u * candidate + (1.0 - u) * xp


def block_forward(
    x: ad.Var,
    p: dict[str, ad.Var],
    cfg: BlockConfig,
    state: BlockState | None = None,
    counter: OpCounter | None = None,
) -> tuple[ad.Var, BlockState]:
    """
    Encoder block on the tape of x.

    Args:
        x: Input (n, d)
        p: Block parameters as tape variables, keyed as in BlockConfig.param_shapes()
        cfg: Block configuration
        state: Carried-in CEMA and TimestepNorm state
        counter: Optional attention multiply-add counter

    Returns:
        Output (n, d) and the block state after the last token
    """
    if x.shape[-1] != cfg.d:
        raise DimensionError(f"block input has width {x.shape[-1]}, expected {cfg.d}")
    state = state or BlockState.initial(cfg)

    if cfg.norm == "timestep":
        normed, norm_state = ad.timestep_norm(x, p["norm1.gain"], p["norm1.bias"], cfg.groups, cfg.eps, state.norm)
    else:
        normed, norm_state = ad.layer_norm(x, p["norm1.gain"], p["norm1.bias"], cfg.eps), None

    xp, ema_state = ad.cema_scan(normed, *(p[f"cema.{name}"] for name in CEMA_PARAM_NAMES), s0=state.ema)
    zprime = ad.l2_normalize_rows(xp @ p["attn.wz"] + p["attn.bz"], L2_NORM_EPS)
    q = p["attn.kq"] * zprime + p["attn.mq"]
    k = p["attn.kk"] * zprime + p["attn.mk"]
    v = ad.swish(xp @ p["attn.wv"] + p["attn.bv"])
    o = ad.chunked_attention(q, k, v, cfg.chunk, cfg.causal, counter)
    y_hat = _gated_merge(xp, o, p) + x

    hidden = ad.swish(ad.layer_norm(y_hat, p["norm2.gain"], p["norm2.bias"], cfg.eps) @ p["ffn.w1"] + p["ffn.b1"])
    y = hidden @ p["ffn.w2"] + p["ffn.b2"] + y_hat
    return y, BlockState(ema_state, norm_state)


def encoder_block(
    x: Tensor,
    params: dict[str, Tensor],
    cfg: BlockConfig,
    state: BlockState | None = None,
    counter: OpCounter | None = None,
) -> tuple[Tensor, BlockState]:
    """Forward pass of one block without recording gradients."""
    check_block_params(cfg, params)
    tape = ad.Tape(requires_grad=False)
    leaves = {name: tape.leaf(value, name) for name, value in params.items()}
    y, state_out = block_forward(tape.constant(x), leaves, cfg, state, counter)
    return y.value, state_out
