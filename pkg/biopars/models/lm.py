"""Byte-level language model: tied embeddings, a stack of encoder blocks and a final layer norm."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from biopars.errors import DimensionError, InputError
from biopars.models import autodiff as ad
from biopars.models.attention import OpCounter
from biopars.models.block import BlockConfig, BlockState, block_forward, init_block_params
from biopars.models.tensor import Rng, Tensor

EMBED_INIT_STD = 0.02


@dataclass(frozen=True)
class ByteVocab:
    """The distinct bytes of a corpus, in increasing order."""

    symbols: bytes

    @classmethod
    def from_corpus(cls, data: bytes) -> "ByteVocab":
        symbols = bytes(sorted(set(data)))
        if len(symbols) < 2:
            raise InputError(f"corpus needs at least 2 distinct bytes, found {len(symbols)}")
        return cls(symbols)

    @property
    def size(self) -> int:
        return len(self.symbols)

    def encode(self, data: bytes) -> np.ndarray:
        lookup = {b: i for i, b in enumerate(self.symbols)}
        try:
            return np.array([lookup[b] for b in data], dtype=np.int64)
        except KeyError as e:
            raise InputError(f"byte {e.args[0]!r} is not in the vocabulary")

    def decode(self, ids) -> bytes:
        return bytes(self.symbols[i] for i in ids)


class LmModel:
    """
    Autoregressive model over a ByteVocab.

    Parameters live in one ordered dict: ``embed`` (vocab x d, also the output
    projection), ``block{i}.*`` for every block, then ``final.gain`` and ``final.bias``.
    """

    def __init__(self, vocab: ByteVocab, block: BlockConfig, blocks: int, params: dict[str, Tensor]):
        self.vocab = vocab
        self.block = block
        self.blocks = blocks
        for name, shape in self.param_shapes().items():
            if name not in params or params[name].shape != shape:
                raise DimensionError(f"parameter {name} missing or not of shape {shape}")
        self.params = {name: params[name] for name in self.param_shapes()}

    @classmethod
    def init(cls, vocab: ByteVocab, block: BlockConfig, blocks: int, seed: int = 0) -> "LmModel":
        rng = Rng(seed)
        params = {"embed": rng.child(0).normal((vocab.size, block.d), EMBED_INIT_STD)}
        for i in range(blocks):
            for name, value in init_block_params(block, rng.child(i + 1)).items():
                params[f"block{i}.{name}"] = value
        params["final.gain"] = np.ones(block.d)
        params["final.bias"] = np.zeros(block.d)
        return cls(vocab, block, blocks, params)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = {"embed": (self.vocab.size, self.block.d)}
        for i in range(self.blocks):
            shapes.update({f"block{i}.{k}": s for k, s in self.block.param_shapes().items()})
        shapes["final.gain"] = (self.block.d,)
        shapes["final.bias"] = (self.block.d,)
        return shapes

    def initial_states(self) -> list[BlockState]:
        return [BlockState.initial(self.block) for _ in range(self.blocks)]

    def forward(
        self,
        leaves: dict[str, ad.Var],
        ids: np.ndarray,
        states: Optional[list[BlockState]] = None,
        counter: OpCounter | None = None,
    ) -> tuple[ad.Var, list[BlockState]]:
        """Logits (n, vocab) on the tape of the given leaves, plus the per-block states after the last token."""
        states = states or self.initial_states()
        hidden = ad.embedding(leaves["embed"], ids)
        states_out = []
        for i in range(self.blocks):
            block_params = {k: leaves[f"block{i}.{k}"] for k in self.block.param_shapes()}
            hidden, state = block_forward(hidden, block_params, self.block, states[i], counter)
            states_out.append(state)
        normed = ad.layer_norm(hidden, leaves["final.gain"], leaves["final.bias"], self.block.eps)
        return normed @ leaves["embed"].T, states_out

    def leaves(self, tape: ad.Tape) -> dict[str, ad.Var]:
        return {name: tape.leaf(value, name) for name, value in self.params.items()}

    def logits(self, ids: np.ndarray, states: Optional[list[BlockState]] = None) -> tuple[Tensor, list[BlockState]]:
        tape = ad.Tape(requires_grad=False)
        out, states_out = self.forward(self.leaves(tape), ids, states)
        return out.value, states_out

    def window_loss(self, leaves: dict[str, ad.Var], window: np.ndarray) -> ad.Var:
        """Mean next-token cross-entropy over one window of n + 1 tokens."""
        logits, _ = self.forward(leaves, window[:-1])
        return ad.cross_entropy(logits, window[1:])

    def batch_loss(self, leaves: dict[str, ad.Var], windows: list[np.ndarray]) -> ad.Var:
        losses = [self.window_loss(leaves, w) for w in windows]
        total = losses[0]
        for loss in losses[1:]:
            total = total + loss
        return total * (1.0 / len(losses))
