"""
Simulated sequence-parallel forward pass

Workers own contiguous, chunk-aligned shards of the token sequence and run
left to right. The only thing a worker hands to its right neighbour is one
serialized boundary message: the CEMA state and the TimestepNorm statistics of
every block. Attention never crosses a chunk boundary, so the stitched logits
are bit-identical to a single-worker forward pass.
"""

import logging
import queue
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from biopars.errors import AlignmentError, ParameterError
from biopars.models.block import BlockState
from biopars.models.lm import LmModel
from biopars.models.tensor import Tensor

logger = logging.getLogger(__name__)

# Simulated cost model, in abstract time units
TOKEN_COST = 1.0
BYTE_COST = 0.001


@dataclass(frozen=True)
class BoundaryMessage:
    """Serialized per-block states crossing one shard boundary."""

    sender: int
    payload: bytes

    @classmethod
    def pack(cls, sender: int, states: list[BlockState]) -> "BoundaryMessage":
        return cls(sender, b"".join(s.to_bytes() for s in states))

    def unpack(self, model: LmModel) -> list[BlockState]:
        size = len(self.payload) // model.blocks
        return [BlockState.from_bytes(self.payload[i * size : (i + 1) * size], model.block) for i in range(model.blocks)]


@dataclass
class WorkerShard:
    index: int
    start: int
    end: int
    inbound: Optional[BoundaryMessage] = None
    outbound: Optional[BoundaryMessage] = None
    received_at: float = 0.0
    finished_at: float = 0.0


@dataclass
class ParallelRun:
    logits: Tensor
    shards: list[WorkerShard] = field(default_factory=list)

    @property
    def bytes_sent(self) -> int:
        return sum(len(s.outbound.payload) for s in self.shards if s.outbound is not None)


def message_doubles(model: LmModel) -> int:
    """Values in one boundary message: per block 2*d*h EMA doubles and 3 per norm group."""
    return model.blocks * model.block.boundary_doubles()


def shard_bounds(n: int, chunk: int, workers: int) -> list[int]:
    """Split n tokens into `workers` shards of whole chunks, as even as possible."""
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    chunks = -(-n // chunk)
    if workers > chunks:
        raise ParameterError(f"{workers} workers for {chunks} chunks would leave a worker idle")
    per, extra = divmod(chunks, workers)
    bounds, at = [0], 0
    for w in range(workers):
        at += (per + (1 if w < extra else 0)) * chunk
        bounds.append(min(at, n))
    return bounds


def check_bounds(bounds: list[int], n: int, chunk: int) -> None:
    if bounds[0] != 0 or bounds[-1] != n:
        raise AlignmentError(f"shards must cover [0, {n}), got {bounds[0]}..{bounds[-1]}")
    for b, nxt in zip(bounds[:-1], bounds[1:]):
        if nxt <= b:
            raise AlignmentError(f"empty or reversed shard at boundary {nxt}", boundary=nxt)
    for b in bounds[1:-1]:
        if b % chunk != 0:
            raise AlignmentError(f"shard boundary {b} is not a multiple of the chunk length {chunk}", boundary=b)


def _run_shard(model: LmModel, ids: np.ndarray, shard: WorkerShard) -> Tensor:
    states = shard.inbound.unpack(model) if shard.inbound is not None else None
    logits, states_out = model.logits(ids[shard.start : shard.end], states)
    shard.outbound = BoundaryMessage.pack(shard.index, states_out)
    shard.finished_at = shard.received_at + TOKEN_COST * (shard.end - shard.start)
    return logits


def forward_sequence_parallel(
    model: LmModel,
    ids: np.ndarray,
    workers: int = 1,
    bounds: Optional[list[int]] = None,
    threaded: bool = False,
) -> ParallelRun:
    """
    Forward pass with the sequence split across simulated workers.

    Args:
        model: The language model
        ids: Token ids (n,)
        workers: Number of workers, used when bounds is not given
        bounds: Explicit shard boundaries [0, b1, ..., n]
        threaded: Run every worker on its own thread, linked by queues

    Returns:
        Stitched logits (n, vocab) and the per-shard trace

    Raises:
        AlignmentError: An inner boundary is not a multiple of the chunk length
    """
    n, chunk = len(ids), model.block.chunk
    bounds = list(bounds) if bounds is not None else shard_bounds(n, chunk, workers)
    check_bounds(bounds, n, chunk)
    shards = [WorkerShard(i, s, e) for i, (s, e) in enumerate(zip(bounds[:-1], bounds[1:]))]

    if threaded:
        outputs = _run_threaded(model, ids, shards)
    else:
        outputs = []
        for i, shard in enumerate(shards):
            if i > 0:
                shard.inbound = shards[i - 1].outbound
                shard.received_at = shards[i - 1].finished_at + BYTE_COST * len(shard.inbound.payload)
            outputs.append(_run_shard(model, ids, shard))

    run = ParallelRun(np.concatenate(outputs, axis=0), shards)
    logger.debug("sequence-parallel forward over %d workers, %d bytes sent", len(shards), run.bytes_sent)
    return run


def _run_threaded(model: LmModel, ids: np.ndarray, shards: list[WorkerShard]) -> list[Tensor]:
    links = [queue.Queue(maxsize=1) for _ in shards]
    outputs: list[Optional[Tensor]] = [None] * len(shards)
    errors: list[BaseException] = []

    def worker(i: int):
        shard = shards[i]
        try:
            if i > 0:
                message, sent_at = links[i - 1].get()
                if message is None:
                    links[i].put((None, 0.0))
                    return
                shard.inbound = message
                shard.received_at = sent_at + BYTE_COST * len(message.payload)
            outputs[i] = _run_shard(model, ids, shard)
            links[i].put((shard.outbound, shard.finished_at))
        except BaseException as e:
            errors.append(e)
            links[i].put((None, 0.0))

    threads = [threading.Thread(target=worker, args=(i,), name=f"shard-{i}") for i in range(len(shards))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    return outputs
