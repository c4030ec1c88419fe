"""
Single-file parameter checkpoint

Layout (all little-endian):
    magic        6 bytes   b"BPARS1"
    header      10 x i64   vocab, d, h, z, v, blocks, chunk, groups, norm (0 timestep, 1 layer), causal
    eps          1 x f64
    vocab        vocab x u8
    parameters   f64       every parameter flattened, in declaration order
"""

import logging
from pathlib import Path

import numpy as np

from biopars.config import CHECKPOINT_MAGIC
from biopars.errors import InputError
from biopars.models.block import BlockConfig
from biopars.models.lm import ByteVocab, LmModel

logger = logging.getLogger(__name__)

NORM_CODES = {"timestep": 0, "layer": 1}
HEADER_INTS = 10


def save_checkpoint(model: LmModel, path: str | Path) -> None:
    cfg = model.block
    header = np.array(
        [
            model.vocab.size,
            cfg.d,
            cfg.h,
            cfg.z,
            cfg.v,
            model.blocks,
            cfg.chunk,
            cfg.groups,
            NORM_CODES[cfg.norm],
            int(cfg.causal),
        ],
        dtype="<i8",
    )
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(header.tobytes())
        f.write(np.array([cfg.eps], dtype="<f8").tobytes())
        f.write(model.vocab.symbols)
        for value in model.params.values():
            f.write(np.ascontiguousarray(value, dtype="<f8").tobytes())
    logger.info("Saved checkpoint with %d parameters to %s", sum(v.size for v in model.params.values()), path)


def load_checkpoint(path: str | Path) -> LmModel:
    with open(path, "rb") as f:
        payload = f.read()
    if not payload.startswith(CHECKPOINT_MAGIC):
        raise InputError(f"{path} is not a checkpoint (bad magic)")
    offset = len(CHECKPOINT_MAGIC)
    if len(payload) < offset + 8 * (HEADER_INTS + 1):
        raise InputError(f"{path} is truncated in the header")
    header = np.frombuffer(payload, dtype="<i8", count=HEADER_INTS, offset=offset)
    offset += 8 * HEADER_INTS
    eps = float(np.frombuffer(payload, dtype="<f8", count=1, offset=offset)[0])
    offset += 8
    vocab_size, d, h, z, v, blocks, chunk, groups, norm, causal = (int(x) for x in header)
    if norm not in NORM_CODES.values() or len(payload) < offset + vocab_size:
        raise InputError(f"{path} has a malformed header")
    vocab = ByteVocab(payload[offset : offset + vocab_size])
    offset += vocab_size

    norm_name = {code: name for name, code in NORM_CODES.items()}[norm]
    cfg = BlockConfig(d=d, h=h, z=z, v=v, chunk=chunk, norm=norm_name, groups=groups, eps=eps, causal=bool(causal))
    shell = LmModel.init(vocab, cfg, blocks)
    params = {}
    for name, shape in shell.param_shapes().items():
        count = int(np.prod(shape))
        if offset + 8 * count > len(payload):
            raise InputError(f"{path} is truncated at parameter {name}")
        params[name] = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count
    if offset != len(payload):
        raise InputError(f"{path} has {len(payload) - offset} trailing bytes")
    return LmModel(vocab, cfg, blocks, params)
