"""Tests for the simulated sequence-parallel forward pass."""

import numpy as np
import pytest

from biopars.errors import AlignmentError, ParameterError
from biopars.models.block import BlockConfig
from biopars.models.lm import ByteVocab, LmModel
from biopars.training.parallel import forward_sequence_parallel, message_doubles, shard_bounds


@pytest.fixture
def model():
    vocab = ByteVocab.from_corpus(bytes(range(97, 105)))
    return LmModel.init(vocab, BlockConfig(d=4, h=2, chunk=4, groups=2), blocks=2, seed=3)


@pytest.fixture
def ids(rng):
    return rng.integers(0, 8, size=32)


def test_shard_bounds_are_chunk_aligned():
    assert shard_bounds(32, 4, 3) == [0, 12, 24, 32]
    assert shard_bounds(30, 4, 2) == [0, 16, 30]
    with pytest.raises(ParameterError):
        shard_bounds(8, 4, 3)
    with pytest.raises(ParameterError):
        shard_bounds(8, 4, 0)


def test_parallel_logits_are_bit_identical_to_one_worker(model, ids):
    reference, _ = model.logits(ids)
    for workers in (1, 2, 4):
        for threaded in (False, True):
            run = forward_sequence_parallel(model, ids, workers, threaded=threaded)
            assert np.array_equal(run.logits, reference), (workers, threaded)
            assert len(run.shards) == workers


def test_boundary_messages_have_the_documented_size(model, ids):
    run = forward_sequence_parallel(model, ids, 4)
    expected = 8 * message_doubles(model)
    assert expected == 8 * 2 * (2 * 4 * 2 + 3 * 2)
    for shard in run.shards:
        assert len(shard.outbound.payload) == expected
    assert run.shards[0].inbound is None
    assert run.bytes_sent == 4 * expected


def test_workers_finish_left_to_right(model, ids):
    run = forward_sequence_parallel(model, ids, 4, threaded=True)
    finished = [s.finished_at for s in run.shards]
    assert finished == sorted(finished)
    for left, right in zip(run.shards[:-1], run.shards[1:]):
        assert right.received_at > left.finished_at


def test_misaligned_boundaries_are_rejected(model, ids):
    with pytest.raises(AlignmentError) as info:
        forward_sequence_parallel(model, ids, bounds=[0, 6, 32])
    assert info.value.boundary == 6
    with pytest.raises(AlignmentError):
        forward_sequence_parallel(model, ids, bounds=[0, 16, 30])
