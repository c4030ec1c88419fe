"""Tests for the gated-attention encoder block."""

import numpy as np
import pytest

from biopars.errors import DimensionError, ParameterError, StateError
from biopars.models.attention import OpCounter, chunked_causal_attention, qk_affine
from biopars.models.block import (
    AttnParams,
    BlockConfig,
    BlockState,
    encoder_block,
    gated_merge,
    init_block_params,
    shared_representation,
)
from biopars.models.ema import CEMA_PARAM_NAMES, cema_params_from_raw
from biopars.models.norms import layer_norm
from biopars.models.tensor import Rng, swish


def _noisy_params(cfg, seed):
    rng = np.random.default_rng(seed)
    params = init_block_params(cfg, Rng(seed))
    return {name: value + rng.normal(0.0, 0.1, size=value.shape) for name, value in params.items()}


def test_config_defaults_and_validation():
    cfg = BlockConfig(d=8)
    assert (cfg.z, cfg.v, cfg.groups) == (4, 8, 1)
    assert cfg.boundary_doubles() == 2 * 8 * cfg.h + 3
    assert BlockConfig(d=8, norm="layer").boundary_doubles() == 2 * 8 * cfg.h
    with pytest.raises(ParameterError):
        BlockConfig(d=6, groups=4)
    with pytest.raises(ParameterError):
        BlockConfig(d=4, chunk=0)
    with pytest.raises(ParameterError):
        BlockConfig(d=4, norm="batch")


def test_params_are_checked():
    cfg = BlockConfig(d=4, h=2)
    params = init_block_params(cfg, Rng(0))
    params["attn.wo"] = np.zeros((3, 4))
    with pytest.raises(DimensionError):
        encoder_block(np.zeros((2, 4)), params, cfg)
    del params["attn.wo"]
    with pytest.raises(ParameterError):
        encoder_block(np.zeros((2, 4)), params, cfg)


def test_output_at_t_depends_only_on_the_prefix():
    cfg = BlockConfig(d=4, h=2, chunk=3)
    params = _noisy_params(cfg, 1)
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(1, 13))
        x = rng.normal(size=(n, cfg.d))
        t = int(rng.integers(0, n))
        full, _ = encoder_block(x, params, cfg)
        prefix, _ = encoder_block(x[: t + 1], params, cfg)
        assert np.array_equal(prefix[t], full[t])


def test_carried_state_continues_bit_identically(rng):
    for cfg in (BlockConfig(d=4, h=2, chunk=4), BlockConfig(d=6, h=3, chunk=2, norm="layer")):
        params = _noisy_params(cfg, 3)
        x = rng.normal(size=(16, cfg.d))
        full, s_full = encoder_block(x, params, cfg)
        first, s1 = encoder_block(x[:8], params, cfg)
        second, s2 = encoder_block(x[8:], params, cfg, BlockState.from_bytes(s1.to_bytes(), cfg))
        assert np.array_equal(np.concatenate([first, second]), full)
        assert s2.to_bytes() == s_full.to_bytes()


def test_block_state_wire_format():
    cfg = BlockConfig(d=4, h=2, groups=2)
    payload = BlockState.initial(cfg).to_bytes()
    assert len(payload) == 8 * cfg.boundary_doubles()
    with pytest.raises(StateError):
        BlockState.from_bytes(payload, BlockConfig(d=4, h=2, norm="layer"))


def test_attention_work_is_linear_in_sequence_length(rng):
    cfg = BlockConfig(d=4, h=2, chunk=4)
    params = init_block_params(cfg, Rng(4))
    per_token = []
    for n in (16, 32, 64, 128):
        counter = OpCounter()
        encoder_block(rng.normal(size=(n, cfg.d)), params, cfg, counter=counter)
        per_token.append(counter.multiply_adds / n)
    assert max(per_token) == min(per_token)


def test_public_operations_compose_into_the_block(rng):
    cfg = BlockConfig(d=6, h=2, chunk=3, norm="layer")
    p = _noisy_params(cfg, 5)
    x = rng.normal(size=(7, cfg.d))

    normed = layer_norm(x, cfg.eps, p["norm1.gain"], p["norm1.bias"])
    cema = cema_params_from_raw({name: p[f"cema.{name}"] for name in CEMA_PARAM_NAMES})
    xp, zprime, _ = shared_representation(normed, cema, p["attn.wz"], p["attn.bz"])
    np.testing.assert_allclose(np.linalg.norm(zprime, axis=1), 1.0, rtol=1e-12)
    q, k = qk_affine(zprime, p["attn.kq"], p["attn.mq"], p["attn.kk"], p["attn.mk"])
    v = swish(xp @ p["attn.wv"] + p["attn.bv"])
    o = chunked_causal_attention(q, k, v, cfg.chunk)
    y_hat = gated_merge(xp, o, AttnParams.from_block(p)) + x
    hidden = swish(layer_norm(y_hat, cfg.eps, p["norm2.gain"], p["norm2.bias"]) @ p["ffn.w1"] + p["ffn.b1"])
    expected = hidden @ p["ffn.w2"] + p["ffn.b2"] + y_hat

    y, _ = encoder_block(x, p, cfg)
    np.testing.assert_allclose(y, expected, rtol=1e-10, atol=1e-12)


def test_open_update_gate_passes_the_contextualized_stream(rng):
    cfg = BlockConfig(d=4, h=2)
    p = _noisy_params(cfg, 6)
    gates = AttnParams.from_block({**p, "attn.wu": np.zeros((4, 4)), "attn.bu": np.full(4, -1000.0)})
    xp, o = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    np.testing.assert_allclose(gated_merge(xp, o, gates), xp)
