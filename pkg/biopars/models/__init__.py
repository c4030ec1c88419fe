"""
Numeric core: tensors, EMA kernels, streaming norms, attention, autodiff and the encoder block
"""

from biopars.models.ema import (
    CemaParams,
    EmaParams,
    EmaState,
    cema_apply,
    cema_kernel,
    ema_apply,
    ema_chunked,
    ema_convolve,
)
from biopars.models.norms import GroupSpec, NormState, layer_norm, timestep_norm
from biopars.models.attention import chunked_causal_attention, qk_affine
from biopars.models.autodiff import GradientReport, Tape, finite_diff_check
from biopars.models.block import (
    AttnParams,
    BlockConfig,
    BlockState,
    encoder_block,
    gated_merge,
    shared_representation,
)
from biopars.models.lm import ByteVocab, LmModel
