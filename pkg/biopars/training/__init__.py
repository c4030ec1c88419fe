"""
Toy autoregressive training and simulated sequence-parallel execution
"""

from biopars.training.corpus import load_corpus, make_windows, pattern_corpus
from biopars.training.parallel import forward_sequence_parallel
from biopars.training.trainer import TrainResult, build_model, perplexity, train
