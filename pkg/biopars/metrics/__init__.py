"""
Text metrics: ROUGE family, BERTScore, MoverScore and transport solvers, BLEURT loss
"""

from biopars.metrics.tokenize import TokenizedText, tokenize
from biopars.metrics.rouge import RougeScore, rouge_l, rouge_n, rouge_s, rouge_su, rouge_w
from biopars.metrics.idf import IdfTable, build_idf
from biopars.metrics.embeddings import EmbeddedText, EmbeddingStore, HashEmbedder
from biopars.metrics.bertscore import BertScore, bertscore
from biopars.metrics.transport import TransportPlan, TransportProblem, emd_exact, emd_sinkhorn
from biopars.metrics.moverscore import MoverScoreResult, moverscore, ngram_embed, power_mean, wmd_variant
from biopars.metrics.bleurt import PretrainLossSpec, bleurt_pretrain_loss
