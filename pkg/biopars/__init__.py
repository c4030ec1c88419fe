"""
BioPars desk-scale package

Moving-average gated encoder blocks, a toy trainer with simulated sequence
parallelism, and the text-generation evaluation stack used to score QA answers.
"""

__version__ = "0.1.0"
