"""Word tokenizer shared by every text metric."""

import unicodedata
from dataclasses import dataclass

# Persian writes one word across a zero-width non-joiner (and sometimes joiner)
JOINERS = frozenset("\u200c\u200d")


@dataclass(frozen=True)
class TokenizedText:
    tokens: tuple[str, ...]
    source: str

    def __len__(self) -> int:
        return len(self.tokens)


def is_separator(ch: str) -> bool:
    """Whitespace, punctuation (P*) and symbols (S*) split words; combining marks and joiners do not."""
    if ch in JOINERS:
        return False
    return ch.isspace() or unicodedata.category(ch)[0] in "PS"


def tokenize(text: str) -> TokenizedText:
    """
    NFKC-normalize, case-fold and split on whitespace, punctuation and symbols.

    Example:
        >>> tokenize("The cat.").tokens
        ('the', 'cat')
    """
    normalized = unicodedata.normalize("NFKC", text).casefold()
    tokens: list[str] = []
    current: list[str] = []
    for ch in normalized:
        if is_separator(ch):
            if current:
                tokens.append("".join(current))
                current = []
        else:
            current.append(ch)
    if current:
        tokens.append("".join(current))
    return TokenizedText(tuple(tokens), text)


def as_tokens(text) -> tuple[str, ...]:
    """Accept raw strings, TokenizedText or token sequences."""
    if isinstance(text, str):
        return tokenize(text).tokens
    if isinstance(text, TokenizedText):
        return text.tokens
    return tuple(text)
