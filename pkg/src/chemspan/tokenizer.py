"""Fine-grained tokenization with exact character offsets.

Tokens are maximal runs of Latin or Greek letters, maximal runs of ASCII
digits, or single non-whitespace characters. Splitting is offset-exact:
``text[t.char_start:t.char_end] == t.surface`` for every token, which is
what lets gold character annotations round-trip through the pipeline.
"""

import re
from dataclasses import dataclass
from typing import List

# The digit class is pinned to 0-9 on purpose: \d would also match Unicode
# digits and silently change offsets. \s keeps Unicode whitespace semantics,
# so NBSP and friends separate tokens. The Greek ranges cover final sigma.
TOKEN_PATTERN = re.compile(r"[A-Za-zα-ωΑ-Ω]+|[0-9]+|[^\s]")


@dataclass(frozen=True)
class Token:
    index: int
    surface: str
    char_start: int
    char_end: int  # exclusive

    @property
    def width(self) -> int:
        return self.char_end - self.char_start


def tokenize(text: str) -> List[Token]:
    """Split ``text`` into offset-exact tokens. Deterministic, whitespace-free."""
    return [
        Token(i, m.group(), m.start(), m.end())
        for i, m in enumerate(TOKEN_PATTERN.finditer(text))
    ]


def tokenize_sentence(doc, sent) -> List[Token]:
    """Tokenize one sentence of a document, keeping document-absolute offsets.

    ``doc`` needs a ``text`` attribute and ``sent`` needs ``char_start`` /
    ``char_end``; both the corpus dataclasses and plain stand-ins work.
    """
    base = sent.char_start
    return [
        Token(t.index, t.surface, t.char_start + base, t.char_end + base)
        for t in tokenize(doc.text[sent.char_start:sent.char_end])
    ]
