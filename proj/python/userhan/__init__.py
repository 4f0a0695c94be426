from ._core import (
    TfidfVectorizer,
    char_ngrams,
    f1,
    generate_synthetic,
    load_corpus,
    softmax,
    tokenize,
    top2,
)

__all__ = [
    "TfidfVectorizer",
    "char_ngrams",
    "f1",
    "generate_synthetic",
    "load_corpus",
    "softmax",
    "tokenize",
    "top2",
]
