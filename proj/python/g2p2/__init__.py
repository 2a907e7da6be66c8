"""Graph-grounded dual-encoder pre-training and prompting.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports its functions.
"""

from ._core import (
    IoError,
    NumericError,
    ValidationError,
    encode_text,
    few_shot,
    generate_corpus,
    pretrain,
    zero_shot,
)

__all__ = [
    "IoError",
    "NumericError",
    "ValidationError",
    "encode_text",
    "few_shot",
    "generate_corpus",
    "pretrain",
    "zero_shot",
]
