"""Neural machine translation with a word-pair memory, on a small numpy autodiff core."""

__version__ = "0.1.0"
