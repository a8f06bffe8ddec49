"""Targeted syntactic evaluation of n-gram, sequence and syntax-supervised language models."""

__version__ = "0.1.0"
