"""QBERT: quantum-compatible complex-valued BERT toolkit."""

__version__ = "0.1.0"
