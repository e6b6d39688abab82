"""Transductive multimodal fake-news classification with masked label propagation."""

__version__ = "0.1.0"
