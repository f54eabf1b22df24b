"""Spectral Model eXplainer: zone-based post-hoc explanations for
binary spectral classifiers, with a synthetic benchmark and an
explanation-quality evaluation harness."""

__version__ = "0.1.0"
