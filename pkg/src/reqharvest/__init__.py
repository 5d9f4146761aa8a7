"""Requirement sentence extraction: segmentation, classifiers and evaluation."""

__version__ = "0.1.0"
