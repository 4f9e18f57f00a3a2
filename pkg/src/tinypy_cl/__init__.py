"""Curriculum-learning laboratory for tiny code language models on TinyPy."""

__version__ = "0.1.0"
