import random

import numpy as np
import pytest
import torch

from tinypy_cl.grammar import DEFAULT_PROFILE, generate_corpus
from tinypy_cl.interp import render_annotated
from tinypy_cl.model import ModelConfig, NEWLINE_ID, tokenize


@pytest.fixture(scope="session")
def small_corpus():
    """200 snippets from the full grammar, shared across tests."""
    return generate_corpus(DEFAULT_PROFILE, 200, seed=1234)


class ReplayModel(torch.nn.Module):
    """Oracle model that deterministically continues a stored text: logits
    are one-hot for the next stored character (newline past the end).  Any
    prompt must be a prefix-aligned slice of the stored text starting at 0."""

    def __init__(self, text: str):
        super().__init__()
        ids = tokenize(text).astype(np.int64)
        self.ids = ids
        self.config = ModelConfig(
            n_layers=1, n_heads=1, embed_dim=2, block_size=len(ids) + 256
        )
        self._dummy = torch.nn.Parameter(torch.zeros(1))

    def forward(self, idx, cache=None):
        B, T = idx.shape
        start = cache.length if cache is not None else 0
        logits = torch.zeros(B, T, 41)
        for t in range(T):
            pos = start + t + 1
            nxt = int(self.ids[pos]) if pos < len(self.ids) else NEWLINE_ID
            logits[:, t, nxt] = 1.0
        if cache is not None:
            for layer in cache.layers:
                layer.length += T
        return logits


class UniformRandomModel(torch.nn.Module):
    """Fake predictor whose argmax is uniform over the vocabulary (seeded
    random logits per call)."""

    def __init__(self, seed: int = 0, block_size: int = 512):
        super().__init__()
        self.config = ModelConfig(n_layers=1, n_heads=1, embed_dim=2, block_size=block_size)
        self.generator = torch.Generator().manual_seed(seed)
        self._dummy = torch.nn.Parameter(torch.zeros(1))

    def forward(self, idx, cache=None):
        B, T = idx.shape
        if cache is not None:
            for layer in cache.layers:
                layer.length += T
        return torch.rand(B, T, 41, generator=self.generator)


@pytest.fixture
def replay_model_for():
    def make(snippet):
        return ReplayModel(render_annotated(snippet.source, snippet.output_lines))
    return make


@pytest.fixture
def uniform_model():
    return UniformRandomModel(seed=7)
