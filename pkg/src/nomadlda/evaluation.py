"""Comparing recovered topics with planted ones."""
from __future__ import annotations

from typing import List, Tuple

import numpy as np


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = a / np.linalg.norm(a, axis=1, keepdims=True)
    b = b / np.linalg.norm(b, axis=1, keepdims=True)
    return a @ b.T


def greedy_alignment(estimated: np.ndarray, planted: np.ndarray) -> Tuple[List[Tuple[int, int]], float]:
    """Pair topics by repeatedly taking the most similar unmatched pair.

    Returns the ``(estimated, planted)`` pairs and their mean cosine similarity.
    """
    sim = cosine_matrix(estimated, planted)
    work = sim.copy()
    pairs = []
    for _ in range(min(work.shape)):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        pairs.append((int(i), int(j)))
        work[i, :] = -np.inf
        work[:, j] = -np.inf
    return pairs, float(np.mean([sim[i, j] for i, j in pairs]))
