"""Independent reference implementations used as test oracles.

These deliberately avoid the package's lifting/exponential code paths:
operators are lifted by digit decoding and exponentials are computed by a
scaling-and-squaring Taylor series.
"""
from __future__ import annotations

import numpy as np


def digit(index, q: int, d: int):
    return (index // d**q) % d


def kron_lift(matrix: np.ndarray, targets, num_qudits: int, d: int) -> np.ndarray:
    """Embed a k-qudit matrix (targets[0] most significant) into the full space."""
    dim = d**num_qudits
    k = len(targets)
    idx = np.arange(dim)
    loc = np.zeros(dim, dtype=np.int64)
    for pos, t in enumerate(targets):
        loc += digit(idx, t, d) * d ** (k - 1 - pos)
    rest = np.zeros(dim, dtype=np.int64)
    weight = 1
    for q in range(num_qudits):
        if q not in targets:
            rest += digit(idx, q, d) * weight
            weight *= d
    full = np.zeros((dim, dim), dtype=complex)
    same_rest = rest[:, None] == rest[None, :]
    full[same_rest] = matrix[loc[:, None], loc[None, :]][same_rest]
    return full


def series_expm(a: np.ndarray) -> np.ndarray:
    """exp(a) by scaling and squaring with a Taylor series."""
    norm = np.linalg.norm(a, ord=np.inf)
    squarings = max(0, int(np.ceil(np.log2(max(norm, 1e-300)))) + 1)
    small = a / 2**squarings
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, 40):
        term = term @ small / k
        out = out + term
        if np.max(np.abs(term)) < 1e-18:
            break
    for _ in range(squarings):
        out = out @ out
    return out


def random_state(dim: int, rng) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_hermitian(dim: int, rng) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2.0
