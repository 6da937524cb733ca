"""Brute-force ground truth: exact products and distributions, distances, hard instances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NORMALIZATION_TOL = 1e-12


def exact_matvec(A, x) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if A.ndim != 2 or x.shape != (A.shape[1],):
        raise ValueError(f"cannot multiply {A.shape} by {x.shape}")
    return A @ x


def exact_kron_matvec(A1, A2, x, *, materialize: bool = False) -> np.ndarray:
    """``(A1 kron A2) x`` via ``vec(A1 mat(x) A2^T)`` (row-major), or explicitly."""
    A1 = np.asarray(A1, dtype=np.float64)
    A2 = np.asarray(A2, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if A1.ndim != 2 or A2.ndim != 2 or x.shape != (A1.shape[1] * A2.shape[1],):
        raise ValueError(f"dimension mismatch: {A1.shape}, {A2.shape}, {x.shape}")
    if materialize:
        return np.kron(A1, A2) @ x
    X = x.reshape(A1.shape[1], A2.shape[1])
    return (A1 @ X @ A2.T).reshape(-1)


def _normalized(w: np.ndarray) -> np.ndarray:
    p = w / w.sum()
    if abs(p.sum() - 1.0) > NORMALIZATION_TOL:
        # one renormalization pass absorbs summation error
        p = p / p.sum()
    return p


def exact_l2_distribution(y) -> np.ndarray:
    """``p_j = y_j^2 / ||y||_2^2``."""
    y = np.asarray(y, dtype=np.float64)
    if not np.any(y != 0):
        raise ValueError("l2 distribution of the zero vector is undefined")
    # scale first so tiny entries do not underflow when squared
    scaled = y / np.max(np.abs(y))
    return _normalized(scaled * scaled)


def exact_softmax_distribution(y) -> np.ndarray:
    """``p_j = exp(y_j) / sum_k exp(y_k)``, computed after subtracting ``max(y)``."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("empty vector")
    return _normalized(np.exp(y - y.max()))


def offline_exp_sample(y, seed, size: int | None = None):
    """Draw 1-based indices from the softmax distribution of ``y`` by inverse CDF."""
    cdf = np.cumsum(exact_softmax_distribution(y))
    cdf[-1] = 1.0
    u = np.random.default_rng(seed).random(size)
    idx = np.searchsorted(cdf, u, side="right") + 1
    return int(idx) if size is None else idx


def tv_distance(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("distributions must have the same support")
    return float(0.5 * np.abs(p - q).sum())


def chi2_stat(counts, p) -> float:
    """Pearson statistic of observed ``counts`` against probabilities ``p``.

    Cells with ``p == 0`` are skipped; an observation in such a cell makes the
    statistic infinite.
    """
    counts = np.asarray(counts, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    expected = counts.sum() * p
    live = expected > 0
    if np.any(counts[~live] > 0):
        return math.inf
    return float(np.sum((counts[live] - expected[live]) ** 2 / expected[live]))


@dataclass
class HardInstance:
    """A lower-bound construction and the behaviour a correct sampler must show.

    ``answer`` is the planted 1-based coordinate, or None when there is none.
    """

    kind: str
    y: np.ndarray
    answer: int | None
    A: np.ndarray | None = None
    x: np.ndarray | None = None
    params: dict = field(default_factory=dict)


INDEX_ROW_VALUE = 1e-10


def gen_index_hard_instance(d: int, i: int, bit: int, seed: int = 0) -> HardInstance:
    """INDEX reduction: ``A = [diag(v); 1e-10 * 1^T]`` with ``v_i = bit``, ``x = e_i``.

    The rest of ``v`` is random bits drawn from ``seed``; only ``v_i`` reaches
    ``y = A x = bit * e_i + 1e-10 * e_{d+1}``. A sampler should return ``i``
    when the bit is set and ``d + 1`` otherwise.
    """
    if not 1 <= i <= d:
        raise IndexError(f"planted coordinate must lie in [1, {d}]")
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    v = np.random.default_rng(seed).integers(0, 2, d).astype(np.float64)
    v[i - 1] = bit
    A = np.zeros((d + 1, d))
    A[:d] = np.diag(v)
    A[d, :] = INDEX_ROW_VALUE
    x = np.zeros(d)
    x[i - 1] = 1.0
    answer = i if bit else d + 1
    return HardInstance("index", A @ x, answer, A=A, x=x, params={"d": d, "i": i, "bit": bit, "seed": seed})


def gen_disjointness_instance(n: int, set_a, set_b, C: float) -> HardInstance:
    """Set-disjointness reduction: ``y = 100 C ln(n) (chi_A + chi_B)``.

    ``answer`` is the smallest common element, or None for disjoint sets.
    """
    a = sorted({int(v) for v in set_a})
    b = sorted({int(v) for v in set_b})
    for v in a + b:
        if not 1 <= v <= n:
            raise IndexError(f"set element {v} outside [1, {n}]")
    scale = 100 * C * math.log(n)
    y = np.zeros(n)
    y[np.array(a, dtype=np.int64) - 1] += scale
    y[np.array(b, dtype=np.int64) - 1] += scale
    common = sorted(set(a) & set(b))
    return HardInstance(
        "disjointness", y, common[0] if common else None,
        params={"n": n, "set_a": a, "set_b": b, "C": C},
    )
