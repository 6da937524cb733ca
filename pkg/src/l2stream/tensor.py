"""l2 sampling from ``y = (A1 kron A2) x`` with ``A2`` and ``x`` fixed and ``A1`` streamed.

With row-major ``vec`` and ``X = mat(x)`` (d x d), ``y = vec(A1 X A2^T)``.
Writing ``B = A2 X^T`` (n x d), an update ``A1[i, j] += delta`` adds
``delta * B[:, j]`` to block ``i`` of ``y``: the n coordinates
``(i - 1) n + 1 .. i n``. Only ``A2``, ``X``, ``B`` and the sketches are stored.
"""

from __future__ import annotations

import numpy as np

from .sampler import AllRepetitionsFailed, RepetitionBank, SamplerConfig, default_lanes


def kron_flat(i1, i2, n: int):
    """1-based flat index of the pair ``(i1, i2)`` in ``[n] x [n]``."""
    a, b = np.asarray(i1), np.asarray(i2)
    if np.any((a < 1) | (a > n) | (b < 1) | (b > n)):
        raise IndexError(f"pair out of range [1, {n}]^2")
    out = (a - 1) * n + b
    return out.item() if out.ndim == 0 else out


def kron_unflat(flat, n: int):
    """Inverse of ``kron_flat``."""
    f = np.asarray(flat)
    if np.any((f < 1) | (f > n * n)):
        raise IndexError(f"flat index out of range [1, {n * n}]")
    i1, i2 = np.divmod(f - 1, n)
    if f.ndim == 0:
        return int(i1) + 1, int(i2) + 1
    return i1 + 1, i2 + 1


class TensorSampler:
    """Sampler over ``y = (A1 kron A2) x``; ``A1`` (n x d) starts at zero."""

    def __init__(self, n: int, d: int, cfg: SamplerConfig, A2, x, lanes=None):
        if cfg.n != n:
            raise ValueError(f"config is for n={cfg.n}, not {n}")
        A2 = np.array(A2, dtype=np.float64)
        x = np.array(x, dtype=np.float64)
        if A2.shape != (n, d):
            raise ValueError(f"A2 must have shape {(n, d)}, got {A2.shape}")
        if x.shape != (d * d,):
            raise ValueError(f"x must have length {d * d}, got {x.shape}")
        self.n, self.d, self.cfg = n, d, cfg
        self.A2 = A2
        self.X = x.reshape(d, d)
        self.B = A2 @ self.X.T
        seeds, reps = lanes if lanes is not None else default_lanes(cfg)
        self.bank = RepetitionBank(cfg, n * n, seeds, reps, tensor_side=n)
        self._block = np.arange(1, n + 1)

    def update_a1(self, i, j, delta) -> None:
        """``A1[i, j] += delta`` (1-based; equal-length arrays allowed)."""
        rows = np.atleast_1d(np.asarray(i))
        cols = np.atleast_1d(np.asarray(j))
        if rows.shape != cols.shape:
            raise ValueError("i and j must have the same length")
        if rows.size and (rows.min() < 1 or rows.max() > self.n):
            raise IndexError(f"row out of range [1, {self.n}]")
        if cols.size and (cols.min() < 1 or cols.max() > self.d):
            raise IndexError(f"column out of range [1, {self.d}]")
        dl = np.broadcast_to(np.asarray(delta, dtype=np.float64), rows.shape)
        coords = ((rows[:, None] - 1) * self.n + self._block).reshape(-1)
        values = (dl[:, None] * self.B[:, cols - 1].T).reshape(-1)
        self.bank.update(coords, values)

    @property
    def state(self) -> np.ndarray:
        return self.bank.state

    def query(self) -> tuple[tuple[int, int], float]:
        out = self.bank.first_success()
        if out.failed:
            raise AllRepetitionsFailed(f"all {self.bank.lanes} repetitions returned FAIL")
        return kron_unflat(out.index, self.n), out.estimate

    def space(self) -> dict[str, int]:
        """Stored floats by component."""
        return {
            "matrices": self.A2.size + self.X.size + self.B.size,
            "sketch": self.bank.words(),
        }

    def words(self) -> int:
        return sum(self.space().values())
