"""l2 sampling from ``y = A x`` when ``A``, ``x`` or both receive turnstile updates.

M1 (A updating, x fixed) turns each entry update of ``A`` into a single
coordinate update of ``y``. M2 and M3 keep the sketched operator ``Phi A``
(one block of sketch words per column of ``A``) plus ``x``; a query forms
``(Phi A) x``, which by linearity is the sketch of ``y``, and decodes it.
"""

from __future__ import annotations

import enum

import numpy as np

from .sampler import AllRepetitionsFailed, RepetitionBank, SamplerConfig, default_lanes


class MatVecModel(str, enum.Enum):
    UPDATE_A_FIX_X = "m1"
    FIX_A_UPDATE_X = "m2"
    UPDATE_BOTH = "m3"


def _columns(j, d: int) -> np.ndarray:
    a = np.atleast_1d(np.asarray(j))
    if not np.issubdtype(a.dtype, np.integer):
        raise IndexError("column indices must be integers")
    if a.size and (a.min() < 1 or a.max() > d):
        raise IndexError(f"column out of range [1, {d}]")
    return a.astype(np.int64)


class MatVecSampler:
    """Sampler over ``y = A x`` with ``A`` of shape ``(n, d)``.

    ``fixed_x`` is required for M1 and ``fixed_A`` for M2. M3 starts from
    zero unless initial values are given; M2 may also take an initial ``x``
    and M1 an initial ``A``.
    """

    def __init__(
        self,
        model: MatVecModel | str,
        n: int,
        d: int,
        cfg: SamplerConfig,
        fixed_A=None,
        fixed_x=None,
        lanes=None,
    ):
        self.model = MatVecModel(model)
        if cfg.n != n:
            raise ValueError(f"config is for n={cfg.n}, not {n}")
        if d < 1:
            raise ValueError("d must be positive")
        self.n, self.d, self.cfg = n, d, cfg
        A = None if fixed_A is None else np.asarray(fixed_A, dtype=np.float64)
        x = None if fixed_x is None else np.asarray(fixed_x, dtype=np.float64)
        if A is not None and A.shape != (n, d):
            raise ValueError(f"A must have shape {(n, d)}, got {A.shape}")
        if x is not None and x.shape != (d,):
            raise ValueError(f"x must have shape {(d,)}, got {x.shape}")
        if self.model is MatVecModel.UPDATE_A_FIX_X and x is None:
            raise ValueError("model m1 needs a fixed x")
        if self.model is MatVecModel.FIX_A_UPDATE_X and A is None:
            raise ValueError("model m2 needs a fixed A")

        seeds, reps = lanes if lanes is not None else default_lanes(cfg)
        self.bank = RepetitionBank(cfg, n, seeds, reps)
        self.x = np.zeros(d) if x is None else x.copy()
        self.phi_a = None
        if self.model is MatVecModel.UPDATE_A_FIX_X:
            if A is not None:
                y = A @ self.x
                nz = np.flatnonzero(y)
                self.bank.update(nz + 1, y[nz])
        else:
            # column j of Phi A lives in self.phi_a[k][j]
            self.phi_a = self.bank.zero_parts(leading=(d,))
            if A is not None:
                rows = np.flatnonzero(np.any(A != 0, axis=1))
                self.bank.scatter_columns(rows + 1, A[rows], self.phi_a)

    def _require(self, *models: MatVecModel) -> None:
        if self.model not in models:
            raise ValueError(f"operation not available in model {self.model.value}")

    def update_a(self, i, j, delta) -> None:
        """``A[i, j] += delta`` (1-based; equal-length arrays allowed)."""
        self._require(MatVecModel.UPDATE_A_FIX_X, MatVecModel.UPDATE_BOTH)
        rows = np.atleast_1d(np.asarray(i))
        cols = _columns(j, self.d)
        dl = np.broadcast_to(np.asarray(delta, dtype=np.float64), rows.shape)
        if self.model is MatVecModel.UPDATE_A_FIX_X:
            # y_i changes by delta * x_j
            self.bank.update(rows, dl * self.x[cols - 1])
        else:
            v = np.zeros((rows.shape[0], self.d))
            np.add.at(v, (np.arange(rows.shape[0]), cols - 1), dl)
            self.bank.scatter_columns(rows, v, self.phi_a)

    def update_x(self, j, delta) -> None:
        """``x[j] += delta``; no sketch work."""
        self._require(MatVecModel.FIX_A_UPDATE_X, MatVecModel.UPDATE_BOTH)
        cols = _columns(j, self.d)
        np.add.at(self.x, cols - 1, np.broadcast_to(np.asarray(delta, dtype=np.float64), cols.shape))

    def decodable_bank(self) -> RepetitionBank:
        """Bank whose state is the sketch of the current ``y``."""
        if self.phi_a is None:
            return self.bank
        parts = tuple(np.ascontiguousarray(np.tensordot(self.x, p, axes=(0, 0))) for p in self.phi_a)
        b = self.bank
        return RepetitionBank(b.cfg, b.domain, b.seeds, b.reps, parts=parts)

    def decodable_state(self) -> np.ndarray:
        return self.decodable_bank().state

    def query(self) -> tuple[int, float]:
        out = self.decodable_bank().first_success()
        if out.failed:
            raise AllRepetitionsFailed(f"all {self.bank.lanes} repetitions returned FAIL")
        return out.index, out.estimate

    @property
    def m_total(self) -> int:
        """Rows of the stacked sketching map over all repetitions."""
        return self.bank.width * self.bank.lanes

    def words(self) -> int:
        """Stored floats: sketch words plus ``x``."""
        sketch = self.bank.words() if self.phi_a is None else sum(p.size for p in self.phi_a)
        return sketch + self.x.size
