"""Linear sketches over an implicit vector in ``R^N`` fed by coordinate updates.

Every sketch here is *lane-batched*: constructing it with an array of seeds
creates one independent sketch per seed, stored along a leading lane axis,
and each coordinate update is applied to all lanes at once (each with its own
hash functions). Constructed with a scalar seed, results are returned without
the lane axis.

Coordinates are 1-based throughout.
"""

from __future__ import annotations

import math

import numpy as np

from .rng_hash import HashFamily, SignFamily, Tag, _u64, derive_seed


def default_rows(domain: int) -> int:
    return max(1, math.ceil(10 * math.log(domain)))


def default_buckets(eps: float) -> int:
    return math.ceil(100 / eps**2)


def default_ams_groups(domain: int) -> int:
    return max(1, math.ceil(6 * math.log(domain)))


def _lane_seeds(seed) -> tuple[np.ndarray, bool]:
    s = _u64(seed)
    return s.reshape(-1), s.ndim == 0


def _coords(i, domain: int) -> np.ndarray:
    a = np.atleast_1d(np.asarray(i))
    if not np.issubdtype(a.dtype, np.integer):
        if not np.all(np.mod(a, 1) == 0):
            raise IndexError("coordinates must be integers")
    a = a.astype(np.int64, copy=False)
    if a.size and (a.min() < 1 or a.max() > domain):
        raise IndexError(f"coordinate out of range [1, {domain}]")
    return a


def _lane_deltas(delta, lanes: int, k: int) -> np.ndarray:
    """Broadcast deltas to ``(lanes, k)``."""
    d = np.asarray(delta, dtype=np.float64)
    if d.ndim == 0:
        d = np.full(k, float(d))
    if d.ndim == 1:
        d = np.broadcast_to(d, (lanes, d.shape[0]))
    if d.shape != (lanes, k):
        raise ValueError(f"delta shape {d.shape} does not match {k} coordinates")
    return d


class CountSketch:
    """CountSketch point estimator.

    In tensor mode the domain is ``[side] x [side]`` flattened row-major and a
    coordinate ``(i1, i2)`` lands in bucket ``(h1(i1) + h2(i2)) mod b`` with
    sign ``s1(i1) * s2(i2)``.
    """

    def __init__(
        self,
        domain: int,
        rows: int,
        buckets: int,
        seed,
        *,
        independence: int = 4,
        tensor_side: int | None = None,
        table: np.ndarray | None = None,
    ):
        if rows < 1 or buckets < 1 or domain < 1:
            raise ValueError("domain, rows and buckets must be positive")
        if tensor_side is not None and tensor_side**2 != domain:
            raise ValueError("tensor mode needs domain == tensor_side**2")
        self.domain = domain
        self.rows = rows
        self.buckets = buckets
        self.tensor_side = tensor_side
        self.seeds, self._single = _lane_seeds(seed)
        row_ids = np.arange(rows)
        fam = self.seeds[:, None]
        self._h = HashFamily(derive_seed(fam, Tag.CS_BUCKET, row_ids), independence, buckets)
        self._s = SignFamily(derive_seed(fam, Tag.CS_SIGN, row_ids), independence)
        if tensor_side is not None:
            self._h2 = HashFamily(derive_seed(fam, Tag.CS_BUCKET_SIDE2, row_ids), independence, buckets)
            self._s2 = SignFamily(derive_seed(fam, Tag.CS_SIGN_SIDE2, row_ids), independence)
        shape = (self.lanes, rows, buckets)
        if table is None:
            table = np.zeros(shape)
        elif table.shape != shape or not table.flags.c_contiguous:
            raise ValueError(f"table must be C-contiguous with shape {shape}")
        self.table = table

    @property
    def lanes(self) -> int:
        return self.seeds.shape[0]

    def words(self) -> int:
        return self.table.size

    def _out(self, a):
        return a[0] if self._single else a

    def locate(self, i) -> tuple[np.ndarray, np.ndarray]:
        """Buckets (0-based) and signs of coordinates ``i``: both ``(lanes, rows, len(i))``."""
        i = _coords(i, self.domain)
        if self.tensor_side is None:
            return self._h.index(i), self._s.signs(i)
        i1, i2 = np.divmod(i - 1, self.tensor_side)
        u1, inv1 = np.unique(i1 + 1, return_inverse=True)
        u2, inv2 = np.unique(i2 + 1, return_inverse=True)
        b = self._h.index(u1)[..., inv1] + self._h2.index(u2)[..., inv2]
        b -= self.buckets * (b >= self.buckets)
        s = self._s.signs(u1)[..., inv1] * self._s2.signs(u2)[..., inv2]
        return b, s

    def scatter(self, i, delta, out: np.ndarray) -> None:
        """Add the sketch of ``sum_k delta_k e_{i_k}`` into ``out``.

        ``out`` must be C-contiguous with the table's shape; ``delta`` is
        ``(k,)`` or per-lane ``(lanes, k)``.
        """
        if out.shape != self.table.shape or not out.flags.c_contiguous:
            raise ValueError("out must be C-contiguous with the table's shape")
        idx = _coords(i, self.domain)
        b, s = self.locate(idx)
        self._scatter_located(b, s, _lane_deltas(delta, self.lanes, idx.shape[0]), out)

    def _scatter_located(self, b: np.ndarray, s: np.ndarray, d: np.ndarray, out: np.ndarray) -> None:
        base = (np.arange(self.lanes * self.rows) * self.buckets).reshape(self.lanes, self.rows, 1)
        np.add.at(out.reshape(-1), (base + b).reshape(-1), (s * d[:, None, :]).reshape(-1))

    def update(self, i, delta) -> None:
        self.scatter(i, delta, self.table)

    def _estimate_from(self, b: np.ndarray, s: np.ndarray) -> np.ndarray:
        base = (np.arange(self.lanes * self.rows) * self.buckets).reshape(self.lanes, self.rows, 1)
        return np.median(s * np.take(self.table.reshape(-1), base + b), axis=1)

    def estimate(self, i):
        """Median-over-rows estimate of coordinate(s) ``i``."""
        est = self._estimate_from(*self.locate(i))
        if np.ndim(i) == 0:
            est = est[:, 0]
        return self._out(est)

    def estimate_all(self) -> np.ndarray:
        """Estimates for every coordinate; column ``c`` holds coordinate ``c + 1``."""
        return self._out(self._estimate_from(*self.locate(np.arange(1, self.domain + 1))))

    def _heavy(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        est = self._estimate_from(*self.locate(np.arange(1, self.domain + 1)))
        order = np.argsort(-np.abs(est), axis=1, kind="stable")[:, :k]
        return order + 1, np.take_along_axis(est, order, axis=1)

    def heavy(self, k: int):
        """The ``k`` coordinates with largest ``|estimate|``; ties go to the smaller index."""
        if not 0 <= k <= self.domain:
            raise ValueError("k must be in [0, domain]")
        return self._out(self._heavy(k)[0])


class AmsSketch:
    """AMS l2-norm estimator: median over groups of the mean of squared signed sums.

    Each group draws its ``group_size`` sign functions from one multi-bit
    k-wise independent family; groups are independent of each other.
    """

    def __init__(
        self,
        domain: int,
        groups: int,
        group_size: int = 16,
        seed=0,
        *,
        independence: int = 4,
        tag: int = Tag.AMS_Y,
        accumulators: np.ndarray | None = None,
    ):
        if domain < 1 or groups < 1 or group_size < 1:
            raise ValueError("domain, groups and group_size must be positive")
        self.domain = domain
        self.groups = groups
        self.group_size = group_size
        self.seeds, self._single = _lane_seeds(seed)
        fam = derive_seed(self.seeds[:, None], tag, np.arange(groups))
        self._signs = SignFamily(fam, independence, width=group_size)
        shape = (self.lanes, groups * group_size)
        if accumulators is None:
            accumulators = np.zeros(shape)
        elif accumulators.shape != shape:
            raise ValueError(f"accumulators must have shape {shape}")
        self.acc = accumulators

    @property
    def lanes(self) -> int:
        return self.seeds.shape[0]

    @property
    def estimators(self) -> int:
        return self.groups * self.group_size

    def words(self) -> int:
        return self.acc.size

    def _out(self, a):
        return a[0] if self._single else a

    def _raw(self, signs: np.ndarray) -> np.ndarray:
        # -> (lanes, groups, k, group_size); estimator e = group * group_size + bit
        return signs[..., None] if self.group_size == 1 else signs

    def signs(self, i) -> np.ndarray:
        """Signs of coordinates ``i`` for every estimator: ``(lanes, estimators, len(i))``."""
        idx = _coords(i, self.domain)
        s = self._raw(self._signs.signs(idx))
        return self._out(s.transpose(0, 1, 3, 2).reshape(self.lanes, self.estimators, idx.shape[0]))

    def _combine(self, raw: np.ndarray, d: np.ndarray) -> np.ndarray:
        """``sum_k sign[l, e, k] * d[l, k]`` as ``(lanes, estimators)``."""
        return np.matmul(d[:, None, None, :], raw).reshape(self.lanes, self.estimators)

    def scatter(self, i, delta, out: np.ndarray) -> None:
        """Add the accumulators of ``sum_k delta_k e_{i_k}`` into ``out``."""
        idx = _coords(i, self.domain)
        d = _lane_deltas(delta, self.lanes, idx.shape[0])
        out += self._combine(self._raw(self._signs.signs(idx)), d)

    def update(self, i, delta) -> None:
        self.scatter(i, delta, self.acc)

    def _estimate_acc(self, acc: np.ndarray) -> np.ndarray:
        sq = (acc**2).reshape(acc.shape[0], self.groups, self.group_size).mean(axis=2)
        return np.sqrt(np.median(sq, axis=1))

    def estimate(self):
        return self._out(self._estimate_acc(self.acc))

    def residual_estimate(self, i, values) -> np.ndarray:
        """Per-lane norm estimate of the sketched vector minus ``sum_h values[l, h] e_{i[l, h]}``."""
        idx = np.asarray(i, dtype=np.int64).reshape(self.lanes, -1)
        if idx.shape[1] == 0:
            return self._estimate_acc(self.acc)
        _coords(idx, self.domain)
        v = np.asarray(values, dtype=np.float64).reshape(self.lanes, -1)
        per_group = np.broadcast_to(idx[:, None, :], (self.lanes, self.groups, idx.shape[1]))
        raw = self._raw(self._signs.signs_paired(per_group))
        return self._estimate_acc(self.acc - self._combine(raw, v))


def tail_norm_estimate(cs: CountSketch, ams_w: AmsSketch, k: int):
    """Estimate the l2 norm of the sketched vector with its ``k`` heaviest entries removed.

    The heavy coordinates and their estimates come from ``cs``; their
    estimated contribution is subtracted from ``ams_w``'s accumulators (by
    linearity) and the norm of what remains is estimated. Both sketches must
    describe the same vector over the same lanes.
    """
    if cs.lanes != ams_w.lanes:
        raise ValueError("sketches must have the same lanes")
    heavy, values = cs._heavy(min(k, cs.domain))
    return cs._out(ams_w.residual_estimate(heavy, values))
