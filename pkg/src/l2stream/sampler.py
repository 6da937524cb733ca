"""Approximate l2 sampling from a turnstile-updated vector.

Each repetition draws a uniform ``u_i`` per coordinate, sketches the rescaled
vector ``w_i = y_i / sqrt(u_i)`` with a CountSketch and an AMS sketch, and
sketches ``y`` itself with a second AMS sketch. A repetition returns the
coordinate whose rescaled estimate clears the threshold
``sqrt(C ln n / eps) * ||y||`` (estimated), or FAIL. A sampler answers with
its lowest-indexed successful repetition.

The factor ``1 / sqrt(u_i)`` is rounded to a multiple of ``2**-16`` (a
relative change below ``2**-17``). Every contribution of an integer delta is
then an exact multiple of that unit, so sketches of integer streams sum
exactly in any order and a stream followed by its negation leaves zeros.
Reported estimates divide by the same rounded factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .rng_hash import Tag, _u64, derive_seed, uniform_from_key, uniform_key, uniform_scale_paired
from .sketches import (
    AmsSketch,
    CountSketch,
    default_ams_groups,
    default_buckets,
    default_rows,
)

_DECODE_BUDGET = 1 << 20
# 1/sqrt(u) is kept on a fixed-point grid so integer deltas sum exactly
SCALE_FRACTION_BITS = 16
_SCALE_UNIT = 2.0**SCALE_FRACTION_BITS


def quantized_inv_sqrt(u: np.ndarray) -> np.ndarray:
    """``1 / sqrt(u)`` rounded to a multiple of ``2**-SCALE_FRACTION_BITS``."""
    return np.round(_SCALE_UNIT / np.sqrt(u)) / _SCALE_UNIT


class AllRepetitionsFailed(RuntimeError):
    """Every repetition returned FAIL (too few repetitions, or y is ~0)."""


@dataclass(frozen=True)
class SamplerConfig:
    n: int
    eps: float
    C: float = 24.0
    R: int | None = None
    delta_fail: float = 0.01
    seed: int = 0
    rows: int | None = None
    buckets: int | None = None
    ams_groups: int | None = None
    ams_group_size: int = 16
    independence: int = 4

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.C <= 0:
            raise ValueError("C must be positive")
        if not 0 < self.delta_fail < 1:
            raise ValueError("delta_fail must lie in (0, 1)")
        if self.R is not None and self.R < 1:
            raise ValueError("R must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        for name in ("rows", "buckets", "ams_groups"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def repetitions(self) -> int:
        if self.R is not None:
            return self.R
        r = 40 / self.eps * math.log(self.n) * math.log(1 / self.delta_fail)
        return max(1, math.ceil(r))

    @property
    def threshold(self) -> float:
        return math.sqrt(self.C * math.log(self.n) / self.eps)

    @property
    def heavy_count(self) -> int:
        return math.ceil(1 / self.eps**2)

    def sketch_shape(self, domain: int) -> tuple[int, int, int, int]:
        """(rows, buckets, ams groups, ams group size) for a domain of this size."""
        return (
            self.rows or default_rows(domain),
            self.buckets or default_buckets(self.eps),
            self.ams_groups or default_ams_groups(domain),
            self.ams_group_size,
        )

    def with_seed(self, seed: int) -> "SamplerConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class SampleOutcome:
    """FAIL when ``index`` is None, else the chosen coordinate and its estimate."""

    index: int | None = None
    estimate: float = 0.0

    @property
    def failed(self) -> bool:
        return self.index is None


FAIL = SampleOutcome()


@dataclass
class Outcomes:
    """Decoded result of every lane."""

    passed: np.ndarray
    index: np.ndarray
    estimate: np.ndarray

    def first(self) -> SampleOutcome:
        hits = np.flatnonzero(self.passed)
        if hits.size == 0:
            return FAIL
        k = hits[0]
        return SampleOutcome(int(self.index[k]), float(self.estimate[k]))


class RepetitionBank:
    """Sketch state for a set of lanes, one lane per (master seed, repetition).

    Lane ``l`` holds ``Phi_l y`` as three parts: the CountSketch table of the
    rescaled vector ``w``, the AMS accumulators of ``w`` and the AMS
    accumulators of ``y``. The state is linear in ``y``, which is what lets the
    matrix-vector samplers keep ``Phi A`` instead of ``y``.
    """

    def __init__(
        self,
        cfg: SamplerConfig,
        domain: int,
        seeds,
        reps,
        *,
        tensor_side: int | None = None,
        parts: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    ):
        self.cfg = cfg
        self.domain = domain
        self.tensor_side = tensor_side
        seeds, reps = np.broadcast_arrays(_u64(seeds).reshape(-1), _u64(reps).reshape(-1))
        self.seeds, self.reps = seeds.copy(), reps.copy()
        rows, buckets, groups, gsize = cfg.sketch_shape(domain)
        if parts is None:
            parts = self.zero_parts()
        self.parts = parts
        self._ukey = uniform_key(self.seeds, self.reps)
        key = derive_seed(self.seeds, Tag.DERIVE, self.reps)
        k = cfg.independence
        self.cs_w = CountSketch(
            domain, rows, buckets, key, independence=k, tensor_side=tensor_side, table=parts[0]
        )
        self.ams_w = AmsSketch(domain, groups, gsize, key, independence=k, tag=Tag.AMS_W, accumulators=parts[1])
        self.ams_y = AmsSketch(domain, groups, gsize, key, independence=k, tag=Tag.AMS_Y, accumulators=parts[2])

    @property
    def lanes(self) -> int:
        return self.seeds.shape[0]

    def part_shapes(self) -> tuple[tuple[int, ...], ...]:
        rows, buckets, groups, gsize = self.cfg.sketch_shape(self.domain)
        lanes = self.lanes
        return (lanes, rows, buckets), (lanes, groups * gsize), (lanes, groups * gsize)

    def zero_parts(self, leading: tuple[int, ...] = ()) -> tuple[np.ndarray, ...]:
        return tuple(np.zeros(leading + shape) for shape in self.part_shapes())

    @property
    def width(self) -> int:
        """Sketch words per lane (rows of Phi per repetition)."""
        return sum(math.prod(shape[1:]) for shape in self.part_shapes())

    @property
    def state(self) -> np.ndarray:
        """Flat copy of the state, one row per lane."""
        return np.concatenate([p.reshape(self.lanes, -1) for p in self.parts], axis=1)

    def words(self) -> int:
        return sum(p.size for p in self.parts)

    def inv_sqrt_u(self, idx: np.ndarray) -> np.ndarray:
        return quantized_inv_sqrt(uniform_from_key(self._ukey, idx))

    def _aggregate(self, i, delta) -> tuple[np.ndarray, np.ndarray]:
        idx = np.atleast_1d(np.asarray(i))
        if not np.issubdtype(idx.dtype, np.integer):
            raise IndexError("coordinates must be integers")
        idx = idx.astype(np.int64)
        d = np.asarray(delta, dtype=np.float64)
        if d.ndim == 0:
            d = np.full(idx.shape, float(d))
        if d.shape[0] != idx.shape[0]:
            raise ValueError("need one delta per coordinate")
        if idx.size and (idx.min() < 1 or idx.max() > self.domain):
            raise IndexError(f"coordinate out of range [1, {self.domain}]")
        if idx.size > 1:
            uniq, inv = np.unique(idx, return_inverse=True)
            if uniq.size < idx.size:
                agg = np.zeros((uniq.size,) + d.shape[1:])
                np.add.at(agg, inv, d)
                return uniq, agg
        return idx, d

    def scatter(self, i, delta, parts) -> None:
        """Add ``Phi (sum_k delta_k e_{i_k})`` into ``parts`` (arrays shaped like ``self.parts``)."""
        k = np.atleast_1d(np.asarray(i)).shape[0]
        d = np.asarray(delta, dtype=np.float64)
        if d.ndim == 0:
            d = np.full(k, float(d))
        self.scatter_columns(i, d[:, None], tuple(p[None] for p in parts))

    def scatter_columns(self, i, values, parts) -> None:
        """Add ``Phi V`` column by column, where ``V`` has rows ``values`` at coordinates ``i``.

        ``values`` has shape ``(k, d)``; every part carries a leading axis of
        length ``d``. Hashes are evaluated once for all columns.
        """
        idx, v = self._aggregate(i, values)
        if idx.size == 0:
            return
        cs_out, aw_out, ay_out = parts
        if not cs_out.flags.c_contiguous:
            raise ValueError("CountSketch parts must be C-contiguous")
        cols = v.shape[1]
        lanes = self.lanes
        scale = self.inv_sqrt_u(idx)
        buckets, signs = self.cs_w.locate(idx)
        dw = v.T[:, None, :] * scale  # (cols, lanes, k)
        dy = np.broadcast_to(v.T[:, None, :], dw.shape)
        cs = self.cs_w
        base = (np.arange(lanes * cs.rows) * cs.buckets).reshape(lanes, cs.rows, 1) + buckets
        flat = (np.arange(cols) * (lanes * cs.rows * cs.buckets))[:, None, None, None] + base
        np.add.at(cs_out.reshape(-1), flat.reshape(-1), (signs * dw[:, :, None, :]).reshape(-1))
        for ams, d, out in ((self.ams_w, dw, aw_out), (self.ams_y, dy, ay_out)):
            raw = ams._raw(ams._signs.signs(idx))  # (lanes, groups, k, width)
            prod = np.matmul(d.transpose(1, 0, 2)[:, None], raw)  # (lanes, groups, cols, width)
            out += prod.transpose(2, 0, 1, 3).reshape(cols, lanes, ams.estimators)

    def update(self, i, delta) -> None:
        self.scatter(i, delta, self.parts)

    def subset(self, lanes: slice) -> "RepetitionBank":
        return RepetitionBank(
            self.cfg, self.domain, self.seeds[lanes], self.reps[lanes],
            tensor_side=self.tensor_side, parts=tuple(p[lanes] for p in self.parts),
        )

    def _decode(self) -> Outcomes:
        cfg = self.cfg
        y_hat = self.ams_y.estimate()
        rows, buckets = self.cs_w.rows, self.cs_w.buckets
        est = self.cs_w._estimate_from(*self.cs_w.locate(np.arange(1, self.domain + 1)))
        mag = np.abs(est)
        k = min(cfg.heavy_count, self.domain)
        order = np.argsort(-mag, axis=1, kind="stable")
        heavy = order[:, :k]
        z_hat = self.ams_w.residual_estimate(heavy + 1, np.take_along_axis(est, heavy, axis=1))
        top = order[:, 0]
        w_top = est[np.arange(self.lanes), top]
        t = cfg.threshold * y_hat
        passed = (z_hat <= t) & (np.abs(w_top) >= t) & (w_top != 0)
        u = uniform_scale_paired(self.seeds, self.reps, (top + 1)[:, None])[:, 0]
        return Outcomes(passed, top + 1, w_top / quantized_inv_sqrt(u))

    def _chunk(self) -> int:
        return max(1, _DECODE_BUDGET // (self.cs_w.rows * self.domain))

    def outcomes(self) -> Outcomes:
        """Decode every lane."""
        step = self._chunk()
        parts = [self.subset(slice(s, s + step))._decode() for s in range(0, self.lanes, step)]
        return Outcomes(*(np.concatenate(p) for p in zip(
            *((o.passed, o.index, o.estimate) for o in parts))))

    def first_success(self) -> SampleOutcome:
        """Outcome of the lowest-indexed lane that does not FAIL (lanes decoded lazily)."""
        step = self._chunk()
        for s in range(0, self.lanes, step):
            out = self.subset(slice(s, s + step))._decode().first()
            if not out.failed:
                return out
        return FAIL

    def query_lane(self, lane: int) -> SampleOutcome:
        return self.subset(slice(lane, lane + 1))._decode().first()


def default_lanes(cfg: SamplerConfig) -> tuple[np.ndarray, np.ndarray]:
    reps = np.arange(cfg.repetitions, dtype=np.uint64)
    return np.full(reps.shape, cfg.seed, dtype=np.uint64), reps


class L2Sampler:
    """Turnstile l2 sampler over ``y in R^n`` with ``cfg.repetitions`` repetitions.

    ``lanes`` (seeds, reps) overrides which repetitions the instance holds;
    the default is repetitions ``0 .. R-1`` of ``cfg.seed``.
    """

    def __init__(self, cfg: SamplerConfig, lanes=None):
        self.cfg = cfg
        seeds, reps = lanes if lanes is not None else default_lanes(cfg)
        self.bank = RepetitionBank(cfg, cfg.n, seeds, reps)

    @property
    def state(self) -> np.ndarray:
        return self.bank.state

    def words(self) -> int:
        return self.bank.words()

    def update(self, i, delta) -> None:
        """Apply ``y_i += delta`` (``i`` and ``delta`` may be equal-length arrays)."""
        self.bank.update(i, delta)

    def query_rep(self, rep: int) -> SampleOutcome:
        return self.bank.query_lane(rep)

    def outcomes(self) -> Outcomes:
        return self.bank.outcomes()

    def sample(self) -> tuple[int, float]:
        out = self.bank.first_success()
        if out.failed:
            raise AllRepetitionsFailed(f"all {self.bank.lanes} repetitions returned FAIL")
        return out.index, out.estimate


def rep_query(sampler: L2Sampler, rep: int) -> SampleOutcome:
    return sampler.query_rep(rep)
