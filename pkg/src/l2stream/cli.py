"""Command-line front end: ``run``, ``verify-dist``, ``bench-update`` and ``gen``.

Exit status is 0 on success, 1 when a sampler fails or a check does not
pass, and 2 on malformed input. ``L2STREAM_SEED`` supplies the default for
``--seed`` where a seed flag exists; an explicit flag always wins.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from typing import Iterable

import numpy as np

from . import oracle
from .matvec import MatVecSampler
from .montecarlo import first_successes, trial_seeds
from .sampler import AllRepetitionsFailed, RepetitionBank, SamplerConfig
from .streamfile import (
    StreamConfig,
    StreamFile,
    StreamFormatError,
    Update,
    Query,
    emit_stream,
    final_vector,
    parse_stream,
)
from .tensor import TensorSampler

SEED_ENV = "L2STREAM_SEED"
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
REPORT_FIELDS = (
    "model", "sampler", "trials", "accepted", "frequencies", "exact",
    "tv_distance", "chi2", "tv_threshold", "pass", "wall_seconds", "lanes_evaluated",
)


class InputError(Exception):
    pass


def _env_seed(default: int = 0) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _num(v: float) -> float | str:
    """Float rounded to 17 significant digits (non-finite values as strings)."""
    if not math.isfinite(v):
        return str(v)
    return float(f"{v:.17g}")


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "))


# ---------------------------------------------------------------- replay


def sampler_config(sf: StreamFile, args=None, *, seed: int | None = None) -> SamplerConfig:
    """Sampler parameters: command-line overrides, then the file's config, then defaults."""
    cfg = sf.config

    def pick(flag: str, key: str):
        v = getattr(args, flag, None) if args is not None else None
        return v if v is not None else getattr(cfg, key)

    kwargs = dict(
        n=cfg.n, eps=cfg.eps, seed=cfg.seed if seed is None else seed,
        R=pick("R", "R"), rows=pick("rows", "rows"), buckets=pick("buckets", "buckets"),
        ams_groups=pick("groups", "groups"),
    )
    C = pick("C", "C")
    if C is not None:
        kwargs["C"] = C
    try:
        return SamplerConfig(**kwargs)
    except ValueError as e:
        raise InputError(str(e)) from None


def build_sampler(sf: StreamFile, scfg: SamplerConfig, lanes=None):
    cfg = sf.config
    x = sf.initial_x()
    A = sf.dense_a() if sf.a_rows else None
    if cfg.model == "tensor":
        return TensorSampler(cfg.n, cfg.d, scfg, sf.dense_a2(), x, lanes=lanes)
    if cfg.model == "m2":
        A = sf.dense_a()
    fixed_x = x if (cfg.model == "m1" or sf.x is not None) else None
    return MatVecSampler(cfg.model, cfg.n, cfg.d, scfg, fixed_A=A, fixed_x=fixed_x, lanes=lanes)


def _apply_batch(sampler, batch: list[Update]) -> None:
    target = batch[0].target
    i = np.array([u.i for u in batch], dtype=np.int64)
    delta = np.array([u.delta for u in batch])
    if target == "X":
        sampler.update_x(i, delta)
        return
    j = np.array([u.j for u in batch], dtype=np.int64)
    if target == "A1":
        sampler.update_a1(i, j, delta)
    else:
        sampler.update_a(i, j, delta)


def replay(sampler, events: Iterable) -> Iterable[Query]:
    """Apply updates in order (runs of one target in one batch); yield at each query."""
    batch: list[Update] = []
    for e in events:
        if isinstance(e, Update) and (not batch or batch[0].target == e.target):
            batch.append(e)
            continue
        if batch:
            _apply_batch(sampler, batch)
            batch = []
        if isinstance(e, Update):
            batch.append(e)
        else:
            yield e
    if batch:
        _apply_batch(sampler, batch)


def decodable_bank(sampler) -> RepetitionBank:
    return sampler.bank if isinstance(sampler, TensorSampler) else sampler.decodable_bank()


def _read_stream(path: str) -> StreamFile:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_stream(fh.read())
    except OSError as e:
        raise InputError(f"{path}: {e.strerror}") from None
    except StreamFormatError as e:
        raise InputError(f"{path}: {e}") from None


# ---------------------------------------------------------------- commands


def cmd_run(args, out) -> int:
    sf = _read_stream(args.stream)
    scfg = sampler_config(sf, args, seed=args.seed)
    sampler = build_sampler(sf, scfg)
    status = EXIT_OK
    for k, q in enumerate(replay(sampler, sf.events)):
        rec = {"query": k, "line": q.lineno}
        try:
            idx, est = sampler.query()
            rec["index"] = list(idx) if isinstance(idx, tuple) else idx
            rec["estimate"] = _num(est)
        except AllRepetitionsFailed as e:
            rec["error"] = "AllRepetitionsFailed"
            rec["message"] = str(e)
            status = EXIT_FAIL
        print(_dumps(rec), file=out, flush=True)
    return status


def _vector_stream(values: list[float], eps: float, seed: int) -> StreamFile:
    """An m1 file whose ``y`` is ``values``: a single column of A, with x = (1)."""
    sf = StreamFile(StreamConfig("m1", len(values), 1, eps, seed), x=np.ones(1))
    sf.events = [Update("A", i + 1, 1, float(v)) for i, v in enumerate(values) if v != 0]
    return sf


def verify_dist(sf: StreamFile, scfg: SamplerConfig, trials: int, tv_threshold: float,
                sampler: str = "l2", base_seed: int | None = None) -> dict:
    """Fresh-seed sampling distribution of the file's final vector against the exact one."""
    base = scfg.seed if base_seed is None else base_seed
    y = final_vector(sf)
    t0 = time.perf_counter()
    lanes = 0
    if sampler == "softmax":
        exact = oracle.exact_softmax_distribution(y)
        draws = oracle.offline_exp_sample(y, base, size=trials)
        counts = np.bincount(draws - 1, minlength=y.size)
    else:
        try:
            exact = oracle.exact_l2_distribution(y)
        except ValueError:
            exact = np.zeros(y.size)

        def build(seeds, reps):
            s = build_sampler(sf, scfg, lanes=(seeds, reps))
            for _ in replay(s, sf.events):
                pass
            return decodable_bank(s)

        res = first_successes(build, trial_seeds(base, trials), scfg.repetitions)
        counts = res.counts(y.size)
        lanes = res.lanes_used
    accepted = int(counts.sum())
    freq = counts / accepted if accepted else np.zeros(y.size)
    tv = oracle.tv_distance(freq, exact) if accepted and exact.any() else 1.0
    chi2 = oracle.chi2_stat(counts, exact) if accepted and exact.any() else math.inf
    return {
        "model": sf.config.model,
        "sampler": sampler,
        "trials": trials,
        "accepted": accepted,
        "frequencies": [_num(v) for v in freq],
        "exact": [_num(v) for v in exact],
        "tv_distance": _num(tv),
        "chi2": _num(chi2),
        "tv_threshold": _num(tv_threshold),
        "pass": bool(accepted > 0 and tv <= tv_threshold),
        "wall_seconds": _num(time.perf_counter() - t0),
        "lanes_evaluated": lanes,
    }


def cmd_verify_dist(args, out) -> int:
    if (args.stream is None) == (args.vector is None):
        raise InputError("give exactly one of a stream file or --vector")
    seed = args.seed if args.seed is not None else _env_seed(None)
    if args.stream is not None:
        sf = _read_stream(args.stream)
    else:
        sf = _vector_stream(args.vector, args.eps, 0 if seed is None else seed)
    scfg = sampler_config(sf, args)
    report = verify_dist(sf, scfg, args.trials, args.tv_threshold, args.sampler, seed)
    print(_dumps(report), file=out)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def time_updates(model: str, n: int, d: int, scfg: SamplerConfig, updates: int,
                 seed: int = 0, repeats: int = 3) -> float:
    """Median over ``repeats`` of the mean wall time of one update (nanoseconds)."""
    rng = np.random.default_rng(seed)
    rows = rng.integers(1, n + 1, updates)
    cols = rng.integers(1, d + 1, updates)
    deltas = rng.integers(-5, 6, updates).astype(float)
    if model == "tensor":
        s = TensorSampler(n, d, scfg, rng.standard_normal((n, d)), rng.standard_normal(d * d))
        step = s.update_a1
    elif model == "m2":
        s = MatVecSampler("m2", n, d, scfg, fixed_A=np.zeros((n, d)))
        step = lambda i, j, v: s.update_x(j, v)
    else:
        s = MatVecSampler(model, n, d, scfg, fixed_x=rng.standard_normal(d))
        step = s.update_a
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        for k in range(updates):
            step(int(rows[k]), int(cols[k]), float(deltas[k]))
        samples.append((time.perf_counter_ns() - t0) / updates)
    return float(np.median(samples))


def cmd_bench_update(args, out) -> int:
    seed = args.seed if args.seed is not None else _env_seed()
    rows = []
    for n in args.n:
        scfg = SamplerConfig(n=n, eps=args.eps, C=args.C, R=args.R, rows=args.rows,
                             buckets=args.buckets, ams_groups=args.groups, seed=seed)
        ns = time_updates(args.model, n, args.d, scfg, args.updates, seed)
        rows.append({"n": n, "ns_per_update": _num(ns)})
        print(f"# {args.model} n={n} d={args.d}: {ns:.0f} ns/update", file=sys.stderr)
    base = rows[0]["ns_per_update"]
    for r in rows:
        r["ratio_to_first"] = _num(r["ns_per_update"] / base)
    print(_dumps({"model": args.model, "d": args.d, "eps": _num(args.eps), "R": args.R,
                  "rows": args.rows, "buckets": args.buckets, "groups": args.groups,
                  "updates": args.updates, "results": rows}), file=out)
    return EXIT_OK


def gen_random(model: str, n: int, d: int, eps: float, seed: int, updates: int,
               queries: int = 1, **cfg_extra) -> StreamFile:
    rng = np.random.default_rng(seed)
    sf = StreamFile(StreamConfig(model, n, d, eps, seed, **cfg_extra))
    if model == "m1":
        sf.x = rng.integers(-3, 4, d).astype(float)
    elif model == "m2":
        sf.a_rows = {i: rng.integers(-3, 4, d).astype(float) for i in range(1, n + 1)}
    elif model == "tensor":
        sf.x = rng.integers(-2, 3, d * d).astype(float)
        sf.a2_rows = {i: rng.integers(-3, 4, d).astype(float) for i in range(1, n + 1)}
    targets = {"m1": ["A"], "m2": ["X"], "m3": ["A", "X"], "tensor": ["A1"]}[model]
    events: list = []
    # queries evenly spaced, the last one after the final update
    q_at = {max(1, round(updates * (k + 1) / queries)) for k in range(queries)}
    for k in range(1, updates + 1):
        t = targets[rng.integers(len(targets))]
        delta = float(rng.integers(-5, 6))
        if t == "X":
            events.append(Update("X", int(rng.integers(1, d + 1)), None, delta))
        else:
            events.append(Update(t, int(rng.integers(1, n + 1)), int(rng.integers(1, d + 1)), delta))
        if k in q_at:
            events.append(Query())
    sf.events = events
    return sf


def gen_index(d: int, i: int, bit: int, eps: float, seed: int, **cfg_extra) -> StreamFile:
    """INDEX instance as an m3 stream: A's nonzero entries, then x = e_i, then a query."""
    inst = oracle.gen_index_hard_instance(d, i, bit, seed=seed)
    sf = StreamFile(StreamConfig("m3", d + 1, d, eps, seed, **cfg_extra))
    rr, cc = np.nonzero(inst.A)
    sf.events = [Update("A", int(r) + 1, int(c) + 1, float(inst.A[r, c])) for r, c in zip(rr, cc)]
    sf.events += [Update("X", i, None, 1.0), Query()]
    return sf


def gen_disjointness(n: int, set_a, set_b, C: float, eps: float, seed: int, **cfg_extra) -> StreamFile:
    """Disjointness instance as an m1 stream: Alice's then Bob's scaled indicators."""
    inst = oracle.gen_disjointness_instance(n, set_a, set_b, C)
    scale = 100 * C * math.log(n)
    sf = StreamFile(StreamConfig("m1", n, 1, eps, seed, **cfg_extra), x=np.ones(1))
    sf.events = [Update("A", a, 1, scale) for a in inst.params["set_a"]]
    sf.events += [Update("A", b, 1, scale) for b in inst.params["set_b"]]
    sf.events.append(Query())
    return sf


def _cfg_extra(args) -> dict:
    return {k: getattr(args, k) for k in ("C", "R", "rows", "buckets", "groups")
            if getattr(args, k, None) is not None}


def cmd_gen(args, out) -> int:
    seed = args.seed if args.seed is not None else _env_seed()
    extra = _cfg_extra(args)
    try:
        if args.kind == "random":
            sf = gen_random(args.model, args.n, args.d, args.eps, seed, args.updates, args.queries, **extra)
        elif args.kind == "index":
            sf = gen_index(args.d, args.i, args.bit, args.eps, seed, **extra)
        else:
            sf = gen_disjointness(args.n, args.set_a, args.set_b, args.C_inst, args.eps, seed, **extra)
    except (ValueError, IndexError) as e:
        raise InputError(str(e)) from None
    out.write(emit_stream(sf))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _sketch_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--C", type=float, help="threshold constant")
    p.add_argument("--R", type=int, help="repetitions")
    p.add_argument("--rows", type=int, help="CountSketch rows")
    p.add_argument("--buckets", type=int, help="CountSketch buckets")
    p.add_argument("--groups", type=int, help="AMS groups of 16 estimators")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="l2stream", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replay a stream file and answer its queries (JSON lines)")
    p.add_argument("stream")
    p.add_argument("--seed", type=int, help="override the file's master seed")
    _sketch_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify-dist", help="Monte Carlo sampling distribution vs. the exact one")
    p.add_argument("stream", nargs="?")
    p.add_argument("--vector", type=float, nargs="+", help="sample from this y instead of a file")
    p.add_argument("--eps", type=float, default=0.25, help="accuracy for --vector")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--tv-threshold", type=float, default=0.07)
    p.add_argument("--sampler", choices=("l2", "softmax"), default="l2")
    p.add_argument("--seed", type=int, help=f"base seed of the trials (default ${SEED_ENV} or the file's)")
    _sketch_flags(p)
    p.set_defaults(func=cmd_verify_dist)

    p = sub.add_parser("bench-update", help="per-update wall time for several n")
    p.add_argument("--model", choices=("m1", "m2", "m3", "tensor"), default="m1")
    p.add_argument("--n", type=int, nargs="+", default=[1024, 16384])
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--updates", type=int, default=500)
    p.add_argument("--seed", type=int)
    p.add_argument("--C", type=float, default=24.0)
    p.add_argument("--R", type=int, default=32)
    p.add_argument("--rows", type=int, default=5)
    p.add_argument("--buckets", type=int, default=1600)
    p.add_argument("--groups", type=int, default=3)
    p.set_defaults(func=cmd_bench_update)

    p = sub.add_parser("gen", help="write a stream file to standard output")
    p.add_argument("kind", choices=("random", "index", "disjointness"))
    p.add_argument("--model", choices=("m1", "m2", "m3", "tensor"), default="m1")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--updates", type=int, default=1000)
    p.add_argument("--queries", type=int, default=1)
    p.add_argument("--i", type=int, default=1, help="planted coordinate (index)")
    p.add_argument("--bit", type=int, choices=(0, 1), default=1)
    p.add_argument("--set-a", type=int, nargs="*", default=[])
    p.add_argument("--set-b", type=int, nargs="*", default=[])
    p.add_argument("--instance-C", dest="C_inst", type=float, default=1.0,
                   help="constant of the disjointness scaling")
    p.add_argument("--seed", type=int)
    _sketch_flags(p)
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv: list[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except InputError as e:
        print(f"l2stream: error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
