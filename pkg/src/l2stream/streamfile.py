"""Line-oriented stream files.

::

    SAMPLER-STREAM v1
    model=m3 n=64 d=8 eps=0.25 seed=7 C=2 R=400
    XVEC 1 0 2 ...            initial / fixed x (d values; d*d for tensor)
    AROW 3 0 1 -2 ...         row i of the initial / fixed A (d values)
    A2ROW 1 ...               row i of A2 (tensor model)
    U A 3 2 -5                A[3, 2] += -5
    U X 4 1.5                 x[4] += 1.5
    U A1 2 1 1                A1[2, 1] += 1
    Q                         query

Initialization lines precede every ``U`` and ``Q`` line. Optional config
keys ``C``, ``R``, ``rows``, ``buckets`` and ``groups`` override sampler
defaults. Blank lines are ignored. Emitting a parsed file reproduces it
whenever its numbers are written the way ``format_number`` writes them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HEADER = "SAMPLER-STREAM v1"
MODELS = ("m1", "m2", "m3", "tensor")
TARGETS = {"m1": ("A",), "m2": ("X",), "m3": ("A", "X"), "tensor": ("A1",)}
_INT_KEYS = ("n", "d", "seed", "R", "rows", "buckets", "groups")
_FLOAT_KEYS = ("eps", "C")
_OPTIONAL_ORDER = ("C", "R", "rows", "buckets", "groups")


class StreamFormatError(ValueError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


def format_number(v: float) -> str:
    """Shortest text that parses back to ``v``; integral values print without a point."""
    v = float(v)
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


@dataclass
class StreamConfig:
    model: str
    n: int
    d: int
    eps: float
    seed: int
    C: float | None = None
    R: int | None = None
    rows: int | None = None
    buckets: int | None = None
    groups: int | None = None

    def to_line(self) -> str:
        parts = [
            f"model={self.model}", f"n={self.n}", f"d={self.d}",
            f"eps={format_number(self.eps)}", f"seed={self.seed}",
        ]
        for key in _OPTIONAL_ORDER:
            v = getattr(self, key)
            if v is not None:
                parts.append(f"{key}={format_number(v) if key == 'C' else v}")
        return " ".join(parts)


@dataclass
class Update:
    target: str
    i: int
    j: int | None
    delta: float

    def to_line(self) -> str:
        idx = f"{self.i}" if self.j is None else f"{self.i} {self.j}"
        return f"U {self.target} {idx} {format_number(self.delta)}"


@dataclass
class Query:
    lineno: int = 0

    def to_line(self) -> str:
        return "Q"


@dataclass
class StreamFile:
    config: StreamConfig
    x: np.ndarray | None = None
    a_rows: dict[int, np.ndarray] = field(default_factory=dict)
    a2_rows: dict[int, np.ndarray] = field(default_factory=dict)
    events: list = field(default_factory=list)

    @property
    def x_length(self) -> int:
        d = self.config.d
        return d * d if self.config.model == "tensor" else d

    def dense_a(self) -> np.ndarray:
        A = np.zeros((self.config.n, self.config.d))
        for i, row in self.a_rows.items():
            A[i - 1] = row
        return A

    def dense_a2(self) -> np.ndarray:
        A2 = np.zeros((self.config.n, self.config.d))
        for i, row in self.a2_rows.items():
            A2[i - 1] = row
        return A2

    def initial_x(self) -> np.ndarray:
        return np.zeros(self.x_length) if self.x is None else self.x.copy()

    def updates(self) -> list[Update]:
        return [e for e in self.events if isinstance(e, Update)]


def _floats(tokens: list[str], lineno: int) -> np.ndarray:
    try:
        return np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError:
        raise StreamFormatError(lineno, f"bad number in {' '.join(tokens)!r}") from None


def _int(token: str, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise StreamFormatError(lineno, f"bad {what} {token!r}") from None


def _parse_config(line: str, lineno: int) -> StreamConfig:
    values: dict = {}
    for tok in line.split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise StreamFormatError(lineno, f"expected key=value, got {tok!r}")
        if key in values:
            raise StreamFormatError(lineno, f"duplicate key {key!r}")
        if key == "model":
            if val not in MODELS:
                raise StreamFormatError(lineno, f"unknown model {val!r}")
            values[key] = val
        elif key in _INT_KEYS:
            values[key] = _int(val, lineno, key)
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise StreamFormatError(lineno, f"bad {key} {val!r}") from None
        else:
            raise StreamFormatError(lineno, f"unknown config key {key!r}")
    for key in ("model", "n", "d", "eps", "seed"):
        if key not in values:
            raise StreamFormatError(lineno, f"config is missing {key!r}")
    cfg = StreamConfig(**values)
    if cfg.n < 1 or cfg.d < 1:
        raise StreamFormatError(lineno, "n and d must be positive")
    if not 0 < cfg.eps < 1:
        raise StreamFormatError(lineno, "eps must lie in (0, 1)")
    if not 0 <= cfg.seed < 2**64:
        raise StreamFormatError(lineno, "seed must be a 64-bit unsigned integer")
    if cfg.model == "tensor" and cfg.d * cfg.d < 1:
        raise StreamFormatError(lineno, "bad tensor dimensions")
    return cfg


def parse_stream(text: str) -> StreamFile:
    lines = text.splitlines()
    body = [(k + 1, ln.strip()) for k, ln in enumerate(lines) if ln.strip()]
    if not body or body[0][1] != HEADER:
        raise StreamFormatError(body[0][0] if body else 1, f"missing header {HEADER!r}")
    if len(body) < 2:
        raise StreamFormatError(body[0][0], "missing config line")
    cfg = _parse_config(body[1][1], body[1][0])
    sf = StreamFile(cfg)
    n, d = cfg.n, cfg.d
    in_body = False
    for lineno, line in body[2:]:
        tok = line.split()
        kind = tok[0]
        if kind in ("XVEC", "AROW", "A2ROW"):
            if in_body:
                raise StreamFormatError(lineno, f"{kind} after the first update or query")
            if kind == "XVEC":
                if sf.x is not None:
                    raise StreamFormatError(lineno, "duplicate XVEC")
                vals = _floats(tok[1:], lineno)
                if vals.size != sf.x_length:
                    raise StreamFormatError(lineno, f"XVEC needs {sf.x_length} values, got {vals.size}")
                sf.x = vals
                continue
            if kind == "A2ROW" and cfg.model != "tensor":
                raise StreamFormatError(lineno, "A2ROW is only valid for the tensor model")
            if kind == "AROW" and cfg.model == "tensor":
                raise StreamFormatError(lineno, "AROW is not valid for the tensor model")
            if len(tok) < 2:
                raise StreamFormatError(lineno, f"{kind} needs a row index")
            i = _int(tok[1], lineno, "row index")
            if not 1 <= i <= n:
                raise StreamFormatError(lineno, f"row {i} out of range [1, {n}]")
            rows = sf.a_rows if kind == "AROW" else sf.a2_rows
            if i in rows:
                raise StreamFormatError(lineno, f"duplicate {kind} {i}")
            vals = _floats(tok[2:], lineno)
            if vals.size != d:
                raise StreamFormatError(lineno, f"{kind} needs {d} values, got {vals.size}")
            rows[i] = vals
        elif kind == "Q":
            if len(tok) != 1:
                raise StreamFormatError(lineno, "Q takes no arguments")
            in_body = True
            sf.events.append(Query(lineno))
        elif kind == "U":
            in_body = True
            if len(tok) < 2:
                raise StreamFormatError(lineno, "U needs a target")
            target = tok[1]
            if target not in ("A", "X", "A1"):
                raise StreamFormatError(lineno, f"unknown target {target!r}")
            if target not in TARGETS[cfg.model]:
                raise StreamFormatError(lineno, f"target {target} is not updatable in model {cfg.model}")
            if target == "X":
                if len(tok) != 4:
                    raise StreamFormatError(lineno, "U X takes an index and a delta")
                j = _int(tok[2], lineno, "index")
                if not 1 <= j <= d:
                    raise StreamFormatError(lineno, f"index {j} out of range [1, {d}]")
                sf.events.append(Update("X", j, None, float(_floats(tok[3:], lineno)[0])))
            else:
                if len(tok) != 5:
                    raise StreamFormatError(lineno, f"U {target} takes a row, a column and a delta")
                i = _int(tok[2], lineno, "row")
                j = _int(tok[3], lineno, "column")
                if not (1 <= i <= n and 1 <= j <= d):
                    raise StreamFormatError(lineno, f"entry ({i}, {j}) out of range [1, {n}] x [1, {d}]")
                sf.events.append(Update(target, i, j, float(_floats(tok[4:], lineno)[0])))
        else:
            raise StreamFormatError(lineno, f"unknown line type {kind!r}")
    return sf


def emit_stream(sf: StreamFile) -> str:
    out = [HEADER, sf.config.to_line()]
    if sf.x is not None:
        out.append("XVEC " + " ".join(format_number(v) for v in sf.x))
    for i in sorted(sf.a_rows):
        out.append(f"AROW {i} " + " ".join(format_number(v) for v in sf.a_rows[i]))
    for i in sorted(sf.a2_rows):
        out.append(f"A2ROW {i} " + " ".join(format_number(v) for v in sf.a2_rows[i]))
    out.extend(e.to_line() for e in sf.events)
    return "\n".join(out) + "\n"


def final_vector(sf: StreamFile) -> np.ndarray:
    """The implicit ``y`` after every update, computed densely."""
    cfg = sf.config
    A = sf.dense_a()
    x = sf.initial_x()
    if cfg.model == "tensor":
        A1 = np.zeros((cfg.n, cfg.d))
        for u in sf.updates():
            A1[u.i - 1, u.j - 1] += u.delta
        X = x.reshape(cfg.d, cfg.d)
        return (A1 @ X @ sf.dense_a2().T).reshape(-1)
    for u in sf.updates():
        if u.target == "A":
            A[u.i - 1, u.j - 1] += u.delta
        else:
            x[u.i - 1] += u.delta
    return A @ x
