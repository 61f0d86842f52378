"""Instances, allocations, bivalued normalization, JSON I/O and generators."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

from .errors import (
    DimensionMismatch,
    NonPositiveDisutility,
    NotBivalued,
    ParseError,
    SchemaVersionMismatch,
    SingleValued,
)

SCHEMA_VERSION = 1

Matrix = tuple[tuple[Fraction, ...], ...]


def as_fraction(value: Any) -> Fraction:
    """Coerce ints, Fractions and "num/den" strings. Floats are refused."""
    if isinstance(value, bool):
        raise ParseError(f"not a rational: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"not a rational: {value!r}") from exc
    raise ParseError(f"not a rational: {value!r}")


def fmt_fraction(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class Instance:
    n: int
    m: int
    d: Matrix

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 0:
            raise DimensionMismatch(f"need n >= 1 and m >= 0, got n={self.n}, m={self.m}")
        if len(self.d) != self.n or any(len(row) != self.m for row in self.d):
            raise DimensionMismatch(f"matrix shape does not match n={self.n}, m={self.m}")
        for i, row in enumerate(self.d):
            for j, v in enumerate(row):
                if v <= 0:
                    raise NonPositiveDisutility(f"d[{i}][{j}] = {v} is not positive")

    @classmethod
    def from_matrix(cls, rows: Iterable[Iterable[Any]]) -> "Instance":
        d = tuple(tuple(as_fraction(v) for v in row) for row in rows)
        m = len(d[0]) if d else 0
        return cls(len(d), m, d)

    def cost(self, i: int, bundle: Iterable[int]) -> Fraction:
        row = self.d[i]
        return sum((row[j] for j in bundle), Fraction(0))

    def restrict(self, chores: Sequence[int]) -> "Instance":
        """Sub-instance on the given chores, reindexed 0..len-1."""
        return Instance(self.n, len(chores), tuple(tuple(row[j] for j in chores) for row in self.d))


@dataclass(frozen=True)
class ErInstance:
    base: Instance
    e: tuple[Fraction, ...]
    c: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if len(self.e) != self.base.n or len(self.c) != self.base.m:
            raise DimensionMismatch("e must have length n and c length m")
        if any(v <= 0 for v in self.e) or any(v <= 0 for v in self.c):
            raise NonPositiveDisutility("earning requirements and limits must be positive")

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def m(self) -> int:
        return self.base.m

    @property
    def d(self) -> Matrix:
        return self.base.d

    @property
    def feasible(self) -> bool:
        return sum(self.e) <= sum(self.c)

    @classmethod
    def uniform(cls, inst: Instance, e: Any = 1, c: Any = 1) -> "ErInstance":
        return cls(inst, (as_fraction(e),) * inst.n, (as_fraction(c),) * inst.m)


@dataclass(frozen=True)
class Allocation:
    """Integral allocation as per-agent bundles, optionally with payments."""

    bundles: tuple[tuple[int, ...], ...]
    payments: tuple[Fraction, ...] | None = None

    @classmethod
    def from_bundles(cls, bundles: Iterable[Iterable[int]], payments: Iterable[Any] | None = None) -> "Allocation":
        b = tuple(tuple(sorted(x)) for x in bundles)
        p = None if payments is None else tuple(as_fraction(v) for v in payments)
        return cls(b, p)

    @classmethod
    def from_owner(cls, owner: Sequence[int], n: int, payments: Iterable[Any] | None = None) -> "Allocation":
        bundles: list[list[int]] = [[] for _ in range(n)]
        for j, i in enumerate(owner):
            bundles[i].append(j)
        return cls.from_bundles(bundles, payments)

    @property
    def n(self) -> int:
        return len(self.bundles)

    def owner(self, m: int) -> list[int]:
        own = [-1] * m
        for i, bundle in enumerate(self.bundles):
            for j in bundle:
                own[j] = i
        return own

    def with_payments(self, payments: Iterable[Any] | None) -> "Allocation":
        return Allocation.from_bundles(self.bundles, payments)

    def check(self, inst: Instance) -> None:
        """Raise DimensionMismatch unless the bundles partition the chores."""
        if self.n != inst.n:
            raise DimensionMismatch(f"{self.n} bundles for {inst.n} agents")
        seen = sorted(j for bundle in self.bundles for j in bundle)
        if seen != list(range(inst.m)):
            raise DimensionMismatch("bundles do not partition the chores")
        if self.payments is not None and len(self.payments) != inst.m:
            raise DimensionMismatch("payment vector has the wrong length")


def validate(raw: Any) -> Instance:
    """Build a checked Instance from a JSON-like dict or a bare matrix."""
    if isinstance(raw, Instance):
        return raw
    if isinstance(raw, dict):
        try:
            rows = raw["d"]
        except KeyError as exc:
            raise ParseError("instance needs a 'd' matrix") from exc
        d = tuple(tuple(as_fraction(v) for v in row) for row in rows)
        n = raw.get("n", len(d))
        m = raw.get("m", len(d[0]) if d else 0)
        if not isinstance(n, int) or not isinstance(m, int):
            raise ParseError("n and m must be integers")
        return Instance(n, m, d)
    if isinstance(raw, (list, tuple)):
        return Instance.from_matrix(raw)
    raise ParseError(f"cannot read an instance from {type(raw).__name__}")


# bivalued instances


@dataclass(frozen=True)
class BivaluedForm:
    a: Fraction
    b: Fraction
    k: Fraction
    scaled: Instance
    original: Instance

    def rescale(self) -> Instance:
        return Instance(self.scaled.n, self.scaled.m, tuple(tuple(v * self.a for v in row) for row in self.scaled.d))


def normalize_bivalued(inst: Instance) -> BivaluedForm:
    values = sorted({v for row in inst.d for v in row})
    if len(values) > 2:
        raise NotBivalued(f"{len(values)} distinct disutility values")
    if len(values) < 2:
        raise SingleValued("all disutilities are equal")
    a, b = values
    scaled = Instance(inst.n, inst.m, tuple(tuple(v / a for v in row) for row in inst.d))
    return BivaluedForm(a, b, b / a, scaled, inst)


# generators


@dataclass(frozen=True)
class ValueModel:
    kind: str = "uniform"
    values: tuple[Fraction, ...] = ()
    rows: tuple[tuple[Fraction, Fraction], ...] = ()

    @classmethod
    def parse(cls, text: str) -> "ValueModel":
        """Parse 'uniform', 'bivalued:a:b' or '2-ary:a1,b1;a2,b2;...'."""
        kind, _, rest = text.partition(":")
        if kind == "uniform":
            return cls("uniform")
        if kind == "bivalued":
            a, b = (as_fraction(v) for v in rest.split(":"))
            return cls("bivalued", (a, b))
        if kind == "2-ary":
            pairs = tuple(tuple(as_fraction(v) for v in part.split(",")) for part in rest.split(";"))
            return cls("2-ary", rows=pairs)  # type: ignore[arg-type]
        raise ParseError(f"unknown value model {text!r}")

    def __str__(self) -> str:
        if self.kind == "bivalued":
            return "bivalued:" + ":".join(fmt_fraction(v) for v in self.values)
        if self.kind == "2-ary":
            return "2-ary:" + ";".join(",".join(fmt_fraction(v) for v in r) for r in self.rows)
        return self.kind


def random_instance(n: int, m: int, value_model: ValueModel | str = "uniform", seed: int = 0) -> Instance:
    """Deterministic random instance. Uniform entries are k/l with 1<=k<=12, 1<=l<=4."""
    if isinstance(value_model, str):
        value_model = ValueModel.parse(value_model)
    rng = random.Random(f"{n}:{m}:{value_model}:{seed}")
    rows = []
    for i in range(n):
        if value_model.kind == "uniform":
            row = [Fraction(rng.randint(1, 12), rng.randint(1, 4)) for _ in range(m)]
        elif value_model.kind == "bivalued":
            row = [rng.choice(value_model.values) for _ in range(m)]
        elif value_model.kind == "2-ary":
            pair = value_model.rows[i % len(value_model.rows)]
            row = [rng.choice(pair) for _ in range(m)]
        else:
            raise ParseError(f"unknown value model {value_model.kind!r}")
        rows.append(tuple(row))
    return Instance(n, m, tuple(rows))


# JSON


def _vec(values: Iterable[Fraction]) -> list[str]:
    return [fmt_fraction(v) for v in values]


def _mat(rows: Iterable[Iterable[Fraction]]) -> list[list[str]]:
    return [_vec(r) for r in rows]


def to_json(obj: Any) -> dict:
    from .market import ErEquilibrium

    if isinstance(obj, Instance):
        return {"v": SCHEMA_VERSION, "n": obj.n, "m": obj.m, "d": _mat(obj.d)}
    if isinstance(obj, ErInstance):
        out = to_json(obj.base)
        out["e"] = _vec(obj.e)
        out["c"] = _vec(obj.c)
        return out
    if isinstance(obj, Allocation):
        out = {"v": SCHEMA_VERSION, "bundles": [list(b) for b in obj.bundles]}
        if obj.payments is not None:
            out["payments"] = _vec(obj.payments)
        return out
    if isinstance(obj, ErEquilibrium):
        return {
            "v": SCHEMA_VERSION,
            "x": _mat(obj.x),
            "p": _vec(obj.p),
            "q": _mat(obj.q),
            "alpha": _vec(obj.alpha),
        }
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_json(data: Any) -> Any:
    from .market import ErEquilibrium

    if not isinstance(data, dict):
        raise ParseError("top-level JSON value must be an object")
    if data.get("v", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"schema version {data.get('v')!r}, expected {SCHEMA_VERSION}")
    try:
        if "bundles" in data:
            bundles = [[int(j) for j in b] for b in data["bundles"]]
            return Allocation.from_bundles(bundles, data.get("payments"))
        if "x" in data and "p" in data:
            x = tuple(tuple(as_fraction(v) for v in row) for row in data["x"])
            p = tuple(as_fraction(v) for v in data["p"])
            q = tuple(tuple(as_fraction(v) for v in row) for row in data["q"])
            alpha = tuple(as_fraction(v) for v in data["alpha"])
            return ErEquilibrium(x, p, q, alpha)
        base = validate(data)
        if "e" in data or "c" in data:
            e = tuple(as_fraction(v) for v in data["e"])
            c = tuple(as_fraction(v) for v in data["c"])
            return ErInstance(base, e, c)
        return base
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from exc


def dumps(obj: Any) -> str:
    return json.dumps(to_json(obj), indent=1)


def loads(text: str) -> Any:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return from_json(data)


def save(obj: Any, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def load(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
