"""Birth-death chain specifications.

A chain lives on the nonnegative integers. From a state ``n >= 1`` it moves
to ``n - 1`` with probability ``l_n`` and to ``n + 1`` with probability
``r_n``; state 0 is absorbing and is never described explicitly.

Probabilities are either :class:`fractions.Fraction` (exact families) or
``float`` (float tables, or documents that give plain decimal numbers).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, NamedTuple, Union

import numpy as np

Number = Union[Fraction, float]

HALF = Fraction(1, 2)
FLOAT_SUM_TOL = 1e-15


class SpecError(ValueError):
    """A chain-spec document could not be turned into a :class:`ChainSpec`."""


class ProbPair(NamedTuple):
    left: Number
    right: Number


def _is_exact(*values) -> bool:
    return all(isinstance(v, Fraction) for v in values)


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class SimpleSymmetric:
    tag = "simple-symmetric"

    def pair(self, n: int) -> ProbPair:
        return ProbPair(HALF, HALF)

    @property
    def exact(self) -> bool:
        return True

    def geometric_tail(self):
        return 0, Fraction(1)

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class ConstantDrift:
    """``r_n = p`` for every ``n``."""

    p: Number
    tag = "constant"

    def pair(self, n: int) -> ProbPair:
        return ProbPair(1 - self.p, self.p)

    @property
    def exact(self) -> bool:
        return _is_exact(self.p)

    def geometric_tail(self):
        return 0, (1 - self.p) / self.p

    def params(self) -> dict:
        return {"p": _dump_number(self.p)}


@dataclass(frozen=True)
class Example1:
    """``l_n = n/(2n+1)``, ``r_n = (n+1)/(2n+1)``; ``t_n = 1/(n+1)``."""

    tag = "example1"

    def pair(self, n: int) -> ProbPair:
        return ProbPair(Fraction(n, 2 * n + 1), Fraction(n + 1, 2 * n + 1))

    @property
    def exact(self) -> bool:
        return True

    def geometric_tail(self):
        return None

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class Example1Mirrored:
    """Example1 with left and right exchanged; ``t_n = n + 1``."""

    tag = "example1-mirrored"

    def pair(self, n: int) -> ProbPair:
        return ProbPair(Fraction(n + 1, 2 * n + 1), Fraction(n, 2 * n + 1))

    @property
    def exact(self) -> bool:
        return True

    def geometric_tail(self):
        return None

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class EventuallyConstant:
    """Arbitrary pairs for ``n <= M``, then ``l_n = r_n = 1/2``."""

    prefix: tuple
    M: int
    tag = "eventually-constant"

    def pair(self, n: int) -> ProbPair:
        if n <= self.M:
            return ProbPair(*self.prefix[n - 1])
        if self.exact:
            return ProbPair(HALF, HALF)
        return ProbPair(0.5, 0.5)

    @property
    def exact(self) -> bool:
        return all(_is_exact(l, r) for l, r in self.prefix)

    def geometric_tail(self):
        return self.M, Fraction(1) if self.exact else 1.0

    def params(self) -> dict:
        return {"M": self.M, "prefix": [[_dump_number(l), _dump_number(r)] for l, r in self.prefix]}


TAIL_RULES = ("half", "constant", "repeat-last")


@dataclass(frozen=True)
class TailRule:
    rule: str
    p: Number | None = None

    def to_doc(self) -> dict:
        doc = {"rule": self.rule}
        if self.p is not None:
            doc["p"] = _dump_number(self.p)
        return doc


@dataclass(frozen=True)
class Table:
    """Finite table of ``(l_n, r_n)`` for ``n = 1..len(table)`` plus a tail rule.

    The tail rule decides every state past the table: ``half`` continues with
    ``1/2, 1/2``, ``constant`` with ``r_n = p``, ``repeat-last`` with the last
    table row.
    """

    table: tuple
    tail: TailRule
    tag = "table"

    def pair(self, n: int) -> ProbPair:
        if n <= len(self.table):
            return ProbPair(*self.table[n - 1])
        return self._tail_pair()

    def _tail_pair(self) -> ProbPair:
        if self.tail.rule == "half":
            return ProbPair(HALF, HALF) if self.exact else ProbPair(0.5, 0.5)
        if self.tail.rule == "constant":
            return ProbPair(1 - self.tail.p, self.tail.p)
        return ProbPair(*self.table[-1])

    @property
    def exact(self) -> bool:
        values = [v for row in self.table for v in row]
        if self.tail.p is not None:
            values.append(self.tail.p)
        return _is_exact(*values)

    def geometric_tail(self):
        l, r = self._tail_pair()
        return len(self.table), l / r

    def params(self) -> dict:
        return {
            "table": [[_dump_number(l), _dump_number(r)] for l, r in self.table],
            "tail": self.tail.to_doc(),
        }


@dataclass(frozen=True)
class RationalExpression:
    """``l_n = num(n) / den(n)`` for integer-or-rational polynomial coefficients.

    Coefficients are listed in ascending powers of ``n``. Example1 is
    ``numerator=(0, 1), denominator=(1, 2)``.
    """

    numerator: tuple
    denominator: tuple
    tag = "rational"

    def pair(self, n: int) -> ProbPair:
        left = _polyval(self.numerator, n) / _polyval(self.denominator, n)
        return ProbPair(left, 1 - left)

    @property
    def exact(self) -> bool:
        return True

    def geometric_tail(self):
        return None

    def left_array(self, n: np.ndarray) -> np.ndarray:
        num = np.polyval([float(c) for c in reversed(self.numerator)], n)
        den = np.polyval([float(c) for c in reversed(self.denominator)], n)
        return num / den

    def params(self) -> dict:
        return {
            "numerator": [_dump_number(c) for c in self.numerator],
            "denominator": [_dump_number(c) for c in self.denominator],
        }


def _polyval(coeffs, n: int) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * n + c
    return acc


Family = Union[
    SimpleSymmetric, ConstantDrift, Example1, Example1Mirrored, EventuallyConstant, Table, RationalExpression
]


@dataclass(frozen=True)
class ChainSpec:
    family: Family
    start_state: int
    name: str = field(default="", compare=False)

    @property
    def k(self) -> int:
        return self.start_state

    @property
    def exact(self) -> bool:
        return self.family.exact


def probs_at(spec: ChainSpec, n: int) -> ProbPair:
    """Return ``(l_n, r_n)``. State 0 is absorbing and has no pair."""
    if n < 1:
        raise ValueError(f"state {n} has no transition pair; state 0 is absorbing")
    return spec.family.pair(n)


def float_probs(spec: ChainSpec, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Float arrays ``left[n], right[n]`` for ``n = 0..n_max``; index 0 is zero."""
    n = np.arange(n_max + 1, dtype=np.float64)
    fam = spec.family
    if isinstance(fam, Example1):
        left, right = n / (2 * n + 1), (n + 1) / (2 * n + 1)
    elif isinstance(fam, Example1Mirrored):
        left, right = (n + 1) / (2 * n + 1), n / (2 * n + 1)
    elif isinstance(fam, SimpleSymmetric):
        left = right = np.full(n_max + 1, 0.5)
    elif isinstance(fam, ConstantDrift):
        left, right = np.full(n_max + 1, float(1 - fam.p)), np.full(n_max + 1, float(fam.p))
    elif isinstance(fam, RationalExpression):
        left = np.zeros(n_max + 1)
        left[1:] = fam.left_array(n[1:])
        right = 1.0 - left
    else:
        # eventually-constant and table families: explicit prefix, constant tail
        L = fam.geometric_tail()[0]
        tail_l, tail_r = fam.pair(L + 1)
        left = np.full(n_max + 1, float(tail_l))
        right = np.full(n_max + 1, float(tail_r))
        for i in range(1, min(L, n_max) + 1):
            l, r = fam.pair(i)
            left[i], right[i] = float(l), float(r)
    left = np.array(left, dtype=np.float64)
    right = np.array(right, dtype=np.float64)
    left[0] = right[0] = 0.0
    return left, right


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    state: int | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.valid


def check_pair(l: Number, r: Number) -> str | None:
    """Reason string if ``(l, r)`` is not a valid transition pair, else ``None``."""
    if not (l > 0 and r > 0):
        return "probability not strictly positive"
    if not (l < 1 and r < 1):
        return "probability not strictly below 1"
    if _is_exact(l, r):
        if l + r != 1:
            return "not normalized"
    elif abs(float(l) + float(r) - 1.0) > FLOAT_SUM_TOL:
        return "not normalized"
    return None


def validate(spec: ChainSpec, probe_depth: int = 1000) -> ValidationReport:
    """Check the chain invariants on states ``1..probe_depth``; report the first violation."""
    if not isinstance(spec.start_state, int) or spec.start_state < 1:
        return ValidationReport(False, None, "invalid start state")
    for n in range(1, probe_depth + 1):
        reason = check_pair(*spec.family.pair(n))
        if reason is not None:
            return ValidationReport(False, n, reason)
    return ValidationReport(True)


# ---------------------------------------------------------------------------
# documents


def parse_number(value: Any, what: str) -> Number:
    """JSON number or ``"a/b"`` string. Integers and strings are exact."""
    if isinstance(value, bool):
        raise SpecError(f"malformed document: {what} must be a number, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise SpecError(f"malformed document: {what} must be finite")
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise SpecError(f"malformed document: {what} is not a rational literal: {value!r}") from None
    raise SpecError(f"malformed document: {what} must be a number, got {type(value).__name__}")


def _dump_number(value: Number):
    if isinstance(value, Fraction):
        return str(value)
    return float(value)


def _pairs(raw: Any, what: str) -> tuple:
    if not isinstance(raw, list):
        raise SpecError(f"malformed document: {what} must be a list of [l, r] pairs")
    rows = []
    for i, row in enumerate(raw, start=1):
        if not isinstance(row, list) or len(row) != 2:
            raise SpecError(f"malformed document: {what}[{i}] must be a [l, r] pair")
        rows.append((parse_number(row[0], f"{what}[{i}].l"), parse_number(row[1], f"{what}[{i}].r")))
    return tuple(rows)


def _open_probability(value: Number, what: str) -> Number:
    if not 0 < value < 1:
        raise SpecError(f"{what} out of range: {value} is not in (0, 1)")
    return value


_FAMILY_KEYS = {
    "simple-symmetric": set(),
    "constant": {"p"},
    "example1": set(),
    "example1-mirrored": set(),
    "eventually-constant": {"M", "prefix"},
    "table": {"table", "tail"},
    "rational": {"numerator", "denominator"},
}


def parse_spec(document: dict | str) -> ChainSpec:
    """Build a :class:`ChainSpec` from a JSON object (or its text)."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpecError(f"malformed document: {exc}") from None
    if not isinstance(document, dict):
        raise SpecError("malformed document: top level must be a JSON object")

    tag = document.get("family")
    if tag is None:
        raise SpecError("missing required parameter 'family'")
    if tag not in _FAMILY_KEYS:
        raise SpecError(f"unknown family tag {tag!r}; expected one of {sorted(_FAMILY_KEYS)}")
    allowed = _FAMILY_KEYS[tag] | {"family", "k", "name"}
    unknown = set(document) - allowed
    if unknown:
        raise SpecError(f"unknown field(s) for family {tag!r}: {sorted(unknown)}")
    missing = [key for key in sorted(_FAMILY_KEYS[tag] | {"k"}) if key not in document]
    if missing:
        raise SpecError(f"missing required parameter {missing[0]!r} for family {tag!r}")

    k = document["k"]
    if isinstance(k, bool) or not isinstance(k, int):
        raise SpecError(f"malformed document: k must be an integer, got {k!r}")
    if k < 1:
        raise SpecError(f"k out of range: start state must be >= 1, got {k}")
    name = document.get("name", "")
    if not isinstance(name, str):
        raise SpecError("malformed document: name must be a string")

    if tag == "simple-symmetric":
        family = SimpleSymmetric()
    elif tag == "constant":
        family = ConstantDrift(_open_probability(parse_number(document["p"], "p"), "p"))
    elif tag == "example1":
        family = Example1()
    elif tag == "example1-mirrored":
        family = Example1Mirrored()
    elif tag == "eventually-constant":
        M = document["M"]
        if isinstance(M, bool) or not isinstance(M, int) or M < 1:
            raise SpecError(f"M out of range: must be an integer >= 1, got {M!r}")
        prefix = _pairs(document["prefix"], "prefix")
        if len(prefix) != M:
            raise SpecError(f"malformed document: prefix has {len(prefix)} rows but M = {M}")
        family = EventuallyConstant(prefix, M)
    elif tag == "table":
        table = _pairs(document["table"], "table")
        if not table:
            raise SpecError("malformed document: table must not be empty")
        family = Table(table, _parse_tail(document["tail"]))
    else:
        family = RationalExpression(
            _coefficients(document["numerator"], "numerator"),
            _coefficients(document["denominator"], "denominator"),
        )
    return ChainSpec(family, k, name)


def _parse_tail(raw: Any) -> TailRule:
    if not isinstance(raw, dict):
        raise SpecError("malformed document: tail must be an object")
    rule = raw.get("rule")
    if rule is None:
        raise SpecError("missing required parameter 'tail.rule'")
    if rule not in TAIL_RULES:
        raise SpecError(f"unknown tail rule {rule!r}; expected one of {list(TAIL_RULES)}")
    allowed = {"rule", "p"} if rule == "constant" else {"rule"}
    unknown = set(raw) - allowed
    if unknown:
        raise SpecError(f"unknown field(s) in tail: {sorted(unknown)}")
    if rule == "constant":
        if "p" not in raw:
            raise SpecError("missing required parameter 'tail.p' for tail rule 'constant'")
        return TailRule(rule, _open_probability(parse_number(raw["p"], "tail.p"), "tail.p"))
    return TailRule(rule)


def _coefficients(raw: Any, what: str) -> tuple:
    if not isinstance(raw, list) or not raw:
        raise SpecError(f"malformed document: {what} must be a non-empty coefficient list")
    coeffs = tuple(parse_number(c, f"{what} coefficient") for c in raw)
    if not _is_exact(*coeffs):
        raise SpecError(f"malformed document: {what} coefficients must be integers or 'a/b' strings")
    return coeffs


def serialize(spec: ChainSpec) -> dict:
    doc = {"family": spec.family.tag, "k": spec.start_state}
    doc.update(spec.family.params())
    if spec.name:
        doc["name"] = spec.name
    return doc


def load_spec(path) -> ChainSpec:
    with open(path) as fh:
        return parse_spec(json.load(fh))
