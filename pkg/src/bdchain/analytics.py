"""Closed-form quantities of a birth-death chain.

Everything is driven by the ratio sequence ``t_0 = 1``,
``t_n = (l_1 ... l_n) / (r_1 ... r_n)`` and its prefix sums
``x_n = t_0 + ... + t_{n-1}``. Exact families are evaluated in
:class:`~fractions.Fraction`; float families in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .chain import (
    ChainSpec,
    Example1,
    Example1Mirrored,
    Number,
    RationalExpression,
    float_probs,
    probs_at,
)

DEFAULT_HORIZON = 10**6
DEFAULT_TOLERANCE = 1e-9
ZERO_THRESHOLD = 1e-12
INFINITE_THRESHOLD = 1e12


class TransientChainError(ValueError):
    """The operation needs ``P(extinction) = 1`` but the chain escapes to infinity."""


class UndeterminedTailError(ValueError):
    """The tail limit of ``t_n`` could not be classified."""


class InconclusiveError(ValueError):
    """A numeric series test could not decide convergence."""


@dataclass(frozen=True)
class Extended:
    """A nonnegative value or ``+inf``. ``value is None`` means ``+inf``."""

    value: Number | None

    @classmethod
    def infinity(cls) -> "Extended":
        return cls(None)

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    def __float__(self) -> float:
        return math.inf if self.value is None else float(self.value)

    def __str__(self) -> str:
        return "inf" if self.value is None else str(self.value)


@dataclass(frozen=True)
class TailClass:
    kind: str  # "positive-finite" | "zero" | "infinite" | "undetermined"
    value: Number | None = None
    evidence: str = ""

    @property
    def determined(self) -> bool:
        return self.kind != "undetermined"


@dataclass
class RatioTable:
    t: list
    x: list
    t_limit: TailClass
    exact: bool
    precision_loss_at: int | None = None


@dataclass
class OccupationProfile:
    """Expected visit counts per state under some stopping regime."""

    start_state: int
    values: Mapping[int, Number]
    regime: object = "until-extinction"
    half_widths: Mapping[int, float] | None = None

    def normalized(self, spec: ChainSpec) -> dict[int, Number]:
        """``values[n] * t_{n-1} * l_n``, the quantity that is non-increasing for ``n >= k``."""
        if not self.values:
            return {}
        table = ratio_table(spec, max(self.values) + 1, classify=False)
        out = {}
        for n, g in sorted(self.values.items()):
            left = probs_at(spec, n).left
            if not table.exact:
                left = float(left)
            out[n] = g * table.t[n - 1] * left
        return out


@dataclass(frozen=True)
class ExtinctionResult:
    probability: Number | None
    method: str  # "exact" | "closed-form" | "numeric" | "inconclusive"
    error_bound: float = 0.0
    diagnostic: str = ""

    @property
    def certain(self) -> bool:
        return self.probability is not None

    @property
    def recurrent(self) -> bool:
        return self.probability is not None and self.probability == 1


@dataclass(frozen=True)
class CriterionResult:
    verdict: str  # "satisfied" | "violated" | "inconclusive"
    method: str
    partial_sums: list = field(default_factory=list)
    diagnostic: str = ""


# ---------------------------------------------------------------------------
# ratio sequence


def _ratio(spec: ChainSpec, n: int) -> Number:
    l, r = probs_at(spec, n)
    if spec.exact:
        return l / r
    return float(l) / float(r)


def ratio_table(spec: ChainSpec, N: int, classify: bool = True) -> RatioTable:
    """``t[0..N]`` and ``x[0..N+1]`` for the chain."""
    if N < 1:
        raise ValueError("N must be >= 1")
    exact = spec.exact
    one = Fraction(1) if exact else 1.0
    t = [one]
    loss = None
    for n in range(1, N + 1):
        t.append(t[-1] * _ratio(spec, n))
        if loss is None and not exact and (t[-1] == 0.0 or math.isinf(t[-1])):
            loss = n
    x = [Fraction(0) if exact else 0.0]
    if exact:
        for v in t:
            x.append(x[-1] + v)
    else:
        x.extend(np.cumsum(np.asarray(t, dtype=np.float64)).tolist())
    tail = classify_tail(spec) if classify else TailClass("undetermined", evidence="not classified")
    return RatioTable(t, x, tail, exact, loss)


def _t_at(spec: ChainSpec, n: int) -> Number:
    fam = spec.family
    if isinstance(fam, Example1):
        return Fraction(1, n + 1)
    if isinstance(fam, Example1Mirrored):
        return Fraction(n + 1)
    return ratio_table(spec, max(n, 1), classify=False).t[n]


def classify_sequence(log_t: np.ndarray, tolerance: float = DEFAULT_TOLERANCE) -> TailClass:
    """Numeric verdict on the limit of ``t_n`` given ``log t_n`` for ``n = 0..H``.

    Only the final decade of indices is examined.
    """
    H = len(log_t) - 1
    window = log_t[H - max(H // 10, 1):]
    steps = np.diff(window)
    last = log_t[-1]
    if last < math.log(ZERO_THRESHOLD) and np.all(steps < 0):
        return TailClass("zero", evidence=f"t_{H} = {math.exp(last):.3e}, decreasing over last {len(steps)} indices")
    if last > math.log(INFINITE_THRESHOLD) and np.all(steps > 0):
        return TailClass("infinite", evidence=f"log t_{H} = {last:.3f}, increasing over last {len(steps)} indices")
    spread = float(window.max() - window.min())
    if spread < tolerance:
        value = math.exp(last)
        return TailClass(
            "positive-finite", value, evidence=f"relative oscillation {spread:.2e} < {tolerance:g} over last {len(steps)} indices"
        )
    return TailClass("undetermined", evidence=f"relative oscillation {spread:.2e} over last {len(steps)} indices; no monotone escape")


def _log_t_numeric(spec: ChainSpec, horizon: int) -> np.ndarray:
    left, right = float_probs(spec, horizon)
    if np.any(left[1:] <= 0) or np.any(right[1:] <= 0):
        bad = int(np.argmax((left[1:] <= 0) | (right[1:] <= 0))) + 1
        raise ValueError(f"transition probabilities leave (0, 1) at state {bad}")
    log_t = np.empty(horizon + 1)
    log_t[0] = 0.0
    np.cumsum(np.log(left[1:]) - np.log(right[1:]), out=log_t[1:])
    return log_t


def classify_tail(spec: ChainSpec, tolerance: float = DEFAULT_TOLERANCE, horizon: int = DEFAULT_HORIZON) -> TailClass:
    """Classify ``t_inf = lim t_n`` as positive-finite, zero, infinite or undetermined."""
    fam = spec.family
    if isinstance(fam, Example1):
        return TailClass("zero", evidence="t_n = 1/(n+1)")
    if isinstance(fam, Example1Mirrored):
        return TailClass("infinite", evidence="t_n = n+1")
    tail = fam.geometric_tail()
    if tail is not None:
        L, rho = tail
        if rho == 1:
            t_L = ratio_table(spec, L, classify=False).t[L] if L else (Fraction(1) if spec.exact else 1.0)
            return TailClass("positive-finite", t_L, evidence=f"t_n constant for n >= {L}")
        if rho < 1:
            return TailClass("zero", evidence=f"geometric tail with ratio {rho} < 1 after n = {L}")
        return TailClass("infinite", evidence=f"geometric tail with ratio {rho} > 1 after n = {L}")
    return classify_sequence(_log_t_numeric(spec, horizon), tolerance)


# ---------------------------------------------------------------------------
# exit and extinction probabilities


def exit_probabilities(spec: ChainSpec, a: int, start: int, b: int) -> tuple[Number, Number]:
    """Probabilities of hitting ``a`` before ``b`` and ``b`` before ``a`` from ``start``."""
    if not 0 <= a < start < b:
        raise ValueError(f"need 0 <= a < start < b, got a={a}, start={start}, b={b}")
    x = ratio_table(spec, b, classify=False).x
    return _exit_from_x(x, a, start, b)


def _exit_from_x(x, a: int, start: int, b: int):
    total = x[b] - x[a]
    hit_a = (x[b] - x[start]) / total
    hit_b = (x[start] - x[a]) / total
    return hit_a, hit_b


def exit_probability_grid(spec: ChainSpec, b_max: int) -> dict[tuple[int, int], tuple[Number, Number]]:
    """All ``(start, b)`` with ``a = 0`` and ``b <= b_max`` from a single ratio table."""
    x = ratio_table(spec, b_max, classify=False).x
    if not spec.exact:
        return {(s, b): _exit_from_x(x, 0, s, b) for b in range(2, b_max + 1) for s in range(1, b)}
    # common denominator: every entry becomes one integer ratio
    scale = math.lcm(*(v.denominator for v in x))
    X = [v.numerator * (scale // v.denominator) for v in x]
    return {(s, b): (Fraction(X[b] - X[s], X[b]), Fraction(X[s], X[b]))
            for b in range(2, b_max + 1) for s in range(1, b)}


def extinction_probability(
    spec: ChainSpec, series_horizon: int = DEFAULT_HORIZON, tolerance: float = 1e-12
) -> ExtinctionResult:
    """``sum_{n>=k} t_n / sum_{n>=0} t_n``, read as 1 when the sums diverge."""
    fam = spec.family
    k = spec.k
    if isinstance(fam, Example1):
        return ExtinctionResult(Fraction(1), "closed-form", diagnostic="sum of 1/(n+1) diverges")
    if isinstance(fam, Example1Mirrored):
        return ExtinctionResult(Fraction(1), "closed-form", diagnostic="sum of (n+1) diverges")
    tail = fam.geometric_tail()
    if tail is not None:
        L, rho = tail
        one = Fraction(1) if spec.exact else 1.0
        if rho >= 1:
            return ExtinctionResult(one, "closed-form", diagnostic=f"t_n does not vanish (ratio {rho} after n = {L})")
        table = ratio_table(spec, max(L, k), classify=False)
        x = table.x
        tail_sum = table.t[L] * rho / (1 - rho)  # sum_{n > L} t_n
        total = x[L + 1] + tail_sum
        if k <= L + 1:
            prob = (total - x[k]) / total
        else:
            prob = (table.t[L] * rho ** (k - L) / (1 - rho)) / total
        return ExtinctionResult(prob, "closed-form", diagnostic=f"geometric tail with ratio {rho} after n = {L}")
    return _extinction_numeric(spec, series_horizon, tolerance)


def _extinction_numeric(spec: ChainSpec, horizon: int, tolerance: float) -> ExtinctionResult:
    log_t = _log_t_numeric(spec, horizon)
    verdict = classify_sequence(log_t)
    if verdict.kind in ("positive-finite", "infinite"):
        return ExtinctionResult(1.0, "numeric", diagnostic=f"terms do not vanish ({verdict.evidence})")
    lo = horizon // 10
    alpha = -(log_t[horizon] - log_t[lo]) / math.log(horizon / lo)
    if alpha < 0.9:
        return ExtinctionResult(1.0, "numeric", diagnostic=f"t_n decays like n^-{alpha:.3f}; series diverges")
    if alpha <= 1.1:
        return ExtinctionResult(
            None, "inconclusive", diagnostic=f"t_n decays like n^-{alpha:.3f}; too close to the harmonic boundary"
        )
    t = np.exp(log_t)
    head = math.fsum(t)
    # power-law tail estimate, doubled to bound it
    tail_est = float(t[-1]) * horizon / (alpha - 1)
    head_k = math.fsum(t[: spec.k])
    prob = (head - head_k + tail_est) / (head + tail_est)
    worst = [(head - head_k + s) / (head + s) for s in (0.0, 2 * tail_est)]
    bound = max(abs(w - prob) for w in worst)
    return ExtinctionResult(
        prob, "numeric", error_bound=bound, diagnostic=f"partial sums to n = {horizon}, tail ~ n^-{alpha:.3f}"
    )


# ---------------------------------------------------------------------------
# occupation counts and the limit expectation


def _require_recurrent(spec: ChainSpec) -> None:
    ext = extinction_probability(spec)
    if not ext.certain:
        raise InconclusiveError(f"cannot decide whether the chain is recurrent: {ext.diagnostic}")
    if not ext.recurrent:
        raise TransientChainError(
            f"extinction probability is {ext.probability} < 1; occupation counts until extinction are "
            "not given by the one-barrier formula and E[X_T] grows without bound along any family reaching T_D"
        )


def occupation_until_extinction(spec: ChainSpec, n: int) -> Number:
    """Expected visits to ``n`` before absorption: ``min(x_n, x_k) / (t_{n-1} l_n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _require_recurrent(spec)
    table = ratio_table(spec, max(n, spec.k), classify=False)
    return _gamma(spec, table, n)


def _gamma(spec: ChainSpec, table: RatioTable, n: int) -> Number:
    x, t = table.x, table.t
    left = probs_at(spec, n).left
    if not table.exact:
        left = float(left)
    return min(x[n], x[spec.k]) / (t[n - 1] * left)


def occupation_profile_until_extinction(spec: ChainSpec, n_max: int) -> OccupationProfile:
    _require_recurrent(spec)
    table = ratio_table(spec, max(n_max, spec.k), classify=False)
    values = {n: _gamma(spec, table, n) for n in range(1, n_max + 1)}
    return OccupationProfile(spec.k, values, "until-extinction")


def limit_expectation(spec: ChainSpec) -> Extended:
    """``lim E[X_{T_m}] = x_k / t_inf`` for stopping times increasing to extinction."""
    ext = extinction_probability(spec)
    if ext.certain and not ext.recurrent:
        return Extended.infinity()
    tail = classify_tail(spec)
    if not tail.determined:
        raise UndeterminedTailError(f"the limit of t_n is not determined: {tail.evidence}")
    if tail.kind == "zero":
        return Extended.infinity()
    if tail.kind == "infinite":
        return Extended(Fraction(0) if spec.exact else 0.0)
    x_k = ratio_table(spec, spec.k, classify=False).x[spec.k]
    return Extended(x_k / tail.value)


def stopping_identity_rhs(profile: OccupationProfile, spec: ChainSpec) -> Number:
    """``k + sum_n values[n] (r_n - l_n)``, the expectation implied by an occupation profile."""
    total = Fraction(spec.k)
    exact = all(isinstance(v, Fraction) for v in profile.values.values())
    if not exact:
        total = float(total)
    terms = []
    for n, g in profile.values.items():
        if isinstance(g, float) and not math.isfinite(g):
            raise ValueError(f"occupation at state {n} is not finite; the identity is not summable")
        l, r = probs_at(spec, n)
        if not exact:
            l, r = float(l), float(r)
        terms.append(g * (r - l))
    if exact:
        return total + sum(terms, Fraction(0))
    return total + math.fsum(terms)


def stopping_identity_partial_sums(profile: OccupationProfile, spec: ChainSpec) -> list:
    """Running values of the identity's right side as states are added in order."""
    acc = Fraction(spec.k)
    out = []
    for n in sorted(profile.values):
        l, r = probs_at(spec, n)
        acc = acc + profile.values[n] * (r - l)
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# summability of |1 - l_n / r_n|


def _criterion_terms(spec: ChainSpec, horizon: int) -> np.ndarray:
    left, right = float_probs(spec, horizon)
    terms = np.abs(1.0 - left[1:] / right[1:])
    return terms


def _evidence(terms: np.ndarray) -> list:
    out = []
    cum = np.cumsum(terms)
    n = 10
    while n <= len(terms):
        out.append((n, float(cum[n - 1])))
        n *= 10
    if not out or out[-1][0] != len(terms):
        out.append((len(terms), float(cum[-1])))
    return out


def convergence_criterion(spec: ChainSpec, horizon: int = DEFAULT_HORIZON) -> CriterionResult:
    """Is ``sum_n |1 - l_n / r_n|`` finite? Sufficient for a finite positive limit."""
    fam = spec.family
    terms = _criterion_terms(spec, horizon)
    evidence = _evidence(terms)
    if isinstance(fam, (Example1, Example1Mirrored)):
        return CriterionResult(
            "violated", "symbolic", evidence, "terms are 1/(n+1) or 1/n: harmonic series diverges"
        )
    tail = fam.geometric_tail()
    if tail is not None:
        L, rho = tail
        if rho == 1:
            return CriterionResult("satisfied", "symbolic", evidence, f"all terms vanish after n = {L}")
        return CriterionResult("violated", "symbolic", evidence, f"terms equal {abs(1 - rho)} for every n > {L}")
    return _criterion_numeric(terms, evidence)


def _criterion_numeric(terms: np.ndarray, evidence: list) -> CriterionResult:
    H = len(terms)
    lo = H // 10
    if not np.any(terms[lo:]):
        return CriterionResult("satisfied", "numeric", evidence, f"terms vanish beyond n = {lo}")
    a_lo, a_hi = terms[lo - 1], terms[H - 1]
    if a_lo == 0 or a_hi == 0:
        return CriterionResult("inconclusive", "numeric", evidence, "terms intermittently zero")
    beta = -math.log(a_hi / a_lo) / math.log(H / lo)
    if beta > 1.1:
        return CriterionResult("satisfied", "numeric", evidence, f"terms decay like n^-{beta:.3f}")
    if beta < 0.9:
        return CriterionResult("violated", "numeric", evidence, f"terms decay like n^-{beta:.3f}")
    return CriterionResult("inconclusive", "numeric", evidence, f"terms decay like n^-{beta:.3f}, harmonic boundary")
