"""Brute-force computations on a finite truncation of the chain.

Nothing here uses the ratio sequence: exit probabilities come from the
first-step equations, occupation counts from the fundamental matrix, and
stopped expectations from forward evolution of the state distribution.
States 0 and N are both absorbing.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .analytics import OccupationProfile
from .chain import ChainSpec, float_probs, probs_at
from .kernels import evolve, mmatrix_core, mmatrix_solve, thomas_core, thomas_solve


class TruncationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TruncatedChainModel:
    """States ``0..N``; ``left[n], right[n]`` for ``1 <= n <= N-1``."""

    N: int
    left: object
    right: object
    exact: bool

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"truncation needs N >= 2, got {self.N}")
        for n in range(1, self.N):
            l, r = self.left[n], self.right[n]
            if self.exact:
                ok = l + r == 1 and l > 0 and r > 0
            else:
                ok = abs(l + r - 1.0) <= 1e-15 and l > 0 and r > 0
            if not ok:
                raise ValueError(f"row {n} is not a valid transition pair: ({l}, {r})")

    @classmethod
    def from_spec(cls, spec: ChainSpec, N: int, exact: bool | None = None) -> "TruncatedChainModel":
        exact = spec.exact if exact is None else exact
        if exact and not spec.exact:
            raise ValueError("a float-valued chain cannot be truncated in exact mode")
        if exact:
            left = [Fraction(0)] * (N + 1)
            right = [Fraction(0)] * (N + 1)
            for n in range(1, N):
                left[n], right[n] = probs_at(spec, n)
            return cls(N, tuple(left), tuple(right), True)
        left, right = float_probs(spec, N)
        left[N] = right[N] = 0.0
        return cls(N, left, right, False)

    def truncate(self, N: int) -> "TruncatedChainModel":
        """The same chain with the upper barrier moved down to ``N``."""
        if not 2 <= N <= self.N:
            raise ValueError(f"can only truncate to 2 <= N <= {self.N}, got {N}")
        model = object.__new__(TruncatedChainModel)
        zero = _zero(self)
        if self.exact:
            left, right = self.left[:N] + (zero,), self.right[:N] + (zero,)
        else:
            left, right = self.left[:N + 1].copy(), self.right[:N + 1].copy()
            left[N] = right[N] = zero
        for name, value in (("N", N), ("left", left), ("right", right), ("exact", self.exact)):
            object.__setattr__(model, name, value)
        return model


@dataclass
class DistributionVector:
    """Law of ``X_{m ∧ T}`` at ``time = m`` plus running occupations.

    ``occupation[n] = sum_{j < m} P(X_j = n)`` for transient ``n`` and
    ``means[j] = E[X_j]`` for ``j = 0..m``.
    """

    probs: object
    time: int
    occupation: object
    means: object
    start: int

    def occupation_profile(self) -> OccupationProfile:
        values = {n: self.occupation[n] for n in range(1, len(self.probs) - 1) if self.occupation[n] != 0}
        return OccupationProfile(self.start, values, ("truncation", self.time))


def _zero(model: TruncatedChainModel):
    return Fraction(0) if model.exact else 0.0


def hitting_probabilities(model: TruncatedChainModel) -> list:
    """``h[n] = P_n(hit 0 before N)`` for ``n = 0..N`` from ``h_n = l_n h_{n-1} + r_n h_{n+1}``.

    Row ``n`` reads ``(l_n + r_n) h_n - l_n h_{n-1} - r_n h_{n+1} = 0``, an
    M-matrix with zero excess, so elimination runs without subtraction.
    """
    N = model.N
    size = N - 1
    one = Fraction(1) if model.exact else 1.0
    zero = _zero(model)
    lower = list(model.left[1:N])
    upper = list(model.right[1:N])
    rhs = [zero] * size
    rhs[0] = model.left[1]
    if model.exact:
        h = mmatrix_core(lower, upper, [zero] * size, rhs, [None] * size, [None] * size, [None] * size)
    else:
        h = mmatrix_solve(lower, upper, np.zeros(size), rhs)
    return [one] + list(h) + [zero]


def _solve(model, lower, diag, upper, rhs):
    if model.exact:
        n = len(diag)
        return thomas_core(lower, diag, upper, rhs, [None] * n, [None] * n, [None] * n)
    return thomas_solve(lower, diag, upper, rhs)


def exit_probs_by_recursion(model: TruncatedChainModel, start: int):
    """``(P(hit 0 first), P(hit N first))`` from ``start``."""
    if not 0 < start < model.N:
        raise ValueError(f"start must lie strictly between 0 and N={model.N}")
    h = hitting_probabilities(model)[start]
    return h, 1 - h


def occupation_by_fundamental_matrix(model: TruncatedChainModel, start: int) -> OccupationProfile:
    """Row ``start`` of ``(I - Q)^{-1}``: expected visits to ``1..N-1`` before absorption.

    Solves ``(I - Q)^T g = e_start``; column ``j`` of ``Q`` has ``r_{j-1}``
    above and ``l_{j+1}`` below the diagonal.
    """
    N = model.N
    if not 0 < start < N:
        raise ValueError(f"start must lie strictly between 0 and N={N}")
    one = Fraction(1) if model.exact else 1.0
    zero = _zero(model)
    size = N - 1
    lower = [zero] + [-model.right[j - 1] for j in range(2, N)]
    upper = [-model.left[j + 1] for j in range(1, N - 1)] + [zero]
    diag = [one] * size
    rhs = [zero] * size
    rhs[start - 1] = one
    g = _solve(model, lower, diag, upper, rhs)
    if not model.exact and not np.all(np.isfinite(g)):
        raise ArithmeticError("tridiagonal elimination produced non-finite values; system is near-singular")
    return OccupationProfile(start, {n: g[n - 1] for n in range(1, N)}, ("two-barrier", N))


def evolve_distribution(model: TruncatedChainModel, start: int, steps: int) -> DistributionVector:
    """Exact ``steps``-step evolution of a point mass at ``start``."""
    N = model.N
    if not 0 <= start <= N:
        raise ValueError(f"start must lie in 0..{N}")
    if not model.exact:
        probs, occ, means = evolve(model.left, model.right, start, steps, N)
        return DistributionVector(probs, steps, occ, means, start)
    zero = Fraction(0)
    p = [zero] * (N + 1)
    p[start] = Fraction(1)
    occ = [zero] * (N + 1)
    means = [Fraction(start)]
    for _ in range(steps):
        q = [zero] * (N + 1)
        q[0], q[N] = p[0], p[N]
        for n in range(1, N):
            if p[n]:
                occ[n] += p[n]
                q[n - 1] += p[n] * model.left[n]
                q[n + 1] += p[n] * model.right[n]
        p = q
        means.append(sum((n * v for n, v in enumerate(p) if v), zero))
    return DistributionVector(p, steps, occ, means, start)


def expected_value_of(dist) -> object:
    """``sum_n n * P(X = n)`` for a :class:`DistributionVector` or a plain mass vector."""
    probs = dist.probs if isinstance(dist, DistributionVector) else dist
    if isinstance(probs, np.ndarray):
        return float(np.arange(len(probs)) @ probs)
    return sum((n * v for n, v in enumerate(probs)), type(probs[0])(0))


def escape_bound(spec: ChainSpec, N: int) -> float:
    """Probability of reaching ``N`` before 0 from ``k``, by the first-step equations."""
    model = TruncatedChainModel.from_spec(spec, N, exact=False)
    return float(exit_probs_by_recursion(model, spec.k)[1])


def certified_truncation(spec: ChainSpec, bound: float = 1e-10, max_N: int = 10**6) -> int:
    """Smallest power-of-two-scaled ``N`` whose escape probability from ``k`` is below ``bound``."""
    N = max(2 * spec.k, 16)
    while N <= max_N:
        esc = escape_bound(spec, N)
        if esc <= bound:
            return N
        N *= 2
    raise TruncationError(
        f"escape probability from k={spec.k} is still {esc:.3e} at N={N // 2}; "
        "the chain is transient or escapes too slowly to certify the bound"
    )
