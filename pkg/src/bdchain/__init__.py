"""Birth-death chains absorbed at 0: closed forms, brute-force oracles, simulation."""

from .analytics import (
    Extended,
    OccupationProfile,
    RatioTable,
    TailClass,
    classify_tail,
    convergence_criterion,
    exit_probabilities,
    extinction_probability,
    limit_expectation,
    occupation_until_extinction,
    ratio_table,
    stopping_identity_rhs,
)
from .chain import ChainSpec, ProbPair, SpecError, parse_spec, probs_at, serialize, validate
from .kernels import BACKEND

__all__ = [
    "BACKEND",
    "ChainSpec",
    "Extended",
    "OccupationProfile",
    "ProbPair",
    "RatioTable",
    "SpecError",
    "TailClass",
    "classify_tail",
    "convergence_criterion",
    "exit_probabilities",
    "extinction_probability",
    "limit_expectation",
    "occupation_until_extinction",
    "parse_spec",
    "probs_at",
    "ratio_table",
    "serialize",
    "stopping_identity_rhs",
    "validate",
]
