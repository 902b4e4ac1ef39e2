"""``bdchain`` command line: analyze, verify, simulate, criterion.

Exit codes: 0 success, 1 configuration error, 2 verification failure,
3 inconclusive classification.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import analytics as an
from . import montecarlo as mc
from . import oracle as orc
from .chain import ChainSpec, SpecError, float_probs, parse_spec, serialize

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_INCONCLUSIVE = 0, 1, 2, 3
DEFAULT_SEED = 42
BUNDLED = ("example1", "example1_mirrored", "srw", "ec_example2", "constant_drift", "transient_table")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# report helpers


def _num(value) -> object:
    if isinstance(value, an.Extended):
        return "inf" if value.is_infinite else _num(value.value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else ("inf" if value > 0 else "-inf")
    return value


def _float(value) -> float | str:
    if isinstance(value, an.Extended):
        return "inf" if value.is_infinite else float(value.value)
    return float(value)


def _quantity(value, provenance: str, error_bound="exact", **extra) -> dict:
    block = {"value": _num(value), "float": _float(value), "provenance": provenance, "error_bound": error_bound}
    block.update(extra)
    return block


def load_chain(ref: str) -> ChainSpec:
    """Path to a JSON file, inline JSON, or the name of a bundled example."""
    ref = ref.strip()
    if ref.startswith("{"):
        return parse_spec(ref)
    path = Path(ref)
    if path.is_file():
        try:
            return parse_spec(path.read_text())
        except OSError as exc:
            raise ConfigError(str(exc)) from None
    name = ref[:-5] if ref.endswith(".json") else ref
    if name in BUNDLED:
        return parse_spec(resources.files("bdchain.data").joinpath(f"{name}.json").read_text())
    raise ConfigError(f"chain spec {ref!r} is neither a file, inline JSON, nor a bundled example {list(BUNDLED)}")


def _grid(text: str) -> list[int]:
    try:
        values = [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}: expected comma-separated integers") from None
    if not values or any(v < 0 for v in values):
        raise ConfigError("grid values must be nonnegative integers")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("grid must be strictly increasing")
    return values


def _positive(name: str, value) -> None:
    if value is None or value <= 0:
        raise ConfigError(f"{name} must be positive, got {value}")


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(spec: ChainSpec, args) -> tuple[dict, int]:
    code = EXIT_OK
    warnings = []
    table = an.ratio_table(spec, args.prefix)
    tail = table.t_limit
    results = {
        "ratio_table": {
            "t": [_num(v) for v in table.t],
            "x": [_num(v) for v in table.x],
            "provenance": "analytic",
            "error_bound": "exact" if table.exact else "float64",
        },
        "tail_class": {
            "kind": tail.kind,
            "value": None if tail.value is None else _num(tail.value),
            "evidence": tail.evidence,
            "provenance": "analytic",
        },
    }
    if table.precision_loss_at is not None:
        warnings.append(f"t_n lost float precision at n = {table.precision_loss_at}")
    ext = an.extinction_probability(spec)
    if ext.certain:
        results["extinction_probability"] = _quantity(
            ext.probability, "analytic", "exact" if ext.method != "numeric" else ext.error_bound,
            method=ext.method, diagnostic=ext.diagnostic,
        )
    else:
        results["extinction_probability"] = {"value": None, "provenance": "analytic", "method": ext.method,
                                             "diagnostic": ext.diagnostic}
        code = EXIT_INCONCLUSIVE
    try:
        limit = an.limit_expectation(spec)
        bound = "exact" if spec.exact and tail.kind != "undetermined" else "float64"
        results["limit_expectation"] = _quantity(limit, "analytic", bound)
    except an.UndeterminedTailError as exc:
        results["limit_expectation"] = {"value": None, "provenance": "analytic", "refused": str(exc)}
        code = EXIT_INCONCLUSIVE
    return {"results": results, "warnings": warnings}, code


# ---------------------------------------------------------------------------
# verify


def _check(name: str, discrepancy, tol, detail: str = "", passed: bool | None = None) -> dict:
    discrepancy = float(discrepancy)
    if passed is None:
        passed = discrepancy <= tol
    return {"check": name, "provenance": "analytic-vs-oracle", "max_abs_discrepancy": discrepancy,
            "tolerance": tol, "passed": bool(passed), "detail": detail}


def _skip(name: str, reason: str) -> dict:
    return {"check": name, "provenance": "analytic-vs-oracle", "skipped": reason, "passed": True}


def verify_exit_probabilities(spec: ChainSpec, b_max: int, tol: float) -> list[dict]:
    out = []
    analytic = an.exit_probability_grid(spec, b_max)
    worst = 0
    for b in range(2, b_max + 1):
        model = orc.TruncatedChainModel.from_spec(spec, b)
        h = orc.hitting_probabilities(model)
        for s in range(1, b):
            hit_a, hit_b = analytic[(s, b)]
            worst = max(worst, abs(hit_a - h[s]), abs(hit_b - (1 - h[s])))
    mode = "rational" if spec.exact else "float"
    out.append(_check(f"exit-probabilities/{mode}", worst, 0 if spec.exact else tol,
                      f"all (0, start, b) with b <= {b_max}"))
    return out


def verify_exit_float(spec: ChainSpec, N: int, tol: float) -> dict:
    model = orc.TruncatedChainModel.from_spec(spec, N, exact=False)
    h = orc.hitting_probabilities(model)
    starts = sorted({1, min(spec.k, N - 1), N // 2, N - 1})
    worst = 0.0
    for s in starts:
        hit_a, hit_b = an.exit_probabilities(spec, 0, s, N)
        worst = max(worst, abs(float(hit_a) - float(h[s])), abs(float(hit_b) - (1 - float(h[s]))))
    return _check("exit-probabilities/float", worst, tol, f"b = {N}, starts {starts}")


def verify_occupation(spec: ChainSpec, N: int, tol: float) -> dict:
    name = "occupation-convergence"
    levels = sorted({max(N // 100, spec.k + 2), max(N // 10, spec.k + 3), N})
    try:
        exact_limit = an.occupation_profile_until_extinction(spec, min(2 * spec.k + 10, levels[0] - 1))
    except an.TransientChainError as exc:
        return _skip(name, f"transient chain refused: {exc}")
    except an.InconclusiveError as exc:
        return _skip(name, f"recurrence undecided: {exc}")
    states = list(exact_limit.values)
    profiles = [orc.occupation_by_fundamental_matrix(orc.TruncatedChainModel.from_spec(spec, L, exact=False), spec.k)
                for L in levels]
    x = an.ratio_table(spec, N, classify=False).x
    monotone = bounded = within_escape = True
    worst_gap = 0.0
    for n in states:
        limit = float(exact_limit.values[n])
        seq = [float(p.values[n]) for p in profiles]
        monotone &= all(b > a for a, b in zip(seq, seq[1:]))
        bounded &= all(v <= limit * (1 + tol) for v in seq)
        rel_gap = (limit - seq[-1]) / limit
        escape = float(x[max(n, spec.k)]) / float(x[N])
        within_escape &= rel_gap <= escape + tol
        worst_gap = max(worst_gap, rel_gap)
    passed = monotone and bounded and within_escape
    detail = (f"N in {levels}, states 1..{states[-1]}: monotone={monotone}, bounded={bounded}, "
              f"gap within escape bound={within_escape}")
    return _check(name, worst_gap, tol, detail, passed=passed) | {"discrepancy_kind": "relative gap at largest N"}


def verify_stopping_identity(spec: ChainSpec, ms: list[int], tol: float) -> list[dict]:
    out = []
    worst, monotone_bad = 0.0, []
    for m in ms:
        model = orc.TruncatedChainModel.from_spec(spec, spec.k + m + 1, exact=False)
        dist = orc.evolve_distribution(model, spec.k, m)
        profile = dist.occupation_profile()
        lhs = orc.expected_value_of(dist)
        worst = max(worst, abs(lhs - an.stopping_identity_rhs(profile, spec)))
        monotone_bad += [f"m={m}: n={n}" for n in _monotonicity_violations(profile, spec)]
    out.append(_check("stopping-identity/float", worst, tol, f"m in {ms}"))
    if spec.exact:
        m = min(ms)
        model = orc.TruncatedChainModel.from_spec(spec, spec.k + m + 1)
        dist = orc.evolve_distribution(model, spec.k, m)
        profile = dist.occupation_profile()
        gap = orc.expected_value_of(dist) - an.stopping_identity_rhs(profile, spec)
        out.append(_check("stopping-identity/rational", abs(gap), 0, f"m = {m}"))
        monotone_bad += [f"m={m} (rational): n={n}" for n in _monotonicity_violations(profile, spec)]
    out.append(_check("normalized-occupation-monotonicity", len(monotone_bad), 0,
                      "; ".join(monotone_bad[:5]) or f"strictly decreasing for n >= k at m in {ms}"))
    return out


def _monotonicity_violations(profile: an.OccupationProfile, spec: ChainSpec) -> list[int]:
    norm = profile.normalized(spec)
    bad = []
    for n in sorted(norm):
        if n < spec.k or n + 1 not in norm:
            continue
        a, b = norm[n], norm[n + 1]
        if a > 0 and b > 0 and not a > b:
            bad.append(n)
    return bad


def cmd_verify(spec: ChainSpec, args) -> tuple[dict, int]:
    _positive("--oracle-n", args.oracle_n)
    if args.oracle_n < 2 * spec.k + 20:
        raise ConfigError(f"--oracle-n must be at least {2 * spec.k + 20} for k = {spec.k}")
    tol = args.tol
    checks = verify_exit_probabilities(spec, min(args.exact_b_max, args.oracle_n), tol)
    checks.append(verify_exit_float(spec, args.oracle_n, tol))
    checks.append(verify_occupation(spec, args.oracle_n, tol))
    checks.extend(verify_stopping_identity(spec, [10, 100, 1000], tol))
    failed = [c["check"] for c in checks if not c["passed"]]
    results = {"checks": checks, "failed": failed}
    return {"results": results, "warnings": []}, (EXIT_VERIFY if failed else EXIT_OK)


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(spec: ChainSpec, args) -> tuple[dict, int]:
    grid = _grid(args.m_grid)
    _positive("--paths", args.paths)
    _positive("--workers", args.workers)
    if args.paths < 2:
        raise ConfigError("--paths must be at least 2")
    if args.stopping == "interval-exit" and grid[0] <= spec.k:
        raise ConfigError(f"interval-exit levels must exceed k = {spec.k}")
    sweep = mc.convergence_sweep(spec, args.stopping, grid, args.paths, args.seed, args.workers, args.cap)
    limit = "undetermined" if sweep.analytic_limit is None else _float(sweep.analytic_limit)
    rows, warnings = [], []
    for m, est in zip(grid, sweep.estimates):
        rows.append({"m": m, "mean": est.mean, "ci_half_width": est.half_width_95, "analytic_limit": limit,
                     "paths": est.paths, "cap_hits": est.cap_hits})
        if est.cap_hits:
            warnings.append(f"m={m}: {est.cap_hits} paths hit the step cap and were excluded")
    results = {
        "sweep": {"rows": rows, "provenance": "monte-carlo", "ci": "normal approximation, 95%",
                  "stopping": args.stopping, "seed": args.seed},
        "analytic_limit": {"value": limit, "provenance": "analytic", "note": sweep.note},
    }
    return {"results": results, "warnings": warnings}, EXIT_OK


# ---------------------------------------------------------------------------
# criterion


def cmd_criterion(spec: ChainSpec, args) -> tuple[dict, int]:
    _positive("--horizon", args.horizon)
    crit = an.convergence_criterion(spec, args.horizon)
    results = {
        "criterion": {
            "verdict": crit.verdict,
            "method": crit.method,
            "diagnostic": crit.diagnostic,
            "partial_sums": [{"n": n, "sum": s} for n, s in crit.partial_sums],
            "provenance": "analytic",
        }
    }
    if crit.verdict == "satisfied":
        results["limit_expectation"] = _quantity(an.limit_expectation(spec), "analytic",
                                                 "exact" if spec.exact else "float64")
    code = EXIT_INCONCLUSIVE if crit.verdict == "inconclusive" else EXIT_OK
    return {"results": results, "warnings": []}, code


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {"analyze": cmd_analyze, "verify": cmd_verify, "simulate": cmd_simulate, "criterion": cmd_criterion}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--chain", required=True, help="chain-spec JSON file, inline JSON, or bundled name")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--out", help="write the report here instead of stdout")

    parser = _Parser(prog="bdchain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", parents=[common], help="closed-form quantities")
    p.add_argument("--prefix", type=int, default=10, help="ratio-table entries to print")

    p = sub.add_parser("verify", parents=[common], help="analytics against brute-force oracles")
    p.add_argument("--oracle-n", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--exact-b-max", type=int, default=40, help="largest b in the exact exit-probability grid")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo convergence sweep")
    p.add_argument("--m-grid", default="10,100,1000,10000")
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--stopping", choices=("truncation", "interval-exit"), default="truncation")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--cap", type=int, default=mc.DEFAULT_CAP, help="per-path step cap")

    p = sub.add_parser("criterion", parents=[common], help="summability of |1 - l_n/r_n|")
    p.add_argument("--horizon", type=int, default=an.DEFAULT_HORIZON)
    return parser


def _config_echo(args) -> dict:
    # worker count and output path do not affect results
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "workers")}


def _render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    buf = io.StringIO()
    results = report["results"]
    writer = csv.writer(buf, lineterminator="\n")
    if "sweep" in results:
        rows = results["sweep"]["rows"]
        writer.writerow(["m", "mean", "ci_half_width", "analytic_limit", "paths", "cap_hits"])
        for r in rows:
            writer.writerow([r["m"], repr(r["mean"]), repr(r["ci_half_width"]), r["analytic_limit"], r["paths"],
                             r["cap_hits"]])
    else:
        writer.writerow(["block", "field", "value"])
        for block, content in results.items():
            if isinstance(content, dict):
                for key, value in content.items():
                    writer.writerow([block, key, json.dumps(value)])
            else:
                writer.writerow([block, "", json.dumps(content)])
    return buf.getvalue()


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = load_chain(args.chain)
        body, code = COMMANDS[args.command](spec, args)
    except (ConfigError, SpecError) as exc:
        print(f"bdchain: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = {"command": args.command, "config": _config_echo(args), "chain": serialize(spec)}
    report.update(body)
    text = _render(report, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
