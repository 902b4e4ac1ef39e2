"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--paths 20000] [--steps 1000] [--repeat 3]

Both backends are called in-process; the numba timings exclude the first
(compiling) call. Outputs are compared so a speedup never hides a mismatch.
"""

import argparse
import time

import numpy as np

from bdchain._jit import BACKEND, HAS_NUMBA
from bdchain.chain import float_probs, parse_spec
from bdchain.kernels import _evolve_numba, _evolve_numpy, simulate_block


def best_of(repeat, fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=1_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not HAS_NUMBA:
        raise SystemExit("numba is disabled or missing; unset BDCHAIN_DISABLE_JIT to compare backends")

    spec = parse_spec({"family": "eventually-constant", "prefix": [["2/3", "1/3"]], "M": 1, "k": 2})
    m = args.steps
    left, right = float_probs(spec, spec.k + m + 1)
    rows = []

    for track in (False, True):
        def sim(backend):
            return simulate_block(right, spec.k, m, -1, 10**8, 42, 0, args.paths, track, backend=backend)

        sim("numba")  # compile
        t_nb, a = best_of(args.repeat, lambda: sim("numba"))
        t_np, b = best_of(args.repeat, lambda: sim("numpy"))
        same = all(np.array_equal(x, y) for x, y in zip(a, b))
        steps = int(a[0].sum())
        rows.append((f"simulate track={track}", t_nb, t_np, same, f"{steps / t_nb / 1e6:.1f} M steps/s (numba)"))

    N = spec.k + m + 1
    _evolve_numba(left, right, spec.k, 10, N)  # compile
    t_nb, a = best_of(args.repeat, lambda: _evolve_numba(left, right, spec.k, m, N))
    t_np, b = best_of(args.repeat, lambda: _evolve_numpy(left, right, spec.k, m, N))
    same = all(np.allclose(x, y, rtol=1e-12, atol=1e-300) for x, y in zip(a, b))
    rows.append(("evolve", t_nb, t_np, same, f"N={N}"))

    print(f"default backend: {BACKEND}; paths={args.paths}, m={m}, best of {args.repeat}")
    print(f"{'kernel':<22}{'numba s':>10}{'numpy s':>10}{'speedup':>9}  match  note")
    for name, t_nb, t_np, same, note in rows:
        print(f"{name:<22}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>8.1f}x  {str(same):<5}  {note}")


if __name__ == "__main__":
    main()
