"""Sampler throughput with and without numba.

Each path runs in a fresh interpreter so the JIT switch (read at import) takes
effect. The numba timing excludes compilation by running a warm-up fit first;
both paths must produce identical draws for the same seed.

Usage: python benchmarks/bench_sampler.py [--iter N] [--repeat R]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import hashlib, json, sys, time
from epirichards import _jit
from epirichards.errmodel import ErrorSpec
from epirichards.growth import GrowthParams
from epirichards.mcmc import SamplerConfig, build_bivariate, run_chains
from epirichards.prior import PriorConfig
from epirichards.simulate import DeathLink, SimSpec, simulate_epidemic

n_iter, repeat, family = int(sys.argv[1]), int(sys.argv[2]), sys.argv[3]
err = ErrorSpec.pg(10.0) if family == "pg" else ErrorSpec(family, sigma=0.3)
series = simulate_epidemic(SimSpec(GrowthParams("richards", 0.25, 200000.0, 0.5), err, T=120,
                                   death_link=DeathLink(0.1, 0.25, 0.6, start=35), seed=1))
model = build_bivariate(series, 120, PriorConfig(), families=(family, family))
run_chains(model, SamplerConfig(n_chains=1, n_iter=200, thin=1, seed=0))
times = []
for _ in range(repeat):
    t0 = time.perf_counter()
    draws = run_chains(model, SamplerConfig(n_chains=1, n_iter=n_iter, thin=10, seed=3))
    times.append(time.perf_counter() - t0)
digest = hashlib.sha256(draws.par.tobytes()).hexdigest()[:16]
print(json.dumps({"jit": _jit.JIT_ENABLED, "best": min(times), "digest": digest}))
"""


def run(disable: bool, n_iter: int, repeat: int, family: str) -> dict:
    env = dict(os.environ)
    env.pop("EPIRICHARDS_DISABLE_NUMBA", None)
    if disable:
        env["EPIRICHARDS_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKER, str(n_iter), str(repeat), family],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--iter", type=int, default=2000, help="iterations per timed chain")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--family", choices=("pg", "pln", "pls"), default="pg")
    args = p.parse_args()
    fast = run(False, args.iter, args.repeat, args.family)
    slow = run(True, args.iter, args.repeat, args.family)
    print(f"family {args.family}, {args.iter} iterations, T=120, best of {args.repeat}")
    for label, r in (("numba", fast), ("numpy", slow)):
        print(f"  {label:6s} jit={r['jit']!s:5s} {r['best']:8.3f} s "
              f"{args.iter / r['best']:10.0f} it/s  draws {r['digest']}")
    print(f"  speedup {slow['best'] / fast['best']:.1f}x, "
          f"draws {'identical' if fast['digest'] == slow['digest'] else 'DIFFER'}")


if __name__ == "__main__":
    main()
