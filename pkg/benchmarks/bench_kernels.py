"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--paths N] [--repeat R]

Inputs mirror one engine chunk of the shipped IRS scenario: the coupled
rating chain of both parties over 10 years and the short-rate grid.
"""

import argparse
import timeit

import numpy as np

from ratingxva._core import backends
from ratingxva._core.rng import CHAIN_STREAM, RATE_STREAM, path_seeds
from ratingxva.ctmc_sim import JumpTable
from ratingxva.markov_copula import CopulaSpec, build_joint_generator
from ratingxva.presets import P1, P2
from ratingxva.rates import VasicekParams, make_grid, step_coefficients
from ratingxva.rating_model import TransitionMatrix, generator_from_annual_matrix


def workloads(n: int):
    g1, g2 = (generator_from_annual_matrix(TransitionMatrix(p)) for p in (P1, P2))
    table = JumpTable.from_generator(build_joint_generator(g1, g2, CopulaSpec(1.0)).a)
    init = np.zeros(n, dtype=np.int64)
    cseeds = path_seeds(1, np.arange(n), CHAIN_STREAM)
    rseeds = path_seeds(1, np.arange(n), RATE_STREAM)
    a, c, s = step_coefficients(VasicekParams(), make_grid(10.0))
    query = np.arange(1, 40) / 4.0
    chains = backends()["python"].simulate_chains(table.cum, table.exit_rate, init, 10.0, cseeds)
    offsets, times, states = chains

    return {
        "simulate_chains": lambda k: k.simulate_chains(table.cum, table.exit_rate, init, 10.0, cseeds),
        "ou_paths": lambda k: k.ou_paths(rseeds, a, c, s, 0.05),
        "first_passage": lambda k: k.first_passage(offsets, states, 4, 2, 0),
        "states_at": lambda k: k.states_at(offsets, times, states, init, query),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    kernels = backends()
    jobs = workloads(args.paths)
    print(f"{args.paths} paths, best of {args.repeat}")
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name in kernels) + ("     speedup" if len(kernels) > 1 else ""))
    for job, fn in jobs.items():
        best = {}
        for name, mod in kernels.items():
            best[name] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        line = f"{job:<16}" + "".join(f"{best[n] * 1e3:10.2f}ms" for n in kernels)
        if "compiled" in best:
            line += f"{best['python'] / best['compiled']:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
