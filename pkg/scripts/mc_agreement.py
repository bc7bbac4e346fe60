#!/usr/bin/env python3
"""Monte Carlo estimates against their analytic oracles, side by side.

Runs the three agreement benchmarks at configurable effort: the hitting
probability of 0 (vs e^{-Phi(0)x}), the conditional exponential functional
(vs (1-e^{-lam x})/psi(lam+Phi(0))), and the mean passage time (vs the
occupation-measure quadrature).
"""

import argparse
import math

from levyfn import (
    CondExpFunctional,
    HitProb,
    MeanPassage,
    PathConfig,
    ScaleEvaluator,
    builtin_model,
    conditional_exp_constant_closed_form,
    constant_functional,
    mc_estimate,
    validate,
    NoJumps,
)


def row(label, est, se, oracle):
    dev = est - oracle
    print(f"{label:34s} mc {est:8.4f} +- {se:.4f}   oracle {oracle:8.4f}   "
          f"dev {dev:+.4f} ({abs(dev) / (3 * se + 0.01):.2f}x of 3se+0.01)")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    m = builtin_model("bmdrift")
    cfg = PathConfig(dt=1e-3, horizon=80.0, barrier=30.0, seed=args.seed)
    s = mc_estimate(m, 1.0, None, HitProb(), args.paths, cfg, workers=args.workers)
    row("hit probability (bmdrift, x=1)", s.estimate, s.stderr, math.exp(-1.0))

    bm = validate(0.0, 1.0, NoJumps())
    cfg = PathConfig(dt=5e-4, horizon=2500.0, barrier=300.0, seed=args.seed)
    s = mc_estimate(bm, 1.0, constant_functional(), CondExpFunctional(1.0),
                    args.paths, cfg, workers=args.workers)
    row("conditional exp functional (bm)", s.estimate, s.stderr,
        conditional_exp_constant_closed_form(bm, 1.0, 1.0))

    up = builtin_model("bmup")
    cfg = PathConfig(dt=5e-4, horizon=100.0, barrier=50.0, seed=args.seed)
    s = mc_estimate(up, 1.0, constant_functional(), MeanPassage(y=0.01),
                    args.paths, cfg, workers=args.workers)
    oracle = ScaleEvaluator(up).occupation_expectation(constant_functional(), 1.0, 0.01)
    row("mean passage to 0.01 (bmup)", s.estimate, s.stderr, oracle)


if __name__ == "__main__":
    main()
