#!/usr/bin/env python3
"""Sweep the boundary classification over models and power-law exponents.

Prints one row per (model, theta): the hitting probability from x, the
extinction/extinguishing call on the hitting event, and the explosion call
on the surviving event.
"""

import argparse

from levyfn import BUILTIN_NAMES, PowerLaw, builtin_model, classify_boundary


def fmt(flag):
    return {True: "yes", False: "no", None: "inconclusive"}[flag]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--models", nargs="*", default=list(BUILTIN_NAMES))
    ap.add_argument("--thetas", nargs="*", type=float,
                    default=[0.5, 1.0, 1.4, 1.5, 2.0])
    ap.add_argument("--x", type=float, default=1.0)
    args = ap.parse_args()

    print(f"{'model':10s} {'theta':>5s} {'hit_prob':>9s} {'extinct':>12s} "
          f"{'extinguish':>12s} {'explode':>12s}")
    for name in args.models:
        model = builtin_model(name)
        for theta in args.thetas:
            r = classify_boundary(model, PowerLaw(theta), args.x)
            print(f"{name:10s} {theta:5.2f} {r.hit_prob:9.4f} "
                  f"{fmt(r.extinction_possible):>12s} "
                  f"{fmt(r.extinguishing_possible):>12s} "
                  f"{fmt(r.explosion_possible):>12s}")


if __name__ == "__main__":
    main()
