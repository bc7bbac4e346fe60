"""Canonical example models used by the CLI, the test suite, and the docs."""

from __future__ import annotations

import math

from .levy_model import (
    CompoundPoissonExp,
    LevyModel,
    NoJumps,
    StablePositive,
    model_from_dict,
    validate,
)


def stable_power_model(alpha: float) -> LevyModel:
    """Model with psi(lam) = lam**alpha exactly, for alpha in (1, 2).

    Uses scale C = 1/Gamma(-alpha) and drift chosen to cancel the linear
    term left by full compensation of the jump integral.
    """
    if not 1.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (1, 2)")
    scale = 1.0 / math.gamma(-alpha)
    drift = scale / (alpha - 1.0)
    return validate(drift, 0.0, StablePositive(alpha=alpha, scale=scale))


def brownian_model(drift: float, gaussian: float = 1.0) -> LevyModel:
    """psi(lam) = drift*lam + gaussian*lam**2 (no jumps)."""
    return validate(drift, gaussian, NoJumps())


_BUILTIN = {
    # psi(lam) = lam^1.5; critical stable, Phi(0) = 0
    "stable15": lambda: stable_power_model(1.5),
    # psi(lam) = lam^2 - lam; upward drift, Phi(0) = 1
    "bmdrift": lambda: brownian_model(-1.0),
    # psi(lam) = lam^2 + lam; downward drift, hits 0 a.s.
    "bmup": lambda: brownian_model(1.0),
    # Gaussian + exponential compound Poisson jumps, Phi(0) ~ 0.30
    "cpexp": lambda: validate(0.2, 0.25, CompoundPoissonExp(rate=2.0, jump_mean=0.5)),
}

BUILTIN_NAMES = tuple(sorted(_BUILTIN))


def builtin_model(name: str) -> LevyModel:
    try:
        return _BUILTIN[name]()
    except KeyError:
        raise ValueError(f"unknown builtin model {name!r}; "
                         f"choose from {', '.join(BUILTIN_NAMES)}") from None


def example_models() -> dict[str, LevyModel]:
    """All shipped example models, keyed by name."""
    return {name: builtin_model(name) for name in BUILTIN_NAMES}


def resolve_model(spec: str) -> LevyModel:
    """Accept a builtin name or a path to a model JSON file."""
    if spec in _BUILTIN:
        return builtin_model(spec)
    with open(spec, "r", encoding="utf-8") as fh:
        import json

        return model_from_dict(json.load(fh))
