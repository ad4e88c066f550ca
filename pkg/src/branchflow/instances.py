"""Canned and random problem instances.

Random instances draw positions uniformly from a box and masses as
positive integer compositions of a power-of-two total, so the exact flow
solver's mass grid (10^9 units, a multiple of any power of two up to
2^9) represents every terminal mass without rounding.
"""

from __future__ import annotations

import numpy as np

from .measures import Atom, SignedConfig, validate


def single_edge(mass: float = 1.0, length: float = 1.0, dim: int = 2) -> SignedConfig:
    """One source at the origin, one sink at distance `length` along x."""
    src = Atom((0.0,) * dim, mass)
    snk = Atom((length,) + (0.0,) * (dim - 1), mass)
    return validate(SignedConfig(sources=(src,), sinks=(snk,), dimension=dim))


def y_instance() -> SignedConfig:
    """Two unit sources at (-1, 2) and (1, 2), one mass-2 sink at the origin.

    The cheapest network for exponent 2 is the Y through (0, 1) with cost
    3*sqrt(2); the direct V costs 2*sqrt(5).
    """
    return validate(
        SignedConfig(
            sources=(Atom((-1.0, 2.0), 1.0), Atom((1.0, 2.0), 1.0)),
            sinks=(Atom((0.0, 0.0), 2.0),),
            dimension=2,
        )
    )


def _composition(rng: np.random.Generator, total: int, parts: int) -> list[int]:
    """Random positive integer parts summing to total (total >= parts)."""
    if parts == 1:
        return [total]
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False))
    bounds = np.concatenate([[0], cuts, [total]])
    return [int(b - a) for a, b in zip(bounds[:-1], bounds[1:])]


def random_instance(
    rng: np.random.Generator,
    n_sources: int,
    n_sinks: int,
    dim: int = 2,
    total_mass: int = 8,
    box: float = 1.0,
) -> SignedConfig:
    """Random balanced instance on integer masses summing to total_mass.

    total_mass should be a power of two no larger than 2^9 so the flow
    grid is exact; it must also be >= max(n_sources, n_sinks).
    """
    if total_mass < max(n_sources, n_sinks):
        raise ValueError("total_mass must cover one unit per terminal")
    src_masses = _composition(rng, total_mass, n_sources)
    snk_masses = _composition(rng, total_mass, n_sinks)
    src_pos = rng.uniform(-box, box, size=(n_sources, dim))
    snk_pos = rng.uniform(-box, box, size=(n_sinks, dim))
    return validate(
        SignedConfig(
            sources=tuple(
                Atom(tuple(p), float(m)) for p, m in zip(src_pos, src_masses)
            ),
            sinks=tuple(
                Atom(tuple(p), float(m)) for p, m in zip(snk_pos, snk_masses)
            ),
            dimension=dim,
        )
    )
