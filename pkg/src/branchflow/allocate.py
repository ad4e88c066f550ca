"""Closed-form atom allocation over a network's edges.

Given a weighted graph realizing the limit network and a budget of n
relay atoms, the continuous optimum spreads the budget over edges
proportionally to weight^(1/q) * length; placing n_e atoms equally
spaced inside edge e then costs weight * length^q * (n_e+1)^(1-q) on
that edge.  The rounded construction yields a certified upper bound for
the n-atom transport optimum over the same terminals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import WeightedDigraph
from .transport import integer_mass_units


@dataclass(frozen=True)
class Allocation:
    """Integer atom counts per edge plus the induced layout and bound."""

    counts: tuple[int, ...]
    fractions: tuple[float, ...]
    atom_positions: np.ndarray
    atom_masses: np.ndarray
    atom_edges: tuple[int, ...]
    upper_bound: float

    @property
    def n(self) -> int:
        return int(sum(self.counts))


def optimal_fractions(g: WeightedDigraph, q: float) -> np.ndarray:
    """Continuous allocation fractions w_e = weight^(1/q)*length / total.

    These minimize sum(weight*length^q / w^(q-1)) over the probability
    simplex; the minimum value is (sum weight^(1/q)*length)^q, the q-th
    power of the network cost.
    """
    if not g.edges:
        raise ValueError("graph has no edges")
    scores = []
    for e in g.edges:
        if e.weight <= 0 or e.length <= 0:
            raise ValueError(
                f"allocation requires positive weight and length, got {e}"
            )
        scores.append(e.weight ** (1.0 / q) * e.length)
    scores = np.array(scores)
    return scores / scores.sum()


def allocation_objective(g: WeightedDigraph, w: np.ndarray, q: float) -> float:
    """sum(weight * length^q / w^(q-1)); +inf on a zero fraction."""
    w = np.asarray(w, dtype=float)
    out = 0.0
    for e, we in zip(g.edges, w):
        if we <= 0:
            return float("inf")
        out += e.weight * e.length**q / we ** (q - 1.0)
    return float(out)


def allocate(g: WeightedDigraph, n: int, q: float) -> Allocation:
    """Integer allocation of n atoms over the edges of g.

    Largest-remainder rounding of n * w_e with deterministic tie-break by
    edge index; edges rounded to zero are raised to one atom, paid for by
    the fullest edges, so every edge stays usable.  Requires n >= |E|.
    Returns equally spaced interior atom layouts (masses equal to their
    edge's weight) and the exact bound
    (sum weight*length^q*(count+1)^(1-q))^(1/q).
    """
    m = len(g.edges)
    if n < m:
        raise ValueError(f"need at least one atom per edge: n={n} < |E|={m}")
    w = optimal_fractions(g, q)
    counts = integer_mass_units(w, units=n).astype(int)
    while True:
        zeros = np.nonzero(counts == 0)[0]
        if zeros.size == 0:
            break
        donor = int(np.argmax(counts))
        counts[donor] -= 1
        counts[zeros[0]] = 1

    rows = []
    masses = []
    edge_of = []
    for idx, (e, c) in enumerate(zip(g.edges, counts)):
        a = g.positions[e.tail]
        b = g.positions[e.head]
        for l in range(1, int(c) + 1):
            rows.append(a + (l / (c + 1.0)) * (b - a))
            masses.append(e.weight)
            edge_of.append(idx)
    positions = np.vstack(rows) if rows else np.zeros((0, g.dimension))
    bound_pow = sum(
        e.weight * e.length**q * (c + 1.0) ** (1.0 - q)
        for e, c in zip(g.edges, counts)
    )
    return Allocation(
        counts=tuple(int(c) for c in counts),
        fractions=tuple(float(c) / n for c in counts) if n else (),
        atom_positions=positions,
        atom_masses=np.array(masses),
        atom_edges=tuple(edge_of),
        upper_bound=float(bound_pow ** (1.0 / q)),
    )
