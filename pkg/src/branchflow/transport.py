"""Transport plans between terminals routed through free relay atoms.

A plan is a sparse nonnegative matrix gamma over a combined index set of
size (n_sources + n_free) x (n_sinks + n_free):

* row i < n_sources  -> source i;  row i >= n_sources  -> free atom i - n_sources
* col j < n_sinks    -> sink j;    col j >= n_sinks    -> free atom j - n_sinks

Row sums at source rows must equal source masses, column sums at sink
columns must equal sink masses, and every free atom conserves mass (inflow
== outflow).  gamma[i][j] with both indices free and i == j (a self-loop)
is never produced by the solver.

For geometric bookkeeping the same plan is also viewed as a digraph on
"vertex" ids: sources 0..S-1, sinks S..S+T-1, free atoms S+T.. — sources
only ever emit, sinks only ever absorb, so directed cycles can involve free
atoms alone.

The plan solver is an exact min-cost flow: masses are scaled to integers
summing to 10^9 by largest-remainder rounding (so the represented marginals
sit within one part in 10^9 of the true ones), supplies sit on source
nodes, demands on sink nodes, free atoms are conservation nodes, and every
row-entity/column-entity pair gets an arc except free self-loops.  All
functions are pure; nothing here keeps global state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._mcf import MinCostFlowNetwork, SolverError
from .measures import (
    BALANCE_ATOL,
    Atom,
    InvalidConfigError,
    SignedConfig,
    total_mass,
    validate,
)

#: integer mass grid: all masses are represented in units of total/10^9
MASS_UNITS = 10**9

#: flows below this fraction of total mass are treated as structural zeros
ZERO_FLOW_RTOL = 1e-12

#: marginal / conservation tolerance, relative to max(1, total mass)
MARGINAL_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class FreeAtoms:
    """Positions of the n unconstrained relay atoms, shape (n, k)."""

    positions: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.positions, dtype=float)
        if arr.ndim != 2:
            raise InvalidConfigError(f"free atom array must be 2-d, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidConfigError("free atom coordinates must be finite")
        object.__setattr__(self, "positions", arr)

    def __len__(self) -> int:
        return self.positions.shape[0]


def as_positions(Z: FreeAtoms | np.ndarray | Sequence | None, dim: int) -> np.ndarray:
    """Coerce any accepted free-atom argument to a fresh (n, dim) array."""
    if Z is None:
        return np.zeros((0, dim), dtype=float)
    if isinstance(Z, FreeAtoms):
        arr = Z.positions
    else:
        arr = np.asarray(Z, dtype=float)
    if arr.size == 0:
        return np.zeros((0, dim), dtype=float)
    arr = arr.reshape(-1, dim).astype(float, copy=True)
    if not np.all(np.isfinite(arr)):
        raise InvalidConfigError("free atom coordinates must be finite")
    return arr


@dataclass
class TransportPlan:
    """Sparse transport matrix plus the index bookkeeping described above."""

    n_sources: int
    n_sinks: int
    n_free: int
    entries: dict[tuple[int, int], float] = field(default_factory=dict)

    # ---- index conventions -------------------------------------------
    @property
    def n_rows(self) -> int:
        return self.n_sources + self.n_free

    @property
    def n_cols(self) -> int:
        return self.n_sinks + self.n_free

    @property
    def n_vertices(self) -> int:
        return self.n_sources + self.n_sinks + self.n_free

    def row_to_vertex(self, i: int) -> int:
        """Row index -> vertex id (sources, then sinks, then free atoms)."""
        return i if i < self.n_sources else self.n_sinks + i

    def col_to_vertex(self, j: int) -> int:
        return self.n_sources + j

    def vertex_role(self, v: int) -> str:
        if v < self.n_sources:
            return "source"
        if v < self.n_sources + self.n_sinks:
            return "sink"
        return "free"

    # ---- aggregates ---------------------------------------------------
    def source_outflows(self) -> np.ndarray:
        out = np.zeros(self.n_sources)
        for (i, _), g in self.entries.items():
            if i < self.n_sources:
                out[i] += g
        return out

    def sink_inflows(self) -> np.ndarray:
        inn = np.zeros(self.n_sinks)
        for (_, j), g in self.entries.items():
            if j < self.n_sinks:
                inn[j] += g
        return inn

    def free_outflows(self) -> np.ndarray:
        out = np.zeros(self.n_free)
        for (i, _), g in self.entries.items():
            if i >= self.n_sources:
                out[i - self.n_sources] += g
        return out

    def free_inflows(self) -> np.ndarray:
        inn = np.zeros(self.n_free)
        for (_, j), g in self.entries.items():
            if j >= self.n_sinks:
                inn[j - self.n_sinks] += g
        return inn

    def throughputs(self) -> np.ndarray:
        """Mass relayed by each free atom (outflow; equals inflow when feasible)."""
        return self.free_outflows()

    def total_cost_weight(self) -> float:
        return float(sum(self.entries.values()))

    # ---- views / conversions -------------------------------------------
    def copy(self) -> "TransportPlan":
        return TransportPlan(self.n_sources, self.n_sinks, self.n_free, dict(self.entries))

    def pruned(self, tol: float) -> "TransportPlan":
        """Drop entries with flow <= tol."""
        kept = {k: g for k, g in self.entries.items() if g > tol}
        return TransportPlan(self.n_sources, self.n_sinks, self.n_free, kept)

    def out_adjacency(self) -> dict[int, list[tuple[int, float, tuple[int, int]]]]:
        """Vertex id -> [(head vertex, flow, matrix key)] in sorted key order."""
        adj: dict[int, list[tuple[int, float, tuple[int, int]]]] = {}
        for (i, j) in sorted(self.entries):
            g = self.entries[(i, j)]
            adj.setdefault(self.row_to_vertex(i), []).append(
                (self.col_to_vertex(j), g, (i, j))
            )
        return adj

    def to_triplets(self) -> list[tuple[int, int, float]]:
        return [(i, j, self.entries[(i, j)]) for (i, j) in sorted(self.entries)]

    @classmethod
    def from_triplets(
        cls,
        n_sources: int,
        n_sinks: int,
        n_free: int,
        triplets: Iterable[tuple[int, int, float]],
    ) -> "TransportPlan":
        entries: dict[tuple[int, int], float] = {}
        for i, j, g in triplets:
            if g < 0:
                raise InvalidConfigError(f"negative flow on ({i}, {j})")
            if g > 0:
                entries[(int(i), int(j))] = entries.get((int(i), int(j)), 0.0) + float(g)
        return cls(n_sources, n_sinks, n_free, entries)


def vertex_positions(config: SignedConfig, Z: np.ndarray) -> np.ndarray:
    """Positions in vertex-id order: sources, sinks, then free atoms."""
    Z = as_positions(Z, config.dimension)
    return np.vstack(
        [config.source_positions(), config.sink_positions(), Z]
    )


def cost_matrix(config: SignedConfig, Z: FreeAtoms | np.ndarray | None, q: float) -> np.ndarray:
    """Pairwise q-power Euclidean costs over the combined index set.

    Rows run over sources then free atoms, columns over sinks then free
    atoms, so F[i, j] = |row position i - column position j|^q covering the
    four source/sink/free case combinations in one array.
    """
    Z = as_positions(Z, config.dimension)
    rows = np.vstack([config.source_positions(), Z])
    cols = np.vstack([config.sink_positions(), Z])
    diff = rows[:, None, :] - cols[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    return dist**q


def integer_mass_units(masses: np.ndarray, units: int = MASS_UNITS) -> np.ndarray:
    """Largest-remainder rounding of masses onto an integer grid summing to `units`.

    Keeps every atom within one grid unit of its exact share, which in turn
    keeps solver marginals within MARGINAL_RTOL of the true masses.
    """
    masses = np.asarray(masses, dtype=float)
    total = masses.sum()
    if total <= 0:
        raise InvalidConfigError("cannot scale masses with nonpositive total")
    scaled = masses / total * units
    base = np.floor(scaled).astype(np.int64)
    short = units - int(base.sum())
    if short > 0:
        frac = scaled - base
        order = np.lexsort((np.arange(len(masses)), -frac))
        base[order[:short]] += 1
    return base


def _solve_flow_network(
    F: np.ndarray,
    n_src: int,
    n_snk: int,
    n_free: int,
    src_units: np.ndarray,
    snk_units: np.ndarray,
) -> dict[tuple[int, int], int]:
    """Run the exact flow solver; returns positive integer flows per matrix key."""
    n_rows = n_src + n_free
    n_cols = n_snk + n_free
    node_src = list(range(n_src))
    node_snk = list(range(n_src, n_src + n_snk))
    node_free = list(range(n_src + n_snk, n_src + n_snk + n_free))
    s_star = n_src + n_snk + n_free
    t_star = s_star + 1
    net = MinCostFlowNetwork(t_star + 1)
    for i in range(n_src):
        net.add_arc(s_star, node_src[i], int(src_units[i]), 0.0)
    for j in range(n_snk):
        net.add_arc(node_snk[j], t_star, int(snk_units[j]), 0.0)
    plan_arcs: list[tuple[int, int, int]] = []
    for i in range(n_rows):
        u = node_src[i] if i < n_src else node_free[i - n_src]
        for j in range(n_cols):
            if i >= n_src and j >= n_snk and i - n_src == j - n_snk:
                continue  # free self-loop: effectively infinite cost
            v = node_snk[j] if j < n_snk else node_free[j - n_snk]
            a = net.add_arc(u, v, MASS_UNITS, float(F[i, j]))
            plan_arcs.append((i, j, a))
    pushed = net.solve(s_star, t_star)
    if pushed != MASS_UNITS:
        raise SolverError(f"flow short by {MASS_UNITS - pushed} units")
    flows: dict[tuple[int, int], int] = {}
    for i, j, a in plan_arcs:
        f = net.flow_on(a)
        if f > 0:
            flows[(i, j)] = f
    return flows


def min_cost_plan(
    config: SignedConfig,
    Z: FreeAtoms | np.ndarray | None,
    q: float,
) -> tuple[TransportPlan, float]:
    """Optimal transport plan through the given relay atoms, at fixed positions.

    Returns ``(plan, cost)`` where cost is the q-power objective
    sum(gamma_ij * |.|^q).  The plan is an exact optimum of the underlying
    linear program up to the 10^-9 mass grid; output is deterministic for
    identical inputs.
    """
    validate(config)
    Z = as_positions(Z, config.dimension)
    F = cost_matrix(config, Z, q)
    src_units = integer_mass_units(config.source_masses())
    snk_units = integer_mass_units(config.sink_masses())
    flows = _solve_flow_network(
        F, config.n_sources, config.n_sinks, len(Z), src_units, snk_units
    )
    M = total_mass(config)
    unit = M / MASS_UNITS
    entries = {key: f * unit for key, f in flows.items()}
    plan = TransportPlan(config.n_sources, config.n_sinks, len(Z), entries)
    cost = float(sum(g * F[key] for key, g in entries.items()))
    return plan, cost


def plan_cost(config: SignedConfig, Z: np.ndarray, plan: TransportPlan, q: float) -> float:
    """Evaluate the q-power objective of an arbitrary plan at positions Z."""
    P = vertex_positions(config, Z)
    total = 0.0
    for (i, j), g in plan.entries.items():
        d = float(np.linalg.norm(P[plan.row_to_vertex(i)] - P[plan.col_to_vertex(j)]))
        total += g * d**q
    return total


def check_plan(
    plan: TransportPlan,
    config: SignedConfig,
    tol: float | None = None,
) -> list[str]:
    """Return human-readable constraint violations (empty list when feasible)."""
    if tol is None:
        tol = MARGINAL_RTOL * max(1.0, total_mass(config))
    problems: list[str] = []
    for key, g in plan.entries.items():
        if g < 0:
            problems.append(f"negative flow {g!r} at {key}")
        i, j = key
        if not (0 <= i < plan.n_rows and 0 <= j < plan.n_cols):
            problems.append(f"index {key} out of range")
        if i >= plan.n_sources and j >= plan.n_sinks and i - plan.n_sources == j - plan.n_sinks:
            if g > 0:
                problems.append(f"self-loop flow at free atom {i - plan.n_sources}")
    src = plan.source_outflows()
    for i, m in enumerate(config.source_masses()):
        if abs(src[i] - m) > tol:
            problems.append(f"source {i} ships {src[i]!r}, mass is {m!r}")
    snk = plan.sink_inflows()
    for j, m in enumerate(config.sink_masses()):
        if abs(snk[j] - m) > tol:
            problems.append(f"sink {j} receives {snk[j]!r}, mass is {m!r}")
    fin, fout = plan.free_inflows(), plan.free_outflows()
    for a in range(plan.n_free):
        if abs(fin[a] - fout[a]) > tol:
            problems.append(
                f"free atom {a} violates conservation: in {fin[a]!r} out {fout[a]!r}"
            )
    return problems


def wasserstein_q(
    plus: Sequence[Atom],
    minus: Sequence[Atom],
    q: float,
) -> float:
    """q-Wasserstein distance between two balanced atomic measures (q >= 1)."""
    coupling, cost = wasserstein_coupling(plus, minus, q)
    return cost ** (1.0 / q)


def wasserstein_coupling(
    plus: Sequence[Atom],
    minus: Sequence[Atom],
    q: float,
) -> tuple[dict[tuple[int, int], float], float]:
    """Optimal coupling and its q-power cost between two atomic measures."""
    if q < 1.0:
        raise InvalidConfigError(f"wasserstein exponent must be >= 1, got {q}")
    plus = list(plus)
    minus = list(minus)
    if not plus or not minus:
        raise InvalidConfigError("empty atom list")
    dims = {a.dim for a in plus} | {a.dim for a in minus}
    if len(dims) != 1:
        raise InvalidConfigError(f"mixed dimensions {sorted(dims)}")
    pm = np.array([a.mass for a in plus])
    mm = np.array([a.mass for a in minus])
    if abs(pm.sum() - mm.sum()) > BALANCE_ATOL:
        raise InvalidConfigError(
            f"unbalanced: {pm.sum()!r} vs {mm.sum()!r}"
        )
    if pm.sum() <= 0:
        raise InvalidConfigError("total mass must be positive")
    P = np.array([a.position for a in plus], dtype=float)
    Q = np.array([a.position for a in minus], dtype=float)
    diff = P[:, None, :] - Q[None, :, :]
    F = np.sqrt((diff**2).sum(axis=2)) ** q
    flows = _solve_flow_network(
        F, len(plus), len(minus), 0, integer_mass_units(pm), integer_mass_units(mm)
    )
    unit = float(pm.sum()) / MASS_UNITS
    coupling = {key: f * unit for key, f in flows.items()}
    cost = float(sum(g * F[key] for key, g in coupling.items()))
    return coupling, cost
