"""Position optimization and the outer alternating minimization.

For a fixed feasible plan the objective sum(flow * |tail - head|^q) is a
convex, continuously differentiable function of the free-atom positions
(q > 1 keeps the gradient finite at coincident points).  The inner solver
is gradient descent with Armijo backtracking; the outer loop alternates
exact plan solves, plan regularization, and position descent, with a
multistart layer on top, since the joint problem is not convex.

Two extras beyond plain alternation, both cost-guarded so monotonicity
is preserved:

* a rebalance move that redistributes the atom count over the current
  reduced tree by the closed-form allocation and restarts the descent
  from that layout — alternation alone cannot move an atom from one
  branch to another once the plan's support has frozen;
* a final polish of positions under a strict gradient tolerance, so
  chain atoms land on their equally-spaced limits to well below the
  structural verification tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measures import (
    Atom,
    CostParams,
    InvalidConfigError,
    SignedConfig,
    total_mass,
    validate,
)
from .transport import (
    FreeAtoms,
    SolverError,
    TransportPlan,
    as_positions,
    integer_mass_units,
    min_cost_plan,
    plan_cost,
    wasserstein_coupling,
    wasserstein_q,
)
from .regularize import regularize, zero_flow_threshold
from .graphs import plan_to_graph, reduce_graph
from .allocate import allocate

MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one full minimization at a given atom count."""

    Z: FreeAtoms
    plan: TransportPlan
    cost_q: float
    n: int
    q: float
    iterations: int
    converged: bool
    start_index: int = 0
    n_starts: int = 1
    unused_atoms: int = 0
    start_costs: tuple[float, ...] = ()

    @property
    def wbar(self) -> float:
        return self.cost_q ** (1.0 / self.q)

    @property
    def rescaled(self) -> float:
        return self.n ** ((self.q - 1.0) / self.q) * self.wbar


class _PlanObjective:
    """Vectorized cost/gradient of a fixed plan as positions vary."""

    def __init__(self, config: SignedConfig, plan: TransportPlan, q: float):
        self.q = q
        self.n_free = plan.n_free
        self.dim = config.dimension
        self.n_term = plan.n_sources + plan.n_sinks
        self.term = np.vstack(
            [config.source_positions(), config.sink_positions()]
        )
        keys = sorted(plan.entries)
        self.tails = np.array([plan.row_to_vertex(i) for i, _ in keys], dtype=int)
        self.heads = np.array([plan.col_to_vertex(j) for _, j in keys], dtype=int)
        self.flows = np.array([plan.entries[k] for k in keys], dtype=float)
        self.touched = np.zeros(self.n_free, dtype=bool)
        for v in np.concatenate([self.tails, self.heads]):
            if v >= self.n_term:
                self.touched[v - self.n_term] = True

    def _stack(self, Z: np.ndarray) -> np.ndarray:
        if self.n_free == 0:
            return self.term
        return np.vstack([self.term, Z])

    def cost(self, Z: np.ndarray) -> float:
        P = self._stack(Z)
        d = P[self.tails] - P[self.heads]
        dist = np.sqrt((d * d).sum(axis=1))
        return float((self.flows * dist**self.q).sum())

    def gradient(self, Z: np.ndarray) -> np.ndarray:
        P = self._stack(Z)
        d = P[self.tails] - P[self.heads]
        dist = np.sqrt((d * d).sum(axis=1))
        coef = np.zeros_like(dist)
        pos = dist > 0.0
        coef[pos] = self.q * self.flows[pos] * dist[pos] ** (self.q - 2.0)
        contrib = coef[:, None] * d
        G = np.zeros((self.n_free, self.dim))
        tf = self.tails >= self.n_term
        hf = self.heads >= self.n_term
        np.add.at(G, self.tails[tf] - self.n_term, contrib[tf])
        np.add.at(G, self.heads[hf] - self.n_term, -contrib[hf])
        return G


def position_gradient(
    config: SignedConfig, Z, plan: TransportPlan, q: float
) -> np.ndarray:
    """Gradient of the plan's q-power cost w.r.t. each free atom position.

    Per arc the gradient of flow*|d|^q is q*flow*|d|^(q-2)*d, which tends
    to zero as |d| -> 0 for every q > 1; coincident endpoints therefore
    contribute zero.  Atoms without incident positive flow get a zero row.
    """
    if q <= 1.0:
        raise ValueError(f"gradient requires q > 1, got {q}")
    Z = as_positions(Z, config.dimension)
    return _PlanObjective(config, plan, q).gradient(Z)


def optimize_positions(
    config: SignedConfig,
    plan: TransportPlan,
    Z0,
    q: float,
    grad_tol: float = 1e-9,
    max_iter: int = 500,
) -> tuple[np.ndarray, float, int, bool]:
    """Minimize the fixed-plan cost over free positions.

    Gradient descent with Armijo backtracking (constant 1e-4, halving);
    the function is convex for q > 1, so this finds the global minimum
    for the given plan.  Stops when the sup-norm of the gradient drops
    below grad_tol * total_mass * diameter^(q-1), an invariant scaling of
    the stationarity residual.  Returns (Z, cost, iterations, converged);
    on budget exhaustion the best iterate is returned with converged
    False.  Atoms the plan never touches keep their Z0 rows.
    """
    if q <= 1.0:
        raise ValueError(f"optimization requires q > 1, got {q}")
    Z = as_positions(Z0, config.dimension).copy()
    if Z.shape[0] != plan.n_free:
        raise ValueError("Z0 and plan disagree on the number of free atoms")
    obj = _PlanObjective(config, plan, q)
    diam = config.diameter()
    scale = max(total_mass(config) * max(diam, 1e-300) ** (q - 1.0), 1e-300)
    tol = grad_tol * scale
    f = obj.cost(Z)
    step = None
    iters = 0
    for iters in range(1, max_iter + 1):
        G = obj.gradient(Z)
        gmax = float(np.abs(G).max()) if G.size else 0.0
        if gmax <= tol:
            return Z, f, iters - 1, True
        gsq = float((G * G).sum())
        if step is None:
            step = max(diam, 1e-12) / max(np.sqrt(gsq), 1e-300)
        else:
            step *= 2.0
        accepted = False
        while step * np.sqrt(gsq) > 1e-16 * max(diam, 1e-12):
            Z_new = Z - step * G
            f_new = obj.cost(Z_new)
            if f_new <= f - 1e-4 * step * gsq:
                Z, f = Z_new, f_new
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # line search stalled at floating-point resolution: stationary
            return Z, f, iters, True
    G = obj.gradient(Z)
    gmax = float(np.abs(G).max()) if G.size else 0.0
    return Z, f, iters, gmax <= tol


def _spread_atoms(segments: list[tuple[np.ndarray, np.ndarray, float]], n: int) -> np.ndarray:
    """Place n atoms across weighted segments, equally spaced inside each.

    segments: (start point, end point, weight); counts by largest-remainder
    on the weights, positions at fractions l/(count+1) along each segment.
    """
    weights = np.array([max(w, 0.0) for _, _, w in segments], dtype=float)
    if weights.sum() <= 0:
        weights = np.ones(len(segments))
    counts = integer_mass_units(weights, units=n)
    rows = []
    for (a, b, _), c in zip(segments, counts):
        for l in range(1, int(c) + 1):
            rows.append(a + (l / (c + 1.0)) * (b - a))
    if not rows:
        return np.zeros((0, segments[0][0].shape[0] if segments else 0))
    return np.vstack(rows)


def w1_seed(config: SignedConfig, n: int) -> np.ndarray:
    """Deterministic start: atoms along the W_1-optimal matching segments.

    The q=1 coupling between the terminal measures picks out transport
    segments; atoms are distributed over them proportionally to flow
    times length (largest-remainder), equally spaced inside each segment.
    Exactly optimal for a single source-sink pair.
    """
    coupling, _ = wasserstein_coupling(config.sources, config.sinks, 1.0)
    src = config.source_positions()
    snk = config.sink_positions()
    segments = []
    for (i, j), g in sorted(coupling.items()):
        if g <= 0:
            continue
        a, b = src[i], snk[j]
        segments.append((a, b, g * float(np.linalg.norm(b - a))))
    if not segments:
        anchor = src[0] if len(src) else np.zeros(config.dimension)
        return np.tile(anchor, (n, 1))
    return _spread_atoms(segments, n)


def _random_seed_positions(
    config: SignedConfig, n: int, rng: np.random.Generator
) -> np.ndarray:
    low, high = config.bbox()
    return rng.uniform(low, high, size=(n, config.dimension))


def _same_support(a: TransportPlan, b: TransportPlan, tol: float) -> bool:
    return set(a.pruned(tol).entries) == set(b.pruned(tol).entries)


def _descend(
    config: SignedConfig,
    Z0: np.ndarray,
    q: float,
    params: CostParams,
) -> tuple[np.ndarray, TransportPlan, float, int, bool]:
    """One pass of alternating minimization from a given start.

    Each round: exact plan for the current positions, regularization,
    position descent.  Every half-step must not increase the cost; a
    violation beyond slack raises SolverError.  Stops on relative cost
    decrease below params.rel_tol, then polishes positions to the strict
    gradient tolerance and re-stabilizes the plan.
    """
    Z = Z0.copy()
    prev = np.inf
    converged = False
    rounds = 0
    plan = None
    cost = np.inf
    for rounds in range(1, params.max_rounds + 1):
        plan, cost_plan = min_cost_plan(config, Z, q)
        if cost_plan > prev * (1.0 + MONOTONE_SLACK) + 1e-300:
            raise SolverError(
                f"plan solve increased cost: {prev!r} -> {cost_plan!r}"
            )
        plan = regularize(plan, config, Z, q)
        cost_reg = plan_cost(config, Z, plan, q)
        if cost_reg > cost_plan * (1.0 + MONOTONE_SLACK) + 1e-300:
            raise SolverError(
                f"regularization increased cost: {cost_plan!r} -> {cost_reg!r}"
            )
        Z, cost, _, _ = optimize_positions(
            config, plan, Z, q,
            grad_tol=params.grad_tol, max_iter=params.inner_iters,
        )
        if cost > cost_reg * (1.0 + MONOTONE_SLACK) + 1e-300:
            raise SolverError(
                f"position step increased cost: {cost_reg!r} -> {cost!r}"
            )
        if prev - cost <= params.rel_tol * max(abs(prev), 1e-300):
            converged = True
            break
        prev = cost
    # polish: strict stationarity for the final plan, then re-stabilize
    tol = zero_flow_threshold(plan, config)
    for _ in range(5):
        Z, cost, _, _ = optimize_positions(
            config, plan, Z, q,
            grad_tol=params.grad_tol, max_iter=params.polish_iters,
        )
        plan2, _ = min_cost_plan(config, Z, q)
        plan2 = regularize(plan2, config, Z, q)
        cost2 = plan_cost(config, Z, plan2, q)
        stable = _same_support(plan2, plan, tol)
        plan, cost = plan2, min(cost, cost2)
        if stable:
            break
    return Z, plan, cost, rounds, converged


def _rebalance_layout(
    config: SignedConfig,
    Z: np.ndarray,
    plan: TransportPlan,
    q: float,
    n: int,
) -> np.ndarray | None:
    """Atom layout suggested by the closed-form allocation on the reduced tree.

    Junction atoms stay where the tree branches; the remaining budget is
    spread over the reduced edges by the allocation rule.  Returns None
    when the tree cannot absorb the budget (more junctions than atoms or
    fewer spare atoms than edges).
    """
    try:
        tree = reduce_graph(plan_to_graph(config, Z, plan))
    except (ValueError, SolverError):
        return None
    junctions = [v for v in tree.free_indices()]
    spare = n - len(junctions)
    if len(tree.edges) == 0 or spare < len(tree.edges):
        return None
    alloc = allocate(tree, spare, q)
    rows = [tree.positions[v] for v in junctions]
    rows.extend(alloc.atom_positions)
    Z_new = np.vstack(rows) if rows else np.zeros((0, config.dimension))
    if Z_new.shape[0] != n:
        return None
    return Z_new


def alternate_minimize(
    config: SignedConfig,
    n: int,
    params: CostParams | None = None,
    q: float | None = None,
) -> SolveResult:
    """Best-of-multistart alternating minimization with n free atoms.

    Starts: one deterministic layout along the W_1 matching, plus
    params.restarts uniform samples in the terminal bounding box, all
    driven by params.seed (bit-identical reruns).  Each start descends
    to a fixed point, then tries allocation-guided rebalances (kept only
    on strict improvement).  Ties break on start index.
    """
    config = validate(config)
    params = params or CostParams(q=q if q is not None else 2.0)
    if q is not None and q != params.q:
        raise InvalidConfigError("q given twice with different values")
    q = params.q
    if n < 0:
        raise InvalidConfigError(f"atom count must be >= 0, got {n}")
    if n == 0:
        # coupling keys are already (source index, sink index)
        coupling, cost = wasserstein_coupling(config.sources, config.sinks, q)
        plan = TransportPlan(config.n_sources, config.n_sinks, 0, dict(coupling))
        return SolveResult(
            Z=FreeAtoms(np.zeros((0, config.dimension))),
            plan=plan, cost_q=cost, n=0, q=q,
            iterations=0, converged=True,
            n_starts=0, start_costs=(cost,),
        )

    starts: list[np.ndarray] = [w1_seed(config, n)]
    for k in range(params.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([params.seed, k]))
        starts.append(_random_seed_positions(config, n, rng))

    best: tuple[float, int, np.ndarray, TransportPlan, int, bool] | None = None
    start_costs: list[float] = []
    for idx, Z0 in enumerate(starts):
        Z, plan, cost, rounds, conv = _descend(config, Z0, q, params)
        # each accepted rebalance simplifies the tree topology a little, so
        # allow enough passes for the cascade to bottom out
        for _ in range(12):
            Z_re = _rebalance_layout(config, Z, plan, q, n)
            if Z_re is None:
                break
            Z2, plan2, cost2, rounds2, conv2 = _descend(config, Z_re, q, params)
            rounds += rounds2
            if cost2 < cost * (1.0 - 1e-12):
                Z, plan, cost, conv = Z2, plan2, cost2, conv2
            else:
                break
        start_costs.append(cost)
        if best is None or cost < best[0] * (1.0 - 1e-12):
            best = (cost, idx, Z, plan, rounds, conv)

    cost, idx, Z, plan, rounds, conv = best
    tol = zero_flow_threshold(plan, config)
    used = plan.throughputs() > tol
    return SolveResult(
        Z=FreeAtoms(Z),
        plan=plan,
        cost_q=cost,
        n=n,
        q=q,
        iterations=rounds,
        converged=conv,
        start_index=idx,
        n_starts=len(starts),
        unused_atoms=int((~used).sum()),
        start_costs=tuple(start_costs),
    )


def solve_result_to_dict(result: SolveResult, config: SignedConfig) -> dict:
    """Serializable report for one solve."""
    return {
        "n": result.n,
        "q": result.q,
        "cost_q": result.cost_q,
        "wbar": result.wbar,
        "rescaled": result.rescaled,
        "iterations": result.iterations,
        "converged": result.converged,
        "start_index": result.start_index,
        "n_starts": result.n_starts,
        "unused_atoms": result.unused_atoms,
        "start_costs": list(result.start_costs),
        "free_atoms": [[float(c) for c in row] for row in result.Z.positions],
        "plan": [
            [int(i), int(j), float(g)] for i, j, g in result.plan.to_triplets()
        ],
    }
