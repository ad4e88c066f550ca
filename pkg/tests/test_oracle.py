import math

import numpy as np
import pytest

from branchflow import Atom, SignedConfig, graph_cost, oracle, single_edge, y_instance
from branchflow.oracle import EnumerationBudgetError, enumerate_topologies
from conftest import random_config


def rotate(cfg: SignedConfig, theta: float, shift=(0.0, 0.0)) -> SignedConfig:
    R = np.array([[math.cos(theta), -math.sin(theta)],
                  [math.sin(theta), math.cos(theta)]])
    move = lambda a: Atom(tuple(R @ np.array(a.position) + np.array(shift)), a.mass)
    return SignedConfig(
        sources=tuple(move(a) for a in cfg.sources),
        sinks=tuple(move(a) for a in cfg.sinks),
        dimension=2,
    )


class TestClosedForms:
    def test_single_edge_is_direct(self):
        sol = oracle(single_edge(), 2.0)
        assert sol.cost == pytest.approx(1.0, abs=1e-12)
        assert len(sol.graph.edges) == 1
        assert sol.topology.n_steiner == 0

    def test_y_instance_branches_at_unit_height(self):
        sol = oracle(y_instance(), 2.0)
        assert sol.cost == pytest.approx(3.0 * math.sqrt(2.0), abs=1e-9)
        assert sol.steiner_positions.shape == (1, 2)
        assert sol.steiner_positions[0] == pytest.approx([0.0, 1.0], abs=1e-6)
        assert graph_cost(sol.graph, 2.0) == pytest.approx(sol.cost)

    def test_without_branch_points_the_v_shape_wins(self):
        sol = oracle(y_instance(), 2.0, s_max=0)
        assert sol.cost == pytest.approx(2.0 * math.sqrt(5.0), abs=1e-9)

    def test_branch_points_only_help(self):
        for q in (1.5, 2.0, 4.0):
            v = oracle(y_instance(), q, s_max=0).cost
            y = oracle(y_instance(), q).cost
            assert y <= v + 1e-12

    def test_disconnected_optimum_two_far_pairs(self):
        cfg = SignedConfig(
            sources=(Atom((0.0, 0.0), 1.0), Atom((100.0, 0.0), 1.0)),
            sinks=(Atom((0.0, 1.0), 1.0), Atom((100.0, 1.0), 1.0)),
            dimension=2,
        )
        sol = oracle(cfg, 2.0)
        assert sol.cost == pytest.approx(2.0, abs=1e-9)
        assert len(sol.graph.edges) == 2  # two disjoint unit segments


class TestInvariances:
    def test_rigid_motions_preserve_cost(self, rng):
        for _ in range(3):
            cfg = random_config(rng, n_sources=2, n_sinks=2)
            base = oracle(cfg, 2.0).cost
            moved = oracle(rotate(cfg, theta=0.7, shift=(3.0, -1.0)), 2.0).cost
            assert moved == pytest.approx(base, rel=1e-9)

    def test_terminal_relabeling_preserves_cost(self, rng):
        cfg = random_config(rng, n_sources=2, n_sinks=2)
        flipped = SignedConfig(
            sources=tuple(reversed(cfg.sources)),
            sinks=tuple(reversed(cfg.sinks)),
            dimension=2,
        )
        assert oracle(flipped, 2.0).cost == pytest.approx(oracle(cfg, 2.0).cost, rel=1e-9)

    def test_uniform_scaling_scales_cost_linearly(self):
        cfg = y_instance()
        scaled = SignedConfig(
            sources=tuple(Atom(tuple(2.0 * c for c in a.position), a.mass) for a in cfg.sources),
            sinks=tuple(Atom(tuple(2.0 * c for c in a.position), a.mass) for a in cfg.sinks),
            dimension=2,
        )
        assert oracle(scaled, 2.0).cost == pytest.approx(2.0 * oracle(cfg, 2.0).cost, rel=1e-9)


class TestStationarity:
    def test_branch_point_force_balance(self, rng):
        # at an interior optimum the weighted unit vectors out of each branch
        # point sum to zero (first-order condition of the network cost)
        for trial in range(3):
            cfg = random_config(np.random.default_rng(300 + trial), n_sources=2, n_sinks=2)
            sol = oracle(cfg, 2.0)
            g = sol.graph
            for v in g.free_indices():
                force = np.zeros(2)
                for e in g.edges:
                    if e.tail == v or e.head == v:
                        other = e.head if e.tail == v else e.tail
                        d = g.positions[other] - g.positions[v]
                        norm = np.linalg.norm(d)
                        if norm > 1e-12:
                            force += e.weight ** 0.5 * d / norm
                assert np.linalg.norm(force) < 1e-5, f"unbalanced branch point {v}"


class TestEnumeration:
    def test_more_branch_points_never_increase_cost(self):
        cfg = y_instance()
        costs = [oracle(cfg, 2.0, s_max=s).cost for s in (0, 1, 2)]
        assert costs == sorted(costs, reverse=True)

    def test_table_is_sorted_by_cost(self):
        sol = oracle(y_instance(), 2.0)
        costs = [c for _, c in sol.table]
        assert costs == sorted(costs)
        assert costs[0] == pytest.approx(sol.cost, abs=1e-9)

    def test_topology_count_y_instance(self):
        # 3 terminals: 3 spanning trees on terminals alone, plus branched ones
        tops = enumerate_topologies(y_instance(), 1)
        assert any(t.n_steiner == 1 and len(t.edges) == 3 for t in tops)
        flows_ok = all(abs(f) > 0 for t in tops for f in t.flows)
        assert flows_ok, "zero-flow edges must be dropped during enumeration"

    def test_budget_guard_trips_on_large_enumerations(self):
        rng = np.random.default_rng(4)
        cfg = random_config(rng, n_sources=4, n_sinks=4)
        with pytest.raises(EnumerationBudgetError):
            enumerate_topologies(cfg, 8)

    def test_flows_respect_conservation(self):
        for t in enumerate_topologies(y_instance(), 2):
            # terminals 0,1 supply 1 each, terminal 2 absorbs 2
            net = {v: 0.0 for v in range(t.n_terminals + t.n_steiner)}
            for (a, b), f in zip(t.edges, t.flows):
                net[a] -= f
                net[b] += f
            assert net[0] == pytest.approx(-1.0)
            assert net[1] == pytest.approx(-1.0)
            assert net[2] == pytest.approx(2.0)
            for v in range(t.n_terminals, t.n_terminals + t.n_steiner):
                assert net[v] == pytest.approx(0.0, abs=1e-12)
