"""Exact min-cost flow on small dense networks.

Successive shortest paths with Dijkstra over reduced costs (Johnson
potentials).  Capacities are integers, so every intermediate flow value is
exact; arc costs are nonnegative floats.  Deterministic: arcs are relaxed in
insertion order and distance ties keep the earlier-discovered predecessor,
so identical inputs produce identical flows.

Dense complete-arc instances up to a few thousand arcs are the intended
scale; everything here is plain Python on purpose.
"""

from __future__ import annotations

import heapq


class SolverError(RuntimeError):
    """The flow solver failed to terminate within its augmentation budget."""


class MinCostFlowNetwork:
    __slots__ = ("n", "to", "cap", "cost", "adj")

    def __init__(self, n_nodes: int) -> None:
        self.n = n_nodes
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(n_nodes)]

    def add_arc(self, u: int, v: int, cap: int, cost: float) -> int:
        """Add u->v with the given capacity; returns the arc id."""
        a = len(self.to)
        self.to.append(v)
        self.cap.append(int(cap))
        self.cost.append(float(cost))
        self.adj[u].append(a)
        # paired residual arc
        self.to.append(u)
        self.cap.append(0)
        self.cost.append(-float(cost))
        self.adj[v].append(a + 1)
        return a

    def flow_on(self, arc_id: int) -> int:
        """Flow currently routed through a forward arc."""
        return self.cap[arc_id ^ 1]

    def solve(self, s: int, t: int, max_augmentations: int = 100_000) -> int:
        """Push maximum flow from s to t at minimum cost; returns the value."""
        n = self.n
        pi = [0.0] * n
        inf = float("inf")
        pushed = 0
        for _ in range(max_augmentations):
            dist = [inf] * n
            prev_arc = [-1] * n
            dist[s] = 0.0
            heap = [(0.0, s)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                for a in self.adj[u]:
                    if self.cap[a] <= 0:
                        continue
                    v = self.to[a]
                    # reduced cost; clamp float dust so Dijkstra stays valid
                    rc = self.cost[a] + pi[u] - pi[v]
                    if rc < 0.0:
                        rc = 0.0
                    nd = d + rc
                    if nd < dist[v]:
                        dist[v] = nd
                        prev_arc[v] = a
                        heapq.heappush(heap, (nd, v))
            if dist[t] == inf:
                return pushed
            d_t = dist[t]
            for v in range(n):
                pi[v] += dist[v] if dist[v] < d_t else d_t
            # bottleneck along the shortest path
            delta = None
            v = t
            while v != s:
                a = prev_arc[v]
                if delta is None or self.cap[a] < delta:
                    delta = self.cap[a]
                v = self.to[a ^ 1]
            v = t
            while v != s:
                a = prev_arc[v]
                self.cap[a] -= delta
                self.cap[a ^ 1] += delta
                v = self.to[a ^ 1]
            pushed += delta
        raise SolverError(
            f"min-cost flow did not finish within {max_augmentations} augmentations"
        )
