"""Multi-modal planning: graph construction over the environment by uniform
lattice or sampling (mode-tagged probabilistic roadmap), energy edge costs,
and deterministic Dijkstra / A* search.

Legged nodes live on the walkable layer (stand height above the local ground
surface); aerial nodes fill free space. Transition edges are near-vertical
links between the two strata and carry a fixed mode-switch energy.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .environment import Environment


class Mode(str, Enum):
    LEGGED = "legged"
    AERIAL = "aerial"
    TRANSITION = "transition"


class PlannerError(RuntimeError):
    pass


@dataclass(frozen=True)
class GraphNode:
    id: int
    pos: tuple[float, float, float]
    mode: Mode


@dataclass(frozen=True)
class GraphEdge:
    a: int
    b: int
    mode: Mode
    length: float
    cost: float


@dataclass
class CostModel:
    """Energy-based edge costs. Distance terms are J/m; holding terms are J/s
    charged over the traversal time at the nominal mode speed; each mode
    switch costs a fixed transition energy."""

    c_leg: float = 10.0
    c_air: float = 60.0
    p_leg: float = 30.0
    p_air: float = 1000.0
    e_trans: float = 1500.0
    v_leg: float = 0.25
    v_air: float = 1.0

    def __post_init__(self):
        vals = (self.c_leg, self.c_air, self.p_leg, self.p_air, self.v_leg, self.v_air)
        if any(v < 0 for v in vals):
            raise ValueError("cost coefficients must be >= 0")
        if self.e_trans <= 0:
            raise ValueError("e_trans must be > 0")

    @property
    def legged_rate(self) -> float:
        """J per meter walked, including holding cost."""
        return self.c_leg + self.p_leg / self.v_leg

    @property
    def aerial_rate(self) -> float:
        return self.c_air + self.p_air / self.v_air

    @property
    def min_rate(self) -> float:
        return min(self.legged_rate, self.aerial_rate)


def edge_cost(length: float, mode: Mode, cost: CostModel) -> float:
    if length < 0:
        raise ValueError("length must be >= 0")
    if mode is Mode.LEGGED:
        return cost.legged_rate * length
    if mode is Mode.AERIAL:
        return cost.aerial_rate * length
    return cost.e_trans


class ModalGraph:
    """Immutable-after-build undirected graph with mode-tagged nodes/edges."""

    def __init__(self, metadata: dict | None = None):
        self.nodes: list[GraphNode] = []
        self.edges: list[GraphEdge] = []
        self.metadata: dict = metadata or {}
        self._edge_keys: set[tuple[int, int]] = set()
        self._adj: dict[int, list[int]] | None = None

    def add_node(self, pos, mode: Mode) -> int:
        nid = len(self.nodes)
        self.nodes.append(GraphNode(nid, (float(pos[0]), float(pos[1]), float(pos[2])), mode))
        self._adj = None
        return nid

    def add_edge(self, a: int, b: int, mode: Mode, cost_model: CostModel) -> bool:
        """Add an undirected edge; returns False if it already exists."""
        if a == b:
            raise PlannerError("self edges not allowed")
        if not (0 <= a < len(self.nodes) and 0 <= b < len(self.nodes)):
            raise PlannerError(f"edge ({a}, {b}) references missing node")
        key = (a, b) if a < b else (b, a)
        if key in self._edge_keys:
            return False
        pa, pb = self.nodes[a].pos, self.nodes[b].pos
        length = math.dist(pa, pb)
        self.edges.append(GraphEdge(key[0], key[1], mode, length, edge_cost(length, mode, cost_model)))
        self._edge_keys.add(key)
        self._adj = None
        return True

    def adjacency(self) -> dict[int, list[int]]:
        """node id -> sorted list of incident edge indices."""
        if self._adj is None:
            adj: dict[int, list[int]] = {n.id: [] for n in self.nodes}
            for idx, e in enumerate(self.edges):
                adj[e.a].append(idx)
                adj[e.b].append(idx)
            self._adj = adj
        return self._adj

    def nodes_of_mode(self, mode: Mode) -> list[GraphNode]:
        return [n for n in self.nodes if n.mode is mode]


def nearest_node(graph: ModalGraph, pos, mode: Mode | None = None) -> int:
    """Closest node id (euclidean, ties by id); optionally restricted by mode."""
    best = None
    best_d = math.inf
    for n in graph.nodes:
        if mode is not None and n.mode is not mode:
            continue
        d = math.dist(n.pos, tuple(pos))
        if d < best_d:
            best, best_d = n.id, d
    if best is None:
        raise PlannerError(f"graph has no nodes of mode {mode}")
    return best


def subgraph_by_mode(graph: ModalGraph, modes: set[Mode], cost_model: CostModel) -> ModalGraph:
    """Copy of the graph keeping only nodes/edges of the given modes (node ids
    are re-assigned; original ids stored in metadata)."""
    sub = ModalGraph(metadata=dict(graph.metadata))
    sub.metadata["filtered_modes"] = sorted(m.value for m in modes)
    remap: dict[int, int] = {}
    for n in graph.nodes:
        if n.mode in modes:
            remap[n.id] = sub.add_node(n.pos, n.mode)
    for e in graph.edges:
        if e.mode in modes and e.a in remap and e.b in remap:
            sub.add_edge(remap[e.a], remap[e.b], e.mode, cost_model)
    sub.metadata["original_ids"] = [orig for orig in sorted(remap, key=remap.get)]
    return sub


def _lattice_axis(lo: float, hi: float, spacing: float) -> list[float]:
    n = int(math.floor((hi - lo) / spacing + 1e-9)) + 1
    return [lo + k * spacing for k in range(n)]


def discretize_uniform(env: Environment, spacing: float, cost: CostModel, *,
                       stand_height: float = 0.30, max_climb: float = 0.2,
                       seg_step: float | None = None) -> ModalGraph:
    """Uniform lattice discretization: aerial nodes on the full 3D lattice,
    legged nodes on the walkable layer, 26/8-connectivity edges validated by
    sampled segment checks, vertical transition edges where an aerial node
    sits within one spacing above a legged node."""
    if spacing <= 0:
        raise ValueError("spacing must be > 0")
    seg_step = seg_step if seg_step is not None else spacing / 4.0
    lo, hi = env.bounds.lo, env.bounds.hi
    xs = _lattice_axis(lo[0], hi[0], spacing)
    ys = _lattice_axis(lo[1], hi[1], spacing)
    zs = _lattice_axis(lo[2], hi[2], spacing)

    graph = ModalGraph(metadata={
        "method": "uniform", "spacing": spacing, "stand_height": stand_height,
        "max_climb": max_climb, "seg_step": seg_step, "seed": None,
    })

    legged_idx: dict[tuple[int, int], int] = {}
    for ix, x in enumerate(xs):
        for iy, y in enumerate(ys):
            z = env.ground_height(x, y) + stand_height
            if env.is_free((x, y, z)):
                legged_idx[(ix, iy)] = graph.add_node((x, y, z), Mode.LEGGED)

    aerial_idx: dict[tuple[int, int, int], int] = {}
    for ix, x in enumerate(xs):
        for iy, y in enumerate(ys):
            for iz, z in enumerate(zs):
                if env.is_free((x, y, z)):
                    aerial_idx[(ix, iy, iz)] = graph.add_node((x, y, z), Mode.AERIAL)

    if not graph.nodes:
        raise PlannerError("environment fully occupied, no nodes")

    for (ix, iy), nid in legged_idx.items():
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if (dx, dy) <= (0, 0):
                    continue  # each unordered pair once
                other = legged_idx.get((ix + dx, iy + dy))
                if other is None:
                    continue
                pa, pb = graph.nodes[nid].pos, graph.nodes[other].pos
                if abs(pa[2] - pb[2]) > max_climb:
                    continue
                if env.segment_free(pa, pb, seg_step):
                    graph.add_edge(nid, other, Mode.LEGGED, cost)

    for (ix, iy, iz), nid in aerial_idx.items():
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    if (dx, dy, dz) <= (0, 0, 0):
                        continue
                    other = aerial_idx.get((ix + dx, iy + dy, iz + dz))
                    if other is None:
                        continue
                    if env.segment_free(graph.nodes[nid].pos, graph.nodes[other].pos, seg_step):
                        graph.add_edge(nid, other, Mode.AERIAL, cost)

    for (ix, iy), nid in legged_idx.items():
        z_leg = graph.nodes[nid].pos[2]
        best = None
        for iz in range(len(zs)):
            other = aerial_idx.get((ix, iy, iz))
            if other is None:
                continue
            dz = graph.nodes[other].pos[2] - z_leg
            if 0.0 < dz <= spacing and (best is None or dz < best[0]):
                best = (dz, other)
        if best is not None and env.segment_free(graph.nodes[nid].pos, graph.nodes[best[1]].pos, seg_step):
            graph.add_edge(nid, best[1], Mode.TRANSITION, cost)

    check_heuristic_consistency(graph, cost)
    return graph


def discretize_mmprm(env: Environment, n_samples: int, connect_radius: float,
                     seed: int, cost: CostModel, *, rho_leg: float = 0.4,
                     k_neighbors: int = 10, stand_height: float = 0.30,
                     max_climb: float = 0.2, seg_step: float | None = None,
                     trans_xy_tol: float | None = None) -> ModalGraph:
    """Mode-tagged probabilistic roadmap.

    A fraction rho_leg of the samples is projected onto the walkable layer
    (legged); the rest are drawn uniformly in free space (aerial). Each node
    connects to its k nearest same-mode neighbors within connect_radius when
    the segment check passes; each legged node additionally attempts a single
    transition edge to the nearest aerial node overhead (within trans_xy_tol
    laterally and connect_radius along the segment). Fully seeded: identical
    inputs rebuild the identical graph.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be > 0")
    if connect_radius <= 0:
        raise ValueError("connect_radius must be > 0")
    seg_step = seg_step if seg_step is not None else connect_radius / 8.0
    trans_xy_tol = trans_xy_tol if trans_xy_tol is not None else 0.25 * connect_radius
    rng = np.random.default_rng(seed)
    lo, hi = env.bounds.lo, env.bounds.hi

    graph = ModalGraph(metadata={
        "method": "mmprm", "n_samples": n_samples, "connect_radius": connect_radius,
        "seed": seed, "rho_leg": rho_leg, "k_neighbors": k_neighbors,
        "stand_height": stand_height, "max_climb": max_climb,
        "seg_step": seg_step, "trans_xy_tol": trans_xy_tol,
    })

    n_leg = int(round(rho_leg * n_samples))
    n_air = n_samples - n_leg
    budget = 50 * n_samples

    accepted = 0
    while accepted < n_leg and budget > 0:
        budget -= 1
        x = rng.uniform(lo[0], hi[0])
        y = rng.uniform(lo[1], hi[1])
        z = env.ground_height(x, y) + stand_height
        if env.is_free((x, y, z)):
            graph.add_node((x, y, z), Mode.LEGGED)
            accepted += 1
    accepted = 0
    while accepted < n_air and budget > 0:
        budget -= 1
        p = (rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), rng.uniform(lo[2], hi[2]))
        if env.is_free(p):
            graph.add_node(p, Mode.AERIAL)
            accepted += 1

    if not graph.nodes:
        raise PlannerError("no valid samples, environment fully occupied")

    for mode in (Mode.LEGGED, Mode.AERIAL):
        group = graph.nodes_of_mode(mode)
        if len(group) < 2:
            continue
        pts = np.array([n.pos for n in group])
        ids = [n.id for n in group]
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        for row, nid in enumerate(ids):
            order = np.argsort(d2[row], kind="stable")
            found = 0
            for col in order:
                if col == row:
                    continue
                dist = math.sqrt(float(d2[row, col]))
                if dist > connect_radius:
                    break
                if found >= k_neighbors:
                    break
                other = ids[col]
                pa, pb = graph.nodes[nid].pos, graph.nodes[other].pos
                if mode is Mode.LEGGED and abs(pa[2] - pb[2]) > max_climb:
                    continue
                if env.segment_free(pa, pb, seg_step):
                    graph.add_edge(nid, other, mode, cost)
                found += 1

    air = graph.nodes_of_mode(Mode.AERIAL)
    for leg in graph.nodes_of_mode(Mode.LEGGED):
        best = None
        for a in air:
            dxy = math.hypot(a.pos[0] - leg.pos[0], a.pos[1] - leg.pos[1])
            if dxy > trans_xy_tol or a.pos[2] <= leg.pos[2]:
                continue
            d = math.dist(a.pos, leg.pos)
            if d <= connect_radius and (best is None or d < best[0]):
                best = (d, a.id)
        if best is not None and env.segment_free(leg.pos, graph.nodes[best[1]].pos, seg_step):
            graph.add_edge(leg.id, best[1], Mode.TRANSITION, cost)

    check_heuristic_consistency(graph, cost)
    return graph


def check_heuristic_consistency(graph: ModalGraph, cost: CostModel) -> None:
    """Verify cost(a, b) >= |h(a) - h(b)| for every edge, where h is the
    euclidean distance scaled by the cheapest per-meter rate. This is the
    consistency condition that makes the A* heuristic admissible."""
    rate = cost.min_rate
    for e in graph.edges:
        dh = rate * math.dist(graph.nodes[e.a].pos, graph.nodes[e.b].pos)
        if e.cost + 1e-9 < dh:
            raise PlannerError(
                f"edge ({e.a}, {e.b}) cost {e.cost} below heuristic gap {dh}; "
                "A* would be inadmissible with this cost model"
            )


@dataclass
class Plan:
    node_ids: list[int]
    positions: list[tuple[float, float, float]]
    modes: list[Mode]
    edge_modes: list[Mode]
    edge_lengths: list[float]
    edge_costs: list[float]
    total_cost: float
    expanded: int = 0
    expansion_order: list[int] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def transition_indices(self) -> list[int]:
        return [i for i, m in enumerate(self.edge_modes) if m is Mode.TRANSITION]

    @property
    def num_transitions(self) -> int:
        return len(self.transition_indices)

    def validate(self) -> None:
        if abs(sum(self.edge_costs) - self.total_cost) > 1e-9:
            raise PlannerError("total cost does not match edge-cost sum")
        for i in range(len(self.edge_modes)):
            if self.modes[i] is not self.modes[i + 1] and self.edge_modes[i] is not Mode.TRANSITION:
                raise PlannerError(f"mode change at edge {i} without a transition edge")


def _reconstruct(graph: ModalGraph, parent: dict[int, int], start: int, goal: int,
                 expansion_order: list[int]) -> Plan:
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    path.reverse()
    edge_map = {}
    for e in graph.edges:
        edge_map[(e.a, e.b)] = e
        edge_map[(e.b, e.a)] = e
    edge_modes, edge_lengths, edge_costs = [], [], []
    total = 0.0
    for a, b in zip(path, path[1:]):
        e = edge_map[(a, b)]
        edge_modes.append(e.mode)
        edge_lengths.append(e.length)
        edge_costs.append(e.cost)
        total += e.cost
    plan = Plan(
        node_ids=path,
        positions=[graph.nodes[i].pos for i in path],
        modes=[graph.nodes[i].mode for i in path],
        edge_modes=edge_modes,
        edge_lengths=edge_lengths,
        edge_costs=edge_costs,
        total_cost=total,
        expanded=len(expansion_order),
        expansion_order=expansion_order,
        metadata={"start": start, "goal": goal},
    )
    plan.validate()
    return plan


def _search(graph: ModalGraph, start: int, goal: int, h) -> Plan | None:
    """Deterministic label-setting search. Ties on path cost are broken by
    fewer edges, then by smaller predecessor id; heap order is (f, hops, id)."""
    n = len(graph.nodes)
    if not (0 <= start < n and 0 <= goal < n):
        raise PlannerError(f"invalid node ids ({start}, {goal})")
    expansion_order: list[int] = []
    if start == goal:
        node = graph.nodes[start]
        return Plan([start], [node.pos], [node.mode], [], [], [], 0.0, 0, [], {"start": start, "goal": goal})

    adj = graph.adjacency()
    dist: dict[int, float] = {start: 0.0}
    hops: dict[int, int] = {start: 0}
    parent: dict[int, int] = {}
    settled: set[int] = set()
    heap: list[tuple[float, int, int]] = [(h(start), 0, start)]
    while heap:
        _, _, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        expansion_order.append(u)
        if u == goal:
            return _reconstruct(graph, parent, start, goal, expansion_order)
        for ei in adj[u]:
            e = graph.edges[ei]
            v = e.b if e.a == u else e.a
            if v in settled:
                continue
            ng = dist[u] + e.cost
            nh = hops[u] + 1
            better = v not in dist or ng < dist[v] or (
                ng == dist[v] and (nh < hops[v] or (nh == hops[v] and u < parent[v]))
            )
            if better:
                dist[v] = ng
                hops[v] = nh
                parent[v] = u
                heapq.heappush(heap, (ng + h(v), nh, v))
    return None


def dijkstra(graph: ModalGraph, start: int, goal: int) -> Plan | None:
    """Minimum-cost path; returns None when the goal is unreachable."""
    return _search(graph, start, goal, lambda _: 0.0)


def astar(graph: ModalGraph, start: int, goal: int, cost: CostModel) -> Plan | None:
    """A* with the euclidean-times-cheapest-rate heuristic; totals match
    dijkstra exactly by admissibility."""
    gp = graph.nodes[goal].pos
    rate = cost.min_rate

    def h(nid: int) -> float:
        return rate * math.dist(graph.nodes[nid].pos, gp)

    return _search(graph, start, goal, h)


# ---------------------------------------------------------------------------
# serialization

def graph_to_dict(graph: ModalGraph) -> dict:
    return {
        "metadata": graph.metadata,
        "nodes": [{"id": n.id, "pos": list(n.pos), "mode": n.mode.value} for n in graph.nodes],
        "edges": [
            {"a": e.a, "b": e.b, "mode": e.mode.value, "length": e.length, "cost": e.cost}
            for e in graph.edges
        ],
    }


def graph_from_dict(d: dict) -> ModalGraph:
    graph = ModalGraph(metadata=d.get("metadata", {}))
    for nd in d["nodes"]:
        nid = graph.add_node(tuple(nd["pos"]), Mode(nd["mode"]))
        if nid != nd["id"]:
            raise PlannerError("node ids must be contiguous in file order")
    for ed in d["edges"]:
        key = (ed["a"], ed["b"]) if ed["a"] < ed["b"] else (ed["b"], ed["a"])
        if key in graph._edge_keys:
            raise PlannerError(f"duplicate edge {key}")
        graph.edges.append(GraphEdge(key[0], key[1], Mode(ed["mode"]), ed["length"], ed["cost"]))
        graph._edge_keys.add(key)
    return graph


def save_graph(graph: ModalGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(graph), sort_keys=True) + "\n")


def load_graph(path) -> ModalGraph:
    return graph_from_dict(json.loads(Path(path).read_text()))


def plan_to_dict(plan: Plan) -> dict:
    return {
        "waypoints": [
            {"id": i, "pos": list(p), "mode": m.value}
            for i, p, m in zip(plan.node_ids, plan.positions, plan.modes)
        ],
        "edges": [
            {"mode": m.value, "length": l, "cost": c}
            for m, l, c in zip(plan.edge_modes, plan.edge_lengths, plan.edge_costs)
        ],
        "total_cost": plan.total_cost,
        "expanded": plan.expanded,
        "metadata": plan.metadata,
    }


def plan_from_dict(d: dict) -> Plan:
    plan = Plan(
        node_ids=[w["id"] for w in d["waypoints"]],
        positions=[tuple(w["pos"]) for w in d["waypoints"]],
        modes=[Mode(w["mode"]) for w in d["waypoints"]],
        edge_modes=[Mode(e["mode"]) for e in d["edges"]],
        edge_lengths=[e["length"] for e in d["edges"]],
        edge_costs=[e["cost"] for e in d["edges"]],
        total_cost=d["total_cost"],
        expanded=d.get("expanded", 0),
        metadata=d.get("metadata", {}),
    )
    plan.validate()
    return plan


def save_plan(plan: Plan, path) -> None:
    Path(path).write_text(json.dumps(plan_to_dict(plan), sort_keys=True) + "\n")


def load_plan(path) -> Plan:
    return plan_from_dict(json.loads(Path(path).read_text()))


def reachable_nodes(graph: ModalGraph, start: int) -> set[int]:
    """Flood fill over the adjacency; used for connectivity diagnostics."""
    adj = graph.adjacency()
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for ei in adj[u]:
            e = graph.edges[ei]
            v = e.b if e.a == u else e.a
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen
