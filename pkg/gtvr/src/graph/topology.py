import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from gtvr.src.exceptions import InvalidSizeError, TopologyError

logger = logging.getLogger("GTVR")

TOPOLOGY_KINDS = ("ring", "exponential", "complete", "geometric", "custom")

# Largest distance between two points of the unit square.
COVERING_RADIUS = float(np.sqrt(2.0))
GEOMETRIC_RETRY_BUDGET = 100

Edge = Tuple[int, int]


@dataclass(frozen=True)
class Topology:
    """
    Directed communication graph over ``n`` nodes.

    An edge ``(s, r)`` means node ``s`` sends to node ``r``. Every node carries a self-loop and
    the graph must be strongly connected; both are checked on construction.

    Attributes:
        n (int): Number of nodes.
        edges (FrozenSet[Tuple[int, int]]): Ordered ``(sender, receiver)`` pairs.
        kind (str): One of ``ring``, ``exponential``, ``complete``, ``geometric``, ``custom``.
        seed (Optional[int]): Seed that produced a geometric graph, ``None`` otherwise.
        positions (Optional[np.ndarray]): Node coordinates of a geometric graph.
    """

    n: int
    edges: FrozenSet[Edge]
    kind: str
    seed: Optional[int] = None
    positions: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidSizeError(f"Topology requires n >= 1, got {self.n}")
        if self.kind not in TOPOLOGY_KINDS:
            raise TopologyError(f"Unknown topology kind '{self.kind}'")
        for s, r in self.edges:
            if not (0 <= s < self.n and 0 <= r < self.n):
                raise TopologyError(f"Edge ({s}, {r}) references a node outside [0, {self.n})")
        missing = [i for i in range(self.n) if (i, i) not in self.edges]
        if missing:
            raise TopologyError(f"Nodes {missing} have no self-loop")
        if not nx.is_strongly_connected(self.to_graph()):
            raise TopologyError(f"The {self.kind} topology with n={self.n} is not strongly connected")

    def to_graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph

    def in_neighbors(self, node: int) -> List[int]:
        """Senders of ``node``, itself included."""
        return sorted(s for s, r in self.edges if r == node)

    def out_neighbors(self, node: int) -> List[int]:
        """Receivers of ``node``, itself included."""
        return sorted(r for s, r in self.edges if s == node)

    def degrees(self, exclude_self: bool = False) -> Dict[int, Tuple[int, int]]:
        """Map node -> (in-degree, out-degree)."""
        offset = 1 if exclude_self else 0
        in_deg = {i: -offset for i in range(self.n)}
        out_deg = {i: -offset for i in range(self.n)}
        for s, r in self.edges:
            out_deg[s] += 1
            in_deg[r] += 1
        return {i: (in_deg[i], out_deg[i]) for i in range(self.n)}

    def is_symmetric(self) -> bool:
        return all((r, s) in self.edges for s, r in self.edges)

    def sorted_edges(self) -> List[List[int]]:
        return [[s, r] for s, r in sorted(self.edges)]

    def to_dict(self) -> dict:
        return {"n": self.n, "kind": self.kind, "seed": self.seed, "edges": self.sorted_edges()}


def _with_self_loops(n: int, edges: Iterable[Edge]) -> FrozenSet[Edge]:
    return frozenset(set(edges) | {(i, i) for i in range(n)})


def _check_size(n: int):
    if n is None or int(n) != n or n < 1:
        raise InvalidSizeError(f"Number of nodes must be a positive integer, got {n}")


def build_ring(n: int) -> Topology:
    """Directed cycle: node ``i`` receives from ``(i - 1) mod n`` and itself."""
    _check_size(n)
    edges = [((i - 1) % n, i) for i in range(n)]
    return Topology(n=n, edges=_with_self_loops(n, edges), kind="ring")


def build_exponential(n: int) -> Topology:
    """Node ``i`` sends to ``(i + 2^h) mod n`` for every ``2^h < n``."""
    _check_size(n)
    edges = []
    for i in range(n):
        hop = 1
        while hop < n:
            edges.append((i, (i + hop) % n))
            hop *= 2
    return Topology(n=n, edges=_with_self_loops(n, edges), kind="exponential")


def build_complete(n: int) -> Topology:
    _check_size(n)
    edges = [(s, r) for s in range(n) for r in range(n)]
    return Topology(n=n, edges=frozenset(edges), kind="complete")


def build_custom(n: int, edges: Sequence[Sequence[int]]) -> Topology:
    """Topology from an explicit ``[[sender, receiver], ...]`` list; self-loops are added."""
    _check_size(n)
    pairs = []
    for edge in edges:
        if len(edge) != 2:
            raise TopologyError(f"Edge {edge} is not a [sender, receiver] pair")
        pairs.append((int(edge[0]), int(edge[1])))
    return Topology(n=n, edges=_with_self_loops(n, pairs), kind="custom")


def build_geometric(
    n: int, radius: float, seed: int, max_retries: int = GEOMETRIC_RETRY_BUDGET
) -> Topology:
    """
    Undirected nearest-neighbor geometric graph in the unit square.

    ``n`` points are drawn uniformly from ``seed``; two nodes are linked when their Euclidean
    distance is at most ``radius``. A disconnected sample is redrawn with ``seed + 1``, up to
    ``max_retries`` attempts, so the seed stored on the result is the one actually used.

    Args:
        n (int): Number of nodes.
        radius (float): Connection radius, values above the unit-square diameter are clamped.
        seed (int): Seed of the first attempt.
        max_retries (int): Attempt budget.

    Returns:
        Topology: The connected geometric topology.
    """
    _check_size(n)
    if radius is None or radius <= 0:
        raise TopologyError(f"Geometric radius must be positive, got {radius}")
    radius = min(float(radius), COVERING_RADIUS)

    attempt_seed = seed
    for attempt in range(max_retries):
        attempt_seed = seed + attempt
        points = np.random.default_rng(attempt_seed).uniform(0.0, 1.0, size=(n, 2))
        graph = nx.random_geometric_graph(
            n, radius, pos={i: points[i].tolist() for i in range(n)}
        )
        if nx.is_connected(graph):
            if attempt > 0:
                logger.info(f"🌐 Geometric graph connected after {attempt + 1} draws (seed {attempt_seed})")
            edges = [(u, v) for u, v in graph.edges()] + [(v, u) for u, v in graph.edges()]
            return Topology(
                n=n,
                edges=_with_self_loops(n, edges),
                kind="geometric",
                seed=attempt_seed,
                positions=points,
            )
    raise TopologyError(
        f"No connected geometric graph with n={n}, radius={radius} within {max_retries} draws "
        f"(last seed tried: {attempt_seed})"
    )


def build_topology(
    kind: str,
    n: int,
    radius: float = 0.5,
    seed: int = 0,
    edges: Optional[Sequence[Sequence[int]]] = None,
) -> Topology:
    if kind == "ring":
        return build_ring(n)
    elif kind == "exponential":
        return build_exponential(n)
    elif kind == "complete":
        return build_complete(n)
    elif kind == "geometric":
        return build_geometric(n, radius, seed)
    elif kind == "custom":
        if edges is None:
            raise TopologyError("A custom topology needs an edge list")
        return build_custom(n, edges)
    else:
        raise TopologyError(f"Unknown topology kind '{kind}'. Use one of: {TOPOLOGY_KINDS}.")
