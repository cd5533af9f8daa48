"""
Undirected communication graphs over agents 1..N and the factorial subsystems
derived from them.
"""

import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Set, Tuple

import networkx as nx

logger = logging.getLogger(__name__)


class GraphError(ValueError):
    """Raised for invalid agent indices, self-loops or a disconnected network."""


def _normalize_edge(edge: Iterable[int]) -> Tuple[int, int]:
    a, b = (int(v) for v in edge)
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CommGraph:
    """Connected undirected graph. Agent indices are 1-based."""
    n_agents: int
    edges: FrozenSet[Tuple[int, int]]

    def __post_init__(self):
        if self.n_agents < 1:
            raise GraphError(f"n_agents must be positive, got {self.n_agents}")
        for a, b in self.edges:
            if a == b:
                raise GraphError(f"self-loop on agent {a}")
            for v in (a, b):
                if not 1 <= v <= self.n_agents:
                    raise GraphError(f"edge ({a}, {b}) references agent {v} outside 1..{self.n_agents}")
        if not nx.is_connected(self.to_networkx()):
            raise GraphError(f"communication graph with {self.n_agents} agents is not connected")

    @classmethod
    def from_edge_list(cls, n_agents: int, edges: Iterable[Iterable[int]]) -> "CommGraph":
        normalized = frozenset(_normalize_edge(e) for e in edges)
        return cls(n_agents=int(n_agents), edges=normalized)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(1, self.n_agents + 1))
        g.add_edges_from(self.edges)
        return g

    def has_edge(self, i: int, j: int) -> bool:
        return _normalize_edge((i, j)) in self.edges

    def sorted_edges(self) -> List[Tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class Subsystem:
    """
    Factorial subsystem of a center agent.

    `members` is the canonical stacking order for every joint vector and matrix
    of the subsystem: the center first, then its neighbors ascending.
    """
    center: int
    members: Tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.members)

    def position(self, agent: int) -> int:
        """Block position of `agent` in the joint stacking order."""
        try:
            return self.members.index(agent)
        except ValueError:
            raise GraphError(f"agent {agent} is not a member of the subsystem of agent {self.center}")

    @property
    def neighbor_members(self) -> Tuple[int, ...]:
        return self.members[1:]


def _check_index(g: CommGraph, i: int) -> None:
    if not 1 <= i <= g.n_agents:
        raise GraphError(f"agent index {i} outside 1..{g.n_agents}")


def neighbors(g: CommGraph, i: int) -> Set[int]:
    """Index set N_i of agents sharing an edge with agent i."""
    _check_index(g, i)
    found = set()
    for a, b in g.edges:
        if a == i:
            found.add(b)
        elif b == i:
            found.add(a)
    return found


def subsystem(g: CommGraph, i: int) -> Subsystem:
    _check_index(g, i)
    return Subsystem(center=i, members=(i,) + tuple(sorted(neighbors(g, i))))


def all_subsystems(g: CommGraph) -> List[Subsystem]:
    return [subsystem(g, i) for i in range(1, g.n_agents + 1)]


# Topology builders. networkx numbers nodes from 0, agents from 1.

def _from_nx(g: nx.Graph) -> CommGraph:
    return CommGraph.from_edge_list(g.number_of_nodes(), [(a + 1, b + 1) for a, b in g.edges])


def loop_graph(n: int) -> CommGraph:
    if n < 3:
        return complete_graph(n)
    return _from_nx(nx.cycle_graph(n))


def line_graph(n: int) -> CommGraph:
    return _from_nx(nx.path_graph(n))


def complete_graph(n: int) -> CommGraph:
    return _from_nx(nx.complete_graph(n))


def binary_tree_graph(n: int) -> CommGraph:
    """Complete binary tree filled level by level: agent k is the parent of 2k and 2k+1."""
    edges = [(k // 2, k) for k in range(2, n + 1)]
    return CommGraph.from_edge_list(n, edges)
