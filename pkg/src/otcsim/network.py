"""Random visibility network over market participants.

Every edge must touch at least one market maker: dealers intermediate all
trades, so investor-investor links never exist. Candidate edges are all
(agent, market maker) pairs, each formed independently with the configured
link probability; any investor left without a dealer neighbour afterwards
is repaired with a single edge to a uniformly chosen dealer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

import numpy as np


class Role(str, Enum):
    MARKET_MAKER = "market_maker"
    VALUE_INVESTOR = "value_investor"
    TREND_INVESTOR = "trend_investor"


@dataclass(frozen=True)
class NetworkTopology:
    """Undirected visibility graph, immutable after construction.

    Node indices are dense: dealers first, then value investors, then
    trend investors. `link_probability` records the p used to build it.
    """

    roles: dict[int, Role]
    edges: frozenset[tuple[int, int]]  # canonical (low, high) pairs
    link_probability: float
    _adjacency: dict[int, frozenset[int]] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        adj: dict[int, set[int]] = {n: set() for n in self.roles}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(
            self, "_adjacency", {n: frozenset(s) for n, s in adj.items()}
        )

    @property
    def nodes(self) -> frozenset[int]:
        return frozenset(self.roles)

    def neighbors(self, node: int) -> frozenset[int]:
        if node not in self._adjacency:
            raise KeyError(f"unknown agent index {node}")
        return self._adjacency[node]

    def dealer_neighbors(self, node: int) -> frozenset[int]:
        """Neighbouring market makers of `node` (all neighbours, for investors)."""
        return frozenset(
            n for n in self.neighbors(node) if self.roles[n] is Role.MARKET_MAKER
        )

    def by_role(self, role: Role) -> list[int]:
        return sorted(n for n, r in self.roles.items() if r is role)

    @property
    def market_makers(self) -> list[int]:
        return self.by_role(Role.MARKET_MAKER)

    def without_nodes(self, drop: Iterable[int]) -> "NetworkTopology":
        """Copy with `drop` nodes and all their edges removed."""
        gone = set(drop)
        return NetworkTopology(
            roles={n: r for n, r in self.roles.items() if n not in gone},
            edges=frozenset(
                e for e in self.edges if e[0] not in gone and e[1] not in gone
            ),
            link_probability=self.link_probability,
        )


def generate_network(
    n_market_makers: int,
    n_value_investors: int,
    n_trend_investors: int,
    link_probability: float,
    rng: np.random.Generator,
) -> NetworkTopology:
    """Build the random visibility network.

    Each admissible pair (one with at least one dealer endpoint, no
    self-pairs) becomes an edge independently with `link_probability`.
    Dealer-dealer pairs use the same probability. Investors left with no
    dealer neighbour then receive one edge to a uniformly drawn dealer;
    dealers themselves are never repaired, so a dealer may end up isolated
    from the other dealers.
    """
    if n_market_makers < 1:
        raise ValueError("n_market_makers: at least one market maker is required")
    if not 0.0 <= link_probability <= 1.0:
        raise ValueError("link_probability: must lie in [0, 1]")

    n_mm = n_market_makers
    n_total = n_mm + n_value_investors + n_trend_investors
    roles = {i: Role.MARKET_MAKER for i in range(n_mm)}
    roles.update(
        {i: Role.VALUE_INVESTOR for i in range(n_mm, n_mm + n_value_investors)}
    )
    roles.update(
        {i: Role.TREND_INVESTOR for i in range(n_mm + n_value_investors, n_total)}
    )

    candidates = list(_admissible_pairs(n_mm, n_total))
    draws = rng.random(len(candidates))
    edges = {pair for pair, x in zip(candidates, draws) if x < link_probability}

    # Minimum-connectivity repair for investors only.
    for node in range(n_mm, n_total):
        if not any((min(node, m), max(node, m)) in edges for m in range(n_mm)):
            m = int(rng.integers(n_mm))
            edges.add((m, node))

    return NetworkTopology(
        roles=roles, edges=frozenset(edges), link_probability=link_probability
    )


def _admissible_pairs(n_mm: int, n_total: int) -> Iterator[tuple[int, int]]:
    """All unordered pairs with a dealer endpoint, in canonical order."""
    for u in range(n_mm):
        for v in range(u + 1, n_total):
            yield (u, v)


def market_maker_components(net: NetworkTopology) -> list[set[int]]:
    """Connected components of the subgraph induced on dealers only.

    Returned sets are disjoint and cover every dealer; sorted by smallest
    member for deterministic output.
    """
    dealers = set(net.market_makers)
    unseen = set(dealers)
    components = []
    while unseen:
        start = min(unseen)
        comp = {start}
        frontier = [start]
        while frontier:
            node = frontier.pop()
            for nbr in net.neighbors(node):
                if nbr in dealers and nbr not in comp:
                    comp.add(nbr)
                    frontier.append(nbr)
        components.append(comp)
        unseen -= comp
    return sorted(components, key=min)


def to_edge_list_text(net: NetworkTopology) -> str:
    """Serialize to the edge-list text form: a node-role header block, then
    one `u v` pair per line."""
    lines = [f"p {net.link_probability!r}", f"nodes {len(net.roles)}"]
    for node in sorted(net.roles):
        lines.append(f"{node} {net.roles[node].value}")
    edges = sorted(net.edges)
    lines.append(f"edges {len(edges)}")
    for u, v in edges:
        lines.append(f"{u} {v}")
    return "\n".join(lines) + "\n"


def from_edge_list_text(text: str) -> NetworkTopology:
    """Parse the serialization produced by `to_edge_list_text`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    p = 0.0
    if lines and lines[0].startswith("p "):
        p = float(lines[0].split()[1])
        lines = lines[1:]
    header = lines[0].split()
    if header[0] != "nodes":
        raise ValueError("edge-list text must start with a 'nodes <count>' line")
    n_nodes = int(header[1])
    roles: dict[int, Role] = {}
    for ln in lines[1 : 1 + n_nodes]:
        idx, role = ln.split()
        roles[int(idx)] = Role(role)
    edge_header = lines[1 + n_nodes].split()
    if edge_header[0] != "edges":
        raise ValueError("missing 'edges <count>' line")
    edges = set()
    for ln in lines[2 + n_nodes :]:
        u, v = (int(x) for x in ln.split())
        edges.add((min(u, v), max(u, v)))
    return NetworkTopology(roles=roles, edges=frozenset(edges), link_probability=p)
