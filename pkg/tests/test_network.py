import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otcsim.network import (
    NetworkTopology,
    Role,
    from_edge_list_text,
    generate_network,
    market_maker_components,
    to_edge_list_text,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def admissible_pair_count(n_mm, n_total):
    # all (dealer, anyone) unordered pairs, no self-pairs
    return n_mm * (n_mm - 1) // 2 + n_mm * (n_total - n_mm)


class TestGenerateNetwork:
    def test_p_one_gives_every_admissible_edge(self):
        net = generate_network(2, 1, 0, 1.0, rng())
        assert net.edges == frozenset({(0, 1), (0, 2), (1, 2)})

    def test_p_zero_leaves_only_repair_edges(self):
        net = generate_network(3, 5, 0, 0.0, rng(1))
        assert len(net.edges) == 5
        for v in range(3, 8):
            assert len(net.dealer_neighbors(v)) == 1
        # no dealer-dealer edges at p=0
        assert all(u >= 3 or v >= 3 for u, v in net.edges)

    def test_mean_edge_count_matches_binomial(self):
        # Oracle: every admissible pair is an independent Bernoulli(p); the
        # repair step adds a vanishing correction at p=0.5.
        n_mm, n_vi, n_ti, p = 10, 10, 5, 0.5
        n_pairs = admissible_pair_count(n_mm, 25)
        expected = p * n_pairs
        counts = []
        g = rng(7)
        for _ in range(1000):
            counts.append(len(generate_network(n_mm, n_vi, n_ti, p, g).edges))
        mean = np.mean(counts)
        stderr = np.sqrt(n_pairs * p * (1 - p)) / np.sqrt(len(counts))
        assert abs(mean - expected) < 3 * stderr + 0.05

    def test_zero_dealers_rejected(self):
        with pytest.raises(ValueError, match="market maker"):
            generate_network(0, 5, 0, 0.5, rng())

    def test_determinism(self):
        a = generate_network(10, 10, 5, 0.37, rng(42))
        b = generate_network(10, 10, 5, 0.37, rng(42))
        assert a.edges == b.edges
        assert a.roles == b.roles

    def test_investor_investor_pairs_never_occur(self):
        for seed in range(50):
            net = generate_network(4, 8, 3, 0.9, rng(seed))
            for u, v in net.edges:
                assert net.roles[u] is Role.MARKET_MAKER or net.roles[v] is Role.MARKET_MAKER

    @given(
        n_mm=st.integers(1, 8),
        n_vi=st.integers(0, 8),
        n_ti=st.integers(0, 4),
        p=st.floats(0.0, 1.0),
        seed=st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_invariants_hold(self, n_mm, n_vi, n_ti, p, seed):
        net = generate_network(n_mm, n_vi, n_ti, p, rng(seed))
        n_total = n_mm + n_vi + n_ti
        assert set(net.roles) == set(range(n_total))
        for u, v in net.edges:
            assert u != v, "self-loop"
            assert net.roles[u] is Role.MARKET_MAKER or net.roles[v] is Role.MARKET_MAKER
        for node in range(n_mm, n_total):
            assert net.dealer_neighbors(node), "investor left without a dealer"


class TestNeighbors:
    def test_complete_small_net(self):
        net = generate_network(2, 1, 0, 1.0, rng())
        assert net.neighbors(2) == frozenset({0, 1})

    def test_p_zero_investor_has_single_dealer(self):
        net = generate_network(3, 5, 0, 0.0, rng(3))
        for v in range(3, 8):
            nbrs = net.neighbors(v)
            assert len(nbrs) == 1 and next(iter(nbrs)) < 3

    def test_never_own_neighbor_and_symmetric(self):
        net = generate_network(5, 5, 5, 0.6, rng(9))
        for a in net.nodes:
            assert a not in net.neighbors(a)
            for b in net.neighbors(a):
                assert a in net.neighbors(b)

    def test_unknown_id_raises(self):
        net = generate_network(2, 1, 0, 1.0, rng())
        with pytest.raises(KeyError):
            net.neighbors(99)


class TestMarketMakerComponents:
    def test_complete_dealer_graph_is_one_component(self):
        net = generate_network(10, 0, 0, 1.0, rng())
        assert market_maker_components(net) == [set(range(10))]

    def test_two_pairs(self):
        net = NetworkTopology(
            roles={i: Role.MARKET_MAKER for i in range(4)},
            edges=frozenset({(0, 1), (2, 3)}),
            link_probability=0.0,
        )
        assert market_maker_components(net) == [{0, 1}, {2, 3}]

    def test_sparse_networks_fragment_sometimes(self):
        fragmented = 0
        for seed in range(200):
            net = generate_network(10, 10, 5, 0.08, rng(seed))
            if len(market_maker_components(net)) > 1:
                fragmented += 1
        assert fragmented > 0

    def test_partition_property(self):
        for seed in range(30):
            net = generate_network(6, 6, 3, 0.3, rng(seed))
            comps = market_maker_components(net)
            union = set().union(*comps)
            assert union == set(range(6))
            assert sum(len(c) for c in comps) == 6


class TestSerialization:
    def test_round_trip(self):
        net = generate_network(4, 5, 2, 0.5, rng(11))
        text = to_edge_list_text(net)
        back = from_edge_list_text(text)
        assert back.edges == net.edges
        assert back.roles == net.roles
        assert back.link_probability == net.link_probability

    def test_header_then_pairs(self):
        net = generate_network(2, 1, 0, 1.0, rng())
        lines = to_edge_list_text(net).splitlines()
        assert lines[0].startswith("p ")
        assert lines[1] == "nodes 3"
        assert lines[5] == "edges 3"
        assert lines[6] == "0 1"


class TestWithoutNodes:
    def test_drop_investors_keeps_dealer_edges(self):
        net = generate_network(3, 4, 2, 1.0, rng(2))
        investors = net.by_role(Role.VALUE_INVESTOR)
        smaller = net.without_nodes(investors)
        assert set(smaller.roles) == set(range(3)) | set(net.by_role(Role.TREND_INVESTOR))
        for u, v in smaller.edges:
            assert u not in investors and v not in investors
        # dealer-dealer subgraph untouched
        assert market_maker_components(smaller) == market_maker_components(net)
