from __future__ import annotations

import itertools
import random
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sd_eval.errors import InvalidLoopError, InvalidMapError, InvalidNameError, LoopExplosionError
from sd_eval.graph import (
    CausalMap,
    DuplicateRelationshipWarning,
    FeedbackLoop,
    LoopPolarity,
    Polarity,
    diff_maps,
    enumerate_loops,
    loop_polarity,
    normalize_name,
)


def brute_force_cycles(nodes, edges):
    """Every node sequence of length 2..n that closes into a cycle, deduplicated by rotation."""
    found = set()
    for length in range(2, len(nodes) + 1):
        for seq in itertools.permutations(nodes, length):
            if all((seq[i], seq[(i + 1) % length]) in edges for i in range(length)):
                k = seq.index(min(seq))
                found.add(seq[k:] + seq[:k])
    return found


def random_map(rng: random.Random, n: int, p: float) -> CausalMap:
    names = [f"v{i}" for i in range(n)]
    rels = [
        (a, b, rng.choice("+-"))
        for a, b in itertools.permutations(names, 2)
        if rng.random() < p
    ]
    return CausalMap.build(rels, names)


@pytest.mark.parametrize(
    "raw, expected",
    [
        (" Frimbulators ", "frimbulators"),
        ("Anti-British Sentiment", "anti-british sentiment"),
        ("Colonial   Identity", "colonial identity"),
        ("a\tb\n c", "a b c"),
    ],
)
def test_normalize_name(raw, expected):
    assert normalize_name(raw) == expected


@pytest.mark.parametrize("raw", ["", "   ", "\t\n"])
def test_normalize_name_rejects_blank(raw):
    with pytest.raises(InvalidNameError):
        normalize_name(raw)


def test_polarity_wire_values():
    assert [p.value for p in Polarity] == ["+", "-"]
    assert Polarity.parse("+") is Polarity.POSITIVE
    assert Polarity.POSITIVE.flipped() is Polarity.NEGATIVE


def test_predprey_is_one_balancing_loop():
    cmap = CausalMap.build([("predators", "prey", "-"), ("prey", "predators", "+")])
    loops = enumerate_loops(cmap)
    assert loops == [FeedbackLoop(("predators", "prey"), LoopPolarity.BALANCING)]


def test_disjoint_two_cycles():
    cmap = CausalMap.build([("a", "b", "+"), ("b", "a", "+"), ("c", "d", "-"), ("d", "c", "-")])
    assert len(enumerate_loops(cmap)) == 2


def test_complete_digraph_on_three_nodes():
    cmap = CausalMap.build([(a, b, "+") for a, b in itertools.permutations("xyz", 2)])
    loops = enumerate_loops(cmap)
    assert len(loops) == 5
    assert sorted(len(loop) for loop in loops) == [2, 2, 2, 3, 3]
    assert all(loop.polarity is LoopPolarity.REINFORCING for loop in loops)


def test_loops_are_sorted_and_canonical():
    cmap = CausalMap.build([("c", "a", "+"), ("a", "b", "+"), ("b", "c", "-"), ("b", "a", "+")])
    loops = enumerate_loops(cmap)
    assert [loop.nodes for loop in loops] == [("a", "b"), ("a", "b", "c")]
    assert loops[1].polarity is LoopPolarity.BALANCING


def test_empty_map_has_no_loops():
    assert enumerate_loops(CausalMap()) == []


def test_self_loop_counts_in_candidates_only():
    cmap = CausalMap.build([("a", "a", "-")])
    assert enumerate_loops(cmap) == [FeedbackLoop(("a",), LoopPolarity.BALANCING)]
    with pytest.raises(InvalidMapError):
        CausalMap.build([("a", "a", "+")], allow_self_loops=False)


def test_loop_cap_names_the_cap():
    cmap = CausalMap.build([(a, b, "+") for a, b in itertools.permutations("abcde", 2)])
    with pytest.raises(LoopExplosionError, match="10"):
        enumerate_loops(cmap, cap=10)


@pytest.mark.parametrize(
    "signs, expected",
    [
        ("+++", LoopPolarity.REINFORCING),
        ("-+++", LoopPolarity.BALANCING),
        ("--", LoopPolarity.REINFORCING),
    ],
)
def test_loop_polarity(signs, expected):
    assert loop_polarity(list(signs)) is expected


def test_loop_polarity_rejects_empty():
    with pytest.raises(InvalidLoopError):
        loop_polarity([])


def test_duplicate_pairs_merge_last_writer_wins():
    with pytest.warns(DuplicateRelationshipWarning):
        cmap = CausalMap.build([("A", "B", "+"), ("a", "b", "-")])
    assert len(cmap.relationships) == 1
    assert cmap.relationships[0].polarity is Polarity.NEGATIVE
    assert cmap.label("a") == "A"


def test_endpoints_are_added_to_variables():
    cmap = CausalMap.build([("x", "y", "+")], ["w"])
    assert cmap.variables == ("w", "x", "y")


def test_wire_round_trip_keeps_labels():
    doc = {
        "variables": [{"name": "Driver Stress"}, {"name": "Accidents"}],
        "relationships": [
            {"from": "Driver Stress", "to": "Accidents", "polarity": "+", "reasoning": "why"}
        ],
    }
    cmap = CausalMap.from_wire(doc)
    assert cmap.variables == ("driver stress", "accidents")
    assert cmap.to_wire() == doc
    assert CausalMap.from_wire(cmap.to_wire()) == cmap


def test_render_uses_display_labels():
    cmap = CausalMap.build([("Fewer Frimbulators", "Fewer Whatajigs", "+")])
    assert cmap.render(cmap.relationships[0]) == "Fewer Frimbulators --> (+) Fewer Whatajigs"


def test_diff_identity():
    truth = CausalMap.build([("a", "b", "+"), ("b", "a", "-")])
    assert diff_maps(truth, truth).is_empty


def test_diff_reworded_variables_are_fake_and_missing():
    truth = CausalMap.build([("frimbulators", "whatajigs", "+")])
    candidate = CausalMap.build([("fewer frimbulators", "fewer whatajigs", "+")])
    diff = diff_maps(candidate, truth)
    assert (len(diff.fake), len(diff.missing), len(diff.polarity_mismatches)) == (1, 1, 0)


def test_diff_polarity_flip():
    diff = diff_maps(CausalMap.build([("a", "b", "-")]), CausalMap.build([("a", "b", "+")]))
    assert not diff.fake and not diff.missing
    (m,) = diff.polarity_mismatches
    assert (m.source, m.target, m.expected, m.actual) == ("a", "b", Polarity.POSITIVE, Polarity.NEGATIVE)


def test_diff_matching_ignores_case():
    truth = CausalMap.build([("marticatenes", "refluppers", "+")])
    candidate = CausalMap.build([("Marticatenes", "Refluppers", "+")])
    assert diff_maps(candidate, truth).is_empty


def test_cycle_enumeration_matches_brute_force():
    rng = random.Random(20240611)
    for _ in range(200):
        cmap = random_map(rng, rng.randint(1, 7), rng.uniform(0.3, 0.7))
        edges = {rel.key for rel in cmap.relationships}
        expected = brute_force_cycles(cmap.variables, edges)
        assert {loop.nodes for loop in enumerate_loops(cmap)} == expected


names = st.sampled_from(["a", "b", "c", "d", "e"])
triples = st.tuples(names, names, st.sampled_from("+-")).filter(lambda t: t[0] != t[1])
maps = st.lists(triples, max_size=12).map(
    lambda rels: _quiet_build(rels)
)


def _quiet_build(rels):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DuplicateRelationshipWarning)
        return CausalMap.build(rels)


@given(maps)
def test_diff_with_self_is_empty(cmap):
    assert diff_maps(cmap, cmap).is_empty


@given(maps, maps)
def test_diff_anti_symmetry(a, b):
    forward, backward = diff_maps(a, b), diff_maps(b, a)
    assert {r.key for r in forward.fake} == {r.key for r in backward.missing}
    assert {r.key for r in forward.missing} == {r.key for r in backward.fake}


@given(maps, maps)
def test_diff_sets_are_disjoint(a, b):
    diff = diff_maps(a, b)
    groups = [
        {r.key for r in diff.fake},
        {r.key for r in diff.missing},
        {(m.source, m.target) for m in diff.polarity_mismatches},
    ]
    assert sum(len(g) for g in groups) == len(set().union(*groups))


@given(st.lists(st.sampled_from("+-"), min_size=1, max_size=10), st.data())
def test_single_flip_flips_loop_polarity(signs, data):
    i = data.draw(st.integers(0, len(signs) - 1))
    flipped = list(signs)
    flipped[i] = "-" if flipped[i] == "+" else "+"
    assert loop_polarity(signs) is not loop_polarity(flipped)


@settings(max_examples=50)
@given(st.permutations(["p", "q", "r", "s"]), st.integers(0, 3))
def test_rotation_invariance(order, shift):
    rels = [(order[i], order[(i + 1) % 4], "+") for i in range(4)]
    cmap = CausalMap.build(rels)
    rotated = order[shift:] + order[:shift]
    assert FeedbackLoop.from_cycle(cmap, rotated) == FeedbackLoop.from_cycle(cmap, order)
    assert FeedbackLoop.from_cycle(cmap, order).nodes[0] == "p"
