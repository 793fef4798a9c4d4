import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trussmcts.geometry import Rect
from trussmcts.grammar import (
    D,
    T,
    Action,
    IllegalAction,
    apply_action,
    brute_force_actions,
    enumerate_actions,
    is_legal,
)
from trussmcts.model import (
    Configuration,
    DesignDomain,
    ElementProperties,
    Support,
    make_element,
    restraint_count,
    violations,
    volume,
)

P = ElementProperties()
TRIANGLE = Configuration.build(elements=[((0, 0), (1, 0)), ((1, 0), (0, 1)), ((0, 1), (0, 0))])
PIN_ROLLER = (Support((0, 0), True, True), Support((1, 0), False, True))


def grid(w, h, **kw):
    kw.setdefault("horizon_T", 8)
    kw.setdefault("supports", PIN_ROLLER)
    return DesignDomain(w, h, **kw)


def test_d_action_example():
    c2 = apply_action(TRIANGLE, Action((1, 1), make_element((1, 0), (0, 1)), D))
    assert c2.elements == TRIANGLE.elements | {make_element((1, 1), (1, 0)), make_element((1, 1), (0, 1))}
    assert (len(c2.nodes), len(c2.elements)) == (4, 5)


def test_t_action_example():
    a = Action((1, 1), make_element((1, 0), (0, 1)), T, (0, 0))
    c2 = apply_action(TRIANGLE, a)
    assert make_element((1, 0), (0, 1)) not in c2.elements
    for q in ((1, 0), (0, 1), (0, 0)):
        assert make_element((1, 1), q) in c2.elements
    assert (len(c2.nodes), len(c2.elements)) == (4, 5)
    d = grid(2, 2)
    assert violations(c2, d) == []
    assert a in enumerate_actions(TRIANGLE, d, P)


def test_two_by_two_grid_actions_match_rules():
    d = grid(2, 2)
    acts = enumerate_actions(TRIANGLE, d, P)
    assert acts == brute_force_actions(TRIANGLE, d, P)
    # (1,1) sees only the hypotenuse without crossing it; T may pick (0,0) as third node
    assert acts == [
        Action((1, 1), make_element((0, 1), (1, 0)), D),
        Action((1, 1), make_element((0, 1), (1, 0)), T, (0, 0)),
    ]


@pytest.mark.parametrize(
    "action",
    [
        Action((1, 0), make_element((1, 0), (0, 1)), D),  # node already active
        Action((1, 1), make_element((0, 0), (1, 1)), D),  # element not present
        Action((1, 1), make_element((1, 0), (0, 1)), "X"),
        Action((1, 1), make_element((1, 0), (0, 1)), T),  # T without third node
        Action((1, 1), make_element((1, 0), (0, 1)), T, (1, 0)),  # third node on the element
        Action((1, 1), make_element((1, 0), (0, 1)), T, (5, 5)),  # third node inactive
        Action((1, 1), make_element((1, 0), (0, 1)), D, (0, 0)),
    ],
)
def test_apply_rejects_malformed_actions(action):
    with pytest.raises(IllegalAction):
        apply_action(TRIANGLE, action)


def test_volume_budget_exhausted_gives_no_actions():
    d = grid(4, 4, v_max=volume(TRIANGLE, P))
    assert enumerate_actions(TRIANGLE, d, P) == []


def test_volume_budget_admits_only_cheap_additions():
    d = grid(4, 4, v_max=volume(TRIANGLE, P) + 2.0)
    acts = enumerate_actions(TRIANGLE, d, P)
    assert acts
    for a in acts:
        assert volume(apply_action(TRIANGLE, a), P) <= d.v_max + 1e-9


def test_node_inside_passive_region_has_no_actions():
    d = grid(4, 4, passive_regions=(Rect(1, 1, 3, 3),))
    acts = enumerate_actions(TRIANGLE, d, P)
    assert all(a.node != (2, 2) for a in acts)
    assert acts == brute_force_actions(TRIANGLE, d, P)


def test_max_element_length_is_respected():
    d = grid(5, 5, max_element_length=1.5)
    for a in enumerate_actions(TRIANGLE, d, P):
        c2 = apply_action(TRIANGLE, a)
        for e in c2.elements - TRIANGLE.elements:
            assert ((e[0][0] - e[1][0]) ** 2 + (e[0][1] - e[1][1]) ** 2) ** 0.5 <= 1.5


def test_empty_configuration_has_no_actions():
    assert enumerate_actions(Configuration.build(), grid(3, 3), P) == []


def all_states(c, d, limit=20000):
    seen = {c.key: c}
    stack = [c]
    while stack:
        s = stack.pop()
        for a in enumerate_actions(s, d, P):
            s2 = apply_action(s, a)
            if s2.key not in seen:
                seen[s2.key] = s2
                stack.append(s2)
        assert len(seen) < limit
    return list(seen.values())


def test_three_by_three_with_extra_support_matches_brute_force():
    # a support outside the seed changes the counting rule once reached
    sup = PIN_ROLLER + (Support((2, 2), True, True),)
    d = grid(3, 3, supports=sup)
    for s in all_states(TRIANGLE, d):
        assert enumerate_actions(s, d, P) == brute_force_actions(s, d, P)


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 10_000),
    st.integers(3, 5),
    st.integers(3, 5),
    st.sampled_from([None, 1.5, 2.3]),
    st.booleans(),
)
def test_random_walks_match_brute_force_and_stay_valid(seed, w, h, max_len, passive):
    rng = random.Random(seed)
    regions = (Rect(w - 2, h - 2, w - 1, h - 1),) if passive and w > 3 and h > 3 else ()
    d = grid(w, h, max_element_length=max_len, passive_regions=regions, v_max=rng.choice([None, 12.0]))
    c = TRIANGLE
    balance = len(c.elements) + restraint_count(c, d) - 2 * len(c.nodes)
    for _ in range(6):
        acts = enumerate_actions(c, d, P)
        assert acts == brute_force_actions(c, d, P)
        if not acts:
            break
        a = rng.choice(acts)
        assert is_legal(c, a, d, P)
        c2 = apply_action(c, a)
        assert len(c2.nodes) == len(c.nodes) + 1
        assert len(c2.elements) == len(c.elements) + 2
        assert violations(c2, d) == []
        gained = d.restraint_count(a.node)
        balance2 = len(c2.elements) + restraint_count(c2, d) - 2 * len(c2.nodes)
        assert balance2 == balance + gained
        c, balance = c2, balance2


def test_enumeration_is_deterministic_and_sorted():
    d = grid(5, 5)
    c = TRIANGLE
    rng = random.Random(3)
    for _ in range(4):
        acts = enumerate_actions(c, d, P)
        assert acts == enumerate_actions(c, d, P)
        assert acts == sorted(acts, key=Action.sort_key)
        assert len(set(acts)) == len(acts)
        c = apply_action(c, rng.choice(acts))


def test_action_str_is_readable():
    a = Action((1, 1), make_element((1, 0), (0, 1)), T, (0, 0))
    assert str(a) == "T (1,1) on (1,0)-(0,1) +(0,0)"
