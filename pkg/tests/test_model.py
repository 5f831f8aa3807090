import json

import numpy as np
import pytest
from hypothesis import given

from clusterdyn.generators import (belt_leg, nested_loop_tree, four_bar, gear_pair, generate_constrained_branches,
                                   generate_mechanism_chain, pendulum, random_model)
from clusterdyn.joints import LinearTransmission
from clusterdyn.model import ModelError, build_cluster_tree, build_spanning_tree, load_model, validate_model

from conftest import seeds


def body(name, parent, mass=1.0, axis=(0, 0, 1)):
    return {"name": name, "parent": parent, "joint": {"type": "revolute", "axis": list(axis)},
            "inertia": {"mass": mass, "com": [0.1, 0, 0], "I_3x3": np.diag([0.1, 0.2, 0.3]).tolist()}}


def gear_doc(eta=9.0):
    return {"bodies": [body("L", 0), body("R", 0)],
            "loop_constraints": [{"kind": "linear_transmission", "bodies": ["L", "R"],
                                  "G": [[1.0], [eta]], "independent": ["L"]}]}


def test_gear_document_gives_one_cluster():
    m = load_model(json.dumps(gear_doc()))
    assert len(m.clusters) == 1 and m.clusters[0].bodies == (1, 2)
    assert m.clusters[0].independent == (1,)
    assert validate_model(m) == []


def test_pendulum_is_singleton():
    m = pendulum()
    assert [c.bodies for c in m.clusters] == [(1,)]
    assert validate_model(m) == []


def test_numbering_violation():
    doc = {"bodies": [body("a", 2), body("b", 0)]}
    with pytest.raises(ModelError, match="numbering violation"):
        load_model(doc)
    with pytest.raises(ModelError, match="numbering violation"):
        build_spanning_tree([0, 3, 1])


def test_parse_error_and_unknown_bodies():
    with pytest.raises(ModelError, match="parse error"):
        load_model("{not json")
    doc = gear_doc()
    doc["loop_constraints"][0]["bodies"] = ["L", "Q"]
    with pytest.raises(ModelError, match="unknown body"):
        load_model(doc)


def test_overconstrained_cluster_rejected():
    doc = gear_doc()
    doc["loop_constraints"][0]["independent"] = []
    doc["loop_constraints"][0]["G"] = [[], []]
    with pytest.raises(ModelError):
        load_model(doc)


def test_spanning_tree_sets():
    t = build_spanning_tree([0, 1, 2])
    assert t.support[3] == {1, 2, 3}
    assert t.children[3] == []
    assert t.children[0] == [1]
    with pytest.raises(ModelError):
        build_spanning_tree([0, 5])


def test_nested_loop_grouping():
    m = nested_loop_tree()
    assert {2, 3} <= set(m.tree.children[1])
    groups = [c.bodies for c in m.clusters]
    assert (1,) in groups
    assert (2, 3, 6, 7) in groups
    assert (4, 5, 8) in groups
    assert (15, 16) in groups
    assert sorted(b for g in groups for b in g) == list(range(1, 17))
    assert validate_model(m) == []


def test_no_loops_gives_singletons():
    t = build_spanning_tree([0, 1, 1, 2, 0])
    cl = build_cluster_tree(t, [])
    assert [c.bodies for c in cl] == [(i,) for i in range(1, 6)]
    assert [c.output for c in cl] == t.parent[1:]


@given(seeds)
def test_union_find_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    parents = [0] * n  # all bodies on the base: no path pull-in needed
    loops = []
    for _ in range(int(rng.integers(1, 4))):
        a, b = sorted(rng.choice(np.arange(1, n + 1), 2, replace=False))
        loops.append(LinearTransmission([int(a), int(b)], [[1.0], [2.0]], [int(a)]))
    tree = build_spanning_tree(parents)
    try:
        got = {c.bodies for c in build_cluster_tree(tree, loops)}
    except ModelError:
        return  # two constraints sharing a dependent coordinate
    sets = [set(l.involved) for l in loops] + [{i} for i in range(1, n + 1)]
    merged = True
    while merged:
        merged = False
        for i in range(len(sets)):
            for j in range(i + 1, len(sets)):
                if sets[i] & sets[j]:
                    sets[i] |= sets.pop(j)
                    merged = True
                    break
            if merged:
                break
    assert got == {tuple(sorted(s)) for s in sets}


def test_multi_output_cluster_rejected_without_pull_in():
    doc = {"bodies": [body("a", 0), body("b", 1), body("c", 0), body("d", 3)],
           "loop_constraints": [{"kind": "linear_transmission", "bodies": ["b", "d"],
                                 "G": [[1.0], [2.0]], "independent": ["b"]}]}
    with pytest.raises(ModelError, match="unsupported topology"):
        load_model(doc, pull_in=False)
    m = load_model(doc)
    assert [c.bodies for c in m.clusters] == [(1, 2, 3, 4)]


def test_zero_mass_flagged():
    doc = gear_doc()
    doc["bodies"][1]["inertia"] = {"mass": 0.0, "com": [0, 0, 0], "I_3x3": np.zeros((3, 3)).tolist()}
    diags = validate_model(load_model(doc))
    assert any("inertia not PD" in d.message for d in diags)


def test_fourbar_dimension_count():
    m = four_bar()
    c = next(c for c in m.clusters if c.constraints)
    assert c.n_f == 3 and c.n_l == 2 and c.m == 1
    assert validate_model(m) == []


def test_generator_counts():
    m = generate_mechanism_chain("link-rotor", 3, 2)
    assert m.n == 12 and len(m.clusters) == 6
    m = generate_mechanism_chain("four-bar", 1, 1)
    assert m.n == 3 and [c.n_f for c in m.clusters] == [3]
    for mech, (nb, nr) in {"link-rotor": (2, 1), "belt": (4, 2), "four-bar": (3, 2)}.items():
        m = generate_mechanism_chain(mech, 2, 3)
        assert m.n == nb * 6
        assert sum(c.n_l for c in m.clusters) == nr * 6
        assert validate_model(m) == []
    m = generate_constrained_branches("connecting-rod", 5, 3)
    assert m.n == 11 and max(c.n_f for c in m.clusters) == 7
    m = generate_constrained_branches("transmission", 5, 1)
    assert max(c.n_f for c in m.clusters) == 2
    assert validate_model(generate_constrained_branches("connecting-rod", 6, 4)) == []


@given(seeds)
def test_random_models_validate(seed):
    m = random_model(np.random.default_rng(seed))
    assert validate_model(m) == []
    assert sorted(b for c in m.clusters for b in c.bodies) == list(range(1, m.n + 1))
    for c in m.clusters:
        assert len({m.parent[b] for b in c.bases}) == 1


def test_json_roundtrip():
    for m in (gear_pair(), belt_leg(), four_bar()):
        m2 = load_model(m.to_json())
        assert [c.bodies for c in m2.clusters] == [c.bodies for c in m.clusters]
        assert all(np.allclose(a, b) for a, b in zip(m.I6[1:], m2.I6[1:]))
