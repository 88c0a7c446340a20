"""Rule learning: splitting criterion, tree growth, LCA distances, rule sets."""

import logging

import numpy as np
import pytest

from relgcn.errors import DataError, ParseError
from relgcn.grounding import Clause, POSITIVE_DENSITY, NEGATIVE_DENSITY
from relgcn.kb import Atom, Constant, Variable
from relgcn.rulelearn import (
    DistanceParams,
    LearnConfig,
    RelationalTree,
    candidate_literals,
    combined_tree_distance,
    extract_rule,
    lca_distance,
    learn_ruleset,
    learn_tree,
    make_head,
    one_class_score,
    parse_rules,
    serialize_rules,
    squared_error_score,
)

from conftest import PERSON, example


TOPIC_BODY = (
    Atom("ResearchTopic", (Variable("person1"), Variable("topic1"))),
    Atom("ResearchTopic", (Variable("person2"), Variable("topic1"))),
)


def topic_tree(head):
    return RelationalTree(head, TOPIC_BODY, (0.0, 0.0), 1.0)


def test_learn_config_validation():
    with pytest.raises(DataError):
        LearnConfig(num_rules=0)
    with pytest.raises(DataError):
        LearnConfig(covering_discount=1.5)
    with pytest.raises(DataError):
        LearnConfig(min_examples_per_leaf=0)


def test_distance_params_validation():
    DistanceParams(1.0, tree_weights=[0.25, 0.75])
    with pytest.raises(DataError):
        DistanceParams(0.0)
    with pytest.raises(DataError):
        DistanceParams(1.0, tree_weights=[0.5, 0.6])
    with pytest.raises(DataError):
        DistanceParams(1.0, example_weights=[-0.5, 1.5])


def test_make_head_names_typed_variables(coauthor_kb):
    head = make_head(coauthor_kb, "CoAuthor")
    assert str(head) == "CoAuthor(person1, person2)"


def test_squared_error_score_hand_values():
    values = np.array([1.0, 1.0, 0.0, 0.0])
    weights = np.ones(4)
    perfect = np.array([True, True, False, False])
    mixed = np.array([True, False, True, False])
    assert squared_error_score(values, weights, perfect) == pytest.approx(0.0)
    # Each branch holds {1, 0} around mean 0.5: SSE 0.5 per branch.
    assert squared_error_score(values, weights, mixed) == pytest.approx(1.0)
    with pytest.raises(DataError):
        squared_error_score(np.array([]), np.array([]), np.array([], dtype=bool))


def test_squared_error_score_respects_weights():
    values = np.array([1.0, 0.0])
    left = np.array([True, True])
    heavy = squared_error_score(values, np.array([3.0, 1.0]), left)
    # Weighted mean 0.75: SSE = 3*(0.25)^2 + 1*(0.75)^2 = 0.75.
    assert heavy == pytest.approx(0.75)


def test_candidate_literals_properties(coauthor_kb):
    head = make_head(coauthor_kb, "CoAuthor")
    cands = candidate_literals(coauthor_kb, head, (), max_constants_for_grounding=50)
    assert cands == sorted(cands, key=str)
    assert len(cands) == len(set(map(str, cands)))
    for atom in cands:
        assert atom.predicate != "CoAuthor"
        names = {v.name for v in atom.variables()}
        assert names & {"person1", "person2"}, "connectedness violated"
        fresh = names - {"person1", "person2"}
        assert len(fresh) <= 1
    # Constant-grounded candidates appear for small domains.
    assert any(
        isinstance(a, Constant) for atom in cands for a in atom.args
    )
    bare = candidate_literals(coauthor_kb, head, (), max_constants_for_grounding=0)
    assert all(
        not isinstance(a, Constant) for atom in bare for a in atom.args
    )


def test_candidate_literals_skip_current_body(coauthor_kb):
    head = make_head(coauthor_kb, "CoAuthor")
    body = (Atom("ResearchTopic", (Variable("person1"), Variable("topic1"))),)
    cands = candidate_literals(coauthor_kb, head, body, max_constants_for_grounding=0)
    assert body[0] not in cands


def _weighted(examples, value, weight=1.0):
    return [(ex, value, weight) for ex in examples]


@pytest.fixture
def topic_class_examples():
    classed = [example("ann", "bob"), example("cara", "dan")]
    contrast = [example("ann", "cara"), example("bob", "cara")]
    return classed, contrast


def test_learn_tree_recovers_topic_rule(coauthor_kb, topic_class_examples):
    classed, contrast = topic_class_examples
    weighted = _weighted(classed, 1.0) + _weighted(contrast, 0.0)
    config = LearnConfig(beam_width=5, max_constants_for_grounding=0)
    tree = learn_tree(coauthor_kb, weighted, config)
    rule = extract_rule(tree)
    assert tree.depth == 2
    assert tree.left_leaf_value == pytest.approx(1.0)
    from relgcn.grounding import count_satisfied_groundings

    for ex in classed:
        assert count_satisfied_groundings(rule, ex, coauthor_kb, cap=1) == 1
    for ex in contrast:
        assert count_satisfied_groundings(rule, ex, coauthor_kb, cap=1) == 0


def test_learn_tree_deterministic(coauthor_kb, topic_class_examples):
    classed, contrast = topic_class_examples
    weighted = _weighted(classed, 1.0) + _weighted(contrast, 0.0)
    config = LearnConfig(beam_width=3, max_constants_for_grounding=0)
    t1 = learn_tree(coauthor_kb, weighted, config)
    t2 = learn_tree(coauthor_kb, weighted, config)
    assert [str(a) for a in t1.spine] == [str(a) for a in t2.spine]
    assert t1.right_leaf_values == t2.right_leaf_values


def test_learn_tree_degenerate_targets_gives_depth_zero(coauthor_kb, topic_class_examples):
    """With all regression targets equal there is nothing to split on."""
    classed, contrast = topic_class_examples
    weighted = _weighted(classed + contrast, 1.0)
    config = LearnConfig(max_constants_for_grounding=0)
    tree = learn_tree(coauthor_kb, weighted, config)
    assert tree.depth == 0
    assert tree.left_leaf_value == pytest.approx(1.0)


def test_learn_tree_rejects_bad_inputs(coauthor_kb):
    config = LearnConfig()
    with pytest.raises(DataError):
        learn_tree(coauthor_kb, [], config)


def test_extract_rule_empty_body_warns(coauthor_kb, caplog):
    head = make_head(coauthor_kb, "CoAuthor")
    tree = RelationalTree(head, (), (), 1.0)
    with caplog.at_level(logging.WARNING):
        rule = extract_rule(tree)
    assert rule.body == ()
    assert any("empty-body" in rec.message for rec in caplog.records)


# -- LCA distances ---------------------------------------------------------


def test_lca_distance_leaves_and_depths(coauthor_kb):
    head = make_head(coauthor_kb, "CoAuthor")
    tree = topic_tree(head)
    coauthor_kb.register_constant(PERSON, "eve")  # no facts at all
    ab = example("ann", "bob")
    cd = example("cara", "dan")
    ac = example("ann", "cara")
    ea = example("eve", "ann")
    # Same left leaf.
    assert lca_distance(tree, ab, cd, coauthor_kb) == pytest.approx(0.0)
    # ac fails at the second spine literal: split depth 1.
    assert lca_distance(tree, ab, ac, coauthor_kb) == pytest.approx(np.exp(-1.0))
    # eve has no topic, so the first literal already fails: split depth 0.
    assert lca_distance(tree, ab, ea, coauthor_kb) == pytest.approx(1.0)
    # Both fall off the spine at the same place: same leaf.
    assert lca_distance(tree, ac, example("bob", "cara"), coauthor_kb) == pytest.approx(0.0)
    # Lambda sharpens the decay.
    assert lca_distance(tree, ab, ac, coauthor_kb, lambda_=2.0) == pytest.approx(
        np.exp(-2.0)
    )
    with pytest.raises(DataError):
        lca_distance(tree, ab, ac, coauthor_kb, lambda_=0.0)


def test_combined_tree_distance_simplex(coauthor_kb):
    head = make_head(coauthor_kb, "CoAuthor")
    tree = topic_tree(head)
    ab, ac = example("ann", "bob"), example("ann", "cara")
    single = combined_tree_distance([tree], [1.0], ab, ac, coauthor_kb)
    assert single == pytest.approx(lca_distance(tree, ab, ac, coauthor_kb))
    both = combined_tree_distance([tree, tree], [0.5, 0.5], ab, ac, coauthor_kb)
    assert both == pytest.approx(single)
    with pytest.raises(DataError):
        combined_tree_distance([tree], [0.5, 0.5], ab, ac, coauthor_kb)
    with pytest.raises(DataError):
        combined_tree_distance([tree, tree], [0.9, 0.9], ab, ac, coauthor_kb)


def test_one_class_score_orders_members_first(coauthor_kb):
    head = make_head(coauthor_kb, "CoAuthor")
    tree = topic_tree(head)
    labeled = [example("ann", "bob"), example("cara", "dan")]
    alpha = [0.5, 0.5]
    inside = one_class_score(labeled, alpha, [tree], [1.0], example("ann", "bob"), coauthor_kb)
    outside = one_class_score(labeled, alpha, [tree], [1.0], example("ann", "cara"), coauthor_kb)
    assert inside < outside
    with pytest.raises(DataError):
        one_class_score(labeled, [1.0], [tree], [1.0], example("ann", "bob"), coauthor_kb)


# -- rule-set iteration ----------------------------------------------------


def test_learn_ruleset_stops_on_duplicate(coauthor_kb, topic_class_examples, caplog):
    classed, contrast = topic_class_examples
    config = LearnConfig(max_constants_for_grounding=0)
    with caplog.at_level(logging.WARNING):
        ruleset = learn_ruleset(coauthor_kb, classed, config, k=3, contrast=contrast)
    assert ruleset.source == POSITIVE_DENSITY
    assert 1 <= len(ruleset.rules) <= 3
    if len(ruleset.rules) < 3:
        assert any("duplicate consecutive rule" in rec.message for rec in caplog.records)
    assert len(ruleset.trees) == len(ruleset.rules)
    assert [r.iteration for r in ruleset.rules] == list(range(len(ruleset.rules)))


def test_learn_ruleset_requires_one_class(coauthor_kb, topic_class_examples):
    classed, _ = topic_class_examples
    mixed = [classed[0], example("ann", "cara", label="negative")]
    with pytest.raises(DataError):
        learn_ruleset(coauthor_kb, mixed, LearnConfig())
    with pytest.raises(DataError):
        learn_ruleset(coauthor_kb, [], LearnConfig())
    with pytest.raises(DataError):
        learn_ruleset(coauthor_kb, classed, LearnConfig(), k=0)


def test_learn_ruleset_deterministic(coauthor_kb, topic_class_examples):
    classed, contrast = topic_class_examples
    config = LearnConfig(max_constants_for_grounding=0)
    r1 = learn_ruleset(coauthor_kb, classed, config, k=2, contrast=contrast)
    r2 = learn_ruleset(coauthor_kb, classed, config, k=2, contrast=contrast)
    assert serialize_rules(r1.rules) == serialize_rules(r2.rules)


def test_negative_density_source_label(coauthor_kb):
    negatives = [
        example("ann", "cara", label="negative"),
        example("bob", "cara", label="negative"),
    ]
    contrast = [example("ann", "bob"), example("cara", "dan")]
    ruleset = learn_ruleset(
        coauthor_kb,
        negatives,
        LearnConfig(max_constants_for_grounding=0),
        k=1,
        contrast=contrast,
    )
    assert ruleset.source == NEGATIVE_DENSITY
    assert all(r.source == NEGATIVE_DENSITY for r in ruleset.rules)


# -- rule file round trip --------------------------------------------------


def test_serialize_parse_roundtrip(coauthor_kb):
    head = make_head(coauthor_kb, "CoAuthor")
    rules = [
        Clause(head, TOPIC_BODY, source=POSITIVE_DENSITY, iteration=0),
        Clause(
            head,
            (Atom("Affiliation", (Variable("person1"), Constant("U1", "university"))),),
            source=NEGATIVE_DENSITY,
            iteration=1,
        ),
        Clause(head, (), source=POSITIVE_DENSITY, iteration=2),
    ]
    text = serialize_rules(rules)
    parsed = parse_rules(text, coauthor_kb)
    assert len(parsed) == len(rules)
    for orig, back in zip(rules, parsed):
        assert str(orig) == str(back)
        assert orig.source == back.source
        assert orig.iteration == back.iteration
    # Constants survive with their quoting, distinguishing them from variables.
    assert isinstance(parsed[1].body[0].args[1], Constant)


def test_parse_rules_rejects_garbage(coauthor_kb):
    with pytest.raises(ParseError):
        parse_rules("CoAuthor(person1, person2) :- \n", coauthor_kb)
    with pytest.raises(ParseError):
        parse_rules("Bogus(x) :- true.\n", coauthor_kb)
