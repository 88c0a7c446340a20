"""One-class first-order rule learning via iterated relational regression trees.

Each tree is a left spine of literal tests: the true branch is grown,
every false branch is a leaf (those paths carry negations and are never
extracted).  The spine is found by beam search minimizing weighted squared
error; the conjunction of spine literals is the extracted rule.  Iterating
with covering-style down-weighting yields a rule set, one rule per tree.

Learning from a single class would make the squared-error criterion
degenerate (all regression targets equal), so each rule set is fit against
a seeded closed-world contrast sample of target tuples outside the class,
carrying regression value 0.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParseError
from .grounding import (
    Clause,
    NEGATIVE_DENSITY,
    POSITIVE,
    POSITIVE_DENSITY,
    TargetExample,
    count_satisfied_groundings,
    sample_negatives,
)
from .kb import Atom, Constant, KnowledgeBase, Variable

log = logging.getLogger(__name__)

_BEST_TOL = 1e-12


@dataclass(frozen=True)
class RelationalTree:
    """Left-spine relational regression tree.

    ``spine[i]`` is the literal test of the internal node at depth i; its
    false branch is the leaf holding ``right_leaf_values[i]``.  The final
    true branch holds ``left_leaf_value``.  A depth-0 tree has an empty
    spine and only the left leaf.
    """

    head: Atom
    spine: tuple[Atom, ...]
    right_leaf_values: tuple[float, ...]
    left_leaf_value: float

    @property
    def depth(self) -> int:
        return len(self.spine)


@dataclass
class RuleSet:
    rules: list[Clause]
    source: str
    trees: list[RelationalTree] = field(default_factory=list)


@dataclass
class DistanceParams:
    """Weights for the tree- and example-level combining functions."""

    lambda_: float = 1.0
    tree_weights: list[float] | None = None
    example_weights: list[float] | None = None

    def __post_init__(self):
        if self.lambda_ <= 0:
            raise DataError("lambda must be > 0")
        for name, w in (("tree", self.tree_weights), ("example", self.example_weights)):
            if w is not None:
                if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
                    raise DataError(f"{name} weights must be a simplex vector")


@dataclass
class LearnConfig:
    num_rules: int = 7
    max_body_length: int = 4
    beam_width: int = 5
    min_examples_per_leaf: int = 2
    covering_discount: float = 0.1
    seed: int = 0
    # Constant-grounded candidate literals are generated for argument
    # positions whose type has at most this many constants; 0 disables them.
    max_constants_for_grounding: int = 50
    # Size of the closed-world contrast sample relative to the class size.
    contrast_ratio: float = 1.0

    def __post_init__(self):
        if self.num_rules < 1 or self.max_body_length < 1 or self.beam_width < 1:
            raise DataError("num_rules, max_body_length, beam_width must be >= 1")
        if self.min_examples_per_leaf < 1:
            raise DataError("min_examples_per_leaf must be >= 1")
        if not (0.0 <= self.covering_discount <= 1.0):
            raise DataError("covering_discount must lie in [0, 1]")


def make_head(kb: KnowledgeBase, predicate: str) -> Atom:
    """Canonical head atom with distinct typed variables, named type1, type2, ..."""
    schema = kb.schema(predicate)
    counters: dict[str, int] = {}
    args = []
    for t in schema.arg_types:
        counters[t] = counters.get(t, 0) + 1
        args.append(Variable(f"{t}{counters[t]}"))
    return Atom(predicate, tuple(args))


def _typed_variables(kb: KnowledgeBase, head: Atom, body: tuple[Atom, ...]) -> dict[str, str]:
    """Variable name -> type, collected from the head and the body literals."""
    out: dict[str, str] = {}
    for atom in (head, *body):
        schema = kb.schema(atom.predicate)
        for pos, a in enumerate(atom.args):
            if isinstance(a, Variable):
                out.setdefault(a.name, schema.arg_types[pos])
    return out


def _fresh_name(type_name: str, used: set[str]) -> str:
    i = 1
    while f"{type_name}{i}" in used:
        i += 1
    return f"{type_name}{i}"


def candidate_literals(
    kb: KnowledgeBase,
    head: Atom,
    body: tuple[Atom, ...],
    max_constants_for_grounding: int = 50,
) -> list[Atom]:
    """Refinement candidates for extending a left spine.

    Every candidate fills each argument slot with an existing clause
    variable of matching type, at most one fresh variable, or a constant
    when the slot's type is small enough; at least one slot must reuse an
    existing variable (connectedness).  The target predicate itself is
    excluded (no recursive clauses).  Sorted for determinism.
    """
    var_types = _typed_variables(kb, head, body)
    used_names = set(var_types)
    by_type: dict[str, list[str]] = {}
    for name, t in var_types.items():
        by_type.setdefault(t, []).append(name)
    for names in by_type.values():
        names.sort()

    existing = set(body)
    out = []
    for pred in sorted(kb.schemas):
        if pred == head.predicate:
            continue
        schema = kb.schemas[pred]
        slot_options: list[list[tuple[str, str]]] = []
        for t in schema.arg_types:
            opts: list[tuple[str, str]] = [("var", v) for v in by_type.get(t, [])]
            opts.append(("fresh", t))
            domain = kb.constants_of_type(t) if t in kb.types() else set()
            if 0 < len(domain) <= max_constants_for_grounding:
                opts.extend(("const", c) for c in sorted(domain))
            slot_options.append(opts)

        def build(pos: int, picked: list[tuple[str, str]], fresh_used: bool):
            if pos == len(slot_options):
                if not any(kind == "var" for kind, _ in picked):
                    return
                args = []
                for (kind, val), t in zip(picked, schema.arg_types):
                    if kind == "var":
                        args.append(Variable(val))
                    elif kind == "fresh":
                        args.append(Variable(_fresh_name(val, used_names)))
                    else:
                        args.append(Constant(val, t))
                atom = Atom(pred, tuple(args))
                if atom not in existing:
                    out.append(atom)
                return
            for kind, val in slot_options[pos]:
                if kind == "fresh":
                    if fresh_used:
                        continue
                    build(pos + 1, picked + [(kind, val)], True)
                else:
                    build(pos + 1, picked + [(kind, val)], fresh_used)

        build(0, [], False)
    out.sort(key=str)
    return out


def _branch_sse(values: np.ndarray, weights: np.ndarray) -> float:
    total = float(weights.sum())
    if total <= 0.0 or len(values) == 0:
        return 0.0
    mean = float(np.dot(weights, values)) / total
    return float(np.dot(weights, (values - mean) ** 2))


def squared_error_score(
    values: np.ndarray, weights: np.ndarray, left_mask: np.ndarray
) -> float:
    """Weighted squared error of a true/false partition: per-branch SSE around
    the branch's weighted mean, summed over both branches.  Lower is better."""
    if len(values) == 0:
        raise DataError("cannot score an empty example set")
    left = np.asarray(left_mask, dtype=bool)
    return _branch_sse(values[left], weights[left]) + _branch_sse(
        values[~left], weights[~left]
    )


def _weighted_mean(values: np.ndarray, weights: np.ndarray) -> float:
    total = float(weights.sum())
    if total <= 0.0 or len(values) == 0:
        return 0.0
    return min(1.0, max(0.0, float(np.dot(weights, values)) / total))


@dataclass
class _SpineState:
    literals: tuple[Atom, ...]
    left: np.ndarray  # bool mask of examples routed left through the whole spine
    acc_right_sse: float
    total_sse: float

    @property
    def sort_key(self):
        return (self.total_sse, tuple(str(a) for a in self.literals))


def learn_tree(
    kb: KnowledgeBase,
    weighted_examples: list[tuple[TargetExample, float, float]],
    config: LearnConfig,
) -> RelationalTree:
    """Grow one left-spine tree by beam search over spine prefixes.

    Each level extends every beam spine with every candidate literal and
    keeps the ``beam_width`` lowest-error spines.  The returned tree is the
    best strict-improvement prefix seen; ties break lexicographically on
    the literal strings, so learning is deterministic.
    """
    if not weighted_examples:
        raise DataError("weighted_examples must be nonempty")
    preds = {ex.atom.predicate for ex, _, _ in weighted_examples}
    if len(preds) != 1:
        raise DataError("all examples must share the target predicate")
    predicate = preds.pop()
    head = make_head(kb, predicate)
    examples = [ex for ex, _, _ in weighted_examples]
    values = np.array([v for _, v, _ in weighted_examples], dtype=float)
    weights = np.array([w for _, _, w in weighted_examples], dtype=float)
    n = len(examples)

    covered_cache: dict[tuple[tuple[str, ...], int], bool] = {}

    def covers(body: tuple[Atom, ...], i: int) -> bool:
        key = (tuple(str(a) for a in body), i)
        hit = covered_cache.get(key)
        if hit is None:
            clause = Clause(head, body)
            hit = count_satisfied_groundings(clause, examples[i], kb, cap=1) > 0
            covered_cache[key] = hit
        return hit

    root = _SpineState(
        literals=(),
        left=np.ones(n, dtype=bool),
        acc_right_sse=0.0,
        total_sse=_branch_sse(values, weights),
    )
    best = root
    beam = [root]
    for _depth in range(config.max_body_length):
        expansions: list[_SpineState] = []
        for state in beam:
            if int(state.left.sum()) < config.min_examples_per_leaf:
                continue
            for lit in candidate_literals(
                kb, head, state.literals, config.max_constants_for_grounding
            ):
                body = state.literals + (lit,)
                new_left = state.left.copy()
                for i in np.flatnonzero(state.left):
                    new_left[i] = covers(body, int(i))
                if int(new_left.sum()) < config.min_examples_per_leaf:
                    continue
                right_group = state.left & ~new_left
                # The spine describes the class density: only accept splits
                # whose covered side is at least as class-dense as the
                # examples it peels off, otherwise the left path would end
                # up characterizing the contrast instead of the class.
                if right_group.any():
                    left_mean = _weighted_mean(values[new_left], weights[new_left])
                    right_mean = _weighted_mean(
                        values[right_group], weights[right_group]
                    )
                    if left_mean < right_mean - _BEST_TOL:
                        continue
                acc_right = state.acc_right_sse + _branch_sse(
                    values[right_group], weights[right_group]
                )
                total = acc_right + _branch_sse(values[new_left], weights[new_left])
                expansions.append(_SpineState(body, new_left, acc_right, total))
        if not expansions:
            break
        expansions.sort(key=lambda s: s.sort_key)
        beam = expansions[: config.beam_width]
        if beam[0].total_sse < best.total_sse - _BEST_TOL:
            best = beam[0]

    # Replay the winning spine to fill in leaf predictions.
    right_leaf_values = []
    left = np.ones(n, dtype=bool)
    for d in range(len(best.literals)):
        body = best.literals[: d + 1]
        new_left = left.copy()
        for i in np.flatnonzero(left):
            new_left[i] = covers(body, int(i))
        right_group = left & ~new_left
        right_leaf_values.append(_weighted_mean(values[right_group], weights[right_group]))
        left = new_left
    left_leaf_value = _weighted_mean(values[left], weights[left])
    return RelationalTree(head, best.literals, tuple(right_leaf_values), left_leaf_value)


def extract_rule(
    tree: RelationalTree, source: str = POSITIVE_DENSITY, iteration: int = 0
) -> Clause:
    """Conjoin the left-spine literals into a clause.

    A depth-0 tree yields an empty-body clause: a constant feature, flagged
    with a warning because it carries no relational signal.
    """
    if not tree.spine:
        log.warning(
            "extracted an empty-body rule (depth-0 tree) for %s; the resulting "
            "feature column is constant",
            tree.head,
        )
    return Clause(tree.head, tree.spine, source=source, iteration=iteration)


# -- tree-based distances -------------------------------------------------


def _route(tree: RelationalTree, example: TargetExample, kb: KnowledgeBase) -> tuple[int, str]:
    """Route an example through the tree.

    At the node of depth d the example goes left iff the accumulated spine
    body up to d has at least one satisfied grounding.  Returns the leaf as
    (depth of its parent spine position, side)."""
    for d in range(len(tree.spine)):
        clause = Clause(tree.head, tree.spine[: d + 1])
        if count_satisfied_groundings(clause, example, kb, cap=1) == 0:
            return (d, "right")
    return (len(tree.spine), "left")


def lca_distance(
    tree: RelationalTree,
    e1: TargetExample,
    e2: TargetExample,
    kb: KnowledgeBase,
    lambda_: float = 1.0,
) -> float:
    """Distance between two examples on one tree: 0 when they reach the same
    leaf, otherwise exp(-lambda * depth of the node where their paths split),
    with depth(root) = 0."""
    if lambda_ <= 0:
        raise DataError("lambda must be > 0")
    r1 = _route(tree, e1, kb)
    r2 = _route(tree, e2, kb)
    if r1 == r2:
        return 0.0
    return float(np.exp(-lambda_ * min(r1[0], r2[0])))


def combined_tree_distance(
    trees: list[RelationalTree],
    beta: list[float],
    e1: TargetExample,
    e2: TargetExample,
    kb: KnowledgeBase,
    lambda_: float = 1.0,
) -> float:
    """Weighted combination of per-tree distances, beta on the simplex."""
    if len(beta) != len(trees):
        raise DataError("tree weight vector length must match the number of trees")
    DistanceParams(lambda_, tree_weights=list(beta))
    return float(
        sum(b * lca_distance(t, e1, e2, kb, lambda_) for b, t in zip(beta, trees))
    )


def one_class_score(
    labeled: list[TargetExample],
    alpha: list[float],
    trees: list[RelationalTree],
    beta: list[float],
    u: TargetExample,
    kb: KnowledgeBase,
    lambda_: float = 1.0,
) -> float:
    """Weighted distance of u to all labeled examples; higher means more
    likely outside the class.  Exposed for diagnostics only."""
    if len(alpha) != len(labeled):
        raise DataError("example weight vector length must match the labeled set")
    DistanceParams(lambda_, example_weights=list(alpha))
    return float(
        sum(
            a * combined_tree_distance(trees, beta, l, u, kb, lambda_)
            for a, l in zip(alpha, labeled)
        )
    )


# -- iterated rule-set learning -------------------------------------------


def learn_ruleset(
    kb: KnowledgeBase,
    examples: list[TargetExample],
    config: LearnConfig,
    k: int | None = None,
    contrast: list[TargetExample] | None = None,
) -> RuleSet:
    """Learn k rules from a one-class example set.

    Class examples start with regression target 1 and unit weight.  Each
    iteration fits a tree, extracts its left-spine rule, then multiplies
    the weight of every covered class example by ``covering_discount`` and
    renormalizes, steering later trees toward uncovered examples.  The
    closed-world ``contrast`` sample (value 0, drawn outside the class when
    not supplied) gives the squared-error criterion something to separate.
    Learning stops early, with a warning, on a duplicate consecutive rule.
    """
    if not examples:
        raise DataError("examples must be nonempty")
    labels = {ex.label for ex in examples}
    if len(labels) != 1:
        raise DataError("learn_ruleset expects a one-class example set")
    label = labels.pop()
    source = POSITIVE_DENSITY if label == POSITIVE else NEGATIVE_DENSITY
    k = config.num_rules if k is None else k
    if k < 1:
        raise DataError("k must be >= 1")

    schema = kb.schema(examples[0].atom.predicate)
    if contrast is None:
        contrast = sample_negatives(
            kb, schema, examples, config.contrast_ratio, config.seed
        )

    n = len(examples)
    weights = np.ones(n, dtype=float)
    rules: list[Clause] = []
    trees: list[RelationalTree] = []
    for it in range(k):
        weighted = [(ex, 1.0, float(w)) for ex, w in zip(examples, weights)] + [
            (ex, 0.0, 1.0) for ex in contrast
        ]
        tree = learn_tree(kb, weighted, config)
        rule = extract_rule(tree, source=source, iteration=it)
        if rules and rule.body == rules[-1].body:
            log.warning(
                "duplicate consecutive rule at iteration %d; stopping early "
                "with %d rules",
                it,
                len(rules),
            )
            break
        rules.append(rule)
        trees.append(tree)
        covered = np.array(
            [
                count_satisfied_groundings(rule, ex, kb, cap=1) > 0
                for ex in examples
            ]
        )
        weights[covered] *= config.covering_discount
        total = float(weights.sum())
        if total > 0:
            weights *= n / total
    return RuleSet(rules, source, trees)


# -- rule file round-trip --------------------------------------------------

_RULE_RE = re.compile(
    r"^\s*(\w+)\s*\(([^()]*)\)\s*:-\s*(.*?)\s*\.\s*"
    r"(?:%\s*source=(\S+)\s+iter=(\d+)\s*)?$"
)
_LIT_RE = re.compile(r"(\w+)\s*\(([^()]*)\)")


def _fmt_term(t) -> str:
    return f'"{t.name}"' if isinstance(t, Constant) else t.name


def _fmt_atom(a: Atom) -> str:
    return f"{a.predicate}({', '.join(_fmt_term(t) for t in a.args)})"


def serialize_rules(rules: list[Clause]) -> str:
    """One rule per line; constants are quoted so the reader can tell them
    from variables without relying on casing."""
    lines = []
    for r in rules:
        body = ", ".join(_fmt_atom(a) for a in r.body) if r.body else "true"
        lines.append(
            f"{_fmt_atom(r.head)} :- {body}. % source={r.source} iter={r.iteration}"
        )
    return "\n".join(lines) + "\n"


def _parse_rule_atom(pred: str, argstr: str, kb: KnowledgeBase, lineno: int) -> Atom:
    schema = kb.schemas.get(pred)
    if schema is None:
        raise ParseError(f"unknown predicate {pred!r} in rule", lineno)
    toks = [t.strip() for t in argstr.split(",") if t.strip()]
    if len(toks) != schema.arity:
        raise ParseError(
            f"arity mismatch for {pred}: got {len(toks)}, expected {schema.arity}",
            lineno,
        )
    args: list = []
    for pos, tok in enumerate(toks):
        if tok.startswith('"') and tok.endswith('"') and len(tok) >= 2:
            args.append(Constant(tok[1:-1], schema.arg_types[pos]))
        else:
            args.append(Variable(tok))
    return Atom(pred, tuple(args))


def parse_rules(text: str, kb: KnowledgeBase) -> list[Clause]:
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        m = _RULE_RE.match(line)
        if m is None:
            raise ParseError(f"malformed rule line: {raw!r}", lineno)
        head_pred, head_args, body_str, source, it = m.groups()
        head = _parse_rule_atom(head_pred, head_args, kb, lineno)
        body: list[Atom] = []
        if body_str.strip() != "true":
            consumed = _LIT_RE.findall(body_str)
            if not consumed:
                raise ParseError(f"malformed rule body: {raw!r}", lineno)
            for pred, argstr in consumed:
                body.append(_parse_rule_atom(pred, argstr, kb, lineno))
        rules.append(
            Clause(
                head,
                tuple(body),
                source=source or POSITIVE_DENSITY,
                iteration=int(it) if it else 0,
            )
        )
    return rules
