"""Shared fixtures plus the independent oracles used by unit and acceptance tests.

The oracles re-derive results by brute force with their own arithmetic and
data structures; they must stay decoupled from the library's search paths.
"""

from __future__ import annotations

import math

import pytest

from riskweave import cart, tabular
from riskweave.cart import EQUALS, LESS_THAN, Internal, Leaf, Predicate, TrainParams
from riskweave.prng import SplitMix64
from riskweave.tabular import CATEGORICAL, NUMERIC, Dataset, FeatureSpec, Schema, TargetSpec


@pytest.fixture(scope="session")
def chd_synthesis():
    return tabular.synthesize_chd_like(seed=1, n=2279)


@pytest.fixture(scope="session")
def chd_split(chd_synthesis):
    return tabular.split(chd_synthesis.dataset, 0.2, seed=7)


@pytest.fixture(scope="session")
def chd_tree(chd_split):
    train_set, _ = chd_split
    return cart.train(train_set, TrainParams(max_depth=4))


# --- random tabular data -----------------------------------------------------------

_NAMES = ("alpha", "bravo", "charlie", "delta", "echo")


def random_schema(rng: SplitMix64, n_features: int) -> Schema:
    feats = []
    for i in range(n_features):
        if rng.next_below(2) == 0:
            n_levels = 2 + rng.next_below(3)
            levels = tuple(f"lv{i}{chr(97 + j)}" for j in range(n_levels))
            feats.append(FeatureSpec(_NAMES[i], CATEGORICAL, levels=levels))
        else:
            feats.append(FeatureSpec(_NAMES[i], NUMERIC, unit="units"))
    return Schema(tuple(feats), TargetSpec("outcome", ("neg", "pos"), "pos"))


def random_rows(rng: SplitMix64, schema: Schema, n: int, continuous: bool):
    rows = []
    labels = []
    for _ in range(n):
        values = []
        for spec in schema.features:
            if spec.kind == CATEGORICAL:
                values.append(spec.levels[rng.next_below(len(spec.levels))])
            elif continuous:
                values.append(rng.next_double() * 10.0)
            else:
                values.append(float(rng.next_below(12)))
        rows.append(tuple(values))
        labels.append("pos" if rng.next_below(2) else "neg")
    return rows, labels


def random_dataset(rng: SplitMix64, max_rows: int = 200, max_features: int = 5,
                   continuous: bool = False) -> Dataset:
    n_features = 1 + rng.next_below(max_features)
    n = 4 + rng.next_below(max_rows - 3)
    schema = random_schema(rng, n_features)
    rows, labels = random_rows(rng, schema, n, continuous)
    return Dataset(schema, tuple(rows), tuple(labels), provenance="test")


def random_instance(rng: SplitMix64, schema: Schema) -> dict:
    out = {}
    for spec in schema.features:
        if spec.kind == CATEGORICAL:
            out[spec.name] = spec.levels[rng.next_below(len(spec.levels))]
        else:
            out[spec.name] = rng.next_double() * 10.0
    return out


# --- brute-force split oracle --------------------------------------------------------

def oracle_best_split(rows, labels, schema: Schema, params: TrainParams, indices=None):
    """Exhaustive candidate enumeration with the documented tie-break.

    Candidate order: schema feature order, then level (lexicographic) or
    threshold (ascending); strict improvement keeps the earliest candidate.
    Midpoints that collapse onto the lower value are not valid candidates.
    """
    if indices is None:
        indices = range(len(rows))
    idx = list(indices)
    classes = schema.classes
    n = len(idx)

    def counts_of(sub):
        c0 = 0
        for i in sub:
            if labels[i] == classes[0]:
                c0 += 1
        return (c0, len(sub) - c0)

    def impurity(counts):
        total = counts[0] + counts[1]
        acc = 0.0
        for c in counts:
            p = c / total
            acc += p * p
        return 1.0 - acc

    parent_counts = counts_of(idx)
    if n < 2 or parent_counts[0] == 0 or parent_counts[1] == 0:
        return None
    parent_gini = impurity(parent_counts)

    candidates = []
    for f_idx, spec in enumerate(schema.features):
        if spec.kind == CATEGORICAL:
            for level in sorted({rows[i][f_idx] for i in idx}):
                candidates.append((f_idx, Predicate(spec.name, EQUALS, level)))
        else:
            values = sorted({rows[i][f_idx] for i in idx})
            for a, b in zip(values, values[1:]):
                midpoint = (a + b) / 2.0
                if not (a < midpoint):
                    continue
                candidates.append((f_idx, Predicate(spec.name, LESS_THAN, midpoint)))

    best = None
    best_decrease = -1.0
    for f_idx, pred in candidates:
        true_side = [i for i in idx if pred.holds(rows[i][f_idx])]
        false_side = [i for i in idx if not pred.holds(rows[i][f_idx])]
        if len(true_side) < params.min_samples_leaf or len(false_side) < params.min_samples_leaf:
            continue
        decrease = (parent_gini
                    - (len(true_side) / n) * impurity(counts_of(true_side))
                    - (len(false_side) / n) * impurity(counts_of(false_side)))
        if decrease > best_decrease:
            best_decrease = decrease
            best = (pred, decrease)
    if best is None or best_decrease <= 0.0 or best_decrease < params.min_impurity_decrease:
        return None
    return best


# --- random hand-built trees ----------------------------------------------------------

def random_tree(rng: SplitMix64, schema: Schema = None, max_leaves: int = 6):
    if schema is None:
        schema = random_schema(rng, 1 + rng.next_below(4))

    def make_leaf():
        c0 = rng.next_below(40)
        c1 = rng.next_below(40)
        if c0 + c1 == 0:
            c0 = 1
        if c0 == c1:
            label = schema.target.positive
        else:
            label = schema.classes[0] if c0 > c1 else schema.classes[1]
        return Leaf(label=label, counts=(c0, c1), samples=c0 + c1,
                    confidence_p=cart.leaf_confidence((c0, c1)))

    budget = [max_leaves - 1]

    def build(depth):
        if budget[0] <= 0 or depth >= 4 or rng.next_below(100) < 30:
            return make_leaf()
        budget[0] -= 1
        spec = schema.features[rng.next_below(len(schema.features))]
        if spec.kind == CATEGORICAL:
            pred = Predicate(spec.name, EQUALS, spec.levels[rng.next_below(len(spec.levels))])
        else:
            pred = Predicate(spec.name, LESS_THAN, float(1 + rng.next_below(9)))
        left = build(depth + 1)
        right = build(depth + 1)
        return Internal(predicate=pred, if_true=left, if_false=right,
                        samples=left.samples + right.samples)

    root = build(0)
    steps = {f.name: 0.5 for f in schema.features if f.kind == NUMERIC}
    return cart.DecisionTree(
        root=root, schema=schema, train_size=root.samples,
        class_prior=(0.5, 0.5), params=TrainParams(), numeric_steps=steps,
    )


# --- brute-force what-if oracle ---------------------------------------------------------

def _leaf_paths_bf(tree):
    found = []

    def walk(node, path):
        if isinstance(node, Leaf):
            found.append((node, list(path)))
            return
        walk(node.if_true, path + [(node.predicate, True)])
        walk(node.if_false, path + [(node.predicate, False)])

    walk(tree.root, [])
    return found


def oracle_what_if(tree, instance: dict, target_label: str, immutable=frozenset()):
    """Independent leaf enumeration using allowed-set constraint tracking."""
    schema = tree.schema
    values = {f.name: schema.coerce_value(schema.feature(f.name), instance[f.name])
              for f in schema.features}

    best = None
    for dfs_index, (leaf, path) in enumerate(_leaf_paths_bf(tree)):
        if leaf.label != target_label:
            continue
        allowed: dict[str, set] = {}
        bounds: dict[str, list] = {}
        feasible = True
        for pred, taken in path:
            spec = schema.feature(pred.feature)
            if spec.kind == CATEGORICAL:
                current = allowed.setdefault(pred.feature, set(spec.levels))
                if pred.op == EQUALS:
                    if taken:
                        current &= {pred.value}
                    else:
                        current -= {pred.value}
                else:
                    if taken:
                        current -= {pred.value}
                    else:
                        current &= {pred.value}
                allowed[pred.feature] = current
            else:
                lo, hi = bounds.get(pred.feature, (-math.inf, math.inf))
                if pred.op == LESS_THAN:
                    if taken:
                        hi = min(hi, pred.value)
                    else:
                        lo = max(lo, pred.value)
                else:
                    if taken:
                        lo = max(lo, pred.value)
                    else:
                        hi = min(hi, pred.value)
                bounds[pred.feature] = [lo, hi]
        for feat, current in allowed.items():
            if not current:
                feasible = False
        for feat, (lo, hi) in bounds.items():
            if not lo < hi:
                feasible = False
        if not feasible:
            continue

        violated = []
        for f in schema.feature_names:
            if f in allowed and values[f] not in allowed[f]:
                violated.append(f)
            elif f in bounds:
                lo, hi = bounds[f]
                if not (lo <= values[f] < hi):
                    violated.append(f)
        if any(f in immutable for f in violated):
            continue
        key = (len(violated), -leaf.samples, leaf.confidence_p, dfs_index)
        if best is None or key < best[0]:
            best = (key, leaf, allowed, bounds, violated)

    if best is None:
        return None
    _, leaf, allowed, bounds, violated = best
    changes = []
    for f in violated:
        spec = schema.feature(f)
        if spec.kind == CATEGORICAL:
            new = next(level for level in spec.levels if level in allowed[f])
        else:
            lo, hi = bounds[f]
            step = tree.numeric_steps.get(f, 1.0)
            if lo > -math.inf and hi < math.inf:
                mid = lo + (hi - lo) / 2.0
                new = mid if lo <= mid < hi else lo
            elif hi < math.inf:
                new = hi - step
            else:
                new = lo + step
        changes.append((f, values[f], new))
    return (changes, leaf.label, leaf.confidence_p)
