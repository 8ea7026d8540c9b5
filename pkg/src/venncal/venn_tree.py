"""Interval-annotated decision trees.

Attaches a Venn-Abers probability interval to every leaf of a fitted tree
(optionally collapsed to a display depth first) and exports the result as
conjunctive rules and as a Graphviz DOT document in which colour encodes
the predicted class, colour intensity the point estimate's distance from
the neutral 0.5, and node width the interval width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from venncal.calibration import VennAbersCalibrator
from venncal.models.tree import DecisionTreeModel

__all__ = [
    "Condition",
    "LeafAnnotation",
    "Rule",
    "VennTree",
    "build_venn_tree",
    "extract_rules",
    "format_rules",
    "render_tree",
]

DEFAULT_CLASS_NAMES = ("No Failure", "Failure")

# visual encoding ranges for the DOT export
_MIN_NODE_WIDTH = 0.75
_MAX_NODE_WIDTH = 3.0
_CLASS_HUES = (0.083, 0.61)  # orange for class 0, blue for class 1


@dataclass(frozen=True)
class LeafAnnotation:
    node: int
    raw_score: float
    p0: float
    p1: float
    point: float
    predicted_class: int
    n_train: int
    n_calibration: int


@dataclass(frozen=True)
class VennTree:
    tree: DecisionTreeModel  # display tree (possibly depth-collapsed)
    leaves: dict[int, LeafAnnotation]
    feature_names: tuple[str, ...]
    class_names: tuple[str, str]

    def annotation_for(self, x) -> LeafAnnotation:
        """Leaf annotation reached by one feature vector."""
        leaf = int(self.tree.apply(np.asarray(x, dtype=np.float64)[None, :])[0])
        return self.leaves[leaf]


def _collapse_to_depth(tree: DecisionTreeModel, max_depth: int) -> DecisionTreeModel:
    """Copy of the tree with every node at max_depth turned into a leaf."""
    feature = []
    threshold = []
    left = []
    right = []
    n_samples = []
    n_positive = []
    # preorder walk; children indices patched as nodes are emitted
    stack = [(0, 0, -1, False)]
    while stack:
        old, depth, parent, is_right = stack.pop()
        new = len(feature)
        keep_split = tree.feature_index[old] >= 0 and depth < max_depth
        feature.append(int(tree.feature_index[old]) if keep_split else -1)
        threshold.append(float(tree.threshold[old]) if keep_split else float("nan"))
        left.append(-1)
        right.append(-1)
        n_samples.append(int(tree.n_samples[old]))
        n_positive.append(int(tree.n_positive[old]))
        if parent >= 0:
            if is_right:
                right[parent] = new
            else:
                left[parent] = new
        if keep_split:
            stack.append((int(tree.right_child[old]), depth + 1, new, True))
            stack.append((int(tree.left_child[old]), depth + 1, new, False))
    return DecisionTreeModel(
        feature_index=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left_child=np.asarray(left, dtype=np.int64),
        right_child=np.asarray(right, dtype=np.int64),
        n_samples=np.asarray(n_samples, dtype=np.int64),
        n_positive=np.asarray(n_positive, dtype=np.int64),
        n_features=tree.n_features,
        max_depth=max_depth,
        min_samples_leaf=tree.min_samples_leaf,
        min_samples_split=tree.min_samples_split,
        seed=tree.seed,
    )


def build_venn_tree(
    tree: DecisionTreeModel,
    calibrator: VennAbersCalibrator,
    display_max_depth: int | None = None,
    feature_names: tuple[str, ...] | None = None,
    class_names: tuple[str, str] = DEFAULT_CLASS_NAMES,
    calibration_features=None,
) -> VennTree:
    """Annotate each (display) leaf with its Venn-Abers interval.

    Collapsed leaves score with the pooled training positive fraction of
    their subtree and are re-calibrated through the same calibrator.  When
    the calibration feature matrix is supplied, per-leaf calibration counts
    are exact (routed); otherwise they fall back to the number of
    calibration scores exactly equal to the leaf score.
    """
    display = tree
    if display_max_depth is not None:
        if display_max_depth < 0:
            raise ValueError("display_max_depth must be >= 0")
        display = _collapse_to_depth(tree, display_max_depth)

    cal_counts: dict[int, int] | None = None
    if calibration_features is not None:
        cal_x = np.asarray(calibration_features, dtype=np.float64)
        if cal_x.ndim != 2 or cal_x.shape[1] != display.n_features:
            raise ValueError(
                f"calibration features have {cal_x.shape} but the tree expects {display.n_features} columns"
            )
        routed = display.apply(cal_x)
        cal_counts = {int(k): int(v) for k, v in zip(*np.unique(routed, return_counts=True))}

    leaves = {}
    for node in range(display.n_nodes):
        if display.feature_index[node] != -1:
            continue
        raw = display.leaf_score(node)
        interval = calibrator.interval(raw)
        if cal_counts is not None:
            n_cal = cal_counts.get(node, 0)
        else:
            n_cal = int(np.sum(calibrator.calibration_scores == raw))
        leaves[node] = LeafAnnotation(
            node=node,
            raw_score=raw,
            p0=interval.p0,
            p1=interval.p1,
            point=interval.point,
            predicted_class=1 if interval.point >= 0.5 else 0,
            n_train=int(display.n_samples[node]),
            n_calibration=n_cal,
        )
    if feature_names is None:
        feature_names = tuple(f"feature {i}" for i in range(display.n_features))
    if len(feature_names) != display.n_features:
        raise ValueError("one feature name per feature column required")
    return VennTree(
        tree=display,
        leaves=leaves,
        feature_names=tuple(feature_names),
        class_names=class_names,
    )


# ---------------------------------------------------------------------------
# rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    feature_index: int
    feature_name: str
    comparator: str  # "<=" or ">"
    threshold: float

    def holds(self, x) -> bool:
        value = x[self.feature_index]
        return value <= self.threshold if self.comparator == "<=" else value > self.threshold


@dataclass(frozen=True)
class Rule:
    conditions: tuple[Condition, ...]
    conclusion: str
    p0: float
    p1: float
    point: float
    leaf: int

    def matches(self, x) -> bool:
        return all(condition.holds(x) for condition in self.conditions)


def _merged(conditions: list[Condition]) -> tuple[Condition, ...]:
    """Per-feature bound merging, keeping the tightest bound in path order."""
    out: list[Condition] = []
    slot: dict[tuple[int, str], int] = {}
    for cond in conditions:
        key = (cond.feature_index, cond.comparator)
        if key not in slot:
            slot[key] = len(out)
            out.append(cond)
            continue
        i = slot[key]
        tighter = (
            cond.threshold < out[i].threshold
            if cond.comparator == "<="
            else cond.threshold > out[i].threshold
        )
        if tighter:
            out[i] = cond
    return tuple(out)


def extract_rules(vt: VennTree) -> list[Rule]:
    """One conjunctive rule per leaf, in leaf-index order."""
    tree = vt.tree
    rules = []
    stack: list[tuple[int, list[Condition]]] = [(0, [])]
    collected: dict[int, tuple[Condition, ...]] = {}
    while stack:
        node, path = stack.pop()
        if tree.feature_index[node] == -1:
            collected[node] = _merged(path)
            continue
        f = int(tree.feature_index[node])
        t = float(tree.threshold[node])
        name = vt.feature_names[f]
        stack.append((int(tree.right_child[node]), path + [Condition(f, name, ">", t)]))
        stack.append((int(tree.left_child[node]), path + [Condition(f, name, "<=", t)]))
    for node in sorted(collected):
        ann = vt.leaves[node]
        rules.append(
            Rule(
                conditions=collected[node],
                conclusion=vt.class_names[ann.predicted_class],
                p0=ann.p0,
                p1=ann.p1,
                point=ann.point,
                leaf=node,
            )
        )
    return rules


def format_rules(rules: list[Rule]) -> str:
    """Plain-text rule listing, one block per rule."""
    blocks = []
    for i, rule in enumerate(rules, start=1):
        lines = []
        for j, cond in enumerate(rule.conditions):
            prefix = f"{i})" if j == 0 else "  &"
            lines.append(f"{prefix} {cond.feature_name} {cond.comparator} {cond.threshold:g}")
        if not rule.conditions:
            lines.append(f"{i}) (always)")
        lines.append(f"  → {rule.conclusion} [{rule.p0:.2f}, {rule.p1:.2f}]")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------------------
# DOT rendering
# ---------------------------------------------------------------------------

def _leaf_attributes(ann: LeafAnnotation, class_names: tuple[str, str]) -> str:
    hue = _CLASS_HUES[ann.predicted_class]
    saturation = min(1.0, abs(ann.point - 0.5) * 2.0)
    width = _MIN_NODE_WIDTH + (ann.p1 - ann.p0) * (_MAX_NODE_WIDTH - _MIN_NODE_WIDTH)
    label = (
        f"{class_names[ann.predicted_class]}\\n"
        f"[{ann.p0:.2f}, {ann.p1:.2f}]\\np = {ann.point:.2f}"
    )
    return (
        f'label="{label}", shape=box, style="filled,rounded", '
        f'fillcolor="{hue:.3f} {saturation:.3f} 1.000", '
        f"width={width:.3f}, fixedsize=false"
    )


def render_tree(vt: VennTree) -> str:
    """Graphviz DOT document for the annotated tree.

    Left edges mean the split condition holds.  Leaf fill hue encodes the
    predicted class, saturation the distance of the point estimate from
    0.5, and box width the interval width.
    """
    tree = vt.tree
    lines = ["digraph venn_tree {", "  graph [ordering=out];", "  node [fontname=Helvetica];"]
    for node in range(tree.n_nodes):
        if tree.feature_index[node] == -1:
            lines.append(f"  n{node} [{_leaf_attributes(vt.leaves[node], vt.class_names)}];")
        else:
            name = vt.feature_names[int(tree.feature_index[node])]
            label = f"{name} ≤ {float(tree.threshold[node]):g}"
            lines.append(f'  n{node} [label="{label}", shape=box];')
    for node in range(tree.n_nodes):
        if tree.feature_index[node] != -1:
            lines.append(f'  n{node} -> n{int(tree.left_child[node])} [label="yes"];')
            lines.append(f'  n{node} -> n{int(tree.right_child[node])} [label="no"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
