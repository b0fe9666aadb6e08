"""Axis-aligned binary trees, point routing, and the recursive split prior."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class Node:
    """One tree node. Internal nodes carry (dim, threshold); leaves carry beta.

    Routing convention: values <= threshold go to the left child.
    """

    __slots__ = ("depth", "dim", "threshold", "left", "right", "beta", "leaf_id")

    def __init__(self, depth=0, dim=None, threshold=None, left=None, right=None,
                 beta=0.0, leaf_id=None):
        self.depth = depth
        self.dim = dim
        self.threshold = threshold
        self.left = left
        self.right = right
        self.beta = beta
        self.leaf_id = leaf_id

    @property
    def is_leaf(self) -> bool:
        return self.left is None


class DecisionTree:
    """A binary partition of the sample space with per-leaf log-weights."""

    def __init__(self, root: Node, dim: int):
        self.root = root
        self.dim = dim

    def leaves(self) -> list:
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                # push right first so the left child is popped (and therefore
                # emitted) before it
                stack.append(node.right)
                stack.append(node.left)
        return out

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"point has dimension {x.shape}, tree expects ({self.dim},)")
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.dim] <= node.threshold else node.right
        return node.beta

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"points have {X.shape[1] if X.ndim == 2 else '?'} columns, "
                             f"tree expects {self.dim}")
        out = np.empty(X.shape[0], dtype=np.float64)
        self._assign(self.root, X, np.arange(X.shape[0]), out)
        return out

    def _assign(self, node: Node, X, idx, out) -> None:
        if node.is_leaf:
            out[idx] = node.beta
            return
        go_left = X[idx, node.dim] <= node.threshold
        self._assign(node.left, X, idx[go_left], out)
        self._assign(node.right, X, idx[~go_left], out)

    def leaf_memberships(self, X: np.ndarray) -> list:
        """Row indices of X per leaf, in leaves() order."""
        X = np.asarray(X, dtype=np.float64)
        buckets = []
        self._collect(self.root, X, np.arange(X.shape[0]), buckets)
        return buckets

    def _collect(self, node, X, idx, buckets) -> None:
        if node.is_leaf:
            buckets.append(idx)
            return
        go_left = X[idx, node.dim] <= node.threshold
        self._collect(node.left, X, idx[go_left], buckets)
        self._collect(node.right, X, idx[~go_left], buckets)

    def max_depth(self) -> int:
        return max(leaf.depth for leaf in self.leaves())

    def n_leaves(self) -> int:
        return len(self.leaves())

    def to_dict(self) -> dict:
        return _node_to_dict(self.root)

    @classmethod
    def from_dict(cls, d: dict, dim: int) -> "DecisionTree":
        return cls(_node_from_dict(d, 0), dim)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str, dim: int) -> "DecisionTree":
        return cls.from_dict(json.loads(s), dim)


def _node_to_dict(node: Node) -> dict:
    if node.is_leaf:
        return {"beta": node.beta}
    return {
        "dim": node.dim,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict, depth: int) -> Node:
    if "beta" in d:
        return Node(depth=depth, beta=float(d["beta"]))
    return Node(
        depth=depth,
        dim=int(d["dim"]),
        threshold=float(d["threshold"]),
        left=_node_from_dict(d["left"], depth + 1),
        right=_node_from_dict(d["right"], depth + 1),
    )


@dataclass(frozen=True)
class TreePrior:
    """Recursive-partition prior: node at depth d splits w.p. a_T(1+d)^(-b_T)."""

    a_T: float = 0.95
    b_T: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.a_T < 1.0:
            raise ValueError("a_T must lie in (0, 1)")
        if self.b_T < 0.0:
            raise ValueError("b_T must be >= 0")


def split_probability(prior: TreePrior, depth: int) -> float:
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return prior.a_T * (1.0 + depth) ** (-prior.b_T)


def route_observations(tree: DecisionTree, data) -> list:
    """Partition both samples' row indices by leaf.

    Returns a list of (indices0, indices1) pairs aligned with tree.leaves().
    """
    if data.dim != tree.dim:
        raise ValueError(f"dataset has dimension {data.dim}, tree expects {tree.dim}")
    b0 = tree.leaf_memberships(data.sample0)
    b1 = tree.leaf_memberships(data.sample1)
    return list(zip(b0, b1))


def sample_tree_from_prior(prior: TreePrior, grid, rng: np.random.Generator,
                           max_depth: int | None = None) -> DecisionTree:
    """Draw a tree structure (no betas) from the recursive partition prior."""
    d = grid.dim

    def build(depth):
        cap = max_depth is not None and depth >= max_depth
        if not cap and rng.random() < split_probability(prior, depth):
            dim = int(rng.integers(d))
            j = int(rng.integers(len(grid.cuts[dim])))
            node = Node(depth=depth, dim=dim, threshold=float(grid.cuts[dim][j]))
            node.left = build(depth + 1)
            node.right = build(depth + 1)
            return node
        return Node(depth=depth)

    return DecisionTree(build(0), d)
