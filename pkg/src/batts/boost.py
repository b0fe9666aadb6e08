"""Forward-stagewise and gradient-boosting learners for the balancing loss,
with shrinkage, one-group pruning, and cross-validated tree-count selection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .data import CutGrid, TwoSampleDataset
from .loss import check_log_weights, optimal_leaf_value
from .tree import DecisionTree, Node

_LOSS_SLACK = 1e-12


@dataclass
class BoostConfig:
    algorithm: str = "gb"  # "fs" or "gb"
    max_trees: int = 1000
    max_depth: int = 4
    learning_rate: float = 0.01
    cv_folds: int = 5
    min_leaf_total: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ("fs", "gb"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected 'fs' or 'gb'")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.min_leaf_total < 1:
            raise ValueError("min_leaf_total must be >= 1")


@dataclass
class EnsembleModel:
    """log w(x) = offset + nu * sum_k f_k(x); log r = 2 log w."""

    trees: list
    learning_rate: float
    offset: float
    algorithm: str
    dim: int
    seed: int = 0
    train_loss_path: np.ndarray | None = None

    def log_weight(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} columns")
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.evaluate_many(X)
        return self.offset + self.learning_rate * total

    def save(self, path) -> None:
        doc = {
            "algorithm": self.algorithm,
            "nu": self.learning_rate,
            "offset": self.offset,
            "dim": self.dim,
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path) -> "EnsembleModel":
        with open(path) as fh:
            doc = json.load(fh)
        dim = int(doc["dim"])
        return cls(
            trees=[DecisionTree.from_dict(d, dim) for d in doc["trees"]],
            learning_rate=float(doc["nu"]),
            offset=float(doc["offset"]),
            algorithm=doc["algorithm"],
            dim=dim,
            seed=int(doc.get("seed", 0)),
        )


def predict_log_ratio(model: EnsembleModel, points: np.ndarray) -> np.ndarray:
    """log r(x) = 2 log w(x), one value per row of points."""
    return 2.0 * model.log_weight(points)


class _Grower:
    """Greedy tree construction shared by the FS and GB criteria.

    Candidate splits are scanned per (dimension, cut) with cumulative bin
    sums; children with observations from only one group, or with fewer
    than min_leaf_total pooled observations, are refused.
    """

    def __init__(self, bins0, bins1, n_cuts, cuts, max_depth, min_leaf_total):
        self.bins0 = bins0
        self.bins1 = bins1
        self.n_cuts = n_cuts
        self.cuts = cuts
        self.max_depth = max_depth
        self.min_leaf_total = min_leaf_total

    def grow(self, m0, m1, res0=None, res1=None):
        """Returns (root, contrib0, contrib1) with per-observation leaf betas.

        m0/m1 are the weighted per-observation masses (already 1/n scaled);
        res0/res1, when given, switch the split criterion to the pooled
        residual variance used by gradient boosting.
        """
        self.m0 = m0
        self.m1 = m1
        self.res0 = res0
        self.res1 = res1
        self.contrib0 = np.empty(m0.size)
        self.contrib1 = np.empty(m1.size)
        root = self._split(np.arange(m0.size), np.arange(m1.size), 0)
        return root, self.contrib0, self.contrib1

    def _make_leaf(self, idx0, idx1, depth):
        beta = optimal_leaf_value(self.m0[idx0].sum(), self.m1[idx1].sum())
        self.contrib0[idx0] = beta
        self.contrib1[idx1] = beta
        return Node(depth=depth, beta=beta)

    def _split(self, idx0, idx1, depth):
        if depth >= self.max_depth:
            return self._make_leaf(idx0, idx1, depth)
        best = self._best_split(idx0, idx1)
        if best is None:
            return self._make_leaf(idx0, idx1, depth)
        dim, j = best
        left0 = self.bins0[idx0, dim] <= j
        left1 = self.bins1[idx1, dim] <= j
        node = Node(depth=depth, dim=dim, threshold=float(self.cuts[dim][j]))
        node.left = self._split(idx0[left0], idx1[left1], depth + 1)
        node.right = self._split(idx0[~left0], idx1[~left1], depth + 1)
        return node

    def _best_split(self, idx0, idx1):
        m = self.n_cuts
        best_score = np.inf
        best = None
        c0_tot = idx0.size
        c1_tot = idx1.size
        gb = self.res0 is not None
        if gb:
            r0 = self.res0[idx0]
            r1 = self.res1[idx1]
            r_tot = r0.sum() + r1.sum()
        else:
            p_tot = self.m0[idx0].sum()
            q_tot = self.m1[idx1].sum()
        for dim in range(self.bins0.shape[1]):
            b0 = self.bins0[idx0, dim]
            b1 = self.bins1[idx1, dim]
            lc0 = np.cumsum(np.bincount(b0, minlength=m + 1))[:m]
            lc1 = np.cumsum(np.bincount(b1, minlength=m + 1))[:m]
            rc0 = c0_tot - lc0
            rc1 = c1_tot - lc1
            valid = (
                (lc0 >= 1) & (lc1 >= 1) & (rc0 >= 1) & (rc1 >= 1)
                & (lc0 + lc1 >= self.min_leaf_total)
                & (rc0 + rc1 >= self.min_leaf_total)
            )
            if not valid.any():
                continue
            if gb:
                lsum = (
                    np.cumsum(np.bincount(b0, weights=r0, minlength=m + 1))[:m]
                    + np.cumsum(np.bincount(b1, weights=r1, minlength=m + 1))[:m]
                )
                lcnt = lc0 + lc1
                rcnt = rc0 + rc1
                with np.errstate(divide="ignore", invalid="ignore"):
                    score = -(lsum**2 / lcnt + (r_tot - lsum) ** 2 / rcnt)
            else:
                lp = np.cumsum(np.bincount(b0, weights=self.m0[idx0], minlength=m + 1))[:m]
                lq = np.cumsum(np.bincount(b1, weights=self.m1[idx1], minlength=m + 1))[:m]
                # cumulative cancellation can leave tiny negative right masses
                rp = np.maximum(p_tot - lp, 0.0)
                rq = np.maximum(q_tot - lq, 0.0)
                score = np.sqrt(lp * lq) + np.sqrt(rp * rq)
            score = np.where(valid, score, np.inf)
            j = int(np.argmin(score))
            if score[j] < best_score:
                best_score = score[j]
                best = (dim, j)
        return best


class _FitState:
    """Incrementally maintained log-weights over the training sample."""

    def __init__(self, data: TwoSampleDataset):
        self.logw0 = np.zeros(data.n0)
        self.logw1 = np.zeros(data.n1)
        self.loss = 2.0

    def apply(self, nu, contrib0, contrib1):
        """Shrunken tree update followed by the rebalance correction.

        Returns (log_c, loss_after). The loss after rebalancing equals
        2*sqrt(mean(w^{-1}) * mean(w)).
        """
        self.logw0 += nu * contrib0
        self.logw1 += nu * contrib1
        e0 = np.exp(-self.logw0).mean()
        e1 = np.exp(self.logw1).mean()
        log_c = 0.5 * (np.log(e0) - np.log(e1))
        self.logw0 += log_c
        self.logw1 += log_c
        check_log_weights(self.logw0, self.logw1)
        loss = 2.0 * np.sqrt(e0 * e1)
        prev, self.loss = self.loss, loss
        if loss > prev + _LOSS_SLACK:
            raise AssertionError(
                f"training loss increased: {prev!r} -> {loss!r}"
            )
        return log_c, loss


def _fit_boost(data: TwoSampleDataset, grid: CutGrid, config: BoostConfig,
               n_trees: int, on_iteration=None) -> EnsembleModel:
    grower = _Grower(
        grid.bin_indices(data.sample0),
        grid.bin_indices(data.sample1),
        grid.count_per_dim,
        grid.cuts,
        config.max_depth,
        config.min_leaf_total,
    )
    state = _FitState(data)
    nu = config.learning_rate
    trees = []
    offset = 0.0
    losses = [2.0]
    for _ in range(n_trees):
        m0 = np.exp(-state.logw0) / data.n0
        m1 = np.exp(state.logw1) / data.n1
        if config.algorithm == "gb":
            root, c0, c1 = grower.grow(m0, m1, res0=m0, res1=-m1)
        else:
            root, c0, c1 = grower.grow(m0, m1)
        log_c, loss = state.apply(nu, c0, c1)
        offset += log_c
        losses.append(loss)
        tree = DecisionTree(root, data.dim)
        trees.append(tree)
        if on_iteration is not None:
            on_iteration(tree, log_c)
    return EnsembleModel(
        trees=trees,
        learning_rate=nu,
        offset=offset,
        algorithm=config.algorithm,
        dim=data.dim,
        seed=config.seed,
        train_loss_path=np.asarray(losses),
    )


def fit_forward_stagewise(data: TwoSampleDataset, grid: CutGrid,
                          config: BoostConfig) -> EnsembleModel:
    """Fit config.max_trees trees by greedy affinity minimization."""
    return _fit_boost(data, grid, replace(config, algorithm="fs"), config.max_trees)


def fit_gradient_boost(data: TwoSampleDataset, grid: CutGrid,
                       config: BoostConfig) -> EnsembleModel:
    """Fit config.max_trees trees on the pseudo-residuals, with leaf values
    reset to their closed-form optima."""
    return _fit_boost(data, grid, replace(config, algorithm="gb"), config.max_trees)


def _fold_indices(n: int, folds: int, rng: np.random.Generator) -> list:
    return np.array_split(rng.permutation(n), folds)


def cv_loss_curve(data: TwoSampleDataset, grid: CutGrid,
                  config: BoostConfig) -> np.ndarray:
    """Fold-averaged held-out loss after 0..max_trees trees."""
    if data.n0 < config.cv_folds or data.n1 < config.cv_folds:
        raise ValueError("each group needs at least cv_folds observations")
    rng = np.random.default_rng(config.seed)
    folds0 = _fold_indices(data.n0, config.cv_folds, rng)
    folds1 = _fold_indices(data.n1, config.cv_folds, rng)
    curves = np.zeros((config.cv_folds, config.max_trees + 1))
    for f in range(config.cv_folds):
        ho0 = np.zeros(data.n0, dtype=bool)
        ho0[folds0[f]] = True
        ho1 = np.zeros(data.n1, dtype=bool)
        ho1[folds1[f]] = True
        train = TwoSampleDataset(data.sample0[~ho0], data.sample1[~ho1])
        X0h = data.sample0[ho0]
        X1h = data.sample1[ho1]
        h_logw0 = np.zeros(X0h.shape[0])
        h_logw1 = np.zeros(X1h.shape[0])
        held = [2.0]

        def track(tree, log_c):
            np.add(h_logw0, config.learning_rate * tree.evaluate_many(X0h) + log_c,
                   out=h_logw0)
            np.add(h_logw1, config.learning_rate * tree.evaluate_many(X1h) + log_c,
                   out=h_logw1)
            held.append(np.exp(-h_logw0).mean() + np.exp(h_logw1).mean())

        _fit_boost(train, grid, config, config.max_trees, on_iteration=track)
        curves[f] = held
    return curves.mean(axis=0)


def select_tree_count_cv(data: TwoSampleDataset, grid: CutGrid,
                         config: BoostConfig) -> int:
    """Number of trees minimizing the fold-averaged held-out loss."""
    return int(np.argmin(cv_loss_curve(data, grid, config)))


def fit(data: TwoSampleDataset, grid: CutGrid, config: BoostConfig,
        select: bool = True) -> EnsembleModel:
    """Fit with the configured algorithm; when select is true, choose the
    tree count by cross-validation and refit on the full sample."""
    k = select_tree_count_cv(data, grid, config) if select else config.max_trees
    return _fit_boost(data, grid, config, k)
