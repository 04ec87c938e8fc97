"""Prediction over distance features.

A sample is described by the Algorithm-1 minimum distance between it and
every prototype under every enabled measure. The default row layout
(``full``) concatenates one column per (prototype, measure), ordered by
class id, then cluster rank, then the canonical measure order, so the
classifier sees the sample's similarity to every class at once. The
``class_min`` layout collapses same-class prototypes to their per-measure
minimum.

Two classifier families are provided: a per-class threshold rule (with
open-world rejection) and gradient-boosted regression trees with a softmax
objective. Random-forest and plain decision-tree baselines share the same
interface for comparison runs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .engine import DistanceEngine
from .errors import (
    ConfigError,
    DegenerateLabels,
    InsufficientData,
    LengthMismatch,
    SchemaMismatch,
)
from .prototypes import Prototype
from .trace import UNMONITORED, Trace

LAYOUTS = ("full", "class_min")


@dataclass(frozen=True)
class FeatureColumn:
    class_id: int
    cluster_rank: Optional[int]  # None in the class_min layout
    measure: str


@dataclass(frozen=True)
class FeatureMatrix:
    """Distance feature rows plus the column schema they were built under."""

    values: np.ndarray
    labels: np.ndarray
    sample_ids: tuple[str, ...]
    columns: tuple[FeatureColumn, ...]
    schema_hash: str

    @property
    def classes(self) -> list[int]:
        return sorted({c.class_id for c in self.columns})

    def class_columns(self, class_id: int) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.columns) if c.class_id == class_id])


def _schema_hash(columns: Sequence[FeatureColumn], measures_json: str, layout: str) -> str:
    payload = json.dumps(
        [[c.class_id, c.cluster_rank, c.measure] for c in columns], sort_keys=True
    )
    return hashlib.sha256(f"{layout}|{measures_json}|{payload}".encode()).hexdigest()[:32]


def sort_prototypes(prototypes: Sequence[Prototype]) -> list[Prototype]:
    return sorted(prototypes, key=lambda p: (p.class_id, p.cluster_rank))


def build_feature_matrix(
    samples: Sequence[Trace],
    prototypes: Sequence[Prototype],
    engine: DistanceEngine,
    *,
    layout: str = "full",
    jobs: Optional[int] = None,
    cache_dir=None,
) -> FeatureMatrix:
    """One distance row per sample; column order is stable and documented.

    ``samples`` carry their labels (or UNMONITORED / None). Shuffling sample
    order permutes rows only; the column schema depends solely on the
    prototype bundle, measure list, and layout.
    """
    if layout not in LAYOUTS:
        raise ConfigError(f"unknown feature layout {layout!r}; expected one of {LAYOUTS}")
    protos = sort_prototypes(prototypes)
    if cache_dir is not None:
        dist, _ = engine.compute_matrix_cached(protos, samples, cache_dir, jobs=jobs)
    else:
        dist, _ = engine.compute_matrix(protos, samples, jobs=jobs)

    kinds = engine.measure_kinds
    n_measures = len(kinds)
    if layout == "full":
        values = dist.reshape(len(samples), len(protos) * n_measures)
        columns = tuple(
            FeatureColumn(p.class_id, p.cluster_rank, kind) for p in protos for kind in kinds
        )
    else:
        class_ids = sorted({p.class_id for p in protos})
        values = np.empty((len(samples), len(class_ids) * n_measures))
        columns_list = []
        for ci, cid in enumerate(class_ids):
            members = [i for i, p in enumerate(protos) if p.class_id == cid]
            block = dist[:, members, :].min(axis=1)
            values[:, ci * n_measures : (ci + 1) * n_measures] = block
            columns_list.extend(FeatureColumn(cid, None, kind) for kind in kinds)
        columns = tuple(columns_list)

    labels = np.array(
        [s.label if s.label is not None else UNMONITORED for s in samples], dtype=np.int64
    )
    from .measures import measures_config_json

    return FeatureMatrix(
        values=values,
        labels=labels,
        sample_ids=tuple(s.source_id for s in samples),
        columns=columns,
        schema_hash=_schema_hash(columns, measures_config_json(engine.measures), layout),
    )


def _label_from_scores(scores: dict[int, float]) -> int:
    """Highest score wins; exact ties resolve to the lowest class id."""
    best = max(scores.values())
    return min(c for c, v in scores.items() if v == best)


def _check_row(row, expected: int) -> np.ndarray:
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.size != expected:
        raise LengthMismatch(f"row length {row.size} does not match model ({expected})")
    return row


# ---------------------------------------------------------------------------
# threshold classifier


@dataclass
class ThresholdModel:
    """Per-class, per-measure distance thresholds.

    A sample is a candidate for a class when its min-over-prototypes distance
    is below the class threshold for a strict majority of measures; the
    winning candidate has the smallest mean distance-to-threshold ratio. With
    no candidate the open-world model rejects to UNMONITORED, the
    closed-world model falls back to the nearest class.
    """

    classes: list[int]
    measures: list[str]
    thresholds: np.ndarray  # (classes, measures)
    quantile: float
    open_world: bool
    class_col_idx: dict[int, np.ndarray]
    n_columns: int
    schema_hash: str

    def _class_min(self, row: np.ndarray, class_id: int) -> np.ndarray:
        cols = self.class_col_idx[class_id]
        return row[cols].reshape(-1, len(self.measures)).min(axis=0)

    def predict(self, row) -> tuple[int, dict[int, float]]:
        row = _check_row(row, self.n_columns)
        n_measures = len(self.measures)
        margins: dict[int, float] = {}
        candidates: list[int] = []
        for ci, cid in enumerate(self.classes):
            dmin = self._class_min(row, cid)
            thr = self.thresholds[ci]
            hits = int((dmin <= thr).sum())
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(thr > 0, dmin / np.where(thr > 0, thr, 1.0), np.where(dmin <= 0, 0.0, np.inf))
            margins[cid] = float(ratio.mean())
            if hits * 2 > n_measures:
                candidates.append(cid)
        scores = {c: -margins[c] for c in self.classes}
        if candidates:
            pool = {c: scores[c] for c in candidates}
            return _label_from_scores(pool), scores
        if self.open_world:
            return UNMONITORED, scores
        return _label_from_scores(scores), scores

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": 1,
                "kind": "threshold",
                "classes": self.classes,
                "measures": self.measures,
                "thresholds": self.thresholds.tolist(),
                "quantile": self.quantile,
                "open_world": self.open_world,
                "class_col_idx": {str(c): v.tolist() for c, v in self.class_col_idx.items()},
                "n_columns": self.n_columns,
                "schema_hash": self.schema_hash,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, payload: str) -> "ThresholdModel":
        data = json.loads(payload)
        if data.get("kind") != "threshold":
            raise ConfigError("not a threshold model")
        return cls(
            classes=list(data["classes"]),
            measures=list(data["measures"]),
            thresholds=np.asarray(data["thresholds"], dtype=np.float64),
            quantile=data["quantile"],
            open_world=data["open_world"],
            class_col_idx={
                int(c): np.asarray(v, dtype=np.int64) for c, v in data["class_col_idx"].items()
            },
            n_columns=data["n_columns"],
            schema_hash=data["schema_hash"],
        )


def train_threshold(
    matrix: FeatureMatrix, quantile: float = 0.95, open_world: bool = True
) -> ThresholdModel:
    """Thresholds from own-class training distances only.

    Per class and measure the threshold is the ``quantile`` of the training
    samples' min-over-prototypes distance to their own class.
    """
    if not 0.0 < quantile <= 1.0:
        raise ConfigError(f"quantile must be in (0,1], got {quantile}")
    measures = sorted({c.measure for c in matrix.columns}, key=_measure_sort_key)
    classes = matrix.classes
    n_measures = len(measures)
    class_col_idx = {c: matrix.class_columns(c) for c in classes}

    thresholds = np.zeros((len(classes), n_measures))
    for ci, cid in enumerate(classes):
        rows = matrix.values[matrix.labels == cid]
        if rows.shape[0] < 3:
            raise InsufficientData(
                f"class {cid} has {rows.shape[0]} training rows; need at least 3"
            )
        dmin = rows[:, class_col_idx[cid]].reshape(rows.shape[0], -1, n_measures).min(axis=1)
        thresholds[ci] = np.quantile(dmin, quantile, axis=0)
    return ThresholdModel(
        classes=classes,
        measures=measures,
        thresholds=thresholds,
        quantile=quantile,
        open_world=open_world,
        class_col_idx=class_col_idx,
        n_columns=matrix.values.shape[1],
        schema_hash=matrix.schema_hash,
    )


def _measure_sort_key(kind: str) -> int:
    from .measures import MEASURE_ORDER

    return MEASURE_ORDER.index(kind)


# ---------------------------------------------------------------------------
# regression trees and gradient boosting


def _build_tree(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    rows: np.ndarray,
    depth: int,
    max_depth: int,
    reg_lambda: float,
    out_leaf: np.ndarray,
) -> dict:
    """Exact greedy split search; returns a nested-dict tree.

    Also writes each training row's leaf value into ``out_leaf`` so boosting
    can update scores without re-walking the tree.
    """
    g_sum = grad[rows].sum()
    h_sum = hess[rows].sum()

    def leaf() -> dict:
        value = -g_sum / (h_sum + reg_lambda)
        out_leaf[rows] = value
        return {"leaf": value}

    if depth >= max_depth or rows.size < 2:
        return leaf()

    Xn = X[rows]
    order = np.argsort(Xn, axis=0, kind="stable")
    g_sorted = np.take_along_axis(grad[rows][:, None].repeat(Xn.shape[1], 1), order, axis=0)
    h_sorted = np.take_along_axis(hess[rows][:, None].repeat(Xn.shape[1], 1), order, axis=0)
    x_sorted = np.take_along_axis(Xn, order, axis=0)

    gl = np.cumsum(g_sorted, axis=0)[:-1]
    hl = np.cumsum(h_sorted, axis=0)[:-1]
    gr = g_sum - gl
    hr = h_sum - hl
    gain = gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - g_sum * g_sum / (h_sum + reg_lambda)
    # splits between equal adjacent values are not realizable
    gain[x_sorted[1:] == x_sorted[:-1]] = -np.inf

    best_flat = int(np.argmax(gain))
    best_gain = gain.flat[best_flat] if gain.size else -np.inf
    # argmax over the 2-d gain favors the lowest split position, then feature
    pos, feat = np.unravel_index(best_flat, gain.shape) if gain.size else (0, 0)
    if not np.isfinite(best_gain) or best_gain <= 1e-12:
        return leaf()

    threshold = 0.5 * (x_sorted[pos, feat] + x_sorted[pos + 1, feat])
    mask = Xn[:, feat] <= threshold
    left_rows = rows[mask]
    right_rows = rows[~mask]
    if left_rows.size == 0 or right_rows.size == 0:
        return leaf()
    return {
        "feature": int(feat),
        "threshold": float(threshold),
        "left": _build_tree(X, grad, hess, left_rows, depth + 1, max_depth, reg_lambda, out_leaf),
        "right": _build_tree(X, grad, hess, right_rows, depth + 1, max_depth, reg_lambda, out_leaf),
    }


def _tree_predict(tree: dict, row: np.ndarray) -> float:
    node = tree
    while "leaf" not in node:
        node = node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]
    return node["leaf"]


def _tree_predict_matrix(tree: dict, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        out[i] = _tree_predict(tree, X[i])
    return out


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class GbdtHyperParams:
    n_rounds: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    subsample: float = 1.0
    reg_lambda: float = 1.0

    def __post_init__(self):
        if self.n_rounds < 1 or self.max_depth < 1:
            raise ConfigError("n_rounds and max_depth must be >= 1")
        if not 0.0 < self.subsample <= 1.0:
            raise ConfigError(f"subsample must be in (0,1], got {self.subsample}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(f"learning_rate must be in (0,1], got {self.learning_rate}")


@dataclass
class GbdtModel:
    """One regression-tree sequence per class, combined by softmax."""

    classes: list[int]
    trees: list[list[dict]]  # [round][class index]
    params: GbdtHyperParams
    n_columns: int
    schema_hash: str
    train_loss: list[float] = field(default_factory=list)

    def _raw_scores(self, row: np.ndarray) -> np.ndarray:
        scores = np.zeros(len(self.classes))
        for round_trees in self.trees:
            for ci, tree in enumerate(round_trees):
                scores[ci] += self.params.learning_rate * _tree_predict(tree, row)
        return scores

    def predict(self, row) -> tuple[int, dict[int, float]]:
        row = _check_row(row, self.n_columns)
        scores = self._raw_scores(row)
        probs = _softmax(scores[None, :])[0]
        score_map = {c: float(p) for c, p in zip(self.classes, probs)}
        return _label_from_scores(score_map), score_map

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        scores = np.zeros((X.shape[0], len(self.classes)))
        for round_trees in self.trees:
            for ci, tree in enumerate(round_trees):
                scores[:, ci] += self.params.learning_rate * _tree_predict_matrix(tree, X)
        probs = _softmax(scores)
        idx = probs.argmax(axis=1)
        return np.array([self.classes[i] for i in idx], dtype=np.int64)

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": 1,
                "kind": "gbdt",
                "classes": self.classes,
                "params": {
                    "n_rounds": self.params.n_rounds,
                    "max_depth": self.params.max_depth,
                    "learning_rate": self.params.learning_rate,
                    "subsample": self.params.subsample,
                    "reg_lambda": self.params.reg_lambda,
                },
                "n_columns": self.n_columns,
                "schema_hash": self.schema_hash,
                "train_loss": self.train_loss,
                "trees": self.trees,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, payload: str) -> "GbdtModel":
        data = json.loads(payload)
        if data.get("kind") != "gbdt":
            raise ConfigError("not a gbdt model")
        return cls(
            classes=list(data["classes"]),
            trees=data["trees"],
            params=GbdtHyperParams(**data["params"]),
            n_columns=data["n_columns"],
            schema_hash=data["schema_hash"],
            train_loss=list(data.get("train_loss", [])),
        )


def train_gbdt(
    matrix: FeatureMatrix,
    params: Optional[GbdtHyperParams] = None,
    rng: Optional[np.random.Generator] = None,
) -> GbdtModel:
    """Gradient boosting with a softmax objective.

    Each round fits one tree per class to that class's softmax gradients and
    hessians; split search is exact over sorted feature values. Training is
    deterministic unless row subsampling is enabled.
    """
    params = params or GbdtHyperParams()
    X = matrix.values
    labels = matrix.labels
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise DegenerateLabels(f"need >= 2 classes to train, got {classes}")
    if not np.all(np.isfinite(X)):
        raise ConfigError("feature rows must be finite")
    if params.subsample < 1.0 and rng is None:
        raise ConfigError("subsampling requires an rng")

    n = X.shape[0]
    k = len(classes)
    y = np.zeros((n, k))
    for ci, c in enumerate(classes):
        y[labels == c, ci] = 1.0

    scores = np.zeros((n, k))
    trees: list[list[dict]] = []
    losses: list[float] = []
    all_rows = np.arange(n)
    for _ in range(params.n_rounds):
        probs = _softmax(scores)
        if params.subsample < 1.0:
            take = max(1, int(round(n * params.subsample)))
            rows = np.sort(rng.choice(n, size=take, replace=False))
        else:
            rows = all_rows
        round_trees = []
        for ci in range(k):
            grad = probs[:, ci] - y[:, ci]
            hess = probs[:, ci] * (1.0 - probs[:, ci])
            leaf_vals = np.zeros(n)
            tree = _build_tree(
                X, grad, hess, rows, 0, params.max_depth, params.reg_lambda, leaf_vals
            )
            if params.subsample < 1.0:
                leaf_vals = _tree_predict_matrix(tree, X)
            scores[:, ci] += params.learning_rate * leaf_vals
            round_trees.append(tree)
        trees.append(round_trees)
        probs = _softmax(scores)
        losses.append(float(-np.log(np.maximum(probs[all_rows, labels_to_idx(labels, classes)], 1e-300)).mean()))

    return GbdtModel(
        classes=classes,
        trees=trees,
        params=params,
        n_columns=X.shape[1],
        schema_hash=matrix.schema_hash,
        train_loss=losses,
    )


def labels_to_idx(labels: np.ndarray, classes: list[int]) -> np.ndarray:
    lookup = {c: i for i, c in enumerate(classes)}
    return np.array([lookup[int(l)] for l in labels], dtype=np.int64)


# ---------------------------------------------------------------------------
# gini tree baselines (comparison runs only)


def _gini_tree(
    X: np.ndarray,
    y_idx: np.ndarray,
    k: int,
    rows: np.ndarray,
    depth: int,
    max_depth: Optional[int],
    feature_pool: Optional[int],
    rng: Optional[np.random.Generator],
) -> dict:
    counts = np.bincount(y_idx[rows], minlength=k)

    def leaf() -> dict:
        return {"leaf": int(np.argmax(counts))}

    if rows.size < 2 or counts.max() == rows.size:
        return leaf()
    if max_depth is not None and depth >= max_depth:
        return leaf()

    n_features = X.shape[1]
    if feature_pool is not None and feature_pool < n_features:
        feats = np.sort(rng.choice(n_features, size=feature_pool, replace=False))
    else:
        feats = np.arange(n_features)

    best = (0.0, None, None)  # (gain, feature, threshold)
    total = rows.size
    parent_gini = 1.0 - ((counts / total) ** 2).sum()
    for f in feats:
        xv = X[rows, f]
        order = np.argsort(xv, kind="stable")
        xs = xv[order]
        ys = y_idx[rows][order]
        onehot = np.zeros((total, k))
        onehot[np.arange(total), ys] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]
        nl = np.arange(1, total)
        nr = total - nl
        right = counts - left
        gini_l = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
        gain = parent_gini - (nl * gini_l + nr * gini_r) / total
        gain[xs[1:] == xs[:-1]] = -np.inf
        pos = int(np.argmax(gain))
        if gain[pos] > best[0] + 1e-15:
            best = (float(gain[pos]), int(f), 0.5 * (xs[pos] + xs[pos + 1]))
    if best[1] is None:
        return leaf()
    _, feat, threshold = best
    mask = X[rows, feat] <= threshold
    if not mask.any() or mask.all():
        return leaf()
    return {
        "feature": feat,
        "threshold": float(threshold),
        "left": _gini_tree(X, y_idx, k, rows[mask], depth + 1, max_depth, feature_pool, rng),
        "right": _gini_tree(X, y_idx, k, rows[~mask], depth + 1, max_depth, feature_pool, rng),
    }


@dataclass
class TreeEnsembleModel:
    """Majority vote over gini decision trees (single tree when n=1)."""

    kind: str  # "decision_tree" | "random_forest"
    classes: list[int]
    trees: list[dict]
    n_columns: int
    schema_hash: str

    def predict(self, row) -> tuple[int, dict[int, float]]:
        row = _check_row(row, self.n_columns)
        votes = np.zeros(len(self.classes))
        for tree in self.trees:
            votes[int(_tree_predict(tree, row))] += 1.0
        score_map = {c: float(v) / len(self.trees) for c, v in zip(self.classes, votes)}
        return _label_from_scores(score_map), score_map

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": 1,
                "kind": self.kind,
                "classes": self.classes,
                "trees": self.trees,
                "n_columns": self.n_columns,
                "schema_hash": self.schema_hash,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, payload: str) -> "TreeEnsembleModel":
        data = json.loads(payload)
        if data.get("kind") not in ("decision_tree", "random_forest"):
            raise ConfigError("not a tree ensemble model")
        return cls(
            kind=data["kind"],
            classes=list(data["classes"]),
            trees=data["trees"],
            n_columns=data["n_columns"],
            schema_hash=data["schema_hash"],
        )


def train_decision_tree(matrix: FeatureMatrix, max_depth: Optional[int] = None) -> TreeEnsembleModel:
    classes = sorted(set(matrix.labels.tolist()))
    if len(classes) < 2:
        raise DegenerateLabels("need >= 2 classes")
    y_idx = labels_to_idx(matrix.labels, classes)
    tree = _gini_tree(
        matrix.values, y_idx, len(classes), np.arange(matrix.values.shape[0]), 0, max_depth, None, None
    )
    return TreeEnsembleModel("decision_tree", classes, [tree], matrix.values.shape[1], matrix.schema_hash)


def train_random_forest(
    matrix: FeatureMatrix,
    rng: np.random.Generator,
    n_trees: int = 100,
    max_depth: Optional[int] = None,
) -> TreeEnsembleModel:
    classes = sorted(set(matrix.labels.tolist()))
    if len(classes) < 2:
        raise DegenerateLabels("need >= 2 classes")
    X = matrix.values
    y_idx = labels_to_idx(matrix.labels, classes)
    n = X.shape[0]
    pool = max(1, int(np.sqrt(X.shape[1])))
    trees = []
    for _ in range(n_trees):
        rows = np.sort(rng.integers(0, n, size=n))
        trees.append(_gini_tree(X, y_idx, len(classes), rows, 0, max_depth, pool, rng))
    return TreeEnsembleModel("random_forest", classes, trees, X.shape[1], matrix.schema_hash)


# ---------------------------------------------------------------------------
# unified entry points

ClassifierModel = Union[ThresholdModel, GbdtModel, TreeEnsembleModel]

CLASSIFIER_KINDS = ("threshold", "gbdt", "decision_tree", "random_forest")


def train_classifier(
    kind: str,
    matrix: FeatureMatrix,
    *,
    rng: Optional[np.random.Generator] = None,
    open_world: bool = True,
    quantile: float = 0.95,
    gbdt_params: Optional[GbdtHyperParams] = None,
    n_trees: int = 100,
    max_depth: Optional[int] = None,
) -> ClassifierModel:
    if kind == "threshold":
        return train_threshold(matrix, quantile=quantile, open_world=open_world)
    if kind == "gbdt":
        return train_gbdt(matrix, params=gbdt_params, rng=rng)
    if kind == "decision_tree":
        return train_decision_tree(matrix, max_depth=max_depth)
    if kind == "random_forest":
        if rng is None:
            raise ConfigError("random_forest requires an rng")
        return train_random_forest(matrix, rng, n_trees=n_trees, max_depth=max_depth)
    raise ConfigError(f"unknown classifier kind {kind!r}; expected one of {CLASSIFIER_KINDS}")


def predict(model: ClassifierModel, row, schema_hash: Optional[str] = None) -> tuple[int, dict[int, float]]:
    """Label and per-class scores for one row.

    When ``schema_hash`` is given it must match the schema the model was
    trained under; this guards against applying a model to rows built from a
    different prototype bundle or measure list.
    """
    if schema_hash is not None and schema_hash != model.schema_hash:
        raise SchemaMismatch(
            f"model schema {model.schema_hash} does not match rows schema {schema_hash}"
        )
    return model.predict(row)


def predict_matrix(model: ClassifierModel, matrix: FeatureMatrix) -> np.ndarray:
    if matrix.schema_hash != model.schema_hash:
        raise SchemaMismatch(
            f"model schema {model.schema_hash} does not match rows schema {matrix.schema_hash}"
        )
    if isinstance(model, GbdtModel):
        return model.predict_matrix(matrix.values)
    return np.array([model.predict(row)[0] for row in matrix.values], dtype=np.int64)


def load_model(payload: str) -> ClassifierModel:
    kind = json.loads(payload).get("kind")
    if kind == "threshold":
        return ThresholdModel.from_json(payload)
    if kind == "gbdt":
        return GbdtModel.from_json(payload)
    return TreeEnsembleModel.from_json(payload)
