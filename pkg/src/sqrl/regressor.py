"""MLP regressors over difference or absolute representations, plus KNN.

Two training objectives share one deterministic trainer: the relative
objective (mean squared error of f(g(x_i) - g(x_j)) against the label
difference) and the standard absolute objective (f(g(x)) against y).
Inference for relative models anchors on nearest training neighbors:
the prediction is the mean over anchors of y_anchor + f(g(x_anchor) -
g(x_new)).

Everything is plain float64 numpy: uniform fan-in init, ReLU hidden layers,
linear scalar output, Adam (0.9/0.999/1e-8), inverted dropout, early
stopping on validation loss with best-weights restore. A fixed seed fixes
initialization, shuffling, dropout masks, and the validation split, so runs
are bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .distance import DistanceMetric, nearest_neighbors
from .features import Featurizer
from .pairing import RelativePairSet

__all__ = [
    "MlpConfig",
    "RegressorModel",
    "KnnBaseline",
    "TrainingDivergedError",
    "standard_mlp_config",
    "sqrl_mlp_config",
    "init_weights",
    "forward",
    "loss_and_grads",
    "train_sqrl",
    "train_standard",
    "predict_standard",
    "predict_anchored",
    "knn_predict",
    "save_model",
    "load_model",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PAIR_MODES = ("diff", "diff_concat")


class TrainingDivergedError(RuntimeError):
    """Loss or weights became non-finite during optimization."""


@dataclass(frozen=True)
class MlpConfig:
    hidden_sizes: tuple[int, ...] = (256, 256)
    dropout: float = 0.0
    learning_rate: float = 1e-4
    batch_size: int = 128
    max_epochs: int = 500
    patience: int = 30
    seed: int = 0
    standardize: bool = False
    pair_mode: str = "diff"
    max_pairs_per_epoch: int | None = None

    def __post_init__(self):
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ValueError("need at least one positive hidden layer size")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")
        if self.pair_mode not in PAIR_MODES:
            raise ValueError(f"pair_mode must be one of {PAIR_MODES}")
        if self.max_pairs_per_epoch is not None and self.max_pairs_per_epoch < 1:
            raise ValueError("max_pairs_per_epoch must be positive when set")


def standard_mlp_config(seed: int = 0, **overrides) -> MlpConfig:
    """Defaults for the absolute objective: [256, 256], no dropout, 1e-4, 128."""
    cfg = MlpConfig(
        hidden_sizes=(256, 256),
        dropout=0.0,
        learning_rate=1e-4,
        batch_size=128,
        seed=seed,
    )
    return replace(cfg, **overrides) if overrides else cfg


def sqrl_mlp_config(seed: int = 0, **overrides) -> MlpConfig:
    """Defaults for the relative objective: [512, 256], 0.2 dropout, 1e-5, 64."""
    cfg = MlpConfig(
        hidden_sizes=(512, 256),
        dropout=0.2,
        learning_rate=1e-5,
        batch_size=64,
        seed=seed,
    )
    return replace(cfg, **overrides) if overrides else cfg


# -- MLP core ------------------------------------------------------------------


def layer_dims(input_dim: int, hidden_sizes) -> list[int]:
    return [input_dim, *hidden_sizes, 1]


def init_weights(input_dim: int, hidden_sizes, rng: np.random.Generator):
    """Uniform fan-in initialization, biases at zero."""
    dims = layer_dims(input_dim, hidden_sizes)
    weights = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-scale, scale, size=(fan_in, fan_out))
        weights.append((w, np.zeros(fan_out)))
    return weights


def forward(weights, x: np.ndarray) -> np.ndarray:
    """Inference pass (dropout off); returns one scalar per input row."""
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    for w, b in weights[:-1]:
        a = np.maximum(a @ w + b, 0.0)
    w, b = weights[-1]
    return (a @ w + b).ravel()


def loss_and_grads(weights, x, y, dropout: float = 0.0, rng=None):
    """MSE loss and its analytic gradients for one batch.

    Dropout masks (inverted dropout on hidden activations) come from ``rng``
    and are part of training only; pass ``dropout=0`` for exact gradients.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    batch = x.shape[0]

    activations = [x]
    pre_acts = []
    masks = []
    a = x
    for w, b in weights[:-1]:
        z = a @ w + b
        a = np.maximum(z, 0.0)
        if dropout > 0.0:
            mask = (rng.random(a.shape) >= dropout) / (1.0 - dropout)
            a = a * mask
            masks.append(mask)
        else:
            masks.append(None)
        pre_acts.append(z)
        activations.append(a)
    w_out, b_out = weights[-1]
    pred = (a @ w_out + b_out).ravel()

    err = pred - y
    loss = float(np.mean(err * err))

    delta = (2.0 / batch) * err[:, None]
    grads = [None] * len(weights)
    grads[-1] = (activations[-1].T @ delta, delta.sum(axis=0))
    back = delta @ w_out.T
    for k in range(len(weights) - 2, -1, -1):
        if masks[k] is not None:
            back = back * masks[k]
        back = back * (pre_acts[k] > 0.0)
        grads[k] = (activations[k].T @ back, back.sum(axis=0))
        if k > 0:
            back = back @ weights[k][0].T
    return loss, grads


@dataclass(eq=False)
class RegressorModel:
    """Trained weights plus the featurizer binding and training provenance."""

    weights: list
    config: MlpConfig
    mode: str  # "standard" or "sqrl"
    input_dim: int
    featurizer: Featurizer | None = None
    standardizer: tuple[np.ndarray, np.ndarray] | None = None
    training_log: tuple[dict, ...] = field(default_factory=tuple)

    def feature_vector(self, record_or_vector) -> np.ndarray:
        if isinstance(record_or_vector, np.ndarray):
            vec = record_or_vector.astype(np.float64)
        else:
            if self.featurizer is None:
                raise ValueError("model has no featurizer; pass a vector")
            vec = self.featurizer.vector(record_or_vector)
        if self.standardizer is not None:
            mean, std = self.standardizer
            vec = (vec - mean) / std
        return vec

    def pair_input(self, g_i: np.ndarray, g_new: np.ndarray) -> np.ndarray:
        diff = g_i - g_new
        if self.config.pair_mode == "diff_concat":
            return np.concatenate([diff, g_i, g_new])
        return diff

    def predict_raw(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.input_dim:
            raise ValueError(
                f"input dimension {x.shape[1]} does not match model "
                f"dimension {self.input_dim}"
            )
        return forward(self.weights, x)


def _fit_standardizer(features: np.ndarray):
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return mean, std


def _adam_init(weights):
    return [
        ((np.zeros_like(w), np.zeros_like(b)), (np.zeros_like(w), np.zeros_like(b)))
        for w, b in weights
    ]


def _adam_step(weights, grads, state, step, learning_rate):
    b1t = 1.0 - ADAM_BETA1**step
    b2t = 1.0 - ADAM_BETA2**step
    new_weights = []
    for (w, b), (gw, gb), ((mw, mb), (vw, vb)) in zip(weights, grads, state):
        mw *= ADAM_BETA1
        mw += (1 - ADAM_BETA1) * gw
        vw *= ADAM_BETA2
        vw += (1 - ADAM_BETA2) * gw * gw
        mb *= ADAM_BETA1
        mb += (1 - ADAM_BETA1) * gb
        vb *= ADAM_BETA2
        vb += (1 - ADAM_BETA2) * gb * gb
        w = w - learning_rate * (mw / b1t) / (np.sqrt(vw / b2t) + ADAM_EPS)
        b = b - learning_rate * (mb / b1t) / (np.sqrt(vb / b2t) + ADAM_EPS)
        new_weights.append((w, b))
    return new_weights


def _mse(weights, x, y) -> float:
    err = forward(weights, x) - np.asarray(y, dtype=np.float64).ravel()
    return float(np.mean(err * err))


def _train(build_batch, n_train, eval_val, cfg: MlpConfig, input_dim: int):
    """Mini-batch Adam with early stopping; returns (weights, log).

    ``build_batch(indices)`` materializes a training batch; ``eval_val()``
    returns the validation loss or None when no validation split exists, in
    which case the training loss drives early stopping.
    """
    rng = np.random.default_rng(cfg.seed)
    weights = init_weights(input_dim, cfg.hidden_sizes, rng)
    state = _adam_init(weights)
    step = 0

    best_criterion = np.inf
    best_weights = [(w.copy(), b.copy()) for w, b in weights]
    stale = 0
    log = []

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n_train)
        if cfg.max_pairs_per_epoch is not None:
            order = order[: cfg.max_pairs_per_epoch]
        sq_sum = 0.0
        seen = 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            x, y = build_batch(idx)
            loss, grads = loss_and_grads(weights, x, y, cfg.dropout, rng)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, step {step}"
                )
            step += 1
            weights = _adam_step(weights, grads, state, step, cfg.learning_rate)
            sq_sum += loss * len(idx)
            seen += len(idx)
        train_loss = sq_sum / max(seen, 1)
        val_loss = eval_val(weights)
        criterion = train_loss if val_loss is None else val_loss
        if not np.isfinite(criterion) or not all(
            np.all(np.isfinite(w)) and np.all(np.isfinite(b)) for w, b in weights
        ):
            raise TrainingDivergedError(f"non-finite state at epoch {epoch}")
        log.append(
            {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss}
        )
        if criterion < best_criterion:
            best_criterion = criterion
            best_weights = [(w.copy(), b.copy()) for w, b in weights]
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best_weights, tuple(log)


def train_standard(
    features: np.ndarray,
    labels,
    cfg: MlpConfig,
    val_fraction: float = 0.1,
    featurizer: Featurizer | None = None,
) -> RegressorModel:
    """Fit the absolute objective: MSE of f(g(x)) against y."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if features.ndim != 2 or len(features) != len(labels) or not len(labels):
        raise ValueError("features must be (n, d) matching labels")
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError("val_fraction must be in [0, 1)")

    standardizer = _fit_standardizer(features) if cfg.standardize else None
    if standardizer is not None:
        features = (features - standardizer[0]) / standardizer[1]

    split_rng = np.random.default_rng(cfg.seed + 1)
    order = split_rng.permutation(len(labels))
    n_val = int(round(val_fraction * len(labels)))
    val_idx = order[:n_val]
    train_idx = order[n_val:]
    if not len(train_idx):
        raise ValueError("validation split leaves no training rows")

    x_val, y_val = features[val_idx], labels[val_idx]

    def build_batch(idx):
        rows = train_idx[idx]
        return features[rows], labels[rows]

    def eval_val(weights):
        if not len(val_idx):
            return None
        return _mse(weights, x_val, y_val)

    weights, log = _train(
        build_batch, len(train_idx), eval_val, cfg, features.shape[1]
    )
    return RegressorModel(
        weights=weights,
        config=cfg,
        mode="standard",
        input_dim=features.shape[1],
        featurizer=featurizer,
        standardizer=standardizer,
        training_log=log,
    )


def train_sqrl(
    pairs: RelativePairSet,
    features: np.ndarray,
    cfg: MlpConfig,
    val_fraction: float = 0.1,
    featurizer: Featurizer | None = None,
) -> RegressorModel:
    """Fit the relative objective on a thresholded pair set.

    ``features`` holds one g(x) row per source molecule, indexed like the
    pair records. The validation split is molecule-level: pairs follow their
    anchor molecule i, so no anchor appears on both sides.
    """
    if pairs.empty:
        raise ValueError("pair set is empty; lower alpha produced no training data")
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < pairs.source_size:
        raise ValueError("features must cover every source molecule")
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError("val_fraction must be in [0, 1)")

    standardizer = _fit_standardizer(features) if cfg.standardize else None
    if standardizer is not None:
        features = (features - standardizer[0]) / standardizer[1]

    ii, jj, dy = pairs.index_arrays()

    anchors = np.unique(ii)
    split_rng = np.random.default_rng(cfg.seed + 1)
    shuffled = split_rng.permutation(anchors)
    target_val = val_fraction * len(ii)
    val_anchors: set[int] = set()
    if target_val > 0:
        counts = {int(a): int(np.sum(ii == a)) for a in anchors}
        covered = 0
        for anchor in shuffled:
            if covered >= target_val or len(val_anchors) == len(anchors) - 1:
                break
            val_anchors.add(int(anchor))
            covered += counts[int(anchor)]
    val_mask = np.isin(ii, sorted(val_anchors))
    train_rows = np.where(~val_mask)[0]
    val_rows = np.where(val_mask)[0]
    if not len(train_rows):
        raise ValueError("validation split leaves no training pairs")

    concat = cfg.pair_mode == "diff_concat"

    def pair_inputs(rows):
        gi = features[ii[rows]]
        gj = features[jj[rows]]
        diff = gi - gj
        if concat:
            return np.hstack([diff, gi, gj])
        return diff

    input_dim = features.shape[1] * (3 if concat else 1)
    x_val = pair_inputs(val_rows) if len(val_rows) else None
    y_val = dy[val_rows] if len(val_rows) else None

    def build_batch(idx):
        rows = train_rows[idx]
        return pair_inputs(rows), dy[rows]

    def eval_val(weights):
        if x_val is None:
            return None
        return _mse(weights, x_val, y_val)

    weights, log = _train(build_batch, len(train_rows), eval_val, cfg, input_dim)
    return RegressorModel(
        weights=weights,
        config=cfg,
        mode="sqrl",
        input_dim=input_dim,
        featurizer=featurizer,
        standardizer=standardizer,
        training_log=log,
    )


# -- inference -------------------------------------------------------------------


def predict_standard(model: RegressorModel, x_new) -> float:
    """Forward pass of an absolute model on a record or raw feature vector."""
    if model.mode != "standard":
        raise ValueError("predict_standard needs a model trained in standard mode")
    vec = model.feature_vector(x_new)
    return float(model.predict_raw(vec)[0])


def predict_anchored(
    model: RegressorModel,
    x_new,
    train,
    metric: DistanceMetric,
    n: int = 1,
) -> float:
    """Anchored relative prediction: mean over the n nearest training
    molecules of (anchor label + predicted difference of the query over the
    anchor). The difference vector is oriented query-minus-anchor so the
    model's training convention f(g_i - g_j) ~ y_i - y_j yields
    y_anchor + f(g_new - g_anchor) ~ y_new."""
    if model.mode != "sqrl":
        raise ValueError("predict_anchored needs a model trained in sqrl mode")
    if not 1 <= n <= len(train):
        raise ValueError("n must be in [1, len(train)]")
    g_new = model.feature_vector(x_new)
    total = 0.0
    for idx, _ in nearest_neighbors(metric, x_new, train, n):
        anchor = train[idx]
        g_i = model.feature_vector(anchor)
        pred = float(model.predict_raw(model.pair_input(g_new, g_i))[0])
        total += anchor.y + pred
    return total / n


@dataclass(eq=False)
class KnnBaseline:
    """Mean label of the k nearest training molecules (ties by index)."""

    metric: DistanceMetric
    records: tuple
    k: int = 1

    def __post_init__(self):
        self.records = tuple(self.records)
        if not self.records:
            raise ValueError("KNN needs a non-empty training set")
        if not 1 <= self.k <= len(self.records):
            raise ValueError("k must be in [1, len(records)]")


def knn_predict(baseline: KnnBaseline, x_new) -> float:
    hits = nearest_neighbors(baseline.metric, x_new, baseline.records, baseline.k)
    return float(np.mean([baseline.records[idx].y for idx, _ in hits]))


# -- checkpoint i/o ----------------------------------------------------------------

_FORMAT = "sqrl-model-v1"


def save_model(model: RegressorModel, path) -> None:
    """Single-file checkpoint: JSON header line plus raw float64 blocks."""
    arrays = []
    blocks = []
    for k, (w, b) in enumerate(model.weights):
        for name, arr in ((f"W{k}", w), (f"b{k}", b)):
            arr = np.ascontiguousarray(arr, dtype="<f8")
            arrays.append({"name": name, "shape": list(arr.shape)})
            blocks.append(arr.tobytes())
    if model.standardizer is not None:
        for name, arr in zip(("std_mean", "std_scale"), model.standardizer):
            arr = np.ascontiguousarray(arr, dtype="<f8")
            arrays.append({"name": name, "shape": list(arr.shape)})
            blocks.append(arr.tobytes())
    header = {
        "format": _FORMAT,
        "mode": model.mode,
        "input_dim": model.input_dim,
        "config": {
            "hidden_sizes": list(model.config.hidden_sizes),
            "dropout": model.config.dropout,
            "learning_rate": model.config.learning_rate,
            "batch_size": model.config.batch_size,
            "max_epochs": model.config.max_epochs,
            "patience": model.config.patience,
            "seed": model.config.seed,
            "standardize": model.config.standardize,
            "pair_mode": model.config.pair_mode,
            "max_pairs_per_epoch": model.config.max_pairs_per_epoch,
        },
        "featurizer": model.featurizer.describe() if model.featurizer else None,
        "training_log": list(model.training_log),
        "arrays": arrays,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for block in blocks:
            fh.write(block)


def load_model(path, embedding_table=None) -> RegressorModel:
    """Load a checkpoint; rejects dimension mismatches in the weight chain."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != _FORMAT:
        raise ValueError(f"{path}: not a {_FORMAT} checkpoint")

    arrays = {}
    offset = 0
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = count * 8
        if offset + nbytes > len(payload):
            raise ValueError(f"{path}: truncated checkpoint")
        arrays[spec["name"]] = np.frombuffer(
            payload, dtype="<f8", count=count, offset=offset
        ).reshape(spec["shape"]).copy()
        offset += nbytes

    cfg_raw = dict(header["config"])
    cfg_raw["hidden_sizes"] = tuple(cfg_raw["hidden_sizes"])
    cfg = MlpConfig(**cfg_raw)

    dims = layer_dims(header["input_dim"], cfg.hidden_sizes)
    weights = []
    for k in range(len(dims) - 1):
        w = arrays.get(f"W{k}")
        b = arrays.get(f"b{k}")
        if w is None or b is None:
            raise ValueError(f"{path}: missing layer {k} weights")
        if w.shape != (dims[k], dims[k + 1]) or b.shape != (dims[k + 1],):
            raise ValueError(
                f"{path}: layer {k} shape {w.shape} does not chain "
                f"{dims[k]}->{dims[k + 1]}"
            )
        weights.append((w, b))

    standardizer = None
    if "std_mean" in arrays:
        standardizer = (arrays["std_mean"], arrays["std_scale"])

    featurizer = None
    if header["featurizer"] is not None:
        featurizer = Featurizer.from_description(
            header["featurizer"], table=embedding_table
        )

    return RegressorModel(
        weights=weights,
        config=cfg,
        mode=header["mode"],
        input_dim=header["input_dim"],
        featurizer=featurizer,
        standardizer=standardizer,
        training_log=tuple(header["training_log"]),
    )
