"""Training: ordinal targets, analytic gradients, Adam, search, and CV.

The loss is the mean squared error between the cumulative sigmoid outputs
and the ordinal target encoding (level k becomes k-1 leading ones).  All
gradients are computed analytically; the optimizer is a from-scratch Adam.
Hyperparameters come from a seeded random search over fixed ranges, and
model selection runs a 5-fold rotation yielding a 60/20/20
train/validation/test split per fold.
"""

import math
from dataclasses import dataclass, replace
from functools import partial

import numpy as np

from .descriptors import N_FEATURES, extract_features_many
from .errors import CorpusLoadError, FitError
from .ingest import Corpus
from .metrics import EvalResult, evaluate_levels, macro_accuracy, macro_mse
from .model import (
    ONE_HOT_HEAD,
    ORDINAL_HEAD,
    ModelParams,
    Scaler,
    fit_scaler,
    forward_std,
    predict_levels,
)
from .util import parallel_map

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_PARAM_KEYS = ("w", "b", "w_f", "b_f")


@dataclass(frozen=True)
class TrainConfig:
    """One training run's hyperparameters."""

    learning_rate: float
    batch_size: int
    dropout_rate: float = 0.0
    lr_decay: float = 1.0
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0
    head: str = ORDINAL_HEAD

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must lie in (0, 1]")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.head not in (ORDINAL_HEAD, ONE_HOT_HEAD):
            raise ValueError(f"unknown head {self.head!r}")

    def to_json_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "dropout_rate": self.dropout_rate,
            "lr_decay": self.lr_decay,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "head": self.head,
        }


@dataclass(frozen=True)
class SearchSpace:
    """Random-search ranges (fixed) and per-trial training settings."""

    budget: int = 50
    max_epochs: int = 200
    patience: int = 20
    head: str = ORDINAL_HEAD

    BATCH_RANGE = (16, 128)
    DROPOUT_RANGE = (0.1, 0.5)
    LR_DECAY_RANGE = (0.1, 0.9)
    LOG10_LR_RANGE = (-5.0, -1.0)

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")

    def sample(self, rng: np.random.Generator) -> TrainConfig:
        return TrainConfig(
            learning_rate=float(10.0 ** rng.uniform(*self.LOG10_LR_RANGE)),
            batch_size=int(rng.integers(self.BATCH_RANGE[0], self.BATCH_RANGE[1] + 1)),
            dropout_rate=float(rng.uniform(*self.DROPOUT_RANGE)),
            lr_decay=float(rng.uniform(*self.LR_DECAY_RANGE)),
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=int(rng.integers(0, 2**31 - 1)),
            head=self.head,
        )


def encode_ordinal(level: int, k: int) -> np.ndarray:
    """Level as k-1 cumulative indicators: level-1 leading ones, rest zeros."""
    if not 1 <= level <= k:
        raise ValueError(f"level {level} outside [1, {k}]")
    target = np.zeros(k - 1)
    target[: level - 1] = 1.0
    return target


def encode_ordinal_batch(levels, k: int) -> np.ndarray:
    levels = np.asarray(levels, dtype=int)
    if levels.size and (levels.min() < 1 or levels.max() > k):
        raise ValueError(f"levels outside [1, {k}]")
    thresholds = np.arange(1, k)
    return (levels[:, None] > thresholds[None, :]).astype(float)


def ordinal_mse_loss(probs, target) -> float:
    """Mean squared error between cumulative indicators and their targets."""
    probs = np.asarray(probs, dtype=float)
    target = np.asarray(target, dtype=float)
    if probs.shape != target.shape:
        raise ValueError(f"shape mismatch: {probs.shape} vs {target.shape}")
    diff = probs - target
    return float((diff * diff).mean())


def dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    """Inverted-dropout multiplier: zero with probability ``rate``, else 1/(1-rate)."""
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _loss_and_grads(
    params: ModelParams,
    x: np.ndarray,
    levels: np.ndarray,
    mask: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch loss and analytic gradients for all four parameter arrays.

    ``x`` holds raw features; standardization and the optional dropout
    multiplier are applied here so the gradient matches the training loss
    exactly, mask included.
    """
    n = x.shape[0]
    z = params.scaler.transform(x)
    if mask is not None:
        z = z * mask
    scores, s_agg, probs = forward_std(params, z)
    if params.head == ORDINAL_HEAD:
        targets = encode_ordinal_batch(levels, params.k)
        diff = probs - targets
        loss = float((diff * diff).mean())
        # d(loss)/d(logits) for mean over batch and the k-1 outputs.
        g_logits = 2.0 * diff * probs * (1.0 - probs) / (params.k - 1) / n
    else:
        one_hot = np.zeros((n, params.k))
        one_hot[np.arange(n), np.asarray(levels, dtype=int) - 1] = 1.0
        log_probs = np.log(np.clip(probs, 1e-300, None))
        loss = float(-(one_hot * log_probs).sum() / n)
        g_logits = (probs - one_hot) / n
    grad_w_f = (g_logits * s_agg[:, None]).sum(axis=0)
    grad_b_f = g_logits.sum(axis=0)
    g_agg = g_logits @ params.w_f
    g_pre = g_agg[:, None] * (1.0 - scores * scores)
    grad_w = (g_pre * z).sum(axis=0)
    grad_b = g_pre.sum(axis=0)
    return loss, {"w": grad_w, "b": grad_b, "w_f": grad_w_f, "b_f": grad_b_f}


def gradients(
    params: ModelParams,
    x,
    levels,
    mask: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Analytic gradient of the mean batch loss with respect to all parameters."""
    x = np.asarray(x, dtype=float)
    levels = np.asarray(levels, dtype=int)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("batch must be a non-empty (n, 12) array")
    _, grads = _loss_and_grads(params, x, levels, mask)
    return grads


def batch_loss(params: ModelParams, x, levels, mask: np.ndarray | None = None) -> float:
    """The training loss that :func:`gradients` differentiates."""
    loss, _ = _loss_and_grads(
        params, np.asarray(x, dtype=float), np.asarray(levels, dtype=int), mask
    )
    return loss


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators and the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def init(cls, params: ModelParams) -> "AdamState":
        zeros = {
            "w": np.zeros_like(params.w),
            "b": np.zeros_like(params.b),
            "w_f": np.zeros_like(params.w_f),
            "b_f": np.zeros_like(params.b_f),
        }
        return cls(m=zeros, v={k: v.copy() for k, v in zeros.items()}, t=0)


def adam_step(
    state: AdamState,
    params: ModelParams,
    grads: dict[str, np.ndarray],
    lr: float,
) -> tuple[AdamState, ModelParams]:
    """One bias-corrected Adam update; returns fresh state and parameters."""
    t = state.t + 1
    new_m, new_v, updated = {}, {}, {}
    arrays = {"w": params.w, "b": params.b, "w_f": params.w_f, "b_f": params.b_f}
    for key in _PARAM_KEYS:
        g = grads[key]
        m = ADAM_BETA1 * state.m[key] + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * state.v[key] + (1.0 - ADAM_BETA2) * (g * g)
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        new_m[key] = m
        new_v[key] = v
        updated[key] = arrays[key] - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    new_params = replace(
        params, w=updated["w"], b=updated["b"], w_f=updated["w_f"], b_f=updated["b_f"]
    )
    return AdamState(m=new_m, v=new_v, t=t), new_params


@dataclass(frozen=True)
class TrainReport:
    """Outcome of one training run."""

    best_params: ModelParams
    train_loss: tuple[float, ...]
    val_macro_acc: tuple[float, ...]
    val_macro_mse: tuple[float, ...]
    stopping_epoch: int
    best_epoch: int
    best_val_acc: float
    best_val_mse: float
    config: TrainConfig

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "history": {
                "train_loss": list(self.train_loss),
                "val_macro_acc": list(self.val_macro_acc),
                "val_macro_mse": list(self.val_macro_mse),
            },
            "stopping_epoch": self.stopping_epoch,
            "best_epoch": self.best_epoch,
            "best_val_acc": self.best_val_acc,
            "best_val_mse": self.best_val_mse,
        }


def _coerce_set(dataset, k: int, name: str) -> tuple[np.ndarray, np.ndarray]:
    x, y = dataset
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    if x.ndim != 2 or x.shape[0] == 0 or y.shape != (x.shape[0],):
        raise FitError(f"{name} set must be non-empty with one level per row")
    if y.min() < 1 or y.max() > k:
        raise FitError(f"{name} labels outside [1, {k}]")
    return x, y


def _init_params(rng: np.random.Generator, k: int, scaler: Scaler, head: str) -> ModelParams:
    dim = k - 1 if head == ORDINAL_HEAD else k
    return ModelParams(
        w=rng.uniform(-0.1, 0.1, N_FEATURES),
        b=rng.uniform(-0.1, 0.1, N_FEATURES),
        w_f=rng.uniform(-0.1, 0.1, dim),
        b_f=rng.uniform(-0.1, 0.1, dim),
        k=k,
        scaler=scaler,
        head=head,
    )


def fit(train, val, config: TrainConfig, k: int) -> TrainReport:
    """Train with Adam, inverted dropout, early stopping, and plateau decay.

    The scaler is fitted on the training split only.  The best checkpoint
    is the epoch with the highest validation macro-accuracy, ties broken by
    the lower validation macro-MSE.  Training stops after ``patience``
    epochs without improvement, and the learning rate is multiplied by
    ``lr_decay`` whenever the validation loss has not improved for
    ceil(patience / 2) consecutive epochs.
    """
    x_train, y_train = _coerce_set(train, k, "train")
    x_val, y_val = _coerce_set(val, k, "validation")

    scaler = fit_scaler(x_train)
    rng = np.random.default_rng(config.seed)
    params = _init_params(rng, k, scaler, config.head)
    state = AdamState.init(params)
    lr = config.learning_rate
    decay_window = math.ceil(config.patience / 2)

    n = x_train.shape[0]
    history_loss: list[float] = []
    history_acc: list[float] = []
    history_mse: list[float] = []
    best: tuple[float, float, int, ModelParams] | None = None
    best_val_loss = math.inf
    epochs_since_improve = 0
    loss_plateau = 0
    epoch = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            mask = None
            if config.dropout_rate > 0:
                mask = dropout_mask(rng, (idx.size, x_train.shape[1]), config.dropout_rate)
            loss, grads = _loss_and_grads(params, x_train[idx], y_train[idx], mask)
            state, params = adam_step(state, params, grads, lr)
            epoch_loss += loss * idx.size
        history_loss.append(epoch_loss / n)

        val_pred = predict_levels(params, x_val)
        acc = macro_accuracy(val_pred, y_val, k)
        mse = macro_mse(val_pred, y_val, k)
        history_acc.append(acc)
        history_mse.append(mse)

        if best is None or acc > best[0] or (acc == best[0] and mse < best[1]):
            best = (acc, mse, epoch, params)
            epochs_since_improve = 0
        else:
            epochs_since_improve += 1

        val_loss = batch_loss(params, x_val, y_val)
        if val_loss < best_val_loss:
            best_val_loss = val_loss
            loss_plateau = 0
        else:
            loss_plateau += 1
            if loss_plateau >= decay_window:
                lr *= config.lr_decay
                loss_plateau = 0

        if epochs_since_improve >= config.patience:
            break

    if best is None:
        # max_epochs == 0: report the untrained initialization.
        best = (0.0, math.inf, 0, params)
    best_acc, best_mse, best_epoch, best_params = best
    return TrainReport(
        best_params=best_params,
        train_loss=tuple(history_loss),
        val_macro_acc=tuple(history_acc),
        val_macro_mse=tuple(history_mse),
        stopping_epoch=epoch,
        best_epoch=best_epoch,
        best_val_acc=best_acc,
        best_val_mse=best_mse,
        config=config,
    )


def _run_trial(config: TrainConfig, train, val, k: int) -> TrainReport:
    return fit(train, val, config, k)


def random_search(
    space: SearchSpace,
    train,
    val,
    k: int,
    seed: int | np.random.SeedSequence = 0,
    jobs: int = 1,
) -> tuple[TrainConfig, TrainReport]:
    """Seeded i.i.d. search over the space; best validation macro-accuracy wins.

    Trial configurations depend only on (seed, trial index), so a larger
    budget extends the trial sequence instead of reshuffling it.
    """
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(space.budget)
    configs = [space.sample(np.random.default_rng(child)) for child in children]
    runner = partial(_run_trial, train=train, val=val, k=k)
    reports = parallel_map(runner, configs, jobs=jobs)
    best_index = 0
    for i in range(1, len(reports)):
        cand, cur = reports[i], reports[best_index]
        if cand.best_val_acc > cur.best_val_acc or (
            cand.best_val_acc == cur.best_val_acc and cand.best_val_mse < cur.best_val_mse
        ):
            best_index = i
    return configs[best_index], reports[best_index]


@dataclass(frozen=True)
class FoldOutcome:
    """Best configuration, training report, and test metrics for one fold."""

    fold: int
    config: TrainConfig
    report: TrainReport
    test_eval: EvalResult
    train_ids: tuple[str, ...]


@dataclass(frozen=True)
class CrossValResult:
    folds: tuple[FoldOutcome, ...]

    @property
    def accuracies(self) -> np.ndarray:
        return np.asarray([f.test_eval.macro_accuracy for f in self.folds])

    @property
    def mses(self) -> np.ndarray:
        return np.asarray([f.test_eval.macro_mse for f in self.folds])

    def summary(self) -> str:
        acc, mse = self.accuracies, self.mses
        return (
            f"{acc.mean():.3f}({acc.std():.3f}) acc, "
            f"{mse.mean():.3f}({mse.std():.3f}) mse"
        )

    def to_metrics_csv(self) -> str:
        lines = ["fold,acc,mse"]
        for f in self.folds:
            lines.append(f"{f.fold},{f.test_eval.macro_accuracy!r},{f.test_eval.macro_mse!r}")
        acc, mse = self.accuracies, self.mses
        lines.append(
            f"mean,{acc.mean():.3f}({acc.std():.3f}),{mse.mean():.3f}({mse.std():.3f})"
        )
        return "\n".join(lines) + "\n"


def fold_split(folds: dict[str, int], fold: int, n_folds: int) -> tuple[set, set, set]:
    """Rotation rule: test = fold, validation = next fold, train = the rest."""
    val_fold = (fold + 1) % n_folds
    test_ids = {pid for pid, f in folds.items() if f == fold}
    val_ids = {pid for pid, f in folds.items() if f == val_fold}
    train_ids = {pid for pid, f in folds.items() if f not in (fold, val_fold)}
    return train_ids, val_ids, test_ids


def cross_validate(
    corpus: Corpus,
    space: SearchSpace,
    seed: int = 0,
    jobs: int = 1,
    features: dict[str, np.ndarray] | None = None,
) -> CrossValResult:
    """Hyperparameter search plus fit per fold, scored on the held-out fold.

    ``features`` may carry precomputed 12-value arrays keyed by piece id;
    otherwise descriptors are extracted here (in parallel when jobs > 1).
    """
    if corpus.folds is None:
        raise CorpusLoadError("corpus has no fold assignments")
    pieces = sorted(corpus.pieces, key=lambda p: p.id)
    if any(p.label is None for p in pieces):
        raise CorpusLoadError("cross-validation needs a label on every piece")
    if features is None:
        vectors = extract_features_many(pieces, jobs=jobs)
        features = {p.id: fv.as_array() for p, fv in zip(pieces, vectors)}
    labels = {p.id: p.label for p in pieces}

    n_folds = max(corpus.folds.values()) + 1
    root = np.random.SeedSequence(seed)
    fold_seeds = root.spawn(n_folds)
    outcomes = []
    for fold in range(n_folds):
        train_ids, val_ids, test_ids = fold_split(corpus.folds, fold, n_folds)
        sets = {}
        for name, ids in (("train", train_ids), ("val", val_ids), ("test", test_ids)):
            ordered = sorted(ids)
            sets[name] = (
                np.asarray([features[i] for i in ordered]),
                np.asarray([labels[i] for i in ordered], dtype=int),
            )
        config, report = random_search(
            space, sets["train"], sets["val"], corpus.k, seed=fold_seeds[fold], jobs=jobs
        )
        test_pred = predict_levels(report.best_params, sets["test"][0])
        outcome = FoldOutcome(
            fold=fold,
            config=config,
            report=report,
            test_eval=evaluate_levels(test_pred, sets["test"][1], corpus.k),
            train_ids=tuple(sorted(train_ids)),
        )
        outcomes.append(outcome)
    return CrossValResult(folds=tuple(outcomes))
