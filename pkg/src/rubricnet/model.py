"""The white-box ordinal scorer.

Each standardized descriptor passes through its own one-weight linear layer
and a tanh, yielding a score in (-1, 1).  The sum of the twelve scores is
the single interpretable difficulty scalar; a final linear layer plus
sigmoid turns it into cumulative level indicators decoded by a prefix
threshold rule.  A softmax head over the same scalar is available as a
training ablation.
"""

import json
from dataclasses import dataclass, replace

import numpy as np

from .descriptors import FEATURE_COLUMNS, N_FEATURES, FeatureVector
from .errors import CheckpointError, NumericError

ORDINAL_HEAD = "ordinal"
ONE_HOT_HEAD = "one_hot"

CHECKPOINT_VERSION = 1


def _as_float_array(values, length: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (length,):
        raise ValueError(f"{name} must have shape ({length},), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class Scaler:
    """Per-feature standardization statistics fitted on training data."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _as_float_array(self.mean, N_FEATURES, "mean"))
        object.__setattr__(self, "std", _as_float_array(self.std, N_FEATURES, "std"))
        if not (self.std > 0).all():
            raise ValueError("std must be strictly positive")

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


def identity_scaler() -> Scaler:
    return Scaler(np.zeros(N_FEATURES), np.ones(N_FEATURES))


def fit_scaler(x: np.ndarray) -> Scaler:
    """Mean/std over rows of ``x``; features constant on the data get std 1."""
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0, 1.0, std)
    return Scaler(mean, std)


@dataclass(frozen=True)
class ModelParams:
    """All weights of the scorer plus the scaler that standardizes its input.

    ``w``/``b`` are the per-descriptor layers; ``w_f``/``b_f`` the final
    layer, of length ``k - 1`` for the cumulative head and ``k`` for the
    one-hot ablation head.
    """

    w: np.ndarray
    b: np.ndarray
    w_f: np.ndarray
    b_f: np.ndarray
    k: int
    scaler: Scaler
    feature_order: tuple[str, ...] = FEATURE_COLUMNS
    head: str = ORDINAL_HEAD

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"class count {self.k} must be >= 2")
        if self.head not in (ORDINAL_HEAD, ONE_HOT_HEAD):
            raise ValueError(f"unknown head {self.head!r}")
        object.__setattr__(self, "w", _as_float_array(self.w, N_FEATURES, "w"))
        object.__setattr__(self, "b", _as_float_array(self.b, N_FEATURES, "b"))
        dim = self.head_dim
        object.__setattr__(self, "w_f", _as_float_array(self.w_f, dim, "w_f"))
        object.__setattr__(self, "b_f", _as_float_array(self.b_f, dim, "b_f"))
        object.__setattr__(self, "feature_order", tuple(self.feature_order))
        if len(self.feature_order) != N_FEATURES:
            raise ValueError("feature_order must name all 12 slots")

    @property
    def head_dim(self) -> int:
        return self.k - 1 if self.head == ORDINAL_HEAD else self.k


@dataclass(frozen=True)
class ForwardTrace:
    """Intermediate values of one forward pass.

    ``scores`` are the 12 tanh outputs in (-1, 1); ``s_agg`` their sum;
    ``probs`` the cumulative indicators (length k - 1) or, for the one-hot
    head, the softmax class probabilities (length k).
    """

    scores: np.ndarray
    s_agg: float
    probs: np.ndarray


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=-1, keepdims=True)


def forward_std(params: ModelParams, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward pass on already standardized rows ``z`` of shape (n, 12).

    Returns (scores, s_agg, probs) with leading batch dimension.  Training
    uses this entry point so dropout can be applied to ``z`` beforehand.
    """
    scores = np.tanh(z * params.w + params.b)
    s_agg = scores.sum(axis=1)
    logits = s_agg[:, None] * params.w_f + params.b_f
    if params.head == ORDINAL_HEAD:
        probs = _sigmoid(logits)
    else:
        probs = _softmax(logits)
    return scores, s_agg, probs


def _input_rows(params: ModelParams, x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        x = x.as_array()
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != N_FEATURES:
        raise ValueError(f"expected rows of {N_FEATURES} features, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise NumericError("feature input contains non-finite values")
    return params.scaler.transform(arr)


def forward(params: ModelParams, x) -> ForwardTrace:
    """Score one feature vector (raw, unstandardized)."""
    scores, s_agg, probs = forward_std(params, _input_rows(params, x))
    return ForwardTrace(scores=scores[0], s_agg=float(s_agg[0]), probs=probs[0])


def forward_batch(params: ModelParams, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized forward pass over raw feature rows."""
    return forward_std(params, _input_rows(params, x))


def decode(probs) -> int:
    """Prefix threshold rule: 1 + length of the leading run of probs >= 0.5."""
    level = 1
    for p in probs:
        if p >= 0.5:
            level += 1
        else:
            break
    return level


def decode_batch(probs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`decode` over rows."""
    active = np.asarray(probs) >= 0.5
    prefix = np.cumprod(active, axis=1)
    return 1 + prefix.sum(axis=1)


def predict_level(params: ModelParams, x) -> int:
    trace = forward(params, x)
    if params.head == ORDINAL_HEAD:
        return decode(trace.probs)
    return int(np.argmax(trace.probs)) + 1


def predict_levels(params: ModelParams, x) -> np.ndarray:
    """Predicted levels for raw feature rows."""
    _, _, probs = forward_batch(params, x)
    if params.head == ORDINAL_HEAD:
        return decode_batch(probs)
    return np.argmax(probs, axis=1) + 1


def normalize_scores(scores) -> np.ndarray:
    """Affine map of tanh scores from (-1, 1) onto (0, 1)."""
    return (np.asarray(scores, dtype=float) + 1.0) / 2.0


def rescale_aggregate(s_agg: float, n: int = N_FEATURES) -> float:
    """Affine map of the aggregated score from [-n, n] onto [0, 12]."""
    return (float(s_agg) + n) / (2.0 * n) * 12.0


def decision_boundaries(params: ModelParams) -> list[float | None]:
    """Aggregated-score values where each cumulative indicator crosses 0.5.

    Entries whose final-layer weight is zero can never cross the threshold
    and are reported as None (unreachable).
    """
    if params.head != ORDINAL_HEAD:
        raise ValueError("decision boundaries exist for the cumulative head only")
    boundaries: list[float | None] = []
    for wf, bf in zip(params.w_f, params.b_f):
        boundaries.append(None if wf == 0 else float(-bf / wf))
    return boundaries


def boundary_flags(params: ModelParams) -> list[str]:
    """Human-readable warnings about boundary structure.

    A trained scorer is expected to have positive final-layer weights and
    boundaries ascending with the level; violations break the guarantee
    that higher aggregated scores imply higher levels.
    """
    flags = []
    for i, wf in enumerate(params.w_f):
        if wf == 0:
            flags.append(f"indicator {i + 1} is unreachable (zero weight)")
        elif wf < 0:
            flags.append(f"indicator {i + 1} has a negative weight")
    reachable = [b for b in decision_boundaries(params) if b is not None]
    if any(b2 < b1 for b1, b2 in zip(reachable, reachable[1:])):
        flags.append("boundaries are not ascending with the level")
    return flags


def save_checkpoint(params: ModelParams) -> bytes:
    """Serialize parameters as schema-versioned JSON, full float precision."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "K": params.k,
        "feature_order": list(params.feature_order),
        "w": params.w.tolist(),
        "b": params.b.tolist(),
        "w_f": params.w_f.tolist(),
        "b_f": params.b_f.tolist(),
        "scaler": {"mean": params.scaler.mean.tolist(), "std": params.scaler.std.tolist()},
    }
    if params.head != ORDINAL_HEAD:
        doc["head"] = params.head
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def load_checkpoint(data: bytes, expected_k: int | None = None) -> ModelParams:
    """Parse checkpoint bytes, verifying schema version, shapes, and K."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint: {exc}") from exc
    if not isinstance(doc, dict):
        raise CheckpointError("checkpoint must be a JSON object")
    version = doc.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version!r} (expected {CHECKPOINT_VERSION})"
        )
    try:
        k = int(doc["K"])
        head = doc.get("head", ORDINAL_HEAD)
        params = ModelParams(
            w=doc["w"],
            b=doc["b"],
            w_f=doc["w_f"],
            b_f=doc["b_f"],
            k=k,
            scaler=Scaler(doc["scaler"]["mean"], doc["scaler"]["std"]),
            feature_order=tuple(doc["feature_order"]),
            head=head,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    if expected_k is not None and params.k != expected_k:
        raise CheckpointError(f"checkpoint has K={params.k}, expected K={expected_k}")
    return params


def with_scaler(params: ModelParams, scaler: Scaler) -> ModelParams:
    return replace(params, scaler=scaler)
