"""Feature statistics: tie-aware rank correlation, clustering, contributions.

The correlation statistic is the tau-c variant of the Kendall coefficient,
chosen because difficulty levels produce heavily tied rankings.  Feature
interdependence is measured within each difficulty class (to remove the
shared correlation with difficulty), averaged, converted to a distance,
and clustered agglomeratively with average linkage.  Grade-level rubric
statistics (contribution profiles and per-piece divergence from the grade
mean) live here as well.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .descriptors import FEATURE_COLUMNS
from .errors import AnalysisError, ContributionError
from .model import ModelParams, forward_batch, normalize_scores, predict_levels

_PAIR_CHUNK = 256


def kendall_tau_c(x, y) -> float:
    """Stuart's tau-c: 2m(C - D) / (n^2 (m - 1)), m = min distinct counts.

    C and D count concordant and discordant pairs; ties contribute to
    neither.  Degenerate inputs with fewer than two distinct values on
    either side return 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"inputs must be equal-length vectors, got {x.shape} vs {y.shape}")
    n = x.size
    if n < 2:
        raise ValueError("need at least two observations")
    m = min(np.unique(x).size, np.unique(y).size)
    if m < 2:
        return 0.0
    # Sum of sign(xi - xj) * sign(yi - yj) over ordered pairs is 2(C - D).
    signed = 0.0
    for start in range(0, n, _PAIR_CHUNK):
        xs = x[start : start + _PAIR_CHUNK]
        ys = y[start : start + _PAIR_CHUNK]
        dx = np.sign(xs[:, None] - x[None, :])
        dy = np.sign(ys[:, None] - y[None, :])
        signed += float((dx * dy).sum())
    c_minus_d = signed / 2.0
    return 2.0 * m * c_minus_d / (n * n * (m - 1))


@dataclass(frozen=True)
class CorrelationTable:
    """Per-feature correlation with difficulty, ordered by absolute value."""

    entries: tuple[tuple[str, float], ...]

    def to_csv(self) -> str:
        lines = ["feature,tau_c"]
        lines.extend(f"{name},{tau!r}" for name, tau in self.entries)
        return "\n".join(lines) + "\n"


def feature_difficulty_table(
    features: np.ndarray,
    labels,
    names: Sequence[str] = FEATURE_COLUMNS,
) -> CorrelationTable:
    """Correlate every feature column with the difficulty level."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if features.ndim != 2 or features.shape[0] != labels.size:
        raise ValueError("features must be (n, f) with one label per row")
    if features.shape[1] != len(names):
        raise ValueError("one name per feature column required")
    taus = [kendall_tau_c(features[:, j], labels) for j in range(features.shape[1])]
    order = sorted(range(len(taus)), key=lambda j: -abs(taus[j]))
    return CorrelationTable(tuple((names[j], taus[j]) for j in order))


def conditional_tau_matrix(features: np.ndarray, labels) -> np.ndarray:
    """Feature-pair tau-c within each difficulty class, averaged over classes.

    Classes with fewer than two samples are skipped; the diagonal is 1.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_features = features.shape[1]
    classes = [c for c in np.unique(labels) if (labels == c).sum() >= 2]
    if not classes:
        raise AnalysisError("no difficulty class has at least two samples")
    matrix = np.eye(n_features)
    for i in range(n_features):
        for j in range(i + 1, n_features):
            taus = [
                kendall_tau_c(features[labels == c, i], features[labels == c, j])
                for c in classes
            ]
            value = float(np.mean(taus))
            matrix[i, j] = value
            matrix[j, i] = value
    return matrix


def correlation_to_distance(matrix: np.ndarray) -> np.ndarray:
    """Distance transform d = 1 - tau, so anticorrelated features end up far."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise AnalysisError("correlation matrix must be square")
    if not np.allclose(matrix, matrix.T, atol=1e-12):
        raise AnalysisError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(matrix), 1.0, atol=1e-12):
        raise AnalysisError("correlation matrix must have a unit diagonal")
    distance = 1.0 - matrix
    np.fill_diagonal(distance, 0.0)
    return distance


@dataclass(frozen=True)
class Dendrogram:
    """Ordered merge list; leaves are 0..n-1, each merge creates the next id."""

    n_leaves: int
    merges: tuple[tuple[int, int, float], ...]

    def to_json_dict(self, labels: Sequence[str] | None = None) -> dict:
        doc: dict = {
            "n_leaves": self.n_leaves,
            "merges": [[a, b, d] for a, b, d in self.merges],
        }
        if labels is not None:
            doc["labels"] = list(labels)
        return doc

    def leaf_order(self) -> list[int]:
        """Left-to-right leaf positions induced by the merge tree."""
        members: dict[int, list[int]] = {i: [i] for i in range(self.n_leaves)}
        next_id = self.n_leaves
        for a, b, _dist in self.merges:
            members[next_id] = members.pop(a) + members.pop(b)
            next_id += 1
        if not members:
            return []
        return members[max(members)]


def agglomerative_cluster(distances: np.ndarray) -> Dendrogram:
    """Average-linkage agglomeration with a deterministic tie-break.

    At each step the pair of active clusters with the smallest mean
    pairwise distance merges; ties go to the lexicographically smallest
    cluster-index pair.
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise AnalysisError("distance matrix must be square")
    if not np.allclose(d, d.T, atol=1e-12):
        raise AnalysisError("distance matrix must be symmetric")
    n = d.shape[0]
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    next_id = n
    merges: list[tuple[int, int, float]] = []
    while len(clusters) > 1:
        best_pair: tuple[int, int] | None = None
        best_dist = np.inf
        ids = sorted(clusters)
        for ai, a in enumerate(ids):
            for b in ids[ai + 1 :]:
                linkage = float(np.mean(d[np.ix_(clusters[a], clusters[b])]))
                if linkage < best_dist or (linkage == best_dist and best_pair is None):
                    best_dist = linkage
                    best_pair = (a, b)
        a, b = best_pair
        merges.append((a, b, best_dist))
        clusters[next_id] = clusters.pop(a) + clusters.pop(b)
        next_id += 1
    return Dendrogram(n_leaves=n, merges=tuple(merges))


# ---------------------------------------------------------------------------
# Grade-level rubric statistics


@dataclass(frozen=True)
class GradeStatistics:
    """Per-grade means of the normalized descriptor scores on training data."""

    k: int
    means: dict[int, np.ndarray]
    counts: dict[int, int]

    def to_json_dict(self) -> dict:
        return {
            "version": 1,
            "K": self.k,
            "grades": {str(g): self.means[g].tolist() for g in sorted(self.means)},
            "counts": {str(g): self.counts[g] for g in sorted(self.counts)},
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GradeStatistics":
        try:
            k = int(doc["K"])
            means = {int(g): np.asarray(v, dtype=float) for g, v in doc["grades"].items()}
            counts = {int(g): int(v) for g, v in doc["counts"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise AnalysisError(f"malformed grade statistics: {exc}") from exc
        return cls(k=k, means=means, counts=counts)


def compute_grade_statistics(params: ModelParams, features: np.ndarray, labels) -> GradeStatistics:
    """Mean normalized score per descriptor within each labeled grade."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    scores, _, _ = forward_batch(params, features)
    normalized = normalize_scores(scores)
    means: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for grade in np.unique(labels):
        mask = labels == grade
        means[int(grade)] = normalized[mask].mean(axis=0)
        counts[int(grade)] = int(mask.sum())
    return GradeStatistics(k=params.k, means=means, counts=counts)


@dataclass(frozen=True)
class ContributionProfile:
    """Mean normalized score per grade, relative to grade 1 (whose row is 0)."""

    grades: tuple[int, ...]
    values: np.ndarray  # shape (len(grades), 12)

    def to_csv(self, names: Sequence[str] = FEATURE_COLUMNS) -> str:
        lines = ["grade," + ",".join(names)]
        for grade, row in zip(self.grades, self.values):
            lines.append(f"{grade}," + ",".join(repr(v) for v in row))
        return "\n".join(lines) + "\n"


def grade_contributions(
    runs: Sequence[tuple[ModelParams, np.ndarray, np.ndarray]],
) -> ContributionProfile:
    """Grade-relative contribution profile, averaged over evaluation runs.

    Each run is (params, features, labels), typically one cross-validation
    split scored on its own test set.  Every run must contain grade 1, the
    reference row.
    """
    if not runs:
        raise ContributionError("at least one evaluation run is required")
    per_run: list[dict[int, np.ndarray]] = []
    for params, features, labels in runs:
        stats = compute_grade_statistics(params, features, labels)
        if 1 not in stats.means:
            raise ContributionError("grade 1 absent; the reference row is undefined")
        reference = stats.means[1]
        per_run.append({g: stats.means[g] - reference for g in stats.means})
    grades = sorted(set().union(*[set(r) for r in per_run]))
    rows = []
    for grade in grades:
        contributions = [r[grade] for r in per_run if grade in r]
        rows.append(np.mean(contributions, axis=0))
    return ContributionProfile(grades=tuple(grades), values=np.asarray(rows))


@dataclass(frozen=True)
class DivergenceResult:
    """Normalized scores minus the grade's training mean, per descriptor."""

    values: np.ndarray
    grade: int
    used_prediction: bool


def grade_divergence(
    params: ModelParams,
    features,
    label: int | None,
    stats: GradeStatistics,
) -> DivergenceResult:
    """How far one piece sits from the typical piece of its grade.

    Uses the labeled grade when available; otherwise the predicted level,
    flagged in the result.
    """
    features = np.asarray(features, dtype=float)
    used_prediction = label is None
    grade = int(predict_levels(params, features[None, :])[0]) if label is None else int(label)
    if grade not in stats.means:
        raise AnalysisError(f"no training statistics for grade {grade}")
    scores, _, _ = forward_batch(params, features[None, :])
    normalized = normalize_scores(scores[0])
    return DivergenceResult(
        values=normalized - stats.means[grade],
        grade=grade,
        used_prediction=used_prediction,
    )
