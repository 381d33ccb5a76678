import numpy as np
import pytest

from rubricnet import (
    extract_features,
    gen_feature_dataset,
    gen_score_corpus,
    parse_canonical_json,
    serialize_canonical_json,
)
from rubricnet.descriptors import FEATURE_COLUMNS
from rubricnet.synth import FEATURE_SLOPES, SynthSpec


def class_means(corpus, column):
    index = FEATURE_COLUMNS.index(column)
    by_class = {}
    for piece in corpus.pieces:
        fv = extract_features(piece)
        by_class.setdefault(piece.label, []).append(fv.values[index])
    return [float(np.mean(by_class[g])) for g in sorted(by_class)]


def spearman(values):
    ranks = np.argsort(np.argsort(values))
    grades = np.arange(len(values))
    rx = ranks - ranks.mean()
    ry = grades - grades.mean()
    return float((rx * ry).sum() / np.sqrt((rx * rx).sum() * (ry * ry).sum()))


class TestSpecValidation:
    def test_ranges(self):
        with pytest.raises(ValueError):
            SynthSpec(k=1, n_per_class=5)
        with pytest.raises(ValueError):
            SynthSpec(k=3, n_per_class=0)
        with pytest.raises(ValueError):
            SynthSpec(k=3, n_per_class=5, noise=-0.1)
        with pytest.raises(ValueError):
            SynthSpec(k=3, n_per_class=5, mode="nope")

    def test_mode_mismatch(self):
        with pytest.raises(ValueError):
            gen_feature_dataset(SynthSpec(k=3, n_per_class=5, mode="score_level"))
        with pytest.raises(ValueError):
            gen_score_corpus(SynthSpec(k=3, n_per_class=5, mode="feature_level"))


class TestFeatureDataset:
    def test_noise_zero_sits_on_class_means(self):
        spec = SynthSpec(k=3, n_per_class=4, seed=0, mode="feature_level", noise=0.0)
        x, y = gen_feature_dataset(spec)
        assert x.shape == (12, 12)
        for level in (1, 2, 3):
            rows = x[y == level]
            assert np.allclose(rows, level * FEATURE_SLOPES)

    def test_noise_zero_separable_on_every_slot(self):
        spec = SynthSpec(k=4, n_per_class=6, seed=1, mode="feature_level", noise=0.0)
        x, y = gen_feature_dataset(spec)
        for j in range(12):
            per_class = [x[y == g, j].mean() for g in range(1, 5)]
            diffs = np.diff(per_class)
            assert np.all(diffs > 0) or np.all(diffs < 0)

    def test_same_seed_identical(self):
        spec = SynthSpec(k=5, n_per_class=7, seed=3, mode="feature_level", noise=0.2)
        x1, y1 = gen_feature_dataset(spec)
        x2, y2 = gen_feature_dataset(spec)
        assert np.array_equal(x1, x2)
        assert np.array_equal(y1, y2)

    def test_nearest_centroid_perfect_at_zero_noise(self):
        spec = SynthSpec(k=9, n_per_class=5, seed=2, mode="feature_level", noise=0.0)
        x, y = gen_feature_dataset(spec)
        centroids = np.stack([x[y == g].mean(axis=0) for g in range(1, 10)])
        distances = np.linalg.norm(x[:, None, :] - centroids[None, :, :], axis=2)
        predicted = distances.argmin(axis=1) + 1
        assert np.array_equal(predicted, y)


class TestScoreCorpus:
    def test_same_seed_identical(self):
        spec = SynthSpec(k=3, n_per_class=4, seed=5)
        c1 = gen_score_corpus(spec)
        c2 = gen_score_corpus(spec)
        assert c1.pieces == c2.pieces

    def test_shape_and_labels(self):
        corpus = gen_score_corpus(SynthSpec(k=3, n_per_class=20, seed=0))
        assert len(corpus) == 60
        assert corpus.k == 3
        levels = sorted({p.label for p in corpus.pieces})
        assert levels == [1, 2, 3]
        assert len({p.id for p in corpus.pieces}) == 60

    def test_level_one_has_zero_displacement(self):
        corpus = gen_score_corpus(SynthSpec(k=3, n_per_class=10, seed=1))
        for piece in corpus.pieces:
            if piece.label == 1:
                fv = extract_features(piece)
                assert fv.value("displacement_rate_r") == 0.0
                assert fv.value("displacement_rate_l") == 0.0

    def test_entropy_strictly_increasing_at_zero_noise(self):
        corpus = gen_score_corpus(SynthSpec(k=9, n_per_class=6, seed=0, noise=0.0))
        means = class_means(corpus, "pitch_entropy_r")
        assert all(a < b for a, b in zip(means, means[1:]))

    def test_monotone_descriptors_at_default_noise(self):
        corpus = gen_score_corpus(SynthSpec(k=9, n_per_class=8, seed=0))
        for column, direction in [
            ("pitch_entropy_r", 1),
            ("pitch_entropy_l", 1),
            ("pitch_range_r", 1),
            ("pitch_set_lz_r", 1),
            ("displacement_rate_r", 1),
            ("average_ioi_r", -1),
        ]:
            means = class_means(corpus, column)
            rho = spearman(means)
            assert direction * rho >= 0.9, f"{column}: spearman {rho}"

    def test_round_trips_through_canonical_json(self):
        corpus = gen_score_corpus(SynthSpec(k=4, n_per_class=3, seed=7))
        for piece in corpus.pieces:
            assert parse_canonical_json(serialize_canonical_json(piece)) == piece
