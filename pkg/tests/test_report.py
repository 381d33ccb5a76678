import json

import numpy as np
import pytest

from rubricnet import (
    AnalysisError,
    ModelParams,
    Scaler,
    build_report,
    compute_grade_statistics,
    decode,
    extract_features,
    forward,
    gen_score_corpus,
    render,
    report_from_json,
    rescale_aggregate,
)
from rubricnet.synth import SynthSpec


@pytest.fixture(scope="module")
def setup():
    corpus = gen_score_corpus(SynthSpec(k=3, n_per_class=8, seed=0))
    features = np.asarray([extract_features(p).values for p in corpus.pieces])
    labels = np.asarray([p.label for p in corpus.pieces])
    scaler = Scaler(features.mean(axis=0), np.where(features.std(axis=0) == 0, 1, features.std(axis=0)))
    params = ModelParams(
        w=np.full(12, 0.4),
        b=np.zeros(12),
        w_f=np.array([1.2, 1.0]),
        b_f=np.array([1.0, -2.0]),
        k=3,
        scaler=scaler,
    )
    stats = compute_grade_statistics(params, features, labels)
    return corpus, params, stats


class TestBuildReport:
    def test_fields_consistent_with_model(self, setup):
        corpus, params, stats = setup
        for piece in corpus.pieces[:6]:
            report = build_report(params, piece, stats)
            fv = extract_features(piece)
            trace = forward(params, fv)
            assert report.aggregated_score == rescale_aggregate(trace.s_agg)
            assert 0.0 <= report.aggregated_score <= 12.0
            assert report.predicted_level == decode(trace.probs)
            assert report.label == piece.label
            assert len(report.rows) == 12
            assert report.divergence_uses_prediction is False

    def test_divergence_zero_for_grade_mean_like_piece(self, setup):
        corpus, params, stats = setup
        # A report on a piece whose normalized scores equal the grade mean
        # has zero divergence; verify via the statistics themselves.
        piece = corpus.pieces[0]
        report = build_report(params, piece, stats)
        from rubricnet import normalize_scores

        trace = forward(params, extract_features(piece))
        expected = normalize_scores(trace.scores) - stats.means[piece.label]
        got = [r.grade_divergence for r in report.rows]
        assert got == pytest.approx(expected, abs=1e-12)

    def test_all_below_average_flag(self, setup):
        corpus, params, stats = setup
        # Statistics built from inflated scores make every divergence
        # negative, and shifted boundaries push the prediction below the
        # label: the report must carry the "all below average" note.
        from rubricnet import GradeStatistics

        inflated = GradeStatistics(
            k=stats.k,
            means={g: np.minimum(m + 0.4, 1.0) for g, m in stats.means.items()},
            counts=stats.counts,
        )
        import dataclasses

        strict = dataclasses.replace(params, b_f=np.array([-30.0, -40.0]))
        piece = next(p for p in corpus.pieces if p.label == 3)
        report = build_report(strict, piece, inflated)
        assert report.all_below_grade_average is True
        assert report.predicted_level < report.label
        markdown = render(report, "markdown").decode()
        assert "below the grade average" in markdown

    def test_saturated_piece_scores_near_twelve(self, setup):
        corpus, params, stats = setup
        import dataclasses

        saturated = dataclasses.replace(params, b=np.full(12, 10.0))
        stats_sat = compute_grade_statistics(
            saturated,
            np.asarray([extract_features(p).values for p in corpus.pieces]),
            np.asarray([p.label for p in corpus.pieces]),
        )
        report = build_report(saturated, corpus.pieces[0], stats_sat)
        assert report.aggregated_score == pytest.approx(12.0, abs=1e-6)
        assert report.aggregated_score <= 12.0

    def test_one_hot_head_rejected(self, setup):
        corpus, params, stats = setup
        bad = ModelParams(
            w=params.w, b=params.b, w_f=np.ones(3), b_f=np.zeros(3),
            k=3, scaler=params.scaler, head="one_hot",
        )
        with pytest.raises(AnalysisError):
            build_report(bad, corpus.pieces[0], stats)


class TestRender:
    def test_json_round_trip(self, setup):
        corpus, params, stats = setup
        report = build_report(params, corpus.pieces[3], stats)
        again = report_from_json(render(report, "json"))
        assert again == report

    def test_json_is_sorted_and_stable(self, setup):
        corpus, params, stats = setup
        report = build_report(params, corpus.pieces[1], stats)
        assert render(report, "json") == render(report, "json")
        doc = json.loads(render(report, "json"))
        assert doc["piece_id"] == corpus.pieces[1].id

    def test_markdown_has_exactly_12_rows(self, setup):
        corpus, params, stats = setup
        report = build_report(params, corpus.pieces[2], stats)
        lines = render(report, "markdown").decode().splitlines()
        data_rows = [
            line for line in lines
            if line.startswith("|") and not line.startswith("| Descriptor")
            and not line.startswith("| ---")
        ]
        assert len(data_rows) == 12

    def test_html_axis_has_k_minus_1_ticks(self, setup):
        corpus, params, stats = setup
        report = build_report(params, corpus.pieces[4], stats)
        html = render(report, "html").decode()
        assert html.count("boundary-tick") == report.k - 1
        assert "aggregate-scale" in html
        assert "aggregate-marker" in html

    def test_unknown_format_rejected(self, setup):
        corpus, params, stats = setup
        report = build_report(params, corpus.pieces[0], stats)
        with pytest.raises(ValueError):
            render(report, "yaml")
