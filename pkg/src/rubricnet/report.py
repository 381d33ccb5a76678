"""Rubric reports: per-descriptor scores, divergence, aggregate, boundaries.

A report renders the scorer's view of one piece the way a marking rubric
would: one row per descriptor with its raw value, normalized score, and
divergence from the grade's training mean, plus the aggregated score on a
0-12 scale with the level boundaries placed on the same axis.
"""

import html as html_lib
import json
from dataclasses import dataclass

from .analysis import GradeStatistics, grade_divergence
from .descriptors import FEATURE_COLUMNS, FEATURE_LABELS, extract_features
from .errors import AnalysisError
from .model import (
    ORDINAL_HEAD,
    ModelParams,
    decision_boundaries,
    decode,
    forward,
    normalize_scores,
    rescale_aggregate,
)
from .score import Piece

REPORT_VERSION = 1


@dataclass(frozen=True)
class DescriptorRow:
    name: str
    raw_value: float
    normalized_score: float
    grade_divergence: float


@dataclass(frozen=True)
class RubricReport:
    """Everything needed to explain one prediction."""

    piece_id: str
    k: int
    rows: tuple[DescriptorRow, ...]
    aggregated_score: float
    predicted_level: int
    label: int | None
    divergence_grade: int
    divergence_uses_prediction: bool
    boundaries: tuple[float | None, ...]
    tempo_assumed: bool
    all_below_grade_average: bool


def build_report(params: ModelParams, piece: Piece, stats: GradeStatistics) -> RubricReport:
    """Extract features, run the scorer, and assemble the rubric."""
    if params.head != ORDINAL_HEAD:
        raise AnalysisError("rubric reports require the cumulative head")
    fv = extract_features(piece)
    trace = forward(params, fv)
    normalized = normalize_scores(trace.scores)
    predicted = decode(trace.probs)
    divergence = grade_divergence(params, fv.as_array(), piece.label, stats)
    rows = tuple(
        DescriptorRow(
            name=FEATURE_COLUMNS[i],
            raw_value=float(fv.values[i]),
            normalized_score=float(normalized[i]),
            grade_divergence=float(divergence.values[i]),
        )
        for i in range(len(FEATURE_COLUMNS))
    )
    boundaries = tuple(
        None if b is None else rescale_aggregate(b) for b in decision_boundaries(params)
    )
    return RubricReport(
        piece_id=piece.id,
        k=params.k,
        rows=rows,
        aggregated_score=rescale_aggregate(trace.s_agg),
        predicted_level=predicted,
        label=piece.label,
        divergence_grade=divergence.grade,
        divergence_uses_prediction=divergence.used_prediction,
        boundaries=boundaries,
        tempo_assumed=fv.tempo_assumed,
        all_below_grade_average=bool(all(r.grade_divergence < 0 for r in rows)),
    )


def _to_json_dict(report: RubricReport) -> dict:
    return {
        "version": REPORT_VERSION,
        "piece_id": report.piece_id,
        "K": report.k,
        "aggregated_score": report.aggregated_score,
        "predicted_level": report.predicted_level,
        "label": report.label,
        "divergence_grade": report.divergence_grade,
        "divergence_uses_prediction": report.divergence_uses_prediction,
        "boundaries": list(report.boundaries),
        "tempo_assumed": report.tempo_assumed,
        "all_below_grade_average": report.all_below_grade_average,
        "descriptors": [
            {
                "name": r.name,
                "raw_value": r.raw_value,
                "normalized_score": r.normalized_score,
                "grade_divergence": r.grade_divergence,
            }
            for r in report.rows
        ],
    }


def report_from_json(data: bytes) -> RubricReport:
    """Inverse of the JSON renderer."""
    doc = json.loads(data.decode("utf-8"))
    rows = tuple(
        DescriptorRow(
            name=r["name"],
            raw_value=r["raw_value"],
            normalized_score=r["normalized_score"],
            grade_divergence=r["grade_divergence"],
        )
        for r in doc["descriptors"]
    )
    return RubricReport(
        piece_id=doc["piece_id"],
        k=doc["K"],
        rows=rows,
        aggregated_score=doc["aggregated_score"],
        predicted_level=doc["predicted_level"],
        label=doc["label"],
        divergence_grade=doc["divergence_grade"],
        divergence_uses_prediction=doc["divergence_uses_prediction"],
        boundaries=tuple(doc["boundaries"]),
        tempo_assumed=doc["tempo_assumed"],
        all_below_grade_average=doc["all_below_grade_average"],
    )


_DISPLAY = dict(zip(FEATURE_COLUMNS, FEATURE_LABELS))


def _render_markdown(report: RubricReport) -> str:
    lines = [f"# Rubric for {report.piece_id}", ""]
    lines.append(f"- Predicted level: **{report.predicted_level}** of {report.k}")
    if report.label is not None:
        lines.append(f"- Labeled level: {report.label}")
    lines.append(f"- Aggregated score: {report.aggregated_score:.3f} on the 0-12 scale")
    reachable = [b for b in report.boundaries if b is not None]
    if reachable:
        lines.append(
            "- Level boundaries (0-12 scale): "
            + ", ".join(f"{b:.3f}" for b in reachable)
        )
    if None in report.boundaries:
        skipped = [i + 2 for i, b in enumerate(report.boundaries) if b is None]
        lines.append(f"- Unreachable levels: {', '.join(str(s) for s in skipped)}")
    grade_source = "predicted" if report.divergence_uses_prediction else "labeled"
    lines.append(f"- Grade divergence relative to {grade_source} grade {report.divergence_grade}")
    if report.tempo_assumed:
        lines.append("- Tempo missing from the score; timing uses the 100 bpm fallback")
    if report.all_below_grade_average:
        lines.append("- Note: all descriptors are below the grade average")
    lines.append("")
    lines.append("| Descriptor | Value | Score (0-1) | Grade divergence |")
    lines.append("| --- | ---: | ---: | ---: |")
    for row in report.rows:
        lines.append(
            f"| {_DISPLAY[row.name]} | {row.raw_value:.4f} "
            f"| {row.normalized_score:.4f} | {row.grade_divergence:+.4f} |"
        )
    return "\n".join(lines) + "\n"


def _render_html(report: RubricReport) -> str:
    esc = html_lib.escape
    width, height, pad = 480, 46, 10
    scale = (width - 2 * pad) / 12.0

    def x_pos(value: float) -> float:
        return pad + max(0.0, min(12.0, value)) * scale

    ticks = []
    for boundary in report.boundaries:
        if boundary is None:
            continue
        x = x_pos(boundary)
        ticks.append(
            f'<line class="boundary-tick" x1="{x:.1f}" y1="8" x2="{x:.1f}" y2="30" '
            'stroke="#555" stroke-width="1.5"/>'
        )
    marker_x = x_pos(report.aggregated_score)
    axis = (
        f'<svg class="aggregate-scale" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
        f'<line x1="{pad}" y1="19" x2="{width - pad}" y2="19" stroke="#000"/>'
        + "".join(ticks)
        + f'<circle class="aggregate-marker" cx="{marker_x:.1f}" cy="19" r="5" fill="#c33"/>'
        f'<text x="{pad}" y="{height - 4}" font-size="10">0</text>'
        f'<text x="{width - pad - 8}" y="{height - 4}" font-size="10">12</text>'
        "</svg>"
    )

    rows_html = "".join(
        "<tr>"
        f"<td>{esc(_DISPLAY[row.name])}</td>"
        f"<td>{row.raw_value:.4f}</td>"
        f"<td>{row.normalized_score:.4f}</td>"
        f"<td>{row.grade_divergence:+.4f}</td>"
        "</tr>"
        for row in report.rows
    )
    label_html = "" if report.label is None else f" (labeled {report.label})"
    notes = []
    if report.tempo_assumed:
        notes.append("Tempo missing from the score; timing uses the 100 bpm fallback.")
    if report.all_below_grade_average:
        notes.append("All descriptors are below the grade average.")
    notes_html = "".join(f"<p class='note'>{esc(n)}</p>" for n in notes)
    return (
        "<!DOCTYPE html>\n"
        "<html><head><meta charset='utf-8'>"
        f"<title>Rubric for {esc(report.piece_id)}</title>"
        "<style>body{font-family:sans-serif;margin:2em}"
        "table{border-collapse:collapse}td,th{border:1px solid #999;padding:4px 8px}"
        ".note{color:#a33}</style></head><body>"
        f"<h1>Rubric for {esc(report.piece_id)}</h1>"
        f"<p>Predicted level <strong>{report.predicted_level}</strong> of {report.k}"
        f"{label_html}; aggregated score {report.aggregated_score:.3f} on the 0-12 scale.</p>"
        + axis
        + notes_html
        + "<table><thead><tr><th>Descriptor</th><th>Value</th>"
        "<th>Score (0-1)</th><th>Grade divergence</th></tr></thead>"
        f"<tbody>{rows_html}</tbody></table>"
        "</body></html>\n"
    )


def render(report: RubricReport, fmt: str = "json") -> bytes:
    """Render a report as machine-diffable JSON, markdown, or static HTML."""
    if fmt == "json":
        return (json.dumps(_to_json_dict(report), indent=2, sort_keys=True) + "\n").encode()
    if fmt == "markdown":
        return _render_markdown(report).encode()
    if fmt == "html":
        return _render_html(report).encode()
    raise ValueError(f"unknown report format {fmt!r}")
