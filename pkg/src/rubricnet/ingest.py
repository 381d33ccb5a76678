"""Parsing of score documents into pieces and labeled corpus management.

The canonical interchange format is a JSON document with exact rational
onsets; MusicXML support covers a practical subset of uncompressed
partwise scores (two hand streams, first tempo marking, tie merging,
grace notes skipped, repeats ignored).
"""

import csv
import hashlib
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import partial
from pathlib import Path

import numpy as np

from .errors import CorpusLoadError, ScoreParseError, UnsupportedLayoutError
from .score import (
    ONSET_DENOMINATOR_LIMIT,
    Hand,
    HandPart,
    NoteEvent,
    Piece,
    Pitch,
)
from .util import parallel_map

_STEP_SEMITONES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}

SCORE_SUFFIXES = (".json", ".musicxml", ".xml")


# ---------------------------------------------------------------------------
# Canonical JSON


def _parse_beats(value, field: str) -> Fraction:
    if isinstance(value, (list, tuple)):
        if len(value) != 2 or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise ScoreParseError(f"{field}: expected [numerator, denominator]", field)
        num, den = value
        if den <= 0:
            raise ScoreParseError(f"{field}: denominator must be positive", field)
        return Fraction(num, den).limit_denominator(ONSET_DENOMINATOR_LIMIT)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Fraction(value).limit_denominator(ONSET_DENOMINATOR_LIMIT)
    raise ScoreParseError(f"{field}: expected a rational time value", field)


def _parse_note(doc, field: str) -> NoteEvent:
    if not isinstance(doc, dict):
        raise ScoreParseError(f"{field}: expected an object", field)
    try:
        midi = doc["pitch"]
    except KeyError:
        raise ScoreParseError(f"{field}.pitch: missing", f"{field}.pitch") from None
    if not isinstance(midi, int) or isinstance(midi, bool) or not 0 <= midi <= 127:
        raise ScoreParseError(f"{field}.pitch: pitch out of range: {midi!r}", f"{field}.pitch")
    onset = _parse_beats(doc.get("onset_beats"), f"{field}.onset_beats")
    duration = _parse_beats(doc.get("duration_beats"), f"{field}.duration_beats")
    if onset < 0:
        raise ScoreParseError(f"{field}.onset_beats: negative onset", f"{field}.onset_beats")
    if duration <= 0:
        raise ScoreParseError(
            f"{field}.duration_beats: duration must be positive", f"{field}.duration_beats"
        )
    return NoteEvent(Pitch(midi), onset, duration)


def parse_canonical_json(data: bytes) -> Piece:
    """Parse canonical piece JSON; errors name the offending field."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ScoreParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScoreParseError("top level must be an object")
    piece_id = doc.get("id")
    if not isinstance(piece_id, str) or not piece_id:
        raise ScoreParseError("id: must be a non-empty string", "id")
    parts = doc.get("parts")
    if not isinstance(parts, dict):
        raise ScoreParseError("parts: missing or not an object", "parts")
    hands = {}
    for hand in (Hand.RIGHT, Hand.LEFT):
        notes_doc = parts.get(hand.value)
        if not isinstance(notes_doc, list):
            raise ScoreParseError(f"parts.{hand.value}: missing hand", f"parts.{hand.value}")
        notes = [
            _parse_note(n, f"parts.{hand.value}[{i}]") for i, n in enumerate(notes_doc)
        ]
        hands[hand] = HandPart(hand, tuple(notes))
    tempo = doc.get("tempo_bpm")
    if tempo is not None and (
        isinstance(tempo, bool) or not isinstance(tempo, (int, float)) or tempo <= 0
    ):
        raise ScoreParseError(f"tempo_bpm: must be a positive number, got {tempo!r}", "tempo_bpm")
    label = doc.get("label")
    if label is not None and (isinstance(label, bool) or not isinstance(label, int) or label < 1):
        raise ScoreParseError(f"label: must be a positive integer, got {label!r}", "label")
    return Piece(
        id=piece_id,
        right=hands[Hand.RIGHT],
        left=hands[Hand.LEFT],
        tempo_bpm=tempo,
        label=label,
    )


def serialize_canonical_json(piece: Piece) -> bytes:
    """Serialize a piece so that parsing the bytes reproduces it exactly."""

    def notes_doc(part: HandPart) -> list[dict]:
        return [
            {
                "pitch": n.pitch.midi,
                "onset_beats": [n.onset_beats.numerator, n.onset_beats.denominator],
                "duration_beats": [n.duration_beats.numerator, n.duration_beats.denominator],
            }
            for n in part.notes
        ]

    doc: dict = {"id": piece.id}
    if piece.tempo_bpm is not None:
        doc["tempo_bpm"] = piece.tempo_bpm
    if piece.label is not None:
        doc["label"] = piece.label
    doc["parts"] = {
        "right": notes_doc(piece.right),
        "left": notes_doc(piece.left),
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# MusicXML (restricted, uncompressed partwise)


def _note_midi(note: ET.Element, where: str) -> int:
    pitch = note.find("pitch")
    if pitch is None:
        raise ScoreParseError(f"{where}: note without pitch or rest", where)
    step = pitch.findtext("step")
    octave = pitch.findtext("octave")
    if step not in _STEP_SEMITONES or octave is None:
        raise ScoreParseError(f"{where}: unparseable pitch", where)
    try:
        alter = int(float(pitch.findtext("alter", "0")))
        midi = (int(octave) + 1) * 12 + _STEP_SEMITONES[step] + alter
    except ValueError as exc:
        raise ScoreParseError(f"{where}: unparseable pitch: {exc}", where) from exc
    if not 0 <= midi <= 127:
        raise ScoreParseError(f"{where}: pitch out of range: {midi}", where)
    return midi


def _first_tempo(measure: ET.Element) -> float | None:
    # Prefer explicit sound@tempo (already quarter-notes per minute); fall
    # back to a metronome marking scaled by its beat unit.
    for sound in measure.iter("sound"):
        tempo = sound.get("tempo")
        if tempo is not None:
            try:
                value = float(tempo)
            except ValueError:
                continue
            if value > 0:
                return value
    unit_quarters = {
        "whole": 4.0,
        "half": 2.0,
        "quarter": 1.0,
        "eighth": 0.5,
        "16th": 0.25,
        "32nd": 0.125,
    }
    for metronome in measure.iter("metronome"):
        per_minute = metronome.findtext("per-minute")
        if per_minute is None:
            continue
        try:
            value = float(per_minute)
        except ValueError:
            continue
        quarters = unit_quarters.get(metronome.findtext("beat-unit", "quarter"), 1.0)
        if metronome.find("beat-unit-dot") is not None:
            quarters *= 1.5
        if value > 0:
            return value * quarters
    return None


class _StreamState:
    """Note accumulation for one hand stream, with tie merging."""

    def __init__(self):
        self.notes: list[dict] = []
        self.open_ties: dict[int, int] = {}

    def add(self, midi: int, onset: Fraction, duration: Fraction, *, tie_start: bool, tie_stop: bool):
        if tie_stop and midi in self.open_ties:
            merged = self.notes[self.open_ties[midi]]
            merged["duration"] += duration
            if not tie_start:
                del self.open_ties[midi]
            return
        self.notes.append({"midi": midi, "onset": onset, "duration": duration})
        if tie_start:
            self.open_ties[midi] = len(self.notes) - 1

    def to_events(self) -> tuple[NoteEvent, ...]:
        return tuple(
            NoteEvent(
                Pitch(n["midi"]),
                n["onset"].limit_denominator(ONSET_DENOMINATOR_LIMIT),
                n["duration"].limit_denominator(ONSET_DENOMINATOR_LIMIT),
            )
            for n in self.notes
        )


def _parse_part(part: ET.Element, part_index: int) -> tuple[dict[int, _StreamState], float | None]:
    """Walk one <part>, returning per-staff streams and the first tempo seen."""
    streams: dict[int, _StreamState] = {}
    divisions: int | None = None
    position = Fraction(0)
    last_onset = Fraction(0)
    tempo: float | None = None

    for m_index, measure in enumerate(part.findall("measure")):
        if tempo is None:
            tempo = _first_tempo(measure)
        for element in measure:
            where = f"part {part_index + 1}, measure {m_index + 1}"
            if element.tag == "attributes":
                div_text = element.findtext("divisions")
                if div_text is not None:
                    try:
                        divisions = int(div_text)
                    except ValueError as exc:
                        raise ScoreParseError(f"{where}: unparseable divisions", where) from exc
                    if divisions <= 0:
                        raise ScoreParseError(f"{where}: divisions must be positive", where)
            elif element.tag in ("backup", "forward"):
                dur_text = element.findtext("duration")
                if dur_text is None or divisions is None:
                    raise ScoreParseError(f"{where}: {element.tag} without duration", where)
                delta = Fraction(int(dur_text), divisions)
                position = position - delta if element.tag == "backup" else position + delta
            elif element.tag == "note":
                if element.find("grace") is not None:
                    continue
                dur_text = element.findtext("duration")
                if dur_text is None:
                    raise ScoreParseError(f"{where}: note without duration", where)
                if divisions is None:
                    raise ScoreParseError(f"{where}: note before divisions", where)
                duration = Fraction(int(dur_text), divisions)
                is_chord = element.find("chord") is not None
                onset = last_onset if is_chord else position
                if element.find("rest") is not None:
                    position = onset + duration
                    continue
                midi = _note_midi(element, where)
                try:
                    staff = int(element.findtext("staff", "1"))
                except ValueError as exc:
                    raise ScoreParseError(f"{where}: unparseable staff", where) from exc
                tie_types = {tie.get("type") for tie in element.findall("tie")}
                if not tie_types:
                    notations = element.find("notations")
                    if notations is not None:
                        tie_types = {t.get("type") for t in notations.findall("tied")}
                stream = streams.setdefault(staff, _StreamState())
                stream.add(
                    midi,
                    onset,
                    duration,
                    tie_start="start" in tie_types,
                    tie_stop="stop" in tie_types,
                )
                last_onset = onset
                if not is_chord:
                    position = onset + duration
    return streams, tempo


def parse_musicxml(data: bytes, piece_id: str = "score") -> Piece:
    """Parse uncompressed partwise MusicXML into a two-hand piece.

    Hand assignment: a single part with two staves maps staff 1 to the
    right hand and staff 2 to the left; otherwise the first two parts map
    to right and left respectively.  Any other layout is rejected.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise ScoreParseError(f"malformed MusicXML: {exc}") from exc
    if root.tag != "score-partwise":
        raise ScoreParseError(f"expected a partwise score, got <{root.tag}>")

    parts = root.findall("part")
    if not parts:
        raise UnsupportedLayoutError("score has no parts")

    tempo: float | None = None
    part_streams: list[list[_StreamState]] = []
    for index, part in enumerate(parts):
        streams, part_tempo = _parse_part(part, index)
        if tempo is None:
            tempo = part_tempo
        ordered = [streams[s] for s in sorted(streams) if streams[s].notes]
        part_streams.append(ordered)

    flat = [stream for streams in part_streams for stream in streams]
    if len(flat) != 2:
        raise UnsupportedLayoutError(
            f"expected exactly 2 hand streams, found {len(flat)}"
        )
    right_stream, left_stream = flat
    return Piece(
        id=piece_id,
        right=HandPart(Hand.RIGHT, right_stream.to_events()),
        left=HandPart(Hand.LEFT, left_stream.to_events()),
        tempo_bpm=tempo,
    )


# ---------------------------------------------------------------------------
# Piece files and corpora


def load_piece_file(path, cache_dir=None) -> Piece:
    """Load one score file by extension, with an optional parsed-score cache.

    The cache stores canonical JSON keyed by the SHA-256 of the raw input;
    it only pays off for MusicXML sources.
    """
    path = Path(path)
    data = path.read_bytes()
    if path.suffix == ".json":
        return parse_canonical_json(data)
    if path.suffix not in SCORE_SUFFIXES:
        raise ScoreParseError(f"{path.name}: unsupported score file type")
    if cache_dir is not None:
        cache_path = Path(cache_dir) / (hashlib.sha256(data).hexdigest() + ".json")
        if cache_path.exists():
            return parse_canonical_json(cache_path.read_bytes())
        piece = parse_musicxml(data, piece_id=path.stem)
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        cache_path.write_bytes(serialize_canonical_json(piece))
        return piece
    return parse_musicxml(data, piece_id=path.stem)


@dataclass(frozen=True)
class Corpus:
    """Labeled pieces under one grading scale, with optional fold assignments."""

    pieces: tuple[Piece, ...]
    k: int
    folds: dict[str, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        ids = [p.id for p in self.pieces]
        if len(set(ids)) != len(ids):
            raise CorpusLoadError("duplicate piece ids in corpus")
        if self.k < 2:
            raise CorpusLoadError(f"grading scale size {self.k} must be >= 2")
        for piece in self.pieces:
            if piece.label is not None and not 1 <= piece.label <= self.k:
                raise CorpusLoadError(
                    f"piece {piece.id!r} has level {piece.label} outside [1, {self.k}]"
                )
        if self.folds is not None:
            missing = set(ids) - set(self.folds)
            if missing:
                raise CorpusLoadError(f"pieces without fold assignment: {sorted(missing)[:3]}")

    def __len__(self) -> int:
        return len(self.pieces)

    def piece_by_id(self, piece_id: str) -> Piece:
        for piece in self.pieces:
            if piece.id == piece_id:
                return piece
        raise KeyError(piece_id)


def assign_folds(corpus: Corpus, seed: int = 0, n_folds: int = 5) -> Corpus:
    """Deterministic stratified fold assignment.

    Within each class, pieces are taken in sorted-id order and dealt round
    robin into folds; the seed only rotates each class's starting fold, so
    per-class fold sizes always differ by at most one.
    """
    by_class: dict[int, list[str]] = {}
    for piece in corpus.pieces:
        if piece.label is None:
            raise CorpusLoadError(f"piece {piece.id!r} has no label; cannot stratify")
        by_class.setdefault(piece.label, []).append(piece.id)
    rng = np.random.default_rng(seed)
    folds: dict[str, int] = {}
    for level in sorted(by_class):
        offset = int(rng.integers(0, n_folds))
        for i, piece_id in enumerate(sorted(by_class[level])):
            folds[piece_id] = (offset + i) % n_folds
    return replace(corpus, folds=folds)


def read_labels_csv(path) -> list[tuple[str, int, int | None]]:
    """Rows of (id, level, fold-or-None) from a labels CSV."""
    path = Path(path)
    if not path.exists():
        raise CorpusLoadError(f"labels file not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["id", "level"]:
            raise CorpusLoadError(f"labels file must start with header id,level: {path}")
        has_fold = len(header) >= 3 and header[2].strip() == "fold"
        for lineno, record in enumerate(reader, start=2):
            if not record or not record[0]:
                continue
            try:
                level = int(record[1])
            except (IndexError, ValueError):
                raise CorpusLoadError(f"{path}:{lineno}: unparseable level") from None
            fold = None
            if has_fold and len(record) >= 3 and record[2] != "":
                try:
                    fold = int(record[2])
                except ValueError:
                    raise CorpusLoadError(f"{path}:{lineno}: unparseable fold") from None
            rows.append((record[0], level, fold))
    if not rows:
        raise CorpusLoadError(f"labels file has no rows: {path}")
    return rows


def _load_labeled_piece(item: tuple[Path, int], cache_dir=None) -> Piece:
    path, level = item
    piece = load_piece_file(path, cache_dir=cache_dir)
    return replace(piece, label=level)


def load_corpus(
    score_dir,
    labels_file,
    k: int | None = None,
    seed: int = 0,
    cache_dir=None,
    jobs: int = 1,
) -> Corpus:
    """Parse every labeled piece and attach folds.

    Each labels row must match a score file ``<id>.json``/``.musicxml``/
    ``.xml`` under ``score_dir``.  When the fold column is absent, folds are
    assigned deterministically (stratified round robin, seeded rotation).
    ``k`` defaults to the highest level present.
    """
    score_dir = Path(score_dir)
    if not score_dir.is_dir():
        raise CorpusLoadError(f"score directory not found: {score_dir}")
    rows = read_labels_csv(labels_file)
    ids = [r[0] for r in rows]
    if len(set(ids)) != len(ids):
        raise CorpusLoadError("duplicate piece id in labels file")

    levels = [r[1] for r in rows]
    k = k if k is not None else max(levels)
    if min(levels) < 1 or max(levels) > k:
        raise CorpusLoadError(f"labels outside [1, {k}]")

    jobs_items = []
    for piece_id, level, _fold in rows:
        for suffix in SCORE_SUFFIXES:
            candidate = score_dir / f"{piece_id}{suffix}"
            if candidate.exists():
                jobs_items.append((candidate, level))
                break
        else:
            raise CorpusLoadError(f"no score file for id {piece_id!r} in {score_dir}")

    loader = partial(_load_labeled_piece, cache_dir=cache_dir)
    pieces = parallel_map(loader, jobs_items, jobs=jobs)
    pieces = sorted(pieces, key=lambda p: p.id)

    for piece, (piece_id, _level, _fold) in zip(pieces, sorted(rows, key=lambda r: r[0])):
        if piece.id != piece_id:
            raise CorpusLoadError(
                f"score file for {piece_id!r} declares id {piece.id!r}"
            )

    fold_values = [r[2] for r in rows]
    if all(f is not None for f in fold_values):
        folds = {r[0]: r[2] for r in rows}
        bad = {pid: f for pid, f in folds.items() if not 0 <= f <= 4}
        if bad:
            raise CorpusLoadError(f"fold indices outside [0, 4]: {bad}")
        return Corpus(tuple(pieces), k=k, folds=folds)
    if any(f is not None for f in fold_values):
        raise CorpusLoadError("labels file has a partial fold column")
    return assign_folds(Corpus(tuple(pieces), k=k, folds=None), seed=seed)
