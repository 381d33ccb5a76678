"""The six per-hand descriptors and the 12-slot feature vector.

Descriptors are computed per hand from either the pitch-event list
(entropy, range, average pitch) or the pitch-set-event sequence
(displacement rate, average inter-onset interval, phrase-dictionary
complexity).  ``extract_features`` assembles the fixed 12-slot vector,
right-hand slot before left-hand slot for each descriptor.
"""

import csv
import math
import warnings
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePartWarning, EmptyPartError
from .score import (
    Hand,
    Piece,
    Pitch,
    PitchSetEvent,
    build_pitch_set_sequence,
    pitch_event_sequence,
    resolve_tempo,
)
from .util import parallel_map

FEATURE_COLUMNS = (
    "pitch_entropy_r",
    "pitch_entropy_l",
    "pitch_range_r",
    "pitch_range_l",
    "average_pitch_r",
    "average_pitch_l",
    "displacement_rate_r",
    "displacement_rate_l",
    "average_ioi_r",
    "average_ioi_l",
    "pitch_set_lz_r",
    "pitch_set_lz_l",
)

FEATURE_LABELS = (
    "Pitch Entropy (R)",
    "Pitch Entropy (L)",
    "Pitch Range (R)",
    "Pitch Range (L)",
    "Average Pitch (R)",
    "Average Pitch (L)",
    "Displacement Rate (R)",
    "Displacement Rate (L)",
    "Average IOI (R)",
    "Average IOI (L)",
    "Pitch Set LZ (R)",
    "Pitch Set LZ (L)",
)

N_FEATURES = len(FEATURE_COLUMNS)


@dataclass(frozen=True)
class FeatureVector:
    """The 12 descriptor values for one piece, in the fixed slot order."""

    values: tuple[float, ...]
    tempo_assumed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} values, got {len(self.values)}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("feature values must be finite")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def value(self, column: str) -> float:
        return self.values[FEATURE_COLUMNS.index(column)]


def pitch_entropy(pitches: Sequence[Pitch]) -> float:
    """Base-2 Shannon entropy of the empirical pitch distribution."""
    if not pitches:
        raise EmptyPartError("pitch entropy needs at least one pitch event")
    counts = Counter(p.midi for p in pitches)
    n = len(pitches)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


def pitch_range(pitches: Sequence[Pitch]) -> float:
    """Distance in semitones between the lowest and highest pitch."""
    if not pitches:
        raise EmptyPartError("pitch range needs at least one pitch event")
    midis = [p.midi for p in pitches]
    return float(max(midis) - min(midis))


def average_pitch(pitches: Sequence[Pitch]) -> float:
    """Arithmetic mean of the MIDI numbers."""
    if not pitches:
        raise EmptyPartError("average pitch needs at least one pitch event")
    return sum(p.midi for p in pitches) / len(pitches)


def _interval_weight(distance: int) -> int:
    # Movement under 7 semitones is free, under an octave costs 1, else 2.
    if distance < 7:
        return 0
    if distance < 12:
        return 1
    return 2


def displacement_rate(events: Sequence[PitchSetEvent]) -> float:
    """Weighted average of maximum distances between consecutive pitch sets.

    The distance of a pair is the largest absolute semitone difference over
    all pitch combinations, weighted 0 / 1 / 2 for distances below 7, in
    [7, 12), and 12 or more.  Parts with fewer than two events yield 0.0
    and a :class:`DegeneratePartWarning`.
    """
    if len(events) < 2:
        warnings.warn(
            DegeneratePartWarning(
                "displacement rate needs two events; returning 0.0"
            ),
            stacklevel=2,
        )
        return 0.0
    bounds = [(min(e.pitch_set).midi, max(e.pitch_set).midi) for e in events]
    total = 0
    for (lo_a, hi_a), (lo_b, hi_b) in zip(bounds, bounds[1:]):
        distance = max(abs(hi_a - lo_b), abs(hi_b - lo_a))
        total += _interval_weight(distance)
    return total / (len(events) - 1)


def average_ioi(events: Sequence[PitchSetEvent]) -> float:
    """Mean time in seconds between consecutive onsets."""
    if len(events) < 2:
        warnings.warn(
            DegeneratePartWarning(
                "average inter-onset interval needs two events; returning 0.0"
            ),
            stacklevel=2,
        )
        return 0.0
    return (events[-1].onset_seconds - events[0].onset_seconds) / (len(events) - 1)


def pitch_set_lz(events: Sequence[PitchSetEvent]) -> int:
    """Phrase count of the incremental-dictionary parse of the set sequence.

    Each distinct pitch set is one symbol.  The current phrase grows while
    it still equals a dictionary entry; once extending it produces a new
    string, that string joins the dictionary and a fresh phrase starts.  An
    unfinished final phrase counts as one phrase.
    """
    if not events:
        raise EmptyPartError("sequence complexity needs at least one event")
    symbols: dict[frozenset, int] = {}
    sequence = [symbols.setdefault(e.pitch_set, len(symbols)) for e in events]

    # Dictionary held as a trie: (node, symbol) -> node, root node 0.
    trie: dict[tuple[int, int], int] = {}
    next_node = 1
    phrases = 0
    node = 0
    for symbol in sequence:
        key = (node, symbol)
        if key in trie:
            node = trie[key]
        else:
            trie[key] = next_node
            next_node += 1
            phrases += 1
            node = 0
    if node != 0:
        phrases += 1
    return phrases


def extract_features(piece: Piece) -> FeatureVector:
    """Compute the 12-slot feature vector for a piece.

    The tempo fallback is recorded in ``tempo_assumed`` so downstream
    consumers can tell when the timing-based slots rest on the default.
    """
    bpm = resolve_tempo(piece)
    per_hand = {}
    for hand in (Hand.RIGHT, Hand.LEFT):
        part = piece.part(hand)
        if not part.notes:
            raise EmptyPartError(f"piece {piece.id!r}: {hand.value} hand is empty")
        pitches = pitch_event_sequence(part)
        events = build_pitch_set_sequence(part, bpm)
        per_hand[hand] = (
            pitch_entropy(pitches),
            pitch_range(pitches),
            average_pitch(pitches),
            displacement_rate(events),
            average_ioi(events),
            float(pitch_set_lz(events)),
        )
    values = []
    for i in range(6):
        values.append(per_hand[Hand.RIGHT][i])
        values.append(per_hand[Hand.LEFT][i])
    return FeatureVector(tuple(values), tempo_assumed=piece.tempo_bpm is None)


def extract_features_many(pieces: Sequence[Piece], jobs: int = 1) -> list[FeatureVector]:
    """Extract features for many pieces, optionally across worker processes."""
    return parallel_map(extract_features, list(pieces), jobs=jobs)


_CSV_HEADER = ("id", "label", *FEATURE_COLUMNS, "tempo_assumed")


def write_feature_table(path, rows: Sequence[tuple[str, int | None, FeatureVector]]) -> None:
    """Write the feature table CSV: id, label, the 12 columns, tempo flag."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for piece_id, label, fv in rows:
            writer.writerow(
                [
                    piece_id,
                    "" if label is None else label,
                    *[repr(v) for v in fv.values],
                    "true" if fv.tempo_assumed else "false",
                ]
            )


def read_feature_table(path) -> list[tuple[str, int | None, FeatureVector]]:
    """Read a feature table CSV written by :func:`write_feature_table`."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != _CSV_HEADER:
            raise ValueError(f"unexpected feature table header in {path}")
        for record in reader:
            piece_id = record[0]
            label = int(record[1]) if record[1] else None
            values = tuple(float(v) for v in record[2:2 + N_FEATURES])
            tempo_assumed = record[2 + N_FEATURES] == "true"
            rows.append((piece_id, label, FeatureVector(values, tempo_assumed)))
    return rows


def feature_matrix(
    rows: Sequence[tuple[str, int | None, FeatureVector]],
) -> tuple[list[str], np.ndarray | None, np.ndarray]:
    """Split table rows into ids, a label vector (None if any missing), and X."""
    ids = [r[0] for r in rows]
    x = np.asarray([r[2].values for r in rows], dtype=float)
    labels = [r[1] for r in rows]
    y = None
    if all(lbl is not None for lbl in labels) and labels:
        y = np.asarray(labels, dtype=int)
    return ids, y, x
