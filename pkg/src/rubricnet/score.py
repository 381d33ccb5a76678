"""Domain types for two-hand symbolic scores and their event sequences.

A piece holds one right-hand and one left-hand part of notes with exact
rational onsets (quarter-note units).  Descriptors consume two derived
views of a part: the flat list of pitch events, and the sequence of
pitch-set events, where notes sharing an onset form one set timed in
seconds.
"""

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .errors import EmptyPartError, InvalidTempoError

# Fallback applied when a score carries no tempo marking.
DEFAULT_TEMPO_BPM = 100.0

# Onsets and durations are quantized to rationals no finer than this
# denominator (per quarter note), so simultaneity is exact equality.
ONSET_DENOMINATOR_LIMIT = 960


class Hand(str, Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True, order=True)
class Pitch:
    """A MIDI note number in [0, 127]."""

    midi: int

    def __post_init__(self):
        if not 0 <= self.midi <= 127:
            raise ValueError(f"MIDI pitch {self.midi} outside [0, 127]")

    def __int__(self) -> int:
        return self.midi


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(ONSET_DENOMINATOR_LIMIT)
    raise TypeError(f"expected a rational time value, got {type(value).__name__}")


@dataclass(frozen=True)
class NoteEvent:
    """One note: ``pitch`` sounding from ``onset_beats`` for ``duration_beats``.

    Times are exact rationals in quarter-note units; floats passed in are
    quantized to a denominator of at most 960.
    """

    pitch: Pitch
    onset_beats: Fraction
    duration_beats: Fraction

    def __post_init__(self):
        object.__setattr__(self, "onset_beats", _as_fraction(self.onset_beats))
        object.__setattr__(self, "duration_beats", _as_fraction(self.duration_beats))
        if self.onset_beats < 0:
            raise ValueError(f"onset {self.onset_beats} must be >= 0")
        if self.duration_beats <= 0:
            raise ValueError(f"duration {self.duration_beats} must be > 0")


@dataclass(frozen=True)
class HandPart:
    """All notes played by one hand, kept sorted by (onset, pitch)."""

    hand: Hand
    notes: tuple[NoteEvent, ...] = ()

    def __post_init__(self):
        ordered = tuple(
            sorted(self.notes, key=lambda n: (n.onset_beats, n.pitch.midi))
        )
        object.__setattr__(self, "notes", ordered)

    def __len__(self) -> int:
        return len(self.notes)


@dataclass(frozen=True)
class DifficultyLabel:
    """A difficulty level together with the size ``k`` of its grading scale."""

    level: int
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"grading scale size {self.k} must be >= 2")
        if not 1 <= self.level <= self.k:
            raise ValueError(f"level {self.level} outside [1, {self.k}]")


@dataclass(frozen=True)
class Piece:
    """A two-hand score with an optional tempo marking and difficulty level.

    ``label`` is the bare level integer; the grading scale size lives on the
    corpus that owns the piece.
    """

    id: str
    right: HandPart
    left: HandPart
    tempo_bpm: float | None = None
    label: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("piece id must be non-empty")
        if self.right.hand is not Hand.RIGHT:
            raise ValueError("right part is not tagged as the right hand")
        if self.left.hand is not Hand.LEFT:
            raise ValueError("left part is not tagged as the left hand")
        if self.label is not None and self.label < 1:
            raise ValueError(f"difficulty level {self.label} must be >= 1")

    def part(self, hand: Hand) -> HandPart:
        return self.right if hand is Hand.RIGHT else self.left


@dataclass(frozen=True)
class PitchSetEvent:
    """The set of pitches attacked together at one onset, in seconds."""

    pitch_set: frozenset[Pitch]
    onset_seconds: float

    def __post_init__(self):
        object.__setattr__(self, "pitch_set", frozenset(self.pitch_set))
        if not self.pitch_set:
            raise ValueError("pitch set must be non-empty")
        if self.onset_seconds < 0:
            raise ValueError(f"onset {self.onset_seconds} s must be >= 0")


def resolve_tempo(piece: Piece) -> float:
    """Marked tempo when present, otherwise the 100 bpm fallback."""
    if piece.tempo_bpm is None:
        return DEFAULT_TEMPO_BPM
    if piece.tempo_bpm <= 0:
        raise InvalidTempoError(
            f"piece {piece.id!r}: tempo {piece.tempo_bpm} must be positive"
        )
    return float(piece.tempo_bpm)


def build_pitch_set_sequence(part: HandPart, bpm: float) -> list[PitchSetEvent]:
    """Group notes with equal rational onsets into pitch sets timed in seconds.

    Duplicate pitches within a group collapse (set semantics).  Onsets map to
    seconds as ``onset_beats * 60 / bpm``, so the output is strictly
    increasing in time.
    """
    if not part.notes:
        raise EmptyPartError(f"{part.hand.value} hand has no notes")
    seconds_per_beat = 60.0 / bpm
    events = []
    for onset, group in itertools.groupby(part.notes, key=lambda n: n.onset_beats):
        pitches = frozenset(n.pitch for n in group)
        events.append(PitchSetEvent(pitches, float(onset) * seconds_per_beat))
    return events


def pitch_event_sequence(part: HandPart) -> list[Pitch]:
    """One pitch per note occurrence, in part order; chord tones each count."""
    if not part.notes:
        raise EmptyPartError(f"{part.hand.value} hand has no notes")
    return [note.pitch for note in part.notes]
