"""Deterministic synthetic corpora for tests and end-to-end pipelines.

Two generators: one emits labeled feature vectors directly (class means
grow linearly with the level), the other builds full two-hand pieces from
random walks whose span, leap frequency, chord density, and note rate all
grow with the level, so the extracted descriptors trend monotonically with
difficulty.  Everything is a pure function of the seed.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .descriptors import N_FEATURES
from .ingest import Corpus
from .score import Hand, HandPart, NoteEvent, Piece, Pitch

FEATURE_LEVEL = "feature_level"
SCORE_LEVEL = "score_level"

# Per-slot class increment for the feature-level generator, in slot order:
# entropy, range, average pitch, displacement, inter-onset interval, and
# sequence complexity (right then left each).  The interval slot shrinks
# with difficulty, matching its real-world direction.
FEATURE_SLOPES = np.array(
    [0.5, 0.5, 3.0, 3.0, 1.5, 1.5, 0.15, 0.15, -0.25, -0.25, 6.0, 6.0]
)

SYNTH_TEMPO_BPM = 120.0


@dataclass(frozen=True)
class SynthSpec:
    """Shape of a synthetic dataset; identical specs yield identical data."""

    k: int
    n_per_class: int
    seed: int = 0
    mode: str = SCORE_LEVEL
    noise: float = 0.05

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.n_per_class < 1:
            raise ValueError("n_per_class must be >= 1")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if self.mode not in (FEATURE_LEVEL, SCORE_LEVEL):
            raise ValueError(f"unknown mode {self.mode!r}")


def gen_feature_dataset(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    """Labeled feature rows: class g draws each slot from Normal(g * slope, noise)."""
    if spec.mode != FEATURE_LEVEL:
        raise ValueError("spec.mode must be 'feature_level'")
    rng = np.random.default_rng(spec.seed)
    xs, ys = [], []
    for level in range(1, spec.k + 1):
        xs.append(rng.normal(level * FEATURE_SLOPES, spec.noise, (spec.n_per_class, N_FEATURES)))
        ys.append(np.full(spec.n_per_class, level, dtype=int))
    return np.concatenate(xs), np.concatenate(ys)


def _walk_hand(rng: np.random.Generator, hand: Hand, level: int, noise: float) -> HandPart:
    def jitter() -> float:
        return float(np.clip(1.0 + noise * rng.standard_normal(), 0.5, 1.5))

    n_events = max(10, round((36 + 14 * level) * jitter()))
    # Exact rational grid; the jitter factor keeps denominators within the
    # canonical quantization limit so pieces survive a JSON round trip.
    step_beats = Fraction(8, level + 3) * Fraction(max(24, round(48 * jitter())), 48)
    halfspan = max(3.0, (4.0 + 1.8 * level) * jitter())
    leap_prob = 0.0 if level == 1 else min(0.45, (0.02 + 0.035 * level) * jitter())
    chord_prob = 0.0 if level == 1 else min(0.5, 0.06 * (level - 1) * jitter())
    center = 64.0 + 0.8 * (level - 1) if hand is Hand.RIGHT else 52.0 - 0.8 * (level - 1)

    position = round(center)
    onset = Fraction(0)
    notes = []
    for _ in range(n_events):
        if rng.random() < leap_prob:
            step = int(rng.integers(7, 15))
        else:
            step = int(rng.integers(1, 5))
        if position + step > center + halfspan:
            direction = -1
        elif position - step < center - halfspan:
            direction = 1
        else:
            direction = 1 if rng.random() < 0.5 else -1
        position = int(np.clip(position + direction * step, 21, 108))
        notes.append(NoteEvent(Pitch(position), onset, step_beats))
        if rng.random() < chord_prob:
            interval = 12 if level >= 6 and rng.random() < 0.5 else int(rng.integers(3, 8))
            extra = position + interval
            if extra <= 108:
                notes.append(NoteEvent(Pitch(extra), onset, step_beats))
        onset += step_beats
    return HandPart(hand, tuple(notes))


def gen_score_corpus(spec: SynthSpec) -> Corpus:
    """Corpus of two-hand pieces whose descriptors grow with the level.

    Level 1 pieces move in steps under 7 semitones and play no chords, so
    their displacement rate is exactly zero.
    """
    if spec.mode != SCORE_LEVEL:
        raise ValueError("spec.mode must be 'score_level'")
    pieces = []
    for level in range(1, spec.k + 1):
        for index in range(spec.n_per_class):
            rng = np.random.default_rng((spec.seed, level, index))
            pieces.append(
                Piece(
                    id=f"synth-g{level:02d}-p{index:03d}",
                    right=_walk_hand(rng, Hand.RIGHT, level, spec.noise),
                    left=_walk_hand(rng, Hand.LEFT, level, spec.noise),
                    tempo_bpm=SYNTH_TEMPO_BPM,
                    label=level,
                )
            )
    return Corpus(tuple(pieces), k=spec.k, folds=None)
