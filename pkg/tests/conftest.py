import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rubricnet import Hand, HandPart, NoteEvent, Piece, Pitch

FIXTURES = Path(__file__).parent / "fixtures"


def make_part(hand: Hand, notes) -> HandPart:
    """Build a part from (midi, onset, duration) triples; rationals accepted."""
    return HandPart(
        hand,
        tuple(
            NoteEvent(Pitch(midi), Fraction(onset), Fraction(duration))
            for midi, onset, duration in notes
        ),
    )


def make_piece(piece_id="piece", right=None, left=None, tempo_bpm=None, label=None) -> Piece:
    right = right if right is not None else [(72, 0, 1), (74, 1, 1)]
    left = left if left is not None else [(48, 0, 1), (50, 1, 1)]
    return Piece(
        id=piece_id,
        right=make_part(Hand.RIGHT, right),
        left=make_part(Hand.LEFT, left),
        tempo_bpm=tempo_bpm,
        label=label,
    )


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
