import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rubricnet import (
    Corpus,
    CorpusLoadError,
    Hand,
    HandPart,
    NoteEvent,
    Piece,
    Pitch,
    ScoreParseError,
    UnsupportedLayoutError,
    assign_folds,
    load_corpus,
    load_piece_file,
    parse_canonical_json,
    parse_musicxml,
    resolve_tempo,
    serialize_canonical_json,
)
from conftest import make_piece

MINIMAL = {
    "id": "mini",
    "parts": {
        "right": [{"pitch": 72, "onset_beats": [0, 1], "duration_beats": [1, 1]}],
        "left": [{"pitch": 48, "onset_beats": [0, 1], "duration_beats": [1, 1]}],
    },
}


def as_bytes(doc) -> bytes:
    return json.dumps(doc).encode()


class TestCanonicalJson:
    def test_minimal_document(self):
        piece = parse_canonical_json(as_bytes(MINIMAL))
        assert piece.id == "mini"
        assert len(piece.right) == 1 and len(piece.left) == 1
        assert piece.tempo_bpm is None and piece.label is None

    def test_missing_tempo_resolves_to_100(self):
        piece = parse_canonical_json(as_bytes(MINIMAL))
        assert resolve_tempo(piece) == 100.0

    def test_tempo_and_label_parsed(self):
        doc = dict(MINIMAL, tempo_bpm=100, label=4)
        piece = parse_canonical_json(as_bytes(doc))
        assert piece.tempo_bpm == 100
        assert piece.label == 4

    def test_pitch_out_of_range(self):
        doc = json.loads(json.dumps(MINIMAL))
        doc["parts"]["right"][0]["pitch"] = 200
        with pytest.raises(ScoreParseError, match="pitch out of range"):
            parse_canonical_json(as_bytes(doc))

    def test_missing_hand(self):
        doc = {"id": "x", "parts": {"right": MINIMAL["parts"]["right"]}}
        with pytest.raises(ScoreParseError, match="left"):
            parse_canonical_json(as_bytes(doc))

    def test_negative_onset_and_duration(self):
        doc = json.loads(json.dumps(MINIMAL))
        doc["parts"]["left"][0]["onset_beats"] = [-1, 2]
        with pytest.raises(ScoreParseError, match="onset"):
            parse_canonical_json(as_bytes(doc))
        doc = json.loads(json.dumps(MINIMAL))
        doc["parts"]["left"][0]["duration_beats"] = [0, 1]
        with pytest.raises(ScoreParseError, match="duration"):
            parse_canonical_json(as_bytes(doc))

    def test_malformed_json(self):
        with pytest.raises(ScoreParseError, match="malformed"):
            parse_canonical_json(b"{not json")

    def test_serialize_emits_expected_keys(self):
        piece = make_piece(tempo_bpm=100)
        doc = json.loads(serialize_canonical_json(piece))
        assert doc["tempo_bpm"] == 100
        assert "label" not in doc
        labeled = make_piece(label=3)
        doc = json.loads(serialize_canonical_json(labeled))
        assert doc["label"] == 3
        assert "tempo_bpm" not in doc

    def test_round_trip_fixture(self):
        piece = make_piece(
            right=[(72, 0, 1), (76, Fraction(1, 3), Fraction(2, 3))],
            left=[(48, 0, 4)],
            tempo_bpm=88.5,
            label=2,
        )
        again = parse_canonical_json(serialize_canonical_json(piece))
        assert again == piece

    @given(
        seed=st.integers(0, 2**32 - 1),
        tempo=st.one_of(st.none(), st.integers(30, 240)),
        label=st.one_of(st.none(), st.integers(1, 9)),
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip_random_pieces(self, seed, tempo, label):
        import numpy as np

        rng = np.random.default_rng(seed)

        def notes():
            n = int(rng.integers(1, 12))
            onsets = np.cumsum(rng.integers(0, 4, n))
            return tuple(
                NoteEvent(
                    Pitch(int(rng.integers(0, 128))),
                    Fraction(int(o), int(rng.integers(1, 8))),
                    Fraction(int(rng.integers(1, 9)), int(rng.integers(1, 8))),
                )
                for o in onsets
            )

        piece = Piece(
            id=f"piece-{seed}",
            right=HandPart(Hand.RIGHT, notes()),
            left=HandPart(Hand.LEFT, notes()),
            tempo_bpm=tempo,
            label=label,
        )
        assert parse_canonical_json(serialize_canonical_json(piece)) == piece


class TestMusicXml:
    def test_two_staff_fixture_matches_golden_events(self, fixtures_dir):
        piece = parse_musicxml((fixtures_dir / "fixture_two_staff.musicxml").read_bytes())
        golden = json.loads((fixtures_dir / "fixture_two_staff.expected.json").read_text())
        assert piece.tempo_bpm == golden["tempo_bpm"]
        for hand, part in (("right", piece.right), ("left", piece.left)):
            expected = [
                (
                    n["pitch"],
                    Fraction(*n["onset_beats"]),
                    Fraction(*n["duration_beats"]),
                )
                for n in golden[hand]
            ]
            actual = [(n.pitch.midi, n.onset_beats, n.duration_beats) for n in part.notes]
            assert actual == expected, f"{hand} hand events differ"

    def test_tie_merging_preserves_total_duration_per_pitch(self, fixtures_dir):
        piece = parse_musicxml((fixtures_dir / "fixture_two_staff.musicxml").read_bytes())
        totals = {}
        for note in piece.right.notes:
            totals[note.pitch.midi] = totals.get(note.pitch.midi, 0) + note.duration_beats
        # G5 was notated as two tied half notes: one event, four beats total.
        assert totals[79] == Fraction(5)  # 4 tied + 1 in the later chord
        assert sum(1 for n in piece.right.notes if n.pitch.midi == 79) == 2

    def test_no_tempo_fixture_falls_back(self, fixtures_dir):
        piece = parse_musicxml((fixtures_dir / "fixture_no_tempo.musicxml").read_bytes())
        assert piece.tempo_bpm is None
        assert resolve_tempo(piece) == 100.0
        assert [n.pitch.midi for n in piece.right.notes] == [60, 62]
        assert [n.pitch.midi for n in piece.left.notes] == [48]

    def test_three_parts_rejected(self, fixtures_dir):
        with pytest.raises(UnsupportedLayoutError):
            parse_musicxml((fixtures_dir / "fixture_three_parts.musicxml").read_bytes())

    def test_single_stream_rejected(self):
        xml = b"""<?xml version="1.0"?>
        <score-partwise><part-list><score-part id="P1"/></part-list>
        <part id="P1"><measure number="1">
        <attributes><divisions>1</divisions></attributes>
        <note><pitch><step>C</step><octave>4</octave></pitch><duration>4</duration></note>
        </measure></part></score-partwise>"""
        with pytest.raises(UnsupportedLayoutError):
            parse_musicxml(xml)

    def test_timewise_rejected(self):
        with pytest.raises(ScoreParseError, match="partwise"):
            parse_musicxml(b"<score-timewise></score-timewise>")

    def test_unparseable_pitch(self):
        xml = b"""<?xml version="1.0"?>
        <score-partwise><part-list/><part id="P1"><measure number="1">
        <attributes><divisions>1</divisions></attributes>
        <note><pitch><step>H</step><octave>4</octave></pitch><duration>4</duration></note>
        </measure></part></score-partwise>"""
        with pytest.raises(ScoreParseError, match="pitch"):
            parse_musicxml(xml)

    def test_metronome_only_tempo_scaled_by_beat_unit(self):
        xml = b"""<?xml version="1.0"?>
        <score-partwise><part-list/>
        <part id="P1"><measure number="1">
        <attributes><divisions>1</divisions></attributes>
        <direction><direction-type><metronome>
        <beat-unit>half</beat-unit><per-minute>60</per-minute>
        </metronome></direction-type></direction>
        <note><pitch><step>C</step><octave>4</octave></pitch><duration>4</duration></note>
        </measure></part>
        <part id="P2"><measure number="1">
        <attributes><divisions>1</divisions></attributes>
        <note><pitch><step>C</step><octave>3</octave></pitch><duration>4</duration></note>
        </measure></part></score-partwise>"""
        piece = parse_musicxml(xml)
        assert piece.tempo_bpm == 120.0


class TestCorpus:
    def _pieces(self, labels):
        return tuple(
            make_piece(piece_id=f"p{i:02d}", label=level) for i, level in enumerate(labels)
        )

    def test_duplicate_ids_rejected(self):
        with pytest.raises(CorpusLoadError, match="duplicate"):
            Corpus((make_piece(piece_id="a"), make_piece(piece_id="a")), k=3)

    def test_label_range_checked(self):
        with pytest.raises(CorpusLoadError, match="outside"):
            Corpus((make_piece(label=5),), k=3)

    def test_folds_must_cover_all_pieces(self):
        with pytest.raises(CorpusLoadError, match="without fold"):
            Corpus((make_piece(piece_id="a"), make_piece(piece_id="b")), k=3, folds={"a": 0})

    def test_assign_folds_balanced_two_classes(self):
        labels = [1] * 5 + [2] * 5
        corpus = Corpus(self._pieces(labels), k=2)
        folded = assign_folds(corpus, seed=0)
        for fold in range(5):
            members = [pid for pid, f in folded.folds.items() if f == fold]
            got = sorted(folded.piece_by_id(pid).label for pid in members)
            assert got == [1, 2]

    def test_assign_folds_deterministic_and_stratified(self):
        labels = [1] * 7 + [2] * 11 + [3] * 4
        corpus = Corpus(self._pieces(labels), k=3)
        a = assign_folds(corpus, seed=42).folds
        b = assign_folds(corpus, seed=42).folds
        assert a == b
        c = assign_folds(corpus, seed=43).folds
        for folds in (a, c):
            for level in (1, 2, 3):
                ids = [p.id for p in corpus.pieces if p.label == level]
                sizes = [sum(1 for pid in ids if folds[pid] == f) for f in range(5)]
                assert max(sizes) - min(sizes) <= 1


class TestLoadCorpus:
    def _write_corpus(self, tmp_path, labels, fold_column=None):
        scores = tmp_path / "scores"
        scores.mkdir()
        lines = ["id,level" + (",fold" if fold_column else "")]
        for i, level in enumerate(labels):
            piece = make_piece(piece_id=f"p{i:02d}")
            (scores / f"p{i:02d}.json").write_bytes(serialize_canonical_json(piece))
            fold = f",{fold_column[i]}" if fold_column else ""
            lines.append(f"p{i:02d},{level}{fold}")
        labels_file = tmp_path / "labels.csv"
        labels_file.write_text("\n".join(lines) + "\n")
        return scores, labels_file

    def test_load_with_generated_folds(self, tmp_path):
        scores, labels_file = self._write_corpus(tmp_path, [1] * 5 + [2] * 5)
        corpus = load_corpus(scores, labels_file, seed=0)
        assert corpus.k == 2
        assert len(corpus) == 10
        assert set(corpus.folds.values()) == {0, 1, 2, 3, 4}

    def test_explicit_folds_preserved(self, tmp_path):
        folds = [0, 1, 2, 3, 4, 0, 1, 2, 3, 4]
        scores, labels_file = self._write_corpus(tmp_path, [1] * 5 + [2] * 5, folds)
        corpus = load_corpus(scores, labels_file)
        assert [corpus.folds[f"p{i:02d}"] for i in range(10)] == folds

    def test_level_zero_rejected(self, tmp_path):
        scores, labels_file = self._write_corpus(tmp_path, [0, 1])
        with pytest.raises(CorpusLoadError):
            load_corpus(scores, labels_file, k=3)

    def test_missing_labels_file(self, tmp_path):
        scores = tmp_path / "scores"
        scores.mkdir()
        with pytest.raises(CorpusLoadError, match="not found"):
            load_corpus(scores, tmp_path / "nope.csv")

    def test_duplicate_id_rejected(self, tmp_path):
        scores, labels_file = self._write_corpus(tmp_path, [1, 2])
        labels_file.write_text("id,level\np00,1\np00,2\n")
        with pytest.raises(CorpusLoadError, match="duplicate"):
            load_corpus(scores, labels_file)

    def test_missing_score_file(self, tmp_path):
        scores, labels_file = self._write_corpus(tmp_path, [1, 2])
        labels_file.write_text("id,level\np00,1\nmissing,2\n")
        with pytest.raises(CorpusLoadError, match="missing"):
            load_corpus(scores, labels_file)

    def test_parallel_load_matches_sequential(self, tmp_path):
        scores, labels_file = self._write_corpus(tmp_path, [1, 2, 1, 2, 1, 2])
        seq = load_corpus(scores, labels_file, jobs=1)
        par = load_corpus(scores, labels_file, jobs=2)
        assert seq.pieces == par.pieces
        assert seq.folds == par.folds


class TestPieceCache:
    def test_cache_round_trip(self, tmp_path, fixtures_dir):
        source = fixtures_dir / "fixture_two_staff.musicxml"
        cache = tmp_path / "cache"
        first = load_piece_file(source, cache_dir=cache)
        assert any(cache.iterdir())
        second = load_piece_file(source, cache_dir=cache)
        assert first == second
        direct = load_piece_file(source)
        assert direct == first
