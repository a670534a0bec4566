import numpy as np
import pytest

from alignlab.audio import AudioClip, write_wav
from alignlab.corpus import Corpus, Utterance, build_corpus, read_manifest, write_corpus
from alignlab.errors import ManifestError
from alignlab.textgrid import Interval, Tier, save_textgrid

from oracles import sine


def _write_utterance(directory, name, seconds=1.0, grid_seconds=None, word="ngaju"):
    clip = AudioClip(0.3 * sine(220, seconds).astype(np.float32), 16000)
    write_wav(clip, directory / f"{name}.wav")
    grid_seconds = grid_seconds or seconds
    tier = Tier("words", "word", (Interval(0.0, min(0.8, grid_seconds), word),))
    save_textgrid([tier], grid_seconds, directory / f"{name}.TextGrid")


def _write_manifest(directory, rows):
    lines = ["id,audio,textgrid,speaker,language"]
    lines += [",".join(row) for row in rows]
    path = directory / "manifest.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_two_valid_rows(tmp_path):
    _write_utterance(tmp_path, "u1")
    _write_utterance(tmp_path, "u2")
    manifest = _write_manifest(
        tmp_path,
        [
            ("u1", "u1.wav", "u1.TextGrid", "s1", "lang1"),
            ("u2", "u2.wav", "u2.TextGrid", "s2", "lang1"),
        ],
    )
    result = build_corpus(manifest)
    assert len(result.corpus) == 2
    assert result.corpus.speakers() == ["s1", "s2"]
    assert not result.issues


def test_duration_mismatch_skips_row(tmp_path):
    _write_utterance(tmp_path, "ok")
    _write_utterance(tmp_path, "bad", seconds=1.0, grid_seconds=2.0)
    manifest = _write_manifest(
        tmp_path,
        [
            ("ok", "ok.wav", "ok.TextGrid", "s1", "lang1"),
            ("bad", "bad.wav", "bad.TextGrid", "s1", "lang1"),
        ],
    )
    result = build_corpus(manifest)
    assert [u.id for u in result.corpus] == ["ok"]
    assert any("bad" == issue.utterance_id for issue in result.issues)


def test_duplicate_id_is_error(tmp_path):
    _write_utterance(tmp_path, "u1")
    manifest = _write_manifest(
        tmp_path,
        [
            ("u1", "u1.wav", "u1.TextGrid", "s1", "lang1"),
            ("u1", "u1.wav", "u1.TextGrid", "s1", "lang1"),
        ],
    )
    with pytest.raises(ManifestError, match="duplicate"):
        build_corpus(manifest)


def test_missing_file_reported_not_fatal(tmp_path):
    _write_utterance(tmp_path, "u1")
    manifest = _write_manifest(
        tmp_path,
        [
            ("u1", "u1.wav", "u1.TextGrid", "s1", "lang1"),
            ("u2", "missing.wav", "missing.TextGrid", "s1", "lang1"),
        ],
    )
    result = build_corpus(manifest)
    assert len(result.corpus) == 1
    assert len(result.issues) == 1


def test_transcripts_normalized_and_filtered(tmp_path):
    clip = AudioClip(0.3 * sine(220, 1.0).astype(np.float32), 16000)
    write_wav(clip, tmp_path / "u.wav")
    tier = Tier(
        "words",
        "word",
        (Interval(0.0, 0.5, "wirri- [laughs] wirriji"), Interval(0.5, 0.55, "zap")),
    )
    save_textgrid([tier], 1.0, tmp_path / "u.TextGrid")
    manifest = _write_manifest(tmp_path, [("u", "u.wav", "u.TextGrid", "s", "l")])
    result = build_corpus(manifest)
    utt = result.corpus.utterances[0]
    assert utt.words() == ["wirriji"]  # note dropped, 50ms token blanked


def test_manifest_missing_columns(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("id,audio\nx,y\n", encoding="utf-8")
    with pytest.raises(ManifestError, match="missing columns"):
        read_manifest(path)


def test_tab_separated_manifest(tmp_path):
    _write_utterance(tmp_path, "u1")
    path = tmp_path / "m.tsv"
    path.write_text(
        "id\taudio\ttextgrid\tspeaker\tlanguage\nu1\tu1.wav\tu1.TextGrid\ts\tl\n",
        encoding="utf-8",
    )
    result = build_corpus(path)
    assert len(result.corpus) == 1


def test_total_minutes_tracks_durations(micro):
    corpus = micro.corpus
    target = sum(u.duration_seconds for u in corpus) / 60.0
    # within 1 ms per 100 utterances
    assert abs(corpus.total_minutes - target) * 60e3 <= max(1.0, len(corpus) / 100)


def test_write_corpus_roundtrip(tmp_path, micro):
    manifest = write_corpus(micro.corpus, tmp_path)
    result = build_corpus(manifest)
    assert len(result.corpus) == len(micro.corpus)
    original = micro.corpus.utterances[0]
    back = next(u for u in result.corpus if u.id == original.id)
    assert back.speaker_id == original.speaker_id
    assert abs(back.duration_seconds - original.duration_seconds) < 1e-3
    assert [iv.label for iv in back.phone_tier.labeled()] == [
        iv.label for iv in original.phone_tier.labeled()
    ]


def test_corpus_rejects_duplicate_utterances(micro):
    utt = micro.corpus.utterances[0]
    with pytest.raises(ManifestError, match="duplicate"):
        Corpus("dup", (utt, utt))
