"""Corpus assembly: utterances, manifests, and validation reporting.

A corpus manifest is a delimiter-separated file with a header row and
columns ``id, audio, textgrid, speaker, language``. Rows with fixable
problems are skipped and reported; structural problems (duplicate ids,
unreadable manifest) raise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

from .audio import AudioClip, read_wav, write_wav
from .errors import AlignlabError, ManifestError
from .textgrid import (
    PHONE_TIER,
    WORD_TIER,
    Interval,
    Tier,
    load_textgrid,
    save_textgrid,
    serialize_textgrid,
)
from .transcript import NormalizationRules, filter_short_intervals, normalize_tier

MANIFEST_COLUMNS = ("id", "audio", "textgrid", "speaker", "language")

# Audio/grid durations may disagree by this much before a row is dropped.
DURATION_TOLERANCE = 0.050


@dataclass(frozen=True)
class Utterance:
    id: str
    audio: AudioClip
    word_tier: Tier
    phone_tier: Tier | None
    speaker_id: str
    language_id: str
    provenance: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ManifestError("utterance id must be non-empty")
        if not self.speaker_id or not self.language_id:
            raise ManifestError(f"utterance {self.id!r}: speaker and language required")
        duration = self.audio.duration_seconds + 1e-6
        for tier in self.tiers():
            if tier.intervals and tier.end_time() > duration:
                raise ManifestError(
                    f"utterance {self.id!r}: tier {tier.name!r} ends at "
                    f"{tier.end_time():.3f}s, past audio end {duration:.3f}s"
                )

    def tiers(self) -> list[Tier]:
        out = [self.word_tier]
        if self.phone_tier is not None:
            out.append(self.phone_tier)
        return out

    def words(self) -> list[str]:
        """Transcript tokens in time order."""
        tokens = []
        for iv in self.word_tier.labeled():
            tokens.extend(iv.label.split())
        return tokens

    @property
    def duration_seconds(self) -> float:
        return self.audio.duration_seconds


@dataclass(frozen=True)
class Corpus:
    name: str
    utterances: tuple[Utterance, ...]

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        seen = set()
        for utt in self.utterances:
            if utt.id in seen:
                raise ManifestError(f"duplicate utterance id {utt.id!r}")
            seen.add(utt.id)

    @property
    def total_minutes(self) -> float:
        return sum(u.duration_seconds for u in self.utterances) / 60.0

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    def speakers(self) -> list[str]:
        return sorted({u.speaker_id for u in self.utterances})

    def languages(self) -> list[str]:
        return sorted({u.language_id for u in self.utterances})

    def word_types(self) -> dict[str, set[str]]:
        """Word types per language id."""
        types: dict[str, set[str]] = {}
        for utt in self.utterances:
            types.setdefault(utt.language_id, set()).update(utt.words())
        return types


@dataclass(frozen=True)
class BuildIssue:
    row: int
    utterance_id: str
    message: str


@dataclass
class BuildResult:
    corpus: Corpus
    issues: list[BuildIssue] = field(default_factory=list)


def _detect_dialect(sample: str) -> str:
    header = sample.splitlines()[0] if sample else ""
    return "\t" if "\t" in header else ","


def read_manifest(path: str | Path) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    text = path.read_text(encoding="utf-8-sig")
    delimiter = _detect_dialect(text)
    reader = csv.DictReader(text.splitlines(), delimiter=delimiter)
    fields = tuple(name.strip() for name in (reader.fieldnames or ()))
    missing = [c for c in MANIFEST_COLUMNS if c not in fields]
    if missing:
        raise ManifestError(
            f"manifest {path} missing columns: {', '.join(missing)} (found {fields})"
        )
    rows = []
    for row in reader:
        rows.append({k.strip(): (v or "").strip() for k, v in row.items() if k})
    if not rows:
        raise ManifestError(f"manifest {path} has no data rows")
    return rows


def _pick_tiers(tiers: list[Tier]) -> tuple[Tier | None, Tier | None]:
    word = next((t for t in tiers if t.kind == WORD_TIER), None)
    phone = next((t for t in tiers if t.kind == PHONE_TIER), None)
    return word, phone


def build_corpus(
    manifest_path: str | Path,
    name: str | None = None,
    rules: NormalizationRules | None = None,
    min_interval: float = 0.100,
    filter_phone_tier: bool = False,
) -> BuildResult:
    """Assemble a corpus from a manifest, normalizing transcripts.

    Word-tier labels are normalized and labeled intervals shorter than
    ``min_interval`` are blanked. Rows whose audio and grid durations
    disagree by more than 50 ms, or whose files are unreadable, are
    skipped and reported.
    """
    manifest_path = Path(manifest_path)
    rows = read_manifest(manifest_path)
    base = manifest_path.parent
    issues: list[BuildIssue] = []
    utterances: list[Utterance] = []
    seen_ids: set[str] = set()

    for index, row in enumerate(rows):
        utt_id = row.get("id", "")
        if not utt_id:
            issues.append(BuildIssue(index, "", "missing id; row skipped"))
            continue
        if utt_id in seen_ids:
            raise ManifestError(f"duplicate utterance id {utt_id!r} in manifest")
        seen_ids.add(utt_id)
        try:
            audio_path = base / row["audio"]
            grid_path = base / row["textgrid"]
            clip = read_wav(audio_path)
            tiers, grid_duration = load_textgrid(grid_path)
        except (AlignlabError, OSError, KeyError) as exc:
            issues.append(BuildIssue(index, utt_id, f"row skipped: {exc}"))
            continue

        if abs(grid_duration - clip.duration_seconds) > DURATION_TOLERANCE:
            issues.append(
                BuildIssue(
                    index,
                    utt_id,
                    f"row skipped: grid duration {grid_duration:.3f}s vs audio "
                    f"{clip.duration_seconds:.3f}s exceeds {DURATION_TOLERANCE*1000:.0f} ms",
                )
            )
            continue

        word_tier, phone_tier = _pick_tiers(tiers)
        if word_tier is None:
            issues.append(BuildIssue(index, utt_id, "row skipped: no word tier"))
            continue
        word_tier = normalize_tier(word_tier, rules)
        word_tier, removed = filter_short_intervals(word_tier, min_interval)
        if removed:
            issues.append(
                BuildIssue(index, utt_id, f"{removed} short word interval(s) blanked")
            )
        if phone_tier is not None and filter_phone_tier:
            phone_tier, removed = filter_short_intervals(phone_tier, min_interval)
            if removed:
                issues.append(
                    BuildIssue(index, utt_id, f"{removed} short phone interval(s) blanked")
                )
        word_tier = _clip_tier(word_tier, clip.duration_seconds)
        if phone_tier is not None:
            phone_tier = _clip_tier(phone_tier, clip.duration_seconds)

        utterances.append(
            Utterance(
                id=utt_id,
                audio=clip,
                word_tier=word_tier,
                phone_tier=phone_tier,
                speaker_id=row.get("speaker", ""),
                language_id=row.get("language", ""),
            )
        )

    corpus = Corpus(name or manifest_path.stem, tuple(utterances))
    return BuildResult(corpus, issues)


def _clip_tier(tier: Tier, duration: float) -> Tier:
    """Trim intervals that overrun the audio end within the tolerance."""
    out = []
    for iv in tier.intervals:
        if iv.start >= duration:
            continue
        out.append(Interval(iv.start, min(iv.end, duration), iv.label))
    return tier.with_intervals(out)


def write_corpus(corpus: Corpus, out_dir: str | Path) -> Path:
    """Write wavs, TextGrids, and a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for utt in corpus:
        wav_name = f"{utt.id}.wav"
        grid_name = f"{utt.id}.TextGrid"
        write_wav(utt.audio, out_dir / wav_name)
        save_textgrid(utt.tiers(), utt.audio.duration_seconds, out_dir / grid_name)
        rows.append((utt.id, wav_name, grid_name, utt.speaker_id, utt.language_id))
    manifest = out_dir / "manifest.csv"
    with manifest.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)
    return manifest
