"""Pronunciation lexicons via rule-based grapheme-to-phoneme conversion.

Orthographies here are treated as 1:1 phonemic, so G2P is greedy
longest-match segmentation over an ordered rule table. Lexicons merge
word types across languages; the same spelling may keep several
pronunciations. Phone-class maps group phones for triphone context
tying, natural-class maps group them for evaluation aggregation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus
from .errors import ClassMapError, G2pError, LexiconError

NATURAL_CLASSES = (
    "vowel",
    "long_vowel",
    "stop",
    "nasal",
    "lateral",
    "rhotic",
    "trill",
    "approximant",
    "other",
)


@dataclass(frozen=True)
class GraphemeMap:
    """Ordered grapheme → phone-sequence rules for one language."""

    language_id: str
    rules: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        if not self.rules:
            raise LexiconError(f"grapheme map {self.language_id!r} has no rules")
        seen = set()
        for grapheme, phones in self.rules:
            if not grapheme or not phones:
                raise LexiconError(
                    f"grapheme map {self.language_id!r}: empty grapheme or phone sequence"
                )
            if grapheme in seen:
                raise LexiconError(
                    f"grapheme map {self.language_id!r}: duplicate grapheme {grapheme!r}"
                )
            seen.add(grapheme)

    def phone_inventory(self) -> set[str]:
        return {p for _, phones in self.rules for p in phones}

    def by_length(self) -> list[tuple[str, tuple[str, ...]]]:
        return sorted(self.rules, key=lambda r: (-len(r[0]), r[0]))


@dataclass(frozen=True)
class Lexicon:
    entries: dict[str, tuple[tuple[str, ...], ...]]
    phone_inventory: frozenset[str]

    def __post_init__(self):
        for word, prons in self.entries.items():
            for pron in prons:
                bad = [p for p in pron if p not in self.phone_inventory]
                if bad:
                    raise LexiconError(
                        f"word {word!r}: phones {bad} missing from inventory"
                    )

    def pronunciation(self, word: str) -> tuple[str, ...]:
        """First pronunciation of a word (training uses one per word)."""
        return self.entries[word][0]

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class PhoneClassMap:
    name: str
    mapping: dict[str, int]
    class_count: int

    def __post_init__(self):
        ids = set(self.mapping.values())
        if ids and (min(ids) < 0 or max(ids) >= self.class_count):
            raise ClassMapError(
                f"class map {self.name!r}: ids must lie in [0, {self.class_count})"
            )
        if len(ids) != self.class_count:
            raise ClassMapError(
                f"class map {self.name!r}: {self.class_count} classes declared but "
                f"{len(ids)} used"
            )

    def class_of(self, phone: str) -> int:
        try:
            return self.mapping[phone]
        except KeyError:
            raise ClassMapError(f"phone {phone!r} not covered by class map {self.name!r}")


@dataclass(frozen=True)
class NaturalClassMap:
    """Phone → natural-class label, with class order preserved."""

    mapping: dict[str, str]
    class_order: tuple[str, ...] = NATURAL_CLASSES

    def label_of(self, phone: str) -> str:
        return self.mapping.get(phone, "other")


def apply_g2p(word: str, gmap: GraphemeMap) -> tuple[str, ...]:
    """Convert one word to phones by greedy longest-match segmentation."""
    if not word:
        raise G2pError(word, 0, "")
    rules = gmap.by_length()
    phones: list[str] = []
    pos = 0
    while pos < len(word):
        for grapheme, mapped in rules:
            if word.startswith(grapheme, pos):
                phones.extend(mapped)
                pos += len(grapheme)
                break
        else:
            raise G2pError(word, pos, word[pos:])
    return tuple(phones)


def compile_lexicon(
    corpora: list[Corpus], maps: dict[str, GraphemeMap]
) -> Lexicon:
    """Build one lexicon covering every word type in every corpus.

    Words are lowercased before conversion. All conversion failures are
    collected and raised together.
    """
    types: dict[str, set[str]] = {}
    for corpus in corpora:
        for language, words in corpus.word_types().items():
            if language not in maps:
                raise LexiconError(f"no grapheme map for language {language!r}")
            types.setdefault(language, set()).update(w.lower() for w in words)

    entries: dict[str, set[tuple[str, ...]]] = {}
    failures: list[str] = []
    for language in sorted(types):
        gmap = maps[language]
        for word in sorted(types[language]):
            try:
                pron = apply_g2p(word, gmap)
            except G2pError as exc:
                failures.append(f"{language}:{word} ({exc})")
                continue
            entries.setdefault(word, set()).add(pron)
    if failures:
        raise LexiconError(
            "unmappable words:\n  " + "\n  ".join(failures)
        )
    inventory = frozenset(p for prons in entries.values() for pron in prons for p in pron)
    frozen = {w: tuple(sorted(prons)) for w, prons in sorted(entries.items())}
    return Lexicon(frozen, inventory)


def default_identity_classes(inventory: set[str]) -> PhoneClassMap:
    """One class per phone: the untied triphone default."""
    if not inventory:
        raise ClassMapError("cannot build identity classes for an empty inventory")
    phones = sorted(inventory)
    return PhoneClassMap("identity", {p: i for i, p in enumerate(phones)}, len(phones))


def _parse_class_lines(text: str, what: str) -> list[tuple[str, list[str]]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ClassMapError(f"{what} line {lineno}: expected 'name: phone phone ...'")
        name, phones = line.split(":", 1)
        out.append((name.strip(), phones.split()))
    return out


def load_phone_class_map(path: str | Path, inventory: set[str]) -> PhoneClassMap:
    """Read a 'class_name: phone phone ...' file covering the inventory."""
    path = Path(path)
    parsed = _parse_class_lines(path.read_text(encoding="utf-8"), str(path))
    mapping: dict[str, int] = {}
    for class_id, (class_name, phones) in enumerate(parsed):
        for phone in phones:
            if phone in mapping:
                raise ClassMapError(f"{path}: phone {phone!r} assigned to two classes")
            if phone not in inventory:
                raise ClassMapError(f"{path}: unknown phone {phone!r}")
            mapping[phone] = class_id
    missing = sorted(inventory - mapping.keys())
    if missing:
        raise ClassMapError(f"{path}: inventory phones missing: {' '.join(missing)}")
    return PhoneClassMap(path.stem, mapping, len(parsed))


def load_natural_class_map(path: str | Path, inventory: set[str] | None = None) -> NaturalClassMap:
    """Read a natural-class file; unknown labels are allowed but ordered last."""
    path = Path(path)
    parsed = _parse_class_lines(path.read_text(encoding="utf-8"), str(path))
    mapping: dict[str, str] = {}
    order: list[str] = []
    for class_name, phones in parsed:
        if class_name not in order:
            order.append(class_name)
        for phone in phones:
            if phone in mapping:
                raise ClassMapError(f"{path}: phone {phone!r} assigned to two classes")
            mapping[phone] = class_name
    if inventory is not None:
        missing = sorted(set(inventory) - mapping.keys())
        if missing:
            raise ClassMapError(f"{path}: inventory phones missing: {' '.join(missing)}")
    if "other" not in order:
        order.append("other")
    return NaturalClassMap(mapping, tuple(order))


def load_grapheme_map(path: str | Path, language_id: str | None = None) -> GraphemeMap:
    """Read 'grapheme TAB phone [phone ...]' lines."""
    path = Path(path)
    rules = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.rstrip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[1].split():
            raise LexiconError(
                f"{path} line {lineno}: expected 'grapheme<TAB>phone [phone ...]'"
            )
        rules.append((parts[0], tuple(parts[1].split())))
    return GraphemeMap(language_id or path.stem, tuple(rules))


def write_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    """Write 'word TAB phone SPACE phone ...' lines, one per pronunciation."""
    lines = []
    for word in sorted(lexicon.entries):
        for pron in lexicon.entries[word]:
            lines.append(f"{word}\t{' '.join(pron)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_lexicon(path: str | Path) -> Lexicon:
    path = Path(path)
    entries: dict[str, list[tuple[str, ...]]] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.rstrip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[1].split():
            raise LexiconError(f"{path} line {lineno}: expected 'word<TAB>phones'")
        word, phones = parts[0], tuple(parts[1].split())
        prons = entries.setdefault(word, [])
        if phones not in prons:
            prons.append(phones)
    if not entries:
        raise LexiconError(f"{path}: empty lexicon")
    inventory = frozenset(p for prons in entries.values() for pron in prons for p in pron)
    return Lexicon({w: tuple(v) for w, v in entries.items()}, inventory)
