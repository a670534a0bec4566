import importlib.resources

import pytest
from hypothesis import given, settings, strategies as st

from alignlab.corpus import Corpus
from alignlab.errors import ClassMapError, G2pError, LexiconError
from alignlab.lexicon import (
    GraphemeMap,
    Lexicon,
    NaturalClassMap,
    apply_g2p,
    compile_lexicon,
    default_identity_classes,
    load_grapheme_map,
    load_natural_class_map,
    load_phone_class_map,
    read_lexicon,
    write_lexicon,
)

from oracles import exhaustive_segmentations


BARDI_MAP = GraphemeMap(
    "lang1",
    (("rd", ("ɖ",)), ("b", ("b",)), ("a", ("a",)), ("i", ("i",)), ("r", ("r",)), ("d", ("d",))),
)


def test_longest_match_beats_parts():
    assert apply_g2p("bardi", BARDI_MAP) == ("b", "a", "ɖ", "i")
    # oracle: greedy parse is one of the exhaustive tilings
    graphemes = [g for g, _ in BARDI_MAP.rules]
    tilings = exhaustive_segmentations("bardi", graphemes)
    assert ["b", "a", "rd", "i"] in tilings


def test_double_letter_longest_match():
    gmap = GraphemeMap("x", (("aa", ("aː",)), ("a", ("a",))))
    assert apply_g2p("aa", gmap) == ("aː",)
    assert apply_g2p("aaa", gmap) == ("aː", "a")


def test_unmappable_reports_position_and_suffix():
    with pytest.raises(G2pError) as err:
        apply_g2p("xq", BARDI_MAP)
    assert err.value.position == 0
    assert err.value.suffix == "xq"


@given(st.text(alphabet="bardi", min_size=1, max_size=10))
@settings(max_examples=80, deadline=None)
def test_g2p_covers_input(word):
    phones = apply_g2p(word, BARDI_MAP)
    # mapping each grapheme back: greedy parse must tile the word exactly
    by_phone = {p[0]: g for g, p in BARDI_MAP.rules}
    rebuilt = "".join(by_phone[p] for p in phones)
    assert rebuilt == word


def _corpus_with_words(name, language, words, micro):
    # borrow audio/tier structure from the micro corpus
    donor = micro.corpus.utterances[0]
    tier = donor.word_tier.with_intervals(
        [donor.word_tier.intervals[0].__class__(0.0, 1.0, " ".join(words))]
    )
    utt = donor.__class__(
        id=f"{name}-u0",
        audio=donor.audio,
        word_tier=tier,
        phone_tier=None,
        speaker_id="s",
        language_id=language,
    )
    return Corpus(name, (utt,))


def test_compile_merges_languages(micro):
    map1 = GraphemeMap("l1", (("ma", ("m", "a")), ("ra", ("r", "a"))))
    map2 = GraphemeMap("l2", (("ma", ("m", "aː")), ("ra", ("r", "aː"))))
    c1 = _corpus_with_words("c1", "l1", ["mara"], micro)
    c2 = _corpus_with_words("c2", "l2", ["mara"], micro)
    lex = compile_lexicon([c1, c2], {"l1": map1, "l2": map2})
    assert len(lex) == 1
    assert set(lex.entries["mara"]) == {("m", "a", "r", "a"), ("m", "aː", "r", "aː")}

    same = compile_lexicon([c1, c1], {"l1": map1})
    assert same.entries["mara"] == (("m", "a", "r", "a"),)


def test_compile_order_independent(micro):
    map1 = GraphemeMap("l1", (("a", ("a",)), ("b", ("b",)), ("c", ("c",))))
    c1 = _corpus_with_words("c1", "l1", ["ab", "bc"], micro)
    c2 = _corpus_with_words("c2", "l1", ["cab", "ba"], micro)
    forward = compile_lexicon([c1, c2], {"l1": map1})
    backward = compile_lexicon([c2, c1], {"l1": map1})
    assert forward == backward


def test_compile_reports_all_failures(micro):
    gmap = GraphemeMap("l1", (("a", ("a",)),))
    corpus = _corpus_with_words("c", "l1", ["ax", "ay", "aaa"], micro)
    with pytest.raises(LexiconError) as err:
        compile_lexicon([corpus], {"l1": gmap})
    assert "ax" in str(err.value) and "ay" in str(err.value)


def test_identity_classes():
    cmap = default_identity_classes({"a", "b", "c"})
    assert cmap.class_count == 3
    assert sorted(cmap.mapping.values()) == [0, 1, 2]
    single = default_identity_classes({"ŋ"})
    assert single.class_count == 1


@given(st.sets(st.sampled_from("abcdefghij"), min_size=1, max_size=10))
@settings(max_examples=50, deadline=None)
def test_identity_classes_bijective(inventory):
    cmap = default_identity_classes(inventory)
    assert cmap.class_count == len(inventory)
    assert len(set(cmap.mapping.values())) == len(inventory)


def test_load_class_map(tmp_path):
    path = tmp_path / "classes.txt"
    path.write_text(
        "vowel: a i\nstop: p t\nnasal: m\nother: l\n", encoding="utf-8"
    )
    cmap = load_phone_class_map(path, {"a", "i", "p", "t", "m", "l"})
    assert cmap.class_count == 4
    assert cmap.class_of("a") == cmap.class_of("i")
    assert cmap.class_of("p") != cmap.class_of("m")


def test_class_map_missing_phone(tmp_path):
    path = tmp_path / "classes.txt"
    path.write_text("vowel: a\n", encoding="utf-8")
    with pytest.raises(ClassMapError, match="missing: i"):
        load_phone_class_map(path, {"a", "i"})


def test_class_map_double_assignment(tmp_path):
    path = tmp_path / "classes.txt"
    path.write_text("vowel: a\nalso: a\n", encoding="utf-8")
    with pytest.raises(ClassMapError, match="two classes"):
        load_phone_class_map(path, {"a"})


def test_lexicon_file_roundtrip(tmp_path):
    lex = Lexicon(
        {"mara": (("m", "a", "r", "a"),), "bardi": (("b", "a", "ɖ", "i"),)},
        frozenset({"m", "a", "r", "b", "ɖ", "i"}),
    )
    write_lexicon(lex, tmp_path / "lex.txt")
    back = read_lexicon(tmp_path / "lex.txt")
    assert back.entries == lex.entries


def test_shipped_data_assets_load():
    data_dir = importlib.resources.files("alignlab") / "data"
    with importlib.resources.as_file(data_dir / "example_lang1.g2p") as path:
        gmap = load_grapheme_map(path, "lang1")
    inventory = gmap.phone_inventory()
    assert apply_g2p("bardi", gmap)  # digraph map handles a real-looking word
    for name in ("classes_4.txt", "classes_9.txt", "classes_22.txt"):
        with importlib.resources.as_file(data_dir / name) as path:
            cmap = load_phone_class_map(path, inventory)
        assert cmap.class_count == int(name.split("_")[1].split(".")[0])
    with importlib.resources.as_file(data_dir / "natural_classes.txt") as path:
        natural = load_natural_class_map(path, inventory)
    assert natural.label_of("r") == "trill"
    assert natural.label_of("aː") == "long_vowel"
