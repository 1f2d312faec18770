import pytest
from hypothesis import given, strategies as st

from azspell.textcodec import (
    PAD_ID,
    Vocab,
    VocabError,
    build_vocab,
    build_vocabs,
    decode,
    encode,
)

text = st.text(alphabet="abcçəğışöü xyz", max_size=30)


@pytest.fixture
def ab():
    return build_vocab(["ab"])


class TestBuildVocab:
    def test_markers_then_first_appearance(self, ab):
        assert ab.size == 5
        assert ab.char_to_id == {"<": 1, ">": 2, "a": 3, "b": 4}
        assert (ab.pad_id, ab.start_id, ab.end_id) == (0, 1, 2)

    def test_order_follows_first_appearance(self):
        v = build_vocab(["ba", "ab"])
        assert v.char_to_id["b"] == 3
        assert v.char_to_id["a"] == 4

    def test_empty_corpus(self):
        with pytest.raises(ValueError, match="empty corpus"):
            build_vocab([])

    def test_size_99_matches_embedding_rows(self):
        # 96 distinct characters + 2 markers + pad = 99 rows; 99 * 500 = 49500
        chars = [chr(0x100 + k) for k in range(96)]
        v = build_vocab(["".join(chars)])
        assert v.size == 99
        assert v.size * 500 == 49500

    def test_marker_characters_in_corpus_are_not_duplicated(self):
        v = build_vocab(["a<b>"])
        assert v.size == 5

    @given(st.lists(text, min_size=1, max_size=5))
    def test_invariants(self, corpus):
        v = build_vocab(corpus)
        assert all(v.id_to_char[i] == c for c, i in v.char_to_id.items())
        assert 0 not in v.id_to_char
        assert all(0 < i < v.size for i in v.id_to_char)
        assert v.start_id != v.end_id

    @given(st.lists(text, min_size=1, max_size=5))
    def test_concatenated_corpus_same_charset(self, corpus):
        assert set(build_vocab(corpus).char_to_id) == set(build_vocab(["".join(corpus)]).char_to_id)

    def test_from_items_round_trip(self, ab):
        assert Vocab.from_items(ab.items()) == ab

    def test_from_items_rejects_gaps(self):
        with pytest.raises(ValueError):
            Vocab.from_items([(1, "<"), (2, ">"), (4, "a")])


class TestDualVocabs:
    def test_shared_is_union(self):
        vin, vout = build_vocabs(["ab"], ["cd"])
        assert vin is vout
        assert {"a", "b", "c", "d"} <= set(vin.char_to_id)

    def test_separate(self):
        vin, vout = build_vocabs(["ab"], ["cd"], shared=False)
        assert "c" not in vin and "a" not in vout


class TestEncode:
    def test_pad_at_end(self, ab):
        enc = encode("ab", ab, 6)
        assert list(enc.ids) == [1, 3, 4, 2, 0, 0]
        assert enc.source_len == 4

    def test_pre_truncation_drops_start_marker(self, ab):
        assert list(encode("ab", ab, 3).ids) == [3, 4, 2]

    def test_empty_sentence(self, ab):
        assert list(encode("", ab, 4).ids) == [1, 2, 0, 0]

    def test_unknown_character_names_position(self, ab):
        with pytest.raises(VocabError, match=r"'z' at position 1"):
            encode("az", ab, 6)

    def test_max_len_too_small(self, ab):
        with pytest.raises(ValueError):
            encode("a", ab, 1)

    @given(text, st.integers(2, 40))
    def test_length_and_padding(self, s, max_len):
        v = build_vocab([s, "a"])
        enc = encode(s, v, max_len)
        assert len(enc.ids) == max_len
        assert all(i != PAD_ID for i in enc.ids[: enc.source_len])
        assert all(i == PAD_ID for i in enc.ids[enc.source_len:])
        assert enc == encode(s, v, max_len)

    @given(text)
    def test_round_trip(self, s):
        v = build_vocab([s, "a"])
        assert decode(encode(s, v, len(s) + 2).ids, v) == s
        assert decode(encode(s, v, len(s) + 7).ids, v) == s


class TestDecode:
    def test_inverse(self, ab):
        assert decode([1, 3, 4, 2, 0, 0], ab) == "ab"

    def test_missing_start_marker(self, ab):
        assert decode([3, 4, 2], ab) == "ab"

    def test_empty_payload(self, ab):
        assert decode([1, 2], ab) == ""

    def test_stops_at_first_end_marker(self, ab):
        assert decode([1, 3, 2, 4, 2], ab) == "a"

    def test_unknown_id(self, ab):
        with pytest.raises(VocabError):
            decode([1, 9], ab)
