from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from latflow.codec import DecodeError, decode, decode_bytes, encode, encode_bytes
from latflow.lattice import BoundedPrefix, KeyedLattice, SealedSetIndexed

scalars = st.one_of(st.none(), st.booleans(), st.integers(-10**6, 10**6), st.text(max_size=6))
values = st.recursive(scalars, lambda inner: st.lists(inner, max_size=3).map(tuple), max_leaves=8)


class TestEncoding:
    @pytest.mark.parametrize("value,text", [
        (-4, "-4"),
        ("apple", '"apple"'),
        (("apple", 2), '("apple",2)'),
        ((1,), "(1,)"),
        (None, "none"),
        (True, "true"),
        (BoundedPrefix((("apple", 2),), 3), 'bp(("apple",2)|len=3)'),
        (BoundedPrefix((), None), "bp(|len=?)"),
        (SealedSetIndexed.of({0: "a", 2: "c"}, 3), 'ssiv{0:"a",2:"c"|seal=3}'),
        (SealedSetIndexed.of({}), "ssiv{|seal=?}"),
        (KeyedLattice({(1, "Basic"): SealedSetIndexed.of({0: "a"}, 1)}), 'keyed{(1,"Basic")=>ssiv{0:"a"|seal=1}}'),
    ])
    def test_canonical_text(self, value, text):
        assert encode(value) == text
        assert decode(text) == value

    def test_keyed_groups_are_sorted(self):
        a = KeyedLattice({2: SealedSetIndexed.of({0: "x"}), 1: SealedSetIndexed.of({0: "y"})})
        assert encode(a).startswith('keyed{1=>')

    def test_bool_and_int_stay_distinct(self):
        assert encode(True) != encode(1)
        assert decode(encode((1, True))) == (1, True)

    def test_lists_decode_as_tuples(self):
        assert decode(encode([1, [2, "x"]])) == (1, (2, "x"))

    @given(values)
    def test_round_trip(self, value):
        assert decode_bytes(encode_bytes(value)) == value
        assert encode(decode(encode(value))) == encode(value)

    @given(st.lists(st.tuples(st.text(max_size=3), st.integers(-5, 5)), max_size=4), st.booleans())
    def test_lattice_round_trip(self, items, sealed):
        bp = BoundedPrefix(tuple(items), len(items) if sealed else None)
        ss = SealedSetIndexed.of(dict(enumerate(items)), len(items) if sealed else None)
        assert decode(encode(bp)) == bp
        assert decode(encode(ss)) == ss

    @pytest.mark.parametrize("text", ["", "(1,", "bp(1|len=x)", "ssiv{a:1|seal=?}", "1 2", "frob"])
    def test_malformed(self, text):
        with pytest.raises(DecodeError):
            decode(text)

    def test_unencodable(self):
        with pytest.raises(TypeError):
            encode(object())
