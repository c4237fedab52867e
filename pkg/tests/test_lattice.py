from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latflow.lattice import (
    BoundedPrefix,
    ConflictingEntry,
    ConflictingSeal,
    IncomparableLattices,
    KeyedLattice,
    SealedSetIndexed,
    bp_bottom,
    bp_is_top,
    bp_leq,
    bp_merge,
    bp_to_ssiv,
    keyed_leq,
    keyed_merge,
    merge,
    ssiv_bottom,
    ssiv_is_top,
    ssiv_leq,
    ssiv_merge,
    ssiv_to_bp,
)
from strategies import bp_triples, keyed_triples, sessions, ssiv_triples

S = SealedSetIndexed.of


class TestBoundedPrefix:
    def test_bottom_is_identity(self):
        assert bp_merge(bp_bottom(), BoundedPrefix(("a", "b"), 3)) == BoundedPrefix(("a", "b"), 3)

    def test_longer_prefix_wins(self):
        assert bp_merge(BoundedPrefix(("a",), 3), BoundedPrefix(("a", "b"), 3)) == BoundedPrefix(("a", "b"), 3)

    def test_idempotent(self):
        p = BoundedPrefix(("a", "b"), 3)
        assert bp_merge(p, p) == p

    def test_divergent_prefixes_are_incomparable(self):
        with pytest.raises(IncomparableLattices):
            bp_merge(BoundedPrefix(("a",), 3), BoundedPrefix(("b",), 3))

    def test_conflicting_lengths_are_incomparable(self):
        with pytest.raises(IncomparableLattices):
            bp_merge(BoundedPrefix(("a",), 3), BoundedPrefix(("a",), 4))

    def test_length_knowledge_is_unioned(self):
        assert bp_merge(BoundedPrefix(("a", "b"), None), BoundedPrefix(("a",), 2)) == BoundedPrefix(("a", "b"), 2)

    @pytest.mark.parametrize("point,top", [
        (BoundedPrefix(("x", "y", "z"), 3), True),
        (BoundedPrefix(("x",), 3), False),
        (BoundedPrefix((), 0), True),
        (BoundedPrefix((), None), False),
    ])
    def test_is_top(self, point, top):
        assert bp_is_top(point) is top

    def test_prefix_longer_than_declared_rejected(self):
        with pytest.raises(ValueError):
            BoundedPrefix(("a", "b"), 1)


class TestSealedSet:
    def test_union_reaches_top(self):
        merged = ssiv_merge(S({0: "a"}), S({1: "b"}, 2))
        assert merged == S({0: "a", 1: "b"}, 2)
        assert ssiv_is_top(merged)

    def test_union_is_order_independent_over_all_interleavings(self):
        # brute force: every delivery order of the two entries, with and without a repeat
        parts = [S({0: "a"}), S({1: "b"}, 2)]
        results = set()
        for seq in itertools.chain(itertools.permutations(parts), itertools.product(parts, repeat=3)):
            acc = ssiv_bottom()
            for p in seq:
                acc = ssiv_merge(acc, p)
            if ssiv_is_top(acc):
                results.add(acc)
        assert results == {S({0: "a", 1: "b"}, 2)}

    def test_conflicting_entry(self):
        with pytest.raises(ConflictingEntry):
            ssiv_merge(S({0: "a"}), S({0: "b"}))

    def test_conflicting_seal(self):
        with pytest.raises(ConflictingSeal):
            ssiv_merge(S({}, 2), S({}, 3))

    def test_entry_beyond_seal(self):
        with pytest.raises(ConflictingSeal):
            ssiv_merge(S({4: "e"}), S({}, 2))

    @pytest.mark.parametrize("point,top", [
        (S({0: "a", 1: "b"}, 2), True),
        (S({0: "a"}, 2), False),
        (S({}, 0), True),
        (S({0: "a"}), False),
    ])
    def test_is_top(self, point, top):
        assert ssiv_is_top(point) is top

    @given(ssiv_triples())
    def test_idempotent(self, t):
        assert ssiv_merge(t[0], t[0]) == t[0]


class TestIsomorphism:
    def test_bp_to_ssiv(self):
        assert bp_to_ssiv(BoundedPrefix(("a", "b"), 3)) == S({0: "a", 1: "b"}, 3)

    def test_gappy_set_projects_to_contiguous_prefix(self):
        assert ssiv_to_bp(S({0: "a", 2: "c"}, 3)) == BoundedPrefix(("a",), 3)

    @given(st.dictionaries(st.integers(0, 6), st.sampled_from("abc"), max_size=7), st.integers(7, 9))
    def test_projection_matches_brute_force(self, entries, seal):
        n = 0
        while n in entries:
            n += 1
        expected = BoundedPrefix(tuple(entries[i] for i in range(n)), seal)
        assert ssiv_to_bp(S(entries, seal)) == expected

    @given(sessions, st.data())
    def test_round_trip_is_identity(self, session, data):
        cut = data.draw(st.integers(0, len(session)))
        p = BoundedPrefix(session[:cut], data.draw(st.sampled_from([None, len(session)])))
        assert ssiv_to_bp(bp_to_ssiv(p)) == p

    @given(sessions, st.randoms(use_true_random=False))
    def test_chain_images_fold_to_image_of_top(self, session, rnd):
        chain = [BoundedPrefix(session[:i], len(session)) for i in range(len(session) + 1)]
        images = [bp_to_ssiv(p) for p in chain]
        rnd.shuffle(images)
        acc = ssiv_bottom()
        for img in images:
            acc = ssiv_merge(acc, img)
        assert acc == bp_to_ssiv(chain[-1])


class TestKeyed:
    def test_bottom_identity(self):
        x = KeyedLattice({1: S({0: "a"})})
        assert keyed_merge(x, KeyedLattice({})) == x

    def test_disjoint_keys(self):
        x, y = S({0: "a"}), S({0: "b"}, 1)
        assert keyed_merge(KeyedLattice({1: x}), KeyedLattice({2: y})) == KeyedLattice({1: x, 2: y})

    def test_inner_error_names_the_key(self):
        with pytest.raises(ConflictingEntry) as info:
            keyed_merge(KeyedLattice({7: S({0: "a"})}), KeyedLattice({7: S({0: "b"})}))
        assert info.value.key == 7

    def test_all_twelve_orders_agree(self):
        rnd = random.Random(5)
        session = tuple(("apple", q) for q in range(4))
        points = []
        for _ in range(3):
            groups = {}
            for key in (1, 2, 3):
                if rnd.random() < 0.7:
                    picks = {i: session[i] for i in range(4) if rnd.random() < 0.5}
                    groups[key] = S(picks, 4 if rnd.random() < 0.5 else None)
            points.append(KeyedLattice(groups))
        results = []
        for a, b, c in itertools.permutations(points):
            results.append(keyed_merge(keyed_merge(a, b), c))
            results.append(keyed_merge(a, keyed_merge(b, c)))
        assert len(results) == 12
        assert all(r == results[0] for r in results)


# -- algebraic laws (the exhaustive 1000-sample versions live in the acceptance suite)

LAW_SETTINGS = settings(max_examples=200, deadline=None)


@pytest.mark.parametrize("triples,leq", [
    (bp_triples(), bp_leq),
    (ssiv_triples(), ssiv_leq),
    (keyed_triples(), keyed_leq),
])
class TestLaws:
    def test_aci(self, triples, leq):
        @LAW_SETTINGS
        @given(triples)
        def check(t):
            a, b, c = t
            assert merge(a, merge(b, c)) == merge(merge(a, b), c)
            assert merge(a, b) == merge(b, a)
            assert merge(a, a) == a

        check()

    def test_order_consistent_with_merge(self, triples, leq):
        @LAW_SETTINGS
        @given(triples)
        def check(t):
            a, b, _ = t
            assert (merge(a, b) == b) == leq(a, b)

        check()
