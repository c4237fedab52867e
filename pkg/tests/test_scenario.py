from __future__ import annotations

import pytest

from latflow.figures import FORCED_CUT
from latflow.lattice import BoundedPrefix, SealedSetIndexed
from latflow.scenario import (
    LineItem,
    Scenario,
    Session,
    apples,
    dump_scenario,
    generate_scenario,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    sequential_fold_oracle,
)
from latflow.verify import CONFLICT, cmd_verify, render_view, sealed_value


class TestScenario:
    def test_generation_is_deterministic(self):
        assert generate_scenario(1, 1, 3) == generate_scenario(1, 1, 3)

    def test_lengths_and_fd(self):
        sc = generate_scenario(2, 3, 5)
        assert len(sc.sessions) == 3
        assert all(1 <= s.declared_len <= 5 for s in sc.sessions)
        classes = {}
        for client, cls in sc.client_class:
            assert classes.setdefault(client, cls) == cls

    def test_apples(self):
        sc = apples()
        (s,) = sc.sessions
        assert (s.client, s.cls, s.declared_len) == (1, "Basic", 3)
        assert s.requests == (LineItem("apple", 2), LineItem("apple", 2), LineItem("apple", -4))

    def test_apples_fixture(self, corpus):
        assert load_scenario(str(corpus("apples.yaml"))) == apples()

    def test_duplicate_client_rejected(self):
        with pytest.raises(ValueError):
            Scenario("bad", (Session(1, "Basic"), Session(1, "Prime")))

    def test_round_trip(self):
        sc = generate_scenario(4, 4, 6)
        assert scenario_from_dict(scenario_to_dict(sc)) == sc
        assert "gen-4-4-6" in dump_scenario(sc)

    def test_gen_spec(self):
        assert load_scenario("gen:3:2:4") == generate_scenario(3, 2, 4)

    def test_streams_are_interleaved(self):
        sc = generate_scenario(6, 3, 4)
        raw = sc.stream("raw")
        assert len(raw) == sum(s.declared_len for s in sc.sessions)
        assert [c for c, _ in raw[:3]] == [1, 2, 3]

    def test_bp_stream_is_a_chain(self):
        bp = [p for c, p in apples().stream("bp")]
        assert [len(p.prefix) for p in bp] == [1, 2, 3]
        assert all(p.declared_len == 3 for p in bp)

    def test_ssiv_stream_seals_last_entry(self):
        seals = [p.seal for _, p in apples().stream("ssiv")]
        assert seals == [None, None, 3]

    def test_empty_session_is_sealed(self):
        sc = Scenario("e", (Session(1, "Basic"),))
        assert sc.stream("ssiv") == ((1, SealedSetIndexed((), 0)),)
        assert sc.stream("bp") == ((1, BoundedPrefix((), 0)),)
        assert sc.stream("raw") == ()
        assert cmd_verify(["ssiv", "decoupled_client"], sc, 5, against_oracle=True).equivalent

    def test_oracle(self):
        assert sequential_fold_oracle(apples()) == {(1, "Basic"): (("apple", 2), ("apple", 2), ("apple", -4))}


class TestSealedView:
    def test_only_top_points_count(self):
        assert sealed_value(BoundedPrefix(("a",), 2)) is None
        assert sealed_value(BoundedPrefix(("a", "b"), 2)) == ("a", "b")
        assert sealed_value(SealedSetIndexed.of({1: "b", 0: "a"}, 2)) == ("a", "b")
        assert sealed_value(SealedSetIndexed.of({0: "a"})) is None

    def test_rendering(self):
        lines = render_view({(1, "Basic"): (("apple", 2),), (2, "Prime"): CONFLICT})
        assert lines == ['client=1 class=Basic cart=[("apple",2)]', "client=2 class=Prime cart=CONFLICT"]


class TestVerify:
    def test_single_seed_is_vacuous(self):
        result = cmd_verify(["ssiv"], apples(), 1)
        assert result.equivalent and result.runs == 2

    def test_lattice_variants_agree_on_apples(self):
        result = cmd_verify(["ssiv", "pushed", "decoupled_server", "decoupled_client"], apples(), 100,
                            against_oracle=True)
        assert result.equivalent, result.report()
        assert result.runs == 4 * 101

    def test_forced_cut_diverges_with_witness(self):
        sc = generate_scenario(1, 3, 5)
        result = cmd_verify([FORCED_CUT], sc, 100)
        assert result.outcome == "Diverged"
        w = result.witness
        assert w.seed is not None and w.expected != w.got
        # the witness replays
        again = cmd_verify([FORCED_CUT], sc, 1, seed_base=w.seed, against_oracle=False)
        assert again.outcome == "Diverged"

    def test_report_names_witness(self):
        result = cmd_verify([FORCED_CUT], generate_scenario(1, 3, 5), 100)
        assert any(line.startswith("witness: variant orig_cut") for line in result.report())

    def test_needs_a_seed(self):
        with pytest.raises(ValueError):
            cmd_verify(["ssiv"], apples(), 0)
