from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest

from latflow.figures import corpus_dir
from latflow.ir import (
    ArityError,
    ChannelSpec,
    DataflowGraph,
    Edge,
    Endpoint,
    FunctionalDependency,
    IRError,
    OperatorNode,
    ParseError,
    UnknownOperator,
    deployment_from_dict,
    deployments_isomorphic,
    dump_deployment,
    graphs_isomorphic,
    load_deployment,
    parse_dsl,
    serialize_graph,
    single_node,
    validate_deployment,
    validate_graph,
)
from latflow.ir.deploy import deployment_to_dict
from latflow.registry import default_registry

HFS = sorted(p.name for p in corpus_dir().glob("*.hfs"))


def codes(diags):
    return [d.code for d in diags]


def read(name: str) -> str:
    return (corpus_dir() / name).read_text()


class TestParse:
    def test_figure_two(self):
        g = parse_dsl(read("fig2.hfs"))
        assert len(g.nodes) == 7
        join = g.of_kind("join")[0]
        ports = sorted(e.dst_port for e in g.in_edges(join.id))
        assert ports == [0, 1]
        assert g.name_of(join.id) == "lookup_class"
        assert [n.kind for n in map(g.node, g.topo_order())][-1] == "dest_sink_serde"

    def test_empty(self):
        g = parse_dsl("")
        assert g.nodes == () and g.edges == ()

    def test_comments_and_whitespace(self):
        g = parse_dsl("# header\nsource_iter(x)   // trailing\n  -> dest_sink_serde(o);\n")
        assert [n.kind for n in g.nodes] == ["source_iter", "dest_sink_serde"]

    def test_unknown_operator(self):
        with pytest.raises(UnknownOperator):
            parse_dsl("x = frobnicate();")

    def test_parse_error_position(self):
        with pytest.raises(ParseError) as info:
            parse_dsl("source_iter(x) -> map(identity)\n  -> ;")
        assert (info.value.line, info.value.col) == (2, 6)

    def test_wrong_argument_count(self):
        with pytest.raises(ArityError):
            parse_dsl("source_iter(x) -> map(identity, 2) -> dest_sink_serde(o);")

    def test_tee_needs_named_ports(self):
        with pytest.raises(ArityError):
            parse_dsl("source_iter(x) -> tee() -> dest_sink_serde(o);")

    def test_unknown_function_names_parse(self):
        g = parse_dsl("source_iter(x) -> map(not_registered) -> dest_sink_serde(o);")
        assert g.of_kind("map")[0].params == ("not_registered",)

    def test_forward_reference(self):
        g = parse_dsl("source_iter(a) -> [0]j; source_iter(b) -> [1]j; j = join() -> dest_sink_serde(o);")
        assert validate_graph(g) == []


class TestValidate:
    @pytest.mark.parametrize("name", HFS)
    def test_corpus_is_clean(self, name):
        assert validate_graph(parse_dsl(read(name)), default_registry()) == []

    def test_unfed_join_port(self):
        g = parse_dsl("source_iter(x) -> [1]j; j = join() -> dest_sink_serde(o);")
        assert codes(validate_graph(g)) == ["UnfedPort"]

    def test_cycle(self):
        g = parse_dsl("a = map(identity) -> a;")
        assert "CycleDetected" in codes(validate_graph(g))

    def test_fan_out_needs_tee(self):
        n = [OperatorNode("s", "source_iter", ("x",)), OperatorNode("a", "dest_sink_serde", ("o",)),
             OperatorNode("b", "dest_sink_serde", ("p",))]
        g = DataflowGraph(tuple(n), (Edge("s", "a"), Edge("s", "b")))
        assert codes(validate_graph(g)) == ["FanOutWithoutTee"]

    def test_dangling_edge(self):
        n = [OperatorNode("s", "source_iter", ("x",)), OperatorNode("m", "map", ("identity",))]
        g = DataflowGraph(tuple(n), (Edge("s", "m"), Edge("m", "ghost")))
        assert codes(validate_graph(g)) == ["DanglingEdge"]

    def test_dangling_output(self):
        n = [OperatorNode("s", "source_iter", ("x",)), OperatorNode("m", "map", ("identity",))]
        g = DataflowGraph(tuple(n), (Edge("s", "m"),))
        assert codes(validate_graph(g)) == ["DanglingOutput"]

    def test_group_by_init_must_be_bottom_of_merge(self):
        g = parse_dsl("source_iter(x) -> group_by(vec_bot, ssiv_merge) -> dest_sink_serde(o);")
        assert codes(validate_graph(g, default_registry())) == ["BadGroupByInit"]


class TestSerialize:
    @pytest.mark.parametrize("name", HFS)
    def test_corpus_is_byte_stable(self, name):
        text = read(name)
        assert serialize_graph(parse_dsl(text)) == text

    @pytest.mark.parametrize("name", HFS)
    def test_round_trip_isomorphic(self, name):
        g = parse_dsl(read(name))
        g2 = parse_dsl(serialize_graph(g))
        assert graphs_isomorphic(g, g2)
        assert serialize_graph(g2) == serialize_graph(g)

    def test_bp_and_ssiv_figures_differ_only_in_params(self):
        a, b = parse_dsl(read("fig3.hfs")), parse_dsl(read("fig4.hfs"))
        assert not graphs_isomorphic(a, b)
        assert graphs_isomorphic(a, b, ignore_params=True)

    def test_pushdown_changes_shape(self):
        assert not graphs_isomorphic(parse_dsl(read("fig2.hfs")), parse_dsl(read("fig5.hfs")), ignore_params=True)

    def test_isomorphism_ignores_ids_and_order(self):
        a = parse_dsl("source_iter(a) -> [0]j; source_iter(b) -> [1]j; j = join() -> dest_sink_serde(o);")
        b = parse_dsl("source_iter(b) -> [1]k; source_iter(a) -> [0]k; k = join() -> dest_sink_serde(o);")
        assert graphs_isomorphic(a, b)

    def test_isomorphism_sees_ports(self):
        a = parse_dsl("source_iter(a) -> [0]j; source_iter(b) -> [1]j; j = join() -> dest_sink_serde(o);")
        b = parse_dsl("source_iter(a) -> [1]j; source_iter(b) -> [0]j; j = join() -> dest_sink_serde(o);")
        assert not graphs_isomorphic(a, b)


class TestDeployment:
    def test_corpus_deployments_validate(self, figures):
        for name, d in figures.items():
            assert validate_deployment(d, default_registry()) == [], name

    def test_yaml_round_trip(self, figures, tmp_path: Path):
        for d in figures.values():
            path = tmp_path / "d.yaml"
            path.write_text(dump_deployment(d))
            again = load_deployment(path)
            assert deployments_isomorphic(d, again)
            assert deployment_to_dict(again) == deployment_to_dict(d)

    def test_fractions_survive(self):
        doc = {
            "nodes": {"a": {"program": "source_iter(x) -> dest_sink_serde(o);"},
                      "b": {"program": "source_stream_serde(i) -> dest_sink_serde(z);"}},
            "channels": {"c": {"producers": ["a.o"], "consumers": ["b.i"], "params": {"dup_prob": "1/3"}},
                         "z": {"producers": ["b.z"], "kind": "external"}},
        }
        d = deployment_from_dict(doc)
        assert d.channel("c").param_dict()["dup_prob"] == Fraction(1, 3)
        assert "1/3" in dump_deployment(d)

    def test_undeclared_endpoint(self):
        d = single_node("x", parse_dsl("source_stream_serde(i) -> dest_sink_serde(o);"))
        assert codes(validate_deployment(d)) == ["UndeclaredChannel"]

    def test_missing_endpoint(self, figures):
        d = figures["fig6"]
        bad = ChannelSpec("extra", (Endpoint("client", "nope"),), (Endpoint("server", "reqs_in"),))
        d = type(d)(d.name, d.nodes, d.channels + (bad,), d.fds, d.schemas)
        assert "MissingEndpoint" in codes(validate_deployment(d))

    def test_fd_attributes_must_exist(self, figures):
        d = figures["fig4"]
        d = type(d)(d.name, d.nodes, d.channels, (FunctionalDependency("client_class", ("client",), ("tier",)),),
                    d.schemas)
        assert codes(validate_deployment(d)) == ["BadFD"]

    def test_endpoint_syntax(self):
        with pytest.raises(IRError):
            Endpoint.parse("no-dot")
