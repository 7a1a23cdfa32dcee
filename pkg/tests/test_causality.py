"""Wiring syntax: construction, composition, validation, serialization."""
import pytest

from pnbayes.causality import (CausalityGraph, Generator, Wire, dump_graph,
                               input_wire, node_graph, parse_wire, seq,
                               tensor, validate, wire_str, wiring_duplicate,
                               wiring_identity, wiring_swap,
                               wiring_terminate)
from pnbayes.errors import TypeMismatch, ValidationError


def test_wire_literals_round_trip():
    assert wire_str(input_wire(2)) == "in:2"
    assert wire_str(Wire(5, 1)) == "5:1"
    assert parse_wire("in:2") == Wire(-1, 2)
    assert parse_wire("5:1") == Wire(5, 1)
    for bad in ("", "x:y", "5", "in:"):
        with pytest.raises(ValidationError):
            parse_wire(bad)


def test_node_graph_shape():
    g = node_graph(Generator("f", 2, 1))
    assert g.in_arity == 2 and g.out_arity == 1
    assert g.sources == ((Wire(-1, 1), Wire(-1, 2)),)
    assert g.out == (Wire(0, 1),)
    assert validate(g) == []


def test_pure_wirings():
    assert wiring_identity(2).out == (Wire(-1, 1), Wire(-1, 2))
    assert wiring_swap(1, 2).out == (Wire(-1, 2), Wire(-1, 3), Wire(-1, 1))
    assert wiring_duplicate(1).out == (Wire(-1, 1), Wire(-1, 1))
    assert wiring_terminate(3).out == ()
    assert wiring_terminate(3).in_arity == 3


def test_seq_renumbers_and_substitutes():
    f = node_graph(Generator("f", 1, 2))
    g = node_graph(Generator("g", 2, 1))
    h = seq(f, g)
    assert h.in_arity == 1 and h.out_arity == 1
    assert [x.name for x in h.gens] == ["f", "g"]
    # g (now node 1) reads f's two output ports
    assert h.sources[1] == (Wire(0, 1), Wire(0, 2))
    assert h.out == (Wire(1, 1),)
    assert validate(h) == []
    with pytest.raises(TypeMismatch):
        seq(f, f)


def test_seq_hides_unused_outputs():
    f = node_graph(Generator("f", 0, 2))
    h = seq(f, wiring_terminate(2))
    assert h.out == ()
    assert set(h.internal_wires()) == {Wire(0, 1), Wire(0, 2)}


def test_tensor_offsets_inputs_and_nodes():
    f = node_graph(Generator("f", 1, 1))
    g = node_graph(Generator("g", 1, 1))
    t = tensor(f, g)
    assert t.in_arity == 2
    assert t.sources == ((Wire(-1, 1),), (Wire(-1, 2),))
    assert t.out == (Wire(0, 1), Wire(1, 1))
    assert validate(t) == []


def test_scope_deduplicates_and_sorts():
    g = CausalityGraph(0, (Generator("s", 0, 1), Generator("f", 2, 1)),
                       ((), (Wire(0, 1), Wire(0, 1))),
                       (Wire(1, 1),))
    assert g.scope(1) == (Wire(0, 1), Wire(1, 1))
    assert g.internal_wires() == (Wire(0, 1),)


def test_validate_diagnostics():
    bad = CausalityGraph(1, (Generator("f", 2, 1),),
                         ((Wire(-1, 1),),), (Wire(0, 1),))
    assert any("reads 1 wires" in e for e in validate(bad))

    missing = CausalityGraph(0, (Generator("f", 1, 1),),
                             ((Wire(3, 1),),), (Wire(0, 1),))
    assert any("missing node" in e for e in validate(missing))

    bad_port = CausalityGraph(1, (), (), (Wire(-1, 2),))
    assert any("no graph input" in e for e in validate(bad_port))

    cyclic = CausalityGraph(
        0, (Generator("f", 1, 1), Generator("g", 1, 1)),
        ((Wire(1, 1),), (Wire(0, 1),)), (Wire(1, 1),))
    assert any("cycle" in e for e in validate(cyclic))


def test_dump_graph_lists_nodes_then_outputs():
    f = node_graph(Generator("f", 1, 2))
    g = node_graph(Generator("g", 2, 1))
    text = dump_graph(seq(f, g))
    lines = text.splitlines()
    assert lines[0] == "0 f inputs=[in:1]"
    assert lines[1] == "1 g inputs=[0:1,0:2]"
    assert lines[2] == "out=[1:1]"
