import pytest

from timerank import logic as L
from timerank.frontend import format_augmented, parse_property, parse_proof, parse_system
from timerank.ranking import DomLex, Lex, Pos, TimerRank, constructor_count
from timerank.sexpr import ParseError, read_all

from conftest import DATA, EXAMPLES, bundle


@pytest.mark.parametrize("name", EXAMPLES)
def test_shipped_examples_load(name):
    b = bundle(name)
    assert b.proof is not None
    assert b.system.transitions


def test_ticket_vocabulary():
    sig = bundle("ticket", proof=False).system.signature
    assert set(sig.sorts) == {"Thread", "Ticket"}
    locations = {"idle", "waiting", "critical"}
    assert locations <= set(sig.relations)
    assert all(sig.relations[r] == ("Thread",) for r in locations)
    assert sig.functions["myt"] == (("Thread",), "Ticket")
    assert sig.functions["serv"] == ((), "Ticket")
    assert sig.functions["next"] == ((), "Ticket")
    assert {"le", "zero"} <= sig.rigid
    assert "myt" not in sig.rigid


def test_ticket_property_shape():
    phi = bundle("ticket", proof=False).property.formula
    assert isinstance(phi, L.Implies)
    assert isinstance(phi.lhs, L.Forall)
    assert phi.lhs.body == L.Globally(L.Eventually(L.Rel("scheduled", (L.Var("x", "Thread"),))))


def _err(fn, *args):
    with pytest.raises(ParseError) as info:
        fn(*args)
    return str(info.value)


def test_system_errors_carry_positions():
    assert "missing transition" in _err(parse_system, "sort A\nrelation (p A)\n")
    msg = _err(parse_system, "sort A\nsort A\ntransition true\n", "a.sys")
    assert msg.startswith("a.sys:2:6:") and "first declared at 1:6" in msg
    assert "outside a transition" in _err(parse_system, "sort A\nrelation (p A)\nconstant (a A)\ninit (p' a)\ntransition true")
    assert "reserved" in _err(parse_system, "sort Timer\ntransition true")
    assert "binary over one sort" in _err(parse_system, "sort A\nrelation (p A) well-founded\ntransition true")
    assert "unknown sort" in _err(parse_system, "sort A\nrelation (p B)\ntransition true")
    assert "temporal" in _err(parse_system, "sort A\nrelation (p A)\ntransition (forall ((x A)) (G (p x)))")


def test_unbalanced_parentheses():
    with pytest.raises(ParseError):
        read_all("(sort A")
    with pytest.raises(ParseError):
        read_all("sort A)")


def test_property_must_be_closed_and_well_sorted():
    system = bundle("ticket", proof=False).system
    assert "unknown variable" in _err(parse_property, "property (F (waiting x))", system)
    assert "sort" in _err(parse_property, "property (G (critical zero))", system)
    system = parse_system("sort A\nrelation (p)\ntransition true")
    assert parse_property("property (G p)", system).formula == L.Globally(L.Rel("p"))


def test_proof_errors():
    aug = bundle("ticket", proof=False).augmented
    assert "wrong number of arguments" in _err(parse_proof, "ranking (Cond (Bin true))", aug)
    assert "unknown ranking constructor" in _err(parse_proof, "ranking (Foo)", aug)
    assert "duplicate invariant" in _err(parse_proof, "invariant a true\ninvariant a true\nranking (Bin true)", aug)
    msg = _err(parse_proof, "ranking (Bin (= (timer (G (critical x0))) 0))", aug)
    assert "timers exist for" in msg and "(G (not (critical x0)))" in msg


def test_unnamed_invariants_are_numbered():
    aug = bundle("ticket", proof=False).augmented
    proof = parse_proof("invariant true\ninvariant named true\ninvariant true\nranking (Bin true)", aug)
    assert [i.name for i in proof.invariants] == ["inv1", "named", "inv3"]


def test_lexarray_ranking_structure():
    proof = bundle("lexarray").proof
    assert isinstance(proof.ranking, DomLex)
    assert isinstance(proof.ranking.child, Lex)
    assert isinstance(proof.ranking.child.children[0], Pos)
    assert constructor_count(proof.ranking) == 4
    assert len(proof.invariants) == 2
    assert len(proof.approximations) == 1


def test_binarycounter_has_no_invariants():
    proof = bundle("binarycounter").proof
    assert proof.invariants == ()
    assert constructor_count(proof.ranking) == 4


def test_ticket_ranking_starts_with_the_starvation_timer():
    proof = bundle("ticket").proof
    first = proof.ranking.children[0]
    assert isinstance(first, TimerRank)
    assert L.to_sexpr(first.label) == "(and (waiting x0) (G (not (critical x0))))"


def test_reduce_output_is_stable():
    b = bundle("ticket", proof=False)
    text = format_augmented(b.augmented)
    assert text == format_augmented(bundle("ticket", proof=False).augmented)
    assert "constant (x0 Thread) immutable" in text
    assert text.endswith("\n")


def test_data_directory_has_all_examples():
    for name in EXAMPLES:
        for ext in ("sys", "prop", "proof"):
            assert (DATA / f"{name}.{ext}").is_file()
