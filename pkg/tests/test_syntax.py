import pytest

from catverify import parse_program, pretty_program, lookup
from catverify.syntax import (AsyncSyntaxError, Assign, FileOp, Lit, Return,
                              Seq, Skip, SyncCall, Var, eval_expr, seq_items)
from catverify.syntax import LookupError_


def test_parse_files_program(files_program):
    assert files_program.proc_names() == ["do", "operate", "closeF"]
    assert files_program.init_decls == ("file",)
    init_items = seq_items(files_program.init_body)
    # four statements plus the implicit trailing return
    assert len(init_items) == 5
    assert isinstance(init_items[-1], Return)


def test_parse_minimal_program():
    p = parse_program("{ skip }")
    assert p.proc_names() == []
    assert p.init_body == Seq(Skip(), Return())


def test_duplicate_procedure_name_rejected():
    with pytest.raises(AsyncSyntaxError, match="duplicate"):
        parse_program("m(){return} m(){return} { m() }")


def test_reserved_init_name_rejected():
    with pytest.raises(AsyncSyntaxError, match="reserved"):
        parse_program("init(){return} { skip }")


def test_unresolved_call_rejected():
    with pytest.raises(AsyncSyntaxError, match="undeclared"):
        parse_program("m(){ ghost(); return } { m() }")


def test_missing_trailing_return_rejected():
    with pytest.raises(AsyncSyntaxError, match="must end with return"):
        parse_program("m(){ skip } { m() }")


def test_mid_body_return_rejected():
    with pytest.raises(AsyncSyntaxError, match="final statement"):
        parse_program("m(){ return; skip; return } { m() }")


def test_return_inside_if_rejected():
    with pytest.raises(AsyncSyntaxError):
        parse_program("m(){ if (true) { return }; return } { m() }")


def test_file_operand_forms():
    p = parse_program('m(){ open("a.txt"); close(f); return } { f; m() }')
    body = seq_items(lookup("m", p))
    assert body[0] == FileOp("open", Lit("a.txt"))
    assert body[1] == FileOp("close", Var("f"))
    with pytest.raises(AsyncSyntaxError):
        parse_program("m(){ open(1 + 2); return } { m() }")


def test_syntax_error_has_position():
    with pytest.raises(AsyncSyntaxError) as err:
        parse_program("m(){ skip;; return } { m() }")
    assert err.value.line is not None


def test_lookup_returns_body_with_return(files_program):
    body = seq_items(lookup("closeF", files_program))
    assert isinstance(body[0], FileOp) and body[0].op == "close"
    assert isinstance(body[-1], Return)


def test_lookup_init_reserved(files_program):
    with pytest.raises(LookupError_):
        lookup("init", files_program)


def test_lookup_unknown(files_program):
    with pytest.raises(LookupError_):
        lookup("absent", files_program)


def test_pretty_parse_roundtrip_fixed_point(files_program, fanout_program):
    for program in (files_program, fanout_program):
        once = pretty_program(program)
        assert pretty_program(parse_program(once)) == once


def test_roundtrip_on_random_programs():
    import random
    from catverify.gen import gen_program
    rng = random.Random(7)
    for _ in range(60):
        program = gen_program(rng)
        once = pretty_program(program)
        again = parse_program(once)
        assert pretty_program(again) == once
        for proc in again.procedures:
            assert isinstance(seq_items(proc.body)[-1], Return)


def test_sequencing_right_associated():
    p = parse_program("{ skip; skip; skip }")
    body = p.init_body
    assert isinstance(body, Seq)
    assert isinstance(body.first, Skip)
    assert isinstance(body.rest, Seq)


def test_expression_evaluation_total():
    assert eval_expr(Lit(2), {}) == 2
    assert eval_expr(Var("x"), {"x": 5}) == 5
    assert eval_expr(Var("missing"), {}) == 0
    from catverify.syntax import BinOp, Not
    assert eval_expr(BinOp("+", Lit(2), Lit(3)), {}) == 5
    # type mismatches collapse to the designated default
    assert eval_expr(BinOp("+", Lit("a"), Lit(3)), {}) == 0
    assert eval_expr(BinOp("<", Lit("a"), Lit(3)), {}) == 0
    assert eval_expr(BinOp("==", Lit(True), Lit(1)), {}) is False
    assert eval_expr(BinOp("==", Lit("x"), Lit("x")), {}) is True
    assert eval_expr(Not(Lit(False)), {}) is True
    assert eval_expr(Not(Lit(3)), {}) == 0
    assert eval_expr(BinOp("&&", Lit(True), Lit(False)), {}) is False
