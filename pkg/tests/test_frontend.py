"""Lexer/parser/annotation tests: the corpus idioms parse, desugarings
fire, errors carry spans, and parsing is total."""

import random

import pytest

from conftest import CORPUS, parse, parse_text

from rsccore.frontend import load_prelude, parse_annotation_text
from rsccore.frontend.lexer import LexError
from rsccore.frontend.parser import ParseError
from rsccore.frontend.types_parser import ParseErrorBase
from rsccore.syntax import (
    EFuncCall, EVar, RFun, RInter, body_str, pred_str, type_str, walk_body,
    walk_expr, BReturn, BSeq, BIte, stmt_exprs,
)


def _body_exprs(b):
    for node in walk_body(b):
        if isinstance(node, BReturn):
            yield from walk_expr(node.expr)
        elif isinstance(node, BIte):
            yield from walk_expr(node.cond)
        elif not isinstance(node, BSeq):
            for e in stmt_exprs(node):
                yield from walk_expr(e)


def test_fig1_reduce_minindex_parses():
    p = parse(CORPUS / "minindex.rsc")
    names = [f.name for f in p.functions]
    # the nested step is lifted to a third top-level function
    assert names == ["reduce", "minIndex", "step"]
    step = p.functions[2]
    assert step.captures == ["a"]


def test_alias_with_parameter():
    p = parse_text("type idx2<a> = {v:nat | v < len(a)}\n")
    assert "idx2" in p.aliases
    assert p.aliases["idx2"].params == ["a"]


def test_empty_file():
    p = parse_text("")
    assert p.functions == [] and p.classes == [] and p.top is None


def _resolve(t):
    from rsccore.frontend.prelude import raw_prelude_aliases
    from rsccore.frontend.types_parser import TypeResolver
    from rsccore.syntax import NO_SPAN
    return TypeResolver(raw_prelude_aliases(), set()).resolve(t, NO_SPAN)


def test_annotation_dependent_param():
    ann = parse_annotation_text("<T>(a:T[], i:idx<a>) => T")
    assert ann.kind == "signature"
    sig = _resolve(ann.rtype)
    assert isinstance(sig, RFun)
    assert "len(a)" in type_str(sig)


def test_annotation_assert_signature():
    ann = parse_annotation_text("(b:{v:bool | v = true}) => A")
    sig = ann.rtype
    assert isinstance(sig, RFun)
    assert pred_str(sig.params[0][1].pred) == "v = true"


def test_annotation_stacked_intersection():
    ann = parse_annotation_text(
        "<A,B>(a:A[]+, f:(A, A, idx<a>) => A) => A\n"
        "<A,B>(a:A[], f:(B, A, idx<a>) => B, x:B) => B")
    sig = _resolve(ann.rtype)
    assert isinstance(sig, RInter)
    assert len(sig.conjuncts) == 2
    first = sig.conjuncts[0]
    assert "0 < len(v)" in type_str(first.params[0][1])


def test_prelude_lookup_assert():
    sigs = load_prelude()
    assert type_str(sigs["assert"]) == "<A>(b:{v:bool | v = true}) => A"


def test_prelude_lookup_length():
    sigs = load_prelude()
    s = type_str(sigs["length"])
    assert "v = len(a)" in s and "0 <= v" in s


def test_prelude_lookup_plus():
    sigs = load_prelude()
    assert type_str(sigs["+"]) == \
        "(x:number, y:number) => {v:number | v = x + y}"


def test_array_ops_desugar():
    p = parse_text("""
/*@ (a: number[], i: idx<a>, e: number) => number */
function f(a, i, e) {
  a[i] = e;
  var n = a.length;
  var s = a.slice(1);
  return a[i];
}
""")
    fn = p.functions[0]
    calls = [e.callee.name for e in _body_exprs(fn.body)
             if isinstance(e, EFuncCall) and isinstance(e.callee, EVar)]
    assert "set" in calls and "length" in calls and "slice" in calls \
        and "get" in calls


def test_compound_assignment_desugar():
    p = parse_text("""
/*@ (x: number) => number */
function f(x) {
  x += 2;
  x++;
  return x;
}
""")
    s = body_str(p.functions[0].body)
    assert "(x + 2)" in s and "(x + 1)" in s


def test_parse_error_has_span():
    with pytest.raises((ParseError, ParseErrorBase)) as ei:
        parse_text("function f( { }")
    assert ei.value.span.line >= 1
    assert ei.value.span.col >= 1


def test_lex_error_has_span():
    with pytest.raises(LexError) as ei:
        parse_text("var x = `;")
    assert ei.value.span.line == 1


def test_unknown_alias_arity():
    with pytest.raises(ParseErrorBase):
        parse_text("/*@ (a: idx<a,b>) => number */\nfunction f(a) { return 0; }")


def test_parse_is_total_fuzz():
    """Any input produces a Program or a positioned diagnostic, never an
    unstructured crash."""
    rng = random.Random(20260808)
    alphabet = "abcxyz01(){}<>=+-*/;:,.|&! \n\"'@#funcvarift"
    for _ in range(300):
        text = "".join(rng.choice(alphabet)
                       for _ in range(rng.randrange(0, 80)))
        try:
            parse_text(text)
        except (LexError, ParseError, ParseErrorBase):
            pass


def test_return_inside_loop_rejected():
    with pytest.raises(ParseErrorBase):
        parse_text("""
/*@ (n: number) => number */
function f(n) {
  while (n > 0) { return n; }
  return 0;
}
""")


def test_var_redeclaration_is_assignment():
    p = parse_text("""
/*@ (n: number) => number */
function f(n) {
  var x = 1, x2;
  var x = n;
  return x;
}
""")
    s = body_str(p.functions[0].body)
    assert s.count("var x =") == 1


def test_multi_return_normalization():
    p = parse_text("""
/*@ (n: number) => number */
function f(n) {
  if (n > 0) return 1;
  return 2;
}
""")
    s = body_str(p.functions[0].body)
    assert "return 1" in s and "return 2" in s and "if" in s


def test_alias_cycle_detected():
    with pytest.raises(ParseErrorBase):
        parse_text("type AA = BB\ntype BB = AA\n"
                   "/*@ (x: AA) => number */\nfunction f(x) { return 0; }")


def test_duplicate_function_rejected():
    with pytest.raises(ParseErrorBase):
        parse_text("/*@ (x: number) => number */\nfunction f(x) { return x; }\n"
                   "/*@ (x: number) => number */\nfunction f(x) { return x; }")


def test_duplicate_alias_rejected():
    with pytest.raises(ParseErrorBase):
        parse_text("type nat = {v:number | v >= 0}\n")
