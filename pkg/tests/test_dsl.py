import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtsurf import parse_surface, surface_text
from mtsurf.dsl import Bin, Call, Neg, Num, Var, expr_text
from mtsurf.errors import BadDomainError, ParseError, UnboundIdentifierError


def test_basic_tuple():
    s = parse_surface("(u, v, u*v, u*v) on [0,1]x[0,1]")
    assert len(s.components) == 4
    assert s.domain == ((0.0, 1.0), (0.0, 1.0))
    assert s.params == ()


def test_parameter_binding():
    s = parse_surface("let a = 2; (a*cos(u), a*sin(u), v, 0) on [0,6.28]x[-1,1]")
    assert s.param_map == {"a": 2.0}
    assert s.domain == ((0.0, 6.28), (-1.0, 1.0))


def test_unbound_identifier_position():
    with pytest.raises(UnboundIdentifierError) as err:
        parse_surface("(u, w, 0, 0) on [0,1]x[0,1]")
    assert err.value.line == 1 and err.value.col == 5


def test_inverted_domain():
    with pytest.raises(BadDomainError):
        parse_surface("(u, v, 0, 0) on [1,0]x[0,1]")
    with pytest.raises(BadDomainError):
        parse_surface("(u, v, 0, 0) on [0,1]x[2,2]")


def test_unknown_function():
    with pytest.raises(ParseError):
        parse_surface("(tan(u), v, 0, 0) on [0,1]x[0,1]")


def test_let_cannot_shadow():
    with pytest.raises(ParseError):
        parse_surface("let u = 1; (u, v, 0, 0) on [0,1]x[0,1]")
    with pytest.raises(ParseError):
        parse_surface("let sin = 1; (u, v, 0, 0) on [0,1]x[0,1]")


def test_let_must_be_constant():
    with pytest.raises(UnboundIdentifierError):
        parse_surface("let a = u + 1; (a, v, 0, 0) on [0,1]x[0,1]")


def test_domain_may_use_params():
    s = parse_surface("let L = 2; (u, v, 0, 0) on [0,L]x[-L,L]")
    assert s.domain == ((0.0, 2.0), (-2.0, 2.0))


def test_precedence_and_unary():
    s = parse_surface("(-u^2, u - -v, 2^-2*u, u/v/2) on [0.5,1]x[0.5,1]")
    c = s.components
    assert c[0] == Neg(Bin("^", Var("u"), Num(2.0)))
    assert c[1] == Bin("-", Var("u"), Neg(Var("v")))
    assert c[2] == Bin("*", Bin("^", Num(2.0), Neg(Num(2.0))), Var("u"))
    assert c[3] == Bin("/", Bin("/", Var("u"), Var("v")), Num(2.0))


def test_power_right_associative():
    s = parse_surface("(u^2^3, v, 0, 0) on [0.5,1]x[0,1]")
    assert s.components[0] == Bin("^", Var("u"), Bin("^", Num(2.0), Num(3.0)))


def test_roundtrip_fixed_cases():
    texts = [
        "(u, v, u*v, u*v) on [0,1]x[0,1]",
        "let a = 2; (a*cos(u), a*sin(u), v, 0) on [0,6.28]x[-1,1]",
        "(-(u*v), u - -v, sin(u)^2, exp(u + v)) on [-1,1]x[-1,1]",
        "(u^(v + 1), sqrt(u + 2), log(u + 3), cosh(v)) on [0.5,1]x[0.5,1]",
    ]
    for text in texts:
        s = parse_surface(text)
        assert parse_surface(surface_text(s)) == s


# -- grammar-directed expression generator -------------------------------------

_leaf = st.one_of(
    st.builds(Num, st.floats(0, 10, allow_nan=False, allow_infinity=False)),
    st.sampled_from([Var("u"), Var("v")]),
)


def _extend(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(Bin, st.sampled_from(["+", "-", "*", "/", "^"]), children, children),
        st.builds(Call, st.sampled_from(["sin", "cos", "sinh", "cosh", "exp", "log", "sqrt"]),
                  children),
    )


_expr = st.recursive(_leaf, _extend, max_leaves=20)


@settings(max_examples=150, deadline=None)
@given(_expr, _expr)
def test_pretty_parse_identity(e1, e2):
    s_text = f"({expr_text(e1)}, {expr_text(e2)}, u, v) on [0,1]x[0,1]"
    s = parse_surface(s_text)
    assert parse_surface(surface_text(s)) == s
    # and the printed first component reparses to the generated tree
    assert s.components[0] == e1
    assert s.components[1] == e2


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="uvw+-*/^()[],;=.0123456789 sincoshexplgqrta\nonlet", max_size=80))
def test_fuzz_never_crashes(text):
    try:
        parse_surface(text)
    except ParseError as exc:
        assert exc.line >= 1 and exc.col >= 1


def test_content_hash_stable():
    s1 = parse_surface("(u, v, 0, 0) on [0,1]x[0,1]")
    s2 = parse_surface("(u,v,0,0)   on [0, 1] x [0, 1]")
    assert s1.content_hash() == s2.content_hash()
    s3 = parse_surface("(u, v, 1, 0) on [0,1]x[0,1]")
    assert s1.content_hash() != s3.content_hash()
