import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustreg import exprlang as ex


def parse(text, dim=1):
    return ex.parse_expression(text, dim)


class TestParsing:
    def test_sqrt_abs_chain(self):
        tree = parse("sqrt(abs(x1))")
        assert tree.root == ex.Unary("sqrt", ex.Unary("abs", ex.Variable(0)))

    def test_piecewise_two_branches(self):
        tree = parse("piecewise{ x1 < 0 : -x1 ; x1 >= 0 : sqrt(x1) ; }")
        assert isinstance(tree.root, ex.Piecewise)
        assert len(tree.root.branches) == 2
        guard0 = tree.root.branches[0][0]
        assert guard0.op == "<"

    def test_negative_exponent_rejected(self):
        with pytest.raises(ex.ExpressionSyntaxError) as err:
            parse("x1^-2")
        assert err.value.position == 4

    def test_fractional_exponent_rejected(self):
        with pytest.raises(ex.ExpressionSyntaxError):
            parse("x1^2.5")

    def test_variable_out_of_range(self):
        with pytest.raises(ex.ExpressionSyntaxError):
            parse("x3", dim=2)
        with pytest.raises(ex.ExpressionSyntaxError):
            parse("x0", dim=2)

    def test_syntax_error_position(self):
        with pytest.raises(ex.ExpressionSyntaxError) as err:
            parse("x1 + + x1")
        assert err.value.position == 6

    def test_unknown_function(self):
        with pytest.raises(ex.ExpressionSyntaxError):
            parse("sin(x1)")

    def test_guard_rejects_division(self):
        with pytest.raises(ex.ExpressionSyntaxError):
            parse("piecewise{ x1 / 2 < 0 : x1 ; x1 >= 0 : x1 ; }")

    def test_guard_rejects_sqrt(self):
        with pytest.raises(ex.ExpressionSyntaxError):
            parse("piecewise{ sqrt(x1) < 1 : x1 ; x1 >= 0 : x1 ; }")

    def test_root_requires_positive_degree(self):
        with pytest.raises(ex.ExpressionSyntaxError):
            parse("root(x1, 0)")

    def test_single_power_per_factor(self):
        with pytest.raises(ex.ExpressionSyntaxError):
            parse("x1^2^3")


class TestEvaluation:
    def test_intro_negative_branch(self):
        tree = parse("piecewise{ x1 < 0 : -x1 ; x1 >= 0 : sqrt(x1) ; }")
        assert ex.evaluate(tree, [-2.0]) == 2.0
        assert ex.evaluate(tree, [4.0]) == 2.0

    def test_max_of_coordinates(self):
        assert ex.evaluate(parse("max(x1, x2)", 2), [1.0, 3.0]) == 3.0

    def test_min_div_pow(self):
        assert ex.evaluate(parse("min(x1, 2) + x1^3 / 2"), [2.0]) == 6.0

    def test_sqrt_negative_is_domain_error(self):
        with pytest.raises(ex.ExpressionDomainError):
            ex.evaluate(parse("sqrt(x1)"), [-1.0])

    def test_division_by_zero(self):
        with pytest.raises(ex.ExpressionDomainError):
            ex.evaluate(parse("1 / x1"), [0.0])

    def test_no_guard_satisfied(self):
        tree = parse("piecewise{ x1 < 0 : x1 ; x1 > 1 : x1 ; }")
        with pytest.raises(ex.ExpressionDomainError):
            ex.evaluate(tree, [0.5])

    def test_first_guard_wins_on_overlap(self):
        tree = parse("piecewise{ x1 >= 0 : 1 ; x1 >= 0 : 2 ; }")
        assert ex.evaluate(tree, [0.3]) == 1.0

    def test_root_cube(self):
        assert ex.evaluate(parse("root(x1, 3)"), [8.0]) == pytest.approx(2.0, rel=1e-15)

    def test_zero_power_is_one(self):
        assert ex.evaluate(parse("x1^0"), [0.0]) == 1.0

    def test_branch_masked_batch_avoids_foreign_domain(self):
        # sqrt branch must not be evaluated on points owned by the other guard
        tree = parse("piecewise{ x1 < 0 : -x1 ; x1 >= 0 : sqrt(x1) ; }")
        pts = np.array([[-4.0], [9.0], [-1.0], [0.25]])
        np.testing.assert_allclose(ex.evaluate_many(tree, pts), [4.0, 3.0, 1.0, 0.5])


# hypothesis strategies for random trees ------------------------------------


def _leaf(dim):
    return st.one_of(
        st.floats(min_value=0.0, max_value=9.0).map(lambda v: ex.Constant(round(v, 3))),
        st.integers(min_value=0, max_value=dim - 1).map(ex.Variable),
    )


def _tree(dim, depth=3):
    def extend(children):
        return st.one_of(
            st.tuples(st.sampled_from(["add", "sub", "mul", "min", "max"]), children, children)
            .map(lambda t: ex.Binary(t[0], t[1], t[2])),
            st.tuples(children, st.integers(min_value=0, max_value=3))
            .map(lambda t: ex.IntPow(t[0], t[1])),
            children.map(lambda c: ex.Unary("neg", c)),
            children.map(lambda c: ex.Unary("abs", c)),
            children.map(lambda c: ex.Unary("sqrt", ex.Unary("abs", c))),
        )

    return st.recursive(_leaf(dim), extend, max_leaves=8)


@settings(max_examples=150, deadline=None)
@given(node=_tree(2))
def test_print_parse_round_trip(node):
    tree = ex.ExpressionTree(node, 2)
    text = ex.format_expression(tree)
    reparsed = ex.parse_expression(text, 2)
    assert ex.parse_expression(ex.format_expression(reparsed), 2) == reparsed


@settings(max_examples=60, deadline=None)
@given(node=_tree(2), data=st.data())
def test_batch_matches_scalar(node, data):
    tree = ex.ExpressionTree(node, 2)
    pts = np.array([
        [data.draw(st.floats(-3, 3)), data.draw(st.floats(-3, 3))] for _ in range(4)
    ])
    try:
        batch = ex.evaluate_many(tree, pts)
    except ex.ExpressionDomainError:
        return
    singles = [ex.evaluate(tree, p) for p in pts]
    np.testing.assert_allclose(batch, singles, rtol=0, atol=0)


def test_evaluate_is_pure():
    tree = parse("piecewise{ x1 < 0 : -x1 ; x1 >= 0 : sqrt(x1) ; }")
    vals = {ex.evaluate(tree, [0.49]) for _ in range(5)}
    assert vals == {0.7}


def test_round_trip_piecewise_and_root():
    text = "piecewise{ x1 - 2*x2 <= 0 : root(abs(x1), 3) ; x1 >= 0 : 2*x2 ; }"
    tree = ex.parse_expression(text, 2)
    printed = ex.format_expression(tree)
    assert ex.parse_expression(printed, 2) == tree
