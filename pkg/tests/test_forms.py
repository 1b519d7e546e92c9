import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varboot.errors import DegreeMismatch
from varboot.forms import HorizontalForm, d_H, density_of, wedge
from varboot.jet import FieldSpec, JetSpace, total_derivative
from varboot.varcalc import is_trivial

from strategies import horizontal_forms, two_field_space

SP3 = two_field_space(3)
SP4 = two_field_space(4)


def forms_any_degree(space, top):
    return st.integers(0, top).flatmap(lambda k: horizontal_forms(space, k))


@settings(max_examples=100)
@given(forms_any_degree(SP4, 3))
def test_d_squared_vanishes(a):
    assert d_H(d_H(a)).is_zero()


@settings(max_examples=40)
@given(st.integers(0, 2).flatmap(lambda p: st.tuples(horizontal_forms(SP3, p), st.integers(0, 3 - p)))
       .flatmap(lambda ap: st.tuples(st.just(ap[0]), horizontal_forms(SP3, ap[1]))))
def test_graded_leibniz(ab):
    a, b = ab
    sign = -1 if a.degree % 2 else 1
    assert d_H(wedge(a, b)) == wedge(d_H(a), b) + wedge(a, d_H(b)).scale(sign)


@given(horizontal_forms(SP3, 1), horizontal_forms(SP3, 1))
def test_wedge_antisymmetric_on_one_forms(a, b):
    assert wedge(a, b) == -wedge(b, a)
    assert wedge(a, a).is_zero()


@settings(max_examples=25)
@given(horizontal_forms(SP3, 2))
def test_exact_top_forms_are_trivial(a):
    rho = density_of(d_H(a))
    assert is_trivial(rho)


def test_basis_and_function_forms():
    y = FieldSpec.scalar("y", 2)
    sp = JetSpace([y])
    f = HorizontalForm.function(sp.var("y"))
    df = d_H(f)
    assert df[(0,)] == sp.var("y", (), (0,)) and df[(1,)] == sp.var("y", (), (1,))
    one = HorizontalForm(sp, 1, {(0,): sp.var("y")})
    assert d_H(one)[(0, 1)] == -total_derivative(sp.var("y"), 1)
    assert (HorizontalForm.basis(sp, 1, 0) + HorizontalForm.basis(sp, 0, 1)).is_zero()


def test_degree_overflow_is_zero_form():
    y = FieldSpec.scalar("y", 2)
    sp = JetSpace([y])
    vol = HorizontalForm.volume(sp.var("y"))
    assert d_H(vol).is_zero()
    assert wedge(vol, HorizontalForm.basis(sp, 0)).is_zero()


def test_density_needs_top_degree():
    y = FieldSpec.scalar("y", 2)
    sp = JetSpace([y])
    with pytest.raises(DegreeMismatch):
        density_of(HorizontalForm.basis(sp, 0))
