from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varboot.errors import OrderTooHigh, UsageError
from varboot.jet import FieldSpec, JetSpace, total_derivative
from varboot.varcalc import (
    LagrangianDensity,
    SourceForm,
    homotopy_identity_residual,
    bootstrap,
    euler_lagrange_fields,
    helmholtz,
    is_trivial,
    is_variational,
    vainberg_tonti,
    variational_completion,
)

from strategies import jet_vars, non_gradient_forms, polynomials, rationals, source_forms, two_field_space

SP = two_field_space(2)
FIELDS = list(SP.fields.values())
LAGRANGIANS = polynomials(SP, order=1, max_degree=3, max_terms=4)


def el(L):
    return euler_lagrange_fields(LagrangianDensity(L), FIELDS)


@settings(max_examples=50)
@given(LAGRANGIANS)
def test_helmholtz_of_euler_lagrange_vanishes(L):
    assert helmholtz(el(L)).is_zero()


@settings(max_examples=20)
@given(non_gradient_forms(SP))
def test_helmholtz_detects_non_gradient(E):
    assert not helmholtz(E).is_zero()


@settings(max_examples=20)
@given(source_forms(SP, order=2))
def test_homotopy_identity(E):
    assert homotopy_identity_residual(E).is_zero()


@settings(max_examples=30)
@given(LAGRANGIANS)
def test_vainberg_tonti_reproduces_variational_forms(L):
    E = el(L)
    VT = vainberg_tonti(E)
    assert el(VT.density) == E
    # the homotopy Lagrangian differs from L by a null Lagrangian and a constant
    assert is_trivial(LagrangianDensity(VT.density - L))


@settings(max_examples=20)
@given(source_forms(SP, order=1))
def test_completion_is_variational_and_idempotent(E):
    # order 1 keeps the completed system at order <= 2, where Helmholtz applies
    comp = variational_completion(E, verify=True)
    assert comp.identity_checked
    assert is_variational(comp.source_form)
    again = variational_completion(comp.source_form, verify=False)
    assert again.source_form == comp.source_form


@settings(max_examples=50)
@given(LAGRANGIANS, LAGRANGIANS)
def test_divergences_have_no_euler_lagrange(f0, f1):
    assert el(total_derivative(f0, 0) + total_derivative(f1, 1)).is_zero()


@settings(max_examples=30)
@given(LAGRANGIANS, LAGRANGIANS, rationals(), rationals())
def test_euler_lagrange_is_linear(L1, L2, a, b):
    assert el(L1.scale(a) + L2.scale(b)) == el(L1).scale(a) + el(L2).scale(b)


@settings(max_examples=30)
@given(polynomials(SP, order=1, max_degree=2, max_terms=3), st.sampled_from(jet_vars(SP, 1, ("y",))),
       polynomials(SP, order=1, max_degree=3, max_terms=3, only=("z",)))
def test_bootstrap_decomposition(P, yv, L2):
    L1 = P * yv  # every term of L1 depends on y
    E = el(L1 + L2)
    res = bootstrap(E.restrict(["y"]), ["y"], ["z"])
    assert res.completed_vary_eqs == E.restrict(["y"])
    # the passive equations miss exactly the contribution of the y-free part
    EL2 = euler_lagrange_fields(LagrangianDensity(L2), [SP.field("z")])
    assert E.restrict(["z"]) - res.passive_eqs == EL2


def test_wave_equation():
    y = FieldSpec.scalar("y", 2)
    sp = JetSpace([y])
    yt, yx = sp.var("y", (), (0,)), sp.var("y", (), (1,))
    L = (yt * yt - yx * yx).scale(Fraction(1, 2))
    E = euler_lagrange_fields(LagrangianDensity(L), [y])
    assert E[("y", ())] == sp.var("y", (), (1, 1)) - sp.var("y", (), (0, 0))
    assert vainberg_tonti(E).density == (sp.var("y") * E[("y", ())]).scale(Fraction(1, 2))


def test_damped_oscillator_is_not_variational():
    y = FieldSpec.scalar("y", 1)
    sp = JetSpace([y])
    E = SourceForm(sp, [y], {("y", ()): sp.var("y", (), (0, 0)) + sp.var("y", (), (0,))})
    H = helmholtz(E)
    assert [fam for fam, _ in H.nonzero()] == ["H1"]
    comp = variational_completion(E)
    # the completion drops the friction term
    assert comp.source_form[("y", ())] == sp.var("y", (), (0, 0))


def test_symmetric_field_convention():
    g = FieldSpec.metric("g", 2)
    sp = JetSpace([g])
    table = {(a, b): sp.var(g, (a, b)) for a in range(2) for b in range(2)}
    E = SourceForm.from_symmetric(sp, "g", table)
    # off-diagonal independent component collects both orderings
    assert E[("g", (0, 1))] == sp.var(g, (0, 1)).scale(2)
    assert E.symmetrized()[("g", (0, 1))] == sp.var(g, (0, 1))
    L = vainberg_tonti(E).density
    expected = sum((sp.var(g, c) * sp.var(g, c).scale(g.multiplicity(c)) for c in g.components()),
                   sp.zero()).scale(Fraction(1, 2))
    assert L == expected


def test_bootstrap_recovers_coupled_lagrangian():
    sp = two_field_space(2)
    y, z = sp.var("y"), sp.var("z")
    yx = sp.var("y", (), (1,))
    L = yx * yx * z + y * y * z * z
    E = el(L)
    res = bootstrap(E.restrict(["y"]), ["y"], ["z"])
    # scaling only y recovers every term that depends on y
    assert is_trivial(LagrangianDensity(res.lagrangian.density - L))
    assert res.completed_vary_eqs == E.restrict(["y"])
    assert res.passive_eqs == E.restrict(["z"])
    assert res.ambiguous


def test_bootstrap_rejects_overlap():
    sp = two_field_space(2)
    E = el(sp.var("y") * sp.var("z"))
    with pytest.raises(UsageError):
        bootstrap(E, ["y"], ["y"])


def test_helmholtz_order_limit():
    y = FieldSpec.scalar("y", 1)
    sp = JetSpace([y])
    E = SourceForm(sp, [y], {("y", ()): sp.var("y", (), (0, 0, 0))})
    with pytest.raises(OrderTooHigh):
        helmholtz(E)


def test_vt_unknown_field():
    sp = two_field_space(2)
    E = el(sp.var("y") ** 2).restrict(["y"])
    with pytest.raises(UsageError):
        vainberg_tonti(E, ["z"])
