import itertools
import random
from fractions import Fraction

import pytest

from varboot.errors import DivergentHomotopy, UsageError
from varboot.geometry import (
    DistortionField,
    MetricModel,
    ScalarMatter,
    ekg_lagrangian,
    ekg_source_form,
    split_distortion,
)
from varboot.jet import FieldSpec, JetSpace, expr_sum, total_derivative
from varboot.varcalc import (
    LagrangianDensity,
    SourceForm,
    bootstrap,
    euler_lagrange_fields,
    helmholtz,
    is_trivial,
    is_variational,
    vainberg_tonti,
)


def metric_model(m, *extra):
    g = FieldSpec.metric("g", m)
    sp = JetSpace([g, *extra])
    return sp, g, MetricModel(sp)


@pytest.fixture(scope="module")
def m2():
    return metric_model(2)


@pytest.fixture(scope="module")
def m3():
    return metric_model(3)


def test_inverse(m2):
    sp, g, M = m2
    gi = M.inverse()
    for a, b in itertools.product(range(2), repeat=2):
        s = expr_sum([M.metric(a, c) * gi[(c, b)] for c in range(2)], sp)
        assert s == sp.const(int(a == b))


def test_christoffel_symmetric_and_compatible(m2):
    sp, g, M = m2
    gam = M.christoffel()
    for a, b, c in itertools.product(range(2), repeat=3):
        assert gam[(a, b, c)] == gam[(a, c, b)]
    table = {(a, b): M.metric(a, b) for a, b in itertools.product(range(2), repeat=2)}
    assert all(e.is_zero() for e in M.covariant_derivative(table, "dd").values())


def test_riemann_symmetries(m3):
    sp, g, M = m3
    R = M.riemann()
    for a, b, c, d in itertools.product(range(3), repeat=4):
        assert R[(a, b, c, d)] == -R[(a, b, d, c)]
        if a <= b <= c:
            assert (R[(a, b, c, d)] + R[(a, c, d, b)] + R[(a, d, b, c)]).is_zero()
    Ric = M.ricci()
    for a, b in itertools.combinations(range(3), 2):
        assert Ric[(a, b)] == Ric[(b, a)]


def test_two_dimensional_gravity_is_trivial(m2):
    sp, g, M = m2
    assert all(e.is_zero() for e in M.einstein().values())
    assert is_trivial(M.scalar() * M.sqrtdet())


def test_einstein_hilbert_three_dimensions(m3):
    sp, g, M = m3
    s = M.sqrtdet()
    E = euler_lagrange_fields(LagrangianDensity(M.scalar() * s), [g]).symmetrized()
    G = M.einstein_up()
    for c in g.components():
        assert E[("g", c)] == -(G[c] * s)


def test_ricci_homotopy_scales_with_dimension(m3):
    # E(t g) = t^(m/2 - 2) E, so the homotopy gives R s / (m/2 - 1)
    sp, g, M = m3
    s = M.sqrtdet()
    E = SourceForm.from_symmetric(sp, g, {k: v * s for k, v in M.ricci_up().items()})
    assert vainberg_tonti(E).density == (M.scalar() * s).scale(2)


def test_ricci_homotopy_diverges_in_two_dimensions(m2):
    sp, g, M = m2
    s = M.sqrtdet()
    E = SourceForm.from_symmetric(sp, g, {k: v * s for k, v in M.ricci_up().items()})
    with pytest.raises(DivergentHomotopy):
        vainberg_tonti(E)


def test_dalembert_divergence_form():
    phi = FieldSpec.scalar("phi", 2)
    sp, g, M = metric_model(2, phi)
    s = M.sqrtdet()
    gi = M.inverse()
    flux = [expr_sum([s * gi[(a, b)] * sp.var(phi, (), (b,)) for b in range(2)], sp) for a in range(2)]
    div = expr_sum([total_derivative(flux[a], a) for a in range(2)], sp)
    assert M.dalembert("phi") == div / s


def test_ekg_bootstrap_three_dimensions():
    phi = FieldSpec.scalar("phi", 3)
    sp, g, M = metric_model(3, phi)
    S = ScalarMatter(sp)
    E, _ = ekg_source_form(M, S)
    res = bootstrap(E, ["g"], ["phi"])
    L = ekg_lagrangian(M, S)
    assert is_trivial(LagrangianDensity(res.lagrangian.density - L))
    assert res.completed_vary_eqs == E
    box = M.dalembert("phi")
    assert res.passive_eqs[("phi", ())] == (box - S.Vp()) * M.sqrtdet()


def test_distortion_split():
    L = FieldSpec.tensor12("L", 2)
    sp = JetSpace([L])
    D = DistortionField(sp, "L")
    Q, T = split_distortion(D)
    for a, b, c in itertools.product(range(2), repeat=3):
        assert Q[(a, b, c)] + T[(a, b, c)] == D.component(a, b, c)
        assert T[(a, b, c)] == -T[(a, c, b)]
        assert Q[(a, b, c)] == Q[(a, c, b)]


def test_metric_model_requires_metric():
    sp = JetSpace([FieldSpec.scalar("y", 2)])
    with pytest.raises(UsageError):
        MetricModel(sp)


def test_metric_compatibility_up_to_four_dimensions():
    for m in (3, 4):
        sp, g, M = metric_model(m)
        table = {(a, b): M.metric(a, b) for a, b in itertools.product(range(m), repeat=2)}
        assert all(e.is_zero() for e in M.covariant_derivative(table, "dd").values())


def test_contracted_bianchi(m3):
    sp, g, M = m3
    E = euler_lagrange_fields(LagrangianDensity(M.scalar() * M.sqrtdet()), [g])
    assert helmholtz(E).is_zero()
    G = M.einstein_up()
    dG = M.covariant_derivative(G, "uu")
    div = [expr_sum([dG[(a, nu, a)] for a in range(3)], sp) for nu in range(3)]
    rng = random.Random("bianchi")
    hits = 0
    while hits < 20:
        pt = sp.random_point(rng, -6, 6)
        try:
            vals = [d.evaluate(pt) for d in div]
        except ZeroDivisionError:
            continue
        assert all(v == (0, 0) for v in vals)
        hits += 1


def test_vacuum_reduction():
    phi = FieldSpec.scalar("phi", 3)
    sp, g, M = metric_model(3, phi)
    S = ScalarMatter(sp)
    E, _ = ekg_source_form(M, S)
    # V = 0 and constant phi, checked at points where V and d phi vanish
    G = M.einstein_up()
    rng = random.Random("vacuum")
    hits = 0
    while hits < 5:
        pt = sp.random_point(rng, -5, 5)
        for k in pt:
            if isinstance(k, tuple) and k[1].startswith("V") or not isinstance(k, tuple) and \
                    k.field.name == "phi" and k.order > 0:
                pt[k] = Fraction(0)
        try:
            want = {c: (G[c] * M.sqrtdet() / S.kappa).scale(Fraction(-1, 2)).evaluate(pt) for c in g.components()}
        except ZeroDivisionError:
            continue
        assert {c: E.symmetrized()[("g", c)].evaluate(pt) for c in g.components()} == want
        hits += 1


def test_ekg_source_form_is_variational_in_four_dimensions():
    phi = FieldSpec.scalar("phi", 4)
    sp, g, M = metric_model(4, phi)
    E, T = ekg_source_form(M, ScalarMatter(sp))
    assert is_variational(E)
    assert T[(0, 1)] == T[(1, 0)]
