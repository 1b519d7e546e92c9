"""Acceptance criteria, one test each, at their stated tolerances and time
budgets.  A PASS/FAIL line per criterion is printed in the terminal summary."""

import json
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varboot.cli.main import COMMANDS, build_parser, run
from varboot.cli.model import read_model
from varboot.cli.report import component_text
from varboot.forms import d_H, wedge
from varboot.geometry import ScalarMatter, ekg_lagrangian
from varboot.invariants import (
    distortion_space,
    equivariance_check,
    named_basis,
    pattern_form,
    structural_zeros,
)
from varboot.invariants import named
from varboot.invariants.catalogue import _det, density_factor, is_trivial_form, random_invertible
from varboot.varcalc import LagrangianDensity, homotopy_identity_residual, euler_lagrange_fields, helmholtz

from strategies import horizontal_forms, non_gradient_forms, polynomials, source_forms, two_field_space

MODELS = Path(__file__).resolve().parent.parent / "models"


def command(argv):
    """Run a CLI command up to (not including) rendering; returns the model
    and the raw outputs with Expr values."""
    args = build_parser().parse_args(argv)
    model = read_model(args.model)
    outputs, certs, diag = COMMANDS[args.command](args, model)
    return model, outputs, certs, diag


@pytest.mark.criterion(1, "Einstein-Hilbert recovery (vt, m=4)")
def test_einstein_hilbert_recovery():
    t0 = time.perf_counter()
    model, out, _, diag = command(["vt", str(MODELS / "ricci.vbt"), "--vary", "g"])
    elapsed = time.perf_counter() - t0
    M = model.metric_model("g")
    assert out["density"] == M.scalar() * M.sqrtdet()
    assert diag["recognized"] == "RicciScalar(g)*sqrtdetg(g)"
    assert elapsed < 60, f"took {elapsed:.1f} s"


@pytest.mark.criterion(2, "canonical completion adds -1/2 R g (complete, m=4)")
def test_canonical_completion():
    t0 = time.perf_counter()
    model, out, _, _ = command(["complete", str(MODELS / "ricci.vbt"), "--vary", "g"])
    elapsed = time.perf_counter() - t0
    M = model.metric_model("g")
    s, R, Ric, gi = M.sqrtdet(), M.scalar(), M.ricci_up(), M.inverse()
    g = model.space.field("g")
    for comp in g.components():
        expected = -(Ric[comp] - (R * gi[comp]).scale(Fraction(1, 2))) * s
        assert out["equations"][component_text("g", comp)] == expected, comp
    assert elapsed < 120, f"took {elapsed:.1f} s"


@pytest.mark.criterion(3, "EKG bootstrap (vary g, passive phi, m=4)")
def test_ekg_bootstrap():
    t0 = time.perf_counter()
    model, out, _, _ = command(["bootstrap", str(MODELS / "ekg.vbt"), "--vary", "g", "--passive", "phi"])
    elapsed = time.perf_counter() - t0
    M = model.metric_model("g")
    S = ScalarMatter(model.space)
    assert out["lagrangian"] == ekg_lagrangian(M, S)
    box_minus_vp = (M.dalembert("phi") - S.Vp()) * M.sqrtdet()
    pe = out["passive_equations"]["phi"]
    assert pe == box_minus_vp or pe == -box_minus_vp
    assert elapsed < 120, f"took {elapsed:.1f} s"


SP2 = two_field_space(2)
_count = {}


@settings(max_examples=50)
@given(polynomials(SP2, order=1, max_degree=3, max_terms=4))
def _helmholtz_of_el(L):
    E = euler_lagrange_fields(LagrangianDensity(L), list(SP2.fields.values()))
    assert helmholtz(E).is_zero()
    _count["el"] = _count.get("el", 0) + 1


@settings(max_examples=20)
@given(non_gradient_forms(SP2))
def _helmholtz_non_gradient(E):
    assert not helmholtz(E).is_zero()
    _count["ng"] = _count.get("ng", 0) + 1


@pytest.mark.criterion(4, "Helmholtz soundness (property)")
def test_helmholtz_soundness():
    t0 = time.perf_counter()
    _count.clear()
    _helmholtz_of_el()
    _helmholtz_non_gradient()
    elapsed = time.perf_counter() - t0
    assert _count["el"] >= 50 and _count["ng"] >= 20, _count
    assert elapsed < 60, f"took {elapsed:.1f} s"


@settings(max_examples=20)
@given(source_forms(SP2, order=2))
def _homotopy_identity(E):
    assert E.order <= 2
    assert homotopy_identity_residual(E).is_zero()
    _count["app"] = _count.get("app", 0) + 1


@pytest.mark.criterion(5, "homotopy/Helmholtz identity (property)")
def test_homotopy_identity():
    t0 = time.perf_counter()
    _count.clear()
    _homotopy_identity()
    elapsed = time.perf_counter() - t0
    assert _count["app"] >= 20, _count
    assert elapsed < 120, f"took {elapsed:.1f} s"


@pytest.mark.criterion(6, "catalogue counts 2/4/18/65, 29, 8, Q-only (1, 0)")
def test_catalogue_counts():
    t0 = time.perf_counter()
    alg = json.loads(run(["enum-invariants", "--format", "json"])[1])["outputs"]["ranks"]
    fo = json.loads(run(["enum-invariants", "--first-order", "--format", "json"])[1])["outputs"]
    q = json.loads(run(["enum-invariants", "--q-only", "--format", "json"])[1])["outputs"]["q_only"]
    elapsed = time.perf_counter() - t0
    observed = {
        "ranks": [alg[str(k)]["count"] for k in (1, 2, 3, 4)],
        "first_order": fo["count"],
        "el_classes": fo["nontrivial_el_classes"],
        "q_only": (q["algebraic"], q["nontrivial_first_order"]),
    }
    expected = {"ranks": [2, 4, 18, 65], "first_order": 29, "el_classes": 8, "q_only": (1, 0)}
    assert observed == expected, f"observed {observed}"
    assert elapsed < 600, f"took {elapsed:.1f} s"


@pytest.mark.criterion(7, "structural zeros vanish exactly")
def test_structural_zeros():
    zs = structural_zeros()
    assert sorted(zs) == sorted(["lambda_T..T..TT", "lambda_T..T..TQ", "lambda_T.T.T.T.", "lambda_Q.Q.Q.Q."])
    assert all(f.is_zero() for f in zs.values())


SP4 = two_field_space(4)


@settings(max_examples=100)
@given(st.integers(0, 3).flatmap(lambda k: horizontal_forms(SP4, k)))
def _d_squared(a):
    assert d_H(d_H(a)).is_zero()
    _count["d2"] = _count.get("d2", 0) + 1


@pytest.mark.criterion(8, "d_H calculus: d_H^2 = 0, (0,2)-profile forms trivial")
def test_dh_calculus():
    _count.clear()
    _d_squared()
    assert _count["d2"] >= 100, _count
    space = distortion_space()
    dalpha = [d_H(pattern_form(p, space)) for p in named.ALPHA.values()]
    quadratic = [wedge(a, b) for i, a in enumerate(dalpha) for b in dalpha[i:]]
    assert len(quadratic) == 3
    assert all(is_trivial_form(f) for f in quadratic)


@pytest.mark.criterion(9, "equivariance with factor det(A)^-1 (65 named rank-4 forms)")
def test_equivariance():
    t0 = time.perf_counter()
    forms = named_basis(4)
    assert len(forms) == 65
    rng = random.Random("acceptance-equivariance")
    mats = [random_invertible(rng) for _ in range(10)]
    for name, p, form in forms:
        assert equivariance_check(form, matrices=mats), name
        for A in mats:
            f = density_factor(form, A)
            assert f is None and form.is_zero() or f == 1 / _det(A), name
    elapsed = time.perf_counter() - t0
    assert elapsed < 300, f"took {elapsed:.1f} s"
