"""Euler-Lagrange operator, Helmholtz expressions, homotopy Lagrangians.

Field components are the independent components of each field (``g[0,1]``
stands for both g_01 and g_10).  Source-form coefficients are stored in that
convention: ``E_A = dL/dy^A`` with independent partials.  The symmetrized view
``E^{ab} = E_A / multiplicity`` is the coefficient table that pairs with
``dg_{ab}`` summed over all ordered index pairs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from math import factorial
from collections import Counter

from ._parallel import pmap
from .errors import OrderTooHigh, UsageError, VarbootError
from .jet import (
    Expr,
    FieldSpec,
    JetSpace,
    JetVariable,
    TSeries,
    expr_sum,
    integrate_homotopy,
    partial_derivative,
    scale_fields,
    total_derivative,
)


def _field_names(fields) -> list[str]:
    if fields is None:
        return []
    if isinstance(fields, (str, FieldSpec)):
        fields = [fields]
    return [f if isinstance(f, str) else f.name for f in fields]


def _multi_indices(m, order):
    for k in range(order + 1):
        yield from itertools.combinations_with_replacement(range(m), k)


def index_multiplicity(I) -> int:
    """Number of orderings of a sorted derivative multi-index."""
    n = factorial(len(I))
    for c in Counter(I).values():
        n //= factorial(c)
    return n


class IdentityFailure(VarbootError):
    """Raised when an internal cross-check between two routes fails."""


# ---------------------------------------------------------------------------
# data types


@dataclass
class LagrangianDensity:
    density: Expr
    fields: list = None
    dim: int = None

    def __post_init__(self):
        sp = self.density.space
        if self.fields is None:
            self.fields = list(sp.fields.values())
        self.fields = [sp.field(f) if isinstance(f, str) else f for f in self.fields]
        if self.dim is None:
            self.dim = sp.dim
        names = {f.name for f in self.fields}
        for v in self.density.jet_variables():
            if v.field.name not in names:
                raise UsageError(f"density depends on undeclared field {v.field.name}")

    @property
    def space(self) -> JetSpace:
        return self.density.space

    def __eq__(self, other):
        if isinstance(other, LagrangianDensity):
            other = other.density
        if isinstance(other, Expr):
            return self.density == other
        return NotImplemented


@dataclass
class SourceForm:
    """Coefficients ``E_A`` keyed by ``(field name, canonical component)``."""

    space: JetSpace
    fields: list
    coeffs: dict

    def __post_init__(self):
        self.fields = [self.space.field(f) if isinstance(f, str) else f for f in self.fields]
        full = {}
        for f in self.fields:
            for comp in f.components():
                full[(f.name, comp)] = self.coeffs.get((f.name, comp), self.space.zero())
        extra = set(self.coeffs) - set(full)
        if extra:
            raise UsageError(f"coefficients for undeclared components {sorted(extra)}")
        self.coeffs = full

    @classmethod
    def from_symmetric(cls, space, field, table: dict) -> SourceForm:
        """Build from a table over all index tuples (e.g. ``E^{ab}``)."""
        f = space.field(field) if isinstance(field, str) else field
        coeffs = {}
        for comp in f.components():
            idxs = [c for c in itertools.product(range(f.dim), repeat=f.rank)
                    if f.canonical(c) == (1, comp)]
            coeffs[(f.name, comp)] = expr_sum([table[c] for c in idxs], space)
            neg = [c for c in itertools.product(range(f.dim), repeat=f.rank)
                   if f.canonical(c) == (-1, comp)]
            if neg:
                coeffs[(f.name, comp)] = coeffs[(f.name, comp)] - expr_sum(
                    [table[c] for c in neg], space)
        return cls(space, [f], coeffs)

    def components(self) -> list:
        return list(self.coeffs)

    def __getitem__(self, key) -> Expr:
        return self.coeffs[key]

    def symmetrized(self) -> dict:
        """``(field, comp) -> E_A / multiplicity``."""
        out = {}
        for (name, comp), e in self.coeffs.items():
            out[(name, comp)] = e.scale(Fraction(1, self.space.field(name).multiplicity(comp)))
        return out

    @property
    def order(self) -> int:
        return max((e.order() for e in self.coeffs.values()), default=0)

    def is_zero(self) -> bool:
        return all(e.is_zero() for e in self.coeffs.values())

    def restrict(self, fields) -> SourceForm:
        names = set(_field_names(fields))
        fs = [f for f in self.fields if f.name in names]
        return SourceForm(self.space, fs, {k: v for k, v in self.coeffs.items() if k[0] in names})

    def __add__(self, other):
        if [f.name for f in self.fields] != [f.name for f in other.fields]:
            raise UsageError("source forms over different fields")
        return SourceForm(self.space, self.fields,
                          {k: self.coeffs[k] + other.coeffs[k] for k in self.coeffs})

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c):
        return SourceForm(self.space, self.fields,
                          {k: v.scale(c) if isinstance(c, (int, Fraction)) else v * c
                           for k, v in self.coeffs.items()})

    def __eq__(self, other):
        if not isinstance(other, SourceForm):
            return NotImplemented
        if set(self.coeffs) != set(other.coeffs):
            return False
        return all(self.coeffs[k] == other.coeffs[k] for k in self.coeffs)


class HelmholtzTensor:
    """The three coefficient families of the order-2 Helmholtz form.

    ``H2[(A, B, mu, nu)]`` and ``H1[(A, B, mu)]`` are stored for all ordered
    base indices; ``H0[(A, B)]``.  Components ``A``, ``B`` are
    ``(field, comp)`` keys.
    """

    def __init__(self, space, H0, H1, H2):
        self.space = space
        self.H0 = H0
        self.H1 = H1
        self.H2 = H2

    def is_zero(self) -> bool:
        return all(e.is_zero() for fam in (self.H0, self.H1, self.H2) for e in fam.values())

    def nonzero(self) -> list:
        out = []
        for name, fam in (("H0", self.H0), ("H1", self.H1), ("H2", self.H2)):
            out += [(name, k) for k, e in fam.items() if not e.is_zero()]
        return out


@dataclass
class BootstrapResult:
    lagrangian: LagrangianDensity
    completed_vary_eqs: SourceForm
    passive_eqs: SourceForm
    vary: list = dc_field(default_factory=list)
    passive: list = dc_field(default_factory=list)
    passive_determined_up_to: str = ""
    ambiguous: bool = True


class Completion(tuple):
    """``(source_form, lagrangian)`` plus the cross-check status."""

    def __new__(cls, source_form, lagrangian, identity_checked):
        self = super().__new__(cls, (source_form, lagrangian))
        self.identity_checked = identity_checked
        return self

    @property
    def source_form(self):
        return self[0]

    @property
    def lagrangian(self):
        return self[1]


# ---------------------------------------------------------------------------
# Euler-Lagrange


def _component_var(space, f: FieldSpec, comp, I=()) -> JetVariable:
    # no jet block is created here: a variable the space has never seen
    # cannot occur in any expression, so its partial is zero
    _, v = JetVariable.make(f, comp, I)
    return v


def _el_component(L: Expr, f: FieldSpec, comp, order: int) -> Expr:
    """``sum_I (-1)^|I| d_I dL/dy_I`` in nested (Horner) form over sorted I."""
    sp = L.space
    m = sp.dim

    def q(I):
        p = partial_derivative(L, _component_var(sp, f, comp, I))
        if len(I) == order:
            return p
        start = I[-1] if I else 0
        inner = []
        for nu in range(start, m):
            qn = q(I + (nu,))
            if not qn.is_zero():
                inner.append(total_derivative(qn, nu))
        if not inner:
            return p
        return p - expr_sum(inner, sp)

    return q(())


def euler_lagrange(L, f) -> SourceForm:
    """Euler-Lagrange expressions of a density with respect to one field."""
    if isinstance(L, Expr):
        L = LagrangianDensity(L)
    sp = L.space
    f = sp.field(f) if isinstance(f, str) else f
    dens = L.density
    order = dens.order(f)
    if order > 3:
        raise OrderTooHigh(f"Lagrangian of order {order} in {f.name}; at most 3 supported")
    comps = f.components()
    if not dens.depends_on(f):
        vals = [sp.zero() for _ in comps]
    else:
        vals = pmap(lambda c: _el_component(dens, f, c, order), comps)
    return SourceForm(sp, [f], {(f.name, c): v for c, v in zip(comps, vals)})


def euler_lagrange_fields(L, fields) -> SourceForm:
    forms = [euler_lagrange(L, f) for f in fields]
    if not forms:
        raise UsageError("no fields to vary")
    coeffs = {}
    for ef in forms:
        coeffs.update(ef.coeffs)
    return SourceForm(forms[0].space, [x for ef in forms for x in ef.fields], coeffs)


def is_trivial(L, fields=None) -> bool:
    """True iff the Euler-Lagrange expressions vanish for every field."""
    if isinstance(L, Expr):
        L = LagrangianDensity(L)
    fs = L.fields if fields is None else [L.space.field(n) for n in _field_names(fields)]
    return all(euler_lagrange(L, f).is_zero() for f in fs)


# ---------------------------------------------------------------------------
# Helmholtz


def _partials(E: SourceForm, order):
    sp = E.space
    m = sp.dim
    keys = E.components()
    idx = list(_multi_indices(m, 2))

    def row(A):
        out = {}
        for B in keys:
            f = sp.field(B[0])
            for I in idx:
                out[(B, I)] = partial_derivative(E.coeffs[A], _component_var(sp, f, B[1], I))
        return out

    rows = pmap(row, keys)
    return {A: r for A, r in zip(keys, rows)}


def helmholtz(E: SourceForm) -> HelmholtzTensor:
    """Helmholtz expressions of an order-2 source form.

    With symmetric partials ``dE/dy_{mu nu}`` (independent partial divided
    by the index multiplicity)::

        H2^{mu nu}_AB = dE_A/dy^B_{mu nu} - dE_B/dy^A_{mu nu}
        H1^{mu}_AB    = dE_A/dy^B_mu + dE_B/dy^A_mu - 2 d_nu dE_B/dy^A_{mu nu}
        H0_AB         = dE_A/dy^B - dE_B/dy^A + d_mu dE_B/dy^A_mu
                        - d_mu d_nu dE_B/dy^A_{mu nu}
    """
    order = E.order
    if order > 2:
        raise OrderTooHigh(f"source form of order {order}; Helmholtz expressions need order <= 2")
    sp = E.space
    m = sp.dim
    keys = E.components()
    P = _partials(E, order)

    def sym(A, B, mu, nu):
        I = tuple(sorted((mu, nu)))
        e = P[A][(B, I)]
        return e if mu == nu else e.scale(Fraction(1, 2))

    H0, H1, H2 = {}, {}, {}
    for A in keys:
        for B in keys:
            for mu in range(m):
                for nu in range(m):
                    H2[(A, B, mu, nu)] = sym(A, B, mu, nu) - sym(B, A, mu, nu)
                terms = [P[A][(B, (mu,))], P[B][(A, (mu,))]]
                for nu in range(m):
                    x = sym(B, A, mu, nu)
                    if not x.is_zero():
                        terms.append(total_derivative(x, nu).scale(-2))
                H1[(A, B, mu)] = expr_sum(terms, sp)
            terms = [P[A][(B, ())], -P[B][(A, ())]]
            for mu in range(m):
                x = P[B][(A, (mu,))]
                if not x.is_zero():
                    terms.append(total_derivative(x, mu))
            for I in itertools.combinations_with_replacement(range(m), 2):
                x = P[B][(A, I)]
                if not x.is_zero():
                    terms.append(-total_derivative(total_derivative(x, I[0]), I[1]))
            H0[(A, B)] = expr_sum(terms, sp)
    return HelmholtzTensor(sp, H0, H1, H2)


def is_variational(E: SourceForm) -> bool:
    return helmholtz(E).is_zero()


# ---------------------------------------------------------------------------
# homotopy Lagrangians


def vainberg_tonti(E: SourceForm, vary=None) -> LagrangianDensity:
    """``L = sum_A y^A int_0^1 E_A o chi_t dt`` over components of the varied
    fields, with ``chi_t`` scaling only the varied fields."""
    sp = E.space
    names = _field_names(vary) or [f.name for f in E.fields]
    have = {f.name for f in E.fields}
    for n in names:
        if n not in have:
            raise UsageError(f"no equations given for varied field {n}")
    terms = []
    for (fname, comp), e in E.coeffs.items():
        if fname not in names or e.is_zero():
            continue
        integral = integrate_homotopy(scale_fields(e, names))
        terms.append(sp.var(fname, comp) * integral)
    return LagrangianDensity(expr_sum(terms, sp))


def _scaled_integral(e: Expr, names) -> Expr:
    return integrate_homotopy(scale_fields(e, names))


def homotopy_identity_residual(E: SourceForm, vary=None, H: HelmholtzTensor | None = None,
                               L: LagrangianDensity | None = None) -> SourceForm:
    """``dL/dy^B - E_B + int [y^A H_BA + y^A_mu H^mu_BA + y^A_{mu nu} H^{mu nu}_BA] o chi_t dt``
    for every varied component ``B``; identically zero by construction of the
    homotopy Lagrangian."""
    sp = E.space
    m = sp.dim
    names = _field_names(vary) or [f.name for f in E.fields]
    Ey = E.restrict(names)
    if L is None:
        L = vainberg_tonti(Ey, names)
    if H is None:
        H = helmholtz(Ey)
    EL = euler_lagrange_fields(L, [sp.field(n) for n in names])
    keys = Ey.components()
    out = {}
    for B in keys:
        integrand = []
        for A in keys:
            f = sp.field(A[0])
            integrand.append(sp.var(f, A[1]) * H.H0[(B, A)])
            for mu in range(m):
                integrand.append(sp.var(f, A[1], (mu,)) * H.H1[(B, A, mu)])
                for nu in range(m):
                    integrand.append(sp.var(f, A[1], (mu, nu)) * H.H2[(B, A, mu, nu)])
        corr = _scaled_integral(expr_sum(integrand, sp), names)
        out[B] = EL.coeffs[B] - Ey.coeffs[B] + corr
    return SourceForm(sp, Ey.fields, out)


def variational_completion(E: SourceForm, vary=None, verify="auto") -> Completion:
    """Euler-Lagrange system of the homotopy Lagrangian.

    ``verify`` controls the cross-check of the completed system against the
    Helmholtz correction integral: True always checks (order <= 2), False
    never, ``'auto'`` checks when the source form is small enough for the
    check to be cheap.
    """
    sp = E.space
    names = _field_names(vary) or [f.name for f in E.fields]
    L = vainberg_tonti(E, names)
    completed = euler_lagrange_fields(L, [sp.field(n) for n in names])
    checked = False
    if verify == "auto":
        verify = E.order <= 2 and sum(e.n_terms() for e in E.coeffs.values()) <= 2000
    if verify:
        if E.order > 2:
            raise OrderTooHigh("identity check needs a source form of order <= 2")
        res = homotopy_identity_residual(E, names, L=L)
        if not res.is_zero():
            raise IdentityFailure("completed system disagrees with the Helmholtz correction")
        checked = True
    return Completion(completed, L, checked)


def bootstrap(E_y: SourceForm, vary, passive=()) -> BootstrapResult:
    """Partial homotopy Lagrangian scaling only the varied fields, with the
    Euler-Lagrange expressions of both groups.  The passive equations are
    only determined up to contributions of Lagrangians independent of the
    varied fields."""
    sp = E_y.space
    vnames = _field_names(vary)
    pnames = _field_names(passive)
    if set(vnames) & set(pnames):
        raise UsageError("a field cannot be both varied and passive")
    L = vainberg_tonti(E_y, vnames)
    completed = euler_lagrange_fields(L, [sp.field(n) for n in vnames])
    if pnames:
        passive_eqs = euler_lagrange_fields(L, [sp.field(n) for n in pnames])
    else:
        passive_eqs = SourceForm(sp, [], {})
    note = ("determined up to Euler-Lagrange terms of Lagrangians independent of "
            + ", ".join(vnames))
    return BootstrapResult(L, completed, passive_eqs, vnames, pnames, note, bool(pnames))
