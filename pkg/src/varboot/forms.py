"""Horizontal forms ``sum rho_I dx^I`` with coefficients in a jet space.

Coefficients are stored only for strictly increasing index tuples; reading a
permuted tuple applies the permutation sign.
"""

from __future__ import annotations

import itertools

from .errors import DegreeMismatch, DimensionMismatch, UsageError
from .jet import Expr, JetSpace, expr_sum, total_derivative


def _sort_sign(idx):
    """Sign of the permutation sorting ``idx``; 0 if an index repeats."""
    idx = list(idx)
    if len(set(idx)) < len(idx):
        return 0, tuple(sorted(idx))
    sign = 1
    for i in range(len(idx)):
        for j in range(i + 1, len(idx)):
            if idx[i] > idx[j]:
                sign = -sign
    return sign, tuple(sorted(idx))


class HorizontalForm:
    def __init__(self, space: JetSpace, degree: int, coeffs: dict | None = None):
        if degree < 0:
            raise UsageError("form degree must be nonnegative")
        self.space = space
        self.dim = space.dim
        self.degree = degree
        self.coeffs = {}
        if degree > self.dim:
            return
        for idx, c in (coeffs or {}).items():
            sign, key = _sort_sign(idx)
            if sign == 0 or c.is_zero():
                continue
            c = c if sign == 1 else -c
            self.coeffs[key] = self.coeffs[key] + c if key in self.coeffs else c
        self.coeffs = {k: v for k, v in self.coeffs.items() if not v.is_zero()}

    # constructors -------------------------------------------------------
    @classmethod
    def function(cls, f: Expr) -> HorizontalForm:
        return cls(f.space, 0, {(): f})

    @classmethod
    def basis(cls, space, *idx) -> HorizontalForm:
        """``dx^{i1} ^ ... ^ dx^{ik}``."""
        return cls(space, len(idx), {tuple(idx): space.const(1)})

    @classmethod
    def volume(cls, density: Expr) -> HorizontalForm:
        m = density.space.dim
        return cls(density.space, m, {tuple(range(m)): density})

    # access -------------------------------------------------------------
    def __getitem__(self, idx) -> Expr:
        sign, key = _sort_sign(idx)
        if sign == 0:
            return self.space.zero()
        c = self.coeffs.get(key)
        if c is None:
            return self.space.zero()
        return c if sign == 1 else -c

    def is_zero(self) -> bool:
        return not self.coeffs

    def index_tuples(self):
        return list(itertools.combinations(range(self.dim), self.degree))

    # algebra -------------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, HorizontalForm):
            raise UsageError("expected a horizontal form")
        if other.dim != self.dim or other.space is not self.space:
            raise DimensionMismatch("forms live over different bases")

    def __add__(self, other):
        self._check(other)
        if other.degree != self.degree:
            raise DegreeMismatch("cannot add forms of different degree")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return HorizontalForm(self.space, self.degree, out)

    def __neg__(self):
        return HorizontalForm(self.space, self.degree, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> HorizontalForm:
        if isinstance(c, Expr):
            return HorizontalForm(self.space, self.degree, {k: v * c for k, v in self.coeffs.items()})
        return HorizontalForm(self.space, self.degree, {k: v.scale(c) for k, v in self.coeffs.items()})

    def __eq__(self, other):
        if not isinstance(other, HorizontalForm):
            return NotImplemented
        if self.degree != other.degree:
            return False
        return (self - other).is_zero()

    def __xor__(self, other):
        return wedge(self, other)

    def __repr__(self):
        return f"HorizontalForm(degree={self.degree}, terms={len(self.coeffs)})"


def wedge(a: HorizontalForm, b: HorizontalForm) -> HorizontalForm:
    a._check(b)
    k = a.degree + b.degree
    if k > a.dim:
        return HorizontalForm(a.space, k)
    acc: dict = {}
    for I, x in a.coeffs.items():
        for J, y in b.coeffs.items():
            sign, key = _sort_sign(I + J)
            if sign == 0:
                continue
            p = x * y
            acc.setdefault(key, []).append(p if sign == 1 else -p)
    return HorizontalForm(a.space, k, {key: expr_sum(v, a.space) for key, v in acc.items()})


def d_H(a: HorizontalForm) -> HorizontalForm:
    """Horizontal exterior derivative ``d_H(f dx^I) = d_mu f dx^mu ^ dx^I``."""
    m = a.dim
    k = a.degree + 1
    if k > m:
        return HorizontalForm(a.space, k)
    derivs: dict = {}
    out = {}
    for tau in itertools.combinations(range(m), k):
        terms = []
        for j, mu in enumerate(tau):
            rest = tau[:j] + tau[j + 1:]
            c = a.coeffs.get(rest)
            if c is None:
                continue
            key = (rest, mu)
            if key not in derivs:
                derivs[key] = total_derivative(c, mu)
            d = derivs[key]
            terms.append(d if j % 2 == 0 else -d)
        if terms:
            out[tau] = expr_sum(terms, a.space)
    return HorizontalForm(a.space, k, out)


def density_of(a: HorizontalForm):
    """The coefficient of ``dx^0 ^ ... ^ dx^{m-1}`` as a Lagrangian density."""
    from .varcalc import LagrangianDensity

    if a.degree != a.dim:
        raise DegreeMismatch(f"density needs a form of degree {a.dim}, got {a.degree}")
    return LagrangianDensity(a[tuple(range(a.dim))])
