"""Jet coordinates and canonical rational expressions over them.

An :class:`Expr` is stored as ``(A + B*s) / D`` where ``A`` and ``B`` are
polynomials with rational coefficients in the jet variables and atoms of a
:class:`JetSpace`, ``s`` is the square root of the metric determinant (the one
radical a space may carry, with ``s**2 = det g``) and ``D`` is a product of
monic irreducible factors.  After every operation no factor of ``D`` divides
both ``A`` and ``B``, which makes the representation unique: two expressions
are equal iff their ``(A, B, D)`` triples coincide.

Polynomial arithmetic is delegated to ``python-flint``.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable

import flint
import numpy as np

from .errors import (
    DimensionMismatch,
    MissingWeight,
    NonLaurentIntegrand,
    DivergentHomotopy,
    UnknownAtomDerivative,
    UsageError,
)

RESERVED_NAMES = frozenset({"t"})
_ORDER = "deglex"

_KINDS = ("scalar", "covector", "vector", "metric", "tensor12", "tensor")


def _fraction(c) -> Fraction:
    return Fraction(int(c.p), int(c.q))


def _perm_sign(p) -> int:
    p = list(p)
    sign = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


# ---------------------------------------------------------------------------
# fields, jet variables, atoms


@dataclass(frozen=True)
class FieldSpec:
    """A field on an ``m``-dimensional base.

    ``positions`` holds ``'u'`` or ``'d'`` per tensor slot.  ``symmetries`` is a
    tuple of ``(slots, sign)`` pairs over disjoint slot groups; sign ``+1``
    means symmetric, ``-1`` antisymmetric.
    """

    name: str
    kind: str
    dim: int
    positions: tuple = ()
    symmetries: tuple = ()

    def __post_init__(self):
        if not self.name.isidentifier():
            raise UsageError(f"invalid field name {self.name!r}")
        if self.name in RESERVED_NAMES:
            raise UsageError(f"{self.name!r} is reserved for the homotopy parameter")
        if self.kind not in _KINDS:
            raise UsageError(f"unknown field kind {self.kind!r}")
        if not isinstance(self.dim, int) or self.dim < 1:
            raise UsageError("base dimension must be a positive integer")
        seen = set()
        for slots, sign in self.symmetries:
            if sign not in (1, -1) or not set(slots).isdisjoint(seen):
                raise UsageError("symmetry groups must be disjoint with sign +1 or -1")
            if any(not 0 <= s < len(self.positions) for s in slots):
                raise UsageError("symmetry group refers to a missing slot")
            seen.update(slots)

    # constructors -----------------------------------------------------
    @classmethod
    def scalar(cls, name, dim):
        return cls(name, "scalar", dim)

    @classmethod
    def covector(cls, name, dim):
        return cls(name, "covector", dim, ("d",))

    @classmethod
    def vector(cls, name, dim):
        return cls(name, "vector", dim, ("u",))

    @classmethod
    def metric(cls, name, dim):
        return cls(name, "metric", dim, ("d", "d"), (((0, 1), 1),))

    @classmethod
    def tensor12(cls, name, dim, symmetry=None):
        """A (1,2) tensor ``X^a_{bc}``; ``symmetry`` is None, 'sym' or 'antisym'
        in the two lower slots."""
        sym = ()
        if symmetry == "sym":
            sym = (((1, 2), 1),)
        elif symmetry == "antisym":
            sym = (((1, 2), -1),)
        elif symmetry is not None:
            raise UsageError(f"unknown symmetry {symmetry!r}")
        return cls(name, "tensor12", dim, ("u", "d", "d"), sym)

    @classmethod
    def tensor(cls, name, dim, positions, symmetries=()):
        return cls(name, "tensor", dim, tuple(positions), tuple(symmetries))

    # components -------------------------------------------------------
    @property
    def rank(self) -> int:
        return len(self.positions)

    def canonical(self, comp) -> tuple[int, tuple]:
        """Return ``(sign, canonical component)``; sign is 0 for components
        forced to vanish by antisymmetry."""
        comp = tuple(int(c) for c in comp)
        if len(comp) != self.rank:
            raise UsageError(f"field {self.name} expects {self.rank} indices, got {len(comp)}")
        if any(not 0 <= c < self.dim for c in comp):
            raise UsageError(f"component {comp} out of range for dimension {self.dim}")
        out = list(comp)
        sign = 1
        for slots, s in self.symmetries:
            vals = [out[i] for i in slots]
            order = sorted(range(len(vals)), key=lambda i: vals[i])
            if s == -1:
                if len(set(vals)) < len(vals):
                    return 0, tuple(comp)
                sign *= _perm_sign(order)
            for i, k in zip(slots, order):
                out[i] = vals[k]
        return sign, tuple(out)

    def components(self) -> list[tuple]:
        out = set()
        for c in itertools.product(range(self.dim), repeat=self.rank):
            sign, cc = self.canonical(c)
            if sign:
                out.add(cc)
        return sorted(out)

    def multiplicity(self, comp) -> int:
        """Number of raw index tuples represented by a canonical component."""
        comp = self.canonical(comp)[1]
        n = 0
        for c in itertools.product(range(self.dim), repeat=self.rank):
            sign, cc = self.canonical(c)
            if sign and cc == comp:
                n += 1
        return n


@dataclass(frozen=True)
class JetVariable:
    """Canonical jet coordinate ``field[component],deriv``."""

    field: FieldSpec
    component: tuple
    deriv: tuple

    @staticmethod
    def make(field: FieldSpec, component=(), deriv=()) -> tuple[int, JetVariable]:
        sign, comp = field.canonical(component)
        deriv = tuple(sorted(int(d) for d in deriv))
        if any(not 0 <= d < field.dim for d in deriv):
            raise UsageError(f"derivative index out of range in {deriv}")
        return sign, JetVariable(field, comp, deriv)

    @property
    def order(self) -> int:
        return len(self.deriv)

    def shifted(self, mu: int) -> JetVariable:
        return JetVariable(self.field, self.component, tuple(sorted(self.deriv + (mu,))))

    @property
    def text(self) -> str:
        s = self.field.name
        if self.component:
            s += "[" + ",".join(str(c) for c in self.component) + "]"
        for d in self.deriv:
            s += f",{d}"
        return s

    def __str__(self):
        return self.text

    def sort_key(self):
        return (self.field.name, self.order, self.component, self.deriv)


class Atom:
    """A registered non-polynomial symbol.

    ``kind`` is ``'const'`` (a symbolic constant such as kappa), ``'function'``
    (a function of one scalar field, e.g. ``V(phi)``) or ``'radical'`` (the
    square root of a metric determinant, with relation ``s**2 = det g``).
    ``weight`` is the exponent picked up under the fiber homothety of the
    argument field; ``derivative`` names the atom ``dA/d(arg)``.
    """

    def __init__(self, name, kind, arg=None, weight=None, derivative=None, relation=None):
        self.name = name
        self.kind = kind
        self.arg = arg
        self.weight = None if weight is None else Fraction(weight)
        self.derivative = derivative
        self.relation = relation

    @property
    def text(self) -> str:
        if self.kind == "const":
            return self.name
        if self.kind == "radical":
            return f"sqrtdetg({self.arg})"
        return f"{self.name}({self.arg})"

    def __repr__(self):
        return f"Atom({self.text})"


# ---------------------------------------------------------------------------
# the space


class JetSpace:
    """Registry of fields, atoms and jet variables, and owner of the
    polynomial context in which every :class:`Expr` of the space lives.

    Jet variables are created lazily, one ``(field, order)`` block at a time.
    Growing the context never changes the relative order of existing
    generators, so normal forms are stable.
    """

    def __init__(self, fields: Iterable[FieldSpec], max_order: int = 3):
        fields = list(fields)
        if not fields:
            raise UsageError("a jet space needs at least one field")
        dims = {f.dim for f in fields}
        if len(dims) != 1:
            raise DimensionMismatch(f"fields live on different base dimensions {sorted(dims)}")
        self.dim = dims.pop()
        self.fields = {}
        for f in fields:
            if f.name in self.fields:
                raise UsageError(f"duplicate field {f.name}")
            self.fields[f.name] = f
        self.max_order = max_order
        self._lock = threading.RLock()
        self._keys: list = []
        self._index: dict = {}
        self._atoms: dict[str, Atom] = {}
        self._groups: set = set()
        self._ctx = None
        self._gens_cache = None
        self._factor_src: dict[str, object] = {}
        self._factor_cache: dict = {}
        self._det_src = None
        self.metric = next((f for f in fields if f.kind == "metric"), None)
        with self._lock:
            pending = []
            for f in fields:
                pending += self._group_keys(f, 0)
                self._groups.add((f.name, 0))
            self._extend(pending)
        if self.metric is not None:
            self._atoms["sqrtdetg"] = Atom(
                "sqrtdetg", "radical", self.metric.name,
                weight=Fraction(self.dim, 2), relation="s^2 - det",
            )
            self._det_src = self._build_det()
            self._det_key = self.register_factor(self._det_src)

    # context management -------------------------------------------------
    def _group_keys(self, f: FieldSpec, order: int):
        out = []
        for comp in f.components():
            for deriv in itertools.combinations_with_replacement(range(self.dim), order):
                out.append(JetVariable(f, comp, deriv))
        return out

    def _extend(self, keys):
        keys = [k for k in keys if k not in self._index]
        if not keys:
            return
        for k in keys:
            self._index[k] = len(self._keys)
            self._keys.append(k)
        names = [self.key_text(k) for k in self._keys]
        self._ctx = flint.fmpq_mpoly_ctx.get(names, _ORDER)

    @property
    def ctx(self):
        return self._ctx

    def ensure_order(self, field: FieldSpec, order: int):
        if (field.name, order) in self._groups:
            return
        with self._lock:
            pending = []
            for k in range(order + 1):
                if (field.name, k) not in self._groups:
                    pending += self._group_keys(field, k)
                    self._groups.add((field.name, k))
            self._extend(pending)
            self.max_order = max(self.max_order, order)

    def lift(self, p):
        ctx = self._ctx
        if p.context() is ctx:
            return p
        return p.project_to_context(ctx)

    def gen(self, key):
        return self._gens()[self._index[key]]

    def _gens(self):
        ctx = self._ctx
        if self._gens_cache is None or self._gens_cache[0] is not ctx:
            self._gens_cache = (ctx, ctx.gens())
        return self._gens_cache[1]

    def index(self, key) -> int:
        return self._index[key]

    def keys(self) -> list:
        return list(self._keys)

    def zero_poly(self):
        return self._ctx.from_dict({})

    def const_poly(self, c):
        c = Fraction(c)
        if c == 0:
            return self.zero_poly()
        return self._ctx.from_dict({(0,) * len(self._keys): flint.fmpq(c.numerator, c.denominator)})

    # fields and atoms ------------------------------------------------------
    def field(self, name) -> FieldSpec:
        try:
            return self.fields[name]
        except KeyError:
            raise UsageError(f"unknown field {name!r}") from None

    def jetvar(self, field, component=(), deriv=()) -> tuple[int, JetVariable]:
        if isinstance(field, str):
            field = self.field(field)
        sign, v = JetVariable.make(field, component, deriv)
        self.ensure_order(field, v.order)
        return sign, v

    def var(self, field, component=(), deriv=()) -> Expr:
        sign, v = self.jetvar(field, component, deriv)
        if sign == 0:
            return self.zero()
        return Expr._poly(self, sign * self.gen(v))

    def atom(self, name) -> Atom:
        try:
            return self._atoms[name]
        except KeyError:
            raise UsageError(f"unknown atom {name!r}") from None

    def has_atom(self, name) -> bool:
        return name in self._atoms

    def atoms(self) -> list[Atom]:
        return list(self._atoms.values())

    def add_constant(self, name) -> Expr:
        if name in RESERVED_NAMES or name in self.fields:
            raise UsageError(f"name {name!r} already in use")
        with self._lock:
            if name not in self._atoms:
                a = Atom(name, "const", weight=0)
                self._atoms[name] = a
                self._extend([("atom", name)])
        return self.atom_expr(name)

    def add_function(self, name, arg, weight=None, differentiable=True) -> Expr:
        """Register a function atom ``name(arg)`` of a scalar field.  Its
        derivative chain ``namep``, ``namepp``, ... is created on demand."""
        f = self.field(arg)
        if f.kind != "scalar":
            raise UsageError("function atoms take a single scalar field")
        if name in RESERVED_NAMES or name in self.fields:
            raise UsageError(f"name {name!r} already in use")
        with self._lock:
            if name not in self._atoms:
                deriv = name + "p" if differentiable else None
                self._atoms[name] = Atom(name, "function", arg, weight, deriv)
                self._extend([("atom", name)])
            elif self._atoms[name].kind != "function" or self._atoms[name].arg != arg:
                raise UsageError(f"atom {name!r} already registered differently")
        return self.atom_expr(name)

    def _derivative_atom(self, a: Atom) -> Atom:
        if a.derivative is None:
            raise UnknownAtomDerivative(f"no derivative rule registered for {a.text}")
        with self._lock:
            if a.derivative not in self._atoms:
                self._atoms[a.derivative] = Atom(a.derivative, "function", a.arg, a.weight,
                                                 a.derivative + "p")
                self._extend([("atom", a.derivative)])
        return self._atoms[a.derivative]

    def atom_expr(self, name) -> Expr:
        a = self.atom(name)
        if a.kind == "radical":
            return self.sqrtdet()
        return Expr._poly(self, self.gen(("atom", name)))

    def sqrtdet(self) -> Expr:
        if self.metric is None:
            raise UsageError("no metric field declared")
        return Expr(self, self.zero_poly(), self.const_poly(1), ())

    def key_of_index(self, i):
        return self._keys[i]

    def key_text(self, key) -> str:
        if isinstance(key, JetVariable):
            return key.text
        return self._atoms[key[1]].text

    # metric determinant ------------------------------------------------
    def metric_poly(self, a, b):
        _, v = self.jetvar(self.metric, (a, b))
        return self.gen(v)

    def _build_det(self):
        m = self.dim
        det = self.zero_poly()
        for p in itertools.permutations(range(m)):
            term = self.const_poly(_perm_sign(p))
            for i in range(m):
                term = term * self.metric_poly(i, p[i])
            det += term
        return det

    def det_poly(self):
        return self.factor_poly(self._det_key)

    def det(self) -> Expr:
        return Expr._poly(self, self.det_poly())

    def adjugate_poly(self, a, b):
        """Polynomial entry ``adj(g)^{ab}`` so that ``g^{ab} = adj^{ab}/det``."""
        m = self.dim
        rows = [i for i in range(m) if i != b]
        cols = [j for j in range(m) if j != a]
        tot = self.zero_poly()
        for p in itertools.permutations(range(m - 1)):
            term = self.const_poly(_perm_sign(p))
            for i in range(m - 1):
                term = term * self.metric_poly(rows[i], cols[p[i]])
            tot += term
        return tot * (-1) ** (a + b)

    # factor registry ---------------------------------------------------
    def _poly_key(self, p) -> str:
        terms = []
        keys = self._keys
        for monom, c in p.to_dict().items():
            mon = tuple(sorted((self.key_text(keys[i]), e) for i, e in enumerate(monom) if e))
            terms.append((mon, str(c)))
        terms.sort()
        return ";".join(" ".join(f"{n}^{e}" for n, e in mon) + ":" + c for mon, c in terms)

    def register_factor(self, f) -> str:
        """Register a monic irreducible polynomial and return its key."""
        f = self.lift(f)
        key = self._poly_key(f)
        with self._lock:
            if key not in self._factor_src:
                self._factor_src[key] = f
        return key

    def factor_poly(self, key):
        ctx = self._ctx
        hit = self._factor_cache.get(key)
        if hit is not None and hit.context() is ctx:
            return hit
        p = self.lift(self._factor_src[key])
        self._factor_cache[key] = p
        return p

    def det_key(self) -> str:
        return self._det_key

    def factorize(self, p) -> tuple[Fraction, list[tuple[str, int]]]:
        """Split a nonzero polynomial into a rational constant and monic
        irreducible factors (registered)."""
        p = self.lift(p)
        if p.is_constant():
            return _fraction(p.leading_coefficient()), []
        content, facs = p.factor()
        c = _fraction(content)
        out = []
        for f, e in facs:
            lc = f.leading_coefficient()
            c *= _fraction(lc) ** e
            f = f / lc
            out.append((self.register_factor(f), int(e)))
        return c, out

    # homotopy context ----------------------------------------------------
    def zero(self) -> Expr:
        return Expr(self, self.zero_poly(), self.zero_poly(), ())

    def const(self, c) -> Expr:
        return Expr._poly(self, self.const_poly(c))

    # evaluation helpers ----------------------------------------------------
    def point_vector(self, point: dict):
        vals = []
        for k in self._keys:
            if k in point:
                v = point[k]
            elif isinstance(k, tuple) and k[1] in point:
                v = point[k[1]]
            elif isinstance(k, JetVariable) and k.text in point:
                v = point[k.text]
            else:
                v = 0
            v = Fraction(v)
            vals.append(flint.fmpq(v.numerator, v.denominator))
        return vals

    def random_point(self, rng, lo=-5, hi=5) -> dict:
        return {k: Fraction(rng.randint(lo, hi)) for k in self._keys}


# ---------------------------------------------------------------------------
# expressions


def _merge_den(d1, d2, op):
    out = dict(d1)
    for k, e in d2:
        out[k] = op(out.get(k, 0), e)
    return out


class Expr:
    """Canonical exact expression ``(A + B*s)/D`` over a :class:`JetSpace`."""

    __slots__ = ("space", "_A", "_B", "_D")

    def __init__(self, space: JetSpace, A, B, D, reduce=True):
        self.space = space
        A = space.lift(A)
        B = space.lift(B)
        if A.is_zero() and B.is_zero():
            self._A, self._B, self._D = A, B, ()
            return
        if reduce and D:
            A, B, D = Expr._reduce(space, A, B, D)
        self._A, self._B = A, B
        self._D = tuple(sorted((k, e) for k, e in dict(D).items() if e > 0))

    @staticmethod
    def _reduce(space, A, B, D):
        out = []
        for k, e in (D.items() if isinstance(D, dict) else D):
            if e <= 0:
                continue
            f = space.factor_poly(k)
            while e > 0:
                qa, ra = divmod(A, f)
                if not ra.is_zero():
                    break
                if B.is_zero():
                    qb = B
                else:
                    qb, rb = divmod(B, f)
                    if not rb.is_zero():
                        break
                A, B = qa, qb
                e -= 1
            if e:
                out.append((k, e))
        return A, B, out

    @classmethod
    def _poly(cls, space, p) -> Expr:
        return cls(space, p, space.zero_poly(), ())

    # access -----------------------------------------------------------------
    def parts(self):
        """``(A, B, D)`` lifted into the current context of the space."""
        sp = self.space
        if self._A.context() is not sp.ctx:
            # same value, re-expressed in the grown context; cache it
            self._A = sp.lift(self._A)
            self._B = sp.lift(self._B)
        return self._A, self._B, self._D

    def den_poly(self):
        sp = self.space
        p = sp.const_poly(1)
        for k, e in self._D:
            p = p * sp.factor_poly(k) ** e
        return p

    def is_zero(self) -> bool:
        return self._A.is_zero() and self._B.is_zero()

    def has_radical(self) -> bool:
        return not self._B.is_zero()

    def is_polynomial(self) -> bool:
        return not self._D

    def constant_value(self):
        """The rational value if the expression is a constant, else None."""
        if self._D or not self._B.is_zero() or not self._A.is_constant():
            return None
        if self._A.is_zero():
            return Fraction(0)
        return _fraction(self._A.leading_coefficient())

    def generators(self) -> set:
        """Keys of generators occurring anywhere in the expression."""
        sp = self.space
        A, B, D = self.parts()
        out = set()
        polys = [A, B] + [sp.factor_poly(k) for k, _ in D]
        for p in polys:
            if p.is_zero():
                continue
            for i, d in enumerate(p.degrees()):
                if d:
                    out.add(sp.key_of_index(i))
        if not self._B.is_zero():
            out.add(("atom", "sqrtdetg"))
        return out

    def jet_variables(self) -> set:
        out = {k for k in self.generators() if isinstance(k, JetVariable)}
        if self.has_radical():
            for comp in self.space.metric.components():
                out.add(JetVariable(self.space.metric, comp, ()))
        return out

    def order(self, field=None) -> int:
        vs = self.jet_variables()
        if field is not None:
            name = field if isinstance(field, str) else field.name
            vs = [v for v in vs if v.field.name == name]
        return max((v.order for v in vs), default=0)

    def depends_on(self, field) -> bool:
        name = field if isinstance(field, str) else field.name
        if any(v.field.name == name for v in self.jet_variables()):
            return True
        for k in self.generators():
            if isinstance(k, tuple):
                a = self.space.atom(k[1])
                if a.arg == name:
                    return True
        return False

    # arithmetic ---------------------------------------------------------------
    def _coerce(self, other) -> Expr:
        if isinstance(other, Expr):
            if other.space is not self.space:
                raise UsageError("expressions belong to different jet spaces")
            return other
        if isinstance(other, (int, Fraction)):
            return self.space.const(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        sp = self.space
        A1, B1, D1 = self.parts()
        A2, B2, D2 = other.parts()
        if D1 == D2:
            return Expr(sp, A1 + A2, B1 + B2, D1)
        D = _merge_den(D1, D2, max)
        m1 = sp.const_poly(1)
        m2 = sp.const_poly(1)
        d1, d2 = dict(D1), dict(D2)
        for k, e in D.items():
            if e - d1.get(k, 0):
                m1 = m1 * sp.factor_poly(k) ** (e - d1.get(k, 0))
            if e - d2.get(k, 0):
                m2 = m2 * sp.factor_poly(k) ** (e - d2.get(k, 0))
        return Expr(sp, A1 * m1 + A2 * m2, B1 * m1 + B2 * m2, D)

    __radd__ = __add__

    def __neg__(self):
        A, B, D = self.parts()
        return Expr(self.space, -A, -B, D, reduce=False)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def scale(self, c) -> Expr:
        c = Fraction(c)
        if c == 0:
            return self.space.zero()
        A, B, D = self.parts()
        q = flint.fmpq(c.numerator, c.denominator)
        return Expr(self.space, A * q, B * q, D, reduce=False)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.is_zero() or other.is_zero():
            return self.space.zero()
        sp = self.space
        A1, B1, D1 = self.parts()
        A2, B2, D2 = other.parts()
        A = A1 * A2
        if not B1.is_zero() and not B2.is_zero():
            A = A + B1 * B2 * sp.det_poly()
        B = A1 * B2 + A2 * B1
        D = _merge_den(D1, D2, lambda a, b: a + b)
        return Expr(sp, A, B, D)

    __rmul__ = __mul__

    def inverse(self) -> Expr:
        if self.is_zero():
            raise ZeroDivisionError("division by the zero expression")
        sp = self.space
        A, B, D = self.parts()
        if B.is_zero():
            num_A, num_B, den = sp.const_poly(1), sp.zero_poly(), A
        else:
            # 1/(A + B s) = (A - B s) / (A^2 - B^2 det)
            num_A, num_B, den = A, -B, A * A - B * B * sp.det_poly()
        c, facs = sp.factorize(den)
        P = sp.const_poly(1)
        for k, e in D:
            P = P * sp.factor_poly(k) ** e
        q = flint.fmpq((1 / c).numerator, (1 / c).denominator)
        return Expr(sp, num_A * P * q, num_B * P * q, dict(facs))

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(1 / Fraction(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise UsageError("only integer powers are supported")
        if n < 0:
            return self.inverse() ** (-n)
        out = self.space.const(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # equality -----------------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.space.const(other)
        if not isinstance(other, Expr):
            return NotImplemented
        return equals(self, other)

    def __hash__(self):
        return hash(self.canonical_text())

    # derivations -------------------------------------------------------------
    def _derive(self, image) -> Expr:
        """Apply the derivation sending generator index ``i`` to the
        polynomial ``image(i)`` (or None for zero)."""
        sp = self.space
        if self.is_zero():
            return self
        A, B, D = self.parts()
        cache = {}

        def img(i):
            if i not in cache:
                cache[i] = image(i)
            return cache[i]

        def delta(p):
            out = sp.zero_poly()
            if p.is_zero():
                return out
            for i, d in enumerate(p.degrees()):
                if d:
                    q = img(i)
                    if q is not None and not q.is_zero():
                        out += p.derivative(i) * q
            return out

        dA = delta(A)
        dB = delta(B)
        keys = [k for k, _ in D]
        ddet = None
        if not B.is_zero():
            ddet = delta(sp.det_poly())
            if ddet.is_zero():
                ddet = None
            else:
                dk = sp.det_key()
                if dk not in keys:
                    keys.append(dk)
        dD = dict(D)
        polys = {k: sp.factor_poly(k) for k in keys}
        dfs = {k: delta(polys[k]) for k, _ in D}
        if all(df.is_zero() for df in dfs.values()) and ddet is None:
            return Expr(sp, dA, dB, D)
        newD = {k: dD.get(k, 0) + 1 for k in keys}

        def others(skip):
            p = sp.const_poly(1)
            for k in keys:
                if k != skip:
                    p = p * polys[k]
            return p

        P = others(None)
        sigma = sp.zero_poly()
        for k, e in D:
            if not dfs[k].is_zero():
                sigma += dfs[k] * others(k) * e
        newA = dA * P - A * sigma
        newB = dB * P - B * sigma
        if ddet is not None:
            half = flint.fmpq(1, 2)
            newB += B * ddet * others(sp.det_key()) * half
        return Expr(sp, newA, newB, newD)

    # printing -------------------------------------------------------------
    def _poly_terms(self, p):
        sp = self.space
        keys = sp._keys
        out = []
        for monom, c in p.to_dict().items():
            mon = tuple(sorted(((sp.key_text(keys[i]), e) for i, e in enumerate(monom) if e),
                               key=_name_key))
            out.append((mon, _fraction(c)))
        out.sort(key=lambda t: (-sum(e for _, e in t[0]), [(_name_key(x), -x[1]) for x in t[0]]))
        return out

    @staticmethod
    def _mono_text(mon):
        return "*".join(n if e == 1 else f"{n}^{e}" for n, e in mon)

    def _poly_text(self, p) -> str:
        terms = self._poly_terms(p)
        if not terms:
            return "0"
        pieces = []
        for mon, c in terms:
            sign = "-" if c < 0 else "+"
            a = abs(c)
            body = self._mono_text(mon)
            if not body:
                s = str(a)
            elif a == 1:
                s = body
            else:
                s = f"{a}*{body}"
            pieces.append((sign, s))
        text = ("-" if pieces[0][0] == "-" else "") + pieces[0][1]
        for sign, s in pieces[1:]:
            text += f" {sign} {s}"
        return text

    def numerator_text(self) -> str:
        A, B, _ = self.parts()
        parts = []
        if not A.is_zero():
            parts.append(self._poly_text(A))
        if not B.is_zero():
            rad = f"sqrtdetg({self.space.metric.name})"
            parts.append(f"({self._poly_text(B)})*{rad}")
        if not parts:
            return "0"
        return " + ".join(f"({p})" if len(parts) > 1 else p for p in parts)

    def __str__(self):
        num = self.numerator_text()
        if not self._D:
            return num
        den = "*".join(
            f"({self._poly_text(self.space.factor_poly(k))})" + (f"^{e}" if e > 1 else "")
            for k, e in self._D
        )
        return f"({num})/({den})"

    text = property(__str__)

    def __repr__(self):
        s = str(self)
        if len(s) > 200:
            s = s[:200] + "..."
        return f"Expr({s})"

    def canonical_terms(self) -> dict:
        """Serializable canonical form: term lists for A, B and the factors."""
        A, B, D = self.parts()

        def ser(p):
            return [[str(c), [[n, int(e)] for n, e in mon]] for mon, c in self._poly_terms(p)]

        return {
            "A": ser(A),
            "B": ser(B),
            "D": [[ser(self.space.factor_poly(k)), e] for k, e in D],
        }

    def canonical_text(self) -> str:
        return str(self)

    def n_terms(self) -> int:
        return len(self._A) + len(self._B)

    # evaluation ---------------------------------------------------------------
    def evaluate(self, point: dict) -> tuple[Fraction, Fraction]:
        """Exact value at a rational point as ``(a, b)`` meaning ``a + b*s``.
        Raises ZeroDivisionError on a pole."""
        sp = self.space
        vec = sp.point_vector(point)
        A, B, _ = self.parts()
        den = _fraction(self.den_poly()(*vec))
        if den == 0:
            raise ZeroDivisionError("point lies on a pole")
        return _fraction(A(*vec)) / den, _fraction(B(*vec)) / den

    def value(self, point: dict, s=None) -> Fraction:
        a, b = self.evaluate(point)
        if b == 0:
            return a
        if s is None:
            raise UsageError("a value for the radical is required")
        return a + b * Fraction(s)


def _name_key(item):
    n = item[0] if isinstance(item, tuple) else item
    return n


# ---------------------------------------------------------------------------
# public operations


def expr_sum(items, space: JetSpace | None = None) -> Expr:
    """Sum many expressions with a single common denominator and a single
    reduction (much cheaper than repeated ``+``)."""
    items = [e for e in items if not e.is_zero()]
    if not items:
        if space is None:
            raise UsageError("expr_sum of an empty sequence needs a space")
        return space.zero()
    sp = items[0].space
    if len(items) == 1:
        return items[0]
    D: dict = {}
    for e in items:
        for k, x in e._D:
            D[k] = max(D.get(k, 0), x)
    A = sp.zero_poly()
    B = sp.zero_poly()
    by_den: dict = {}
    for e in items:
        by_den.setdefault(e._D, []).append(e)
    for den, group in by_den.items():
        a = sp.zero_poly()
        b = sp.zero_poly()
        for e in group:
            ea, eb, _ = e.parts()
            a += ea
            b += eb
        mult = sp.const_poly(1)
        dd = dict(den)
        for k, x in D.items():
            if x - dd.get(k, 0):
                mult = mult * sp.factor_poly(k) ** (x - dd.get(k, 0))
        A += a * mult
        B += b * mult
    return Expr(sp, A, B, D)


def equals(e1: Expr, e2: Expr) -> bool:
    """True iff ``e1 - e2`` is the zero expression modulo ``s**2 = det g``."""
    return (e1 - e2).is_zero()


def total_derivative(e: Expr, mu: int) -> Expr:
    """``d_mu e``: chain rule through jet variables and function atoms."""
    sp = e.space
    if not 0 <= mu < sp.dim:
        raise UsageError(f"base index {mu} out of range")
    gens = e.generators()
    for k in gens:
        if isinstance(k, JetVariable):
            sp.ensure_order(k.field, k.order + 1)
        elif k[1] == "sqrtdetg":
            sp.ensure_order(sp.metric, 1)
        else:
            a = sp.atom(k[1])
            if a.kind == "function":
                sp.ensure_order(sp.field(a.arg), 1)
                sp._derivative_atom(a)

    def image(i):
        k = sp.key_of_index(i)
        if isinstance(k, JetVariable):
            return sp.gen(k.shifted(mu))
        a = sp.atom(k[1])
        if a.kind == "function":
            da = sp._derivative_atom(a)
            _, phimu = JetVariable.make(sp.field(a.arg), (), (mu,))
            return sp.gen(("atom", da.name)) * sp.gen(phimu)
        return None

    return e._derive(image)


def partial_derivative(e: Expr, v: JetVariable) -> Expr:
    """Formal partial derivative with respect to an independent jet
    coordinate.  For symmetric fields this is the independent-component
    derivative: ``d(g01)/d(g01) = 1`` where ``g01`` stands for both g_01 and
    g_10."""
    sp = e.space
    sign, v = JetVariable.make(v.field, v.component, v.deriv)
    if sign == 0 or v not in sp._index:
        return sp.zero()
    vi = sp.index(v)
    scalar_arg = v.order == 0 and v.field.kind == "scalar"

    def image(i):
        if i == vi:
            return sp.const_poly(1)
        k = sp.key_of_index(i)
        if scalar_arg and isinstance(k, tuple):
            a = sp.atom(k[1])
            if a.kind == "function" and a.arg == v.field.name:
                return sp.gen(("atom", sp._derivative_atom(a).name))
        return None

    if scalar_arg:
        for k in e.generators():
            if isinstance(k, tuple) and k[1] != "sqrtdetg":
                a = sp.atom(k[1])
                if a.kind == "function" and a.arg == v.field.name:
                    sp._derivative_atom(a)
    return e._derive(image)


def diff_atom(e: Expr, name: str) -> Expr:
    """Partial derivative with respect to an atom generator (constants and
    function atoms treated as independent symbols)."""
    sp = e.space
    k = ("atom", name)
    if k not in sp._index:
        return sp.zero()
    vi = sp.index(k)
    return e._derive(lambda i: sp.const_poly(1) if i == vi else None)


# ---------------------------------------------------------------------------
# homotopy parameter


class TSeries:
    """A Laurent polynomial in the reserved parameter ``t`` with rational
    exponents and :class:`Expr` coefficients, or a marker for an
    expression whose ``t``-dependence is not of that shape."""

    def __init__(self, space, terms=None, laurent=True, source=None):
        self.space = space
        self.terms = {}
        for w, c in (terms or {}).items():
            if not c.is_zero():
                w = Fraction(w)
                self.terms[w] = self.terms[w] + c if w in self.terms else c
        self.terms = {w: c for w, c in self.terms.items() if not c.is_zero()}
        self.laurent = laurent
        self.source = source

    @classmethod
    def monomial(cls, space, w, coeff=None):
        return cls(space, {Fraction(w): coeff if coeff is not None else space.const(1)})

    def exponents(self):
        return sorted(self.terms)

    def __getitem__(self, w):
        return self.terms.get(Fraction(w), self.space.zero())

    def _check(self, other):
        if not (self.laurent and other.laurent):
            raise NonLaurentIntegrand("t-dependence is not a Laurent polynomial")

    def __add__(self, other):
        self._check(other)
        t = dict(self.terms)
        for w, c in other.terms.items():
            t[w] = t[w] + c if w in t else c
        return TSeries(self.space, t)

    def __mul__(self, other):
        if isinstance(other, Expr):
            return TSeries(self.space, {w: c * other for w, c in self.terms.items()},
                           self.laurent)
        self._check(other)
        t = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                w = w1 + w2
                t[w] = t[w] + c1 * c2 if w in t else c1 * c2
        return TSeries(self.space, t)

    def __eq__(self, other):
        if not isinstance(other, TSeries):
            return NotImplemented
        if not (self.laurent and other.laurent):
            return False
        ws = set(self.terms) | set(other.terms)
        return all(equals(self[w], other[w]) for w in ws)

    def at_one(self) -> Expr:
        if not self.laurent:
            return self.source
        out = self.space.zero()
        for w in sorted(self.terms):
            out = out + self.terms[w]
        return out

    def __repr__(self):
        if not self.laurent:
            return "TSeries(<not Laurent>)"
        return "TSeries(" + ", ".join(f"t^{w}: {c!r}" for w, c in sorted(self.terms.items())) + ")"


def _weight_vector(space: JetSpace, names: set):
    m = space.dim
    w = []
    for k in space._keys:
        if isinstance(k, JetVariable):
            w.append(Fraction(1) if k.field.name in names else Fraction(0))
            continue
        a = space.atom(k[1])
        if a.kind == "function" and a.arg in names:
            w.append(None if a.weight is None else a.weight)
        else:
            w.append(Fraction(0))
    s_weight = Fraction(m, 2) if space.metric is not None and space.metric.name in names else Fraction(0)
    return w, s_weight


def _split_by_weight(space, p, w, atoms_missing):
    """Group terms of ``p`` by weighted degree; returns dict weight -> poly."""
    if p.is_zero():
        return {}
    present = [i for i, d in enumerate(p.degrees()) if d]
    for i in present:
        if w[i] is None:
            raise MissingWeight(f"atom {atoms_missing(i)} has no homotopy weight")
    ws = {w[i] for i in present}
    if not present or ws == {0}:
        return {Fraction(0): p}
    if ws == {1}:
        # weighted degree is the total degree; deglex puts the extreme
        # degrees at both ends of the term list
        hi = sum(int(x) for x in p.monomial(0))
        lo = sum(int(x) for x in p.monomial(len(p) - 1))
        if hi == lo:
            return {Fraction(hi): p}
    den = lcm(*[w[i].denominator for i in present])
    nv = len(w)
    monoms = p.monoms()
    arr = np.fromiter(itertools.chain.from_iterable(monoms), dtype=np.int64,
                      count=len(monoms) * nv).reshape(len(monoms), nv)
    wi = np.array([int(w[i] * den) for i in present], dtype=np.int64)
    total = arr[:, present] @ wi
    if total.min() == total.max():
        return {Fraction(int(total[0]), den): p}
    coeffs = p.coeffs()
    groups: dict = {}
    for mon, c, tw in zip(monoms, coeffs, total.tolist()):
        groups.setdefault(tw, {})[mon] = c
    return {Fraction(k, den): space.ctx.from_dict(v) for k, v in groups.items()}


def scale_fields(e: Expr, fields, t: str = "t") -> TSeries:
    """Substitute ``v -> t*v`` for every jet variable of the given fields and
    ``a -> t**w * a`` for atoms of weight ``w`` depending on them."""
    if t != "t":
        raise UsageError("the homotopy parameter is always named t")
    sp = e.space
    names = {f if isinstance(f, str) else f.name for f in fields}
    for n in names:
        sp.field(n)
    if e.is_zero():
        return TSeries(sp, {})
    w, s_weight = _weight_vector(sp, names)

    def missing(i):
        return sp.key_text(sp.key_of_index(i))

    A, B, D = e.parts()
    dshift = Fraction(0)
    for k, ex in D:
        parts = _split_by_weight(sp, sp.factor_poly(k), w, missing)
        if len(parts) != 1:
            return TSeries(sp, laurent=False, source=e)
        dshift += next(iter(parts)) * ex
    terms = {}
    for wt, p in _split_by_weight(sp, A, w, missing).items():
        terms.setdefault(wt - dshift, [sp.zero_poly(), sp.zero_poly()])[0] = p
    for wt, p in _split_by_weight(sp, B, w, missing).items():
        terms.setdefault(wt + s_weight - dshift, [sp.zero_poly(), sp.zero_poly()])[1] = p
    return TSeries(sp, {wt: Expr(sp, a, b, D) for wt, (a, b) in terms.items()})


def integrate_homotopy(e) -> Expr:
    """``lim_{a->0} int_a^1 e dt`` for a Laurent polynomial ``e`` in ``t``."""
    if isinstance(e, Expr):
        return e
    if not e.laurent:
        raise NonLaurentIntegrand("t-dependence does not reduce to a Laurent polynomial")
    out = e.space.zero()
    for w in sorted(e.terms):
        if w <= -1:
            raise DivergentHomotopy(f"integrand contains t^{w}; the limit at t=0 diverges")
        out = out + e.terms[w].scale(1 / (w + 1))
    return out
