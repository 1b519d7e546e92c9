"""Enumeration and certification of natural pure-distortion forms.

The distortion is split into its antisymmetric part ``T`` and symmetric
part ``Q`` (both of type (1,2)).  Algebraic invariant ``k``-forms are
enumerated as contraction patterns, instantiated exactly, and certified
independent by evaluation rank over a prime field.  First-order 4-forms are
built from the lower-rank bases with ``d_H`` and wedge products.
"""

from __future__ import annotations

import itertools
import random
import threading
from dataclasses import dataclass, field
from fractions import Fraction

import flint
import numpy as np

from .._parallel import pmap
from ..errors import RankUnstable, UsageError
from ..forms import HorizontalForm, d_H, wedge
from ..jet import Expr, FieldSpec, JetSpace, JetVariable
from ..varcalc import SourceForm, euler_lagrange_fields, is_trivial
from . import named as _named
from .patterns import ContractionPattern, evaluate_numeric, instantiate, pattern_classes

PRIME = 2**61 - 1
SAMPLE_BOUND = 10**6
MAX_ATTEMPTS = 5


# ---------------------------------------------------------------------------
# degree bound


@dataclass(frozen=True, order=True)
class DegreeProfile:
    d0: int
    d1: int
    d2: int = 0
    d3: int = 0

    def __post_init__(self):
        if min(self.d0, self.d1, self.d2, self.d3) < 0:
            raise UsageError("degrees must be nonnegative")
        if self.d0 + 2 * self.d1 + 3 * self.d2 + 4 * self.d3 != 4:
            raise UsageError(f"profile {self.as_tuple()} violates d0 + 2 d1 + 3 d2 + 4 d3 = 4")

    def as_tuple(self):
        return (self.d0, self.d1, self.d2, self.d3)


def admissible_profiles():
    """``(full, filtered)``: every solution of the degree equation, and the
    ``(d0, d1)`` pairs left once second and higher derivatives are excluded."""
    full = set()
    for d3 in range(2):
        for d2 in range(2):
            for d1 in range(3):
                d0 = 4 - 2 * d1 - 3 * d2 - 4 * d3
                if d0 >= 0:
                    full.add(DegreeProfile(d0, d1, d2, d3))
    filtered = {(p.d0, p.d1) for p in full if p.d2 == 0 and p.d3 == 0}
    return full, filtered


# ---------------------------------------------------------------------------
# the T/Q jet space


_spaces: dict = {}
_spaces_lock = threading.Lock()


def distortion_space(dim: int = 4) -> JetSpace:
    """Shared jet space of the fields ``T`` (antisymmetric) and ``Q``."""
    with _spaces_lock:
        if dim not in _spaces:
            T = FieldSpec.tensor12("T", dim, "antisym")
            Q = FieldSpec.tensor12("Q", dim, "sym")
            _spaces[dim] = JetSpace([T, Q], max_order=0)
        return _spaces[dim]


_form_cache: dict = {}


def pattern_form(p: ContractionPattern, space: JetSpace | None = None) -> HorizontalForm:
    space = space or distortion_space()
    key = (id(space), p.key())
    f = _form_cache.get(key)
    if f is None:
        f = instantiate(p, space)
        _form_cache[key] = f
    return f


# ---------------------------------------------------------------------------
# rank certificates


@dataclass
class RankCertificate:
    rank: int
    members: int
    prime: int
    n_samples: int
    seeds: tuple
    attempts: int

    def as_dict(self):
        return {
            "rank": self.rank, "members": self.members, "prime": self.prime,
            "n_samples": self.n_samples, "seeds": list(self.seeds), "attempts": self.attempts,
        }


def _components(item) -> list:
    if isinstance(item, HorizontalForm):
        return [item[I] for I in item.index_tuples()]
    if isinstance(item, SourceForm):
        return [item.coeffs[k] for k in sorted(item.coeffs, key=lambda k: (k[0], k[1]))]
    if isinstance(item, Expr):
        return [item]
    return list(item)


def _space_of(items):
    for it in items:
        for e in it:
            return e.space
    raise UsageError("no forms given")


def _value_mod(e: Expr, vec, p: int) -> int:
    A, B, _ = e.parts()
    if not B.is_zero():
        raise UsageError("rank certificates need radical-free expressions")
    v = A(*vec) if not A.is_zero() else flint.fmpq(0)
    if e._D:
        den = e.den_poly()(*vec)
        v = v / den
    return int(v.p) * pow(int(v.q), -1, p) % p


def _sample_vectors(space, n, tag, bound=SAMPLE_BOUND):
    rng = random.Random(tag)
    nk = len(space.keys())
    return [[flint.fmpq(rng.randint(-bound, bound)) for _ in range(nk)] for _ in range(n)]


def _value_rows(comps, space, n, tag, p):
    vecs = _sample_vectors(space, n, tag)

    def row(cs):
        return [_value_mod(e, v, p) for v in vecs for e in cs]

    return pmap(row, comps)


def _rank_mod(rows, p) -> int:
    rows = [r for r in rows]
    if not rows or not rows[0]:
        return 0
    M = flint.nmod_mat(len(rows), len(rows[0]), [x for r in rows for x in r], p)
    return M.rank()


def independence_rank(forms, seed: int = 0, n_samples: int | None = None, prime: int = PRIME,
                      attempts: int = MAX_ATTEMPTS) -> RankCertificate:
    """Exact rank of a list of forms (or source forms, or expressions) as
    polynomial maps, from evaluations at random integer points mod ``prime``.

    Two independent sample batches must agree; otherwise both are redrawn.
    """
    comps = [_components(f) for f in forms]
    if not comps:
        return RankCertificate(0, 0, prime, 0, (), 0)
    space = _space_of(comps)
    for e in (e for cs in comps for e in cs):
        e.parts()
    width = max(len(cs) for cs in comps)
    if any(len(cs) != width for cs in comps):
        raise UsageError("forms in one rank computation must have the same shape")
    n = n_samples or max(2 * len(comps), 4)
    for a in range(attempts):
        tags = (f"{seed}:{a}:0", f"{seed}:{a}:1")
        r0 = _rank_mod(_value_rows(comps, space, n, tags[0], prime), prime)
        r1 = _rank_mod(_value_rows(comps, space, n, tags[1], prime), prime)
        if r0 == r1:
            return RankCertificate(r0, len(comps), prime, n, tags, a + 1)
    raise RankUnstable(f"rank estimates did not stabilize after {attempts} attempts")


def _greedy_independent(rows, p):
    """Indices of a maximal independent prefix-greedy subset of ``rows``."""
    chosen = []
    rank = 0
    for i, r in enumerate(rows):
        trial = [rows[j] for j in chosen] + [r]
        if _rank_mod(trial, p) > rank:
            chosen.append(i)
            rank += 1
    return chosen


# ---------------------------------------------------------------------------
# naming


def _named_index(k: int, space) -> dict:
    out = {}
    entries = dict(_named.named_forms(k))
    if k == 4:
        entries.update(_named.STRUCTURAL_ZEROS)
    for name, entry in entries.items():
        sign, can = _named.resolve(entry).canonical()
        out.setdefault(can.key(), (sign, name))
    return out


# ---------------------------------------------------------------------------
# algebraic forms


@dataclass
class BasisMember:
    name: str
    pattern: ContractionPattern
    form: HorizontalForm
    decomposable: bool


@dataclass
class InvariantBasis:
    rank: int
    members: list
    independence_certificate: RankCertificate
    pattern_classes: int
    vanishing_classes: int
    dependent: list = field(default_factory=list)
    kinds: tuple = ("T", "Q")

    @property
    def count(self) -> int:
        return len(self.members)

    def names(self):
        return [m.name for m in self.members]

    def decomposable_count(self) -> int:
        return sum(1 for m in self.members if m.decomposable)


def enumerate_algebraic(k: int, seed: int = 0, kinds=("T", "Q"), space=None) -> InvariantBasis:
    if k not in (1, 2, 3, 4):
        raise UsageError("rank must be 1, 2, 3 or 4")
    space = space or distortion_space()
    if space.dim != 4:
        raise UsageError("the catalogue is built over a 4-dimensional base")
    classes = pattern_classes(k, tuple(kinds))
    nonzero = [c for c in classes if not c.zero]
    # wedge products first, so that the indecomposable members are the
    # ones that add something new
    nonzero.sort(key=lambda c: (c.pattern.is_indecomposable(), c.pattern.key()))
    forms = pmap(lambda c: pattern_form(c.pattern, space), nonzero)
    names = _named_index(k, space)
    comps = [_components(f) for f in forms]
    for cs in comps:
        for e in cs:
            e.parts()
    n = max(2 * len(comps), 4)
    rows = _value_rows(comps, space, n, f"{seed}:greedy", PRIME)
    chosen = set(_greedy_independent(rows, PRIME))
    members, dependent = [], []
    for i, (c, f) in enumerate(zip(nonzero, forms)):
        p = c.pattern
        name = names.get(p.key(), (1, p.label()))[1]
        m = BasisMember(name, p, f, not p.is_indecomposable())
        (members if i in chosen else dependent).append(m)
    cert = independence_rank([m.form for m in members], seed=seed)
    return InvariantBasis(k, members, cert, len(classes), len(classes) - len(nonzero), dependent,
                          tuple(kinds))


def named_basis(k: int, space=None):
    """The named forms of rank ``k`` as ``(name, pattern, form)`` triples."""
    space = space or distortion_space()
    out = []
    for name, entry in _named.named_forms(k).items():
        p = _named.resolve(entry)
        out.append((name, p, pattern_form(p, space)))
    return out


def structural_zeros(space=None) -> dict:
    space = space or distortion_space()
    return {n: pattern_form(p, space) for n, p in _named.STRUCTURAL_ZEROS.items()}


def proportionality_check(space=None, seed: int = 0):
    """``(name_a, name_b, ratio)`` when the two forms are proportional."""
    space = space or distortion_space()
    na, pa, nb = _named.PROPORTIONAL
    fa = pattern_form(pa, space)
    fb = pattern_form(_named.LAMBDA_CYCLE[nb], space)
    I = tuple(range(4))
    a, b = fa[I], fb[I]
    if b.is_zero():
        return na, nb, None
    ratio = a / b
    c = ratio.constant_value()
    return na, nb, c


# ---------------------------------------------------------------------------
# first-order forms


@dataclass
class FirstOrderTerm:
    name: str
    family: str
    profile: tuple
    form: HorizontalForm
    trivial: bool = False
    independent: bool = False
    el_class: int | None = None


@dataclass
class FirstOrderCatalogue:
    terms: list
    term_certificate: RankCertificate
    el_certificate: RankCertificate
    kinds: tuple = ("T", "Q")

    @property
    def independent_terms(self):
        return [t for t in self.terms if t.independent]

    @property
    def count(self) -> int:
        return len(self.independent_terms)

    @property
    def el_classes(self) -> int:
        return self.el_certificate.rank

    def family_counts(self) -> dict:
        out: dict = {}
        for t in self.independent_terms:
            out[t.family] = out.get(t.family, 0) + 1
        return out


def _first_order_candidates(kinds, seed, space):
    b1 = enumerate_algebraic(1, seed, kinds, space)
    b2 = enumerate_algebraic(2, seed, kinds, space)
    b3 = enumerate_algebraic(3, seed, kinds, space)
    out = []
    alphas = b1.members
    dal = {m.name: d_H(m.form) for m in alphas}
    for a, b in itertools.combinations_with_replacement(alphas, 2):
        out.append((f"dH({a.name})^dH({b.name})", "quadratic", (0, 2),
                    lambda a=a, b=b: wedge(dal[a.name], dal[b.name])))
    for r in b2.members:
        for a in alphas:
            out.append((f"dH({a.name})^{r.name}", "alpha-beta", (2, 1),
                        lambda a=a, r=r: wedge(dal[a.name], r.form)))
    for r in b2.members:
        for a in alphas:
            out.append((f"{a.name}^dH({r.name})", "alpha-beta", (2, 1),
                        lambda a=a, r=r: wedge(a.form, d_H(r.form))))
    gammas = sorted(b3.members, key=lambda m: m.decomposable)
    for g in gammas:
        out.append((f"dH({g.name})", "dH-gamma", (2, 1), lambda g=g: d_H(g.form)))
    return out


def enumerate_first_order(seed: int = 0, kinds=("T", "Q"), space=None) -> FirstOrderCatalogue:
    space = space or distortion_space()
    for f in space.fields.values():
        space.ensure_order(f, 2)
    cands = _first_order_candidates(tuple(kinds), seed, space)
    forms = pmap(lambda c: c[3](), cands)
    terms = [FirstOrderTerm(n, fam, prof, f) for (n, fam, prof, _), f in zip(cands, forms)]
    fields = [space.field("T"), space.field("Q")]
    top = tuple(range(space.dim))

    els = pmap(lambda t: euler_lagrange_fields(t.form[top], fields), terms)
    for t, e in zip(terms, els):
        t.trivial = e.is_zero()

    comps = [_components(t.form) for t in terms]
    n = max(2 * len(comps), 4)
    rows = _value_rows(comps, space, n, f"{seed}:terms", PRIME)
    for i in _greedy_independent(rows, PRIME):
        terms[i].independent = True
    term_cert = independence_rank([t.form for t in terms if t.independent], seed=seed)

    # EL classes: terms are EL-equivalent when their EL images agree
    el_comps = [_components(e) for e in els]
    el_rows = _value_rows(el_comps, space, n, f"{seed}:el", PRIME)
    reps = _greedy_independent(el_rows, PRIME)
    for c, i in enumerate(reps):
        terms[i].el_class = c
    el_cert = independence_rank([els[i] for i in reps], seed=seed)
    return FirstOrderCatalogue(terms, term_cert, el_cert, tuple(kinds))


def is_trivial_form(form: HorizontalForm) -> bool:
    space = form.space
    top = tuple(range(space.dim))
    return is_trivial(form[top], fields=list(space.fields))


# ---------------------------------------------------------------------------
# sectors


@dataclass
class SectorCounts:
    kinds: tuple
    algebraic: int
    nontrivial_first_order: int
    algebraic_names: list


def _sector(kinds, seed):
    alg = enumerate_algebraic(4, seed, kinds)
    fo = enumerate_first_order(seed, kinds)
    return SectorCounts(tuple(kinds), alg.count, fo.el_classes, alg.names())


def q_only_sector(seed: int = 0) -> SectorCounts:
    """Counts with ``T`` set to zero: only patterns built from ``Q`` survive."""
    return _sector(("Q",), seed)


def t_only_sector(seed: int = 0) -> SectorCounts:
    return _sector(("T",), seed)


# ---------------------------------------------------------------------------
# coordinate equivariance


def _rand_frac(rng, lo=-4, hi=4):
    return Fraction(rng.randint(lo, hi), rng.randint(1, 3))


def random_invertible(rng, dim=4) -> np.ndarray:
    while True:
        A = np.empty((dim, dim), dtype=object)
        for i in range(dim):
            for j in range(dim):
                A[i, j] = Fraction(rng.randint(-3, 3))
        if _det(A) != 0:
            return A


def _det(A) -> Fraction:
    M = flint.fmpq_mat(A.shape[0], A.shape[1], [flint.fmpq(x.numerator, x.denominator) for x in A.flat])
    d = M.det()
    return Fraction(int(d.p), int(d.q))


def _inv(A) -> np.ndarray:
    M = flint.fmpq_mat(A.shape[0], A.shape[1], [flint.fmpq(x.numerator, x.denominator) for x in A.flat]).inv()
    out = np.empty(A.shape, dtype=object)
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            v = M[i, j]
            out[i, j] = Fraction(int(v.p), int(v.q))
    return out


def _random_tensor(rng, dim, kind, nderiv):
    X = np.empty((dim,) * (3 + nderiv), dtype=object)
    X[...] = Fraction(0)
    for a in range(dim):
        for b in range(dim):
            for c in range(b, dim):
                for d in itertools.product(range(dim), repeat=nderiv):
                    if d != tuple(sorted(d)):
                        continue
                    v = Fraction(0) if (kind == "T" and b == c) else _rand_frac(rng)
                    for dd in set(itertools.permutations(d)):
                        X[(a, b, c) + dd] = v
                        X[(a, c, b) + dd] = -v if kind == "T" else v
    return X


def _point(space, tensors):
    point = {}
    for key in space.keys():
        if not isinstance(key, JetVariable) or key.field.name not in tensors:
            continue
        arrs = tensors[key.field.name]
        if key.order >= len(arrs):
            point[key] = Fraction(0)
            continue
        point[key] = arrs[key.order][tuple(key.component) + tuple(key.deriv)]
    return point


def _minor(M, rows, cols) -> Fraction:
    sub = np.empty((len(rows), len(cols)), dtype=object)
    for i, r in enumerate(rows):
        for j, c in enumerate(cols):
            sub[i, j] = M[r, c]
    return _det(sub) if len(rows) else Fraction(1)


def transform_coefficients(form: HorizontalForm, values: dict, Ainv) -> dict:
    """Coefficients ``rho'_I = sum_J rho_J det(Ainv[J, I])`` of the pulled
    back form for ``x' = A x``."""
    k = form.degree
    combos = list(itertools.combinations(range(form.dim), k))
    return {I: sum((values[J] * _minor(Ainv, J, I) for J in combos), Fraction(0)) for I in combos}


def _form_values(form: HorizontalForm, point) -> dict:
    return {I: form[I].value(point) for I in form.index_tuples()}


def equivariance_check(p, trials: int = 10, seed: int = 0, matrices=None) -> bool:
    """Exact check that the form of ``p`` (a pattern or an instantiated form)
    transforms as a ``k``-form when ``T`` and ``Q`` (and their first
    derivatives, under affine changes) transform as tensors."""
    space = distortion_space()
    form = p if isinstance(p, HorizontalForm) else pattern_form(p, space)
    first_order = any(v.order > 0 for I in form.coeffs for v in form.coeffs[I].jet_variables())
    rng = random.Random(f"equivariance:{seed}")
    mats = list(matrices) if matrices is not None else [random_invertible(rng) for _ in range(trials)]
    for A in mats:
        A = np.asarray(A, dtype=object)
        A = np.vectorize(Fraction, otypes=[object])(A)
        Ainv = _inv(A)
        tensors, moved = {}, {}
        for name in ("T", "Q"):
            X0 = _random_tensor(rng, 4, name, 0)
            arrs = [X0]
            new = [np.einsum("ad,def,eb,fc->abc", A, X0, Ainv, Ainv)]
            if first_order:
                X1 = _random_tensor(rng, 4, name, 1)
                arrs.append(X1)
                new.append(np.einsum("ad,defn,eb,fc,nm->abcm", A, X1, Ainv, Ainv, Ainv))
            tensors[name], moved[name] = arrs, new
        before = _form_values(form, _point(space, tensors))
        after = _form_values(form, _point(space, moved))
        if after != transform_coefficients(form, before, Ainv):
            return False
    return True


def density_factor(p, A) -> Fraction | None:
    """``rho'(x') / rho(x)`` for a top-degree form at one random point;
    equals ``det(A)^-1`` for a natural density."""
    space = distortion_space()
    form = p if isinstance(p, HorizontalForm) else pattern_form(p, space)
    A = np.vectorize(Fraction, otypes=[object])(np.asarray(A, dtype=object))
    Ainv = _inv(A)
    rng = random.Random("density-factor")
    top = tuple(range(4))
    for _ in range(20):
        tensors = {n: [_random_tensor(rng, 4, n, 0)] for n in ("T", "Q")}
        moved = {n: [np.einsum("ad,def,eb,fc->abc", A, tensors[n][0], Ainv, Ainv)] for n in ("T", "Q")}
        v0 = form[top].value(_point(space, tensors))
        if v0 != 0:
            return form[top].value(_point(space, moved)) / v0
    return None


# ---------------------------------------------------------------------------
# diagnostics


def generic_rank(k: int, dim: int, seed: int = 0, kinds=("T", "Q")) -> int:
    """Rank of the nonvanishing pattern classes evaluated in dimension
    ``dim`` (numeric route).  For ``dim >= 2k`` no dimension-dependent
    identities can occur."""
    classes = [c for c in pattern_classes(k, tuple(kinds)) if not c.zero]
    n = max(2 * len(classes), 4)
    rng = np.random.default_rng(seed)
    p = (1 << 31) - 1
    T = rng.integers(-1000, 1000, size=(n, dim, dim, dim)).astype(object)
    T = T - T.transpose(0, 1, 3, 2)
    Q = rng.integers(-1000, 1000, size=(n, dim, dim, dim)).astype(object)
    Q = Q + Q.transpose(0, 1, 3, 2)
    rows = []
    for c in classes:
        vals = evaluate_numeric(c.pattern, T, Q)
        rows.append([int(x) % p for x in vals.flat])
    return _rank_mod(rows, p)
