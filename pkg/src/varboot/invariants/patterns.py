"""Contraction patterns for polynomial invariant forms in T and Q.

A pattern with ``k`` factors describes the ``k``-form

    X1^{u1}_{s1 s2} X2^{u2}_{s3 s4} ... dx^{t1} ^ ... ^ dx^{tk}

where each ``Xi`` is ``T`` (antisymmetric in its lower pair) or ``Q``
(symmetric), every upper index ``ui`` is contracted with exactly one lower
slot and the remaining ``k`` lower slots carry the wedge indices.  A lower
slot label is ``('u', j)`` (contracted with the upper index of factor ``j``)
or ``('t', j)`` (bound to ``dx^{tj}``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import UsageError
from ..forms import HorizontalForm
from ..jet import Expr, _perm_sign


@dataclass(frozen=True)
class ContractionPattern:
    kinds: tuple
    slots: tuple
    derivative_marks: tuple = ()

    def __post_init__(self):
        k = len(self.kinds)
        if len(self.slots) != 2 * k:
            raise UsageError("each factor has two lower slots")
        if any(x not in ("T", "Q") for x in self.kinds):
            raise UsageError("factor kinds are T or Q")
        ups = sorted(j for t, j in self.slots if t == "u")
        taus = sorted(j for t, j in self.slots if t == "t")
        if ups != list(range(k)):
            raise UsageError("every upper index must be contracted exactly once")
        if taus != list(range(len(taus))):
            raise UsageError("wedge slots must be labelled 0..k-1 without repeats")

    @property
    def n_factors(self) -> int:
        return len(self.kinds)

    @property
    def degree(self) -> int:
        return sum(1 for t, _ in self.slots if t == "t")

    def key(self):
        return (self.kinds, self.slots)

    # structure ----------------------------------------------------------
    def components(self) -> list[tuple[int, ...]]:
        """Connected components of the contraction graph (factor indices)."""
        k = self.n_factors
        parent = list(range(k))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(k):
            for s in (2 * i, 2 * i + 1):
                t, j = self.slots[s]
                if t == "u":
                    parent[find(i)] = find(j)
        groups: dict = {}
        for i in range(k):
            groups.setdefault(find(i), []).append(i)
        return sorted(tuple(g) for g in groups.values())

    def is_indecomposable(self) -> bool:
        return len(self.components()) == 1

    def factor_dots(self) -> str:
        out = []
        for i, kind in enumerate(self.kinds):
            n = sum(1 for s in (2 * i, 2 * i + 1) if self.slots[s][0] == "t")
            out.append(kind + "." * n)
        return "".join(out)

    def label(self) -> str:
        """Dot name plus wiring, e.g. ``T.T.T.Q.[1,2,3,0]``."""
        wiring = []
        for i in range(self.n_factors):
            for s in (2 * i, 2 * i + 1):
                t, j = self.slots[s]
                wiring.append(f"u{j}" if t == "u" else f"t{j}")
        return self.factor_dots() + "[" + ",".join(wiring) + "]"

    def __str__(self):
        return self.label()

    # transformations --------------------------------------------------
    def transformed(self, perm, swaps) -> tuple[int, ContractionPattern]:
        """Reorder factors (new position ``i`` holds old factor ``perm[i]``),
        swap the lower slots of factors flagged in ``swaps`` (old indexing),
        then relabel wedge indices by first appearance.  Returns the sign
        relating the new pattern's form to this one's."""
        k = self.n_factors
        pos = {old: new for new, old in enumerate(perm)}
        sign = 1
        slots = []
        kinds = []
        for new, old in enumerate(perm):
            kinds.append(self.kinds[old])
            a, b = self.slots[2 * old], self.slots[2 * old + 1]
            if swaps[old]:
                a, b = b, a
                if self.kinds[old] == "T":
                    sign = -sign
            for t, j in (a, b):
                slots.append((t, pos[j]) if t == "u" else (t, j))
        order = [j for t, j in slots if t == "t"]
        relabel = {old: new for new, old in enumerate(order)}
        sign *= _perm_sign([relabel[j] for j in range(len(order))])
        slots = [(t, relabel[j]) if t == "t" else (t, j) for t, j in slots]
        return sign, ContractionPattern(tuple(kinds), tuple(slots), self.derivative_marks)

    def orbit(self):
        k = self.n_factors
        for perm in itertools.permutations(range(k)):
            for swaps in itertools.product((0, 1), repeat=k):
                yield self.transformed(perm, swaps)

    def canonical(self) -> tuple[int, ContractionPattern]:
        """``(sign, canonical pattern)`` with sign 0 when the form vanishes
        identically because the pattern equals minus itself."""
        best = None
        signs = {}
        for sign, p in self.orbit():
            k = p.key()
            if k in signs and signs[k] != sign:
                return 0, min((q for _, q in self.orbit()), key=lambda q: q.key())
            signs[k] = sign
            if best is None or k < best.key():
                best = p
        # sign converting our form into the canonical one
        return signs[best.key()], best

    def wedge(self, other: ContractionPattern) -> ContractionPattern:
        k = self.n_factors
        d = self.degree
        slots = list(self.slots)
        for t, j in other.slots:
            slots.append((t, j + k) if t == "u" else (t, j + d))
        return ContractionPattern(self.kinds + other.kinds, tuple(slots))

    def with_kinds(self, kinds) -> ContractionPattern:
        return ContractionPattern(tuple(kinds), self.slots, self.derivative_marks)


def from_indices(factors) -> ContractionPattern:
    """Build a pattern from index strings, e.g.
    ``[('T', 'm1', 'm1', 't1')]`` for ``T^{m1}_{m1 t1} dx^{t1}``.
    Labels starting with ``t`` are wedge indices (``t1`` is the first
    differential); all others are contracted."""
    ups = {}
    for i, (kind, up, _, _) in enumerate(factors):
        if up in ups:
            raise UsageError(f"upper index {up} used twice")
        ups[up] = i
    slots = []
    for kind, up, a, b in factors:
        for lab in (a, b):
            if lab.startswith("t"):
                slots.append(("t", int(lab[1:]) - 1))
            elif lab in ups:
                slots.append(("u", ups[lab]))
            else:
                raise UsageError(f"index {lab} is not contracted with an upper index")
    return ContractionPattern(tuple(k for k, *_ in factors), tuple(slots))


def raw_patterns(k: int, kinds_allowed=("T", "Q")):
    """All patterns with ``k`` factors, wedge slots labelled in slot order."""
    for kinds in itertools.product(kinds_allowed, repeat=k):
        for tau_slots in itertools.combinations(range(2 * k), k):
            rest = [x for x in range(2 * k) if x not in tau_slots]
            for wiring in itertools.permutations(range(k)):
                lab = {}
                for j, x in enumerate(tau_slots):
                    lab[x] = ("t", j)
                for j, x in enumerate(rest):
                    lab[x] = ("u", wiring[j])
                yield ContractionPattern(kinds, tuple(lab[x] for x in range(2 * k)))


@dataclass(frozen=True)
class PatternClass:
    pattern: ContractionPattern
    zero: bool
    orbit_size: int


def pattern_classes(k: int, kinds_allowed=("T", "Q")) -> list[PatternClass]:
    """Orbits of raw patterns under the canonicalizing symmetries, sorted by
    canonical key.  Vanishing classes are kept and flagged."""
    seen = set()
    out = []
    for p in raw_patterns(k, kinds_allowed):
        if p.key() in seen:
            continue
        signs = {}
        zero = False
        for sign, q in p.orbit():
            kq = q.key()
            if kq in signs and signs[kq] != sign:
                zero = True
            signs[kq] = sign
        seen.update(signs)
        best = min(signs)
        out.append(PatternClass(ContractionPattern(*best), zero, len(signs)))
    out.sort(key=lambda c: c.pattern.key())
    return out


# ---------------------------------------------------------------------------
# instantiation


def _perm_list(k):
    return [(p, _perm_sign(p)) for p in itertools.permutations(range(k))]


def instantiate(p: ContractionPattern, space, T_field="T", Q_field="Q") -> HorizontalForm:
    """The pattern's ``k``-form with polynomial coefficients in the jet
    coordinates of the T and Q fields (exact)."""
    fields = {"T": space.field(T_field), "Q": space.field(Q_field)}
    m = space.dim
    k = p.n_factors
    d = p.degree
    if d > m:
        return HorizontalForm(space, d)
    nv = len(space.keys())
    gen_index = {}

    def comp_gen(kind, a, b, c):
        key = (kind, a, b, c)
        if key not in gen_index:
            sign, v = space.jetvar(fields[kind], (a, b, c))
            gen_index[key] = (sign, space.index(v) if sign else None)
        return gen_index[key]

    perms = _perm_list(d)
    coeffs = {}
    for I in itertools.combinations(range(m), d):
        acc: dict = {}
        for up in itertools.product(range(m), repeat=k):
            for perm, psign in perms:
                tau = [I[perm[j]] for j in range(d)]
                sign = psign
                mon = []
                for i in range(k):
                    vals = []
                    for s in (2 * i, 2 * i + 1):
                        t, j = p.slots[s]
                        vals.append(up[j] if t == "u" else tau[j])
                    sg, gi = comp_gen(p.kinds[i], up[i], vals[0], vals[1])
                    if sg == 0:
                        sign = 0
                        break
                    sign *= sg
                    mon.append(gi)
                if sign == 0:
                    continue
                mon = tuple(sorted(mon))
                acc[mon] = acc.get(mon, 0) + sign
        terms = {}
        for mon, c in acc.items():
            if c == 0:
                continue
            e = [0] * nv
            for gi in mon:
                e[gi] += 1
            terms[tuple(e)] = c
        if terms:
            poly = space.ctx.from_dict(terms)
            coeffs[I] = Expr(space, poly, space.zero_poly(), ())
    return HorizontalForm(space, d, coeffs)


# ---------------------------------------------------------------------------
# numeric evaluation (independent route via einsum)

_LETTERS = "abcdefghijklmnopqrsuvwxy"


def antisymmetrizer(k: int, m: int, dtype=object):
    """Array ``A[t1..tk, c]`` with the permutation sign when ``(t1..tk)``
    is a permutation of the ``c``-th increasing tuple."""
    combos = list(itertools.combinations(range(m), k))
    A = np.zeros((m,) * k + (len(combos),), dtype=dtype)
    if dtype is object:
        A[...] = 0
    for ci, c in enumerate(combos):
        for perm, sign in _perm_list(k):
            A[tuple(c[perm[i]] for i in range(k)) + (ci,)] = sign
    return A


def evaluate_numeric(p: ContractionPattern, T, Q, A=None):
    """Evaluate the pattern on batches ``T[z,a,b,c]``, ``Q[z,a,b,c]``;
    returns ``[z, c]`` coefficients over increasing wedge tuples."""
    k = p.n_factors
    d = p.degree
    m = T.shape[1]
    if A is None:
        A = antisymmetrizer(d, m, T.dtype)
    ups = _LETTERS[:k]
    taus = _LETTERS[k:k + d]
    subs = []
    ops = []
    for i in range(k):
        labs = []
        for s in (2 * i, 2 * i + 1):
            t, j = p.slots[s]
            labs.append(ups[j] if t == "u" else taus[j])
        subs.append("z" + ups[i] + "".join(labs))
        ops.append(T if p.kinds[i] == "T" else Q)
    subs.append(taus + "Z")
    ops.append(A)
    return np.einsum(",".join(subs) + "->zZ", *ops, optimize="greedy")
