"""Formal Levi-Civita geometry over jet coordinates of a metric.

Curvature convention (used everywhere in the package)::

    R^a_{bcd} = d_c G^a_{bd} - d_d G^a_{bc} + G^a_{ce} G^e_{bd} - G^a_{de} G^e_{bc}
    R_{bd}    = R^a_{bad}

With this choice the homotopy Lagrangian of ``R^{ab} sqrt|det g|`` is
``+R sqrt|det g|``.

Component tables are plain dicts keyed by full index tuples.
"""

from __future__ import annotations

import itertools
import threading
from fractions import Fraction

from .errors import UsageError
from .jet import Expr, FieldSpec, JetSpace, expr_sum, total_derivative

CURVATURE_CONVENTION = (
    "R^a_{bcd} = d_c Gamma^a_{bd} - d_d Gamma^a_{bc} + Gamma^a_{ce} Gamma^e_{bd}"
    " - Gamma^a_{de} Gamma^e_{bc}; Ricci R_{bd} = R^a_{bad}"
)


def _pairs(m):
    return [(a, b) for a in range(m) for b in range(m)]


class MetricModel:
    """Lazily built derived tensors of a metric field.

    Each cache is filled once under a lock; afterwards it is only read.
    """

    def __init__(self, space: JetSpace, g: FieldSpec | str | None = None):
        if g is None:
            g = space.metric
        if isinstance(g, str):
            g = space.field(g)
        if g is None or g.kind != "metric":
            raise UsageError("MetricModel needs a metric field")
        if g is not space.metric:
            raise UsageError("only the first metric of a space carries sqrt|det g|")
        self.space = space
        self.g = g
        self.dim = g.dim
        self._lock = threading.RLock()
        self._cache: dict = {}
        # curvature needs second jets; creating them up front keeps raw
        # polynomial arithmetic below inside a single context
        space.ensure_order(g, 2)

    def _cached(self, name, build):
        hit = self._cache.get(name)
        if hit is not None:
            return hit
        with self._lock:
            if name not in self._cache:
                self._cache[name] = build()
            return self._cache[name]

    # basic pieces ---------------------------------------------------------
    def metric(self, a, b) -> Expr:
        return self.space.var(self.g, (a, b))

    def dmetric(self, a, b, *d) -> Expr:
        return self.space.var(self.g, (a, b), d)

    def det(self) -> Expr:
        return self.space.det()

    def sqrtdet(self) -> Expr:
        return self.space.sqrtdet()

    def inverse(self) -> dict:
        """``g^{ab} = adj(g)^{ab} / det g``."""

        def build():
            sp = self.space
            dk = sp.det_key()
            out = {}
            for a in range(self.dim):
                for b in range(a, self.dim):
                    e = Expr(sp, sp.adjugate_poly(a, b), sp.zero_poly(), {dk: 1})
                    out[(a, b)] = out[(b, a)] = e
            return out

        return self._cached("inverse", build)

    def christoffel(self) -> dict:
        """``Gamma^a_{bc} = 1/2 g^{ad} (g_{db,c} + g_{dc,b} - g_{bc,d})``."""

        def build():
            sp = self.space
            m = self.dim
            dk = sp.det_key()
            half = Fraction(1, 2)
            out = {}
            for a in range(m):
                for b in range(m):
                    for c in range(b, m):
                        num = sp.zero_poly()
                        for d in range(m):
                            lower = (self.dmetric(d, b, c) + self.dmetric(d, c, b)
                                     - self.dmetric(b, c, d))
                            num += sp.adjugate_poly(a, d) * lower.parts()[0]
                        e = Expr(sp, num, sp.zero_poly(), {dk: 1}).scale(half)
                        out[(a, b, c)] = out[(a, c, b)] = e
            return out

        return self._cached("christoffel", build)

    def _dchristoffel(self) -> dict:
        def build():
            gam = self.christoffel()
            m = self.dim
            out = {}
            for (a, b, c), e in gam.items():
                if b > c:
                    continue
                for d in range(m):
                    out[(a, b, c, d)] = out[(a, c, b, d)] = total_derivative(e, d)
            return out

        return self._cached("dchristoffel", build)

    def riemann(self) -> dict:
        """``R^a_{bcd}`` for all index tuples (antisymmetric in c, d)."""

        def build():
            gam = self.christoffel()
            dg = self._dchristoffel()
            m = self.dim
            out = {}
            for a, b in _pairs(m):
                for c in range(m):
                    for d in range(c + 1, m):
                        terms = [dg[(a, b, d, c)], -dg[(a, b, c, d)]]
                        for e in range(m):
                            terms.append(gam[(a, c, e)] * gam[(e, b, d)])
                            terms.append(-(gam[(a, d, e)] * gam[(e, b, c)]))
                        r = expr_sum(terms, self.space)
                        out[(a, b, c, d)] = r
                        out[(a, b, d, c)] = -r
                    out[(a, b, c, c)] = self.space.zero()
            return out

        return self._cached("riemann", build)

    def ricci(self) -> dict:
        """``R_{bd} = R^a_{bad}``, built directly from the Christoffels."""

        def build():
            gam = self.christoffel()
            dg = self._dchristoffel()
            m = self.dim
            out = {}
            for b in range(m):
                for d in range(b, m):
                    terms = []
                    for a in range(m):
                        terms.append(dg[(a, b, d, a)])
                        terms.append(-dg[(a, b, a, d)])
                        for e in range(m):
                            terms.append(gam[(a, a, e)] * gam[(e, b, d)])
                            terms.append(-(gam[(a, d, e)] * gam[(e, b, a)]))
                    r = expr_sum(terms, self.space)
                    out[(b, d)] = out[(d, b)] = r
            return out

        return self._cached("ricci", build)

    def scalar(self) -> Expr:
        def build():
            gi = self.inverse()
            ric = self.ricci()
            return expr_sum([gi[p] * ric[p] for p in _pairs(self.dim)], self.space)

        return self._cached("scalar", build)

    def raise_both(self, table: dict) -> dict:
        """``X^{ab} = g^{ac} g^{bd} X_{cd}`` for a symmetric table."""
        gi = self.inverse()
        m = self.dim
        out = {}
        for a in range(m):
            half = {}
            for d in range(m):
                half[d] = expr_sum([gi[(a, c)] * table[(c, d)] for c in range(m)], self.space)
            for b in range(a, m):
                out[(a, b)] = out[(b, a)] = expr_sum(
                    [gi[(b, d)] * half[d] for d in range(m)], self.space)
        return out

    def ricci_up(self) -> dict:
        return self._cached("ricci_up", lambda: self.raise_both(self.ricci()))

    def einstein(self) -> dict:
        """``G_{ab} = R_{ab} - 1/2 R g_{ab}``."""

        def build():
            ric = self.ricci()
            R = self.scalar()
            out = {}
            for a in range(self.dim):
                for b in range(a, self.dim):
                    out[(a, b)] = out[(b, a)] = ric[(a, b)] - R * self.metric(a, b) * Fraction(1, 2)
            return out

        return self._cached("einstein", build)

    def einstein_up(self) -> dict:
        """``G^{ab} = R^{ab} - 1/2 R g^{ab}``."""

        def build():
            ru = self.ricci_up()
            gi = self.inverse()
            R = self.scalar()
            out = {}
            for a in range(self.dim):
                for b in range(a, self.dim):
                    out[(a, b)] = out[(b, a)] = ru[(a, b)] - (R * gi[(a, b)]).scale(Fraction(1, 2))
            return out

        return self._cached("einstein_up", build)

    def curvature(self):
        """``(riemann, ricci, scalar, einstein)`` component tables."""
        return self.riemann(), self.ricci(), self.scalar(), self.einstein()

    # derivatives ------------------------------------------------------------
    def covariant_derivative(self, comps: dict, positions: str) -> dict:
        """Levi-Civita covariant derivative of a tensor given as a full table
        ``index tuple -> Expr`` with slot positions like ``'udd'``.  The
        derivative index is appended as the last slot."""
        gam = self.christoffel()
        m = self.dim
        sp = self.space
        out = {}
        for idx in itertools.product(range(m), repeat=len(positions)):
            base = comps.get(idx, sp.zero())
            for mu in range(m):
                terms = [total_derivative(base, mu)]
                for slot, pos in enumerate(positions):
                    for lam in range(m):
                        j = idx[:slot] + (lam,) + idx[slot + 1:]
                        other = comps.get(j)
                        if other is None or other.is_zero():
                            continue
                        if pos == "u":
                            terms.append(gam[(idx[slot], mu, lam)] * other)
                        else:
                            terms.append(-(gam[(lam, mu, idx[slot])] * other))
                out[idx + (mu,)] = expr_sum(terms, sp)
        return out

    def dalembert(self, phi) -> Expr:
        """``g^{ab} (phi_{,ab} - Gamma^c_{ab} phi_{,c})``."""
        sp = self.space
        if isinstance(phi, str):
            phi = sp.field(phi)
        gi = self.inverse()
        gam = self.christoffel()
        m = self.dim
        terms = []
        for a, b in _pairs(m):
            inner = [sp.var(phi, (), (a, b))]
            for c in range(m):
                inner.append(-(gam[(c, a, b)] * sp.var(phi, (), (c,))))
            terms.append(gi[(a, b)] * expr_sum(inner, sp))
        return expr_sum(terms, sp)


class ScalarMatter:
    """A scalar field with potential atom ``V`` (and derivatives ``Vp``, ...)
    and the gravitational coupling constant ``kappa``."""

    def __init__(self, space: JetSpace, phi="phi", potential="V", kappa="kappa"):
        self.space = space
        self.phi = space.field(phi) if isinstance(phi, str) else phi
        if self.phi.kind != "scalar":
            raise UsageError("scalar matter needs a scalar field")
        self.V = space.add_function(potential, self.phi.name) if not space.has_atom(potential) \
            else space.atom_expr(potential)
        self.Vname = potential
        self.kappa = space.add_constant(kappa)

    def Vp(self) -> Expr:
        from .jet import partial_derivative
        _, v = self.space.jetvar(self.phi)
        return partial_derivative(self.V, v)


def stress_tensor(M: MetricModel, S: ScalarMatter) -> dict:
    """``T_{ab} = phi_a phi_b - 1/2 g^{cd} phi_c phi_d g_{ab} - V g_{ab}``."""
    sp = M.space
    m = M.dim
    gi = M.inverse()
    dphi = [sp.var(S.phi, (), (a,)) for a in range(m)]
    kin = expr_sum([gi[(c, d)] * dphi[c] * dphi[d] for c, d in _pairs(m)], sp)
    out = {}
    for a in range(m):
        for b in range(a, m):
            gab = M.metric(a, b)
            out[(a, b)] = out[(b, a)] = (dphi[a] * dphi[b] - (kin * gab).scale(Fraction(1, 2))
                                         - S.V * gab)
    return out


def ekg_metric_equations(M: MetricModel, S: ScalarMatter) -> dict:
    """The symmetric table
    ``E^{ab} = -1/2 (G^{ab}/kappa - phi^a phi^b + 1/2 g^{cd} phi_c phi_d g^{ab}
    + V g^{ab}) sqrt|det g|``."""
    sp = M.space
    m = M.dim
    if m < 2:
        raise UsageError("the scalar-tensor source form needs m >= 2")
    gi = M.inverse()
    G = M.einstein_up()
    s = M.sqrtdet()
    dphi = [sp.var(S.phi, (), (a,)) for a in range(m)]
    up = [expr_sum([gi[(a, c)] * dphi[c] for c in range(m)], sp) for a in range(m)]
    kin = expr_sum([up[c] * dphi[c] for c in range(m)], sp)
    inv_kappa = S.kappa.inverse()
    out = {}
    for a in range(m):
        for b in range(a, m):
            inner = expr_sum([
                G[(a, b)] * inv_kappa,
                -(up[a] * up[b]),
                (kin * gi[(a, b)]).scale(Fraction(1, 2)),
                S.V * gi[(a, b)],
            ], sp)
            out[(a, b)] = out[(b, a)] = (inner * s).scale(Fraction(-1, 2))
    return out


def ekg_source_form(M: MetricModel, S: ScalarMatter):
    """Metric source form of the Einstein-Klein-Gordon system together with
    the scalar stress tensor: returns ``(SourceForm, T_{ab} table)``."""
    from .varcalc import SourceForm

    table = ekg_metric_equations(M, S)
    return SourceForm.from_symmetric(M.space, M.g, table), stress_tensor(M, S)


def ekg_lagrangian(M: MetricModel, S: ScalarMatter) -> Expr:
    """``(R/(2 kappa) - 1/2 g^{ab} phi_a phi_b - V) sqrt|det g|``."""
    sp = M.space
    m = M.dim
    gi = M.inverse()
    kin = expr_sum([gi[(a, b)] * sp.var(S.phi, (), (a,)) * sp.var(S.phi, (), (b,))
                    for a, b in _pairs(m)], sp)
    inner = expr_sum([M.scalar() * S.kappa.inverse().scale(Fraction(1, 2)),
                      kin.scale(Fraction(-1, 2)), -S.V], sp)
    return inner * M.sqrtdet()


# ---------------------------------------------------------------------------
# distortion


class DistortionField:
    """A (1,2) tensor field ``L^a_{bc}`` with its symmetric and antisymmetric
    parts in the two lower slots."""

    def __init__(self, space: JetSpace, L: FieldSpec | str):
        self.space = space
        self.L = space.field(L) if isinstance(L, str) else L
        if self.L.rank != 3 or self.L.positions != ("u", "d", "d"):
            raise UsageError("a distortion field is a (1,2) tensor")

    def component(self, a, b, c) -> Expr:
        return self.space.var(self.L, (a, b, c))


def split_distortion(D: DistortionField):
    """``Q^a_{bc} = (L^a_{bc} + L^a_{cb})/2`` and ``T^a_{bc} = (L^a_{bc} - L^a_{cb})/2``."""
    m = D.L.dim
    Q = {}
    T = {}
    half = Fraction(1, 2)
    for a, b, c in itertools.product(range(m), repeat=3):
        x, y = D.component(a, b, c), D.component(a, c, b)
        Q[(a, b, c)] = (x + y).scale(half)
        T[(a, b, c)] = (x - y).scale(half)
    return Q, T


def christoffel(M: MetricModel) -> dict:
    return M.christoffel()


def curvature(M: MetricModel):
    return M.curvature()


def covariant_derivative(M: MetricModel, comps: dict, positions: str) -> dict:
    return M.covariant_derivative(comps, positions)
