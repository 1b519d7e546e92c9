"""Line-oriented model files.

::

    # comments start with '#'
    dim 4
    field g metric
    field phi scalar
    field T tensor12 antisym
    atom V of phi
    const kappa
    eq Eg[mu,nu] = ...          # paired with field g (name E<field>)
    eq S[mu] for A = ...        # explicit pairing
    lagrangian L = ...
    option max_order 3

Declarations may appear in any order; equations are parsed after all
fields and atoms are known.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

from ..errors import IndexArityError, ParseError, UnboundIdentifier, UsageError
from ..geometry import MetricModel
from ..jet import FieldSpec, JetSpace
from ..varcalc import SourceForm
from .parser import Indexed, parse_expression

_FIELD_KINDS = ("scalar", "covector", "vector", "metric", "tensor12")
_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_EQ = re.compile(rf"^eq\s+({_NAME})\s*(?:\[([^\]]*)\])?\s*(?:for\s+({_NAME}))?\s*=(.*)$")
_LAG = re.compile(rf"^lagrangian\s+({_NAME})\s*=(.*)$")

BUILTINS = ("inv", "sqrtdetg", "detg", "Christoffel", "Riemann", "Ricci", "RicciScalar",
            "Einstein", "Dalembert", "RicciUp", "EinsteinUp")


@dataclass
class EquationDef:
    name: str
    letters: tuple
    field: str
    text: str
    line: int


@dataclass
class ModelSpec:
    dim: int
    fields: list
    atoms: dict = field(default_factory=dict)
    constants: list = field(default_factory=list)
    equations: dict = field(default_factory=dict)
    lagrangians: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    source: str = ""

    def __post_init__(self):
        self.space = JetSpace(self.fields, max_order=int(self.options.get("max_order", 3)))
        for c in self.constants:
            self.space.add_constant(c)
        for name, (arg, weight) in self.atoms.items():
            self.space.add_function(name, arg, weight)
        self._metrics: dict = {}

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.source.encode()).hexdigest()

    # parser hooks -------------------------------------------------------
    def metric_model(self, name) -> MetricModel:
        f = self._field(name, None, "")
        if f.kind != "metric":
            raise UsageError(f"{name!r} is not a metric field")
        if name not in self._metrics:
            self._metrics[name] = MetricModel(self.space, f)
        return self._metrics[name]

    def _field(self, name, tok, text):
        if name not in self.space.fields:
            raise UnboundIdentifier(f"unknown field {name!r}" + (f" (at position {tok[2]})" if tok else ""))
        return self.space.fields[name]

    def identifier(self, name, tok, text):
        sp = self.space
        if name in sp.fields:
            f = sp.fields[name]

            return (lambda comp, f=f: sp.var(f, comp)), f.rank, True
        if name in self.constants:
            e = sp.atom_expr(name)
            return (lambda comp: e), 0, False
        if name in self.atoms or self._function_root(name):
            raise ParseError(f"function atom {name!r} needs its argument, e.g. {name}(phi)", tok[2], text)
        raise UnboundIdentifier(f"unbound identifier {name!r} (at position {tok[2]})")

    def _function_root(self, name):
        root = name
        while root and root not in self.atoms:
            if not root.endswith("p"):
                return None
            root = root[:-1]
        return root or None

    def builtin(self, name, args, tok, text):
        sp = self.space
        root = self._function_root(name)
        if root is not None:
            if len(args) != 1 or args[0] != self.atoms[root][0]:
                raise UsageError(f"{name} takes the single argument {self.atoms[root][0]}")
            atom = sp.atom(root)
            for _ in range(len(name) - len(root)):
                atom = sp._derivative_atom(atom)
            e = sp.atom_expr(atom.name)
            return (lambda comp: e), 0, False
        if name not in BUILTINS:
            raise UnboundIdentifier(f"unknown function {name!r} (at position {tok[2]})")
        if name == "Dalembert":
            if len(args) != 2:
                raise UsageError("Dalembert takes (metric, scalar)")
            M = self.metric_model(args[0])
            phi = self._field(args[1], tok, text)
            if phi.kind != "scalar":
                raise UsageError("Dalembert acts on a scalar field")
            e = M.dalembert(phi.name)
            return (lambda comp: e), 0, False
        if len(args) != 1:
            raise UsageError(f"{name} takes one metric argument")
        M = self.metric_model(args[0])
        if name == "sqrtdetg":
            e = M.sqrtdet()
            return (lambda comp: e), 0, False
        if name == "detg":
            e = M.det()
            return (lambda comp: e), 0, False
        if name == "RicciScalar":
            e = M.scalar()
            return (lambda comp: e), 0, False
        tables = {
            "inv": (M.inverse, 2), "Christoffel": (M.christoffel, 3), "Riemann": (M.riemann, 4),
            "Ricci": (M.ricci, 2), "Einstein": (M.einstein, 2),
            "RicciUp": (M.ricci_up, 2), "EinsteinUp": (M.einstein_up, 2),
        }
        build, arity = tables[name]

        def get(comp):
            return build()[tuple(comp)]
        return get, arity, True

    # evaluation ----------------------------------------------------------
    def parse(self, text) -> Indexed:
        return parse_expression(text, self)

    def equation_table(self, name) -> tuple[str, dict]:
        try:
            eq = self.equations[name]
        except KeyError:
            raise UsageError(f"no equation named {name!r}") from None
        v = self.parse(eq.text)
        if set(v.letters) != set(eq.letters) or len(eq.letters) != len(set(eq.letters)):
            raise IndexArityError(
                f"equation {name}: free indices {sorted(v.letters)} do not match {list(eq.letters)}")
        f = self.space.field(eq.field)
        if f.rank != len(eq.letters):
            raise IndexArityError(f"equation {name} has {len(eq.letters)} indices but {f.name} has rank {f.rank}")
        v = v.reorder(eq.letters)
        return eq.field, v.data

    def source_form(self, names=None) -> SourceForm:
        names = list(names) if names else list(self.equations)
        if not names:
            raise UsageError("the model defines no equations")
        forms = []
        for n in names:
            fname, table = self.equation_table(n)
            forms.append(SourceForm.from_symmetric(self.space, fname, table))
        coeffs, fields = {}, []
        for sf in forms:
            for f in sf.fields:
                if f in fields:
                    raise UsageError(f"two equations are paired with field {f.name}")
                fields.append(f)
            coeffs.update(sf.coeffs)
        return SourceForm(self.space, fields, coeffs)

    def lagrangian(self, name=None):
        if name is None:
            if len(self.lagrangians) != 1:
                raise UsageError("name the lagrangian to use")
            name = next(iter(self.lagrangians))
        if name not in self.lagrangians:
            raise UsageError(f"no lagrangian named {name!r}")
        v = self.parse(self.lagrangians[name])
        if not v.is_scalar():
            raise IndexArityError(f"lagrangian {name} has free indices {list(v.letters)}")
        return v.value()


def _field_spec(name, kind, extra, dim):
    if kind == "scalar":
        return FieldSpec.scalar(name, dim)
    if kind == "covector":
        return FieldSpec.covector(name, dim)
    if kind == "vector":
        return FieldSpec.vector(name, dim)
    if kind == "metric":
        return FieldSpec.metric(name, dim)
    if kind == "tensor12":
        sym = extra[0] if extra else None
        if sym not in (None, "sym", "antisym"):
            raise UsageError(f"unknown tensor12 symmetry {sym!r}")
        return FieldSpec.tensor12(name, dim, sym)
    raise UsageError(f"unknown field kind {kind!r}; expected one of {', '.join(_FIELD_KINDS)}")


def load_model(text: str) -> ModelSpec:
    dim = None
    decl_fields = []
    atoms, consts, eqs, lags, opts = {}, [], {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word = line.split()[0]
        parts = line.split()
        try:
            if word == "dim":
                if len(parts) != 2 or not parts[1].isdigit() or int(parts[1]) < 1:
                    raise UsageError("expected 'dim <positive integer>'")
                dim = int(parts[1])
            elif word == "field":
                if len(parts) < 3:
                    raise UsageError("expected 'field <name> <kind>'")
                decl_fields.append((parts[1], parts[2], parts[3:]))
            elif word == "atom":
                if len(parts) not in (4, 6) or parts[2] != "of" or (len(parts) == 6 and parts[4] != "weight"):
                    raise UsageError("expected 'atom <name> of <field> [weight <w>]'")
                atoms[parts[1]] = (parts[3], parts[5] if len(parts) == 6 else None)
            elif word == "const":
                if len(parts) != 2:
                    raise UsageError("expected 'const <name>'")
                consts.append(parts[1])
            elif word == "eq":
                m = _EQ.match(line)
                if not m:
                    raise UsageError("expected 'eq <name>[indices] [for <field>] = <expression>'")
                name, idx, fname, body = m.groups()
                letters = tuple(x.strip() for x in idx.split(",")) if idx and idx.strip() else ()
                if name in eqs:
                    raise UsageError(f"equation {name!r} defined twice")
                eqs[name] = EquationDef(name, letters, fname, body.strip(), lineno)
            elif word == "lagrangian":
                m = _LAG.match(line)
                if not m:
                    raise UsageError("expected 'lagrangian <name> = <expression>'")
                lags[m.group(1)] = m.group(2).strip()
            elif word == "option":
                if len(parts) != 3:
                    raise UsageError("expected 'option <name> <value>'")
                opts[parts[1]] = parts[2]
            else:
                raise UsageError(f"unknown declaration {word!r}")
        except UsageError as exc:
            raise UsageError(f"line {lineno}: {exc}") from None
    if dim is None:
        raise UsageError("model file must declare 'dim'")
    fields = [_field_spec(n, k, extra, dim) for n, k, extra in decl_fields]
    if not fields:
        raise UsageError("model file declares no fields")
    names = {f.name for f in fields}
    for eq in eqs.values():
        if eq.field is None:
            guess = eq.name[1:].lstrip("_") if eq.name.startswith("E") else None
            if guess not in names:
                raise UsageError(f"equation {eq.name}: say which field it pairs with ('for <field>')")
            eq.field = guess
        elif eq.field not in names:
            raise UnboundIdentifier(f"equation {eq.name} pairs with unknown field {eq.field!r}")
    for a, (arg, _) in atoms.items():
        if arg not in names:
            raise UnboundIdentifier(f"atom {a} depends on unknown field {arg!r}")
    return ModelSpec(dim, fields, atoms, consts, eqs, lags, opts, text)


def read_model(path) -> ModelSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read model file: {exc}") from None
    return load_model(text)
