"""Command-line entry point: ``varboot <command> ...``.

Exit codes: 0 on success, 2 on a mathematical obstruction (divergent
homotopy, order too high, ...), 1 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import random
import sys

from ..errors import UsageError, VarbootError
from ..varcalc import (
    LagrangianDensity,
    bootstrap,
    euler_lagrange_fields,
    helmholtz,
    is_trivial,
    vainberg_tonti,
    variational_completion,
)
from .model import read_model
from .report import Report, component_text

PAIRING = ("coefficients are listed per tensor component: E_A/multiplicity, i.e. the "
           "symmetric table entry E^{ab}, not the sum over equal components")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fields_arg(text):
    return [x for x in (text or "").split(",") if x]


def _table(sf) -> dict:
    out = {}
    for (name, comp), e in sf.symmetrized().items():
        out[component_text(name, comp)] = e
    return out


def _inputs(args, model=None) -> dict:
    d = {k: v for k, v in sorted(vars(args).items()) if k not in ("format",) and v is not None}
    if model is not None:
        d["model_sha256"] = model.digest
    return d


def cmd_helmholtz(args, model):
    E = model.source_form(_fields_arg(args.eq))
    H = helmholtz(E)
    bad = H.nonzero()
    fams = {"H0": H.H0, "H1": H.H1, "H2": H.H2}
    listed = {}
    for fam, key in bad:
        A, B = key[0], key[1]
        label = f"{fam}({component_text(*A)},{component_text(*B)}" + "".join(f",{x}" for x in key[2:]) + ")"
        listed[label] = fams[fam][key]
    return {"variational": not bad, "nonzero_components": len(bad), "components": listed}, {}, {}


def cmd_el(args, model):
    L = LagrangianDensity(model.lagrangian(args.name))
    fields = _fields_arg(args.vary) or [f.name for f in L.fields]
    E = euler_lagrange_fields(L, [model.space.field(n) for n in fields])
    return {"equations": _table(E)}, {}, {"pairing": PAIRING}


def _closed_forms(model):
    """Short textual candidates for densities of metric models."""
    out = []
    for g in (f for f in model.space.fields.values() if f.kind == "metric"):
        s = f"sqrtdetg({g.name})"
        out.append(f"RicciScalar({g.name})*{s}")
        for phi in (f for f in model.space.fields.values() if f.kind == "scalar"):
            for V, (arg, _) in model.atoms.items():
                if arg != phi.name:
                    continue
                for k in model.constants:
                    out.append(f"(RicciScalar({g.name})/(2*{k}) - 1/2*inv({g.name})[a,b]*{phi.name},a*"
                               f"{phi.name},b - {V}({phi.name}))*{s}")
    return out


def _scale_at_point(space, e, x, tries=5):
    """Candidate ``c`` with ``e = c*x``, read off at a random point."""
    rng = random.Random("recognize")
    for _ in range(tries):
        pt = space.random_point(rng, -7, 7)
        try:
            (ea, eb), (xa, xb) = e.evaluate(pt), x.evaluate(pt)
        except ZeroDivisionError:
            continue
        if xa != 0:
            return ea / xa
        if xb != 0:
            return eb / xb
    return None


def _recognize(model, e):
    """``text`` of a candidate ``c * X`` equal to ``e``, or None."""
    for text in _closed_forms(model):
        x = model.parse(text).value()
        if x.is_zero():
            continue
        ratio = _scale_at_point(model.space, e, x)
        if ratio is None or ratio == 0 or e != x.scale(ratio):
            continue
        return text if ratio == 1 else f"{ratio}*({text})"
    return None


def cmd_vt(args, model):
    E = model.source_form(_fields_arg(args.eq))
    L = vainberg_tonti(E, _fields_arg(args.vary) or None)
    diag = {}
    rec = _recognize(model, L.density)
    if rec is not None:
        diag["recognized"] = rec
    return {"density": L.density}, {}, diag


def cmd_complete(args, model):
    E = model.source_form(_fields_arg(args.eq))
    comp = variational_completion(E, _fields_arg(args.vary) or None)
    diag = {"pairing": PAIRING}
    rec = _recognize(model, comp.lagrangian.density)
    if rec is not None:
        diag["recognized"] = rec
    return ({"lagrangian": comp.lagrangian.density, "equations": _table(comp.source_form)},
            {"identity_checked": comp.identity_checked}, diag)


def cmd_bootstrap(args, model):
    vary = _fields_arg(args.vary)
    if not vary:
        raise UsageError("bootstrap needs --vary")
    E = model.source_form(_fields_arg(args.eq))
    res = bootstrap(E.restrict(vary), vary, _fields_arg(args.passive))
    out = {
        "lagrangian": res.lagrangian.density,
        "vary_equations": _table(res.completed_vary_eqs),
        "passive_equations": _table(res.passive_eqs),
    }
    diag = {"pairing": PAIRING, "ambiguous": res.ambiguous,
            "passive_equations_note": res.passive_determined_up_to}
    rec = _recognize(model, res.lagrangian.density)
    if rec is not None:
        diag["recognized"] = rec
    return out, {}, diag


def cmd_trivial(args, model):
    L = LagrangianDensity(model.lagrangian(args.name))
    return {"trivial": is_trivial(L)}, {}, {}


def cmd_enum(args, model=None):
    from ..invariants import catalogue as cat

    seed = args.seed
    out, certs, diag = {}, {}, {}
    if args.q_only:
        q = cat.q_only_sector(seed)
        t = cat.t_only_sector(seed)
        out["q_only"] = {"algebraic": q.algebraic, "nontrivial_first_order": q.nontrivial_first_order,
                         "algebraic_members": q.algebraic_names}
        out["t_only"] = {"algebraic": t.algebraic, "nontrivial_first_order": t.nontrivial_first_order,
                         "algebraic_members": t.algebraic_names}
        return out, certs, diag
    if args.first_order:
        fo = cat.enumerate_first_order(seed)
        out["count"] = fo.count
        out["families"] = fo.family_counts()
        out["nontrivial_el_classes"] = fo.el_classes
        out["terms"] = [
            {"name": t.name, "family": t.family, "profile": list(t.profile), "trivial": t.trivial,
             "independent": t.independent, "el_class": t.el_class}
            for t in fo.terms
        ]
        certs["terms"] = fo.term_certificate.as_dict()
        certs["el_classes"] = fo.el_certificate.as_dict()
        return out, certs, diag
    ranks = [args.rank] if args.rank else [1, 2, 3, 4]
    per = {}
    for k in ranks:
        b = cat.enumerate_algebraic(k, seed)
        per[str(k)] = {
            "count": b.count,
            "decomposable": b.decomposable_count(),
            "indecomposable": b.count - b.decomposable_count(),
            "members": [{"name": m.name, "pattern": m.pattern.label(), "decomposable": m.decomposable}
                        for m in b.members],
        }
        certs[str(k)] = b.independence_certificate.as_dict()
        diag[str(k)] = {"pattern_classes": b.pattern_classes, "vanishing_classes": b.vanishing_classes,
                        "dependent_classes": len(b.dependent)}
    if args.rank:
        out.update(per[str(args.rank)])
        certs = certs[str(args.rank)]
        diag = diag[str(args.rank)]
    else:
        out["ranks"] = per
    full, filtered = cat.admissible_profiles()
    diag = dict(diag, degree_profiles=sorted(p.as_tuple() for p in full),
                first_order_profiles=sorted(filtered))
    return out, certs, diag


COMMANDS = {
    "helmholtz": cmd_helmholtz,
    "el": cmd_el,
    "vt": cmd_vt,
    "complete": cmd_complete,
    "bootstrap": cmd_bootstrap,
    "trivial": cmd_trivial,
    "enum-invariants": cmd_enum,
}


def build_parser():
    p = _Parser(prog="varboot", description="Inverse variational calculus on jet spaces.")
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--seed", type=int, default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("helmholtz", "vt", "complete", "bootstrap"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("model")
        s.add_argument("--eq", help="comma-separated equation names (default: all)")
        if name != "helmholtz":
            s.add_argument("--vary")
        if name == "bootstrap":
            s.add_argument("--passive")
    for name in ("el", "trivial"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("model")
        s.add_argument("name", nargs="?", help="lagrangian name (default: the only one)")
        if name == "el":
            s.add_argument("--vary")
    s = sub.add_parser("enum-invariants", parents=[common])
    s.add_argument("--rank", type=int, choices=(1, 2, 3, 4))
    s.add_argument("--first-order", action="store_true")
    s.add_argument("--q-only", action="store_true")
    return p


def run(argv) -> tuple[int, str]:
    """Run one command; returns ``(exit code, rendered output)``."""
    fmt = "json" if "--format=json" in argv or _after(argv, "--format") == "json" else "text"
    try:
        args = build_parser().parse_args(argv)
        fmt = args.format
        model = read_model(args.model) if hasattr(args, "model") else None
        outputs, certs, diag = COMMANDS[args.command](args, model)
        rep = Report(args.command, _inputs(args, model), outputs, certs, diag)
        return 0, rep.render(fmt)
    except VarbootError as exc:
        code = 1 if isinstance(exc, UsageError) else 2
        kind = "usage" if code == 1 else "math"
        rep = Report(argv[0] if argv else "", {"argv": list(argv)}, {},
                     {}, {"error": type(exc).__name__, "kind": kind, "message": str(exc)})
        return code, rep.render(fmt)


def _after(argv, flag):
    for i, a in enumerate(argv[:-1]):
        if a == flag:
            return argv[i + 1]
    return None


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    code, text = run(argv)
    stream = sys.stdout if code == 0 else sys.stderr
    stream.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
