"""The named T/Q forms of the pure-distortion catalogue, written as index
contractions.  Each entry maps a display name to a pattern, or to a wedge
of earlier names.

Index labels ``m1..m4`` are contracted, ``t1..t4`` are the wedge indices.
"""

from __future__ import annotations

import itertools

from .patterns import ContractionPattern, from_indices


def _f(kind, up, a, b):
    return (kind, up, a, b)


ALPHA = {
    "alpha_T": from_indices([_f("T", "m1", "m1", "t1")]),
    "alpha_Q": from_indices([_f("Q", "m1", "m1", "t1")]),
}

BETA = {
    "beta_Q.T.": from_indices([_f("Q", "m1", "m2", "t1"), _f("T", "m2", "m1", "t2")]),
    "beta_TT..": from_indices([_f("T", "m1", "m1", "m2"), _f("T", "m2", "t1", "t2")]),
    "beta_QT..": from_indices([_f("Q", "m1", "m1", "m2"), _f("T", "m2", "t1", "t2")]),
}


def _gamma_cycle(a, b, c):
    return from_indices([_f(a, "m1", "m2", "t1"), _f(b, "m2", "m3", "t2"), _f(c, "m3", "m1", "t3")])


def _gamma_trace(b, c):
    return from_indices([_f("T", "m1", "t1", "t2"), _f(b, "m2", "m2", "m3"), _f(c, "m3", "m1", "t3")])


def _gamma_tilde(b, c):
    return from_indices([_f("T", "m1", "t1", "t2"), _f(b, "m2", "m1", "m3"), _f(c, "m3", "m2", "t3")])


GAMMA = {}
for _k in ("TTT", "TTQ", "TQQ", "QQQ"):
    GAMMA[f"gamma_{_k[0]}.{_k[1]}.{_k[2]}."] = _gamma_cycle(*_k)
for _b, _c in (("T", "T"), ("Q", "T"), ("T", "Q"), ("Q", "Q")):
    GAMMA[f"gamma_T..{_b}{_c}."] = _gamma_trace(_b, _c)
    GAMMA[f"gammat_T..{_b}{_c}."] = _gamma_tilde(_b, _c)


def _lambda_pair(a, b, tilde):
    third = _f(a, "m3", "m1", "m4") if tilde else _f(a, "m3", "m1", "m2")
    fourth = _f(b, "m4", "m2", "m3") if tilde else _f(b, "m4", "m3", "m4")
    return from_indices([_f("T", "m1", "t1", "t2"), _f("T", "m2", "t3", "t4"), third, fourth])


def _lambda_single(a, b, c, variant):
    first = _f("T", "m1", "t1", "t2")
    if variant == "":
        rest = [_f(a, "m2", "m1", "m3"), _f(b, "m3", "m4", "t3"), _f(c, "m4", "m2", "t4")]
    elif variant == "t":
        rest = [_f(a, "m2", "m2", "m3"), _f(b, "m3", "m4", "t3"), _f(c, "m4", "m1", "t4")]
    else:
        rest = [_f(a, "m2", "m3", "m4"), _f(b, "m3", "m1", "t3"), _f(c, "m4", "m2", "t4")]
    return from_indices([first] + rest)


def _lambda_cycle(a, b, c, d):
    return from_indices([
        _f(a, "m1", "m2", "t1"), _f(b, "m2", "m3", "t2"),
        _f(c, "m3", "m4", "t3"), _f(d, "m4", "m1", "t4"),
    ])


LAMBDA_PAIR = {
    "lambda_T..T..QT": _lambda_pair("Q", "T", False),
    "lambda_T..T..QQ": _lambda_pair("Q", "Q", False),
    "lambdat_T..T..TT": _lambda_pair("T", "T", True),
    "lambdat_T..T..TQ": _lambda_pair("T", "Q", True),
    "lambdat_T..T..QQ": _lambda_pair("Q", "Q", True),
}

LAMBDA_SINGLE = {}
for _v, _tag in (("", "lambda"), ("t", "lambdat"), ("h", "lambdah")):
    for _a, _b, _c in itertools.product("TQ", repeat=3):
        LAMBDA_SINGLE[f"{_tag}_T..{_a}{_b}.{_c}."] = _lambda_single(_a, _b, _c, _v)

# The third cycle form is printed with the same subscript as the first in
# the source list; the intended member has one T and three Q's.
LAMBDA_CYCLE = {
    "lambda_T.T.T.Q.": _lambda_cycle("T", "T", "T", "Q"),
    "lambda_T.T.Q.Q.": _lambda_cycle("T", "T", "Q", "Q"),
    "lambda_T.Q.Q.Q.": _lambda_cycle("T", "Q", "Q", "Q"),
}

# forms that vanish identically or duplicate a listed one
STRUCTURAL_ZEROS = {
    "lambda_T..T..TT": _lambda_pair("T", "T", False),
    "lambda_T..T..TQ": _lambda_pair("T", "Q", False),
    "lambda_T.T.T.T.": _lambda_cycle("T", "T", "T", "T"),
    "lambda_Q.Q.Q.Q.": _lambda_cycle("Q", "Q", "Q", "Q"),
}
PROPORTIONAL = ("lambda_T.T.Q.T.", _lambda_cycle("T", "T", "Q", "T"), "lambda_T.T.T.Q.")


def _wedge_names(*names):
    return tuple(names)


def rank1():
    return dict(ALPHA)


def rank2():
    out = {"alpha_T^alpha_Q": _wedge_names("alpha_T", "alpha_Q")}
    out.update(BETA)
    return out


def rank3():
    out = {}
    for a in ALPHA:
        for b in BETA:
            out[f"{a}^{b}"] = _wedge_names(a, b)
    out.update(GAMMA)
    return out


def rank4():
    out = {}
    gammas = list(GAMMA)
    for a in ALPHA:
        for g in gammas:
            out[f"{a}^{g}"] = _wedge_names(a, g)
    for b in BETA:
        out[f"alpha_T^alpha_Q^{b}"] = _wedge_names("alpha_T", "alpha_Q", b)
    for b1, b2 in itertools.combinations_with_replacement(list(BETA), 2):
        out[f"{b1}^{b2}"] = _wedge_names(b1, b2)
    out.update(LAMBDA_PAIR)
    out.update(LAMBDA_SINGLE)
    out.update(LAMBDA_CYCLE)
    return out


def named_forms(k: int) -> dict:
    return {1: rank1, 2: rank2, 3: rank3, 4: rank4}[k]()


def all_atoms() -> dict:
    out = {}
    out.update(ALPHA)
    out.update(BETA)
    out.update(GAMMA)
    return out


def resolve(entry) -> ContractionPattern:
    """Turn a named entry (pattern or tuple of names) into one pattern."""
    if isinstance(entry, ContractionPattern):
        return entry
    atoms = all_atoms()
    p = atoms[entry[0]]
    for n in entry[1:]:
        p = p.wedge(atoms[n])
    return p


def is_decomposable(entry) -> bool:
    return not isinstance(entry, ContractionPattern)
