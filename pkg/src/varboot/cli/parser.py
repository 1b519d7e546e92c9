"""Expression parser with Einstein summation.

Grammar (lowest precedence first)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := postfix ('^' exponent)?
    postfix := primary ('[' index (',' index)* ']')? (',' index)*
    primary := NUMBER | NAME | NAME '(' NAME (',' NAME)* ')' | '(' expr ')'

An index is a letter name or an integer.  Within one product term a letter
that occurs twice is summed over ``0..m-1``; a letter that occurs once stays
free, and the value of the expression is then a table over its values.
"""

from __future__ import annotations

import itertools
import re
from collections import Counter
from fractions import Fraction

from ..errors import IndexArityError, ParseError
from ..jet import Expr, expr_sum, total_derivative

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|([A-Za-z_][A-Za-z0-9_]*)|(.))")


def tokenize(text: str):
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        if m.group(1) is not None:
            out.append(("num", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            out.append(("name", m.group(2), m.start(2)))
        elif m.group(3) is not None:
            ch = m.group(3)
            if ch not in "+-*/^()[],":
                raise ParseError(f"unexpected character {ch!r}", m.start(3), text)
            out.append(("op", ch, m.start(3)))
        pos = m.end()
    out.append(("end", "", n))
    return out


class Indexed:
    """A value with free index letters: ``data`` maps value tuples (in the
    order of ``letters``) to expressions."""

    __slots__ = ("letters", "data")

    def __init__(self, letters, data):
        self.letters = tuple(letters)
        self.data = data

    @classmethod
    def scalar(cls, e: Expr):
        return cls((), {(): e})

    def is_scalar(self):
        return not self.letters

    def value(self) -> Expr:
        return self.data[()]

    def reorder(self, letters):
        if tuple(letters) == self.letters:
            return self
        perm = [self.letters.index(x) for x in letters]
        return Indexed(letters, {tuple(k[i] for i in perm): v for k, v in self.data.items()})

    def map(self, fn):
        return Indexed(self.letters, {k: fn(v) for k, v in self.data.items()})


class Parser:
    def __init__(self, text: str, model):
        self.text = text
        self.model = model
        self.toks = tokenize(text)
        self.i = 0

    # token helpers ------------------------------------------------------
    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, value):
        t = self.peek()
        return t[0] == "op" and t[1] == value

    def expect(self, value):
        t = self.next()
        if t[0] != "op" or t[1] != value:
            got = t[1] or "end of input"
            raise ParseError(f"expected {value!r}, got {got!r}", t[2], self.text)
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, tok[2], self.text)

    # grammar -----------------------------------------------------------
    def parse(self) -> Indexed:
        v = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise self.error(f"unexpected {t[1]!r}")
        return v

    def expr(self) -> Indexed:
        items = [self.term()]
        while self.at("+") or self.at("-"):
            op = self.next()
            v = self.term()
            items.append(v if op[1] == "+" else v.map(lambda e: -e))
        return self._sum(items)

    def _sum(self, items):
        if len(items) == 1:
            return items[0]
        first = items[0]
        letters = first.letters
        for v in items[1:]:
            if set(v.letters) != set(letters):
                raise IndexArityError(
                    f"free indices differ between summands: {sorted(letters)} vs {sorted(v.letters)}")
        items = [v.reorder(letters) for v in items]
        space = self.model.space
        return Indexed(letters, {k: expr_sum([v.data[k] for v in items], space) for k in first.data})

    def term(self) -> Indexed:
        counts = Counter()
        v = self.unary(counts)
        while self.at("*") or self.at("/"):
            op = self.next()
            w = self.unary(counts)
            if op[1] == "/":
                if not w.is_scalar():
                    raise IndexArityError("cannot divide by an expression with free indices")
                d = w.value()
                v = v.map(lambda e: e / d)
            else:
                v = self._contract(v, w)
        bad = [x for x, c in counts.items() if c > 2]
        if bad:
            raise IndexArityError(f"index {bad[0]!r} appears more than twice in one term")
        return v

    def _contract(self, a: Indexed, b: Indexed) -> Indexed:
        common = [x for x in a.letters if x in b.letters]
        out = [x for x in a.letters if x not in common] + [x for x in b.letters if x not in common]
        m = self.model.dim
        space = self.model.space
        data = {}
        for vals in itertools.product(range(m), repeat=len(out)):
            env = dict(zip(out, vals))
            terms = []
            for cv in itertools.product(range(m), repeat=len(common)):
                env.update(zip(common, cv))
                ka = tuple(env[x] for x in a.letters)
                kb = tuple(env[x] for x in b.letters)
                x, y = a.data[ka], b.data[kb]
                if x.is_zero() or y.is_zero():
                    continue
                terms.append(x * y)
            data[vals] = expr_sum(terms, space)
        return Indexed(out, data)

    def unary(self, counts) -> Indexed:
        if self.at("-"):
            self.next()
            return self.unary(counts).map(lambda e: -e)
        if self.at("+"):
            self.next()
            return self.unary(counts)
        return self.power(counts)

    def power(self, counts) -> Indexed:
        base = self.postfix(counts)
        if self.at("^"):
            self.next()
            sign = 1
            while self.at("-") or self.at("+"):
                if self.next()[1] == "-":
                    sign = -sign
            t = self.next()
            if t[0] != "num" or "." in t[1]:
                raise ParseError("exponents must be integer literals", t[2], self.text)
            if not base.is_scalar():
                raise IndexArityError("cannot raise an expression with free indices to a power")
            n = sign * int(t[1])
            return Indexed.scalar(base.value() ** n)
        return base

    def _index(self):
        t = self.next()
        if t[0] == "num" and "." not in t[1]:
            v = int(t[1])
            if not 0 <= v < self.model.dim:
                raise IndexArityError(f"index value {v} out of range 0..{self.model.dim - 1}")
            return v
        if t[0] == "name":
            return t[1]
        raise ParseError("expected an index", t[2], self.text)

    def postfix(self, counts) -> Indexed:
        tok = self.peek()
        prim = self.primary()
        if isinstance(prim, Indexed):
            return self._table_postfix(prim, counts)
        getter, arity, brackets_ok = prim
        slots = []
        if self.at("["):
            if not brackets_ok:
                raise self.error("this value takes no indices")
            self.next()
            slots.append(self._index())
            while self.at(","):
                self.next()
                slots.append(self._index())
            self.expect("]")
        if len(slots) != arity:
            raise IndexArityError(
                f"{tok[1]!r} expects {arity} indices, got {len(slots)} (at position {tok[2]})")
        derivs = []
        while self.at(","):
            self.next()
            derivs.append(self._index())
        all_slots = slots + derivs
        for x in all_slots:
            if isinstance(x, str):
                counts[x] += 1
        return self._indexed(getter, len(slots), all_slots)

    def _indexed(self, getter, n_comp, slots) -> Indexed:
        letters = [x for x in slots if isinstance(x, str)]
        c = Counter(letters)
        if any(v > 2 for v in c.values()):
            raise IndexArityError("an index appears more than twice in one factor")
        free = [x for x in dict.fromkeys(letters) if c[x] == 1]
        summed = [x for x in dict.fromkeys(letters) if c[x] == 2]
        m = self.model.dim
        space = self.model.space
        cache: dict = {}

        def component(vals):
            comp, der = tuple(vals[:n_comp]), tuple(vals[n_comp:])
            key = (comp, tuple(sorted(der)))
            if key not in cache:
                e = getter(comp)
                for d in der:
                    e = total_derivative(e, d)
                cache[key] = e
            return cache[key]

        data = {}
        for fv in itertools.product(range(m), repeat=len(free)):
            env = dict(zip(free, fv))
            terms = []
            for sv in itertools.product(range(m), repeat=len(summed)):
                env.update(zip(summed, sv))
                terms.append(component([env[x] if isinstance(x, str) else x for x in slots]))
            data[fv] = terms[0] if len(terms) == 1 else expr_sum(terms, space)
        return Indexed(free, data)

    def primary(self):
        """Returns ``(getter(comp) -> Expr, number of component indices,
        whether brackets are allowed)``."""
        t = self.next()
        model = self.model
        if t[0] == "num":
            c = Fraction(t[1])
            e = model.space.const(c)
            return (lambda comp: e), 0, False
        if t[0] == "op" and t[1] == "(":
            v = self.expr()
            self.expect(")")
            return v
        if t[0] != "name":
            raise ParseError(f"unexpected {t[1] or 'end of input'!r}", t[2], self.text)
        name = t[1]
        if self.at("("):
            return self._call(name, t)
        return model.identifier(name, t, self.text)

    def _table_postfix(self, v: Indexed, counts) -> Indexed:
        """A parenthesized value: its free letters count once each, and
        comma derivatives apply entrywise."""
        if self.at("["):
            raise self.error("indices cannot be attached to a parenthesized expression")
        for x in v.letters:
            counts[x] += 1
        m = self.model.dim
        space = self.model.space
        while self.at(","):
            self.next()
            d = self._index()
            if isinstance(d, int):
                v = v.map(lambda e, d=d: total_derivative(e, d))
                continue
            counts[d] += 1
            if d in v.letters:
                # divergence: sum over the repeated letter
                pos = v.letters.index(d)
                rest = v.letters[:pos] + v.letters[pos + 1:]
                data = {}
                for key in itertools.product(range(m), repeat=len(rest)):
                    terms = []
                    for mu in range(m):
                        full = key[:pos] + (mu,) + key[pos:]
                        terms.append(total_derivative(v.data[full], mu))
                    data[key] = expr_sum(terms, space)
                v = Indexed(rest, data)
            else:
                data = {}
                for key, e in v.data.items():
                    for mu in range(m):
                        data[key + (mu,)] = total_derivative(e, mu)
                v = Indexed(v.letters + (d,), data)
        return v

    def _call(self, name, tok):
        self.expect("(")
        args = []
        t = self.next()
        if t[0] != "name":
            raise ParseError("function arguments must be names", t[2], self.text)
        args.append(t[1])
        while self.at(","):
            self.next()
            t = self.next()
            if t[0] != "name":
                raise ParseError("function arguments must be names", t[2], self.text)
            args.append(t[1])
        self.expect(")")
        return self.model.builtin(name, args, tok, self.text)


def parse_expression(text: str, model) -> Indexed:
    return Parser(text, model).parse()
