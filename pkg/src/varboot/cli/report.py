"""Reports: a JSON document (``"schema": 1``) or plain text.

Expressions are emitted both as input-syntax text (which re-parses to the
same expression) and as canonical term lists.  Nothing time- or
machine-dependent is included, so equal inputs give byte-identical output.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from ..jet import Expr

SCHEMA = 1


def expr_json(e: Expr) -> dict:
    return {"text": str(e), "terms": e.canonical_terms()}


def component_text(name, comp) -> str:
    if not comp:
        return name
    return f"{name}[{','.join(str(c) for c in comp)}]"


@dataclass
class Report:
    command: str
    inputs: dict
    outputs: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def digest(self) -> str:
        raw = json.dumps(self.inputs, sort_keys=True)
        return hashlib.sha256(raw.encode()).hexdigest()

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "command": self.command,
            "inputs": dict(self.inputs, digest=self.digest()),
            "outputs": _plain(self.outputs),
            "certificates": _plain(self.certificates),
            "diagnostics": _plain(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        lines = [f"command: {self.command}"]
        for section in ("outputs", "certificates", "diagnostics"):
            data = getattr(self, section)
            if not data:
                continue
            lines.append(f"{section}:")
            _text_lines(_plain(data), lines, "  ")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_text()


def _plain(x):
    if isinstance(x, Expr):
        return expr_json(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _text_lines(x, lines, indent):
    if isinstance(x, dict):
        if set(x) == {"text", "terms"}:
            lines[-1] += " " + x["text"]
            return
        for k, v in x.items():
            if isinstance(v, (dict, list)):
                lines.append(f"{indent}{k}:")
                _text_lines(v, lines, indent + "  ")
            else:
                lines.append(f"{indent}{k}: {v}")
    elif isinstance(x, list):
        for v in x:
            if isinstance(v, (dict, list)):
                lines.append(f"{indent}-")
                _text_lines(v, lines, indent + "  ")
            else:
                lines.append(f"{indent}- {v}")
