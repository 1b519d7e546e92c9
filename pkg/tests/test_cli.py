import json
from pathlib import Path

import pytest
from hypothesis import given, settings

from varboot.cli.main import main, run
from varboot.cli.model import load_model
from varboot.errors import IndexArityError, ParseError, UnboundIdentifier, UsageError
from varboot.jet import total_derivative

from strategies import polynomials

MODELS = Path(__file__).resolve().parent.parent / "models"

SCALARS = """
dim 2
field y scalar
field z scalar
atom V of y
const c
lagrangian L = 1/2*y,a*y,a - V(y)
eq Ey = y,0,0 - y,1,1
"""

METRIC2 = """
dim 2
field g metric
field phi scalar
"""


@pytest.fixture(scope="module")
def scalars():
    return load_model(SCALARS)


@pytest.fixture(scope="module")
def metric2():
    return load_model(METRIC2)


def write(tmp_path, text, name="m.vbt"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@settings(max_examples=60)
@given(polynomials(load_model(SCALARS).space, order=2, max_degree=3))
def test_printed_expressions_reparse(e):
    m = load_model(SCALARS)
    # a fresh model owns a different space, so compare through text
    again = m.parse(str(m.parse(str(e)).value())).value()
    assert str(again) == str(e)


def test_summation_convention(scalars):
    sp = scalars.space
    v = scalars.parse("y,a*y,a").value()
    assert v == sp.var("y", (), (0,)) ** 2 + sp.var("y", (), (1,)) ** 2
    free = scalars.parse("y,a*z")
    assert free.letters == ("a",)
    assert free.data[(1,)] == sp.var("y", (), (1,)) * sp.var("z")


def test_trace_and_divergence(metric2):
    sp = metric2.space
    tr = metric2.parse("inv(g)[a,b]*g[a,b]").value()
    assert tr == sp.const(2)
    div = metric2.parse("(phi,a*phi,b),a")
    assert div.letters == ("b",)
    expected = sum((total_derivative(sp.var("phi", (), (a,)) * sp.var("phi", (), (0,)), a) for a in range(2)),
                   sp.zero())
    assert div.data[(0,)] == expected


def test_function_atom_derivatives(scalars):
    sp = scalars.space
    e = scalars.parse("V(y),0 - Vp(y)*y,0").value()
    assert e.is_zero()


@pytest.mark.parametrize("text,exc", [
    ("y*(", ParseError),
    ("y $ 2", ParseError),
    ("y^x", ParseError),
    ("zz", UnboundIdentifier),
    ("y,a*y,a*y,a", IndexArityError),
    ("y,a + y", IndexArityError),
    ("y,7", IndexArityError),
    ("V", ParseError),
])
def test_parse_errors(scalars, text, exc):
    with pytest.raises(exc):
        scalars.parse(text)


def test_parse_error_reports_position(scalars):
    with pytest.raises(ParseError) as info:
        scalars.parse("y + $")
    assert info.value.position == 4


@pytest.mark.parametrize("text", [
    "field y scalar\n",
    "dim 2\nfield y spinor\n",
    "dim 2\nfield y scalar\neq Q = y\n",
    "dim 2\nfield y scalar\nbogus 1\n",
])
def test_model_file_errors(text):
    with pytest.raises(UsageError):
        load_model(text)


def test_exit_codes(tmp_path):
    good = write(tmp_path, SCALARS)
    assert run(["helmholtz", good])[0] == 0
    assert run(["nonsense"])[0] == 1
    assert run(["el", str(tmp_path / "missing.vbt")])[0] == 1
    bad = write(tmp_path, SCALARS + "eq Ez = y,a*y,a*y,a\n", "bad.vbt")
    assert run(["helmholtz", bad])[0] == 1
    unbound = write(tmp_path, SCALARS + "eq Ez = w\n", "unbound.vbt")
    assert run(["helmholtz", unbound])[0] == 1
    # 1/y scales as t^-1: a mathematical obstruction, not a usage error
    div = write(tmp_path, "dim 2\nfield y scalar\neq Ey = 1/y\n", "div.vbt")
    code, text = run(["vt", div, "--format", "json"])
    assert code == 2
    assert json.loads(text)["diagnostics"]["error"] == "DivergentHomotopy"
    third = write(tmp_path, "dim 2\nfield y scalar\neq Ey = y,0,0,0\n", "third.vbt")
    assert run(["helmholtz", third])[0] == 2


def test_main_writes_streams(tmp_path, capsys):
    good = write(tmp_path, SCALARS)
    assert main(["trivial", good]) == 0
    assert "trivial: False" in capsys.readouterr().out
    assert main(["trivial", str(tmp_path / "nope.vbt")]) == 1
    assert "UsageError" in capsys.readouterr().err


def test_json_is_deterministic(tmp_path):
    good = write(tmp_path, SCALARS)
    a = run(["complete", good, "--vary", "y", "--format", "json"])[1]
    b = run(["complete", good, "--vary", "y", "--format", "json"])[1]
    assert a == b
    doc = json.loads(a)
    assert doc["schema"] == 1
    assert doc["certificates"]["identity_checked"] is True
    assert doc["inputs"]["model_sha256"]
    eq = doc["outputs"]["equations"]["y"]
    assert eq["text"] == "y,0,0 - y,1,1"


def test_emitted_text_reparses(tmp_path):
    good = write(tmp_path, SCALARS)
    doc = json.loads(run(["el", good, "L", "--format", "json"])[1])
    m = load_model(SCALARS)
    text = doc["outputs"]["equations"]["y"]["text"]
    assert str(m.parse(text).value()) == text


def test_scalar_model_commands():
    model = str(MODELS / "scalar2d.vbt")
    doc = json.loads(run(["helmholtz", model, "--format", "json"])[1])
    assert doc["outputs"]["variational"] is True
    doc = json.loads(run(["vt", model, "--vary", "y", "--format", "json"])[1])
    assert doc["outputs"]["density"]["text"] == "1/2*y*y,0,0 - 1/2*y*y,1,1"
    assert json.loads(run(["trivial", model, "D", "--format", "json"])[1])["outputs"]["trivial"] is True


def test_enum_rank_two():
    doc = json.loads(run(["enum-invariants", "--rank", "2", "--format", "json"])[1])
    assert doc["outputs"]["count"] == 4
    assert doc["certificates"]["prime"] == 2**61 - 1
    assert doc["diagnostics"]["pattern_classes"] == 10


def _expr_nodes(x):
    if isinstance(x, dict):
        if set(x) == {"text", "terms"}:
            yield x
        else:
            for v in x.values():
                yield from _expr_nodes(v)
    elif isinstance(x, list):
        for v in x:
            yield from _expr_nodes(v)


@pytest.mark.parametrize("argv", [
    ["helmholtz", "{m}"],
    ["helmholtz", "{n}"],
    ["el", "{m}", "L"],
    ["vt", "{m}", "--vary", "y"],
    ["complete", "{m}", "--vary", "y"],
    ["bootstrap", "{m}", "--vary", "y", "--passive", "z"],
    ["trivial", "{m}", "L"],
])
def test_every_reported_expression_reparses(tmp_path, argv):
    src = SCALARS + "eq Ez = y*z,0 + z,1,1\n"
    paths = {"{m}": write(tmp_path, src), "{n}": write(tmp_path, src.replace("eq Ey", "eq Ey for y").replace(
        "y,0,0 - y,1,1", "y,0 + z"), "n.vbt")}
    code, text = run([paths.get(a, a) for a in argv] + ["--format", "json"])
    assert code == 0, text
    doc = json.loads(text)
    model = load_model(src)
    nodes = list(_expr_nodes(doc["outputs"]))
    for node in nodes:
        assert model.parse(node["text"]).value().canonical_terms() == node["terms"]
    if argv[0] != "trivial":
        assert nodes
