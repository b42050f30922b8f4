"""Reader for the line-oriented problem-file format used by the CLI.

    # comment
    [problem]
    lambda = 4
    epsilon = 1e-3
    h = 0
    h1 = 1
    h2 = 1
    f = v^2

    [eta1]
    term = v^3 @ pi/4

    [eta2]
    term = 8 @ 0

    [numerics]
    N = 256

With an `[aquifer]` section (alpha, beta, L, h1, h2) the `[problem]` section
describes the recharge only (lambda, epsilon, f and optionally h, all in the
physical variable x), eta points are physical positions in [0, L], and the
problem is mapped onto [0, pi] by `hydrology.build_problem`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import expr as E
from .errors import BVPError, ProblemFileError
from .hydrology import AquiferParams, build_problem
from .problem import ProblemSpec, Term

SECTIONS = ("problem", "eta1", "eta2", "numerics", "aquifer")
PROBLEM_KEYS = ("lambda", "epsilon", "h", "h1", "h2", "f")
AQUIFER_KEYS = ("alpha", "beta", "L", "h1", "h2")
NUMERIC_DEFAULTS = {
    "N": 256,
    "tol": 1e-12,
    "max_iter": 50,
    "c_min": -10.0,
    "c_max": 10.0,
    "scan_points": 401,
}
INTEGER_KEYS = ("N", "max_iter", "scan_points")


@dataclass
class ProblemFile:
    problem: ProblemSpec
    numerics: dict
    aquifer: AquiferParams | None = None
    source: str = ""
    raw: dict = field(default_factory=dict)


def _constant(text, line):
    try:
        return E.parse_constant(text)
    except BVPError as exc:
        raise ProblemFileError(f"bad number {text!r}: {exc}", line) from exc


def _integer(text, line):
    value = _constant(text, line)
    if value != int(value):
        raise ProblemFileError(f"expected an integer, got {text!r}", line)
    return int(value)


def _expression(text, allowed, line):
    try:
        return E.parse(text, allowed)
    except BVPError as exc:
        raise ProblemFileError(f"bad expression {text!r}: {exc}", line) from exc


def _term(text, line):
    if "@" not in text:
        raise ProblemFileError("term must read '<expression in v> @ <point>'", line)
    g_text, point_text = text.rsplit("@", 1)
    g = _expression(g_text.strip(), ("v",), line)
    return g, _constant(point_text.strip(), line)


def _lines(text):
    if text.startswith("\ufeff"):
        text = text[1:]
    return text.replace("\r\n", "\n").split("\n")


def parse_problem_text(text, source="<string>"):
    """Parse problem-file text; every error is a `ProblemFileError` carrying the line number."""
    section = None
    values = {name: {} for name in SECTIONS}
    where = {}
    terms = {"eta1": [], "eta2": []}
    seen_sections = set()
    for lineno, raw in enumerate(_lines(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ProblemFileError(f"malformed section header {raw.strip()!r}", lineno)
            name = line[1:-1].strip()
            if name not in SECTIONS:
                raise ProblemFileError(f"unknown section [{name}]", lineno)
            if name in seen_sections:
                raise ProblemFileError(f"section [{name}] appears twice", lineno)
            seen_sections.add(name)
            section = name
            continue
        if "=" not in line:
            raise ProblemFileError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if section is None:
            raise ProblemFileError("key outside of any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not value:
            raise ProblemFileError(f"empty value for {key!r}", lineno)
        if section in ("eta1", "eta2"):
            if key != "term":
                raise ProblemFileError(f"unknown key {key!r} in [{section}] (only 'term')", lineno)
            terms[section].append((_term(value, lineno), lineno))
            continue
        allowed = {"problem": PROBLEM_KEYS, "numerics": tuple(NUMERIC_DEFAULTS), "aquifer": AQUIFER_KEYS}[section]
        if key not in allowed:
            raise ProblemFileError(f"unknown key {key!r} in [{section}]", lineno)
        if key in values[section]:
            raise ProblemFileError(f"duplicate key {key!r} in [{section}]", lineno)
        values[section][key] = value
        where[(section, key)] = lineno

    def at(sec, key):
        return where.get((sec, key))

    numerics = dict(NUMERIC_DEFAULTS)
    for key, value in values["numerics"].items():
        line = at("numerics", key)
        numerics[key] = _integer(value, line) if key in INTEGER_KEYS else _constant(value, line)
    if numerics["N"] < 2 or numerics["N"] % 2:
        raise ProblemFileError("N must be an even integer >= 2", at("numerics", "N"))
    if numerics["max_iter"] < 1:
        raise ProblemFileError("max_iter must be >= 1", at("numerics", "max_iter"))
    if numerics["scan_points"] < 2:
        raise ProblemFileError("scan_points must be >= 2", at("numerics", "scan_points"))
    if not numerics["c_min"] < numerics["c_max"]:
        raise ProblemFileError("c_min must be smaller than c_max", at("numerics", "c_max"))
    if numerics["tol"] <= 0:
        raise ProblemFileError("tol must be positive", at("numerics", "tol"))

    prob = values["problem"]
    if "problem" not in seen_sections:
        raise ProblemFileError("missing [problem] section", None)
    if "lambda" not in prob:
        raise ProblemFileError("[problem] needs 'lambda'", None)
    lam = _constant(prob["lambda"], at("problem", "lambda"))
    eps = _constant(prob["epsilon"], at("problem", "epsilon")) if "epsilon" in prob else 0.0
    f = _expression(prob.get("f", "0"), ("x", "v"), at("problem", "f"))

    aquifer = None
    if "aquifer" in seen_sections:
        for key in ("h1", "h2"):
            if key in prob:
                raise ProblemFileError(f"'{key}' belongs in [aquifer] when that section is present",
                                       at("problem", key))
        missing = [k for k in AQUIFER_KEYS if k not in values["aquifer"]]
        if missing:
            raise ProblemFileError(f"[aquifer] is missing {', '.join(missing)}", None)
        nums = {k: _constant(v, at("aquifer", k)) for k, v in values["aquifer"].items()}
        try:
            aquifer = AquiferParams(**nums)
        except ValueError as exc:
            raise ProblemFileError(str(exc), None) from exc
        h = _expression(prob["h"], ("x",), at("problem", "h")) if "h" in prob else None
        try:
            spec = build_problem(aquifer, lam, f, [t for t, _ in terms["eta1"]], [t for t, _ in terms["eta2"]],
                                 eps, h=h)
        except ValueError as exc:
            raise ProblemFileError(str(exc), None) from exc
    else:
        h = _expression(prob.get("h", "0"), ("x",), at("problem", "h"))
        h1 = _constant(prob["h1"], at("problem", "h1")) if "h1" in prob else 0.0
        h2 = _constant(prob["h2"], at("problem", "h2")) if "h2" in prob else 0.0
        eta = {}
        for name in ("eta1", "eta2"):
            built = []
            for (g, point), line in terms[name]:
                try:
                    built.append(Term(g, point))
                except ValueError as exc:
                    raise ProblemFileError(str(exc), line) from exc
            eta[name] = tuple(built)
        try:
            spec = ProblemSpec(lam, h, h1, h2, f, eta["eta1"], eta["eta2"], eps)
        except ValueError as exc:
            raise ProblemFileError(str(exc), None) from exc
    return ProblemFile(spec, numerics, aquifer, source, values)


def read_problem_file(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ProblemFileError(f"{path} is not valid UTF-8") from exc
    return parse_problem_text(text, str(path))
