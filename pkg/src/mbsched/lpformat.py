"""Reader and writer for a strict subset of the LP problem-file format.

The writer is deterministic: one problem maps to exactly one byte sequence.
The grammar is line-oriented, one entry per line:

    \\ <problem name>
    Maximize
     obj: + 1 s_0 + 1 s_1
    Subject To
     <name>: <sign> <coeff> <var> ... <relation> <rhs>
    Bounds
     <lower> <= <var> [<= <upper>]
    Binaries
     <var>
    End

Section keywords sit at column 0 in the fixed order above (empty sections are
omitted entirely); entries are indented by one space. Every term is written
sign-separated, with an explicit coefficient, integers without a decimal
point. The parser accepts exactly this shape and names the offending line on
any deviation.
"""

import re
from dataclasses import dataclass, field

from .errors import ContractViolation, LpParseError

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

RELATIONS = ("<=", "=", ">=")

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_LIMIT = "limit-reached"
STATUSES = (STATUS_OPTIMAL, STATUS_INFEASIBLE, STATUS_LIMIT)


@dataclass
class LpConstraint:
    name: str
    terms: list[tuple[int | float, str]]
    relation: str
    rhs: int | float


@dataclass
class LpProblem:
    """A maximization MILP as it appears in an LP file."""

    name: str
    objective: list[tuple[int | float, str]]
    constraints: list[LpConstraint] = field(default_factory=list)
    # var -> (lower, upper); None means the format default (0 / +inf)
    bounds: dict[str, tuple[int | float | None, int | float | None]] = field(default_factory=dict)
    binaries: list[str] = field(default_factory=list)
    sense: str = "maximize"

    def variables(self) -> list[str]:
        """All declared variables, objective first, no duplicates."""
        seen: dict[str, None] = {}
        for _, var in self.objective:
            seen.setdefault(var)
        for var in self.binaries:
            seen.setdefault(var)
        for var in self.bounds:
            seen.setdefault(var)
        return list(seen)

    def validate(self) -> None:
        if self.sense != "maximize":
            raise ContractViolation(f"unsupported sense {self.sense!r}")
        for name in [self.name, *self.binaries, *self.bounds]:
            if not NAME_RE.match(name):
                raise ContractViolation(f"invalid LP name {name!r}")
        declared = set(self.variables())
        for coeff, var in self.objective:
            if not NAME_RE.match(var):
                raise ContractViolation(f"invalid LP name {var!r}")
        seen_constraints = set()
        for con in self.constraints:
            if not NAME_RE.match(con.name):
                raise ContractViolation(f"invalid constraint name {con.name!r}")
            if con.name in seen_constraints:
                raise ContractViolation(f"duplicate constraint name {con.name!r}")
            seen_constraints.add(con.name)
            if con.relation not in RELATIONS:
                raise ContractViolation(f"constraint {con.name}: bad relation {con.relation!r}")
            for _, var in con.terms:
                if var not in declared:
                    raise ContractViolation(
                        f"constraint {con.name}: variable {var!r} not in objective, bounds or binaries")


def fmt_num(value: int | float) -> str:
    """Decimal rendering: integers without a point, floats shortest round-trip."""
    if isinstance(value, bool):
        raise ContractViolation("bool is not a coefficient")
    if isinstance(value, int):
        return str(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise ContractViolation(f"non-finite coefficient {value!r}")
    if value.is_integer():
        return str(int(value))
    return repr(value)


def _terms_text(terms: list[tuple[int | float, str]]) -> str:
    parts = []
    for coeff, var in terms:
        if coeff < 0:
            parts.append(f"- {fmt_num(-coeff)} {var}")
        else:
            parts.append(f"+ {fmt_num(coeff)} {var}")
    return " ".join(parts)


def _bound_text(var: str, lower, upper) -> str:
    if lower is None and upper is None:
        raise ContractViolation(f"bound entry for {var!r} sets neither side")
    if lower is None:
        return f"{var} <= {fmt_num(upper)}"
    if upper is None:
        return f"{fmt_num(lower)} <= {var}"
    return f"{fmt_num(lower)} <= {var} <= {fmt_num(upper)}"


def write_lp(problem: LpProblem) -> str:
    problem.validate()
    lines = [f"\\ {problem.name}", "Maximize"]
    obj = _terms_text(problem.objective)
    lines.append(f" obj: {obj}" if obj else " obj:")
    if problem.constraints:
        lines.append("Subject To")
        for con in problem.constraints:
            lines.append(f" {con.name}: {_terms_text(con.terms)} {con.relation} {fmt_num(con.rhs)}")
    if problem.bounds:
        lines.append("Bounds")
        for var, (lower, upper) in problem.bounds.items():
            lines.append(f" {_bound_text(var, lower, upper)}")
    if problem.binaries:
        lines.append("Binaries")
        for var in problem.binaries:
            lines.append(f" {var}")
    lines.append("End")
    return "\n".join(lines) + "\n"


_INT_RE = re.compile(r"[+-]?\d+\Z")


def _parse_num(token: str, lineno: int) -> int | float:
    if _INT_RE.match(token):
        return int(token)
    try:
        return float(token)
    except ValueError:
        raise LpParseError(f"line {lineno}: expected a number, got {token!r}") from None


def _parse_name(token: str, lineno: int) -> str:
    if not NAME_RE.match(token):
        raise LpParseError(f"line {lineno}: invalid name {token!r}")
    return token


def _parse_terms(tokens: list[str], lineno: int) -> list[tuple[int | float, str]]:
    if len(tokens) % 3:
        raise LpParseError(f"line {lineno}: malformed term list {' '.join(tokens)!r}")
    terms = []
    for i in range(0, len(tokens), 3):
        sign, coeff_tok, var = tokens[i:i + 3]
        if sign not in ("+", "-"):
            raise LpParseError(f"line {lineno}: expected sign, got {sign!r}")
        coeff = _parse_num(coeff_tok, lineno)
        if sign == "-":
            coeff = -coeff
        terms.append((coeff, _parse_name(var, lineno)))
    return terms


class _Lines:
    """Cursor over the file's lines with 1-based numbering."""

    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def peek(self) -> str | None:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def take(self) -> str:
        line = self.lines[self.pos]
        self.pos += 1
        return line

    @property
    def lineno(self) -> int:
        return self.pos  # number of the line just taken


def _entry_lines(cur: _Lines):
    """Yield (lineno, stripped) for consecutive indented entry lines."""
    while True:
        line = cur.peek()
        if line is None or not line.startswith(" "):
            return
        cur.take()
        yield cur.lineno, line.strip()


def parse_problem(text: str) -> LpProblem:
    """Parse LP text in the exact shape write_lp emits."""
    cur = _Lines(text)
    line = cur.peek()
    if line is None or not line.startswith("\\"):
        raise LpParseError("line 1: expected a '\\ <name>' comment line")
    cur.take()
    name = line[1:].strip()
    if not NAME_RE.match(name):
        raise LpParseError(f"line 1: invalid problem name {name!r}")

    line = cur.peek()
    if line != "Maximize":
        raise LpParseError(f"line {cur.pos + 1}: expected 'Maximize', got {line!r}")
    cur.take()
    line = cur.peek()
    if line is None or not line.startswith(" "):
        raise LpParseError(f"line {cur.pos + 1}: expected the objective line")
    cur.take()
    stripped = line.strip()
    label, sep, rest = stripped.partition(":")
    if not sep or label != "obj":
        raise LpParseError(f"line {cur.lineno}: objective line must start with 'obj:'")
    objective = _parse_terms(rest.split(), cur.lineno)

    constraints: list[LpConstraint] = []
    bounds: dict[str, tuple[int | float | None, int | float | None]] = {}
    binaries: list[str] = []
    # remaining sections in fixed order, each optional
    section_order = ["Subject To", "Bounds", "Binaries", "End"]
    while True:
        line = cur.peek()
        if line is None:
            raise LpParseError(f"line {cur.pos + 1}: missing 'End'")
        if line not in section_order:
            if line in ("Subject To", "Bounds", "Binaries"):
                raise LpParseError(f"line {cur.pos + 1}: section {line!r} out of order or repeated")
            raise LpParseError(f"line {cur.pos + 1}: unknown section {line!r}")
        section_order = section_order[section_order.index(line) + 1:]
        cur.take()
        if line == "End":
            break
        if line == "Subject To":
            for lineno, entry in _entry_lines(cur):
                con_name, sep, rest = entry.partition(":")
                if not sep:
                    raise LpParseError(f"line {lineno}: constraint line lacks a ':'")
                tokens = rest.split()
                rel_positions = [i for i, tok in enumerate(tokens) if tok in RELATIONS]
                if len(rel_positions) != 1 or rel_positions[0] != len(tokens) - 2:
                    raise LpParseError(f"line {lineno}: expected '<terms> <relation> <rhs>'")
                rel = tokens[-2]
                rhs = _parse_num(tokens[-1], lineno)
                terms = _parse_terms(tokens[:-2], lineno)
                constraints.append(LpConstraint(_parse_name(con_name, lineno), terms, rel, rhs))
        elif line == "Bounds":
            for lineno, entry in _entry_lines(cur):
                tokens = entry.split()
                if len(tokens) == 3 and tokens[1] == "<=":
                    if NAME_RE.match(tokens[0]) and not _looks_numeric(tokens[0]):
                        var = _parse_name(tokens[0], lineno)
                        bounds[var] = (None, _parse_num(tokens[2], lineno))
                    else:
                        var = _parse_name(tokens[2], lineno)
                        bounds[var] = (_parse_num(tokens[0], lineno), None)
                elif len(tokens) == 5 and tokens[1] == "<=" and tokens[3] == "<=":
                    var = _parse_name(tokens[2], lineno)
                    bounds[var] = (_parse_num(tokens[0], lineno), _parse_num(tokens[4], lineno))
                else:
                    raise LpParseError(f"line {lineno}: malformed bound {entry!r}")
        elif line == "Binaries":
            for lineno, entry in _entry_lines(cur):
                tokens = entry.split()
                if len(tokens) != 1:
                    raise LpParseError(f"line {lineno}: one variable per Binaries line")
                binaries.append(_parse_name(tokens[0], lineno))

    for trailing in cur.lines[cur.pos:]:
        if trailing.strip():
            raise LpParseError(f"line {cur.pos + 1}: content after 'End'")
        cur.pos += 1

    problem = LpProblem(name, objective, constraints, bounds, binaries)
    problem.validate()
    return problem


def _looks_numeric(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


@dataclass
class LpSolution:
    """A solved problem as read back from a solution file."""

    status: str
    objective: int | float | None
    values: dict[str, int | float]

    def validate(self) -> None:
        if self.status not in STATUSES:
            raise ContractViolation(f"unknown solution status {self.status!r}")
        if self.status == STATUS_OPTIMAL and self.objective is None:
            raise ContractViolation("optimal solution without an objective value")
