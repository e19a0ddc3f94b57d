"""CPLEX-style solution files: deterministic writer, tolerant reader.

The schema subset is a `CPLEXSolution` root holding one `header` element
(problemName / objectiveValue / solutionStatusString attributes) and one
`variables` element with `variable` children (name / index / value). The
reader ignores any element or attribute it does not know, so solution files
from a real solver parse as long as this subset is present.
"""

import xml.etree.ElementTree as ET
from xml.sax.saxutils import quoteattr

from .errors import ContractViolation, XmlParseError
from .lpformat import (
    STATUS_INFEASIBLE,
    STATUS_LIMIT,
    STATUS_OPTIMAL,
    LpSolution,
    fmt_num,
)


def solution_to_xml(sol: LpSolution, problem_name: str) -> str:
    """Serialize a solution; variables appear in the mapping's order."""
    sol.validate()
    if sol.status == STATUS_OPTIMAL and not sol.values:
        raise ContractViolation("optimal solution carries no variable values")
    header_attrs = [f"problemName={quoteattr(problem_name)}"]
    if sol.objective is not None:
        header_attrs.append(f"objectiveValue={quoteattr(fmt_num(sol.objective))}")
    header_attrs.append(f"solutionStatusString={quoteattr(sol.status)}")
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<CPLEXSolution version="1.2">',
        f" <header {' '.join(header_attrs)}/>",
    ]
    if sol.values:
        lines.append(" <variables>")
        for index, (name, value) in enumerate(sol.values.items()):
            lines.append(
                f"  <variable name={quoteattr(name)} index=\"{index}\""
                f" value={quoteattr(fmt_num(value))}/>")
        lines.append(" </variables>")
    else:
        lines.append(" <variables/>")
    lines.append("</CPLEXSolution>")
    return "\n".join(lines) + "\n"


def _map_status(raw: str) -> str:
    if "optimal" in raw:
        return STATUS_OPTIMAL
    if "infeasible" in raw:
        return STATUS_INFEASIBLE
    return STATUS_LIMIT


def parse_solution_xml(text: str) -> LpSolution:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise XmlParseError(f"solution file is not well-formed XML: {exc}") from exc
    if root.tag != "CPLEXSolution":
        raise XmlParseError(f"expected CPLEXSolution root, got <{root.tag}>")
    header = root.find("header")
    if header is None:
        raise XmlParseError("solution file lacks a <header> element")
    variables = root.find("variables")
    if variables is None:
        raise XmlParseError("solution file lacks a <variables> element")

    raw_status = header.get("solutionStatusString")
    if raw_status is None:
        raise XmlParseError("header lacks solutionStatusString")
    status = _map_status(raw_status)

    raw_objective = header.get("objectiveValue")
    objective = None
    if raw_objective is not None:
        try:
            objective = float(raw_objective)
        except ValueError:
            raise XmlParseError(f"unparseable objectiveValue {raw_objective!r}") from None
    if status == STATUS_OPTIMAL and objective is None:
        raise XmlParseError("optimal status but no objectiveValue")

    values: dict[str, int | float] = {}
    for element in variables:
        if element.tag != "variable":
            continue  # tolerated extension element
        name = element.get("name")
        if name is None:
            raise XmlParseError("<variable> element lacks a name")
        raw_value = element.get("value")
        if raw_value is None:
            raise XmlParseError(f"variable {name!r} lacks a value")
        try:
            values[name] = float(raw_value)
        except ValueError:
            raise XmlParseError(f"variable {name!r} has unparseable value {raw_value!r}") from None
    return LpSolution(status=status, objective=objective, values=values)
