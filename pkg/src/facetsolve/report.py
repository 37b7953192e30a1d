"""Flat key/value verification records shared by the verifier and CLI modules."""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Report:
    """Result of one verification check.

    `values` holds the numeric evidence (bounds, margins, ratios); `passed`
    is the verdict. Serializes as one `name=value` per line so reports can
    be concatenated, diffed and grepped.
    """

    name: str
    passed: bool
    values: dict[str, float] = field(default_factory=dict)
    notes: str = ""

    def lines(self) -> list[str]:
        out = [f"check={self.name}", f"passed={int(self.passed)}"]
        for key, val in self.values.items():
            out.append(f"{key}={format_value(val)}")
        if self.notes:
            out.append(f"notes={self.notes}")
        return out

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.text())


def format_value(val) -> str:
    """repr keeps shortest round-trip floats, so identical runs emit identical text."""
    if isinstance(val, bool):
        return str(int(val))
    if isinstance(val, float):
        return repr(val)
    return str(val)


def write_reports(reports: list[Report], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for i, rep in enumerate(reports):
            if i:
                f.write("\n")
            f.write(rep.text())


def all_passed(reports: list[Report]) -> bool:
    return all(r.passed for r in reports)


def first_failure(reports: list[Report]) -> Report | None:
    for r in reports:
        if not r.passed:
            return r
    return None
