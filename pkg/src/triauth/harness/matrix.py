"""Run the scenario suite and assemble the comparison matrix."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from ..errors import ScenarioPanic, ToolkitError
from .scenarios import CRITERIA, MECHANISMS, SCRIPTS, Environment, Scenario

SCHEMA_VERSION = 1
MECHANISM_TITLES = {"scitokens": "SciTokens", "vc": "Verifiable Credentials", "contract": "Smart Contracts"}

NON_EXECUTABLE = [
    ("scalability", "No measurement procedure; the simulator has one sequencer and no throughput model."),
    ("interoperability", "Covered only as wire-format conformance: JOSE compact tokens decode with "
                         "generic base64url + JSON readers (see the test suite)."),
    ("ease of integration", "Qualitative; not observable from toolkit behaviour."),
    ("credential management", "Qualitative; depends on deployment, not on the mechanisms' logic."),
]


def load_fixtures() -> list[dict]:
    text = resources.files(__package__).joinpath("expected.json").read_text(encoding="utf-8")
    return json.loads(text)["scenarios"]


def scenarios() -> list[Scenario]:
    out = []
    for fx in load_fixtures():
        key = (fx["criterion"], fx["mechanism"])
        out.append(Scenario(fx["name"], fx["criterion"], fx["mechanism"], SCRIPTS[key],
                            fx["table_cell"], fx["expected"]))
    return out


@dataclass(frozen=True)
class ScenarioResult:
    name: str
    criterion: str
    mechanism: str
    table_cell: str
    observed: str
    expected: str

    @property
    def matches_expected(self) -> bool:
        return self.observed == self.expected

    def to_json(self) -> dict:
        return {
            "scenario": self.name,
            "criterion": self.criterion,
            "mechanism": self.mechanism,
            "table_cell": self.table_cell,
            "observed": self.observed,
            "expected": self.expected,
            "matches_expected": self.matches_expected,
        }


def run_scenario(scenario: Scenario, env: Environment | None = None, seed: int = 0) -> ScenarioResult:
    env = env if env is not None else Environment(seed, scenario.name)
    try:
        observed = scenario.script(env)
    except ToolkitError as exc:
        raise ScenarioPanic(f"{scenario.name}: unexpected {type(exc).__name__}: {exc}") from exc
    return ScenarioResult(scenario.name, scenario.criterion, scenario.mechanism,
                          scenario.table_cell, observed, scenario.expected)


@dataclass
class ComparisonMatrix:
    cells: dict[tuple[str, str], ScenarioResult] = field(default_factory=dict)
    non_executable: list[tuple[str, str]] = field(default_factory=lambda: list(NON_EXECUTABLE))

    @property
    def all_match(self) -> bool:
        return all(r.matches_expected for r in self.cells.values())

    def to_json(self) -> dict:
        ordered = [self.cells[(c, m)] for c in CRITERIA for m in MECHANISMS if (c, m) in self.cells]
        return {
            "schema_version": SCHEMA_VERSION,
            "mechanisms": list(MECHANISMS),
            "criteria": list(CRITERIA),
            "cells": [r.to_json() for r in ordered],
            "non_executable": [{"criterion": c, "note": n} for c, n in self.non_executable],
            "summary": {
                "executable": len(ordered),
                "matching": sum(r.matches_expected for r in ordered),
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        """Aligned plain-text table followed by per-cell observations."""
        header = ["criterion"] + [MECHANISM_TITLES[m] for m in MECHANISMS]
        rows = []
        for c in CRITERIA:
            row = [c]
            for m in MECHANISMS:
                r = self.cells.get((c, m))
                row.append("-" if r is None else ("match" if r.matches_expected else "MISMATCH"))
            rows.append(row)
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]

        def fmt(row):
            return "  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip()
        lines = [fmt(header), fmt(["-" * w for w in widths])] + [fmt(r) for r in rows]
        summary = self.to_json()["summary"]
        lines += ["", f"{summary['matching']}/{summary['executable']} executable cells match", ""]
        for c in CRITERIA:
            for m in MECHANISMS:
                r = self.cells.get((c, m))
                if r is None:
                    continue
                lines.append(f"[{c} / {m}] {r.table_cell}")
                lines.append(f"    observed: {r.observed}")
                if not r.matches_expected:
                    lines.append(f"    expected: {r.expected}")
        lines += ["", "not executed:"]
        lines += [f"  {c}: {n}" for c, n in self.non_executable]
        return "\n".join(lines) + "\n"


def run_matrix(env_seed: int = 0, only: Iterable[str] | None = None) -> ComparisonMatrix:
    wanted = set(only) if only is not None else None
    matrix = ComparisonMatrix()
    for sc in scenarios():
        if wanted is not None and sc.name not in wanted:
            continue
        matrix.cells[(sc.criterion, sc.mechanism)] = run_scenario(sc, seed=env_seed)
    return matrix


def write_outputs(matrix: ComparisonMatrix, out_dir: str | Path, figure: bool = True) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / "matrix.json", "text": out / "matrix.txt"}
    paths["json"].write_text(matrix.dumps(), encoding="utf-8")
    paths["text"].write_text(matrix.to_text(), encoding="utf-8")
    if figure:
        from .plotting import render_matrix

        paths["figure"] = render_matrix(matrix, out / "matrix.png")
    return paths
