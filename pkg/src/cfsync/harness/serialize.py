"""Result rows, plan/assignment files, and the audit checks.

CSV schema (fixed order, one row per measurement):
    experiment,seed,sweep,metric,value,label

Plan files (JSON):
    {"clusters": {"<k>": {"master": id, "members": [ids]}},
     "locations": {"<id>": [x_km, y_km]},
     "dis_max_km": float, "budget": int}

Assignment files (JSON):
    {"pilots": {"<p>": [slave ids]}, "reuse_cap": int}
"""

from __future__ import annotations

import csv
import hashlib
import json
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..types import ClusterPlan, PilotAssignment

CSV_HEADER = ["experiment", "seed", "sweep", "metric", "value", "label"]


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    seed: int
    sweep: float
    metric: str
    value: float
    label: str

    def as_list(self) -> list[str]:
        return [self.experiment, str(self.seed), f"{self.sweep:.10g}",
                self.metric, f"{self.value:.12g}", self.label]


def write_rows(path, rows: list[ResultRow]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.as_list())


def git_revision(cwd=None) -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], cwd=cwd,
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def write_summary(path, experiment: str, seed: int, config: dict,
                  outputs: list[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "experiment": experiment,
        "seed": seed,
        "git_revision": git_revision(),
        "config_hash": config_hash(config),
        "config": config,
        "outputs": outputs,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_plan(path, plan: ClusterPlan, locations: np.ndarray,
              dis_max_km: float | None = None, budget: int | None = None) -> None:
    doc = {
        "clusters": {str(k): {"master": int(plan.masters[k]),
                              "members": sorted(int(i) for i, c in plan.assignment.items()
                                                if c == k)}
                     for k in sorted(plan.masters)},
        "locations": {str(i): [float(locations[i, 0]), float(locations[i, 1])]
                      for i in sorted(plan.assignment)},
    }
    if dis_max_km is not None:
        doc["dis_max_km"] = float(dis_max_km)
    if budget is not None:
        doc["budget"] = int(budget)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_plan(path) -> tuple[ClusterPlan, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    assignment: dict[int, int] = {}
    masters: dict[int, int] = {}
    for k_str, entry in doc["clusters"].items():
        k = int(k_str)
        masters[k] = int(entry["master"])
        for member in entry["members"]:
            assignment[int(member)] = k
    return ClusterPlan(assignment=assignment, masters=masters), doc


def save_assignment(path, assignment: PilotAssignment) -> None:
    doc = {
        "pilots": {str(p): sorted(int(i) for i in members)
                   for p, members in sorted(assignment.groups.items())},
        "reuse_cap": int(assignment.reuse_cap),
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_assignment(path) -> PilotAssignment:
    with open(path) as fh:
        doc = json.load(fh)
    groups = {int(p): [int(i) for i in members]
              for p, members in doc["pilots"].items()}
    # bypass the dataclass cap check here: the audit reports violations
    # instead of refusing to read the file
    obj = object.__new__(PilotAssignment)
    object.__setattr__(obj, "groups", groups)
    object.__setattr__(obj, "reuse_cap", int(doc["reuse_cap"]))
    return obj


@dataclass(frozen=True)
class AuditReport:
    passed: bool
    failures: list[str]

    def text(self) -> str:
        if self.passed:
            return "audit: PASS"
        return "audit: FAIL\n" + "\n".join(f"  - {f}" for f in self.failures)


def audit_files(plan_path, assignment_path, budget: int | None = None) -> AuditReport:
    """Re-validate the sharing rules, the distance bound, and the budget
    from serialized files; parse errors surface with line numbers."""
    try:
        plan, plan_doc = load_plan(plan_path)
    except json.JSONDecodeError as err:
        return AuditReport(False, [f"{plan_path}: parse error at line {err.lineno}, "
                                   f"column {err.colno}: {err.msg}"])
    try:
        assignment = load_assignment(assignment_path)
    except json.JSONDecodeError as err:
        return AuditReport(False, [f"{assignment_path}: parse error at line "
                                   f"{err.lineno}, column {err.colno}: {err.msg}"])

    failures: list[str] = []
    slaves = set(plan.all_slaves())
    assigned = [i for members in assignment.groups.values() for i in members]
    if len(assigned) != len(set(assigned)):
        failures.append("a slave appears under more than one pilot")
    missing = slaves.difference(assigned)
    if missing:
        failures.append(f"slaves without a pilot: {sorted(missing)}")

    for p, members in assignment.groups.items():
        clusters_seen: dict[int, int] = {}
        for i in members:
            k = plan.assignment.get(i)
            if k is None:
                failures.append(f"pilot {p}: unknown AP {i}")
                continue
            if k in clusters_seen:
                failures.append(
                    f"same-cluster sharing rule violated: pilot {p} carries slaves "
                    f"{clusters_seen[k]} and {i} of cluster {k}")
            clusters_seen[k] = i
        if len(members) > assignment.reuse_cap:
            failures.append(
                f"reuse-cap rule violated: pilot {p} reused {len(members)} times "
                f"with cap {assignment.reuse_cap}")

    dis_max = plan_doc.get("dis_max_km")
    locations = plan_doc.get("locations", {})
    if dis_max is not None and locations:
        for k in sorted(plan.masters):
            mx, my = locations[str(plan.masters[k])]
            for i in plan.slaves_of(k):
                sx, sy = locations[str(i)]
                d = float(np.hypot(sx - mx, sy - my))
                if d > dis_max + 1e-12:
                    failures.append(
                        f"distance bound violated: slave {i} is {d:.4f} km from "
                        f"master {plan.masters[k]} (bound {dis_max:.4f} km)")

    budget = budget if budget is not None else plan_doc.get("budget")
    if budget is not None:
        overhead = 2 * plan.num_clusters + assignment.num_pilots
        if overhead > budget:
            failures.append(f"overhead budget violated: 2*{plan.num_clusters} + "
                            f"{assignment.num_pilots} = {overhead} > {budget}")
    return AuditReport(passed=not failures, failures=failures)
