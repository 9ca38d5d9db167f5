"""Pilot-sharing optimization under a total overhead budget.

Sharing rules: slaves of one cluster never share a pilot, and a pilot is
reused at most ceil(|slaves| / tau) times at a pilot count of tau.  A
Dsatur coloring of the cluster-conflict graph seeds a swap-matching chain
(sigmoid acceptance on the sum-SINR objective, best-seen tracking); the
pilot count then escalates one sequence at a time, parking the lowest-SINR
slaves on the fresh pilot, until the budget 2 * clusters + tau is spent.
The outer loop scans cluster counts and keeps the plan/assignment pair
with the lowest evaluated sum of bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import clustering, crb, kernels
from .geometry import SystemModel
from .types import (ClusterPlan, ConflictMatrix, DegenerateGeometryError,
                    InfeasibleError, InterfererStat, PilotAssignment, Scenario,
                    SyncOffset)

__all__ = ["conflict_matrix", "dsatur_color", "pair_sinr",
           "assignment_objective", "swap_probability", "swap_matching_search",
           "optimize_all", "plan_sum_crb", "OptimizeResult"]

_SEARCH_SALT = 23
_PAIR_CRB_SALT = 29
_PAIR_BUFFER_FACTOR = 16


def conflict_matrix(plan: ClusterPlan) -> ConflictMatrix:
    """Slave-slave conflicts: 1 exactly when two distinct slaves share a
    cluster (and therefore must hold different pilots)."""
    slaves = plan.all_slaves()
    n = len(slaves)
    b = np.zeros((n, n), dtype=np.int8)
    for i in range(n):
        for j in range(i + 1, n):
            if plan.assignment[slaves[i]] == plan.assignment[slaves[j]]:
                b[i, j] = b[j, i] = 1
    return ConflictMatrix(matrix=b, slave_ids=slaves)


def dsatur_color(conflict: ConflictMatrix, reuse_cap: int) -> PilotAssignment:
    """Greedy saturation-order coloring under the reuse cap.

    Vertices are picked by highest saturation (distinct neighbor colors),
    ties by degree then lowest index; each gets the smallest color that is
    conflict-free and not yet full, opening a new color when all are full.
    """
    if reuse_cap < 1:
        raise ValueError("reuse cap must be at least 1")
    b = conflict.matrix
    n = len(conflict.slave_ids)
    color = np.full(n, -1, dtype=np.int64)
    degree = b.sum(axis=1)
    group_size: list[int] = []
    for _ in range(n):
        best_v, best_key = -1, None
        for v in range(n):
            if color[v] >= 0:
                continue
            sat = len({int(color[u]) for u in np.flatnonzero(b[v]) if color[u] >= 0})
            key = (sat, degree[v], -v)
            if best_key is None or key > best_key:
                best_v, best_key = v, key
        neighbor_colors = {int(color[u]) for u in np.flatnonzero(b[best_v]) if color[u] >= 0}
        chosen = -1
        for c in range(len(group_size)):
            if c not in neighbor_colors and group_size[c] < reuse_cap:
                chosen = c
                break
        if chosen < 0:
            chosen = len(group_size)
            group_size.append(0)
        color[best_v] = chosen
        group_size[chosen] += 1
    groups = {c: [conflict.slave_ids[v] for v in np.flatnonzero(color == c)]
              for c in range(len(group_size))}
    return PilotAssignment(groups=groups, reuse_cap=reuse_cap)


@dataclass(frozen=True)
class _SearchTables:
    """Per-plan precomputation for SINR arithmetic on slave indices."""

    slaves: list[int]
    cluster: np.ndarray          # cluster index per slave position
    desired: np.ndarray          # closed-form trace of the wanted link
    interference: np.ndarray     # [i, j]: trace of slave j's burst at i's master
    noise_floor: float
    req_linear: np.ndarray

    @classmethod
    def build(cls, system: SystemModel, plan: ClusterPlan,
              per_pair_req_db: dict[int, float] | None = None) -> "_SearchTables":
        slaves = plan.all_slaves()
        n = len(slaves)
        cluster = np.array([plan.assignment[i] for i in slaves], dtype=np.int64)
        desired = np.zeros(n)
        interference = np.zeros((n, n))
        for i, si in enumerate(slaves):
            master = plan.master_of(si)
            desired[i] = crb.closed_form_trace(system.pilot, system.main_gain(si, master))
            for j, sj in enumerate(slaves):
                if j != i:
                    interference[i, j] = crb.closed_form_trace(
                        system.pilot, system.main_gain(sj, master))
        req_db = np.full(n, system.scenario.sinr_min_db)
        if per_pair_req_db:
            for i, si in enumerate(slaves):
                if si in per_pair_req_db:
                    req_db[i] = per_pair_req_db[si]
        return cls(slaves=slaves, cluster=cluster, desired=desired,
                   interference=interference, noise_floor=system.noise_floor(),
                   req_linear=10.0 ** (req_db / 10.0))

    def pilot_vector(self, assignment: PilotAssignment) -> np.ndarray:
        pos = {s: i for i, s in enumerate(self.slaves)}
        vec = np.full(len(self.slaves), -1, dtype=np.int64)
        for p, members in assignment.groups.items():
            for s in members:
                vec[pos[s]] = p
        if np.any(vec < 0):
            raise ValueError("assignment does not cover every slave of the plan")
        return vec

    def sinr_linear(self, pilot_vec: np.ndarray) -> np.ndarray:
        same = pilot_vec[:, None] == pilot_vec[None, :]
        np.fill_diagonal(same, False)
        interf = np.sum(self.interference * same, axis=1)
        return self.desired / (interf + self.noise_floor)


def pair_sinr(assignment: PilotAssignment, system: SystemModel,
              plan: ClusterPlan) -> dict[int, float]:
    """Linear SINR of each slave at its master under the given sharing:
    desired trace over co-pilot interference traces plus the noise term."""
    tables = _SearchTables.build(system, plan)
    vec = tables.pilot_vector(assignment)
    sinr = tables.sinr_linear(vec)
    return {s: float(sinr[i]) for i, s in enumerate(tables.slaves)}


def assignment_objective(assignment: PilotAssignment, system: SystemModel,
                         plan: ClusterPlan,
                         per_pair_req_db: dict[int, float] | None = None) -> float:
    """Sum of linear SINRs when every slave meets its requirement, else 0."""
    tables = _SearchTables.build(system, plan, per_pair_req_db)
    vec = tables.pilot_vector(assignment)
    sinr = tables.sinr_linear(vec)
    if np.any(sinr < tables.req_linear):
        return 0.0
    return float(np.sum(sinr))


def swap_probability(obj_new: float, obj_old: float, temperature: float) -> float:
    """Sigmoid acceptance probability of a swap proposal."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return 1.0 / (1.0 + math.exp(-temperature * (obj_new - obj_old)))


def _groups_from_vector(tables: _SearchTables, vec: np.ndarray) -> dict[int, list[int]]:
    used = sorted({int(p) for p in vec})
    relabel = {p: c for c, p in enumerate(used)}
    groups: dict[int, list[int]] = {c: [] for c in range(len(used))}
    for i, s in enumerate(tables.slaves):
        groups[relabel[int(vec[i])]].append(s)
    return groups


def _assignment_from_vector(tables: _SearchTables, vec: np.ndarray,
                            cap: int) -> PilotAssignment:
    return PilotAssignment(groups=_groups_from_vector(tables, vec), reuse_cap=cap)


def _vector_valid(tables: _SearchTables, vec: np.ndarray, cap: int) -> bool:
    for p in np.unique(vec):
        members = np.flatnonzero(vec == p)
        if members.size > cap:
            return False
        if len({int(tables.cluster[i]) for i in members}) != members.size:
            return False
    return True


def _shaped_objective(tables: _SearchTables, vec: np.ndarray) -> float:
    """Chain score: printed sum on feasible states, requirement-truncated
    sum below that on infeasible ones."""
    sinr = tables.sinr_linear(vec)
    if np.all(sinr >= tables.req_linear):
        return float(np.sum(sinr))
    return float(np.sum(np.minimum(sinr, tables.req_linear)))


def _repair_violations(tables: _SearchTables, vec: np.ndarray, cap: int,
                       max_rounds: int = 6) -> np.ndarray:
    """Deterministic local sweep toward requirement feasibility.

    The acceptance chain is a nearly unbiased walk (small per-swap score
    differences under the printed temperature), so after each level the
    below-requirement slaves get a greedy pass: try every rule-preserving
    swap and every relocation into an under-cap conflict-free group, apply
    the best strict improvement of the shaped score.  Candidate moves are
    scored incrementally on the slaves whose groups change.  Stops at
    feasibility or a fixed point.
    """
    vec = vec.copy()
    n = vec.size
    t = tables.interference
    req = tables.req_linear
    noise = tables.noise_floor

    def trunc_of(i, members):
        others = members[members != i]
        value = tables.desired[i] / (t[i, others].sum() + noise)
        return min(value, req[i])

    def move_delta(v, gv, gq):
        # relocate v from its group gv into gq; shaped-score delta over the
        # slaves whose co-pilot sets change
        delta = -trunc[v] + trunc_of(v, np.append(gq, v))
        for i in gv:
            if i != v:
                delta += trunc_of(i, gv[gv != v]) - trunc[i]
        for i in gq:
            delta += trunc_of(i, np.append(gq, v)) - trunc[i]
        return delta

    def swap_delta(v, gv, partner, gp):
        new_gv = np.append(gv[gv != v], partner)
        new_gp = np.append(gp[gp != partner], v)
        delta = 0.0
        for i in new_gv:
            delta += trunc_of(i, new_gv) - trunc[i]
        for i in new_gp:
            delta += trunc_of(i, new_gp) - trunc[i]
        return delta

    for round_idx in range(max_rounds):
        sinr = tables.sinr_linear(vec)
        trunc = np.minimum(sinr, req)
        violating = [i for i in np.argsort(sinr, kind="stable")
                     if sinr[i] < req[i]]
        if not violating:
            return vec
        improved = False
        groups = {int(p): np.flatnonzero(vec == p) for p in np.unique(vec)}
        for v in violating:
            gv = groups[int(vec[v])]
            best_apply, best_delta = None, 1e-12
            for p, gq in groups.items():
                if p == vec[v] or gq.size >= cap:
                    continue
                if not np.any(tables.cluster[gq] == tables.cluster[v]):
                    delta = move_delta(v, gv, gq)
                    if delta > best_delta:
                        best_apply, best_delta = ("move", v, p), delta
                # evicting one of the violator's co-pilots helps it too
                for c in gv:
                    if c == v or gq.size >= cap:
                        continue
                    if np.any(tables.cluster[gq] == tables.cluster[c]):
                        continue
                    delta = move_delta(int(c), gv, gq)
                    if delta > best_delta:
                        best_apply, best_delta = ("move", int(c), p), delta
            if best_apply is None and round_idx > 0:
                # moves exhausted: scan rule-preserving swaps (rare path)
                for partner in range(n):
                    if vec[partner] == vec[v]:
                        continue
                    gp = groups[int(vec[partner])]
                    if np.any(tables.cluster[gp[gp != partner]] == tables.cluster[v]):
                        continue
                    if np.any(tables.cluster[gv[gv != v]] == tables.cluster[partner]):
                        continue
                    delta = swap_delta(v, gv, partner, gp)
                    if delta > best_delta:
                        best_apply, best_delta = ("swap", v, partner), delta
            if best_apply is not None:
                kind, mover, target = best_apply
                if kind == "swap":
                    vec[mover], vec[target] = vec[target], vec[mover]
                else:
                    vec[mover] = target
                improved = True
                sinr = tables.sinr_linear(vec)
                trunc = np.minimum(sinr, req)
                groups = {int(p): np.flatnonzero(vec == p) for p in np.unique(vec)}
        if not improved:
            break
    return vec


def _escalate(tables: _SearchTables, vec: np.ndarray, new_pilot: int, cap_new: int,
              rng: np.random.Generator) -> np.ndarray | None:
    """Park low-SINR slaves on a fresh pilot, then rebalance to the new cap.

    Movers come from the bottom SINR quartile (sampled without replacement),
    must hold pairwise distinct pilots and pairwise distinct clusters, and
    number cap_new - 1.  Groups left above the tightened cap shed their
    lowest-SINR members into compatible under-full groups; returns None when
    no valid rebalancing is found.
    """
    vec = vec.copy()
    n = vec.size
    sinr = tables.sinr_linear(vec)
    order = np.argsort(sinr, kind="stable")
    quartile = max(int(math.ceil(n / 4)), 1)
    pool = list(order[:quartile])
    rng.shuffle(pool)
    pool.extend(i for i in order[quartile:])
    movers: list[int] = []
    donor_pilots: set[int] = set()
    mover_clusters: set[int] = set()
    for i in pool:
        if len(movers) >= cap_new - 1:
            break
        if int(vec[i]) in donor_pilots or int(tables.cluster[i]) in mover_clusters:
            continue
        movers.append(int(i))
        donor_pilots.add(int(vec[i]))
        mover_clusters.add(int(tables.cluster[i]))
    for i in movers:
        vec[i] = new_pilot

    # rebalance any group that the tightened cap now overflows
    for p in np.unique(vec):
        members = list(np.flatnonzero(vec == p))
        while len(members) > cap_new:
            members.sort(key=lambda i: sinr[i])
            moved = False
            for cand in members:
                targets = []
                for q in range(new_pilot + 1):
                    if q == vec[cand]:
                        continue
                    group_q = np.flatnonzero(vec == q)
                    if group_q.size >= cap_new:
                        continue
                    if any(tables.cluster[g] == tables.cluster[cand] for g in group_q):
                        continue
                    targets.append((group_q.size, q))
                if targets:
                    targets.sort()
                    vec[cand] = targets[0][1]
                    members = list(np.flatnonzero(vec == p))
                    moved = True
                    break
            if not moved:
                return None
    return vec


def swap_matching_search(initial: PilotAssignment, system: SystemModel,
                         plan: ClusterPlan, budget_ls: int,
                         n2_max: int | None = None, rng_seed: int = 0,
                         temperature: float | None = None,
                         per_pair_req_db: dict[int, float] | None = None) -> PilotAssignment:
    """Swap-matching pilot search with pilot-count escalation.

    Runs the acceptance chain at the current pilot count, tracks the best
    assignment seen anywhere, escalates the pilot count (new pilot fed with
    low-SINR slaves) and repeats until the pilot share of the budget is
    exhausted or every slave holds its own pilot.  The returned assignment
    always satisfies both sharing rules for its own pilot count.
    """
    scenario = system.scenario
    n2_max = scenario.swap_iterations if n2_max is None else n2_max
    temperature = scenario.swap_temperature if temperature is None else temperature
    tables = _SearchTables.build(system, plan, per_pair_req_db)
    n = len(tables.slaves)
    kc = plan.num_clusters
    pilot_budget = budget_ls - 2 * kc
    if initial.num_pilots > pilot_budget:
        raise InfeasibleError(
            f"initial coloring needs {initial.num_pilots} pilots but the budget "
            f"leaves {pilot_budget}")
    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed), _SEARCH_SALT]))

    vec = tables.pilot_vector(initial)
    tau = int(np.max(vec)) + 1
    cap = initial.reuse_cap
    best_vec = vec.copy()
    best_cap = cap
    best_obj = -np.inf
    while True:
        pairs = rng.integers(0, n, size=(n2_max * _PAIR_BUFFER_FACTOR, 2))
        uniforms = rng.random(n2_max)
        level_best, level_obj, vec, _acc, _prop = kernels.swap_chain(
            vec, tables.cluster, tables.interference, tables.desired,
            tables.noise_floor, tables.req_linear, tau, pairs, uniforms,
            n2_max, temperature)
        if _vector_valid(tables, level_best, cap) and level_obj > best_obj:
            best_obj = float(level_obj)
            best_vec = np.asarray(level_best).copy()
            best_cap = cap
        vec = np.asarray(vec)
        if pilot_budget - tau <= 3 or tau >= n - 1:
            # near the top of the ladder the walk rarely lands feasibility
            # by itself; force the deterministic sweep there
            vec = _repair_violations(tables, vec, cap)
            repaired_obj = _shaped_objective(tables, vec)
            if _vector_valid(tables, vec, cap) and repaired_obj > best_obj:
                best_obj = repaired_obj
                best_vec = vec.copy()
                best_cap = cap
        tau_next = tau + 1
        if tau_next > pilot_budget or tau_next > n:
            break
        cap_next = math.ceil(n / tau_next)
        escalated = _escalate(tables, np.asarray(vec), tau, cap_next, rng)
        if escalated is None or not _vector_valid(tables, escalated, cap_next):
            break
        vec = escalated
        tau = tau_next
        cap = cap_next
    return _assignment_from_vector(tables, best_vec, best_cap)


def _pair_offset(scenario: Scenario, slave: int, master: int) -> SyncOffset:
    """Seeded true offset for evaluating one pair's bound: TO uniform over
    the prior (away from exact chip alignment), CFO at the prior center
    (the bound is CFO-invariant for a diagonal disturbance).  Keyed to the
    slave so re-pairings stay comparison-paired."""
    del master
    rng = np.random.default_rng(np.random.SeedSequence(
        [int(scenario.rng_seed), _PAIR_CRB_SALT, int(slave)]))
    to = float(rng.uniform(0.02, scenario.to_bound_chips - 0.02))
    return SyncOffset.from_normalized(0.0, to, scenario.cfo_bound_norm,
                                      scenario.to_bound_chips,
                                      scenario.chip_interval_s)


def pair_crb_metric(system: SystemModel, slave: int, master: int,
                    copilots: list[int]) -> float:
    """Sum of the TO and CFO bounds for one estimated pair.

    Tap layouts whose interpolation supports cover exactly one row per tap
    make the timing offset unidentifiable (the Fisher matrix is singular);
    such draws are redrawn with the next channel variant, identically for
    every caller asking about the same pair.
    """
    scenario = system.scenario
    offset = _pair_offset(scenario, slave, master)
    stats = [InterfererStat(main_gain=system.main_gain(j, master),
                            main_delay_chips=system.main_delay_chips(j, master))
             for j in copilots]
    last_error: Exception | None = None
    for variant in range(16):
        channel = system.channel(slave, master, variant)
        try:
            report = crb.pair_crb(system.pilot, channel, offset, stats,
                                  scenario.noise_sigma2, window=system.window,
                                  contamination_eta=scenario.to_bound_chips)
        except DegenerateGeometryError as err:
            last_error = err
            continue
        if report.condition_number <= 1e9:
            return report.crb_to_chips + report.crb_cfo_norm
    raise DegenerateGeometryError(
        f"no identifiable channel realization for pair ({slave}, {master})"
    ) from last_error


def plan_sum_crb(system: SystemModel, plan: ClusterPlan,
                 assignment: PilotAssignment) -> float:
    """Sum over slaves of the per-pair bound under the given sharing."""
    total = 0.0
    for slave in plan.all_slaves():
        master = plan.master_of(slave)
        copilots = assignment.copilots_of(slave)
        total += pair_crb_metric(system, slave, master, copilots)
    return total


@dataclass(frozen=True)
class OptimizeResult:
    plan: ClusterPlan
    assignment: PilotAssignment
    sum_crb: float
    overhead: int


def optimize_all(scenario: Scenario, rng_seed: int | None = None,
                 n2_max: int | None = None) -> OptimizeResult:
    """Joint cluster-count / pilot-sharing search.

    Scans cluster counts upward while the previously returned pilot count
    plus the doubled cluster count stays inside the overhead budget (the
    sequential stopping rule: a budget-exhausting pilot search leaves no
    room to buy more clusters).  Cluster counts whose contamination-free
    SINRs already miss a requirement are skipped without consuming budget
    headroom.  Keeps the requirement-feasible candidate with the lowest
    evaluated sum of bounds; raises when no candidate is feasible.
    """
    seed = scenario.rng_seed if rng_seed is None else int(rng_seed)
    system = SystemModel.from_scenario(scenario, seed)
    budget = scenario.overhead_budget
    best: OptimizeResult | None = None
    tau_prev = 0
    for kc in range(2, scenario.num_aps):
        if tau_prev + 2 * kc > budget or 2 * kc + 1 > budget:
            break
        plan = clustering.cluster_at(system.locations, kc, seed)
        slaves = plan.all_slaves()
        if not slaves:
            continue
        tau0 = max(len(plan.slaves_of(k)) for k in plan.masters)
        if tau0 < 1 or tau0 > budget - 2 * kc:
            continue
        tables = _SearchTables.build(system, plan)
        # contamination-free SINR upper-bounds every assignment: a cluster
        # count whose orthogonal case already misses a requirement is out
        if np.any(tables.desired / tables.noise_floor < tables.req_linear):
            continue
        cap0 = math.ceil(len(slaves) / tau0)
        conflict = conflict_matrix(plan)
        initial = dsatur_color(conflict, cap0)
        if initial.num_pilots > budget - 2 * kc:
            continue
        assignment = swap_matching_search(
            initial, system, plan, budget, n2_max=n2_max,
            rng_seed=seed + 1000003 * kc)
        if assignment_objective(assignment, system, plan) <= 0.0:
            # nothing adopted, nothing spent: an unusable candidate must not
            # throttle the remaining cluster counts
            continue
        tau_prev = assignment.num_pilots
        total = plan_sum_crb(system, plan, assignment)
        overhead = 2 * kc + assignment.num_pilots
        if overhead > budget:
            continue
        if best is None or total < best.sum_crb:
            best = OptimizeResult(plan=plan, assignment=assignment,
                                  sum_crb=total, overhead=overhead)
    if best is None:
        raise InfeasibleError("no cluster count and pilot sharing meets the "
                              "requirements within the overhead budget")
    return best
