"""Experiment runners behind the figure and audit subcommands.

Each runner is bit-reproducible from (config, seed): every random stream is
derived from the experiment seed plus fixed salts, and rows come out in a
deterministic order.  Baseline implementations (hub, random masters,
hierarchical clustering, interference-aware coloring) live here because
they are comparison points, not part of the optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .. import clustering, crb, kernels, mle, pilots, waveform
from ..geometry import SystemModel, reference_channel
from ..types import (ClusterPlan, DegenerateGeometryError, InterfererStat,
                     LinkChannel, ObservationWindow, PilotSequence, Scenario,
                     SyncOffset)
from .serialize import ResultRow

EXPERIMENTS = ("fig3", "fig4", "fig5", "fig6", "fig7")

_NOISE_SALT = 31
_TRIAL_SALT = 37
_MASTER_SALT = 41


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs of one experiment run; flags and config files both map here."""

    experiment: str
    seed: int = 0
    num_trials: int = 100
    sweep: tuple[float, ...] = ()
    budgets: tuple[int, ...] = ()
    num_seeds: int = 100
    snr_min_db: float = 0.0
    snr_max_db: float = 30.0
    snr_points: int = 7
    scenario: Scenario = field(default_factory=Scenario)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; "
                             f"choose from {EXPERIMENTS}")
        if self.num_trials < 1:
            raise ValueError("need at least one trial")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        scenario = Scenario(**doc.pop("scenario", {}))
        for key in ("sweep", "budgets"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(scenario=scenario, **doc)

    def to_dict(self) -> dict:
        doc = {k: v for k, v in self.__dict__.items() if k != "scenario"}
        doc["sweep"] = list(self.sweep)
        doc["budgets"] = list(self.budgets)
        doc["scenario"] = dict(self.scenario.__dict__)
        return doc


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    runner = {
        "fig3": run_fig_d_elements,
        "fig4": run_fig_contamination_power,
        "fig5": run_fig_crb_ml,
        "fig6": run_fig_cluster_compare,
        "fig7": run_fig_pilot_sharing,
    }[config.experiment]
    return runner(config)


# ---------------------------------------------------------------------------
# derived-vs-Monte-Carlo checks of the contamination statistics


def mc_contamination_estimate(pilot: PilotSequence, main_delay_frac: float,
                              eta: int, main_gain: float, num_samples: int,
                              num_draws: int, rng_seed,
                              batches: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo mean and standard error of the contamination diagonal.

    Draws (TO, CFO, fade) from the priors; the CFO phase has unit modulus
    and cannot move the diagonal, so only its draw order is preserved.
    Batching yields the per-sample standard error.
    """
    rng = np.random.default_rng(rng_seed)
    per_batch = num_draws // batches
    means = np.zeros((batches, num_samples))
    for b in range(batches):
        taus = rng.uniform(0.0, eta, per_batch)
        _cfos = rng.uniform(-1.0, 1.0, per_batch)
        psi = rng.standard_normal(per_batch) ** 2 + rng.standard_normal(per_batch) ** 2
        means[b] = kernels.mc_contamination_diag(pilot.chips, taus, psi / 2.0,
                                                 main_delay_frac, num_samples)
    mean = means.mean(axis=0) * main_gain
    stderr = means.std(axis=0, ddof=1) / math.sqrt(batches) * main_gain
    return mean, stderr


def run_fig_d_elements(config: ExperimentConfig) -> list[ResultRow]:
    """Derived contamination-diagonal entries against Monte-Carlo estimates
    for a grid of delay fractions, TO bounds, and pilot lengths."""
    sc = config.scenario
    rows: list[ResultRow] = []
    fractions = config.sweep or (0.0, 0.3, 0.7)
    etas = (1, 2, 3)
    lengths = (sc.pilot_len // 4, sc.pilot_len)
    for n_len in lengths:
        pilot = PilotSequence.random_bpsk(n_len, np.random.SeedSequence(
            [config.seed, 3, n_len]), chip_interval_s=sc.chip_interval_s)
        for frac in fractions:
            for eta in etas:
                m = ObservationWindow.covering(n_len, eta, 1.0).num_samples
                derived = crb.contamination_diag(
                    pilot, crb.delay_second_moment(frac, eta), 1.0, m)
                mc, se = mc_contamination_estimate(
                    pilot, frac, eta, 1.0, m, config.num_trials,
                    np.random.SeedSequence([config.seed, _TRIAL_SALT, n_len,
                                            int(frac * 1000), eta]))
                label = f"c={frac:g},eta={eta},N={n_len}"
                idx = np.linspace(eta + 3, n_len, 8, dtype=int)
                for n in idx:
                    rows.append(ResultRow(config.experiment, config.seed, float(n),
                                          "derived", float(derived[n]), label))
                    rows.append(ResultRow(config.experiment, config.seed, float(n),
                                          "mc_estimate", float(mc[n]), label))
                    rows.append(ResultRow(config.experiment, config.seed, float(n),
                                          "mc_stderr", float(se[n]), label))
    return rows


def run_fig_contamination_power(config: ExperimentConfig) -> list[ResultRow]:
    """Total contamination power versus interferer distance for several
    pilot lengths, derived and Monte-Carlo."""
    sc = config.scenario
    from ..geometry import beta_from_distance
    rows: list[ResultRow] = []
    distances = config.sweep or (0.06, 0.09, 0.12, 0.15, 0.18, 0.21)
    for n_len in (sc.pilot_len // 4, sc.pilot_len // 2, sc.pilot_len):
        pilot = PilotSequence.random_bpsk(n_len, np.random.SeedSequence(
            [config.seed, 4, n_len]), chip_interval_s=sc.chip_interval_s)
        eta = sc.to_bound_chips
        m = ObservationWindow.covering(n_len, eta, 1.0).num_samples
        for d_km in distances:
            gain = sc.tx_power_w * beta_from_distance(float(d_km), sc)
            c_frac = (d_km / 299792.458) / sc.chip_interval_s
            derived = crb.contamination_diag(
                pilot, crb.delay_second_moment(c_frac, eta), gain, m)
            mc, _se = mc_contamination_estimate(
                pilot, c_frac, eta, gain, m, config.num_trials,
                np.random.SeedSequence([config.seed, _TRIAL_SALT, n_len,
                                        int(d_km * 1e4)]))
            label = f"N={n_len}"
            rows.append(ResultRow(config.experiment, config.seed, float(d_km),
                                  "derived_power", float(derived.sum()), label))
            rows.append(ResultRow(config.experiment, config.seed, float(d_km),
                                  "mc_power", float(mc.sum()), label))
    return rows


# ---------------------------------------------------------------------------
# bound-versus-estimator sweep on the fixed multipath profile

FIXTURE_TRUE_TO_CHIPS = 1.45        # fractional part sits in the identifiable band
FIXTURE_TRUE_CFO_NORM = 0.11
FIXTURE_CFO_BOUND_NORM = 0.25       # estimator prior: within one phase period
FIXTURE_INTERFERER_RATIO = 0.3
FIXTURE_INTERFERER_DELAY = 0.3


def fig5_setup(scenario: Scenario):
    """Channel, true offset, window, and grid of the estimator sweep."""
    channel = reference_channel(scenario.chip_interval_s)
    offset = SyncOffset.from_normalized(
        FIXTURE_TRUE_CFO_NORM, FIXTURE_TRUE_TO_CHIPS, FIXTURE_CFO_BOUND_NORM,
        scenario.to_bound_chips, scenario.chip_interval_s)
    delays = channel.delay_chips(scenario.chip_interval_s)
    window = ObservationWindow.covering(scenario.pilot_len,
                                        scenario.to_bound_chips,
                                        float(np.max(delays)) + 1.0)
    grid = mle.GridSpec.from_prior(offset, points=64, refine_levels=7)
    return channel, offset, window, grid


def fig5_noise_power(pilot: PilotSequence, channel: LinkChannel,
                     window: ObservationWindow, snr_db: float) -> float:
    """Noise power hitting a target SNR, defined as the main-path burst
    energy over M sigma^2 (the contamination-free SINR definition)."""
    trace = crb.closed_form_trace(pilot, channel.large_scale)
    return trace / (window.num_samples * 10.0 ** (snr_db / 10.0))


def _fig5_interferer(scenario: Scenario, channel: LinkChannel) -> InterfererStat:
    return InterfererStat(
        main_gain=FIXTURE_INTERFERER_RATIO * channel.large_scale,
        main_delay_chips=FIXTURE_INTERFERER_DELAY)


def _fig5_crb(pilot, channel, offset, window, sigma2, scenario,
              contaminated: bool):
    stats = [_fig5_interferer(scenario, channel)] if contaminated else []
    return crb.pair_crb(pilot, channel, offset, stats, sigma2, window=window,
                        contamination_eta=scenario.to_bound_chips)


def _fig5_trial_rx(pilot, channel, offset, window, sigma2, scenario,
                   contaminated: bool, rng: np.random.Generator,
                   noise_seed) -> np.ndarray:
    interferers = []
    if contaminated:
        stat = _fig5_interferer(scenario, channel)
        psi = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2.0)
        ich = LinkChannel.single_path(gain=1.0, large_scale=stat.main_gain,
                                      delay_s=stat.main_delay_chips * scenario.chip_interval_s,
                                      fade=psi)
        ioff = SyncOffset.from_normalized(
            float(rng.uniform(-scenario.cfo_bound_norm, scenario.cfo_bound_norm)),
            float(rng.uniform(0.0, scenario.to_bound_chips)),
            scenario.cfo_bound_norm, scenario.to_bound_chips,
            scenario.chip_interval_s)
        interferers.append((ioff, ich))
    return waveform.synthesize_rx((offset, channel), interferers, pilot, window,
                                  sigma2, noise_seed)


def run_fig_crb_ml(config: ExperimentConfig) -> list[ResultRow]:
    """Bounds and estimator MSE over an SNR sweep, with and without one
    shared-pilot interferer."""
    sc = config.scenario
    pilot = sc.pilot()
    channel, offset, window, grid = fig5_setup(sc)
    delays = channel.delay_chips(sc.chip_interval_s)
    snrs = config.sweep or tuple(np.linspace(config.snr_min_db, config.snr_max_db,
                                             config.snr_points))
    rows: list[ResultRow] = []
    for label, contaminated in (("clean", False), ("contaminated", True)):
        for snr_db in snrs:
            sigma2 = fig5_noise_power(pilot, channel, window, float(snr_db))
            report = _fig5_crb(pilot, channel, offset, window, sigma2, sc,
                               contaminated)
            rows.append(ResultRow(config.experiment, config.seed, float(snr_db),
                                  "crb_to", report.crb_to_chips, label))
            rows.append(ResultRow(config.experiment, config.seed, float(snr_db),
                                  "crb_cfo", report.crb_cfo_norm, label))
            err_to = np.zeros(config.num_trials)
            err_cfo = np.zeros(config.num_trials)
            for trial in range(config.num_trials):
                seq = np.random.SeedSequence([config.seed, _TRIAL_SALT,
                                              int(contaminated),
                                              int(round(float(snr_db) * 100)), trial])
                rng = np.random.default_rng(seq)
                y = _fig5_trial_rx(pilot, channel, offset, window, sigma2, sc,
                                   contaminated, rng,
                                   seq.spawn(1)[0])
                est = mle.ml_estimate(y, grid, pilot, delays, window)
                err_to[trial] = (est.to_chips_hat - offset.to_chips) ** 2
                err_cfo[trial] = (est.cfo_norm_hat - offset.cfo_norm) ** 2
            for name, err in (("mse_to", err_to), ("mse_cfo", err_cfo)):
                rows.append(ResultRow(config.experiment, config.seed, float(snr_db),
                                      name, float(err.mean()), label))
                rows.append(ResultRow(config.experiment, config.seed, float(snr_db),
                                      name + "_se",
                                      float(err.std(ddof=1) / math.sqrt(err.size)),
                                      label))
    return rows


# ---------------------------------------------------------------------------
# clustering and pilot-sharing comparisons

HUB_LOCATION_KM = (0.0, 0.0)


def hub_sum_crb(system: SystemModel) -> float:
    """Every AP estimated directly at a hub in the area corner, orthogonal
    pilots (the no-clustering baseline)."""
    sc = system.scenario
    total = 0.0
    virtual_master = sc.num_aps
    for ap in range(sc.num_aps):
        offset = pilots._pair_offset(sc, ap, virtual_master)
        last: Exception | None = None
        for variant in range(16):
            ch = system.channel_to_point(ap, HUB_LOCATION_KM, variant)
            try:
                report = crb.pair_crb(system.pilot, ch, offset, [],
                                      sc.noise_sigma2, window=system.window,
                                      contamination_eta=sc.to_bound_chips)
            except DegenerateGeometryError as err:
                last = err
                continue
            if report.condition_number <= 1e9:
                total += report.crb_to_chips + report.crb_cfo_norm
                break
        else:
            raise DegenerateGeometryError(
                f"no identifiable channel realization for hub link {ap}") from last
    return total


def orthogonal_sum_crb(system: SystemModel, plan: ClusterPlan) -> float:
    """Sum of per-pair bounds with every slave on its own pilot."""
    total = 0.0
    for slave in plan.all_slaves():
        total += pilots.pair_crb_metric(system, slave, plan.master_of(slave), [])
    return total


def randomize_masters(plan: ClusterPlan, locations: np.ndarray,
                      rng_seed) -> ClusterPlan:
    """Same clusters, masters drawn uniformly per cluster."""
    rng = np.random.default_rng(np.random.SeedSequence([_seed_int(rng_seed),
                                                        _MASTER_SALT]))
    masters = {}
    max_dist = {}
    for k in sorted(plan.masters):
        members = sorted(i for i, c in plan.assignment.items() if c == k)
        master = int(members[rng.integers(len(members))])
        masters[k] = master
        others = [i for i in members if i != master]
        if others:
            d = np.sqrt(np.sum((locations[others] - locations[master]) ** 2, axis=1))
            max_dist[k] = float(np.max(d))
        else:
            max_dist[k] = 0.0
    return ClusterPlan(assignment=dict(plan.assignment), masters=masters,
                       per_cluster_max_dist_km=max_dist)


def hierarchical_plan(locations: np.ndarray, kc: int) -> ClusterPlan:
    """Complete-linkage agglomerative clusters cut at kc, medoid masters."""
    labels = fcluster(linkage(locations, method="complete"), kc,
                      criterion="maxclust") - 1
    assignment = {int(i): int(labels[i]) for i in range(len(labels))}
    masters = {}
    max_dist = {}
    for k in sorted(set(labels)):
        ids = np.flatnonzero(labels == k)
        master = clustering.select_master(locations[ids], ids.tolist())
        masters[int(k)] = master
        others = [i for i in ids if i != master]
        if others:
            d = np.sqrt(np.sum((locations[others] - locations[master]) ** 2, axis=1))
            max_dist[int(k)] = float(np.max(d))
        else:
            max_dist[int(k)] = 0.0
    return ClusterPlan(assignment=assignment, masters=masters,
                       per_cluster_max_dist_km=max_dist)


def adaptive_plan(system: SystemModel, rng_seed) -> ClusterPlan:
    dis = clustering.max_intra_distance(system.scenario.sinr_min_db,
                                        system.pilot, system.scenario,
                                        system.window)
    return clustering.adaptive_clusters(system.locations, dis,
                                        system.scenario.overhead_budget, rng_seed)


def run_fig_cluster_compare(config: ExperimentConfig) -> list[ResultRow]:
    """Sum of bounds versus AP count for the proposed clustering and the
    hub / random-master / hierarchical baselines, orthogonal pilots."""
    ks = tuple(int(k) for k in (config.sweep or (20, 40)))
    rows: list[ResultRow] = []
    sums: dict[tuple[int, str], list[float]] = {}
    for k in ks:
        for rep in range(config.num_seeds):
            seed = config.seed + 7919 * rep + k
            sc = replace(config.scenario, num_aps=k, rng_seed=seed)
            system = SystemModel.from_scenario(sc)
            plan = adaptive_plan(system, seed)
            kc = plan.num_clusters
            methods = {
                "proposed": lambda: orthogonal_sum_crb(system, plan),
                "benchmark1_hub": lambda: hub_sum_crb(system),
                "benchmark2_random_master": lambda: orthogonal_sum_crb(
                    system, randomize_masters(
                        clustering.cluster_at(system.locations, kc, seed),
                        system.locations, seed)),
                "benchmark3_hierarchical": lambda: orthogonal_sum_crb(
                    system, hierarchical_plan(system.locations, kc)),
            }
            for name, fn in methods.items():
                value = fn()
                rows.append(ResultRow(config.experiment, seed, float(k),
                                      "sum_crb", value, name))
                sums.setdefault((k, name), []).append(value)
    for (k, name), values in sorted(sums.items()):
        rows.append(ResultRow(config.experiment, config.seed, float(k),
                              "sum_crb_mean", float(np.mean(values)), name))
    return rows


def distance_aware_dsatur(system: SystemModel, plan: ClusterPlan,
                          reuse_cap: int) -> pilots.PilotAssignment:
    """Dsatur variant that, among admissible colors, joins the group adding
    the least interference at the vertex's master (the improved-coloring
    baseline)."""
    conflict = pilots.conflict_matrix(plan)
    slaves = conflict.slave_ids
    b = conflict.matrix
    n = len(slaves)
    masters = {s: plan.master_of(s) for s in slaves}
    color = np.full(n, -1, dtype=np.int64)
    degree = b.sum(axis=1)
    groups: list[list[int]] = []
    for _ in range(n):
        best_v, best_key = -1, None
        for v in range(n):
            if color[v] >= 0:
                continue
            sat = len({int(color[u]) for u in np.flatnonzero(b[v]) if color[u] >= 0})
            key = (sat, degree[v], -v)
            if best_key is None or key > best_key:
                best_v, best_key = v, key
        neighbor = {int(color[u]) for u in np.flatnonzero(b[best_v]) if color[u] >= 0}
        master = masters[slaves[best_v]]
        best_c, best_cost = -1, None
        for c, members in enumerate(groups):
            if c in neighbor or len(members) >= reuse_cap:
                continue
            cost = sum(system.main_gain(slaves[u], master) for u in members)
            if best_cost is None or cost < best_cost:
                best_c, best_cost = c, cost
        if best_c < 0:
            best_c = len(groups)
            groups.append([])
        groups[best_c].append(best_v)
        color[best_v] = best_c
    return pilots.PilotAssignment(
        groups={c: [slaves[v] for v in members] for c, members in enumerate(groups)},
        reuse_cap=reuse_cap)


def _dsatur_baseline(system: SystemModel, plan: ClusterPlan,
                     distance_aware: bool = False):
    slaves = plan.all_slaves()
    tau0 = max(len(plan.slaves_of(k)) for k in plan.masters)
    cap0 = math.ceil(len(slaves) / tau0)
    if distance_aware:
        return distance_aware_dsatur(system, plan, cap0)
    return pilots.dsatur_color(pilots.conflict_matrix(plan), cap0)


def run_fig_pilot_sharing(config: ExperimentConfig) -> list[ResultRow]:
    """Sum of bounds and total overhead versus AP count for the joint
    optimizer and the four fixed-recipe baselines."""
    ks = tuple(int(k) for k in (config.sweep or (20, 28, 36, 44, 52, 60)))
    budgets = tuple(config.budgets or (25, 28, 31, 34, 37, 40))
    if len(budgets) != len(ks):
        raise ValueError("sweep and budgets must pair up")
    rows: list[ResultRow] = []
    agg: dict[tuple[int, str, str], list[float]] = {}
    for k, budget in zip(ks, budgets):
        for rep in range(config.num_seeds):
            seed = config.seed + 104729 * rep + k
            sc = replace(config.scenario, num_aps=k, rng_seed=seed,
                         overhead_budget=budget)
            system = SystemModel.from_scenario(sc)
            results: dict[str, tuple[float, int]] = {}

            res = pilots.optimize_all(sc, seed)
            results["proposed"] = (res.sum_crb, res.overhead)

            results["scheme1_hub_orthogonal"] = (hub_sum_crb(system), k)

            plan3 = adaptive_plan(system, seed)
            a3 = _dsatur_baseline(system, plan3)
            results["scheme3_dsatur"] = (
                pilots.plan_sum_crb(system, plan3, a3),
                2 * plan3.num_clusters + a3.num_pilots)

            plan2 = randomize_masters(
                clustering.cluster_at(system.locations, plan3.num_clusters, seed),
                system.locations, seed)
            a2 = _dsatur_baseline(system, plan2)
            results["scheme2_random_master_dsatur"] = (
                pilots.plan_sum_crb(system, plan2, a2),
                2 * plan2.num_clusters + a2.num_pilots)

            plan4 = hierarchical_plan(system.locations, plan3.num_clusters)
            a4 = _dsatur_baseline(system, plan4, distance_aware=True)
            results["scheme4_hierarchical_improved"] = (
                pilots.plan_sum_crb(system, plan4, a4),
                2 * plan4.num_clusters + a4.num_pilots)

            for name, (crb_sum, overhead) in results.items():
                rows.append(ResultRow(config.experiment, seed, float(k),
                                      "sum_crb", crb_sum, name))
                rows.append(ResultRow(config.experiment, seed, float(k),
                                      "overhead", float(overhead), name))
                agg.setdefault((k, name, "sum_crb_mean"), []).append(crb_sum)
                agg.setdefault((k, name, "overhead_mean"), []).append(float(overhead))
    for (k, name, metric), values in sorted(agg.items()):
        rows.append(ResultRow(config.experiment, config.seed, float(k),
                              metric, float(np.mean(values)), name))
    return rows


def _seed_int(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    raise TypeError("experiment seeds must be plain integers")
