"""Adaptive cluster classification and master selection.

The synchronization requirement is carried as a minimum contamination-free
SINR; inverting the far-slope path-loss branch turns it into a maximum
master-slave distance.  Clusters are then grown by repeated K-means runs
with an increasing cluster count until every slave sits within that
distance of its cluster's master (the member minimizing the summed
distance to the others).
"""

from __future__ import annotations

import numpy as np

from . import crb
from .types import (ClusterPlan, DistanceBound, InfeasibleError,
                    ObservationWindow, PilotSequence, Scenario)

__all__ = ["ideal_sinr_db", "max_intra_distance", "kmeans_partition",
           "select_master", "cluster_at", "adaptive_clusters"]

_KMEANS_SALT = 17
_MAX_LLOYD_ITER = 200
_RESEED_CAP = 8


def ideal_sinr_db(main_gain: float, pilot: PilotSequence,
                  window: ObservationWindow, noise_sigma2: float) -> float:
    """Contamination-free SINR in dB: received burst energy over M sigma^2.

    Uses the closed-form trace of the single-path variance diagonal, which
    depends on the pilot only through its length and lag-1 autocorrelation.
    """
    if noise_sigma2 <= 0:
        raise ValueError("noise power must be positive")
    trace = crb.closed_form_trace(pilot, main_gain)
    return float(10.0 * np.log10(trace / (window.num_samples * noise_sigma2)))


def max_intra_distance(sinr_min_db: float, pilot: PilotSequence,
                       scenario: Scenario,
                       window: ObservationWindow | None = None) -> DistanceBound:
    """Largest master-slave distance whose ideal SINR still meets the floor.

    Inverts the 35 dB/decade branch of the three-slope model with a unit
    main-path gain; infeasible when the required large-scale factor can
    only be met inside the middle-slope region (the inversion formula is
    then outside its branch).
    """
    if window is None:
        window = scenario.window()
    trace_unit = crb.closed_form_trace(pilot, scenario.tx_power_w)
    beta_min = (window.num_samples * scenario.noise_sigma2
                * 10.0 ** (sinr_min_db / 10.0)) / trace_unit
    log_d = -(2.0 / 7.0) * np.log10(beta_min) - scenario.loss_constant_db / 35.0
    dis = float(10.0 ** log_d)
    if dis <= scenario.d1_km:
        raise InfeasibleError(
            f"SINR floor of {sinr_min_db} dB unreachable on the far path-loss "
            f"slope (required distance {dis:.4f} km <= d1 {scenario.d1_km} km)")
    return DistanceBound(dis_max_km=dis)


def _farthest_point_init(locations: np.ndarray, kc: int,
                         rng: np.random.Generator) -> np.ndarray:
    centers = [locations[rng.integers(locations.shape[0])]]
    for _ in range(kc - 1):
        d2 = np.min([np.sum((locations - c) ** 2, axis=1) for c in centers], axis=0)
        centers.append(locations[int(np.argmax(d2))])
    return np.array(centers)


def kmeans_partition(locations: np.ndarray, kc: int, rng_seed) -> np.ndarray:
    """Lloyd K-means labels for the AP positions, deterministic per seed.

    Farthest-point initialization; iterates until labels stabilize.  The
    summed squared point-to-centroid distance is non-increasing across
    iterations.  Re-seeds internally if a cluster empties (rare with
    farthest-point starts) and errors after a retry cap.
    """
    locations = np.asarray(locations, dtype=np.float64)
    if kc > locations.shape[0]:
        raise ValueError("more clusters than points")
    if kc < 1:
        raise ValueError("need at least one cluster")
    rng = np.random.default_rng(np.random.SeedSequence([_seed_int(rng_seed), _KMEANS_SALT]))
    for _retry in range(_RESEED_CAP):
        centers = _farthest_point_init(locations, kc, rng)
        labels = np.zeros(locations.shape[0], dtype=np.int64)
        ok = True
        for _it in range(_MAX_LLOYD_ITER):
            d2 = np.sum((locations[:, None, :] - centers[None, :, :]) ** 2, axis=2)
            new_labels = np.argmin(d2, axis=1)
            if np.all(new_labels == labels) and _it > 0:
                break
            labels = new_labels
            counts = np.bincount(labels, minlength=kc)
            if np.any(counts == 0):
                ok = False
                break
            for k in range(kc):
                centers[k] = locations[labels == k].mean(axis=0)
        if ok:
            return labels
    raise RuntimeError(f"K-means produced an empty cluster {_RESEED_CAP} times")


def kmeans_objective(locations: np.ndarray, labels: np.ndarray) -> float:
    """Summed squared distance to cluster centroids (the Lloyd objective)."""
    total = 0.0
    for k in np.unique(labels):
        pts = locations[labels == k]
        total += float(np.sum((pts - pts.mean(axis=0)) ** 2))
    return total


def select_master(member_locations: np.ndarray, member_ids) -> int:
    """Medoid of a cluster: the member minimizing the summed distance to the
    other members; ties resolve to the lowest AP id."""
    member_ids = list(member_ids)
    if not member_ids:
        raise ValueError("cluster is empty")
    pts = np.asarray(member_locations, dtype=np.float64)
    dist = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2))
    sums = dist.sum(axis=1)
    order = sorted(range(len(member_ids)), key=lambda i: (sums[i], member_ids[i]))
    return int(member_ids[order[0]])


def cluster_at(locations: np.ndarray, kc: int, rng_seed) -> ClusterPlan:
    """K-means partition at a fixed cluster count with medoid masters."""
    labels = kmeans_partition(locations, kc, rng_seed)
    assignment = {int(i): int(labels[i]) for i in range(len(labels))}
    masters: dict[int, int] = {}
    max_dist: dict[int, float] = {}
    for k in range(kc):
        ids = np.flatnonzero(labels == k)
        master = select_master(locations[ids], ids.tolist())
        masters[k] = master
        others = [i for i in ids if i != master]
        if others:
            d = np.sqrt(np.sum((locations[others] - locations[master]) ** 2, axis=1))
            max_dist[k] = float(np.max(d))
        else:
            max_dist[k] = 0.0
    return ClusterPlan(assignment=assignment, masters=masters,
                       per_cluster_max_dist_km=max_dist)


def adaptive_clusters(locations: np.ndarray, dis_max: DistanceBound,
                      budget_ls: int, rng_seed) -> ClusterPlan:
    """Grow the cluster count from 2 until every master-slave distance
    conforms to the bound; errors when the information-exchange share of
    the overhead budget is exhausted first."""
    locations = np.asarray(locations, dtype=np.float64)
    kc = 2
    while True:
        if 2 * kc >= budget_ls:
            raise InfeasibleError(
                f"{kc} clusters need an exchange overhead of {2 * kc}, leaving "
                f"no pilot room in a budget of {budget_ls}")
        if kc > locations.shape[0]:
            raise InfeasibleError("cluster count exceeded the AP count before "
                                  "conforming to the distance bound")
        plan = cluster_at(locations, kc, rng_seed)
        if max(plan.per_cluster_max_dist_km.values()) <= dis_max.dis_max_km:
            return plan
        kc += 1


def _seed_int(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    raise TypeError("clustering seeds must be plain integers")
