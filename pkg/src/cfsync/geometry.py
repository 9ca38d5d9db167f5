"""Scenario geometry: AP placement, path loss, and channel realizations.

Distances are planar kilometers (AP height is constant and drops out of
the distance-based loss model).  All sampling is keyed off the scenario
seed plus fixed salts so that regenerating any table or channel is
bit-identical, and per-pair channels do not depend on which clustering or
assignment asked for them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .types import (SPEED_OF_LIGHT_KM_S, AccessPoint, LinkChannel,
                    ObservationWindow, PilotSequence, Scenario)

__all__ = ["path_loss_db", "beta_from_distance", "place_aps", "sample_channel",
           "LinkTable", "SystemModel", "reference_channel", "load_tap_fixture"]

_PLACE_SALT = 11
_CHANNEL_SALT = 13


def path_loss_db(d_km: float, scenario: Scenario) -> float:
    """Three-slope path loss in dB: 35 dB/decade beyond d1, 20 dB/decade
    between d0 and d1, constant below d0."""
    if d_km <= 0:
        raise ValueError("distance must be positive")
    l0 = scenario.loss_constant_db
    d0, d1 = scenario.d0_km, scenario.d1_km
    if d_km > d1:
        return l0 + 35.0 * np.log10(d_km)
    if d_km > d0:
        return l0 + 15.0 * np.log10(d1) + 20.0 * np.log10(d_km)
    return l0 + 15.0 * np.log10(d1) + 20.0 * np.log10(d0)


def beta_from_distance(d_km: float, scenario: Scenario) -> float:
    """Linear large-scale factor 10^(-PL/10)."""
    return 10.0 ** (-path_loss_db(d_km, scenario) / 10.0)


def place_aps(scenario: Scenario, rng_seed: int | None = None) -> list[AccessPoint]:
    """Uniform i.i.d. AP positions in the scenario area, stable per seed."""
    seed = scenario.rng_seed if rng_seed is None else rng_seed
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _PLACE_SALT]))
    xy = rng.random((scenario.num_aps, 2)) * np.asarray(scenario.area_km)
    return [AccessPoint(id=i, location_km=(float(x), float(y)))
            for i, (x, y) in enumerate(xy)]


def sample_channel(distance_km: float, num_taps: int, scenario: Scenario,
                   rng_seed) -> LinkChannel:
    """Multipath realization for one link at the given distance.

    The main path arrives after the propagation delay with unit gain;
    num_taps - 1 echoes follow within the cyclic-prefix window with
    decreasing gains and a pairwise spacing of at least 1.2 chips.  The
    spacing keeps each tap in its own interpolation cell for every timing
    offset, so the tap supports always cover at least num_taps + 1 samples
    and the timing offset stays identifiable; draws are uniform over the
    spacing-feasible region.  Small-scale fades are standard complex
    Gaussian.
    """
    if num_taps < 1:
        raise ValueError("need at least the main path")
    min_gap = 1.2
    slack = scenario.cp_chips - (num_taps - 1) * min_gap
    if num_taps > 1 and slack < 0:
        raise ValueError(
            f"cyclic prefix of {scenario.cp_chips} chips too short for "
            f"{num_taps - 1} echoes spaced {min_gap} chips apart")
    rng = np.random.default_rng(rng_seed)
    beta = beta_from_distance(distance_km, scenario)
    main_delay_s = distance_km / SPEED_OF_LIGHT_KM_S
    ts = scenario.chip_interval_s
    offsets = np.sort(rng.uniform(0.0, slack, size=num_taps - 1))
    extra_chips = min_gap * np.arange(1, num_taps) + offsets
    delays = np.concatenate([[main_delay_s], main_delay_s + extra_chips * ts])
    gains = np.concatenate([[1.0], np.sort(rng.uniform(0.0, 1.0, size=num_taps - 1))[::-1]])
    fades = (rng.standard_normal(num_taps) + 1j * rng.standard_normal(num_taps)) / np.sqrt(2.0)
    return LinkChannel(delays_s=delays, gains=gains, fades=fades, large_scale=beta)


@dataclass(frozen=True)
class LinkTable:
    """Pairwise distance / path-loss / large-scale / main-delay tables."""

    dist_km: np.ndarray
    loss_db: np.ndarray
    beta: np.ndarray
    main_delay_s: np.ndarray

    @classmethod
    def build(cls, locations: np.ndarray, scenario: Scenario) -> "LinkTable":
        diff = locations[:, None, :] - locations[None, :, :]
        dist = np.sqrt(np.sum(diff ** 2, axis=-1))
        k = dist.shape[0]
        loss = np.zeros_like(dist)
        for i in range(k):
            for j in range(k):
                if i != j:
                    loss[i, j] = path_loss_db(dist[i, j], scenario)
        beta = np.where(np.eye(k, dtype=bool), 0.0, 10.0 ** (-loss / 10.0))
        return cls(dist_km=dist, loss_db=loss, beta=beta,
                   main_delay_s=dist / SPEED_OF_LIGHT_KM_S)


@dataclass(frozen=True)
class SystemModel:
    """One placed scenario realization with its link tables and pilot.

    The single seeded chip design stands in for every pilot index (indices
    are modeled as mutually orthogonal), so assignment metrics depend only
    on which slaves share an index, never on index labels.
    """

    scenario: Scenario
    aps: list[AccessPoint]
    locations: np.ndarray
    links: LinkTable
    pilot: PilotSequence
    window: ObservationWindow

    @classmethod
    def from_scenario(cls, scenario: Scenario, rng_seed: int | None = None) -> "SystemModel":
        seed = scenario.rng_seed if rng_seed is None else rng_seed
        scenario = Scenario(**{**scenario.__dict__, "rng_seed": int(seed)})
        aps = place_aps(scenario)
        locations = np.array([ap.location_km for ap in aps])
        return cls(scenario=scenario, aps=aps, locations=locations,
                   links=LinkTable.build(locations, scenario),
                   pilot=scenario.pilot(), window=scenario.window())

    def channel(self, slave: int, master: int, variant: int = 0) -> LinkChannel:
        """Seeded multipath channel of one (slave, master) pair.

        The echo profile and fades are keyed to the transmitting slave (its
        scattering environment); the receiving end only sets the distance,
        i.e. the large-scale factor and the main-path delay.  Comparisons
        that re-pair the same slaves with different masters are therefore
        paired in the small-scale randomness.  ``variant`` selects an
        alternate realization (used to redraw layouts whose tap spacing
        makes the timing offset unidentifiable).
        """
        seed = np.random.SeedSequence(
            [int(self.scenario.rng_seed), _CHANNEL_SALT, int(slave), int(variant)])
        return sample_channel(float(self.links.dist_km[slave, master]),
                              self.scenario.num_taps, self.scenario, seed)

    def channel_to_point(self, slave: int, point_km: tuple[float, float],
                         variant: int = 0) -> LinkChannel:
        """Channel from an AP to an arbitrary receive point (hub baseline)."""
        d = float(np.hypot(self.locations[slave, 0] - point_km[0],
                           self.locations[slave, 1] - point_km[1]))
        d = max(d, 1e-6)
        seed = np.random.SeedSequence(
            [int(self.scenario.rng_seed), _CHANNEL_SALT, int(slave), int(variant)])
        return sample_channel(d, self.scenario.num_taps, self.scenario, seed)

    def main_gain(self, tx: int, rx: int) -> float:
        """Transmit power times large-scale factor of the main path."""
        return self.scenario.tx_power_w * float(self.links.beta[tx, rx])

    def main_delay_chips(self, tx: int, rx: int) -> float:
        return float(self.links.main_delay_s[tx, rx] / self.scenario.chip_interval_s)

    def noise_floor(self) -> float:
        """Trace-normalized noise term M * sigma^2 used by SINR ratios."""
        return self.window.num_samples * self.scenario.noise_sigma2


def reference_channel(chip_interval_s: float = 1e-6,
                      large_scale: float = 5.16e-10,
                      fades: np.ndarray | None = None) -> LinkChannel:
    """The fixed four-tap multipath profile used by the estimator-vs-bound
    experiment; fades default to unit (deterministic) values."""
    delays_chips = np.array([0.0, 0.7049, 2.1230, 2.7063])
    gains = np.array([1.0, 0.8443, 0.4119, 0.3223])
    if fades is None:
        fades = np.ones(4, dtype=np.complex128)
    return LinkChannel(delays_s=delays_chips * chip_interval_s, gains=gains,
                       fades=fades, large_scale=large_scale)


def load_tap_fixture(path) -> dict[tuple[int, int], LinkChannel]:
    """Read a tap-fixture file mapping AP pairs to fixed channels.

    Schema (JSON): {"chip_interval_s": float, "pairs": [{"slave": int,
    "master": int, "delays_chips": [..], "gains": [..], "large_scale": float,
    "fades_re": [..] optional, "fades_im": [..] optional}]}
    """
    with open(path) as fh:
        doc = json.load(fh)
    ts = float(doc.get("chip_interval_s", 1e-6))
    out: dict[tuple[int, int], LinkChannel] = {}
    for row in doc["pairs"]:
        delays = np.asarray(row["delays_chips"], dtype=np.float64) * ts
        gains = np.asarray(row["gains"], dtype=np.float64)
        if "fades_re" in row:
            fades = np.asarray(row["fades_re"]) + 1j * np.asarray(row.get("fades_im", 0))
        else:
            fades = np.ones(delays.size, dtype=np.complex128)
        out[(int(row["slave"]), int(row["master"]))] = LinkChannel(
            delays_s=delays, gains=gains, fades=fades,
            large_scale=float(row["large_scale"]))
    return out
