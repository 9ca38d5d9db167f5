"""Domain types shared across the synchronization pipeline.

All values are plain immutable-ish dataclasses; invariants are checked at
construction so downstream numerics never see malformed inputs.  Angles and
frequencies are kept in normalized units internally: timing offsets in chips
(delay / chip interval) and CFO as cycles per chip (offset * chip interval).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT_KM_S = 299792.458


class DegenerateGeometryError(RuntimeError):
    """Fisher matrix is numerically singular (e.g. coincident tap delays)."""


class IntegerAlignmentError(ValueError):
    """Total delay sits exactly on a chip boundary where the delay-matrix
    derivative is undefined."""


class InfeasibleError(RuntimeError):
    """No configuration satisfies the requirements within the given budget."""


@dataclass(frozen=True)
class PilotSequence:
    """A BPSK synchronization burst: N chips of +-1 at a fixed chip interval."""

    chips: np.ndarray
    chip_interval_s: float
    power_w: float = 1.0
    index: int = 0

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=np.float64)
        object.__setattr__(self, "chips", chips)
        if chips.ndim != 1 or chips.size < 2:
            raise ValueError("pilot needs at least 2 chips")
        if not np.all(np.abs(chips) == 1.0):
            raise ValueError("pilot chips must be exactly +1 or -1 (BPSK)")
        if self.chip_interval_s <= 0:
            raise ValueError("chip interval must be positive")
        if self.power_w <= 0:
            raise ValueError("transmit power must be positive")

    @property
    def length(self) -> int:
        return int(self.chips.size)

    @property
    def lag1_autocorr(self) -> float:
        """Aperiodic autocorrelation at lag 1, sum_i s[i] s[i+1]."""
        return float(np.dot(self.chips[:-1], self.chips[1:]))

    @classmethod
    def random_bpsk(cls, length: int, seed, chip_interval_s: float = 1e-6,
                    power_w: float = 1.0, index: int = 0) -> "PilotSequence":
        rng = np.random.default_rng(seed)
        chips = rng.choice([-1.0, 1.0], size=length)
        return cls(chips=chips, chip_interval_s=chip_interval_s,
                   power_w=power_w, index=index)


@dataclass(frozen=True)
class SyncOffset:
    """The unknown (CFO, TO) pair of one transmitter-receiver link.

    ``cfo_hz`` and ``to_s`` are the true values; the bounds describe the
    uniform prior box the contamination statistics and the estimator grid
    use: |cfo| <= cfo_bound_hz and 0 <= to / T_s <= to_bound_chips.
    """

    cfo_hz: float
    to_s: float
    cfo_bound_hz: float
    to_bound_chips: int
    chip_interval_s: float = 1e-6

    def __post_init__(self):
        if self.to_bound_chips < 1 or int(self.to_bound_chips) != self.to_bound_chips:
            raise ValueError("TO bound must be a positive integer number of chips")
        if abs(self.cfo_hz) > self.cfo_bound_hz:
            raise ValueError("CFO outside its prior bound")
        if not (0.0 <= self.to_s / self.chip_interval_s <= self.to_bound_chips):
            raise ValueError("TO outside its prior bound")

    @property
    def cfo_norm(self) -> float:
        """CFO in cycles per chip, cfo_hz * T_s."""
        return self.cfo_hz * self.chip_interval_s

    @property
    def to_chips(self) -> float:
        return self.to_s / self.chip_interval_s

    @classmethod
    def from_normalized(cls, cfo_norm: float, to_chips: float,
                        cfo_bound_norm: float, to_bound_chips: int,
                        chip_interval_s: float = 1e-6) -> "SyncOffset":
        return cls(cfo_hz=cfo_norm / chip_interval_s,
                   to_s=to_chips * chip_interval_s,
                   cfo_bound_hz=cfo_bound_norm / chip_interval_s,
                   to_bound_chips=to_bound_chips,
                   chip_interval_s=chip_interval_s)


@dataclass(frozen=True)
class LinkChannel:
    """Multipath taps of one AP pair plus the distance-dependent power scale.

    Tap l carries (delay seconds, nonnegative gain, complex small-scale
    fade); the composite coefficient is gain * sqrt(large_scale) * fade.
    Delays are nondecreasing with tap 0 the main path.
    """

    delays_s: np.ndarray
    gains: np.ndarray
    fades: np.ndarray
    large_scale: float

    def __post_init__(self):
        delays = np.asarray(self.delays_s, dtype=np.float64)
        gains = np.asarray(self.gains, dtype=np.float64)
        fades = np.asarray(self.fades, dtype=np.complex128)
        if not (delays.size == gains.size == fades.size) or delays.size < 1:
            raise ValueError("taps need matching, nonempty delay/gain/fade arrays")
        if np.any(np.diff(delays) < 0):
            raise ValueError("tap delays must be nondecreasing")
        if np.any(gains < 0):
            raise ValueError("tap gains must be nonnegative")
        if self.large_scale <= 0:
            raise ValueError("large-scale factor must be positive")
        object.__setattr__(self, "delays_s", delays)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "fades", fades)

    @property
    def num_taps(self) -> int:
        return int(self.delays_s.size)

    def delay_chips(self, chip_interval_s: float) -> np.ndarray:
        return self.delays_s / chip_interval_s

    def coefficients(self) -> np.ndarray:
        """Composite per-tap coefficients h_l = gain_l sqrt(beta) fade_l."""
        return self.gains * np.sqrt(self.large_scale) * self.fades

    @classmethod
    def single_path(cls, gain: float = 1.0, large_scale: float = 1.0,
                    delay_s: float = 0.0, fade: complex = 1.0 + 0.0j) -> "LinkChannel":
        return cls(delays_s=np.array([delay_s]), gains=np.array([gain]),
                   fades=np.array([fade], dtype=np.complex128),
                   large_scale=large_scale)


@dataclass(frozen=True)
class ObservationWindow:
    """Number of samples M the receiver collects around the burst."""

    num_samples: int

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("window must hold at least one sample")

    def validate_for(self, pilot_len: int, to_bound_chips: float,
                     max_delay_chips: float) -> None:
        needed = pilot_len + int(np.ceil(to_bound_chips + max_delay_chips)) + 2
        if self.num_samples < needed:
            raise ValueError(
                f"window of {self.num_samples} samples too short: need >= {needed} "
                f"for pilot {pilot_len}, TO bound {to_bound_chips}, "
                f"max extra delay {max_delay_chips}")

    @classmethod
    def covering(cls, pilot_len: int, to_bound_chips: float,
                 max_delay_chips: float) -> "ObservationWindow":
        return cls(pilot_len + int(np.ceil(to_bound_chips + max_delay_chips)) + 2)


@dataclass(frozen=True)
class ModelMatrices:
    """The matrices of the discrete observation model: CFO phase ramp,
    banded pilot matrix, timing interpolation, and its TO derivative."""

    F: np.ndarray       # M x M complex unit-modulus diagonal (stored dense)
    S: np.ndarray       # M x (M-N+1) real banded pilot matrix
    U: np.ndarray       # (M-N+1) x L real interpolation matrix
    U_prime: np.ndarray | None = None   # d U / d(to_chips), None at integer alignment


@dataclass(frozen=True)
class InterfererStat:
    """Main-path statistics of one contaminating link.

    ``main_gain`` is the printed linear product of main-tap gain and
    large-scale factor (times transmit power); ``main_delay_chips`` is the
    propagation delay of the main path as a fraction of a chip.
    """

    main_gain: float
    main_delay_chips: float

    def __post_init__(self):
        if self.main_gain < 0:
            raise ValueError("interferer gain must be nonnegative")
        if not (0.0 <= self.main_delay_chips < 1.0):
            raise ValueError("main-path delay must lie in [0, 1) chips")


@dataclass(frozen=True)
class ThetaVector:
    """Estimation parameter ordering: [TO chips, CFO norm, Re h_0, Im h_0, ...]."""

    to_chips: float
    cfo_norm: float
    taps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "taps", np.asarray(self.taps, dtype=np.complex128))

    @property
    def size(self) -> int:
        return 2 + 2 * self.taps.size

    def as_array(self) -> np.ndarray:
        out = np.empty(self.size)
        out[0] = self.to_chips
        out[1] = self.cfo_norm
        out[2::2] = self.taps.real
        out[3::2] = self.taps.imag
        return out


@dataclass(frozen=True)
class FisherReport:
    """Fisher matrix plus the extracted CRBs of TO (chips^2) and CFO (norm^2)."""

    fisher: np.ndarray
    crb_to_chips: float
    crb_cfo_norm: float
    condition_number: float


@dataclass(frozen=True)
class AccessPoint:
    id: int
    location_km: tuple[float, float]
    role: str = "unassigned"   # master | slave | unassigned


@dataclass(frozen=True)
class Scenario:
    """System-level simulation constants.

    Defaults follow the smart-factory setup: a 0.15 x 0.15 km area, 1 W
    transmitters, three-slope path loss with 140.7 dB constant and
    breakpoints 0.01 / 0.05 km, 256-chip pilots, a 3-chip TO prior and a
    normalized CFO prior of 3, and a 15 dB SINR floor.  ``noise_sigma2`` is
    calibrated so the maximum conforming master-slave distance sits near
    half the area at those defaults.
    """

    num_aps: int = 40
    area_km: tuple[float, float] = (0.15, 0.15)
    tx_power_w: float = 1.0
    noise_sigma2: float = 1.5e-12
    loss_constant_db: float = 140.7
    d0_km: float = 0.01
    d1_km: float = 0.05
    pilot_len: int = 256
    to_bound_chips: int = 3
    cfo_bound_norm: float = 3.0
    sinr_min_db: float = 15.0
    overhead_budget: int = 31
    rng_seed: int = 0
    chip_interval_s: float = 1e-6
    num_taps: int = 3
    cp_chips: float = 3.0
    swap_iterations: int = 2000
    swap_temperature: float = 0.01

    def __post_init__(self):
        if self.num_aps < 3:
            raise ValueError("need at least 3 APs")
        if not (0 < self.d0_km < self.d1_km):
            raise ValueError("path-loss breakpoints must satisfy 0 < d0 < d1")
        for name in ("tx_power_w", "noise_sigma2", "chip_interval_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.to_bound_chips < 1:
            raise ValueError("TO bound must be at least one chip")

    def pilot(self, index: int = 0) -> PilotSequence:
        """The seeded chip design shared by the whole scenario.

        Different pilot indices are modeled as mutually orthogonal; the same
        chip sequence represents every index in the numerics, so results do
        not depend on arbitrary index labels.
        """
        return PilotSequence.random_bpsk(
            self.pilot_len, seed=np.random.SeedSequence([int(self.rng_seed), 7]),
            chip_interval_s=self.chip_interval_s, power_w=self.tx_power_w,
            index=index)

    def window(self) -> ObservationWindow:
        max_delay = self.cp_chips + 1.0   # propagation fraction + CP spread
        return ObservationWindow.covering(self.pilot_len, self.to_bound_chips,
                                          max_delay)


@dataclass(frozen=True)
class ClusterPlan:
    """Partition of APs into clusters with one designated master each."""

    assignment: dict[int, int]        # AP id -> cluster index
    masters: dict[int, int]           # cluster index -> master AP id
    per_cluster_max_dist_km: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        clusters = set(self.assignment.values())
        if clusters != set(self.masters):
            raise ValueError("every cluster needs exactly one master")
        for k, master in self.masters.items():
            if self.assignment.get(master) != k:
                raise ValueError(f"master {master} is not a member of cluster {k}")

    @property
    def num_clusters(self) -> int:
        return len(self.masters)

    def slaves_of(self, k: int) -> list[int]:
        return sorted(i for i, c in self.assignment.items()
                      if c == k and i != self.masters[k])

    def all_slaves(self) -> list[int]:
        master_ids = set(self.masters.values())
        return sorted(i for i in self.assignment if i not in master_ids)

    def master_of(self, ap_id: int) -> int:
        return self.masters[self.assignment[ap_id]]


@dataclass(frozen=True)
class DistanceBound:
    """Maximum conforming master-slave distance in km."""

    dis_max_km: float

    def __post_init__(self):
        if self.dis_max_km <= 0:
            raise ValueError("distance bound must be positive")


@dataclass(frozen=True)
class ConflictMatrix:
    """Binary slave-slave conflict indicator: 1 = must use different pilots."""

    matrix: np.ndarray
    slave_ids: list[int]

    def __post_init__(self):
        b = np.asarray(self.matrix, dtype=np.int8)
        if b.shape != (len(self.slave_ids), len(self.slave_ids)):
            raise ValueError("conflict matrix shape does not match slave count")
        if np.any(b != b.T) or np.any(np.diag(b) != 0):
            raise ValueError("conflict matrix must be symmetric with zero diagonal")
        object.__setattr__(self, "matrix", b)


@dataclass(frozen=True)
class PilotAssignment:
    """Map from slave APs to pilot indices under a per-pilot reuse cap."""

    groups: dict[int, list[int]]      # pilot index (0-based) -> slave ids
    reuse_cap: int

    def __post_init__(self):
        seen: set[int] = set()
        for p, members in self.groups.items():
            if len(members) > self.reuse_cap:
                raise ValueError(f"pilot {p} reused {len(members)} > cap {self.reuse_cap}")
            overlap = seen.intersection(members)
            if overlap:
                raise ValueError(f"slaves {sorted(overlap)} assigned twice")
            seen.update(members)

    @property
    def num_pilots(self) -> int:
        return len(self.groups)

    def pilot_of(self) -> dict[int, int]:
        return {i: p for p, members in self.groups.items() for i in members}

    def copilots_of(self, slave: int) -> list[int]:
        for members in self.groups.values():
            if slave in members:
                return [i for i in members if i != slave]
        raise KeyError(f"slave {slave} has no pilot")
