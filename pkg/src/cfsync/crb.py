"""Closed-form contamination statistics and estimation bounds.

The contamination covariance of a shared-pilot burst becomes diagonal once
the interferers' CFO is integrated over its symmetric prior, with entries
driven by the second moment of the timing-interpolation column averaged
over the TO prior.  This module builds that second moment in closed form,
the resulting per-sample contamination levels, the model Jacobian, and the
Fisher matrix whose inverse yields the TO/CFO bounds.

Index conventions: matrices are 0-based internally; ``paper_entry`` style
accessors take the 1-based indices used in printed derivations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import waveform
from .types import (DegenerateGeometryError, FisherReport, InterfererStat,
                    LinkChannel, ObservationWindow, PilotSequence, SyncOffset,
                    ThetaVector)

__all__ = [
    "DelaySecondMoment", "delay_second_moment", "contamination_diag",
    "noise_plus_contamination_diag", "closed_form_trace", "jacobian_columns",
    "fisher_and_crb", "bpsk_mean_diag", "pair_crb",
]

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class DelaySecondMoment:
    """Closed-form TO-prior average of the interpolation outer product.

    ``block`` holds the (eta+3) x (eta+3) leading block in 0-based indexing;
    every entry outside it is zero.  Support sits on 1-based rows/columns
    2..eta+3.
    """

    block: np.ndarray
    eta: int
    main_delay_chips: float

    def paper_entry(self, k1: int, k2: int) -> float:
        """Entry at 1-based (k1, k2) as printed."""
        n = self.block.shape[0]
        if 1 <= k1 <= n and 1 <= k2 <= n:
            return float(self.block[k1 - 1, k2 - 1])
        return 0.0

    @property
    def diag_sum(self) -> float:
        return float(np.trace(self.block))


def delay_second_moment(main_delay_chips: float, eta: int) -> DelaySecondMoment:
    """Closed-form entries of the TO-averaged second moment.

    ``main_delay_chips`` is the interferer's main-path delay fraction c in
    [0, 1); ``eta`` the TO prior bound in chips.  The nonzero entries form a
    symmetric tridiagonal band on 1-based rows 2..eta+3.
    """
    c = float(main_delay_chips)
    if not (0.0 <= c < 1.0):
        raise ValueError("main-path delay fraction must lie in [0, 1)")
    if eta < 1 or int(eta) != eta:
        raise ValueError("TO bound must be a positive integer")
    eta = int(eta)

    size = eta + 3
    a = np.zeros((size, size))

    def put(k1: int, k2: int, value: float) -> None:
        a[k1 - 1, k2 - 1] = value
        a[k2 - 1, k1 - 1] = value

    put(2, 2, (1 - c) ** 3 / (3 * eta))
    put(2, 3, (1 - 3 * c ** 2 + 2 * c ** 3) / (6 * eta))
    if eta == 1:
        put(3, 3, (1 + 3 * c - 3 * c ** 2) / 3)
    else:
        put(3, 3, (2 - c ** 3) / (3 * eta))
        for v in range(2, eta + 1):
            put(v + 1, v + 2, 1 / (6 * eta))
        for v in range(2, eta):
            put(v + 2, v + 2, 2 / (3 * eta))
        put(eta + 2, eta + 2, (2 - (1 - c) ** 3) / (3 * eta))
    put(eta + 2, eta + 3, (3 * c ** 2 - 2 * c ** 3) / (6 * eta))
    put(eta + 3, eta + 3, c ** 3 / (3 * eta))
    return DelaySecondMoment(block=a, eta=eta, main_delay_chips=c)


def _padded_shift(chips: np.ndarray, shift: int, length: int) -> np.ndarray:
    """chips[n - shift] over n = 0..length-1 with zeros out of range."""
    out = np.zeros(length)
    lo = max(shift, 0)
    hi = min(shift + chips.size, length)
    if hi > lo:
        out[lo:hi] = chips[lo - shift:hi - shift]
    return out


def contamination_diag(pilot: PilotSequence, moment: DelaySecondMoment,
                       main_gain: float, num_samples: int) -> np.ndarray:
    """Per-sample contamination variance of one interfering link.

    Entry n sums moment[k1, k'] * s[n-k1] * s[n-k'] over the tridiagonal
    support, scaled by the interferer's power product.  Out-of-range chips
    contribute zero, which shapes the first and last few samples.
    """
    if main_gain < 0:
        raise ValueError("interferer gain must be nonnegative")
    n_len = pilot.length
    if num_samples < n_len:
        raise ValueError("window shorter than the pilot")
    out = np.zeros(num_samples)
    if main_gain == 0:
        return out
    block = moment.block
    max_col = min(block.shape[0] - 1, num_samples - n_len)   # 0-based column cap
    shifted: dict[int, np.ndarray] = {}

    def chips_at(shift: int) -> np.ndarray:
        if shift not in shifted:
            shifted[shift] = _padded_shift(pilot.chips, shift, num_samples)
        return shifted[shift]

    for k2 in range(1, max_col + 1):
        for k1 in range(max(k2 - 1, 0), min(k2 + 1, block.shape[0] - 1) + 1):
            coeff = block[k1, k2]
            if coeff != 0.0:
                out += coeff * chips_at(k1) * chips_at(k2)
    return main_gain * out


def noise_plus_contamination_diag(interferer_diags: list[np.ndarray],
                                  noise_sigma2: float,
                                  num_samples: int | None = None) -> np.ndarray:
    """Diagonal of the total disturbance covariance: sum of the per-link
    contamination levels plus the white-noise floor.

    ``num_samples`` is only required when no interferers are present.
    """
    if noise_sigma2 <= 0:
        raise ValueError("noise power must be positive")
    if interferer_diags:
        length = interferer_diags[0].size
    elif num_samples is not None:
        length = int(num_samples)
    else:
        raise ValueError("window length unknown without interferers")
    out = np.full(length, float(noise_sigma2))
    for d in interferer_diags:
        if d.size != length:
            raise ValueError("contamination vectors must share one window length")
        out += d
    return out


def closed_form_trace(pilot: PilotSequence, main_gain: float) -> float:
    """Trace of the contamination diagonal: gain * (2 N + rho1) / 3.

    The diagonal band sums to 2/3 and each adjacent off-diagonal band to
    1/6 regardless of delay fraction and prior bound, so the trace depends
    on the pilot only through its length and lag-1 autocorrelation rho1.
    """
    return main_gain * (2.0 * pilot.length + pilot.lag1_autocorr) / 3.0


def bpsk_mean_diag(interferers: list[InterfererStat],
                   moments: list[DelaySecondMoment],
                   noise_sigma2: float, num_samples: int,
                   pilot_len: int) -> float:
    """Pilot-averaged disturbance level for random BPSK chips.

    Averaging over independent +-1 chips kills every cross term, leaving
    the sum of diagonal second-moment entries per interferer plus noise.
    Exact on interior samples; the few edge samples of the window see a
    truncated chip overlap and sit below this level.
    """
    if len(interferers) != len(moments):
        raise ValueError("need one second moment per interferer")
    level = float(noise_sigma2)
    max_col = num_samples - pilot_len   # 0-based column cap, as in the diag
    for stat, moment in zip(interferers, moments):
        diag = np.diag(moment.block)
        level += stat.main_gain * float(np.sum(diag[1:max_col + 1]))
    return level


def jacobian_columns(theta: ThetaVector, pilot: PilotSequence,
                     delay_chips: np.ndarray, window: ObservationWindow) -> np.ndarray:
    """Model Jacobian: columns are the partials of the noiseless burst.

    Column 0 differentiates the timing interpolation, column 1 the CFO
    phase ramp, and columns 2l+2 / 2l+3 the real and imaginary part of tap
    l.  Timing offsets sitting exactly on a chip boundary are nudged by
    1e-9 chips, where the interpolation kernel's derivative is undefined.
    """
    m = window.num_samples
    delays = np.asarray(delay_chips, dtype=np.float64)
    h = theta.taps
    s = waveform.pilot_matrix(pilot, m)
    u = waveform.delay_matrix(theta.to_chips, delays, m, pilot.length)
    to_for_deriv = theta.to_chips
    if np.any((to_for_deriv + delays) % 1.0 == 0.0):
        to_for_deriv += 1e-9
    u_prime = waveform.delay_matrix_derivative(to_for_deriv, delays, m, pilot.length)
    phase = waveform.cfo_phase(theta.cfo_norm, m)

    b = s @ u                       # M x L real
    signal = phase * (b @ h)
    omega = np.empty((m, theta.size), dtype=np.complex128)
    omega[:, 0] = phase * (s @ (u_prime @ h))
    omega[:, 1] = 2j * np.pi * np.arange(m) * signal
    fb = phase[:, None] * b
    omega[:, 2::2] = fb
    omega[:, 3::2] = 1j * fb
    return omega


def fisher_and_crb(omega: np.ndarray, xi_diag: np.ndarray) -> FisherReport:
    """Fisher matrix 2 Re{Omega^H Xi^-1 Omega} and the TO/CFO bounds.

    The disturbance covariance is diagonal, so the weighting is elementwise.
    The bounds are the first two diagonal entries of the inverse; a
    condition number beyond 1e12 signals degenerate geometry (e.g.
    coincident tap delays) and raises instead of returning garbage.
    """
    xi = np.asarray(xi_diag, dtype=np.float64)
    if np.any(xi <= 0):
        raise ValueError("disturbance diagonal must be strictly positive")
    weighted = omega / xi[:, None]
    j = 2.0 * np.real(omega.conj().T @ weighted)
    j = (j + j.T) / 2.0
    # equilibrate before inverting: parameter units differ by orders of
    # magnitude, and only scale-invariant conditioning signals degeneracy
    d = np.sqrt(np.diag(j))
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise DegenerateGeometryError("Fisher matrix has a non-positive diagonal")
    scaled = j / np.outer(d, d)
    cond = float(np.linalg.cond(scaled))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise DegenerateGeometryError(
            f"Fisher matrix condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}")
    inv = np.linalg.inv(scaled) / np.outer(d, d)
    return FisherReport(fisher=j, crb_to_chips=float(inv[0, 0]),
                        crb_cfo_norm=float(inv[1, 1]), condition_number=cond)


def pair_crb(pilot: PilotSequence, channel: LinkChannel, offset: SyncOffset,
             interferers: list[InterfererStat], noise_sigma2: float,
             window: ObservationWindow | None = None,
             contamination_eta: int | None = None) -> FisherReport:
    """End-to-end bound for one estimated link under contamination.

    Before inversion all power scales (desired large-scale factor,
    interferer gains, noise) are divided by the largest large-scale factor
    for conditioning; the TO and CFO bounds are invariant under that common
    rescaling, so no un-scaling is required on the reported values.
    """
    delays = channel.delay_chips(pilot.chip_interval_s)
    eta = contamination_eta if contamination_eta is not None else offset.to_bound_chips
    if window is None:
        window = ObservationWindow.covering(pilot.length, offset.to_bound_chips,
                                            float(np.max(delays)))
    window.validate_for(pilot.length, offset.to_bound_chips, float(np.max(delays)))

    scale = max(channel.large_scale, max((s.main_gain for s in interferers), default=0.0))
    norm_channel = LinkChannel(delays_s=channel.delays_s, gains=channel.gains,
                               fades=channel.fades,
                               large_scale=channel.large_scale / scale)
    m = window.num_samples
    diags = [contamination_diag(pilot, delay_second_moment(s.main_delay_chips, eta),
                                s.main_gain / scale, m)
             for s in interferers]
    xi = noise_plus_contamination_diag(diags, noise_sigma2 / scale, num_samples=m)
    theta = ThetaVector(to_chips=offset.to_chips, cfo_norm=offset.cfo_norm,
                        taps=norm_channel.coefficients())
    omega = jacobian_columns(theta, pilot, delays, window)
    return fisher_and_crb(omega, xi)
