"""Discrete-time pilot-burst observation model.

Builds the matrices of the vector model y = F(cfo) S U(to) h + w for one
link and synthesizes received bursts with contamination and noise.  The
internal convention is fully 0-based: sample m runs 0..M-1 and matrix rows
and columns are 0-based, one below the 1-based layout used in printed
matrix definitions.

The chip-level interpolation kernel is the triangle obtained by convolving
two unit rectangular pulses; a total delay of x chips therefore splits each
chip between two adjacent samples with weights (1 - frac(x), frac(x)).
A constant phase rotation of the whole burst by the CFO-TO product is
unobservable after coarse frame synchronization and is absorbed into the
channel coefficients rather than modeled separately.
"""

from __future__ import annotations

import numpy as np

from .types import (IntegerAlignmentError, LinkChannel, ModelMatrices,
                    ObservationWindow, PilotSequence, SyncOffset)

__all__ = [
    "tri_kernel", "cfo_matrix", "pilot_matrix", "delay_matrix",
    "delay_matrix_derivative", "build_model", "model_signal",
    "direct_signal", "synthesize_rx",
]

_ALIGN_EPS = 1e-9   # chips; nudge used by callers that must avoid boundaries


def tri_kernel(t):
    """Triangular interpolation kernel: t on (0,1], 2-t on (1,2], else 0.

    Accepts scalars or arrays.  Total function; the support boundaries
    belong to the nonzero branches on the right.
    """
    t = np.asarray(t, dtype=np.float64)
    out = np.where((t > 0) & (t <= 1), t, 0.0) + np.where((t > 1) & (t <= 2), 2 - t, 0.0)
    return out if out.ndim else float(out)


def cfo_matrix(cfo_norm: float, num_samples: int) -> np.ndarray:
    """M x M diagonal of per-sample CFO phase ramps exp(j 2 pi m cfo_norm)."""
    if num_samples < 1:
        raise ValueError("need at least one sample")
    m = np.arange(num_samples)
    return np.diag(np.exp(2j * np.pi * m * cfo_norm))


def cfo_phase(cfo_norm: float, num_samples: int) -> np.ndarray:
    """Diagonal of the CFO matrix as a vector (cheaper than the dense form)."""
    return np.exp(2j * np.pi * np.arange(num_samples) * cfo_norm)


def pilot_matrix(pilot: PilotSequence, num_samples: int) -> np.ndarray:
    """M x (M-N+1) banded matrix with the pilot shifted down each column.

    Entry [r, c] (0-based) is chip r - c, with out-of-range chips zero.
    """
    n = pilot.length
    m = num_samples
    if m < n:
        raise ValueError(f"window {m} shorter than pilot {n}")
    s = np.zeros((m, m - n + 1))
    for c in range(m - n + 1):
        s[c:c + n, c] = pilot.chips
    return s


def _column_positions(to_chips: float, delay_chips: np.ndarray):
    """Row index and fractional split of each tap's interpolation pair.

    For total delay x = to + tap delay (chips), the kernel is nonzero at
    0-based rows floor(x)+1 and floor(x)+2 with weights 1-frac(x), frac(x);
    at integer x all weight sits on row x+1.
    """
    x = to_chips + np.asarray(delay_chips, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("total delay must be nonnegative")
    base = np.floor(x).astype(int)
    frac = x - base
    return base, frac


def delay_matrix(to_chips: float, delay_chips: np.ndarray, num_samples: int,
                 pilot_len: int) -> np.ndarray:
    """(M-N+1) x L interpolation matrix: column l samples the triangle kernel
    at row - total_delay_l for the l-th tap."""
    rows = num_samples - pilot_len + 1
    base, frac = _column_positions(to_chips, delay_chips)
    highest = base + np.where(frac > 0, 2, 1)
    if np.any(highest > rows - 1):
        raise ValueError("delay pushes interpolation weights past the window")
    u = np.zeros((rows, base.size))
    for l in range(base.size):
        u[base[l] + 1, l] = 1.0 - frac[l]
        if frac[l] > 0:
            u[base[l] + 2, l] = frac[l]
    return u


def delay_matrix_derivative(to_chips: float, delay_chips: np.ndarray,
                            num_samples: int, pilot_len: int) -> np.ndarray:
    """Derivative of ``delay_matrix`` in the TO (chips) coordinate.

    Column l has -1 at the row carrying weight 1-frac and +1 at the next
    row.  Undefined when any total delay is an exact chip multiple.
    """
    rows = num_samples - pilot_len + 1
    base, frac = _column_positions(to_chips, delay_chips)
    if np.any(frac == 0):
        raise IntegerAlignmentError(
            "delay-matrix derivative undefined at integer chip alignment")
    if np.any(base + 2 > rows - 1):
        raise ValueError("delay pushes interpolation weights past the window")
    du = np.zeros((rows, base.size))
    for l in range(base.size):
        du[base[l] + 1, l] = -1.0
        du[base[l] + 2, l] = 1.0
    return du


def build_model(pilot: PilotSequence, channel: LinkChannel, offset: SyncOffset,
                window: ObservationWindow, with_derivative: bool = False) -> ModelMatrices:
    """Assemble F, S, U (and optionally U') for one link."""
    m = window.num_samples
    delays = channel.delay_chips(pilot.chip_interval_s)
    u_prime = None
    if with_derivative:
        to = offset.to_chips
        frac = (to + delays) % 1.0
        if np.any(frac == 0):
            to = to + _ALIGN_EPS
        u_prime = delay_matrix_derivative(to, delays, m, pilot.length)
    return ModelMatrices(
        F=cfo_matrix(offset.cfo_norm, m),
        S=pilot_matrix(pilot, m),
        U=delay_matrix(offset.to_chips, delays, m, pilot.length),
        U_prime=u_prime,
    )


def model_signal(pilot: PilotSequence, channel: LinkChannel, offset: SyncOffset,
                 window: ObservationWindow) -> np.ndarray:
    """Noiseless matrix-form burst (ramp * pilot * interpolation * taps)."""
    m = window.num_samples
    delays = channel.delay_chips(pilot.chip_interval_s)
    s = pilot_matrix(pilot, m)
    u = delay_matrix(offset.to_chips, delays, m, pilot.length)
    return cfo_phase(offset.cfo_norm, m) * (s @ (u @ channel.coefficients()))


def direct_signal(pilot: PilotSequence, channel: LinkChannel, offset: SyncOffset,
                  window: ObservationWindow) -> np.ndarray:
    """Noiseless burst by direct evaluation of the sampled double sum.

    y[m] = exp(j 2 pi m cfo_norm) * sum_l h_l sum_n s_n tri(m - n - x_l),
    independent of the matrix construction; used as the oracle for the
    matrix-form identity.
    """
    m_idx = np.arange(window.num_samples)[:, None]
    n_idx = np.arange(pilot.length)[None, :]
    delays = channel.delay_chips(pilot.chip_interval_s)
    h = channel.coefficients()
    acc = np.zeros(window.num_samples, dtype=np.complex128)
    for l in range(channel.num_taps):
        kern = tri_kernel(m_idx - n_idx - (offset.to_chips + delays[l]))
        acc += h[l] * (kern @ pilot.chips)
    return acc * cfo_phase(offset.cfo_norm, window.num_samples)


def synthesize_rx(primary: tuple[SyncOffset, LinkChannel],
                  interferers: list[tuple[SyncOffset, LinkChannel]],
                  pilot: PilotSequence, window: ObservationWindow,
                  noise_sigma2: float, rng_seed) -> np.ndarray:
    """Received burst: primary + co-pilot interferers + complex Gaussian noise.

    Noise draws are circularly symmetric with per-sample variance
    ``noise_sigma2`` and are deterministic given ``rng_seed``; small-scale
    fades ride in on the channel objects, drawn once per realization by the
    caller.
    """
    y = model_signal(pilot, primary[1], primary[0], window)
    for offset, channel in interferers:
        y = y + model_signal(pilot, channel, offset, window)
    if noise_sigma2 > 0:
        rng = np.random.default_rng(rng_seed)
        scale = np.sqrt(noise_sigma2 / 2.0)
        m = window.num_samples
        y = y + scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return y
