"""Euler-Maruyama sampling of the underlying stochastic flow.

The integrator marches ``phi <- phi - A(phi) dt + sqrt(eps dt) xi`` with
independent standard-normal increments per path and step.  Every path owns a
counter-based generator spawned from one seed, so results are bit-identical
for a fixed seed regardless of how many paths run.  Positions are stored
wrapped into the fundamental domain together with integer winding numbers,
from which unwrapped trajectories are reconstructed exactly.

Estimators:

* ``stationary_histogram``   — occupation density after a 20% burn-in;
* ``autocorrelation_decay``  — complex autocovariance of an observable,
  fitted for a decay rate and an oscillation frequency (the slow eigenvalue
  of the evolution operator seen from sample paths);
* ``mean_squared_displacement`` / ``drift_velocity`` — moment diagnostics
  on unwrapped paths.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .exceptions import (
    InsufficientSamplesError,
    StabilityWarning,
    UnfittableDecayError,
    UnsupportedMeshError,
    ValidationError,
)
from .models import ModelSpec

__all__ = [
    "TrajectoryEnsemble",
    "HistogramResult",
    "DecayFit",
    "simulate_sde",
    "stationary_histogram",
    "tv_distance_to_density",
    "autocorrelation_decay",
    "mean_squared_displacement",
    "drift_velocity",
]

_BURN_IN_FRACTION = 0.2
_MIN_HISTOGRAM_SAMPLES = 10_000
_CHUNK_SCALARS = 4_000_000  # noise buffer budget (doubles)


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Stored sample paths: wrapped positions plus winding counts.

    ``positions`` has shape (n_paths, n_stored, dim) with every coordinate
    in [0, period); ``windings`` holds the integer number of full turns, so
    ``positions + windings * periods`` is the exact unwrapped trajectory.
    """

    positions: np.ndarray
    windings: np.ndarray
    dt: float
    store_every: int
    n_steps: int
    seed: int
    epsilon: float
    periods: Tuple[float, ...]
    model_name: str

    @property
    def n_paths(self) -> int:
        return self.positions.shape[0]

    @property
    def n_stored(self) -> int:
        return self.positions.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_stored) * (self.dt * self.store_every)

    def unwrapped(self) -> np.ndarray:
        return self.positions + self.windings * np.asarray(self.periods)


def _default_initial(n_paths: int, periods: Tuple[float, ...]) -> np.ndarray:
    """Deterministic uniform spread (golden-ratio stagger on extra axes)."""
    dim = len(periods)
    u = (np.arange(n_paths) + 0.5) / n_paths
    cols = [u * periods[0]]
    golden = 0.6180339887498949
    for axis in range(1, dim):
        cols.append(((u + axis * golden * np.arange(n_paths)) % 1.0) * periods[axis])
    return np.column_stack(cols)


def simulate_sde(
    model: ModelSpec,
    dt: float,
    steps: int,
    n_paths: int,
    seed: int,
    store_every: int = 1,
    initial: Optional[np.ndarray] = None,
) -> TrajectoryEnsemble:
    """Integrate the model's drift under its own noise level.

    Parameters
    ----------
    model : ModelSpec
        Supplies the continuum drift, the noise level, and the domain.
    dt, steps, n_paths, seed : float, int, int, int
        Step size, step count, ensemble size, and the single seed from which
        every per-path stream is spawned.
    store_every : int
        Keep every this-many-th step (the initial state is always kept).
    initial : ndarray, optional
        Start positions, shape (n_paths, dim); defaults to a deterministic
        uniform spread over the domain.

    A stability warning is emitted when dt exceeds the heuristic threshold
    0.1 * eps / max|A|^2 for the drift-dominated regime.
    """
    if dt <= 0 or not np.isfinite(dt):
        raise ValidationError(f"step size must be positive, got {dt}")
    if steps < 1 or n_paths < 1 or store_every < 1:
        raise ValidationError(
            f"steps, n_paths, store_every must be >= 1, got "
            f"({steps}, {n_paths}, {store_every})"
        )
    eps = model.noise.epsilon
    dim = model.mesh.dimension
    periods = tuple(float(L) for L in model.mesh.lengths)
    vmax = model.flow.max_speed()
    if eps > 0 and vmax > 0 and dt > 0.1 * eps / vmax**2:
        warnings.warn(
            f"dt = {dt:.3g} exceeds the stability heuristic "
            f"0.1*eps/max|A|^2 = {0.1 * eps / vmax ** 2:.3g}",
            StabilityWarning, stacklevel=2,
        )

    if initial is None:
        x = _default_initial(n_paths, periods)
    else:
        x = np.array(initial, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape != (n_paths, dim):
            raise ValidationError(
                f"initial positions must have shape ({n_paths}, {dim})"
            )

    n_stored = steps // store_every + 1
    positions = np.empty((n_paths, n_stored, dim))
    windings = np.empty((n_paths, n_stored, dim), dtype=np.int32)
    periods_arr = np.asarray(periods)

    def store(slot, state):
        turns = np.floor(state / periods_arr)
        windings[:, slot, :] = turns.astype(np.int32)
        positions[:, slot, :] = state - turns * periods_arr

    store(0, x)
    gens = [np.random.Generator(np.random.Philox(child))
            for child in np.random.SeedSequence(seed).spawn(n_paths)]
    amp = np.sqrt(eps * dt)
    chunk_steps = max(1, min(steps, _CHUNK_SCALARS // (n_paths * dim)))

    done = 0
    slot = 1
    while done < steps:
        m = min(chunk_steps, steps - done)
        noise = np.empty((m, n_paths, dim))
        for p, g in enumerate(gens):
            noise[:, p, :] = g.standard_normal((m, dim))
        for t in range(m):
            if dim == 1:
                a = np.asarray(model.drift(x[:, 0]), dtype=float)[:, None]
            else:
                a = np.asarray(model.drift(x), dtype=float)
            x = x - a * dt + amp * noise[t]
            done += 1
            if done % store_every == 0:
                store(slot, x)
                slot += 1

    return TrajectoryEnsemble(
        positions=positions,
        windings=windings,
        dt=float(dt),
        store_every=int(store_every),
        n_steps=int(steps),
        seed=int(seed),
        epsilon=float(eps),
        periods=periods,
        model_name=model.name,
    )


# ----------------------------------------------------------------------
# occupation statistics
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class HistogramResult:
    bin_edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    n_samples: int
    period: float


def stationary_histogram(ensemble: TrajectoryEnsemble, bins: int = 64) -> HistogramResult:
    """Normalized occupation histogram after discarding the first 20%.

    Requires a 1-dimensional domain and at least 10^4 post-burn-in samples.
    """
    if ensemble.positions.shape[2] != 1:
        raise UnsupportedMeshError("occupation histograms are 1-dimensional")
    if bins < 2:
        raise ValidationError(f"need at least 2 bins, got {bins}")
    start = int(np.ceil(_BURN_IN_FRACTION * ensemble.n_stored))
    samples = ensemble.positions[:, start:, 0].ravel()
    if samples.size < _MIN_HISTOGRAM_SAMPLES:
        raise InsufficientSamplesError(
            f"{samples.size} samples after burn-in; at least "
            f"{_MIN_HISTOGRAM_SAMPLES} are needed for a stable histogram"
        )
    period = ensemble.periods[0]
    counts, edges = np.histogram(samples, bins=bins, range=(0.0, period))
    width = period / bins
    density = counts / (samples.size * width)
    return HistogramResult(edges, density, counts, int(samples.size), float(period))


def tv_distance_to_density(hist: HistogramResult,
                           density_fn: Callable[[np.ndarray], np.ndarray],
                           quad_points: int = 33) -> float:
    """Total variation between the histogram and a (possibly unnormalized)
    reference density, with the reference integrated bin by bin."""
    trapz = getattr(np, "trapezoid", None) or np.trapz
    masses = np.empty(len(hist.counts))
    for b in range(len(hist.counts)):
        xs = np.linspace(hist.bin_edges[b], hist.bin_edges[b + 1], quad_points)
        masses[b] = trapz(np.asarray(density_fn(xs), dtype=float), xs)
    masses /= masses.sum()
    empirical = hist.counts / hist.n_samples
    return float(0.5 * np.sum(np.abs(empirical - masses)))


# ----------------------------------------------------------------------
# autocorrelation fit
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    rate: float
    frequency: float
    window: Tuple[float, float]
    n_lags: int
    c0: float
    dt: float


def _ensemble_autocovariance(series: np.ndarray) -> np.ndarray:
    """Biased-denominator-free autocovariance, FFT per path, path-averaged.

    ``series`` is complex, shape (n_paths, T); returns C(tau), tau < T.
    """
    n_paths, t_len = series.shape
    nfft = 1 << int(np.ceil(np.log2(2 * t_len)))
    f = np.fft.fft(series, n=nfft, axis=1)
    raw = np.fft.ifft(f * np.conj(f), axis=1)[:, :t_len]
    # raw[tau] = sum_t O(t+tau) O*(t); normalize by the overlap count
    return raw.mean(axis=0) / (t_len - np.arange(t_len))


def autocorrelation_decay(
    ensemble: TrajectoryEnsemble,
    observable: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    fit_window: Optional[Tuple[float, float]] = None,
    burn_in_fraction: float = 0.0,
) -> DecayFit:
    """Fit rate and frequency of the observable's autocovariance decay.

    The observable must have zero stationary mean (default: the first
    harmonic ``exp(i phi)``); the ensemble should be started from the
    stationary distribution so no burn-in is discarded by default.
    ``fit_window`` restricts the fit to lags within [t_lo, t_hi] (in time
    units); without it the fit runs from the first lag until |C| drops to
    a tenth of |C(0)|.  Raises when the window leaves fewer than five lags
    or the signal sits below the ensemble noise floor.
    """
    if observable is None:
        if ensemble.positions.shape[2] != 1:
            raise ValidationError(
                "the default observable is 1-dimensional; pass one explicitly"
            )
        period = ensemble.periods[0]

        def observable(pos):
            return np.exp(2j * np.pi * pos[..., 0] / period)

    start = int(np.ceil(burn_in_fraction * ensemble.n_stored))
    series = np.asarray(observable(ensemble.positions[:, start:, :]), dtype=complex)
    if series.ndim != 2:
        raise ValidationError("observable must map (paths, times, dim) to (paths, times)")
    corr = _ensemble_autocovariance(series)
    dt_s = ensemble.dt * ensemble.store_every
    c0 = float(np.abs(corr[0]))
    if c0 == 0.0:
        raise UnfittableDecayError("the observable vanishes on every sample")
    # ensemble noise floor: path-to-path spread of the mean observable
    floor = float(np.abs(series.mean(axis=1)).std() / np.sqrt(series.shape[0]))

    mag = np.abs(corr)
    if fit_window is None:
        below = np.nonzero(mag < 0.1 * c0)[0]
        i_lo, i_hi = 1, int(below[0]) if len(below) else len(corr) // 2
    else:
        t_lo, t_hi = fit_window
        i_lo = max(1, int(np.ceil(t_lo / dt_s)))
        i_hi = min(len(corr) - 1, int(np.floor(t_hi / dt_s)))
    if i_hi - i_lo < 5:
        raise UnfittableDecayError(
            f"fit window [{i_lo}, {i_hi}] leaves fewer than five lags"
        )
    window_mag = mag[i_lo:i_hi]
    if np.median(window_mag) <= 3.0 * floor:
        raise UnfittableDecayError(
            f"autocovariance magnitude {np.median(window_mag):.3g} is below "
            f"the ensemble noise floor {floor:.3g}"
        )
    lags = np.arange(i_lo, i_hi) * dt_s
    rate = -np.polyfit(lags, np.log(window_mag), 1)[0]
    phase = np.unwrap(np.angle(corr[i_lo:i_hi]))
    frequency = -np.polyfit(lags, phase, 1)[0]
    return DecayFit(
        rate=float(rate),
        frequency=float(frequency),
        window=(float(lags[0]), float(lags[-1])),
        n_lags=int(i_hi - i_lo),
        c0=c0,
        dt=float(dt_s),
    )


# ----------------------------------------------------------------------
# moment diagnostics
# ----------------------------------------------------------------------

def mean_squared_displacement(ensemble: TrajectoryEnsemble):
    """(times, msd) of unwrapped paths, components summed."""
    u = ensemble.unwrapped()
    disp = u - u[:, :1, :]
    msd = np.sum(disp**2, axis=2).mean(axis=0)
    return ensemble.times, msd


def drift_velocity(ensemble: TrajectoryEnsemble):
    """Mean end-to-end velocity per component and its standard error."""
    u = ensemble.unwrapped()
    total_time = ensemble.times[-1]
    if total_time <= 0:
        raise ValidationError("need at least one stored interval")
    v = (u[:, -1, :] - u[:, 0, :]) / total_time
    return v.mean(axis=0), v.std(axis=0, ddof=1) / np.sqrt(ensemble.n_paths)
