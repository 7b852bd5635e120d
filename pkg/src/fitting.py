"""Exponential growth-rate fits on sampled diagnostics."""

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.stats import linregress

from src.dynamics import TimeSeries
from src.errors import DomainError

logger = logging.getLogger("fitting")

MIN_SAMPLES = 5
MIN_GOODNESS = 0.9


@dataclass(frozen=True)
class GrowthFit:
    rate: float
    window: tuple[float, float]
    goodness: float
    """R^2 of the log-linear fit."""
    intercept: float = 0.0
    samples: int = 0
    auto: bool = False


def fit_growth_rate(series: TimeSeries, window: tuple[float, float]) -> GrowthFit:
    """Least-squares slope of ln(values) against t over the window."""
    t1, t2 = window
    if not t1 < t2:
        raise DomainError(f"fit window start {t1} must precede end {t2}")
    if t1 < series.times[0] or t2 > series.times[-1]:
        raise DomainError(
            f"fit window [{t1}, {t2}] outside series range "
            f"[{series.times[0]}, {series.times[-1]}]"
        )
    sub = series.window(t1, t2)
    if len(sub) < MIN_SAMPLES:
        raise DomainError(f"fit window holds {len(sub)} samples, need {MIN_SAMPLES}")
    if np.any(sub.values <= 0):
        raise DomainError("cannot fit a log-linear rate to nonpositive values")
    log_values = np.log(sub.values)
    fit = linregress(sub.times, log_values)
    if np.ptp(log_values) == 0.0:
        goodness = 1.0
    else:
        goodness = float(min(1.0, max(0.0, fit.rvalue**2)))
    return GrowthFit(
        rate=float(fit.slope),
        window=(float(sub.times[0]), float(sub.times[-1])),
        goodness=goodness,
        intercept=float(fit.intercept),
        samples=len(sub),
    )


def auto_window(
    series: TimeSeries,
    t_end: float | None = None,
    onset_factor: float = 3.0,
    smoothing: float = 0.5,
) -> tuple[float, float]:
    """Early-growth window of a positive series.

    Starts at the first sample above ``onset_factor`` times the initial value.
    From there the smoothed log-derivative is followed to its first local
    maximum, which is the onset itself when growth is already slowing; the
    window ends where the slope falls below half of that maximum. ``t_end``
    caps the end.
    """
    times, values = series.times, series.values
    if values[0] <= 0:
        raise DomainError("auto window needs a positive initial value")
    above = np.nonzero(values > onset_factor * values[0])[0]
    if above.size == 0:
        raise DomainError(
            f"series never exceeds {onset_factor:g}x its initial value; no growth window"
        )
    onset = int(above[0])
    dt = times[1] - times[0]
    log_values = np.log(np.clip(values, np.finfo(float).tiny, None))
    slope = uniform_filter1d(
        np.gradient(log_values, times), max(1, int(round(smoothing / dt))), mode="nearest"
    )

    peak = onset
    while peak + 1 < times.size and slope[peak + 1] > slope[peak]:
        peak += 1
    if slope[peak] <= 0:
        raise DomainError(
            f"log-derivative {slope[peak]:.3g} at t={times[peak]:.6g} is not growth"
        )

    end = times.size - 1
    below = np.nonzero(slope[peak + 1 :] < 0.5 * slope[peak])[0]
    if below.size:
        end = peak + 1 + int(below[0])
    t_stop = float(times[end])
    if t_end is not None:
        t_stop = min(t_stop, t_end)
    # keep enough samples for a fit
    t_stop = max(t_stop, float(times[min(onset + MIN_SAMPLES - 1, times.size - 1)]))
    window = (float(times[onset]), t_stop)
    logger.debug(
        {
            "function": "auto_window",
            "label": series.label,
            "onset": window[0],
            "peak": float(times[peak]),
            "end": window[1],
        }
    )
    return window


def fit_early_growth(
    series: TimeSeries,
    window: tuple[float, float] | None = None,
    t_end: float | None = None,
    min_goodness: float = MIN_GOODNESS,
) -> GrowthFit:
    """Fit over an explicit window, or the auto window when none is given.

    Auto-window fits that are not exponential growth (nonpositive rate or R^2
    below ``min_goodness``) raise DomainError; explicit windows are only logged.
    """
    if window is not None:
        fit = fit_growth_rate(series, window)
    else:
        fit = replace(fit_growth_rate(series, auto_window(series, t_end=t_end)), auto=True)
    if fit.rate > 0 and fit.goodness >= min_goodness:
        return fit
    message = (
        f"rate {fit.rate:.3g} with R^2 {fit.goodness:.3g} over "
        f"[{fit.window[0]:.6g}, {fit.window[1]:.6g}] is not exponential growth"
    )
    if fit.auto:
        raise DomainError(message)
    logger.warning({"function": "fit_early_growth", "label": series.label, "message": message})
    return fit
