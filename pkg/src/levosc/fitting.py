"""Helium-3 concentration estimation from measured decay times.

The damping model is monotone in n3 wherever impurity drag matters, so
the sum of squared log residuals is unimodal in ln(n3) and a 1-D
golden-section search is enough; no Jacobian machinery. Residuals live
in log space because tau spans many decades. Rows above the regime
threshold (default 0.6 K) are down-weighted: the hydrodynamic-ballistic
cross-over has no trustworthy model, so those points should steer the
fit only weakly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .damping import (DEFAULT_TAU_VACUUM, OscillatorSpec, RegimeMode,
                      damping_curve)
from .errors import BracketError, ConfigError, DataError
from .media import HeliumMedia, HeliumState, he4_number_density

__all__ = [
    "TauTemperatureSeries",
    "ConcentrationFit",
    "REGIME_WEIGHT_THRESHOLD",
    "REGIME_WEIGHT",
    "model_tau",
    "model_residuals",
    "fit_he3_concentration",
    "predict_contamination",
    "load_tau_series_csv",
    "write_residuals_csv",
    "concentration_fit_dict",
]

# Rows warmer than this get their weight multiplied by REGIME_WEIGHT.
REGIME_WEIGHT_THRESHOLD = 0.6  # K
REGIME_WEIGHT = 0.1

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TauTemperatureSeries:
    """Measured (T, tau) rows, optionally with per-row uncertainty."""

    rows: tuple[tuple[float, float, float | None], ...]

    def __post_init__(self):
        if not self.rows:
            raise ValueError("series is empty")
        for T, tau, sigma in self.rows:
            if T <= 0:
                raise ValueError("temperatures must be positive")
            if tau <= 0:
                raise ValueError("decay times must be positive")
            if sigma is not None and sigma < 0:
                raise ValueError("sigma_tau must be non-negative")

    @property
    def temperatures(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def taus(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])


@dataclass(frozen=True)
class ConcentrationFit:
    n3: float
    x3: float
    residual_rms: float
    n3_bracket: tuple[float, float]
    regime_mode: RegimeMode
    tau_vacuum: float | None = None
    fitted_tau_vacuum: float | None = None

    def __post_init__(self):
        if self.n3 <= 0:
            raise ValueError("n3 must be positive")


def model_tau(osc: OscillatorSpec, media: HeliumMedia, T: float, n3: float,
              mode: RegimeMode = RegimeMode.RECIPROCAL_SUM,
              tau_vacuum: float | None = DEFAULT_TAU_VACUUM) -> float:
    """Composite decay time at one temperature for a given n3."""
    (_, bd), = damping_curve(osc, media, [T], n3, mode, tau_vacuum)
    return bd.tau_total


def model_residuals(series: TauTemperatureSeries, osc: OscillatorSpec,
                    media: HeliumMedia, n3: float,
                    mode: RegimeMode = RegimeMode.RECIPROCAL_SUM,
                    tau_vacuum: float | None = DEFAULT_TAU_VACUUM,
                    ) -> np.ndarray:
    """Log-space residuals ln(tau_model) - ln(tau_data), one per row.

    A row where the model cannot be evaluated becomes NaN rather than
    failing the whole vector; downstream sums skip NaN rows.
    """
    out = np.empty(len(series.rows))
    for i, (T, tau_data, _) in enumerate(series.rows):
        try:
            tau_m = model_tau(osc, media, T, n3, mode, tau_vacuum)
            out[i] = math.log(tau_m) - math.log(tau_data)
        except (ValueError, ArithmeticError):
            out[i] = math.nan
    return out


def _regime_weights(series: TauTemperatureSeries,
                    threshold: float, weight: float) -> np.ndarray:
    T = series.temperatures
    return np.where(T > threshold, weight, 1.0)


def _golden_minimize(fn: Callable[[float], float], lo: float, hi: float,
                     tol: float) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def fit_he3_concentration(series: TauTemperatureSeries, osc: OscillatorSpec,
                          media: HeliumMedia,
                          bracket: tuple[float, float] = (1e18, 1e23),
                          mode: RegimeMode = RegimeMode.RECIPROCAL_SUM,
                          tau_vacuum: float | None = DEFAULT_TAU_VACUUM,
                          fit_vacuum: bool = False,
                          vacuum_bracket: tuple[float, float] = (1e4, 1e7),
                          regime_threshold: float = REGIME_WEIGHT_THRESHOLD,
                          regime_weight: float = REGIME_WEIGHT,
                          tol: float = 1e-6) -> ConcentrationFit:
    """Golden-section fit of n3 on a logarithmic bracket.

    The bracket must span at least four decades. A minimum pinned to a
    bracket edge raises :class:`BracketError`: the data carry no
    impurity signature (or the bracket excludes the true value).

    With ``fit_vacuum`` the constant vacuum channel is fitted too, by a
    nested 1-D search at every n3 candidate.
    """
    n3_lo, n3_hi = bracket
    if not 0 < n3_lo < n3_hi:
        raise ConfigError("bracket must satisfy 0 < low < high")
    if math.log10(n3_hi / n3_lo) < 4.0:
        raise ConfigError("bracket must span at least four decades of n3")
    weights = _regime_weights(series, regime_threshold, regime_weight)

    def objective_for(n3: float, tau_vac: float | None) -> float:
        r = model_residuals(series, osc, media, n3, mode, tau_vac)
        ok = np.isfinite(r)
        if not ok.any():
            raise DataError("model undefined on every row")
        return float(np.sum(weights[ok] * r[ok]**2))

    if fit_vacuum:
        v_lo, v_hi = math.log(vacuum_bracket[0]), math.log(vacuum_bracket[1])

        def best_vacuum(n3: float) -> float:
            return _golden_minimize(
                lambda v: objective_for(n3, math.exp(v)), v_lo, v_hi, 1e-4)

        def objective(u: float) -> float:
            n3 = math.exp(u)
            return objective_for(n3, math.exp(best_vacuum(n3)))
    else:
        def objective(u: float) -> float:
            return objective_for(math.exp(u), tau_vacuum)

    u_lo, u_hi = math.log(n3_lo), math.log(n3_hi)
    u_star = _golden_minimize(objective, u_lo, u_hi, tol)
    span = u_hi - u_lo
    if (u_star - u_lo) < 0.005 * span or (u_hi - u_star) < 0.005 * span:
        raise BracketError(
            "fitted n3 pinned to the bracket edge; the series has no "
            "identifiable impurity signature inside the bracket")
    n3 = math.exp(u_star)
    fitted_vac = math.exp(best_vacuum(n3)) if fit_vacuum else None
    vac_used = fitted_vac if fit_vacuum else tau_vacuum
    r = model_residuals(series, osc, media, n3, mode, vac_used)
    ok = np.isfinite(r)
    rms = float(np.sqrt(np.sum(weights[ok] * r[ok]**2)
                        / np.sum(weights[ok])))
    state = HeliumState(temperature=1.0, he3_fraction=0.0,
                        he4_mass_density=media.he4_mass_density)
    n4 = he4_number_density(state, media.constants)
    return ConcentrationFit(n3=n3, x3=n3 / n4, residual_rms=rms,
                            n3_bracket=(n3_lo, n3_hi), regime_mode=mode,
                            tau_vacuum=tau_vacuum,
                            fitted_tau_vacuum=fitted_vac)


def predict_contamination(x3: "float | ConcentrationFit", added_x3: float,
                          osc: OscillatorSpec, media: HeliumMedia,
                          T_grid: Sequence[float],
                          mode: RegimeMode = RegimeMode.RECIPROCAL_SUM,
                          ) -> tuple[list[tuple[float, float]],
                                     list[tuple[float, float]]]:
    """tau(T) curves before and after adding a known amount of helium-3.

    Accepts either the baseline fraction directly or a
    :class:`ConcentrationFit` carrying it. The curves contain only the
    medium channels (no vacuum channel): they isolate what the added
    impurities do to the bath damping, and in the impurity-dominated
    regime the tau ratio between the curves is exactly
    x3 / (x3 + added_x3).
    """
    if isinstance(x3, ConcentrationFit):
        x3 = x3.x3
    if added_x3 < 0:
        raise ConfigError("added_x3 must be non-negative")
    state = HeliumState(temperature=1.0, he3_fraction=0.0,
                        he4_mass_density=media.he4_mass_density)
    n4 = he4_number_density(state, media.constants)
    base = damping_curve(osc, media, T_grid, x3 * n4, mode, tau_vacuum=None)
    contaminated = damping_curve(osc, media, T_grid, (x3 + added_x3) * n4,
                                 mode, tau_vacuum=None)
    return ([(T, bd.tau_total) for T, bd in base],
            [(T, bd.tau_total) for T, bd in contaminated])


def load_tau_series_csv(path: str | Path) -> TauTemperatureSeries:
    """Read (T_K, tau_s[, sigma_tau_s]) rows, header optional."""
    rows: list[tuple[float, float, float | None]] = []
    try:
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].lstrip().startswith("#"):
                    continue
                try:
                    T = float(rec[0])
                except ValueError:
                    if not rows:
                        continue  # header line
                    raise
                tau = float(rec[1])
                sigma = None
                if len(rec) > 2 and rec[2].strip():
                    sigma = float(rec[2])
                rows.append((T, tau, sigma))
    except (OSError, ValueError, IndexError) as exc:
        raise DataError(f"cannot read tau series {path}: {exc}") from exc
    if not rows:
        raise DataError(f"tau series {path} has no data rows")
    try:
        return TauTemperatureSeries(rows=tuple(rows))
    except ValueError as exc:
        raise DataError(f"tau series {path}: {exc}") from exc


def write_residuals_csv(series: TauTemperatureSeries,
                        residuals: np.ndarray, fh: io.TextIOBase,
                        header_comment: str | None = None) -> None:
    if header_comment:
        fh.write(f"# {header_comment}\n")
    fh.write("T_K,tau_s,log_residual\n")
    for (T, tau, _), r in zip(series.rows, residuals):
        field = "" if math.isnan(r) else repr(float(r))
        fh.write(f"{T!r},{tau!r},{field}\n")


def concentration_fit_dict(fit: ConcentrationFit,
                           tol: float = 1e-6) -> dict[str, object]:
    """JSON-ready record with full fit provenance."""
    return {
        "n3_per_m3": fit.n3,
        "x3": fit.x3,
        "residual_rms_log": fit.residual_rms,
        "n3_bracket_per_m3": list(fit.n3_bracket),
        "regime_mode": fit.regime_mode.value,
        "tau_vacuum_s": fit.tau_vacuum,
        "fitted_tau_vacuum_s": fit.fitted_tau_vacuum,
        "search_tolerance": tol,
        "regime_weight_threshold_K": REGIME_WEIGHT_THRESHOLD,
        "regime_weight": REGIME_WEIGHT,
        "notes": ("surface bound states can deplete the bulk helium-3 "
                  "concentration near a free surface; this is not "
                  "modeled, so x3 reflects the bulk actually coupled "
                  "to the sphere"),
    }
