"""Per-regime decay times of the oscillating sphere and their
composition into a total ring-down time, plus the derived sensitivity
quantities: linewidth, drag force, force-noise floor, and the T/tau
figure of merit.

Channels:

* hydrodynamic (Stokes drag by the viscous normal component, valid only
  where the viscosity table is, 1.0 K and above),
* ballistic phonon scattering (decay time scaling as T^-4),
* roton scattering (frozen out exponentially at low T),
* helium-3 impurity drag in the collisionless regime,
* a constant externally supplied vacuum (intrinsic) channel.

A channel that evaluates to ``math.inf`` is a saturated "negligible"
channel; it contributes nothing to the composite but is reported as
present. A channel that is ``None`` is absent.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import ConfigError, DomainError, RangeError
from .media import (HeliumMedia, HeliumState, PhysicalConstants,
                    QuasiparticleParams, he3_number_density,
                    thermal_velocity_he3, viscosity_normal)

__all__ = [
    "OscillatorSpec",
    "RegimeMode",
    "DampingBreakdown",
    "SensitivityReport",
    "DEFAULT_TAU_VACUUM",
    "KNUDSEN_DRAG_COEFF",
    "tau_hydrodynamic",
    "tau_phonon",
    "tau_roton",
    "tau_impurity",
    "tau_total",
    "linewidth",
    "drag_force",
    "noise_density",
    "sensitivity_report",
    "damping_curve",
    "write_damping_csv",
    "damping_metadata",
]

# Constant decay time of the levitated sphere with the cell evacuated,
# supplied by measurement rather than by a model.
DEFAULT_TAU_VACUUM = 4.1e5  # s

# Kinetic-theory momentum-transfer coefficient for specular-plus-diffuse
# scattering of a dilute gas off a sphere at large Knudsen number.
KNUDSEN_DRAG_COEFF = 4.1906


@dataclass(frozen=True)
class OscillatorSpec:
    """Mechanical parameters of the levitated sphere.

    ``radius_warm`` is the room-temperature radius; the in-bath radius
    is reduced by ``contraction_fraction``.
    """

    mass: float
    radius_warm: float
    contraction_fraction: float = 0.015
    resonant_frequency: float = 2.7

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.radius_warm <= 0:
            raise ValueError("radius_warm must be positive")
        if not 0.0 <= self.contraction_fraction < 0.1:
            raise ValueError("contraction_fraction must lie in [0, 0.1)")
        if self.resonant_frequency <= 0:
            raise ValueError("resonant_frequency must be positive")

    @property
    def radius(self) -> float:
        """Cold (contracted) radius, m."""
        return self.radius_warm * (1.0 - self.contraction_fraction)


class RegimeMode(Enum):
    """How simultaneous damping channels combine into one decay time."""

    RECIPROCAL_SUM = "ReciprocalSum"
    DOMINANT_ONLY = "DominantOnly"


@dataclass(frozen=True)
class DampingBreakdown:
    """Per-channel decay times plus the composite, one temperature."""

    tau_ph: float
    tau_rot: float
    tau_total: float
    regime_mode: RegimeMode
    tau_hydr: float | None = None
    tau_imp: float | None = None
    tau_vacuum: float | None = None

    def __post_init__(self):
        for name in ("tau_hydr", "tau_ph", "tau_rot", "tau_imp",
                     "tau_vacuum", "tau_total"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive if present")
        if self.regime_mode is RegimeMode.RECIPROCAL_SUM:
            floor = min(self.present_channels().values())
            # allow 1 ulp of slack from the reciprocal arithmetic
            if self.tau_total > floor * (1.0 + 1e-12):
                raise ValueError("composite tau exceeds fastest channel")

    def present_channels(self) -> dict[str, float]:
        out = {}
        for name in ("tau_hydr", "tau_ph", "tau_rot", "tau_imp",
                     "tau_vacuum"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


@dataclass(frozen=True)
class SensitivityReport:
    """Force-sensing figures of merit at one operating point."""

    S_F: float          # N^2/Hz
    F_D: float          # N
    T_over_tau: float   # K/s
    linewidth: float    # Hz

    def __post_init__(self):
        for name in ("S_F", "F_D", "T_over_tau", "linewidth"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def tau_hydrodynamic(osc: OscillatorSpec, eta_n: float) -> float:
    """Stokes-drag decay time M / (3 pi eta_n r)."""
    if eta_n <= 0:
        raise DomainError(f"viscosity must be positive, got {eta_n:g}")
    return osc.mass / (3.0 * math.pi * eta_n * osc.radius)


def tau_phonon(osc: OscillatorSpec, params: QuasiparticleParams,
               constants: PhysicalConstants, T: float) -> float:
    """Ballistic-phonon decay time, growing as T^-4 toward low T.

    45 M hbar^3 c^4 / (pi^2 (k_B T)^4 pi r^2)
    """
    if T <= 0:
        raise DomainError(f"temperature must be positive, got {T:g} K")
    kT = constants.k_B * T
    return (45.0 * osc.mass * constants.hbar**3 * params.c**4
            / (math.pi**2 * kT**4 * math.pi * osc.radius**2))


def tau_roton(osc: OscillatorSpec, params: QuasiparticleParams,
              constants: PhysicalConstants, T: float) -> float:
    """Roton-scattering decay time 6 pi^2 M / (hbar k0^4 e^(-Delta/kT) pi r^2).

    The Boltzmann factor underflows below roughly 25 mK; the channel
    then saturates to ``math.inf`` (negligible) instead of overflowing.
    """
    if T <= 0:
        raise DomainError(f"temperature must be positive, got {T:g} K")
    boltzmann = math.exp(-params.delta_over_kB / T)
    if boltzmann == 0.0:
        return math.inf
    return (6.0 * math.pi**2 * osc.mass
            / (constants.hbar * params.k0**4 * boltzmann
               * math.pi * osc.radius**2))


def tau_impurity(osc: OscillatorSpec, media: HeliumMedia, T: float,
                 n3: float) -> float | None:
    """Knudsen-regime helium-3 drag decay time, or ``None`` when n3 = 0.

    4 M / (4.1906 pi r^2 n3 m3* v_th), so tau scales as 1/(n3 sqrt(T)).
    """
    if T <= 0:
        raise DomainError(f"temperature must be positive, got {T:g} K")
    if n3 < 0:
        raise DomainError(f"n3 must be non-negative, got {n3:g}")
    if n3 == 0.0:
        return None
    m3_eff = media.quasiparticles.m3_eff_ratio * media.constants.m3
    v_th = thermal_velocity_he3(media.constants, media.quasiparticles, T)
    return (4.0 * osc.mass
            / (KNUDSEN_DRAG_COEFF * math.pi * osc.radius**2
               * n3 * m3_eff * v_th))


def tau_total(mode: RegimeMode = RegimeMode.RECIPROCAL_SUM, *,
              tau_hydr: float | None = None,
              tau_ph: float | None = None,
              tau_rot: float | None = None,
              tau_imp: float | None = None,
              tau_vacuum: float | None = None) -> DampingBreakdown:
    """Compose present channels into one decay time.

    ``RECIPROCAL_SUM`` adds decay rates (Matthiessen-style);
    ``DOMINANT_ONLY`` takes the fastest channel alone. Saturated
    (infinite) channels contribute zero rate either way.
    """
    channels = {"tau_hydr": tau_hydr, "tau_ph": tau_ph, "tau_rot": tau_rot,
                "tau_imp": tau_imp, "tau_vacuum": tau_vacuum}
    present = {k: v for k, v in channels.items() if v is not None}
    if not present:
        raise ConfigError("no damping channels present")
    if mode is RegimeMode.RECIPROCAL_SUM:
        rate = math.fsum(1.0 / v for v in present.values())
        total = math.inf if rate == 0.0 else 1.0 / rate
    elif mode is RegimeMode.DOMINANT_ONLY:
        total = min(present.values())
    else:
        raise ConfigError(f"unknown regime mode {mode!r}")
    return DampingBreakdown(regime_mode=mode, tau_total=total, **channels)


def linewidth(tau: float) -> float:
    """Resonance full width 1/(pi tau)."""
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau:g}")
    return 1.0 / (math.pi * tau)


def drag_force(osc: OscillatorSpec, tau: float, velocity: float) -> float:
    """Drag force 2 M V / tau on the sphere moving at speed V."""
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau:g}")
    if velocity < 0:
        raise DomainError(f"velocity must be non-negative, got {velocity:g}")
    return 2.0 * osc.mass * velocity / tau


def noise_density(osc: OscillatorSpec, T: float, tau: float) -> float:
    """Thermal force-noise spectral density 8 k_B M T / tau."""
    if T < 0:
        raise DomainError(f"temperature must be non-negative, got {T:g} K")
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau:g}")
    k_B = PhysicalConstants().k_B
    return 8.0 * k_B * osc.mass * T / tau


def sensitivity_report(osc: OscillatorSpec, T: float, tau: float,
                       velocity: float) -> SensitivityReport:
    """Bundle noise floor, drag force, T/tau, and linewidth."""
    return SensitivityReport(
        S_F=noise_density(osc, T, tau),
        F_D=drag_force(osc, tau, velocity),
        T_over_tau=T / tau,
        linewidth=linewidth(tau))


def damping_curve(osc: OscillatorSpec, media: HeliumMedia,
                  T_grid: Sequence[float], n3: float,
                  mode: RegimeMode = RegimeMode.RECIPROCAL_SUM,
                  tau_vacuum: float | None = DEFAULT_TAU_VACUUM,
                  ) -> list[tuple[float, DampingBreakdown]]:
    """Evaluate the channel breakdown on a strictly increasing T grid.

    Channels outside their validity window (hydrodynamic below the
    viscosity table's floor) are marked absent for that point rather
    than aborting the sweep.
    """
    grid = list(T_grid)
    if not grid:
        raise ConfigError("temperature grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("temperature grid must be strictly increasing")
    if grid[0] <= 0:
        raise ConfigError("temperatures must be positive")
    rows = []
    for i, T in enumerate(grid):
        try:
            try:
                eta = viscosity_normal(media.viscosity, T)
                hydr = tau_hydrodynamic(osc, eta)
            except RangeError:
                hydr = None
            ph = tau_phonon(osc, media.quasiparticles, media.constants, T)
            rot = tau_roton(osc, media.quasiparticles, media.constants, T)
            imp = tau_impurity(osc, media, T, n3)
        except DomainError as exc:
            raise DomainError(f"grid row {i} (T = {T:g} K): {exc}") from exc
        rows.append((T, tau_total(mode, tau_hydr=hydr, tau_ph=ph,
                                  tau_rot=rot, tau_imp=imp,
                                  tau_vacuum=tau_vacuum)))
    return rows


_CSV_COLUMNS = ("T_K", "tau_hydr_s", "tau_ph_s", "tau_rot_s", "tau_imp_s",
                "tau_vac_s", "tau_total_s")


def write_damping_csv(rows: Sequence[tuple[float, DampingBreakdown]],
                      fh: io.TextIOBase, header_comment: str | None = None,
                      ) -> None:
    """Emit the curve as CSV; absent channels become empty fields."""
    if header_comment:
        fh.write(f"# {header_comment}\n")
    fh.write(",".join(_CSV_COLUMNS) + "\n")

    def fmt(value):
        return "" if value is None else repr(value)

    for T, bd in rows:
        fh.write(",".join([repr(T), fmt(bd.tau_hydr), fmt(bd.tau_ph),
                           fmt(bd.tau_rot), fmt(bd.tau_imp),
                           fmt(bd.tau_vacuum), fmt(bd.tau_total)]) + "\n")


def damping_metadata(osc: OscillatorSpec, media: HeliumMedia, n3: float,
                     mode: RegimeMode,
                     tau_vacuum: float | None) -> dict[str, object]:
    """Side-car record describing how a curve was produced.

    Notes the un-modeled cross-over gap explicitly: the hydrodynamic
    channel simply stops below the viscosity table floor and no blend
    with the ballistic channels is attempted there.
    """
    t_floor = media.viscosity.valid_range[0]
    return {
        "regime_mode": mode.value,
        "n3_per_m3": n3,
        "tau_vacuum_s": tau_vacuum,
        "oscillator": {
            "mass_kg": osc.mass,
            "radius_warm_m": osc.radius_warm,
            "contraction_fraction": osc.contraction_fraction,
            "radius_cold_m": osc.radius,
            "resonant_frequency_Hz": osc.resonant_frequency,
        },
        "hydrodynamic_floor_K": t_floor,
        "crossover_note": ("hydrodynamic channel absent below "
                           f"{t_floor:g} K; no blending model is applied "
                           "across the cross-over"),
    }
