"""Physical constants and temperature-dependent properties of liquid
helium-4 with dilute helium-3 impurities, at saturated vapour pressure.

Everything here is SI. The property set is deliberately small: atomic
constants, quasiparticle-gas parameters, and a normal-component
viscosity table. All values are overridable through a plain-text
``key = value`` file, and the viscosity table through a two-column CSV.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError, DataError, DomainError, RangeError

__all__ = [
    "PhysicalConstants",
    "QuasiparticleParams",
    "ViscosityTable",
    "HeliumState",
    "HeliumMedia",
    "DEFAULT_VISCOSITY_TABLE",
    "DEFAULT_HE4_MASS_DENSITY",
    "viscosity_normal",
    "thermal_velocity_he3",
    "he4_number_density",
    "he3_number_density",
    "default_media",
    "load_property_overrides",
    "media_from_overrides",
]

DEFAULT_HE4_MASS_DENSITY = 145.1  # kg/m^3, liquid at SVP below ~1 K


@dataclass(frozen=True)
class PhysicalConstants:
    """Fundamental constants used throughout, CODATA magnitudes.

    Attributes
    ----------
    k_B : float
        Boltzmann constant, J/K.
    hbar : float
        Reduced Planck constant, J*s.
    m3 : float
        Bare helium-3 atomic mass, kg.
    m4 : float
        Helium-4 atomic mass, kg.
    """

    k_B: float = 1.380649e-23
    hbar: float = 1.054571817e-34
    m3: float = 5.0082345e-27
    m4: float = 6.6464770e-27

    def __post_init__(self):
        for name in ("k_B", "hbar", "m3", "m4"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class QuasiparticleParams:
    """Excitation-gas parameters of He II at SVP.

    Attributes
    ----------
    c : float
        First-sound speed, m/s.
    k0 : float
        Roton-minimum wave number, 1/m.
    delta_over_kB : float
        Roton gap divided by k_B, K.
    m3_eff_ratio : float
        Effective-to-bare mass ratio of a helium-3 quasiparticle.
    """

    c: float = 238.0
    k0: float = 1.918e10
    delta_over_kB: float = 8.65
    m3_eff_ratio: float = 2.64

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("sound speed must be positive")
        if self.k0 <= 0:
            raise ValueError("roton wave number must be positive")
        if self.delta_over_kB <= 0:
            raise ValueError("roton gap must be positive")
        if self.m3_eff_ratio <= 0:
            raise ValueError("effective-mass ratio must be positive")


# Normal-component viscosity of He II, 1.00-2.17 K (Donnelly-style
# compilation shape: steep drop from 1 K, shallow minimum near 1.8 K).
_VISC_T_K = (1.00, 1.10, 1.20, 1.30, 1.40, 1.50, 1.60,
             1.70, 1.80, 1.90, 2.00, 2.10, 2.17)
_VISC_ETA_PAS = (23.0e-6, 9.0e-6, 4.6e-6, 2.85e-6, 2.05e-6, 1.63e-6, 1.40e-6,
                 1.28e-6, 1.24e-6, 1.28e-6, 1.40e-6, 1.68e-6, 2.40e-6)


@dataclass(frozen=True)
class ViscosityTable:
    """Tabulated normal-component viscosity with a hard validity range.

    Queries outside ``valid_range`` are rejected, never extrapolated:
    the hydrodynamic description itself stops being meaningful there.
    """

    entries: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.entries) < 2:
            raise ValueError("viscosity table needs at least two entries")
        temps = [t for t, _ in self.entries]
        if any(b <= a for a, b in zip(temps, temps[1:])):
            raise ValueError("table temperatures must be strictly increasing")
        if any(eta <= 0 for _, eta in self.entries):
            raise ValueError("table viscosities must be strictly positive")

    @property
    def valid_range(self) -> tuple[float, float]:
        return self.entries[0][0], self.entries[-1][0]

    @classmethod
    def from_csv(cls, path: str | Path) -> "ViscosityTable":
        """Load a replacement table from a two-column CSV (T_K, eta_Pa_s)."""
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(rec[0]), float(rec[1])))
                except (ValueError, IndexError):
                    if not rows:  # tolerate a single header line
                        continue
                    raise DataError(f"bad viscosity row in {path}: {rec!r}")
        if len(rows) < 2:
            raise DataError(f"viscosity CSV {path} has fewer than two rows")
        try:
            return cls(entries=tuple(rows))
        except ValueError as exc:
            raise DataError(f"viscosity CSV {path}: {exc}") from exc


DEFAULT_VISCOSITY_TABLE = ViscosityTable(
    entries=tuple(zip(_VISC_T_K, _VISC_ETA_PAS)))


@dataclass(frozen=True)
class HeliumState:
    """Thermodynamic state of the bath: temperature, helium-3 fraction
    x3 = n3/n4, and helium-4 mass density."""

    temperature: float
    he3_fraction: float = 0.0
    he4_mass_density: float = DEFAULT_HE4_MASS_DENSITY

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0.0 <= self.he3_fraction < 1.0:
            raise ValueError("he3_fraction must lie in [0, 1)")
        if self.he4_mass_density <= 0:
            raise ValueError("he4_mass_density must be positive")


@dataclass(frozen=True)
class HeliumMedia:
    """Bundle of everything the damping and fitting models need to know
    about the medium."""

    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    quasiparticles: QuasiparticleParams = field(
        default_factory=QuasiparticleParams)
    viscosity: ViscosityTable = DEFAULT_VISCOSITY_TABLE
    he4_mass_density: float = DEFAULT_HE4_MASS_DENSITY

    def __post_init__(self):
        if self.he4_mass_density <= 0:
            raise ValueError("he4_mass_density must be positive")


def viscosity_normal(table: ViscosityTable, T: float) -> float:
    """Normal-component viscosity at temperature ``T``.

    Log-log linear interpolation between table nodes; exact at nodes.

    Raises
    ------
    RangeError
        If ``T`` falls outside the table's validity interval.
    """
    lo, hi = table.valid_range
    if not lo <= T <= hi:
        raise RangeError(
            f"viscosity valid only for {lo:g} K <= T <= {hi:g} K, got {T:g} K")
    temps = [t for t, _ in table.entries]
    i = bisect_right(temps, T) - 1
    if temps[i] == T:
        return table.entries[i][1]
    t0, e0 = table.entries[i]
    t1, e1 = table.entries[i + 1]
    frac = (math.log(T) - math.log(t0)) / (math.log(t1) - math.log(t0))
    return math.exp(math.log(e0) + frac * (math.log(e1) - math.log(e0)))


def thermal_velocity_he3(constants: PhysicalConstants,
                         params: QuasiparticleParams, T: float) -> float:
    """Thermal velocity sqrt(2 k_B T / m3*) of a helium-3 quasiparticle."""
    if T <= 0:
        raise DomainError(f"temperature must be positive, got {T:g} K")
    m3_eff = params.m3_eff_ratio * constants.m3
    return math.sqrt(2.0 * constants.k_B * T / m3_eff)


def he4_number_density(state: HeliumState,
                       constants: PhysicalConstants) -> float:
    """Helium-4 number density n4 = rho4 / m4, 1/m^3."""
    return state.he4_mass_density / constants.m4


def he3_number_density(state: HeliumState,
                       constants: PhysicalConstants) -> float:
    """Helium-3 number density n3 = x3 * n4, 1/m^3."""
    return state.he3_fraction * he4_number_density(state, constants)


def default_media() -> HeliumMedia:
    return HeliumMedia()


def load_property_overrides(path: str | Path) -> dict[str, object]:
    """Parse a plain-text ``key = value`` override file.

    Values parse as floats except ``viscosity_csv``, which names a
    replacement table file (resolved relative to the override file).
    Blank lines and ``#`` comments are skipped.
    """
    overrides: dict[str, object] = {}
    path = Path(path)
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "viscosity_csv":
            overrides[key] = str((path.parent / value).resolve())
            continue
        try:
            overrides[key] = float(value)
        except ValueError:
            raise ConfigError(
                f"{path}:{lineno}: value for {key!r} is not a number")
    return overrides


_CONSTANT_KEYS = {"k_B", "hbar", "m3", "m4"}
_QP_KEYS = {"c", "k0", "delta_over_kB", "m3_eff_ratio"}


def media_from_overrides(overrides: Mapping[str, object]) -> HeliumMedia:
    """Build a :class:`HeliumMedia` from defaults plus override entries."""
    constants = PhysicalConstants()
    qp = QuasiparticleParams()
    viscosity = DEFAULT_VISCOSITY_TABLE
    density = DEFAULT_HE4_MASS_DENSITY
    for key, value in overrides.items():
        if key in _CONSTANT_KEYS:
            constants = replace(constants, **{key: float(value)})
        elif key in _QP_KEYS:
            qp = replace(qp, **{key: float(value)})
        elif key == "he4_mass_density":
            density = float(value)
        elif key == "viscosity_csv":
            viscosity = ViscosityTable.from_csv(str(value))
        else:
            raise ConfigError(f"unknown media property {key!r}")
    try:
        return HeliumMedia(constants=constants, quasiparticles=qp,
                           viscosity=viscosity, he4_mass_density=density)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
