"""Inductive position detection: coil fields, flux exclusion by the
superconducting sphere, effective inductance, LC resonance, and induced
voltage versus sphere position.

The field model is analytic: each coil is an ideal multi-turn circular
filament whose magnetostatic field is evaluated through complete
elliptic integrals, and the sphere responds as an induced point dipole
opposing the local field. The sphere radius is small compared with
every coil distance of interest, which is what makes dipole order
sufficient; the finite-difference solver in :mod:`levosc.axisym`
quantifies the error independently.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import ellipe, ellipk

from .errors import ConfigError, DomainError, GeometryError

__all__ = [
    "MU0",
    "CoilSpec",
    "DriveSpec",
    "MediumSpec",
    "DetectionGeometry",
    "SpherePose",
    "SweepRow",
    "SweepResult",
    "coil_field",
    "self_inductance",
    "mutual_inductance",
    "induced_dipole",
    "effective_inductance",
    "resonance_frequency",
    "capacitance_from_resonance",
    "induced_voltage",
    "position_sweep",
    "write_sweep_csv",
    "coaxial_geometry",
    "orthogonal_geometry",
    "load_geometry",
    "check_clearance",
]

MU0 = 4e-7 * math.pi

# A sphere may approach a coil filament no closer than this.
MIN_COIL_CLEARANCE = 1e-4  # m

_Vec3 = tuple[float, float, float]


def _as_vec(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class CoilSpec:
    """An ideal N-turn circular coil.

    ``conductor_cross_section_total`` is the full winding-bundle
    cross-section; it sets the equivalent wire radius used for the
    self-inductance estimate and the current density in the
    finite-difference solver.
    """

    center: _Vec3
    axis: _Vec3
    mean_radius: float
    turns: int
    conductor_cross_section_total: float
    role: str = "receiver"

    def __post_init__(self):
        c = _as_vec(self.center)
        a = _as_vec(self.axis)
        object.__setattr__(self, "center", tuple(float(x) for x in c))
        object.__setattr__(self, "axis", tuple(float(x) for x in a))
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError("coil axis must be a unit vector (|norm-1| <= 1e-12)")
        if self.mean_radius <= 0:
            raise ValueError("mean_radius must be positive")
        if not (isinstance(self.turns, int) and self.turns >= 1):
            raise ValueError("turns must be a positive integer")
        if self.conductor_cross_section_total <= 0:
            raise ValueError("conductor cross-section must be positive")
        if self.role not in ("transmitter", "receiver"):
            raise ValueError(f"unknown coil role {self.role!r}")

    @property
    def center_v(self) -> np.ndarray:
        return np.array(self.center)

    @property
    def axis_v(self) -> np.ndarray:
        return np.array(self.axis)

    @property
    def wire_radius(self) -> float:
        """Radius of the equivalent round bundle, sqrt(S/pi)."""
        return math.sqrt(self.conductor_cross_section_total / math.pi)


@dataclass(frozen=True)
class DriveSpec:
    """Sinusoidal current drive I(t) = I0 cos(omega t)."""

    amplitude: float
    angular_frequency: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("drive amplitude must be non-negative")
        if self.angular_frequency <= 0:
            raise ValueError("angular frequency must be positive")


@dataclass(frozen=True)
class MediumSpec:
    """Electromagnetic properties of the bath around the coils.

    The conductivity is so small that eddy effects are negligible even
    at MHz drive; the record exists to document why the quasi-static
    field treatment is valid, not to feed a loss model.
    """

    relative_permittivity: float = 1.048
    relative_permeability: float = 1.0
    conductivity: float = 1e-13

    def __post_init__(self):
        if self.relative_permittivity < 1.0:
            raise ValueError("relative permittivity must be >= 1")
        if self.relative_permeability <= 0:
            raise ValueError("relative permeability must be positive")
        if self.conductivity < 0:
            raise ValueError("conductivity must be non-negative")


@dataclass(frozen=True)
class DetectionGeometry:
    """Transmitter, one or two receivers, drive, and the LC circuit.

    ``receiver_inductance`` is an optional measured circuit constant;
    when present it replaces the geometric self-inductance estimate as
    the unperturbed receiver inductance (the measured value includes
    leads and parasitics that the filament model cannot know about).
    """

    transmitter: CoilSpec
    receivers: tuple[CoilSpec, ...]
    drive: DriveSpec
    capacitance: float
    medium: MediumSpec = field(default_factory=MediumSpec)
    receiver_inductance: float | None = None

    def __post_init__(self):
        receivers = tuple(self.receivers)
        object.__setattr__(self, "receivers", receivers)
        if self.transmitter.role != "transmitter":
            raise ValueError("transmitter coil must carry the transmitter role")
        if not 1 <= len(receivers) <= 2:
            raise ValueError("need one or two receiver coils")
        for r in receivers:
            if r.role != "receiver":
                raise ValueError("receiver coils must carry the receiver role")
        if len(receivers) == 2:
            dot = abs(float(np.dot(receivers[0].axis_v, receivers[1].axis_v)))
            if dot >= 1e-6:
                raise ValueError("two receivers must have orthogonal axes")
        if self.capacitance <= 0:
            raise ValueError("capacitance must be positive")
        if self.receiver_inductance is not None and self.receiver_inductance <= 0:
            raise ValueError("receiver_inductance must be positive if given")


@dataclass(frozen=True)
class SpherePose:
    """Superconducting sphere position and radius."""

    center: _Vec3
    radius: float

    def __post_init__(self):
        c = _as_vec(self.center)
        object.__setattr__(self, "center", tuple(float(x) for x in c))
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")

    @property
    def center_v(self) -> np.ndarray:
        return np.array(self.center)


@dataclass(frozen=True)
class SweepRow:
    position: float
    L_eff: float
    delta_L: float
    f: float
    V: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    errors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        pos = [r.position for r in self.rows]
        increasing = all(b > a for a, b in zip(pos, pos[1:]))
        decreasing = all(b < a for a, b in zip(pos, pos[1:]))
        if len(pos) > 1 and not (increasing or decreasing):
            raise ValueError("sweep rows must be ordered by position")
        for r in self.rows:
            if not math.isnan(r.L_eff) and r.L_eff <= 0:
                raise ValueError("L_eff must be positive")


def _point_to_circle_distance(point: np.ndarray, center: np.ndarray,
                              axis: np.ndarray, radius: float) -> float:
    rel = point - center
    z = float(np.dot(rel, axis))
    rho = float(np.linalg.norm(rel - z * axis))
    return math.hypot(rho - radius, z)


def check_clearance(geometry: DetectionGeometry, pose: SpherePose) -> None:
    """Reject poses that put the sphere within 0.1 mm of any winding."""
    coils = (geometry.transmitter, *geometry.receivers)
    for coil in coils:
        d = _point_to_circle_distance(pose.center_v, coil.center_v,
                                      coil.axis_v, coil.mean_radius)
        if d < pose.radius + MIN_COIL_CLEARANCE:
            raise GeometryError(
                f"sphere surface within {MIN_COIL_CLEARANCE * 1e3:.1f} mm of "
                f"a {coil.role} winding (separation {d:.4g} m)")


def _orthobasis(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # pick the cartesian direction least aligned with the axis
    seed = np.zeros(3)
    seed[int(np.argmin(np.abs(axis)))] = 1.0
    u = seed - np.dot(seed, axis) * axis
    u /= np.linalg.norm(u)
    return u, np.cross(axis, u)


def _loop_field_rz(a: float, rho, z):
    """Field of a 1-turn unit-current loop of radius ``a`` in its own
    frame; returns (B_rho, B_z) for array-like cylindrical coordinates.
    """
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    near_axis = rho < 1e-12 * a
    rho_safe = np.where(near_axis, 1.0, rho)
    beta_sq = (a + rho_safe)**2 + z**2
    alpha_sq = (a - rho_safe)**2 + z**2
    m = 4.0 * a * rho_safe / beta_sq
    K = ellipk(m)
    E = ellipe(m)
    denom = 2.0 * math.pi * np.sqrt(beta_sq)
    B_z = MU0 / denom * (K + E * (a**2 - rho_safe**2 - z**2) / alpha_sq)
    B_rho = (MU0 * z / (denom * rho_safe)
             * (E * (a**2 + rho_safe**2 + z**2) / alpha_sq - K))
    axial = MU0 * a**2 / (2.0 * (a**2 + z**2)**1.5)
    B_z = np.where(near_axis, axial, B_z)
    B_rho = np.where(near_axis, 0.0, B_rho)
    return B_rho, B_z


def _coil_field_points(coil: CoilSpec, current: float,
                       points: np.ndarray) -> np.ndarray:
    """Vectorized field of the coil at an (n, 3) block of points."""
    axis = coil.axis_v
    rel = points - coil.center_v
    z = rel @ axis
    radial = rel - np.outer(z, axis)
    rho = np.linalg.norm(radial, axis=1)
    filament_dist = np.hypot(rho - coil.mean_radius, z)
    if np.any(filament_dist < 1e-9):
        raise DomainError("field requested on the coil filament")
    B_rho, B_z = _loop_field_rz(coil.mean_radius, rho, z)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho_hat = np.where(rho[:, None] > 0, radial / np.where(
            rho[:, None] > 0, rho[:, None], 1.0), 0.0)
    B = B_rho[:, None] * rho_hat + B_z[:, None] * axis[None, :]
    return coil.turns * current * B


def coil_field(coil: CoilSpec, current: float, point) -> np.ndarray:
    """Magnetostatic field of the coil at one point, tesla.

    Exact single-filament loop field (complete elliptic integrals),
    multiplied by the turn count. Points closer than 1 nm to the
    filament are rejected as singular.
    """
    pts = _as_vec(point)[None, :]
    return _coil_field_points(coil, current, pts)[0]


def self_inductance(coil: CoilSpec) -> float:
    """Self-inductance of the N-turn loop with an equivalent round
    bundle: mu0 N^2 R (ln(8R/a) - 2)."""
    a_w = coil.wire_radius
    if a_w >= coil.mean_radius:
        raise GeometryError("winding bundle thicker than the coil radius")
    R = coil.mean_radius
    return MU0 * coil.turns**2 * R * (math.log(8.0 * R / a_w) - 2.0)


def _min_circle_separation(coil_a: CoilSpec, coil_b: CoilSpec,
                           samples: int = 90) -> float:
    phi = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    u, v = _orthobasis(coil_a.axis_v)
    ring = (coil_a.center_v[None, :]
            + coil_a.mean_radius * (np.outer(np.cos(phi), u)
                                    + np.outer(np.sin(phi), v)))
    dists = [_point_to_circle_distance(p, coil_b.center_v, coil_b.axis_v,
                                       coil_b.mean_radius) for p in ring]
    return min(dists)


def mutual_inductance(coil_a: CoilSpec, coil_b: CoilSpec,
                      n_radial: int = 32, n_angular: int = 64) -> float:
    """Mutual inductance: flux of a's unit-current field through b's
    mean cross-section, times b's turns.

    Quadrature is Gauss-Legendre in radius and periodic trapezoid in
    angle over the mean disk of ``coil_b``; both converge fast because
    the integrand is smooth for disjoint coils.
    """
    if _min_circle_separation(coil_a, coil_b) < MIN_COIL_CLEARANCE:
        raise GeometryError("coils overlap or nearly touch")
    nodes, weights = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * coil_b.mean_radius * (nodes + 1.0)
    w_r = 0.5 * coil_b.mean_radius * weights
    phi = 2.0 * math.pi * np.arange(n_angular) / n_angular
    w_phi = 2.0 * math.pi / n_angular
    u, v = _orthobasis(coil_b.axis_v)
    pts = (coil_b.center_v[None, None, :]
           + r[:, None, None] * (np.cos(phi)[None, :, None] * u
                                 + np.sin(phi)[None, :, None] * v))
    B = _coil_field_points(coil_a, 1.0, pts.reshape(-1, 3))
    Bn = (B @ coil_b.axis_v).reshape(len(r), n_angular)
    flux = float(np.sum(w_r[:, None] * r[:, None] * Bn) * w_phi)
    return coil_b.turns * flux


def induced_dipole(B_local, sphere_radius: float) -> np.ndarray:
    """Moment of a perfectly diamagnetic sphere in a locally uniform
    field: m = -(2 pi r^3 / mu0) B."""
    if sphere_radius <= 0:
        raise DomainError("sphere radius must be positive")
    return -(2.0 * math.pi * sphere_radius**3 / MU0) * _as_vec(B_local)


def effective_inductance(geometry: DetectionGeometry, pose: SpherePose,
                         which_receiver: int = 0) -> tuple[float, float]:
    """Receiver inductance with the sphere present.

    Returns ``(L_eff, delta_L)`` where ``delta_L`` is the sphere
    dipole's flux through the receiver per unit receiver current. By
    reciprocity that equals m(B_unit) . B_unit, so it is always
    negative: flux exclusion can only reduce the self-flux.
    """
    check_clearance(geometry, pose)
    receiver = geometry.receivers[which_receiver]
    if geometry.receiver_inductance is not None:
        L0 = geometry.receiver_inductance
    else:
        L0 = self_inductance(receiver)
    B_unit = coil_field(receiver, 1.0, pose.center_v)
    moment = induced_dipole(B_unit, pose.radius)
    delta_L = float(np.dot(moment, B_unit))
    return L0 + delta_L, delta_L


def resonance_frequency(L_eff: float, C: float) -> float:
    """LC resonance f = 1 / (2 pi sqrt(L C))."""
    if L_eff <= 0 or C <= 0:
        raise DomainError("inductance and capacitance must be positive")
    return 1.0 / (2.0 * math.pi * math.sqrt(L_eff * C))


def capacitance_from_resonance(f0: float, L: float) -> float:
    """Exact inverse of :func:`resonance_frequency` in C."""
    if f0 <= 0 or L <= 0:
        raise DomainError("frequency and inductance must be positive")
    return 1.0 / ((2.0 * math.pi * f0)**2 * L)


def _mutual_with_sphere(geometry: DetectionGeometry, pose: SpherePose | None,
                        which_receiver: int) -> float:
    receiver = geometry.receivers[which_receiver]
    M0 = mutual_inductance(geometry.transmitter, receiver)
    if pose is None:
        return M0
    B_t = coil_field(geometry.transmitter, 1.0, pose.center_v)
    B_r = coil_field(receiver, 1.0, pose.center_v)
    moment = induced_dipole(B_t, pose.radius)
    return M0 + float(np.dot(moment, B_r))


def induced_voltage(geometry: DetectionGeometry, pose: SpherePose | None,
                    which_receiver: int = 0,
                    driven: str = "transmitter") -> float:
    """Receiver voltage amplitude under the quasi-static approximation.

    With the transmitter driven, the amplitude is |M_eff| I0 omega
    where M_eff is the sphere-perturbed transmitter-receiver coupling;
    with the receiver itself driven it is |L_eff| I0 omega.
    """
    if driven not in ("transmitter", "receiver"):
        raise ConfigError(f"driven must be transmitter or receiver, got {driven!r}")
    if pose is not None:
        check_clearance(geometry, pose)
    I0 = geometry.drive.amplitude
    omega = geometry.drive.angular_frequency
    if driven == "transmitter":
        coupling = _mutual_with_sphere(geometry, pose, which_receiver)
    else:
        if pose is None:
            L0 = (geometry.receiver_inductance
                  if geometry.receiver_inductance is not None
                  else self_inductance(geometry.receivers[which_receiver]))
            coupling = L0
        else:
            coupling, _ = effective_inductance(geometry, pose, which_receiver)
    return abs(coupling) * I0 * omega


def position_sweep(geometry: DetectionGeometry,
                   poses: Sequence[SpherePose],
                   which_receiver: int = 0,
                   driven: str = "transmitter") -> SweepResult:
    """Evaluate L_eff, resonance, and voltage along a pose path.

    The recorded position is the signed distance of the sphere center
    from the receiver center along the receiver axis. Rows that fail a
    geometry or domain check are kept as NaN rows and the error text is
    collected; the sweep always completes.
    """
    if not poses:
        raise ConfigError("sweep needs at least one pose")
    receiver = geometry.receivers[which_receiver]
    rows: list[SweepRow] = []
    errors: list[tuple[int, str]] = []
    for i, pose in enumerate(poses):
        position = float(np.dot(pose.center_v - receiver.center_v,
                                receiver.axis_v))
        try:
            L_eff, delta_L = effective_inductance(geometry, pose,
                                                  which_receiver)
            f = resonance_frequency(L_eff, geometry.capacitance)
            V = induced_voltage(geometry, pose, which_receiver, driven)
            rows.append(SweepRow(position, L_eff, delta_L, f, V))
        except DomainError as exc:
            errors.append((i, str(exc)))
            rows.append(SweepRow(position, math.nan, math.nan,
                                 math.nan, math.nan))
    return SweepResult(rows=tuple(rows), errors=tuple(errors))


def write_sweep_csv(result: SweepResult, fh: io.TextIOBase,
                    header_comment: str | None = None,
                    oracle_delta_L: Sequence[float] | None = None) -> None:
    """Emit a sweep as CSV; failed rows leave their fields empty.

    When ``oracle_delta_L`` is given (one value per row, NaN allowed),
    two extra columns report the independent field-solver result and
    its relative agreement with the dipole-model ``delta_L``.
    """
    cols = ["position_m", "L_eff_H", "delta_L_H", "f_Hz", "V_amplitude_V"]
    if oracle_delta_L is not None:
        if len(oracle_delta_L) != len(result.rows):
            raise ConfigError("need one oracle value per sweep row")
        cols += ["delta_L_oracle_H", "oracle_agreement"]
    if header_comment:
        fh.write(f"# {header_comment}\n")
    for idx, msg in result.errors:
        fh.write(f"# row {idx} error: {msg}\n")
    fh.write(",".join(cols) + "\n")

    def fmt(x: float) -> str:
        return "" if math.isnan(x) else repr(x)

    for i, row in enumerate(result.rows):
        fields = [repr(row.position), fmt(row.L_eff), fmt(row.delta_L),
                  fmt(row.f), fmt(row.V)]
        if oracle_delta_L is not None:
            o = float(oracle_delta_L[i])
            fields.append(fmt(o))
            if math.isnan(o) or math.isnan(row.delta_L) or o == 0.0:
                fields.append("")
            else:
                fields.append(repr(abs(row.delta_L - o) / abs(o)))
        fh.write(",".join(fields) + "\n")


def coaxial_geometry(d_z: float = 2.27e-2,
                     drive_amplitude: float = 0.035,
                     drive_frequency: float = 1.6e6,
                     capacitance: float = 470e-12,
                     receiver_inductance: float | None = 21e-6,
                     ) -> DetectionGeometry:
    """Coaxial measurement arrangement: 3 mm/60-turn receiver at the
    origin and 12.5 mm/100-turn transmitter a distance ``d_z`` above it
    on the shared +z axis."""
    receiver = CoilSpec(center=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 1.0),
                        mean_radius=3e-3, turns=60,
                        conductor_cross_section_total=0.012e-4,
                        role="receiver")
    transmitter = CoilSpec(center=(0.0, 0.0, d_z), axis=(0.0, 0.0, 1.0),
                           mean_radius=12.5e-3, turns=100,
                           conductor_cross_section_total=0.022e-4,
                           role="transmitter")
    drive = DriveSpec(amplitude=drive_amplitude,
                      angular_frequency=2.0 * math.pi * drive_frequency)
    return DetectionGeometry(transmitter=transmitter, receivers=(receiver,),
                             drive=drive, capacitance=capacitance,
                             receiver_inductance=receiver_inductance)


def orthogonal_geometry(r_trans: float = 2.6e-2,
                        d_z: float = 2.2e-2,
                        drive_amplitude: float = 0.035,
                        drive_frequency: float = 1.6e6,
                        capacitance: float = 470e-12,
                        ) -> DetectionGeometry:
    """Three-dimensional arrangement: vertical-axis transmitter ring of
    radius ``r_trans`` in the levitation plane and a pair of mutually
    orthogonal horizontal-axis receivers a height ``d_z`` above it."""
    transmitter = CoilSpec(center=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 1.0),
                           mean_radius=r_trans, turns=100,
                           conductor_cross_section_total=0.022e-4,
                           role="transmitter")
    rx1 = CoilSpec(center=(0.0, 0.0, d_z), axis=(1.0, 0.0, 0.0),
                   mean_radius=3e-3, turns=60,
                   conductor_cross_section_total=0.012e-4, role="receiver")
    rx2 = CoilSpec(center=(0.0, 0.0, d_z), axis=(0.0, 1.0, 0.0),
                   mean_radius=3e-3, turns=60,
                   conductor_cross_section_total=0.012e-4, role="receiver")
    drive = DriveSpec(amplitude=drive_amplitude,
                      angular_frequency=2.0 * math.pi * drive_frequency)
    return DetectionGeometry(transmitter=transmitter, receivers=(rx1, rx2),
                             drive=drive, capacitance=capacitance)


def _coil_from_json(obj: dict, role: str) -> CoilSpec:
    try:
        return CoilSpec(center=tuple(obj["center_m"]),
                        axis=tuple(obj["axis"]),
                        mean_radius=float(obj["mean_radius_m"]),
                        turns=int(obj["turns"]),
                        conductor_cross_section_total=float(
                            obj["conductor_cross_section_m2"]),
                        role=obj.get("role", role))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad coil entry: {exc}") from exc


def load_geometry(path: str | Path) -> DetectionGeometry:
    """Read a detection geometry from its JSON description.

    Keys carry explicit unit suffixes (``center_m``, ``mean_radius_m``,
    ``capacitance_F``, drive ``amplitude_A`` + ``frequency_Hz``).
    """
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read geometry {path}: {exc}") from exc
    try:
        transmitter = _coil_from_json(obj["transmitter"], "transmitter")
        receivers = tuple(_coil_from_json(r, "receiver")
                          for r in obj["receivers"])
        drive_obj = obj["drive"]
        if "angular_frequency_rad_s" in drive_obj:
            omega = float(drive_obj["angular_frequency_rad_s"])
        else:
            omega = 2.0 * math.pi * float(drive_obj["frequency_Hz"])
        drive = DriveSpec(amplitude=float(drive_obj["amplitude_A"]),
                          angular_frequency=omega)
        medium_obj = obj.get("medium", {})
        medium = MediumSpec(
            relative_permittivity=float(
                medium_obj.get("relative_permittivity", 1.048)),
            relative_permeability=float(
                medium_obj.get("relative_permeability", 1.0)),
            conductivity=float(medium_obj.get("conductivity_S_per_m", 1e-13)))
        L_rx = obj.get("receiver_inductance_H")
        return DetectionGeometry(
            transmitter=transmitter, receivers=receivers, drive=drive,
            capacitance=float(obj["capacitance_F"]), medium=medium,
            receiver_inductance=None if L_rx is None else float(L_rx))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad geometry file {path}: {exc}") from exc
