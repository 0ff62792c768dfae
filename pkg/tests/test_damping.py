"""Damping channels, composition rules, and sensitivity quantities.

Reference decay times were computed independently with 40-digit
arithmetic from the documented closed forms and frozen as literals;
the implementation must reproduce them from its own code path.
"""

import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from levosc import (ConfigError, DampingBreakdown, DomainError, HeliumState,
                    OscillatorSpec, RegimeMode, damping_curve, drag_force,
                    he4_number_density, linewidth, noise_density,
                    sensitivity_report, tau_hydrodynamic, tau_impurity,
                    tau_phonon, tau_roton, tau_total, viscosity_normal)
from levosc.damping import (DEFAULT_TAU_VACUUM, KNUDSEN_DRAG_COEFF,
                            damping_metadata, write_damping_csv)


def rel(a, b):
    return abs(a - b) / abs(b)


def reference_n3(media, x3=4.2e-8):
    state = HeliumState(temperature=1.0, he3_fraction=0.0,
                        he4_mass_density=media.he4_mass_density)
    return x3 * he4_number_density(state, media.constants)


class TestOscillatorSpec:
    def test_cold_radius(self, osc):
        assert osc.radius == pytest.approx(0.985e-3, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            OscillatorSpec(mass=0.0, radius_warm=1e-3)
        with pytest.raises(ValueError):
            OscillatorSpec(mass=1e-6, radius_warm=-1e-3)
        with pytest.raises(ValueError):
            OscillatorSpec(mass=1e-6, radius_warm=1e-3,
                           contraction_fraction=0.2)


class TestChannelReferences:
    def test_hydrodynamic(self, osc):
        assert rel(tau_hydrodynamic(osc, 1.4e-6), 487.04413331965) < 1e-12

    def test_hydrodynamic_at_table_floor(self, osc, media):
        eta = viscosity_normal(media.viscosity, 1.0)
        tau = tau_hydrodynamic(osc, eta)
        assert rel(tau, 29.646164636848303) < 1e-12

    def test_phonon(self, osc, media):
        q, c = media.quasiparticles, media.constants
        assert rel(tau_phonon(osc, q, c, 0.3), 121.06324364471) < 1e-11
        assert rel(tau_phonon(osc, q, c, 0.15), 1937.0118983154) < 1e-11

    def test_roton(self, osc, media):
        q, c = media.quasiparticles, media.constants
        assert rel(tau_roton(osc, q, c, 0.7), 2.0044755115860) < 1e-11
        assert rel(tau_roton(osc, q, c, 0.6), 15.719567058756) < 1e-11

    def test_roton_saturates_instead_of_overflowing(self, osc, media):
        q, c = media.quasiparticles, media.constants
        assert tau_roton(osc, q, c, 0.01) == math.inf

    def test_impurity(self, osc, media):
        tau = tau_impurity(osc, media, 0.04, reference_n3(media))
        assert rel(tau, 17889.946273825) < 1e-11

    def test_impurity_zero_density_absent(self, osc, media):
        assert tau_impurity(osc, media, 0.04, 0.0) is None

    def test_domain_errors(self, osc, media):
        q, c = media.quasiparticles, media.constants
        with pytest.raises(DomainError):
            tau_hydrodynamic(osc, 0.0)
        with pytest.raises(DomainError):
            tau_phonon(osc, q, c, -0.1)
        with pytest.raises(DomainError):
            tau_roton(osc, q, c, 0.0)
        with pytest.raises(DomainError):
            tau_impurity(osc, media, 0.04, -1.0)


class TestRatioLaws:
    """Exact scaling exponents, checked as pure ratios."""

    def test_phonon_quartic(self, osc, media):
        q, c = media.quasiparticles, media.constants
        for T in (0.1, 0.2, 0.4):
            ratio = tau_phonon(osc, q, c, 2 * T) / tau_phonon(osc, q, c, T)
            assert rel(ratio, 1.0 / 16.0) < 1e-12

    def test_impurity_half_power(self, osc, media):
        n3 = reference_n3(media)
        for T in (0.02, 0.04, 0.1):
            ratio = tau_impurity(osc, media, 4 * T, n3) \
                / tau_impurity(osc, media, T, n3)
            assert rel(ratio, 0.5) < 1e-12

    @given(st.floats(min_value=1e-7, max_value=1e-4))
    def test_hydrodynamic_eta_product_constant(self, eta):
        osc = OscillatorSpec(mass=6.33e-6, radius_warm=1e-3)
        ref = tau_hydrodynamic(osc, 1e-6) * 1e-6
        assert rel(tau_hydrodynamic(osc, eta) * eta, ref) < 1e-12

    def test_phonon_T4_product_constant(self, osc, media):
        q, c = media.quasiparticles, media.constants
        ref = tau_phonon(osc, q, c, 0.1) * 0.1**4
        for T in np.geomspace(0.01, 2.0, 25):
            assert rel(tau_phonon(osc, q, c, float(T)) * T**4, ref) < 1e-12

    def test_impurity_n3_sqrtT_product_constant(self, osc, media):
        ref = tau_impurity(osc, media, 0.04, 1e20) * 1e20 * math.sqrt(0.04)
        for T, n3 in ((0.01, 3e19), (0.3, 7e21), (1.7, 1e23)):
            val = tau_impurity(osc, media, T, n3) * n3 * math.sqrt(T)
            assert rel(val, ref) < 1e-12


class TestComposition:
    def test_reciprocal_sum_below_min(self):
        bd = tau_total(RegimeMode.RECIPROCAL_SUM, tau_ph=100.0, tau_rot=50.0,
                       tau_imp=200.0, tau_vacuum=1e5)
        floor = min(bd.present_channels().values())
        assert bd.tau_total <= floor * (1.0 + 1e-12)
        # independent harmonic composition
        expect = 1.0 / (1 / 100 + 1 / 50 + 1 / 200 + 1e-5)
        assert rel(bd.tau_total, expect) < 1e-14

    def test_two_channel_harmonic(self):
        bd = tau_total(RegimeMode.RECIPROCAL_SUM, tau_ph=1000.0,
                       tau_rot=3000.0)
        assert rel(bd.tau_total, 750.0) < 1e-14

    def test_dominant_only_is_min(self):
        bd = tau_total(RegimeMode.DOMINANT_ONLY, tau_ph=100.0, tau_rot=50.0,
                       tau_imp=200.0)
        assert bd.tau_total == 50.0

    def test_removing_channel_never_decreases_total(self):
        full = {"tau_hydr": 300.0, "tau_ph": 100.0, "tau_rot": 50.0,
                "tau_imp": 200.0, "tau_vacuum": 1e5}
        for mode in RegimeMode:
            base = tau_total(mode, **full).tau_total
            for name in full:
                reduced = {k: v for k, v in full.items() if k != name}
                assert tau_total(mode, **reduced).tau_total >= base

    def test_saturated_channels_contribute_nothing(self):
        bd = tau_total(RegimeMode.RECIPROCAL_SUM, tau_ph=math.inf,
                       tau_rot=math.inf, tau_vacuum=4.1e5)
        assert rel(bd.tau_total, 4.1e5) < 1e-14
        all_inf = tau_total(RegimeMode.RECIPROCAL_SUM, tau_ph=math.inf,
                            tau_rot=math.inf)
        assert all_inf.tau_total == math.inf

    def test_no_channels_rejected(self):
        with pytest.raises(ConfigError):
            tau_total(RegimeMode.RECIPROCAL_SUM)

    def test_breakdown_invariant_enforced(self):
        with pytest.raises(ValueError):
            DampingBreakdown(tau_ph=100.0, tau_rot=100.0, tau_total=200.0,
                             regime_mode=RegimeMode.RECIPROCAL_SUM)

    def test_mode_values(self):
        assert RegimeMode.RECIPROCAL_SUM.value == "ReciprocalSum"
        assert RegimeMode.DOMINANT_ONLY.value == "DominantOnly"


class TestSensitivity:
    def test_linewidth_reference(self):
        assert rel(linewidth(410400.0), 7.756088844634277e-07) < 1e-14

    @given(st.floats(min_value=1e-3, max_value=1e9))
    def test_linewidth_identity(self, tau):
        assert abs(linewidth(tau) * tau * math.pi - 1.0) < 1e-15

    def test_drag_force_references(self, osc):
        assert rel(drag_force(osc, 4e4, 1e-5), 3.165e-15) < 1e-12
        assert rel(drag_force(osc, 4.1e5, 1e-5), 3.0878048780487805e-16) \
            < 1e-13

    def test_noise_density_reference(self, osc):
        # 8 k_B M T / tau at 5 mK, 4.1e5 s
        assert rel(noise_density(osc, 0.005, 4.1e5),
                   8.526349434146342e-36) < 1e-13

    def test_homogeneous_in_mass(self, osc):
        for k in (0.5, 2.0, 10.0):
            scaled = OscillatorSpec(mass=k * osc.mass,
                                    radius_warm=osc.radius_warm)
            assert rel(drag_force(scaled, 4e4, 1e-5),
                       k * drag_force(osc, 4e4, 1e-5)) < 1e-12
            assert rel(noise_density(scaled, 0.1, 4e4),
                       k * noise_density(osc, 0.1, 4e4)) < 1e-12

    def test_report_consistent_with_parts(self, osc):
        rep = sensitivity_report(osc, 0.005, 4.1e5, 1e-5)
        assert rep.S_F == noise_density(osc, 0.005, 4.1e5)
        assert rep.F_D == drag_force(osc, 4.1e5, 1e-5)
        assert rep.linewidth == linewidth(4.1e5)
        assert rel(rep.T_over_tau, 1.2195121951219512e-08) < 1e-14

    def test_invalid_inputs(self, osc):
        with pytest.raises(DomainError):
            linewidth(0.0)
        with pytest.raises(DomainError):
            drag_force(osc, -1.0, 1e-5)
        with pytest.raises(DomainError):
            noise_density(osc, -0.1, 4e4)


class TestDampingCurve:
    def test_row_count_and_order(self, osc, media):
        grid = np.geomspace(0.01, 2.1, 50).tolist()
        rows = damping_curve(osc, media, grid, 0.0)
        assert len(rows) == 50
        assert [T for T, _ in rows] == grid

    def test_hydrodynamic_absent_below_floor(self, osc, media):
        rows = damping_curve(osc, media, [0.5, 1.5], reference_n3(media))
        assert rows[0][1].tau_hydr is None
        assert rows[1][1].tau_hydr is not None

    def test_low_T_limit_is_vacuum(self, osc, media):
        # reciprocal sum keeps a sliver of phonon rate; dominant-only
        # lands on the vacuum value exactly
        rows = damping_curve(osc, media, [0.005], 0.0,
                             tau_vacuum=DEFAULT_TAU_VACUUM)
        assert rel(rows[0][1].tau_total, 4.1e5) < 5e-3
        rows = damping_curve(osc, media, [0.005], 0.0,
                             RegimeMode.DOMINANT_ONLY,
                             tau_vacuum=DEFAULT_TAU_VACUUM)
        assert rows[0][1].tau_total == 4.1e5

    def test_finite_positive_over_domain(self, osc, media):
        grid = np.geomspace(0.01, 2.1, 60).tolist()
        for x3 in (0.0, 1e-6):
            for mode in RegimeMode:
                rows = damping_curve(osc, media, grid, reference_n3(media, x3)
                                     if x3 else 0.0, mode)
                for T, bd in rows:
                    assert bd.tau_total > 0
                    assert math.isfinite(bd.tau_total)

    def test_grid_validation(self, osc, media):
        with pytest.raises(ConfigError):
            damping_curve(osc, media, [], 0.0)
        with pytest.raises(ConfigError):
            damping_curve(osc, media, [0.2, 0.1], 0.0)
        with pytest.raises(ConfigError):
            damping_curve(osc, media, [-1.0, 0.1], 0.0)

    def test_domain_error_names_offending_row(self, osc, media):
        with pytest.raises(DomainError) as err:
            damping_curve(osc, media, [0.1, 0.2], -5.0)
        assert "row 0" in str(err.value)
        assert "0.1" in str(err.value)

    def test_csv_shape_and_roundtrip(self, osc, media):
        rows = damping_curve(osc, media, [0.02, 0.5, 1.5], reference_n3(media))
        buf = io.StringIO()
        write_damping_csv(rows, buf, header_comment="check")
        lines = buf.getvalue().splitlines()
        assert lines[0] == "# check"
        assert lines[1] == ("T_K,tau_hydr_s,tau_ph_s,tau_rot_s,tau_imp_s,"
                            "tau_vac_s,tau_total_s")
        assert len(lines) == 5
        # absent hydrodynamic channel leaves an empty field at 0.02 K
        first = lines[2].split(",")
        assert first[1] == ""
        # repr round trip: parsing recovers bit-identical floats
        assert float(first[0]) == 0.02
        assert float(first[6]) == rows[0][1].tau_total

    def test_metadata_records_gap(self, osc, media):
        meta = damping_metadata(osc, media, 0.0, RegimeMode.RECIPROCAL_SUM,
                                4.1e5)
        assert meta["regime_mode"] == "ReciprocalSum"
        assert meta["hydrodynamic_floor_K"] == 1.0
        assert "cross-over" in meta["crossover_note"]
        assert meta["oscillator"]["radius_cold_m"] == osc.radius


class TestIntrinsicLimitBracket:
    def test_fraction_matching_vacuum_tau_at_40mK(self, osc, media):
        """Invert the impurity law for the fraction whose 40 mK decay
        time equals the measured vacuum value; it must land at the
        parts-per-billion scale."""
        n3_ref = reference_n3(media)
        tau_ref = tau_impurity(osc, media, 0.04, n3_ref)
        n3_star = n3_ref * tau_ref / DEFAULT_TAU_VACUUM
        state = HeliumState(temperature=1.0,
                            he4_mass_density=media.he4_mass_density)
        x3_star = n3_star / he4_number_density(state, media.constants)
        assert rel(x3_star, 1.8326286426845414e-09) < 1e-12
        assert 5e-10 <= x3_star <= 5e-9
        # the inversion really solves the equation
        assert rel(tau_impurity(osc, media, 0.04, n3_star),
                   DEFAULT_TAU_VACUUM) < 1e-12
