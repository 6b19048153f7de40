"""
Reference values of the model. Single points at N = 4 always run; the
sweep-heavy and remaining nonreciprocal checks are slow and need
WGM_RUN_ACCEPTANCE=1. A property fuzz at N = 2 always runs.
"""

import math
import unittest

import numpy as np

from config.settings import RUN_ACCEPTANCE
from src.analysis.sweep import evaluate_point, sweep
from src.model.hamiltonian import SystemParams
from src.solver.liouvillian import solve_model
from src.transform.metrics import fit_isolation
from src.transform.observables import (
    EmissionClass, ModeSelector, bundle_purity, classify_emission, default_tau_grid, g2_zero, gn2_tau,
    mean_occupation, photon_distribution,
)
from src.transform.spectrum import DeltaRule, branches_phi_half, locate_resonances_numeric

PI = math.pi
REFERENCE = SystemParams(n_trunc=4)
SINGLE_PHOTON_POINT = REFERENCE.replace(delta=math.sqrt(2.0), phi=0.0)
BUNDLE_POINT = REFERENCE.replace(delta=0.0, phi=PI)


def at_branch(label, **changes):
    p = REFERENCE.replace(**changes)
    return p.replace(delta=DeltaRule.parse(f"branch:{label}")(p))


def within_factor(case, value, target, factor):
    case.assertGreater(value, target / factor)
    case.assertLess(value, target * factor)


class TestReciprocalPoints(unittest.TestCase):

    def test_single_photon_point(self):
        _, result = solve_model(SINGLE_PHOTON_POINT)
        within_factor(self, g2_zero(result.rho, ModeSelector.SYMMETRIC), 9.5e-3, 1.5)
        self.assertGreaterEqual(photon_distribution(result.rho, ModeSelector.SYMMETRIC).p_tilde[1], 0.999)

    def test_bundle_point(self):
        _, result = solve_model(BUNDLE_POINT)
        self.assertAlmostEqual(g2_zero(result.rho, ModeSelector.SYMMETRIC, 1), 66.0, delta=0.2 * 66.0)
        within_factor(self, g2_zero(result.rho, ModeSelector.SYMMETRIC, 2), 0.06, 1.5)
        self.assertLessEqual(bundle_purity(photon_distribution(result.rho, ModeSelector.SYMMETRIC), 2), 2e-4)

    def test_crossover(self):
        p = REFERENCE.replace(phi=0.5 * PI)
        p = p.replace(delta=DeltaRule.parse("nonspin:plus+")(p))
        _, result = solve_model(p)
        self.assertAlmostEqual(g2_zero(result.rho, ModeSelector.SYMMETRIC), 1.0, delta=0.05)

    def test_long_time_factorization(self):
        for p in (SINGLE_PHOTON_POINT, BUNDLE_POINT):
            with self.subTest(delta=p.delta, phi=p.phi):
                L, result = solve_model(p)
                series = gn2_tau(L, result.rho, ModeSelector.SYMMETRIC, 1, default_tau_grid())
                self.assertAlmostEqual(series.values[0], series.zero_time_value, delta=1e-8)
                self.assertGreaterEqual(series.values[-1], 0.95)
                self.assertLessEqual(series.values[-1], 1.05)

    def test_emission_classes(self):
        expected = {SINGLE_PHOTON_POINT: EmissionClass.SINGLE_PHOTON, BUNDLE_POINT: EmissionClass.TWO_PHOTON_BUNDLE}
        grid = default_tau_grid()
        for p, label in expected.items():
            with self.subTest(delta=p.delta, phi=p.phi):
                L, result = solve_model(p)
                series1 = gn2_tau(L, result.rho, ModeSelector.SYMMETRIC, 1, grid)
                series2 = gn2_tau(L, result.rho, ModeSelector.SYMMETRIC, 2, grid)
                self.assertIs(classify_emission(series1, series2), label)


class TestScalingEndpoint(unittest.TestCase):

    def test_endpoint_isolation(self):
        end = evaluate_point(at_branch("2+", delta_f=0.9, phi=0.5 * PI), check_convergence=False)
        within_factor(self, end["g2_cw"], 4.7e-5, 2.0)
        self.assertAlmostEqual(end["I_c_dB"], 65.7, delta=4.0)
        self.assertAlmostEqual(end["I_n_dB"], 17.3, delta=2.0)

    def test_correlations_monotone_in_rotation(self):
        table = sweep(REFERENCE.replace(phi=0.5 * PI), [("delta_f", [0.0, 0.2, 0.4, 0.6, 0.9])],
                      derived_delta=DeltaRule.parse("branch:2+"), workers=1, check_convergence=False)
        self.assertTrue(np.all(np.diff(table["g2_cw"]) < 0))
        self.assertTrue(np.all(np.diff(table["g2_ccw"]) > 0))


@unittest.skipUnless(RUN_ACCEPTANCE, "set WGM_RUN_ACCEPTANCE=1 for the slow reference-number checks")
class TestNonreciprocalPoints(unittest.TestCase):

    def test_phase_amplified_point(self):
        row = evaluate_point(at_branch("2+", delta_f=0.5, phi=0.66 * PI))
        self.assertTrue(row["converged"])
        within_factor(self, row["g2_cw"], 2e-4, 2.0)
        self.assertAlmostEqual(row["n_cw"], 0.18, delta=0.02)
        self.assertAlmostEqual(row["g2_ccw"], 0.16, delta=0.03)
        self.assertAlmostEqual(row["n_ccw"], 0.10, delta=0.02)

    def test_isolation_at_half_pi(self):
        upper = evaluate_point(at_branch("2+", delta_f=0.5, phi=0.5 * PI))
        self.assertAlmostEqual(upper["g2_cw"], 0.07, delta=0.02)
        self.assertAlmostEqual(upper["g2_ccw"], 24.7, delta=0.2 * 24.7)
        self.assertAlmostEqual(upper["I_c_dB"], 45.0, delta=3.0)
        self.assertAlmostEqual(upper["I_n_dB"], 15.0, delta=2.0)
        lower = evaluate_point(at_branch("1+", delta_f=0.5, phi=0.5 * PI))
        self.assertAlmostEqual(lower["I_c_dB"], -25.0, delta=3.0)
        self.assertAlmostEqual(lower["I_n_dB"], -17.0, delta=2.0)
        aligned = evaluate_point(at_branch("2+", delta_f=0.5, phi=0.0))
        self.assertAlmostEqual(aligned["I_c_dB"], 0.5, delta=1.0)
        self.assertAlmostEqual(aligned["I_n_dB"], -2.8, delta=1.0)

    def test_scaling_occupations(self):
        end = evaluate_point(at_branch("2+", delta_f=0.9, phi=0.5 * PI))
        self.assertTrue(end["converged"])
        self.assertAlmostEqual(end["n_cw"], 0.014, delta=0.003)
        base = evaluate_point(at_branch("2+", delta_f=0.0, phi=0.5 * PI))
        self.assertAlmostEqual(base["g2_cw"], 1.0, delta=0.05)
        self.assertAlmostEqual(base["n_cw"], 0.018, delta=0.003)

    def test_power_law_exponents(self):
        grid = np.concatenate([[0.0], np.geomspace(0.1, 0.9, 9)])
        table = sweep(REFERENCE.replace(phi=0.5 * PI), [("phi", np.array([0.2, 0.4, 0.5]) * PI),
                                                       ("delta_f", grid)],
                      derived_delta=DeltaRule.parse("branch:2+"))
        expected = {0.2: (0.78, 0.08), 0.4: (2.17, 0.53), 0.5: (5.02, 1.27)}
        for phi_pi, (alpha_c, alpha_n) in expected.items():
            group = table[np.isclose(table["phi"], phi_pi * PI)]
            with self.subTest(phi_pi=phi_pi):
                self.assertAlmostEqual(fit_isolation(group, "I_c_dB").alpha, alpha_c, delta=0.15 * alpha_c)
                self.assertAlmostEqual(fit_isolation(group, "I_n_dB").alpha, alpha_n, delta=0.15 * alpha_n)

    def test_spectrum_peaks(self):
        p = REFERENCE.replace(phi=0.5 * PI, delta_f=0.5)
        peaks = locate_resonances_numeric(p, np.linspace(-1.6, 1.6, 161))
        b = branches_phi_half(1.0, p.fizeau_shift)
        for branch in (b.delta_2_plus, b.delta_2_minus):
            self.assertLess(min(abs(x - branch) for x in peaks), 0.02)


class TestPropertyFuzz(unittest.TestCase):

    def test_random_points(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            p = SystemParams(
                delta=float(rng.uniform(-2.0, 2.0)),
                phi=float(rng.uniform(0.0, 2 * PI)),
                delta_f=float(rng.uniform(0.0, 1.0)),
                omega=float(rng.uniform(0.01, 0.1)),
                n_trunc=2,
            )
            with self.subTest(p=p):
                _, result = solve_model(p)
                self.assertLess(result.residual, 1e-10 * p.layout.dim)
                result.rho.validate()

    def test_reciprocity(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            p = SystemParams(delta=float(rng.uniform(-2.0, 2.0)), phi=float(rng.uniform(0.0, 2 * PI)),
                             omega=0.05, n_trunc=2)
            with self.subTest(p=p):
                _, result = solve_model(p)
                rho = result.rho
                self.assertLess(abs(mean_occupation(rho, "cw") - mean_occupation(rho, "ccw")), 1e-8)
                g2_cw, g2_ccw = g2_zero(rho, "cw"), g2_zero(rho, "ccw")
                self.assertLess(abs(g2_cw - g2_ccw), 1e-6 * max(1.0, g2_cw))


if __name__ == "__main__":
    unittest.main()
