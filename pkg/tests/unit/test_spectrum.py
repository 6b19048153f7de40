import math
import unittest

import numpy as np
import numpy.testing as npt

from src.model.hamiltonian import SystemParams, build_hamiltonian
from src.model.tensor_algebra import basis_index
from src.transform.spectrum import (
    DeltaRule, branch_table, branches_phi_half, locate_resonances_numeric,
    resonance_nonspinning, resonant_detunings, single_excitation_matrix,
)
from src.utils.errors import ConfigError, NoPeakError, UsageError

HALF_PI = math.pi / 2


class TestClosedForms(unittest.TestCase):

    def test_nonspinning_limit(self):
        b = branches_phi_half(1.0, 0.0)
        self.assertEqual((b.delta_1_plus, b.delta_1_minus, b.delta_2_plus, b.delta_2_minus), (1.0, -1.0, 1.0, -1.0))

    def test_rotating_branches(self):
        b = branches_phi_half(1.0, 0.5)
        root = math.sqrt(0.25 + 16.0)
        self.assertAlmostEqual(b.delta_2_plus, (-0.5 + root) / 4, places=14)
        self.assertAlmostEqual(b.delta_2_minus, (-0.5 - root) / 4, places=14)
        self.assertEqual(b.get("1+"), 1.0)
        with self.assertRaises(UsageError):
            b.get("3+")

    def test_phase_guard(self):
        with self.assertRaises(UsageError):
            branches_phi_half(1.0, 0.5, phi=0.3)
        branches_phi_half(1.0, 0.5, phi=HALF_PI)
        branches_phi_half(1.0, 0.5, phi=HALF_PI + 2 * math.pi)

    def test_nonspinning_families(self):
        r = resonance_nonspinning(1.0, 0.0, label=False)
        npt.assert_allclose(r.plus_cos, (math.sqrt(2.0), -math.sqrt(2.0)))
        npt.assert_allclose(r.minus_cos, (0.0, 0.0))
        self.assertIsNone(r.bright)
        r = resonance_nonspinning(1.0, HALF_PI, label=False)
        npt.assert_allclose(r.plus_cos, (1.0, -1.0), atol=1e-15)
        npt.assert_allclose(r.minus_cos, (1.0, -1.0), atol=1e-15)

    def test_bright_family_in_phase(self):
        r = resonance_nonspinning(1.0, 0.0, base=SystemParams(n_trunc=1))
        self.assertEqual(r.bright, "plus_cos")
        self.assertEqual(r.bright_family, r.plus_cos)


class TestSingleExcitationManifold(unittest.TestCase):

    def test_matches_hamiltonian_block(self):
        p = SystemParams(delta=0.37, delta_f=0.21, phi=0.63 * math.pi, n_trunc=1, omega=0.0)
        H = build_hamiltonian(p).to_dense()
        index = [basis_index(p.layout, occ) for occ in
                 (("e", "g", 0, 0), ("g", "e", 0, 0), ("g", "g", 1, 0), ("g", "g", 0, 1))]
        ground = basis_index(p.layout, ("g", "g", 0, 0))
        block = H[np.ix_(index, index)] - H[ground, ground] * np.eye(4)
        npt.assert_allclose(block, single_excitation_matrix(p), atol=1e-14)

    def test_hermitian(self):
        M = single_excitation_matrix(SystemParams(delta=0.2, delta_f=0.4, phi=1.1))
        npt.assert_allclose(M, M.conj().T)

    def test_degenerate_at_half_pi(self):
        roots = resonant_detunings(SystemParams(phi=HALF_PI))
        npt.assert_allclose(roots, [-1.0, -1.0, 1.0, 1.0], atol=1e-12)

    def test_roots_against_closed_form(self):
        for factor, effective in ((1.0, 0.5), (2.0, 1.0)):
            with self.subTest(fizeau_factor=factor):
                roots = resonant_detunings(SystemParams(phi=HALF_PI, delta_f=0.5, fizeau_factor=factor))
                b = branches_phi_half(1.0, effective)
                expected = sorted([b.delta_1_plus, b.delta_1_minus, b.delta_2_plus, b.delta_2_minus])
                npt.assert_allclose(roots, expected, atol=1e-12)

    def test_zero_energy_at_roots(self):
        p = SystemParams(phi=0.3 * math.pi, delta_f=0.4)
        for root in resonant_detunings(p):
            M = single_excitation_matrix(p.replace(delta=float(root)))
            self.assertLess(np.min(np.abs(np.linalg.eigvalsh(M))), 1e-10)

    def test_unlocked_cavity(self):
        p = SystemParams(phi=0.3 * math.pi, delta_c=0.5, delta_f=0.2, lock_delta_c=False)
        roots = resonant_detunings(p)
        self.assertEqual(len(roots), 2)
        for root in roots:
            M = single_excitation_matrix(p.replace(delta=float(root)))
            self.assertLess(np.min(np.abs(np.linalg.eigvals(M))), 1e-9)

    def test_branch_table(self):
        table = branch_table(1.0, np.linspace(0.0, 1.0, 5))
        self.assertEqual(len(table), 5)
        self.assertIn("delta_2_plus", table.columns)
        self.assertIn("root_4", table.columns)
        npt.assert_allclose(table.loc[0, ["root_1", "root_2", "root_3", "root_4"]].to_numpy(dtype=float),
                            [-1.0, -1.0, 1.0, 1.0], atol=1e-12)
        closed = np.sort(table[["delta_1_plus", "delta_1_minus", "delta_2_plus", "delta_2_minus"]].to_numpy(), axis=1)
        roots = table[["root_1", "root_2", "root_3", "root_4"]].to_numpy()
        npt.assert_allclose(closed, roots, atol=1e-12)

    def test_roots_continuous_in_rotation(self):
        grid = np.linspace(0.0, 1.0, 101)
        for phi in (0.2 * math.pi, HALF_PI, 0.66 * math.pi):
            with self.subTest(phi=phi):
                roots = np.array([resonant_detunings(SystemParams(phi=phi, delta_f=float(d))) for d in grid])
                # one grid step moves the weighted CW level by 0.01
                self.assertLessEqual(np.max(np.abs(np.diff(roots, axis=0))), 0.01 + 1e-12)


class TestNumericLocator(unittest.TestCase):

    def test_symmetric_peaks_without_rotation(self):
        p = SystemParams(phi=0.0, n_trunc=1)
        peaks = locate_resonances_numeric(p, np.linspace(-2.0, 2.0, 41), workers=1)
        npt.assert_allclose(peaks, -np.array(peaks[::-1]), atol=1e-6)
        self.assertLess(min(abs(x - math.sqrt(2.0)) for x in peaks), 0.1)

    def test_monotone_scan(self):
        with self.assertRaises(NoPeakError):
            locate_resonances_numeric(SystemParams(n_trunc=1), np.linspace(5.0, 6.0, 5), workers=1)

    def test_bad_scan(self):
        with self.assertRaises(UsageError):
            locate_resonances_numeric(SystemParams(n_trunc=1), [0.0, 1.0], workers=1)


class TestDeltaRule(unittest.TestCase):

    def test_branch_rule_uses_mode_offset(self):
        p = SystemParams(phi=HALF_PI, delta_f=0.5)
        self.assertEqual(DeltaRule.parse("branch:2+")(p), branches_phi_half(1.0, 1.0).delta_2_plus)
        self.assertAlmostEqual(DeltaRule.parse("branch:2+")(p), DeltaRule.parse("manifold:3")(p), places=12)
        self.assertAlmostEqual(DeltaRule.parse("branch:2-")(p), DeltaRule.parse("manifold:1")(p), places=12)
        ccw = p.replace(fizeau_mode="ccw")
        npt.assert_allclose(resonant_detunings(ccw), resonant_detunings(p), atol=1e-12)

    def test_nonspin_rule(self):
        p = SystemParams(phi=0.0)
        self.assertAlmostEqual(DeltaRule.parse("nonspin:plus+")(p), math.sqrt(2.0))
        self.assertAlmostEqual(DeltaRule.parse("nonspin:minus-")(p), 0.0)
        self.assertAlmostEqual(DeltaRule.parse("nonspin:plus-")(p.replace(phi=math.pi / 3)), -math.sqrt(1.5))

    def test_manifold_rule(self):
        p = SystemParams(phi=0.2 * math.pi, delta_f=0.3)
        self.assertEqual(DeltaRule.parse("manifold:4")(p), float(resonant_detunings(p)[3]))

    def test_text_round_trip(self):
        for text in ("branch:1-", "nonspin:minus+", "manifold:2"):
            self.assertEqual(str(DeltaRule.parse(text)), text)
        self.assertEqual(str(DeltaRule.parse(" Branch : 2+ ")), "branch:2+")

    def test_invalid_rules(self):
        for text in ("branch:3+", "nonspin:up", "manifold:5", "manifold:x", "peak:1"):
            with self.subTest(text=text), self.assertRaises(ConfigError):
                DeltaRule.parse(text)


if __name__ == "__main__":
    unittest.main()
