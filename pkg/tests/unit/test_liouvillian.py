import math
import unittest

import numpy as np
import numpy.testing as npt

from src.model.hamiltonian import Channel, SystemParams, realize
from src.model.tensor_algebra import (
    Operator, SpaceLayout, annihilation, basis_index, basis_state, coherent_state, number, pauli, trace_functional,
)
from src.solver.liouvillian import (
    assemble, build_liouvillian, kernel_diagnostics, propagate, propagate_dense,
    propagate_series, solve_model, steady_state, steady_state_dense,
)
from src.transform.observables import default_tau_grid
from src.utils.errors import SingularSystemError, UsageError

GAMMA = 0.3
OMEGA = 1.1


def two_level(hamiltonian=None, rate=GAMMA):
    layout = SpaceLayout.local(2)
    H = hamiltonian if hamiltonian is not None else Operator(layout, np.zeros((2, 2)))
    return assemble(H, [Channel(pauli("minus"), rate, "decay")])


class TestAssembly(unittest.TestCase):

    def test_decay_of_excited_population(self):
        L = two_level()
        out = L.apply(np.array([[1.0, 0.0], [0.0, 0.0]]))
        npt.assert_allclose(out, [[-GAMMA, 0.0], [0.0, GAMMA]], atol=1e-15)

    def test_coherent_part_sign(self):
        H = Operator(SpaceLayout.local(2), 0.5 * OMEGA * pauli("z").to_dense())
        L = two_level(H, rate=0.0)
        rho = 0.5 * np.ones((2, 2))
        # d rho_eg / dt = -i (E_e - E_g) rho_eg
        self.assertAlmostEqual(L.apply(rho)[0, 1], -1j * OMEGA * 0.5)
        self.assertFalse(L.dissipative)

    def test_negative_rate(self):
        with self.assertRaises(UsageError):
            two_level(rate=-1.0)

    def test_trace_preserving(self):
        p = SystemParams(delta=0.6, delta_f=0.3, phi=0.4 * math.pi, n_trunc=1)
        L = build_liouvillian(realize(p))
        t = trace_functional(p.layout.dim)
        npt.assert_allclose(t @ L.matrix.toarray(), 0.0, atol=1e-13)
        self.assertEqual(L.cavity_decay, p.kappa)


class TestSteadyState(unittest.TestCase):

    def test_residual_and_validity(self):
        for n_trunc in (1, 2):
            with self.subTest(n_trunc=n_trunc):
                p = SystemParams(delta=1.2, phi=0.3 * math.pi, delta_f=0.2, n_trunc=n_trunc)
                L, result = solve_model(p)
                self.assertLess(result.residual, 1e-10 * p.layout.dim)
                self.assertAlmostEqual(result.rho.trace().real, 1.0, places=12)
                self.assertEqual(result.truncation_used, n_trunc)
                result.rho.validate()

    def test_dense_oracle_agrees(self):
        p = SystemParams(delta=math.sqrt(2.0), phi=0.0, n_trunc=1, omega=0.1)
        L, sparse_result = solve_model(p)
        dense_result = steady_state_dense(L)
        npt.assert_allclose(sparse_result.rho.data, dense_result.rho.data, atol=1e-8)

    def test_ground_state_without_pump(self):
        p = SystemParams(omega=0.0, delta=0.4, n_trunc=1)
        _, result = solve_model(p)
        k = basis_index(p.layout, ("g", "g", 0, 0))
        self.assertAlmostEqual(result.rho.data[k, k].real, 1.0, places=10)

    def test_no_dissipation_is_singular(self):
        p = SystemParams(kappa=0.0, gamma=0.0, n_trunc=1)
        with self.assertRaises(SingularSystemError):
            steady_state(build_liouvillian(realize(p)))

    def test_two_level_steady_state(self):
        H = Operator(SpaceLayout.local(2), 0.2 * pauli("x").to_dense())
        result = steady_state(two_level(H))
        # weakly driven decaying qubit stays mostly in |g>
        self.assertGreater(result.rho.data[1, 1].real, 0.5)
        result.rho.validate()

    def test_unique_kernel(self):
        L = build_liouvillian(realize(SystemParams(n_trunc=1, omega=0.1)))
        smallest, second = kernel_diagnostics(L)
        self.assertLess(smallest, 1e-10)
        self.assertGreater(second, 1e-6)


class TestPropagation(unittest.TestCase):

    def test_excited_decay(self):
        L = two_level()
        out = propagate(L, np.array([[1.0, 0.0], [0.0, 0.0]]), 2.0).to_dense()
        self.assertAlmostEqual(out[0, 0].real, math.exp(-GAMMA * 2.0), places=7)

    def test_zero_time(self):
        X = np.array([[0.2, 0.1], [0.1, 0.8]])
        npt.assert_array_equal(propagate(two_level(), X, 0.0).to_dense(), X)

    def test_negative_time(self):
        with self.assertRaises(UsageError):
            propagate(two_level(), np.eye(2), -1.0)

    def test_dense_oracle_agrees(self):
        p = SystemParams(delta=0.8, phi=0.5 * math.pi, delta_f=0.3, n_trunc=1, omega=0.1)
        L = build_liouvillian(realize(p))
        rng = np.random.default_rng(3)
        X = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        X = X / np.linalg.norm(X)
        sparse = propagate(L, X, 3.0).to_dense()
        dense = propagate_dense(L, X, 3.0).to_dense()
        npt.assert_allclose(sparse, dense, atol=1e-6)

    def test_series_matches_single_steps(self):
        L = two_level()
        X = np.array([[1.0, 0.0], [0.0, 0.0]])
        times = np.array([0.0, 0.5, 1.0, 4.0])
        stack = propagate_series(L, X, times)
        self.assertEqual(stack.shape, (4, 2, 2))
        npt.assert_allclose(stack[:, 0, 0].real, np.exp(-GAMMA * times), atol=1e-7)

    def test_series_with_measurement(self):
        L = two_level()
        X = np.array([[1.0, 0.0], [0.0, 0.0]])
        M = np.array([[1.0, 0.0], [0.0, 0.0]])
        traces = propagate_series(L, X, [0.0, 1.0], measure=M)
        npt.assert_allclose(traces.real, [1.0, math.exp(-GAMMA)], atol=1e-7)

    def test_series_rejects_unsorted_grid(self):
        with self.assertRaises(UsageError):
            propagate_series(two_level(), np.eye(2), [0.0, 2.0, 1.0])

    def test_empty_mode_decay_matches_closed_form(self):
        kappa = 0.125
        L = assemble(Operator(SpaceLayout.local(6), np.zeros((6, 6))),
                     [Channel(annihilation(6), kappa, "cavity")], cavity_decay=kappa)
        rho0 = coherent_state(0.8, 6)
        n0 = number(6).expect(rho0).real
        times = np.array([0.0, 0.5, 1.0, 2.0, 5.0, 10.0]) / kappa
        traces = propagate_series(L, rho0.data, times, measure=number(6).to_dense())
        npt.assert_allclose(traces.real, n0 * np.exp(-kappa * times), rtol=1e-6)

    def test_trace_preserved_on_default_grid(self):
        p = SystemParams(delta=0.6, delta_f=0.3, phi=0.4 * math.pi, n_trunc=1, omega=0.1)
        L = build_liouvillian(realize(p))
        ground = basis_state(p.layout, ("g", "g", 0, 0))
        X = np.outer(ground, ground.conj())
        traces = propagate_series(L, X, default_tau_grid() / p.kappa, measure=np.eye(p.layout.dim))
        self.assertLess(np.max(np.abs(traces - 1.0)), 1e-9)

    def test_steady_state_is_stationary(self):
        p = SystemParams(delta=0.5, n_trunc=1, omega=0.1)
        L, result = solve_model(p)
        later = propagate(L, result.rho.data, 5.0).to_dense()
        npt.assert_allclose(later, result.rho.data, atol=1e-7)


if __name__ == "__main__":
    unittest.main()
