import unittest

import numpy as np
import pytest
from scipy.optimize import brentq

from dynamics.flow import FlowSystem, build_trajectory
from nonlinearities import families
from searching.collocation import CollocationSettings, find_heteroclinics_galerkin
from searching.orbits import (HeteroclinicOrbit, IsolatingSet, OrbitSearch, ShootingSettings, accept_orbit,
                              count_mod2, find_heteroclinics_planar, index_one_pairs, orbit_distance,
                              sweep_connections_planar)
from searching.stationary import SearchStrategy, find_all
from travelwave.domain import DIRICHLET, Domain
from travelwave.errors import ConfigurationError, DegenerateOrbitError, NonRegularLevelError
from travelwave.problem import SpatialProblem

A = 0.3


def nagumo(wave_speed: float = 1.0) -> SpatialProblem:
    return SpatialProblem(Domain.point(), families.family("odd-", 3, 1.0, [-A, 1.0, A]), wave_speed, name="nagumo")


def chafee_infante(lam: float, n: int = 32) -> SpatialProblem:
    return SpatialProblem(Domain.interval(0.0, np.pi, n, DIRICHLET), families.family("odd-", 3, lam, [0.0, lam]),
                          1.0, name=f"chafee_infante_{lam}")


class PlanarShootingTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls) -> None:
        cls.problem = nagumo()
        cls.points = find_all(cls.problem).points
        cls.search = find_heteroclinics_planar(cls.problem, cls.points)

    def test_nagumo_orbits(self) -> None:
        """
        The spiral source a connects to both stable states, and nothing else connects.
        """
        self.assertEqual(len(self.search), 2)
        self.assertEqual({orbit.pair for orbit in self.search}, {("z0", "z1"), ("z0", "z2")})
        self.assertTrue(self.search.certified)
        self.assertEqual(self.search.undecided, [])
        self.assertEqual([orbit.id for orbit in self.search], ["o0", "o1"])

    def test_orbit_checks(self) -> None:
        for orbit in self.search:
            with self.subTest(orbit.id):
                self.assertEqual(orbit.relative_index, 1)
                self.assertEqual(orbit.spectral_flow, 1)
                self.assertTrue(orbit.trajectory.energy_monotone())
                self.assertGreater(orbit.energy_drop, 0.0)

    def test_energy_drops(self) -> None:
        """
        E(a) - E(1) and E(a) - E(-1) for the Nagumo cubic.
        """
        drops = {orbit.target_id: orbit.energy_drop for orbit in self.search}
        by_id = {point.id: point for point in self.points}
        for target in ("z1", "z2"):
            with self.subTest(target):
                self.assertAlmostEqual(drops[target], by_id["z0"].energy - by_id[target].energy, places=9)

    def test_tail_rates(self) -> None:
        """
        The orbits into the saddles z = 1 and z = -1 decay with the stable rates (sqrt(c^2 - 4 f'(z)) - c) / 2.
        """
        for target, slope in [("z1", -1.4), ("z2", -2.6)]:
            with self.subTest(target):
                orbit = next(orbit for orbit in self.search if orbit.target_id == target)
                self.assertIsNotNone(orbit.tail_rates)
                expected = (np.sqrt(1 - 4 * slope) - 1) / 2
                self.assertAlmostEqual(orbit.predicted_rates[1], expected, places=9)
                self.assertLess(abs(orbit.tail_rates[1] - expected) / expected, 0.1)

    def test_count(self) -> None:
        count = count_mod2(self.search, self.points)
        self.assertEqual(sorted(count.pairs), [("z0", "z1"), ("z0", "z2")])
        for pair in count.pairs:
            with self.subTest(str(pair)):
                self.assertEqual(count.mod2(*pair), 1)
                self.assertEqual(len(count.representatives[pair]), 1)
        self.assertTrue(count.certified)

    def test_sublevel_count(self) -> None:
        """
        Below the energy of a only the two index 0 points remain, and there is no pair to count.
        """
        count = count_mod2(self.search, self.points, IsolatingSet(0.0))
        self.assertEqual(count.raw, {})

    def test_distance_of_shifted_copy(self) -> None:
        orbit = self.search.orbits[0]
        shifted = build_trajectory(FlowSystem(self.problem), orbit.trajectory.times + 7.0, orbit.trajectory.states)
        self.assertAlmostEqual(orbit_distance(orbit.trajectory, shifted), 0.0, places=12)
        other = self.search.orbits[1]
        self.assertGreater(orbit_distance(orbit.trajectory, other.trajectory), 0.1)

    def test_serialization(self) -> None:
        data = self.search.to_dict()
        self.assertEqual(data['method'], "shooting")
        self.assertEqual([orbit['source'] for orbit in data['orbits']], ["z0", "z0"])

    def test_counts_stable_under_tighter_tolerances(self) -> None:
        """
        Tightening every integrator tolerance by a factor 10 leaves the orbit counts unchanged.
        """
        tight = find_heteroclinics_planar(self.problem, self.points, ShootingSettings().scaled(0.1))
        self.assertEqual(count_mod2(tight, self.points).raw, count_mod2(self.search, self.points).raw)
        self.assertTrue(tight.certified)

    @pytest.mark.slow
    def test_sweep_agrees(self) -> None:
        """
        Integrating from a circle of initial values around every rest point finds the same connections.
        """
        self.assertEqual(sweep_connections_planar(self.problem, self.points),
                         {orbit.pair for orbit in self.search})


class OrbitChecksTest(unittest.TestCase):

    def test_index_one_pairs(self) -> None:
        points = find_all(nagumo()).points
        self.assertEqual(index_one_pairs(points), [("z0", "z1"), ("z0", "z2")])

    def test_non_regular_level(self) -> None:
        points = find_all(nagumo()).points
        search = OrbitSearch([], [], [], [], True, "shooting")
        with self.assertRaises(NonRegularLevelError):
            count_mod2(search, points, IsolatingSet(points[1].energy))

    def test_degenerate_orbit(self) -> None:
        """
        A nonconstant orbit between points of equal index contradicts transversality.
        """
        system = FlowSystem(nagumo())
        times = np.linspace(0.0, 1.0, 11)
        states = np.column_stack([np.linspace(1.0, -1.0, 11), np.zeros(11)])
        orbit = HeteroclinicOrbit("z1", "z2", build_trajectory(system, times, states), 0, 0.4, states[0], states[-1])
        with self.assertRaises(DegenerateOrbitError):
            accept_orbit(orbit, system, 1e-9)

    def test_rejects_energy_increase(self) -> None:
        system = FlowSystem(nagumo())
        times = np.linspace(0.0, 1.0, 11)
        states = np.column_stack([np.linspace(1.0, A, 11), np.zeros(11)])
        orbit = HeteroclinicOrbit("z1", "z0", build_trajectory(system, times, states), 1, 0.1, states[0], states[-1])
        self.assertEqual(accept_orbit(orbit, system, 1e-9), "energy increases along the orbit")

    def test_same_end_points(self) -> None:
        system = FlowSystem(nagumo())
        trajectory = build_trajectory(system, np.linspace(0.0, 1.0, 2), np.zeros((2, 2)))
        with self.assertRaises(ValueError):
            HeteroclinicOrbit("z0", "z0", trajectory, 1, 0.0, np.zeros(2), np.zeros(2))

    def test_shooting_needs_point_domain(self) -> None:
        problem = chafee_infante(2.0)
        with self.assertRaises(ConfigurationError):
            find_heteroclinics_planar(problem, [])

    def test_collocation_needs_interval(self) -> None:
        with self.assertRaises(ConfigurationError):
            find_heteroclinics_galerkin(nagumo(), [])

    def test_damped_cubic_has_no_orbits(self) -> None:
        """
        f(u) = -u^3 - 0.1 u has the single stable point 0, so there is nothing to connect.
        """
        problem = SpatialProblem(Domain.point(), families.family("odd-", 3, 1.0, [0.0, -0.1]), 1.0)
        points = find_all(problem).points
        self.assertEqual(len(points), 1)
        search = find_heteroclinics_planar(problem, points, ShootingSettings(t_max=200.0))
        self.assertEqual(len(search), 0)
        self.assertEqual(count_mod2(search, points).raw, {})


@pytest.mark.slow
class CollocationTest(unittest.TestCase):

    def test_chafee_infante_2(self) -> None:
        """
        For lam = 2 the zero solution (index 1) connects once to each of the two nontrivial solutions.
        """
        problem = chafee_infante(2.0)
        points = find_all(problem, SearchStrategy(modes=(1, 2))).points
        settings = CollocationSettings(modes=6, widths=(1.0, 2.0), perturbations=1)
        search = find_heteroclinics_galerkin(problem, points, settings=settings)
        self.assertEqual(search.misses, [])
        count = count_mod2(search, points)
        self.assertEqual(len(count.pairs), 2)
        for pair in count.pairs:
            with self.subTest(str(pair)):
                self.assertEqual(count.mod2(*pair), 1)

    def test_doubling_half_width(self) -> None:
        """
        The exponentially decaying tails make the profile at the energy midpoint insensitive to the window [-T, T].
        """
        problem = chafee_infante(2.0)
        points = find_all(problem, SearchStrategy(modes=(1, 2))).points
        system = FlowSystem(problem, 6)
        profiles = []
        half_width = None
        for _ in range(2):
            settings = CollocationSettings(modes=6, tol=1e-8, widths=(2.0,), perturbations=0, half_width=half_width)
            orbit = find_heteroclinics_galerkin(problem, points, [("z0", "z1")], settings).orbits[0]
            trajectory = orbit.trajectory
            level = 0.5 * (system.energy(orbit.source_state) + system.energy(orbit.target_state))
            t_mid = brentq(lambda t: system.energy(trajectory.state_at(t)) - level, trajectory.times[0],
                           trajectory.times[-1], xtol=1e-13)
            profiles.append(trajectory.state_at(t_mid))
            half_width = 2 * trajectory.metadata['T']
        self.assertLess(np.max(np.abs(profiles[0] - profiles[1])), 1e-6)


if __name__ == '__main__':
    unittest.main()
