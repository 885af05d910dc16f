import unittest
from typing import Dict, List, Sequence, Tuple

import numpy as np

from homology import gf2
from homology.complexes import (build_complex, check_d_squared, compute_homology,
                                connection_components, direct_sum_check, energy_filtration, energy_levels,
                                expected_homology, forcing_analysis)
from nonlinearities.families import CUSTOM, EVEN_PLUS, ODD_MINUS
from searching.orbits import HeteroclinicOrbit, IsolatingSet, OrbitCount, OrbitSearch
from searching.stationary import StationaryPoint
from travelwave.errors import InvalidPartitionError, NonHyperbolicError, UncertifiedCountError


def point(id: str, m: int, energy: float, hyperbolic: bool = True) -> StationaryPoint:
    return StationaryPoint(np.zeros(1), 0.0, m, hyperbolic, 1.0, energy, np.zeros(1), id)


def count(raw: Dict[Tuple[str, str], int], certified: bool = True, level=None) -> OrbitCount:
    return OrbitCount(raw, {pair: [] for pair in raw}, IsolatingSet(level), certified)


def nagumo_points() -> List[StationaryPoint]:
    return [point("z0", 1, 0.044325), point("z1", 0, -0.05), point("z2", 0, -0.45)]


def chafee_infante_points() -> List[StationaryPoint]:
    """
    lam = 5: zero (index 2), two-hump pair (index 1), one-hump pair (index 0).
    """
    return [point("z0", 2, 0.0), point("z1", 1, -0.5), point("z2", 1, -0.5), point("z3", 0, -2.0),
            point("z4", 0, -2.0)]


def chafee_infante_count(**kwargs) -> OrbitCount:
    return count({("z0", "z1"): 1, ("z0", "z2"): 1, ("z1", "z3"): 1, ("z1", "z4"): 1, ("z2", "z3"): 1,
                  ("z2", "z4"): 1}, **kwargs)


def search_of(pairs: Sequence[Tuple[str, str]], certified: bool = True) -> OrbitSearch:
    """
    An orbit search holding placeholder orbits for `pairs`; only their end points matter for counting.
    """
    orbits = []
    for number, (source, target) in enumerate(pairs):
        orbit = HeteroclinicOrbit(source, target, None, 1, 1.0, np.zeros(2), np.zeros(2))
        orbit.id = f"o{number}"
        orbits.append(orbit)
    return OrbitSearch(orbits, [], [], [], certified, "shooting")


class GF2Test(unittest.TestCase):

    def test_rank(self) -> None:
        self.assertEqual(gf2.rank([[1, 1], [1, 1]]), 1)
        self.assertEqual(gf2.rank(np.eye(3)), 3)
        self.assertEqual(gf2.rank([[1, 1, 0], [0, 1, 1], [1, 0, 1]]), 2)
        self.assertEqual(gf2.rank(np.zeros((0, 2))), 0)

    def test_entries_are_reduced(self) -> None:
        self.assertTrue(np.array_equal(gf2.as_gf2([[2, 3], [-1, 4]]), [[0, 1], [1, 0]]))

    def test_nullspace(self) -> None:
        matrix = np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)
        kernel = gf2.nullspace(matrix)
        self.assertEqual(kernel.shape, (3, 1))
        self.assertFalse(np.any(gf2.matmul(matrix, kernel)))
        self.assertTrue(np.array_equal(kernel[:, 0], [1, 1, 1]))

    def test_nullspace_without_rows(self) -> None:
        self.assertTrue(np.array_equal(gf2.nullspace(np.zeros((0, 2))), np.eye(2)))

    def test_solve(self) -> None:
        matrix = np.array([[1, 1], [0, 1]])
        x = gf2.solve(matrix, [0, 1])
        self.assertTrue(np.array_equal(gf2.matmul(matrix, x[:, None])[:, 0], [0, 1]))
        self.assertIsNone(gf2.solve([[1, 1], [1, 1]], [1, 0]))

    def test_in_span(self) -> None:
        columns = np.array([[1], [1]])
        self.assertTrue(gf2.in_span(columns, [1, 1]))
        self.assertFalse(gf2.in_span(columns, [1, 0]))
        self.assertTrue(gf2.in_span(np.zeros((2, 0)), [0, 0]))


class ComplexTest(unittest.TestCase):

    def test_nagumo_complex(self) -> None:
        """
        d a = (1) + (-1), so H_0 is one dimensional and H_1 vanishes.
        """
        complex_ = build_complex(nagumo_points(), count({("z0", "z1"): 1, ("z0", "z2"): 1}))
        self.assertEqual(complex_.grades, {0: ["z1", "z2"], 1: ["z0"]})
        self.assertTrue(np.array_equal(complex_.boundary(1), [[1], [1]]))
        self.assertTrue(check_d_squared(complex_).passed)
        homology = compute_homology(complex_)
        self.assertEqual(homology.ranks, {0: 1, 1: 0})
        self.assertEqual(homology.total, 1)
        self.assertEqual(homology.summary(), "total rank 1 (grade 0)")
        self.assertEqual(len(homology.representatives[0]), 1)

    def test_even_counts_vanish(self) -> None:
        """
        Two orbits of one pair cancel over GF(2).
        """
        complex_ = build_complex(nagumo_points(), count({("z0", "z1"): 2, ("z0", "z2"): 1}))
        self.assertTrue(np.array_equal(complex_.boundary(1), [[0], [1]]))
        self.assertEqual(compute_homology(complex_).ranks, {0: 1, 1: 0})

    def test_chafee_infante_5(self) -> None:
        complex_ = build_complex(chafee_infante_points(), chafee_infante_count())
        self.assertTrue(check_d_squared(complex_))
        homology = compute_homology(complex_)
        self.assertEqual(homology.ranks, {0: 1, 1: 0, 2: 0})
        self.assertEqual(homology.total, expected_homology(ODD_MINUS))

    def test_d_squared_failure(self) -> None:
        """
        A missing orbit z2 -> z4 leaves d_1 d_2 nonzero at (z0, z4).
        """
        raw = dict(chafee_infante_count().raw)
        raw[("z2", "z4")] = 0
        complex_ = build_complex(chafee_infante_points(), count(raw))
        check = check_d_squared(complex_)
        self.assertFalse(check.passed)
        self.assertEqual(check.offending, [(1, "z0", "z4")])

    def test_empty_complex(self) -> None:
        complex_ = build_complex([], count({}))
        homology = compute_homology(complex_)
        self.assertEqual(homology.ranks, {})
        self.assertEqual(homology.total, 0)
        self.assertEqual(homology.summary(), "total rank 0")
        self.assertEqual(homology.total, expected_homology(EVEN_PLUS))

    def test_uncertified(self) -> None:
        with self.assertRaises(UncertifiedCountError):
            build_complex(nagumo_points(), count({("z0", "z1"): 1, ("z0", "z2"): 1}, certified=False))
        complex_ = build_complex(nagumo_points(), count({("z0", "z1"): 1, ("z0", "z2"): 1}, certified=False),
                                 force=True)
        self.assertFalse(complex_.certified)
        self.assertEqual(compute_homology(complex_).summary(), "total rank 1 (grade 0) UNCERTIFIED")

    def test_non_hyperbolic_generator(self) -> None:
        points = nagumo_points() + [point("z3", 0, -1.0, hyperbolic=False)]
        with self.assertRaises(NonHyperbolicError):
            build_complex(points, count({}))

    def test_sublevel_complex(self) -> None:
        """
        The sublevel set below E(a) holds only the two stable points.
        """
        complex_ = build_complex(nagumo_points(), count({}, level=0.0))
        self.assertEqual(complex_.generators, ["z1", "z2"])
        self.assertEqual(compute_homology(complex_).ranks, {0: 2})

    def test_shifted(self) -> None:
        complex_ = build_complex(nagumo_points(), count({("z0", "z1"): 1, ("z0", "z2"): 1})).shifted(2)
        self.assertEqual(compute_homology(complex_).ranks, {2: 1, 3: 0})

    def test_expected_homology(self) -> None:
        self.assertEqual(expected_homology(ODD_MINUS), 1)
        self.assertEqual(expected_homology(EVEN_PLUS), 0)
        self.assertIsNone(expected_homology(CUSTOM))


class DirectSumTest(unittest.TestCase):

    def test_direct_sum_adds_ranks(self) -> None:
        first = build_complex(nagumo_points(), count({("z0", "z1"): 1, ("z0", "z2"): 1}))
        second = build_complex(chafee_infante_points(), chafee_infante_count())
        total = first.direct_sum(second)
        self.assertEqual(len(total.generators), 8)
        self.assertEqual(compute_homology(total).ranks, {0: 2, 1: 0, 2: 0})
        report = direct_sum_check(total, [[f"a:{g}" for g in first.generators],
                                          [f"b:{g}" for g in second.generators]])
        self.assertTrue(report.passed)

    def test_components(self) -> None:
        complex_ = build_complex(nagumo_points() + [point("z3", 0, -1.0)], count({("z0", "z1"): 1, ("z0", "z2"): 1}))
        self.assertEqual(connection_components(complex_), [["z1", "z2", "z0"], ["z3"]])
        report = direct_sum_check(complex_)
        self.assertEqual(report.part_ranks, [{0: 1, 1: 0}, {0: 1}])
        self.assertTrue(report.passed)

    def test_crossing_partition(self) -> None:
        complex_ = build_complex(nagumo_points(), count({("z0", "z1"): 1, ("z0", "z2"): 1}))
        with self.assertRaises(InvalidPartitionError):
            direct_sum_check(complex_, [["z0", "z1"], ["z2"]])

    def test_even_count_still_crosses(self) -> None:
        complex_ = build_complex(nagumo_points(), count({("z0", "z1"): 1, ("z0", "z2"): 2}))
        with self.assertRaises(InvalidPartitionError):
            direct_sum_check(complex_, [["z0", "z1"], ["z2"]])

    def test_incomplete_partition(self) -> None:
        complex_ = build_complex(nagumo_points(), count({("z0", "z1"): 1, ("z0", "z2"): 1}))
        with self.assertRaises(InvalidPartitionError):
            direct_sum_check(complex_, [["z0", "z1"]])


class ForcingTest(unittest.TestCase):

    def test_nagumo(self) -> None:
        """
        Three generators of the odd- class force at least one wave; all of them are end points of orbits.
        """
        orbit_count = count({("z0", "z1"): 1, ("z0", "z2"): 1})
        complex_ = build_complex(nagumo_points(), orbit_count)
        report = forcing_analysis(complex_, compute_homology(complex_), orbit_count, ODD_MINUS)
        self.assertEqual(report.k, 1)
        self.assertEqual(report.waves, 2)
        self.assertEqual(report.untouched, [])
        self.assertTrue(report.passed)
        self.assertFalse(report.inconsistent)
        self.assertTrue(report.parity_consistent)
        self.assertFalse(report.predicts_extra_solution)

    def test_missing_orbits_are_inconsistent(self) -> None:
        orbit_count = count({("z0", "z1"): 0, ("z0", "z2"): 0})
        complex_ = build_complex(nagumo_points(), orbit_count)
        report = forcing_analysis(complex_, compute_homology(complex_), orbit_count, ODD_MINUS)
        self.assertFalse(report.passed)
        self.assertTrue(report.inconsistent)
        self.assertEqual(report.untouched, ["z1", "z2", "z0"])

    def test_even_generator_count(self) -> None:
        points = [point("z0", 1, 0.0), point("z1", 0, -1.0)]
        orbit_count = count({("z0", "z1"): 1})
        complex_ = build_complex(points, orbit_count)
        report = forcing_analysis(complex_, compute_homology(complex_), orbit_count, ODD_MINUS)
        self.assertTrue(report.predicts_extra_solution)


class FiltrationTest(unittest.TestCase):

    def test_levels(self) -> None:
        levels = energy_levels(nagumo_points())
        self.assertEqual(len(levels), 3)
        self.assertAlmostEqual(levels[0], -0.25)
        self.assertAlmostEqual(levels[1], -0.0028375)
        self.assertAlmostEqual(levels[2], 1.044325)

    def test_nagumo_filtration(self) -> None:
        """
        {E <= level} holds -1, then both stable points, then everything.
        """
        filtration = energy_filtration(nagumo_points(), search_of([("z0", "z1"), ("z0", "z2")]))
        self.assertEqual([homology.ranks for _, homology in filtration], [{0: 1}, {0: 2}, {0: 1, 1: 0}])


if __name__ == '__main__':
    unittest.main()
