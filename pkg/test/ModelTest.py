import unittest

import numpy as np

from nonlinearities import families
from nonlinearities.families import blend, evaluate_constant
from travelwave.domain import DIRICHLET, NEUMANN, PERIODIC, Domain, build_laplacian
from travelwave.errors import ConfigurationError, HomotopyValidationError, InsufficientDataError
from travelwave.hypotheses import F2, F2_PRIME, validate_homotopy, validate_hypotheses
from travelwave.problem import HomotopyPath, SpatialProblem, energy, energy_rate_check, smooth_switch
from travelwave.problemfabric import fabricate

A = 0.3


def nagumo(wave_speed: float = 1.0) -> SpatialProblem:
    """
    f(u) = (u - a)(1 - u^2) on the point domain.
    """
    return SpatialProblem(Domain.point(), families.family("odd-", 3, 1.0, [-A, 1.0, A]), wave_speed, name="nagumo")


def chafee_infante(lam: float, n: int = 64) -> SpatialProblem:
    """
    f(u) = lam (u - u^3) on (0, pi) with Dirichlet data.
    """
    return SpatialProblem(Domain.interval(0.0, np.pi, n, DIRICHLET), families.family("odd-", 3, lam, [0.0, lam]),
                          1.0, name=f"chafee_infante_{lam}")


class DomainTest(unittest.TestCase):

    def test_invalid_combinations(self) -> None:
        """
        Unsupported combinations of kind, boundary condition and grid size are rejected.
        """
        for kind, boundary, n in [("interval", PERIODIC, 10), ("circle", DIRICHLET, 10), ("interval", DIRICHLET, 1),
                                  ("disc", DIRICHLET, 10), ("interval", "robin", 10)]:
            with self.subTest(f"{kind} {boundary} n={n}"):
                with self.assertRaises(ConfigurationError):
                    Domain(kind, 0.0, 1.0, boundary, n)

    def test_dirichlet_eigenvalues_approach_squares(self) -> None:
        """
        On (0, pi) with Dirichlet data the k-th eigenvalue of the discrete Laplacian is close to -k^2.
        """
        laplacian = build_laplacian(Domain.interval(0.0, np.pi, 200, DIRICHLET))
        for k in range(1, 4):
            with self.subTest(f"k={k}"):
                self.assertAlmostEqual(laplacian.eigenvalues[k - 1], -k ** 2, delta=1e-3 * k ** 2)

    def test_neumann_and_periodic_top_eigenvalue(self) -> None:
        """
        With Neumann or periodic data the largest eigenvalue is 0 and its eigenvector is constant.
        """
        for domain in [Domain.interval(0.0, 1.0, 20, NEUMANN), Domain.circle(2 * np.pi, 20)]:
            with self.subTest(repr(domain)):
                laplacian = build_laplacian(domain)
                self.assertAlmostEqual(laplacian.eigenvalues[0], 0.0, places=9)
                vector = laplacian.eigenvectors[:, 0]
                self.assertTrue(np.allclose(vector, vector[0]))

    def test_point_domain(self) -> None:
        domain = Domain.point()
        laplacian = build_laplacian(domain)
        self.assertEqual(domain.size, 1)
        self.assertEqual(laplacian.matrix.tolist(), [[0.0]])

    def test_modes_are_orthonormal(self) -> None:
        """
        The basis functions returned by `modes` are orthonormal in the discrete L2 inner product.
        """
        domain = Domain.interval(0.0, np.pi, 40, DIRICHLET)
        laplacian = build_laplacian(domain)
        _, basis = laplacian.modes(5)
        gram = basis.T @ (basis * laplacian.weights[:, None])
        self.assertTrue(np.allclose(gram, np.eye(5), atol=1e-10))

    def test_weights_sum_to_volume(self) -> None:
        """
        The weights integrate the constant 1 over the domain. For Dirichlet data the two zero-valued boundary nodes
        hold the remaining half weights of the trapezoidal rule.
        """
        for domain, boundary_weight in [(Domain.interval(0.0, np.pi, 64, DIRICHLET), np.pi / 65),
                                        (Domain.interval(0.0, 1.0, 20, NEUMANN), 0.0),
                                        (Domain.circle(2 * np.pi, 32), 0.0), (Domain.point(), 0.0)]:
            with self.subTest(repr(domain)):
                laplacian = build_laplacian(domain)
                self.assertAlmostEqual(laplacian.weights.sum() + boundary_weight, laplacian.volume, places=12)

    def test_energy_converges_quadratically(self) -> None:
        """
        For the smooth state u = sin x on (0, pi) the grid energy at n and 2n approaches the exact value
        pi / 4 - lam (pi / 4 - 3 pi / 32) with an error ratio close to (65 / 33)^2.
        """
        lam = 2.0
        exact = np.pi / 4 - lam * (np.pi / 4 - 3 * np.pi / 32)
        errors = []
        for n in (32, 64):
            problem = chafee_infante(lam, n)
            errors.append(abs(energy(problem, np.sin(problem.nodes)) - exact))
        self.assertLess(errors[1], 1e-3)
        self.assertAlmostEqual(errors[0] / errors[1], (65 / 33) ** 2, delta=0.1)

    def test_mode_count_completes_clusters(self) -> None:
        """
        Degenerate eigenvalues of the circle come in pairs, so a mode count never splits a pair.
        """
        laplacian = build_laplacian(Domain.circle(2 * np.pi, 32))
        self.assertEqual(laplacian.mode_count(2), 3)


class NonlinearityTest(unittest.TestCase):

    def test_nagumo_matches_product_form(self) -> None:
        nonlinearity = nagumo().nonlinearity
        u = np.linspace(-2.0, 2.0, 41)
        self.assertTrue(np.allclose(nonlinearity.f(0.0, u), (u - A) * (1.0 - u ** 2)))

    def test_derivative_and_primitive(self) -> None:
        """
        f_u agrees with a central difference of f, and F is the primitive of f with F(x, 0) = 0.
        """
        candidates = {
            "odd-": families.family("odd-", 3, 2.0, [0.0, 1.0]),
            "even+": families.family("even+", 2, 1.0, [1.0]),
            "polynomial": families.polynomial([0.5, -1.0, 0.0, -1.0]),
            "expression": families.expression("lam*(u - u**3)", {'lam': 2.0}),
        }
        u = np.linspace(-1.5, 1.5, 13)
        step = 1e-6
        for name, nonlinearity in candidates.items():
            with self.subTest(name):
                difference = (nonlinearity.f(0.0, u + step) - nonlinearity.f(0.0, u - step)) / (2 * step)
                self.assertTrue(np.allclose(nonlinearity.fu(0.0, u), difference, atol=1e-5))
                primitive_difference = (nonlinearity.F(0.0, u + 1e-3) - nonlinearity.F(0.0, u - 1e-3)) / 2e-3
                self.assertTrue(np.allclose(primitive_difference, nonlinearity.f(0.0, u), atol=1e-4))
                self.assertAlmostEqual(float(nonlinearity.F(0.0, 0.0)), 0.0, places=12)

    def test_non_finite_input(self) -> None:
        with self.assertRaises(ArithmeticError):
            nagumo().nonlinearity.f(0.0, np.array([np.nan]))

    def test_unknown_names_in_expression(self) -> None:
        with self.assertRaises(ConfigurationError):
            families.expression("u + unknown(u)")

    def test_constants(self) -> None:
        self.assertAlmostEqual(evaluate_constant("2*pi"), 2 * np.pi)
        with self.assertRaises(ConfigurationError):
            evaluate_constant(True)

    def test_scaled_family(self) -> None:
        """
        Scaling a family multiplies the leading coefficient only.
        """
        nonlinearity = families.family("odd-", 3, 1.0, [0.0, 1.0])
        scaled = nonlinearity.scaled(2.0)
        u = np.array([0.5, 2.0])
        self.assertTrue(np.allclose(scaled.f(0.0, u), -2.0 * u ** 3 + u))

    def test_blend_endpoints(self) -> None:
        start = families.polynomial([0.0, 1.0])
        end = families.polynomial([0.0, -1.0])
        self.assertIs(blend(start, end, 0.0), start)
        self.assertIs(blend(start, end, 1.0), end)
        self.assertAlmostEqual(float(blend(start, end, 0.25).f(0.0, 2.0)), 0.75 * 2.0 - 0.25 * 2.0)


class ProblemTest(unittest.TestCase):

    def test_wave_speed_must_be_positive(self) -> None:
        for c in [0.0, -1.0]:
            with self.subTest(f"c={c}"):
                with self.assertRaises(ConfigurationError):
                    nagumo(c)

    def test_residual_at_roots(self) -> None:
        problem = nagumo()
        for root in [-1.0, A, 1.0]:
            with self.subTest(f"u={root}"):
                self.assertAlmostEqual(float(problem.residual(np.array([root]))[0]), 0.0, places=12)

    def test_point_energies(self) -> None:
        """
        On the point domain E(u, 0) = -F(u).
        """
        problem = nagumo()
        for u, expected in [(A, 0.044325), (1.0, -0.05), (-1.0, -0.45)]:
            with self.subTest(f"u={u}"):
                self.assertAlmostEqual(energy(problem, np.array([u])), expected, places=9)

    def test_energy_of_zero_state(self) -> None:
        problem = chafee_infante(2.0, 32)
        self.assertEqual(energy(problem, np.zeros(32)), 0.0)

    def test_energy_includes_kinetic_part(self) -> None:
        problem = nagumo()
        self.assertAlmostEqual(energy(problem, np.array([1.0]), np.array([2.0])), -0.05 - 2.0, places=12)

    def test_energy_rate_needs_samples(self) -> None:
        class Samples(object):
            times = np.array([0.0, 1.0])
            energies = np.zeros(2)
            speed_sq = np.zeros(2)
            wave_speeds = np.ones(2)

        with self.assertRaises(InsufficientDataError):
            energy_rate_check(None, Samples())

    def test_energy_rate_uses_problem_wave_speed(self) -> None:
        """
        Samples without their own wave speeds are checked against the speed of the problem.
        """
        class Samples(object):
            times = np.array([0.0, 1.0, 2.0])
            energies = np.array([0.0, -2.0, -4.0])
            speed_sq = np.ones(3)

        self.assertAlmostEqual(energy_rate_check(nagumo(2.0), Samples()), 0.0, places=12)
        self.assertAlmostEqual(energy_rate_check(nagumo(1.0), Samples()), 1.0, places=12)
        with self.assertRaises(ValueError):
            energy_rate_check(None, Samples())

    def test_smooth_switch(self) -> None:
        """
        The switch is 0 left of -ell, 1 right of ell, 1/2 in the middle and monotone.
        """
        ell = 2.0
        t = np.linspace(-3.0, 3.0, 601)
        s = smooth_switch(t, ell)
        self.assertTrue(np.all(s[t <= -ell] == 0.0))
        self.assertTrue(np.all(s[t >= ell] == 1.0))
        self.assertAlmostEqual(float(smooth_switch(0.0, ell)), 0.5)
        self.assertTrue(np.all(np.diff(s) >= 0.0))


class HypothesesTest(unittest.TestCase):

    def test_nagumo(self) -> None:
        """
        The Nagumo nonlinearity belongs to the odd- class: (f1) and (f2) hold with theta = -0.6.
        """
        report = validate_hypotheses(nagumo().nonlinearity)
        self.assertTrue(report.f1_passed)
        self.assertEqual(report.f2_variant, F2)
        self.assertAlmostEqual(report.f2_theta, -0.6)
        self.assertTrue(report.passed)

    def test_even_plus(self) -> None:
        report = validate_hypotheses(families.family("even+", 2, 1.0, [1.0]), require_f3=True)
        self.assertEqual(report.f2_variant, F2_PRIME)
        self.assertTrue(report.f3_passed)
        self.assertTrue(report.passed)

    def test_linear_growth_fails_f3(self) -> None:
        """
        A bounded oscillating nonlinearity is not superlinear, so it fails (f3) whenever (f3) is required.
        """
        report = validate_hypotheses(families.expression("sin(u)", p=1.0), require_f3=True)
        self.assertFalse(report.f3_passed)
        self.assertFalse(report.passed)

    def test_invalid_grids(self) -> None:
        for u_range, samples in [((-1.0, 2.0), 101), ((-1.0, 1.0), 2), ((1.0, -1.0), 101)]:
            with self.subTest(f"{u_range} {samples}"):
                with self.assertRaises(ConfigurationError):
                    validate_hypotheses(nagumo().nonlinearity, u_range, samples)

    def test_wave_speed_homotopy(self) -> None:
        """
        A homotopy of the wave speed only is constant outside [-ell, ell] and never changes F.
        """
        report = validate_homotopy(HomotopyPath.between(nagumo(0.5), nagumo(2.0), 1.0))
        self.assertTrue(report.constant_outside)
        self.assertAlmostEqual(report.min_wave_speed, 0.5)
        self.assertEqual(report.theta, 0.0)
        self.assertEqual(report.epsilon_bound, 0.0)

    def test_homotopy_needs_equal_grids(self) -> None:
        with self.assertRaises(HomotopyValidationError):
            HomotopyPath.between(nagumo(), chafee_infante(2.0), 1.0)

    def test_homotopy_needs_positive_ell(self) -> None:
        with self.assertRaises(HomotopyValidationError):
            HomotopyPath.between(nagumo(), nagumo(), 0.0)


class ProblemFabricTest(unittest.TestCase):

    DEFINITION = {
        'schema_version': 1,
        'name': 'ci',
        'domain': {'kind': 'interval', 'a': 0, 'b': 'pi', 'n': 16, 'boundary': 'dirichlet'},
        'nonlinearity': {'family': 'odd-', 'p': 3, 'alpha': 2, 'h_coeffs': [0, 2]},
        'wave_speed': 1
    }

    def test_fabricate(self) -> None:
        problem = fabricate(self.DEFINITION)
        self.assertEqual(problem.name, 'ci')
        self.assertAlmostEqual(problem.domain.b, np.pi)
        self.assertEqual(problem.size, 16)
        self.assertEqual(problem.nonlinearity.family, "odd-")

    def test_schema_errors(self) -> None:
        """
        Unknown keys, missing keys, unknown families and unsupported versions are configuration errors.
        """
        broken = {
            "unknown key": dict(self.DEFINITION, colour='red'),
            "missing key": {k: v for k, v in self.DEFINITION.items() if k != 'wave_speed'},
            "version": dict(self.DEFINITION, schema_version=2),
            "family": dict(self.DEFINITION, nonlinearity={'family': 'odd', 'p': 3}),
            "grid size": dict(self.DEFINITION, domain=dict(self.DEFINITION['domain'], n=16.5)),
        }
        for name, definition in broken.items():
            with self.subTest(name):
                with self.assertRaises(ConfigurationError):
                    fabricate(definition)

    def test_custom_polynomial(self) -> None:
        definition = dict(self.DEFINITION, nonlinearity={'family': 'custom', 'coefficients': [0, 1, 0, -1]})
        problem = fabricate(definition)
        self.assertAlmostEqual(float(problem.nonlinearity.f(0.0, 2.0)), 2.0 - 8.0)


if __name__ == '__main__':
    unittest.main()
