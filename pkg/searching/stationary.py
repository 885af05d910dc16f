import logging
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from searching.util import SearchCallback
from travelwave.errors import DivergenceError, NonHyperbolicError, SingularJacobianError
from travelwave.problem import SpatialProblem, energy

logger = logging.getLogger(__name__)

# sufficient decrease constant of the backtracking line search
ARMIJO = 1e-4


class SolverSettings(object):
    """
    Tolerances of the Newton solver and of the classification of its results.
    """

    def __init__(self, newton_tol: float = 1e-9, step_tol: float = 1e-9, max_iters: int = 100,
                 dedup_factor: float = 1e-6, gap_factor: float = 10.0, max_backtracks: int = 12) -> None:
        self.newton_tol = newton_tol
        self.step_tol = step_tol
        self.max_iters = max_iters
        self.dedup_factor = dedup_factor
        self.gap_factor = gap_factor
        self.max_backtracks = max_backtracks

    def scaled(self, tol_scale: float) -> 'SolverSettings':
        return SolverSettings(self.newton_tol * tol_scale, self.step_tol * tol_scale, self.max_iters,
                              self.dedup_factor, self.gap_factor, self.max_backtracks)

    def to_dict(self) -> dict:
        return dict(vars(self))


class StationaryPoint(object):
    """
    A solution z of Delta z + f(x, z) = 0 together with its Morse index, hyperbolicity certificate and energy.
    """

    def __init__(self, z: np.ndarray, residual_norm: float, morse_index: int, hyperbolic: bool,
                 spectral_gap: float, energy: float, eigenvalues: np.ndarray, id: str = "") -> None:
        self.z = np.asarray(z, dtype=float)
        self.residual_norm = float(residual_norm)
        self.morse_index = int(morse_index)
        self.hyperbolic = bool(hyperbolic)
        self.spectral_gap = float(spectral_gap)
        self.energy = float(energy)
        self.eigenvalues = np.asarray(eigenvalues, dtype=float)
        self.id = id

    def to_dict(self) -> dict:
        return {'id': self.id, 'z': self.z.tolist(), 'residual_norm': self.residual_norm, 'm': self.morse_index,
                'hyperbolic': self.hyperbolic, 'gap': self.spectral_gap, 'energy': self.energy,
                'eigenvalues': self.eigenvalues.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> 'StationaryPoint':
        return cls(np.array(data['z']), data['residual_norm'], data['m'], data['hyperbolic'], data['gap'],
                   data['energy'], np.array(data['eigenvalues']), data['id'])

    def __repr__(self) -> str:
        return f"StationaryPoint({self.id}, m={self.morse_index}, E={self.energy:.6g}, gap={self.spectral_gap:.3g})"


class DeflationOperator(object):
    """
    M(z) = prod_i ||z - z_i||^-p + shift, with the discrete L2 norm.
    Multiplying the residual with M removes the known solutions z_i as attractors of Newton's method.
    """

    def __init__(self, weights: np.ndarray, power: float = 2.0, shift: float = 1.0) -> None:
        #: quadrature weights of the norm
        self.weights = weights
        #: the order of the norm that will be used for the deflation operator
        self.p = power
        #: constant in the deflation operator, keeps M bounded away from 0
        self.shift = shift
        #: list of solutions, that will be suppressed by the deflation operator
        self.solutions = []  # type: List[np.ndarray]

    def _distances_sq(self, z: np.ndarray) -> np.ndarray:
        return np.maximum([np.sum(self.weights * (z - z_i) ** 2) for z_i in self.solutions], 1e-300)

    def operator(self, z: np.ndarray) -> float:
        """obtain the value of the deflation operator for given z"""
        if not self.solutions:
            return 1.0
        return float(np.prod(self._distances_sq(z) ** (-self.p / 2))) + self.shift

    def D_operator(self, z: np.ndarray) -> np.ndarray:
        """gradient of the deflation operator for given z"""
        if not self.solutions:
            return np.zeros_like(z)
        distances_sq = self._distances_sq(z)
        product = float(np.prod(distances_sq ** (-self.p / 2)))
        return -self.p * product * np.sum([self.weights * (z - z_i) / d
                                           for z_i, d in zip(self.solutions, distances_sq)], axis=0)

    def deflated_step(self, z: np.ndarray, step: np.ndarray) -> np.ndarray:
        """
        Turns the Newton step of the residual into the Newton step of the deflated residual M(z) * F(z).
        """
        if not self.solutions:
            return step
        beta = float(self.D_operator(z) @ step) / self.operator(z)
        if abs(1.0 - beta) < 1e-14:
            raise DivergenceError("deflated Newton step is undefined")
        return step / (1.0 - beta)

    def add_solution(self, z: np.ndarray) -> None:
        """add a solution to the list of solutions used for deflation"""
        self.solutions.append(z)

    def clear_solutions(self) -> None:
        """clear the list of solutions used for deflation"""
        self.solutions = []


def _newton(problem: SpatialProblem, initial_guess: np.ndarray, settings: SolverSettings,
            deflation: Optional[DeflationOperator] = None,
            callback: Optional[SearchCallback] = None) -> Tuple[np.ndarray, float]:
    z = np.array(initial_guess, dtype=float).reshape(-1)
    if z.shape[0] != problem.size:
        raise ValueError(f"initial guess of length {z.shape[0]} does not match the grid size {problem.size}")
    if deflation is None:
        deflation = DeflationOperator(problem.weights)

    step_norm = float('inf')
    for iteration in range(settings.max_iters + 1):
        residual = problem.residual(z)
        residual_norm = problem.l2_norm(residual)
        if not np.isfinite(residual_norm):
            raise DivergenceError("Newton iteration produced non-finite values")
        if callback is not None:
            callback.callback(z, iteration, residual_norm)
        if residual_norm <= settings.newton_tol and step_norm <= settings.step_tol:
            return z, residual_norm
        if iteration == settings.max_iters:
            break

        try:
            step = scipy.linalg.solve(problem.jacobian(z), -residual, assume_a='sym')
        except np.linalg.LinAlgError:
            raise SingularJacobianError(f"singular Jacobian after {iteration} Newton iterations")
        step = deflation.deflated_step(z, step)

        merit = residual_norm * deflation.operator(z)
        t = 1.0
        for _ in range(settings.max_backtracks):
            trial = z + t * step
            trial_merit = problem.l2_norm(problem.residual(trial)) * deflation.operator(trial)
            if np.isfinite(trial_merit) and trial_merit <= (1.0 - ARMIJO * t) * merit:
                break
            t /= 2
        z = z + t * step
        step_norm = problem.l2_norm(t * step)

    raise DivergenceError(f"Newton iteration did not converge in {settings.max_iters} iterations")


def _spectrum(problem: SpatialProblem, z: np.ndarray) -> np.ndarray:
    return np.sort(scipy.linalg.eigvalsh(problem.linearization(z)))[::-1]


def hyperbolicity_check(problem: SpatialProblem, z: np.ndarray,
                        settings: Optional[SolverSettings] = None) -> Tuple[bool, float]:
    """
    A rest point (z, 0) is hyperbolic iff 0 is not an eigenvalue of Delta + f_u(x, z).
    :return: whether z is hyperbolic and the spectral gap min |eigenvalue|
    """
    settings = settings or SolverSettings()
    gap = float(np.min(np.abs(_spectrum(problem, z))))
    return gap > problem.hyperbolicity_threshold(settings.newton_tol, settings.gap_factor), gap


def morse_index(problem: SpatialProblem, z: np.ndarray, settings: Optional[SolverSettings] = None) -> int:
    """
    Number of positive eigenvalues of Delta + f_u(x, z).
    Raises NonHyperbolicError if an eigenvalue lies in the zero band.
    """
    settings = settings or SolverSettings()
    eigenvalues = _spectrum(problem, z)
    threshold = problem.hyperbolicity_threshold(settings.newton_tol, settings.gap_factor)
    if np.min(np.abs(eigenvalues)) <= threshold:
        raise NonHyperbolicError(f"eigenvalue {eigenvalues[np.argmin(np.abs(eigenvalues))]:.3g} within the zero "
                                 f"band {threshold:.3g}; the Morse index is undefined")
    return int(np.sum(eigenvalues > threshold))


def analyse_point(problem: SpatialProblem, z: np.ndarray, residual_norm: float,
                  settings: Optional[SolverSettings] = None, id: str = "") -> StationaryPoint:
    """
    Populates index, hyperbolicity and energy of a converged solution.
    For non-hyperbolic points the index counts the eigenvalues above the zero band.
    """
    settings = settings or SolverSettings()
    eigenvalues = _spectrum(problem, z)
    threshold = problem.hyperbolicity_threshold(settings.newton_tol, settings.gap_factor)
    gap = float(np.min(np.abs(eigenvalues)))
    return StationaryPoint(z, residual_norm, int(np.sum(eigenvalues > threshold)), gap > threshold, gap,
                           energy(problem, z), eigenvalues, id)


def solve_newton(problem: SpatialProblem, initial_guess, settings: Optional[SolverSettings] = None,
                 callback: Optional[SearchCallback] = None) -> StationaryPoint:
    """
    Solves Delta z + f(x, z) = 0 by Newton's method with a backtracking line search.
    Raises DivergenceError if the iteration does not converge and SingularJacobianError if the Jacobian is
    singular.
    :param problem: the problem
    :param initial_guess: a grid function (a scalar for the point domain)
    :param settings: solver tolerances
    :param callback: called once per iteration
    :return: the converged point with index, energy and hyperbolicity populated
    """
    settings = settings or SolverSettings()
    z, residual_norm = _newton(problem, np.atleast_1d(initial_guess), settings, callback=callback)
    return analyse_point(problem, z, residual_norm, settings)


class SearchStrategy(object):
    """
    Seeds for `find_all`: sup-normalized Laplacian modes times amplitudes, the zero function and random
    combinations of the seed modes.
    """

    def __init__(self, modes: Sequence[int] = (1, 2, 3, 4),
                 amplitudes: Sequence[float] = (-1.5, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 1.5),
                 random_starts: int = 8, seed: int = 0, deflation: bool = True, max_deflations: int = 8) -> None:
        self.modes = list(modes)
        self.amplitudes = list(amplitudes)
        self.random_starts = random_starts
        self.seed = seed
        self.deflation = deflation
        self.max_deflations = max_deflations

    def seeds(self, problem: SpatialProblem) -> Iterator[np.ndarray]:
        vectors = problem.laplacian.eigenvectors
        modes = [k for k in self.modes if 1 <= k <= vectors.shape[1]]
        profiles = []
        for k in modes:
            phi = vectors[:, k - 1]
            profiles.append(phi / phi[np.argmax(np.abs(phi))])

        yield np.zeros(problem.size)
        for phi in profiles:
            for amplitude in self.amplitudes:
                yield amplitude * phi
        if not profiles:
            return
        rng = np.random.default_rng(self.seed)
        scale = max(np.abs(self.amplitudes)) if self.amplitudes else 1.0
        for _ in range(self.random_starts):
            coefficients = rng.normal(size=len(profiles)) * scale / np.sqrt(len(profiles))
            yield np.sum([c * phi for c, phi in zip(coefficients, profiles)], axis=0)

    def to_dict(self) -> dict:
        return dict(vars(self))


class StationarySet(object):
    """
    The ordered result of `find_all`.
    """

    def __init__(self, points: List[StationaryPoint], seeds_tried: int, misses: int) -> None:
        self.points = points
        self.seeds_tried = seeds_tried
        self.misses = misses

    def __iter__(self) -> Iterator[StationaryPoint]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, item: int) -> StationaryPoint:
        return self.points[item]

    def by_id(self) -> Dict[str, StationaryPoint]:
        return {point.id: point for point in self.points}

    def to_dict(self) -> dict:
        return {'points': [point.to_dict() for point in self.points], 'seeds_tried': self.seeds_tried,
                'misses': self.misses}


def sort_points(points: List[StationaryPoint]) -> List[StationaryPoint]:
    """
    Sorts by descending energy, ties broken by lexicographic z, and assigns the ids z0, z1, ...
    """
    ordered = sorted(points, key=lambda point: (-round(point.energy, 9), tuple(np.round(point.z, 9))))
    for number, point in enumerate(ordered):
        point.id = f"z{number}"
    return ordered


def find_all(problem: SpatialProblem, strategy: Optional[SearchStrategy] = None,
             settings: Optional[SolverSettings] = None,
             callback: Optional[SearchCallback] = None) -> StationarySet:
    """
    Multistart search for all stationary solutions, with deflation of the solutions found so far.
    Seeds are processed in order, so the result only depends on the strategy (including its seed value).
    :param problem: the problem
    :param strategy: the seeds to use
    :param settings: solver tolerances
    :param callback: called once per Newton iteration
    :return: pairwise distinct solutions, sorted and labelled
    """
    strategy = strategy or SearchStrategy()
    settings = settings or SolverSettings()
    dedup_tol = settings.dedup_factor * np.sqrt(problem.volume)
    deflation = DeflationOperator(problem.weights)
    found = []  # type: List[Tuple[np.ndarray, float]]
    seeds_tried = 0
    misses = 0

    for seed in strategy.seeds(problem):
        seeds_tried += 1
        for attempt in range(strategy.max_deflations + 1):
            # a seed that coincides with a known solution is a pole of the deflated residual
            if attempt > 0 and any(problem.l2_norm(seed - known) <= dedup_tol for known, _ in found):
                break
            try:
                z, residual_norm = _newton(problem, seed, settings,
                                           deflation if strategy.deflation else None, callback)
            except (DivergenceError, SingularJacobianError) as error:
                logger.debug("seed %d: %s", seeds_tried, error)
                misses += 1
                break

            duplicate = None
            for number, (known, known_residual) in enumerate(found):
                if problem.l2_norm(z - known) <= dedup_tol:
                    duplicate = number
                    break
            if duplicate is not None:
                if residual_norm < found[duplicate][1]:
                    found[duplicate] = (z, residual_norm)
                    # the poles follow the more accurate copy
                    deflation.clear_solutions()
                    for known, _ in found:
                        deflation.add_solution(known)
                break
            found.append((z, residual_norm))
            deflation.add_solution(z)
            if not strategy.deflation:
                break

    points = []
    for z, residual_norm in found:
        # independent re-check of the residual outside the solver loop
        recomputed = problem.l2_norm(problem.residual(z))
        if recomputed > settings.newton_tol:
            logger.warning("dropping a solution with residual %.3g", recomputed)
            continue
        points.append(analyse_point(problem, z, recomputed, settings))

    points = sort_points(points)
    logger.info("found %d stationary points from %d seeds (%d misses)", len(points), seeds_tried, misses)
    return StationarySet(points, seeds_tried, misses)


def energy_bound_check(points: Sequence[StationaryPoint], c_prime: float, volume: float,
                       slack: float = 1e-8) -> bool:
    """
    Checks the lower bound E(Z) >= -C_f' Vol for all points.
    """
    bound = -c_prime * volume - slack
    return all(point.energy >= bound for point in points)
