"""
Connecting orbits of the Galerkin system as solutions of two point boundary value problems on [-T, T].
The end states are tied to the rest points by projection boundary conditions: U(-T) - Z_- lies in the unstable
subspace of the linearization at Z_-, U(T) - Z_+ in the stable subspace at Z_+. For autonomous problems the time shift
is fixed by an integral phase condition on the energy.
"""
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_bvp

from dynamics.flow import FlowSystem, RestSpectrum, build_trajectory, integrate, rest_point_spectrum, sample_times
from searching.orbits import (DEDUP_TOL, SEPARATION_FACTOR, HeteroclinicOrbit, OrbitSearch, accept_orbit,
                              add_distinct, index_one_pairs, sort_orbits, _fit_tails)
from searching.stationary import StationaryPoint
from travelwave.errors import ConfigurationError, DegenerateOrbitError, TransversalityWarning
from travelwave.problem import HomotopyPath, SpatialProblem

logger = logging.getLogger(__name__)

# truncation time T is chosen such that exp(-gamma T) drops below this value
TAIL_DECAY = 1e-8
MAX_HALF_WIDTH = 40.0


class CollocationSettings(object):
    """
    Parameters of the collocation search.
    """

    def __init__(self, modes: int = 16, tol: float = 1e-6, max_nodes: int = 20000, mesh_points: int = 201,
                 widths: Sequence[float] = (1.0, 2.0, 4.0), perturbations: int = 2, perturbation_size: float = 0.1,
                 seed: int = 0, sample_step: float = 5e-3, endpoint_tol: float = 1e-3, verify_windows: int = 5,
                 verify_tol: float = 1e-4, atol: float = 1e-9, half_width: Optional[float] = None) -> None:
        self.modes = modes
        self.tol = tol
        self.max_nodes = max_nodes
        self.mesh_points = mesh_points
        self.widths = tuple(widths)
        self.perturbations = perturbations
        self.perturbation_size = perturbation_size
        self.seed = seed
        self.sample_step = sample_step
        self.endpoint_tol = endpoint_tol
        self.verify_windows = verify_windows
        self.verify_tol = verify_tol
        self.atol = atol
        #: fixed T; chosen from the tail rates if None
        self.half_width = half_width

    def scaled(self, tol_scale: float) -> 'CollocationSettings':
        scaled = CollocationSettings(**self.to_dict())
        scaled.tol = self.tol * tol_scale
        scaled.atol = self.atol * tol_scale
        return scaled

    def to_dict(self) -> dict:
        values = dict(vars(self))
        values['widths'] = list(self.widths)
        return values


class BoundaryProblem(object):
    """
    The two point boundary value problem for connections from Z_- to Z_+ of a (possibly nonautonomous) system.
    """

    def __init__(self, system: FlowSystem, source_state: np.ndarray, target_state: np.ndarray,
                 source_spectrum: RestSpectrum, target_spectrum: RestSpectrum, half_width: float,
                 phase_condition: bool) -> None:
        self.system = system
        self.source_state = source_state
        self.target_state = target_state
        self.half_width = half_width
        self.phase_condition = phase_condition
        self.source_rows = source_spectrum.unstable_complement
        self.target_rows = target_spectrum.stable_complement
        self.dimension = system.dimension + (1 if phase_condition else 0)
        conditions = self.source_rows.shape[0] + self.target_rows.shape[0] + (2 if phase_condition else 0)
        if conditions != self.dimension:
            raise ConfigurationError(f"{conditions} boundary conditions for a system of dimension {self.dimension}")
        if phase_condition:
            upper = system.energy(source_state, system.t_minus)
            lower = system.energy(target_state, system.t_plus)
            self.energy_mid = 0.5 * (upper + lower)
            self.energy_scale = upper - lower

    def fun(self, t: np.ndarray, Y: np.ndarray) -> np.ndarray:
        n = self.system.dimension
        dU = self.system.rhs(t, Y[:n])
        if not self.phase_condition:
            return dU
        dq = (self.system.energy(Y[:n], t) - self.energy_mid) / self.energy_scale
        return np.vstack([dU, dq[None, :]])

    def fun_jac(self, t: np.ndarray, Y: np.ndarray) -> np.ndarray:
        n = self.system.dimension
        jac = np.zeros((self.dimension, self.dimension, Y.shape[1]))
        jac[:n, :n, :] = self.system.jacobian_columns(t, Y[:n])
        if self.phase_condition:
            jac[n, :n, :] = self.system.energy_gradient(Y[:n], t) / self.energy_scale
        return jac

    def bc(self, ya: np.ndarray, yb: np.ndarray) -> np.ndarray:
        n = self.system.dimension
        residual = [self.source_rows @ (ya[:n] - self.source_state), self.target_rows @ (yb[:n] - self.target_state)]
        if self.phase_condition:
            residual.append(np.array([ya[n], yb[n]]))
        return np.concatenate(residual)

    def bc_jac(self, ya: np.ndarray, yb: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        n = self.system.dimension
        k_source = self.source_rows.shape[0]
        k_target = self.target_rows.shape[0]
        dya = np.zeros((self.dimension, self.dimension))
        dyb = np.zeros((self.dimension, self.dimension))
        dya[:k_source, :n] = self.source_rows
        dyb[k_source:k_source + k_target, :n] = self.target_rows
        if self.phase_condition:
            dya[-2, n] = 1.0
            dyb[-1, n] = 1.0
        return dya, dyb

    def guesses(self, settings: CollocationSettings, time_offset: float = 0.0) -> List[Tuple[np.ndarray, np.ndarray]]:
        """
        Smoothed steps from Z_- to Z_+ of several widths and random perturbations of them.
        """
        mesh = np.linspace(-self.half_width, self.half_width, settings.mesh_points)
        rng = np.random.default_rng(settings.seed)
        n = self.system.N
        guesses = []
        for width in settings.widths:
            step = 0.5 * (1.0 + np.tanh((mesh - time_offset) / width))
            slope = 0.5 / width / np.cosh((mesh - time_offset) / width) ** 2
            jump = self.target_state - self.source_state
            base = self.source_state[:, None] + step[None, :] * jump[:, None]
            base[n:] = slope[None, :] * jump[:n, None]
            bump = 1.0 / np.cosh(mesh - time_offset) ** 2
            shapes = [np.zeros(n)] + [rng.standard_normal(n) for _ in range(settings.perturbations)]
            for shape in shapes:
                guess = base.copy()
                norm = np.linalg.norm(shape)
                if norm > 0:
                    guess[:n] += settings.perturbation_size * bump[None, :] * (shape / norm)[:, None]
                guesses.append((mesh, self._with_phase(mesh, guess)))
        return guesses

    def _with_phase(self, mesh: np.ndarray, guess: np.ndarray) -> np.ndarray:
        if not self.phase_condition:
            return guess
        integrand = (self.system.energy(guess, mesh) - self.energy_mid) / self.energy_scale
        q = cumulative_trapezoid(integrand, mesh, initial=0.0)
        # subtract the linear part so that both boundary values of q vanish
        q = q - (mesh + self.half_width) / (2 * self.half_width) * q[-1]
        return np.vstack([guess, q[None, :]])

    def solve(self, mesh: np.ndarray, guess: np.ndarray, settings: CollocationSettings):
        return solve_bvp(self.fun, self.bc, mesh, guess, fun_jac=self.fun_jac, bc_jac=self.bc_jac,
                         tol=settings.tol, max_nodes=settings.max_nodes)

    def trajectory(self, solution, settings: CollocationSettings):
        n = self.system.dimension
        times = sample_times((-self.half_width, self.half_width), settings.sample_step)
        states = solution.sol(times)[:n].T
        return build_trajectory(self.system, times, states,
                                dense=lambda t: solution.sol(t)[:n],
                                metadata={'scheme': 'collocation', 'tol': settings.tol, 'T': self.half_width,
                                          'nodes': int(solution.x.shape[0])})

    def endpoints_close(self, trajectory, settings: CollocationSettings) -> bool:
        return bool(np.linalg.norm(trajectory.states[0] - self.source_state) <= settings.endpoint_tol
                    and np.linalg.norm(trajectory.states[-1] - self.target_state) <= settings.endpoint_tol)


def half_width_for(source_spectrum: RestSpectrum, target_spectrum: RestSpectrum, margin: float = 0.0) -> float:
    """
    T such that exp(-gamma T) < TAIL_DECAY for the slowest tail rate gamma, capped at MAX_HALF_WIDTH, plus `margin`.
    """
    rates = [rate for rate in (source_spectrum.unstable_rate, target_spectrum.stable_rate) if rate]
    gamma = min(rates) if rates else 1.0
    return min(np.log(1.0 / TAIL_DECAY) / gamma, MAX_HALF_WIDTH) + margin


def verify_forward(system: FlowSystem, trajectory, spectra: Sequence[RestSpectrum],
                   settings: CollocationSettings) -> float:
    """
    Integrates forward over short windows starting at samples of a collocation solution and returns the largest
    relative deviation at the window ends. The windows are short because half of the spectrum is unstable.
    """
    fastest = max(float(np.max(np.abs(spectrum.eigenvalues.real))) for spectrum in spectra)
    window = 1.0 / max(fastest, 1.0)
    starts = np.linspace(trajectory.times[0], trajectory.times[-1] - window, settings.verify_windows + 2)[1:-1]
    deviation = 0.0
    for start in starts:
        expected = trajectory.state_at(start + window)
        check = integrate(system, trajectory.state_at(start), (start, start + window), sample_step=window,
                          rtol=settings.atol, atol=settings.atol)
        error = np.linalg.norm(check.states[-1] - expected) / (1.0 + np.linalg.norm(expected))
        deviation = max(deviation, float(error))
    return deviation


def _search_pair(system: FlowSystem, source: StationaryPoint, target: StationaryPoint,
                 settings: CollocationSettings) -> dict:
    """
    Collocation search for the orbits of one pair; runs in a worker thread.
    """
    result = {'orbits': [], 'rejected': [], 'certified': True, 'miss': False}
    source_state = system.rest_state(source)
    target_state = system.rest_state(target)
    spectra = (rest_point_spectrum(system, source_state), rest_point_spectrum(system, target_state))
    relative_index = spectra[0].morse_index - spectra[1].morse_index
    if relative_index != 1:
        result['rejected'].append({'source': source.id, 'target': target.id,
                                   'reason': f"relative index {relative_index} in the truncated system"})
        result['certified'] = False
        return result
    drop = system.energy(source_state) - system.energy(target_state)
    if not drop > 0:
        result['rejected'].append({'source': source.id, 'target': target.id, 'reason': "no energy drop"})
        return result

    half_width = settings.half_width or half_width_for(*spectra)
    boundary = BoundaryProblem(system, source_state, target_state, spectra[0], spectra[1], half_width, True)
    for mesh, guess in boundary.guesses(settings):
        solution = boundary.solve(mesh, guess, settings)
        if solution.status == 2:
            warnings.warn(f"singular collocation Jacobian for {source.id} -> {target.id}; the connection may not be "
                          f"transversal", TransversalityWarning)
            result['certified'] = False
            continue
        if solution.status != 0:
            logger.debug("%s -> %s: %s", source.id, target.id, solution.message)
            continue
        trajectory = boundary.trajectory(solution, settings)
        if not boundary.endpoints_close(trajectory, settings):
            logger.debug("%s -> %s: solution does not reach the rest points", source.id, target.id)
            continue
        deviation = verify_forward(system, trajectory, spectra, settings)
        if deviation > settings.verify_tol:
            result['rejected'].append({'source': source.id, 'target': target.id,
                                       'reason': f"forward verification deviates by {deviation:.3g}"})
            continue
        orbit = HeteroclinicOrbit(source.id, target.id, trajectory, relative_index, drop, source_state,
                                  target_state, method="collocation")
        try:
            reason = accept_orbit(orbit, system, settings.atol)
        except DegenerateOrbitError as error:
            result['rejected'].append({'source': source.id, 'target': target.id, 'reason': str(error)})
            continue
        if reason is not None:
            result['rejected'].append({'source': source.id, 'target': target.id, 'reason': reason})
            result['certified'] = False
            continue
        added, separated = add_distinct(orbit, result['orbits'])
        result['certified'] = result['certified'] and separated
        if added:
            _fit_tails(orbit, system)
    if not result['orbits']:
        result['miss'] = True
        result['certified'] = False
    return result


def find_heteroclinics_galerkin(problem: SpatialProblem, rest_points: Sequence[StationaryPoint],
                                pairs: Optional[Sequence[Tuple[str, str]]] = None,
                                settings: Optional[CollocationSettings] = None, threads: int = 1) -> OrbitSearch:
    """
    Finds connecting orbits of the Galerkin system for pairs of rest points with relative index 1.
    Every pair is solved from several initial guesses; converged solutions are verified by short forward
    integrations and deduplicated modulo time shift. A pair without any orbit is a miss and leaves the search
    uncertified.
    :param problem: a problem on an interval or circle
    :param rest_points: hyperbolic stationary points
    :param pairs: (source id, target id) pairs; all index-1 pairs if omitted
    :param settings: collocation parameters
    :param threads: number of pairs solved in parallel
    :return: the search result
    """
    settings = settings or CollocationSettings()
    if problem.domain.is_point:
        raise ConfigurationError("the collocation search needs an interval or circle domain")
    points = list(rest_points)
    by_id = {point.id: point for point in points}
    pairs = list(pairs) if pairs is not None else index_one_pairs(points)
    system = FlowSystem(problem, settings.modes)

    accepted, rejected, misses = [], [], []
    certified = True
    for source_id, target_id in pairs:
        if by_id[source_id].morse_index - by_id[target_id].morse_index != 1:
            rejected.append({'source': source_id, 'target': target_id, 'reason': "relative index is not 1"})

    candidates = [(by_id[s], by_id[t]) for s, t in pairs if by_id[s].morse_index - by_id[t].morse_index == 1]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        results = list(executor.map(lambda pair: _search_pair(system, pair[0], pair[1], settings),
                                    candidates))
    for (source, target), result in zip(candidates, results):
        accepted.extend(result['orbits'])
        rejected.extend(result['rejected'])
        certified = certified and result['certified']
        if result['miss']:
            misses.append((source.id, target.id))
        logger.info("%s -> %s: %d orbits", source.id, target.id, len(result['orbits']))

    orbits = sort_orbits(accepted, points)
    return OrbitSearch(orbits, [], misses, rejected, certified, "collocation")


class ConnectionCount(object):
    """
    Solutions of the nonautonomous equation from X0 to X1; `count` is their number mod 2.
    """

    def __init__(self, source_id: str, target_id: str, trajectories: list, misses: int, certified: bool) -> None:
        self.source_id = source_id
        self.target_id = target_id
        self.trajectories = trajectories
        self.misses = misses
        self.certified = certified

    @property
    def raw(self) -> int:
        return len(self.trajectories)

    @property
    def count(self) -> int:
        return self.raw % 2

    def to_dict(self) -> dict:
        return {'source': self.source_id, 'target': self.target_id, 'raw': self.raw, 'mod2': self.count,
                'misses': self.misses, 'certified': self.certified}


def find_nonautonomous_connections(path: HomotopyPath, source: StationaryPoint, target: StationaryPoint,
                                   settings: Optional[CollocationSettings] = None) -> ConnectionCount:
    """
    Counts solutions of the nonautonomous equation along `path` from the rest point `source` of (f_-, c_-) to the
    rest point `target` of (f_+, c_+). There is no time shift symmetry, so no phase condition is used and distinct
    solutions are compared at equal times.
    Initial guesses that do not converge are recorded as misses. A count of zero that rests on misses only is
    uncertified.
    :param path: a validated homotopy
    :param source: stationary point of the start problem
    :param target: stationary point of the end problem, of the same Morse index
    :param settings: collocation parameters
    :return: the count
    """
    settings = settings or CollocationSettings()
    if source.morse_index != target.morse_index:
        raise ConfigurationError(f"{source.id} and {target.id} have different Morse indices")
    system = FlowSystem(path.start, None if path.start.domain.is_point else settings.modes, path)
    source_state = system.rest_state(source, system.t_minus)
    target_state = system.rest_state(target, system.t_plus)
    spectra = (rest_point_spectrum(system, source_state, system.t_minus),
               rest_point_spectrum(system, target_state, system.t_plus))
    half_width = settings.half_width or half_width_for(*spectra, margin=path.ell)
    boundary = BoundaryProblem(system, source_state, target_state, spectra[0], spectra[1], half_width, False)

    trajectories = []
    misses = 0
    certified = True
    for mesh, guess in boundary.guesses(settings):
        solution = boundary.solve(mesh, guess, settings)
        if solution.status == 2:
            warnings.warn(f"singular collocation Jacobian for the connection {source.id} -> {target.id}",
                          TransversalityWarning)
            certified = False
            continue
        if solution.status != 0:
            misses += 1
            continue
        trajectory = boundary.trajectory(solution, settings)
        if not boundary.endpoints_close(trajectory, settings):
            misses += 1
            continue
        distances = [float(np.max(np.abs(trajectory.states - other.states))) for other in trajectories]
        if any(distance < DEDUP_TOL for distance in distances):
            continue
        if any(distance < SEPARATION_FACTOR * DEDUP_TOL for distance in distances):
            certified = False
        trajectories.append(trajectory)

    logger.info("connections %s -> %s along the homotopy: %d (%d misses)", source.id, target.id, len(trajectories),
                misses)
    if misses and not trajectories:
        certified = False
    return ConnectionCount(source.id, target.id, trajectories, misses, certified)
