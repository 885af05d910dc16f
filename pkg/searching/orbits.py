"""
Heteroclinic orbits between hyperbolic rest points, their mod 2 counts and the checks every accepted orbit passes:
monotone energy, closed energy bookkeeping, spectral flow equal to the relative index and exponential tails.
Planar problems are searched by shooting along the one dimensional invariant manifolds of saddles; problems on an
interval or circle use the collocation search in `searching.collocation`.
"""
import logging
import warnings
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from dynamics.flow import (FlowSystem, SpectralFlow, Trajectory, integrate, rest_point_spectrum,
                           spectral_flow)
from searching.stationary import StationaryPoint
from travelwave.errors import (ConfigurationError, DegenerateOrbitError, InsufficientDataError,
                               NonRegularLevelError, UndecidedOrbitWarning)
from travelwave.problem import SpatialProblem

logger = logging.getLogger(__name__)

DEDUP_TOL = 1e-4
# orbits of one pair that are closer than this multiple of DEDUP_TOL make a count uncertified
SEPARATION_FACTOR = 100.0
BASIN_TOL = 1e-5
MIN_TAIL_SAMPLES = 20
ENERGY_DROP_TOL = 1e-4
LEVEL_TOL = 1e-6


class ShootingSettings(object):
    """
    Parameters of the manifold shooting in the plane.
    """

    def __init__(self, offset: float = 1e-6, t_max: float = 1e3, sample_step: float = 5e-3, rtol: float = 1e-9,
                 atol: float = 1e-9, capture_tol: float = 1e-7, escape_radius: float = 1e3) -> None:
        self.offset = offset
        self.t_max = t_max
        self.sample_step = sample_step
        self.rtol = rtol
        self.atol = atol
        self.capture_tol = capture_tol
        self.escape_radius = escape_radius

    def scaled(self, tol_scale: float) -> 'ShootingSettings':
        return ShootingSettings(self.offset, self.t_max, self.sample_step, self.rtol * tol_scale,
                                self.atol * tol_scale, self.capture_tol, self.escape_radius)

    def to_dict(self) -> dict:
        return dict(vars(self))


class HeteroclinicOrbit(object):
    """
    A connecting orbit from the rest point `source_id` (alpha limit) to `target_id` (omega limit).
    """

    def __init__(self, source_id: str, target_id: str, trajectory: Trajectory, relative_index: int,
                 energy_drop: float, source_state: np.ndarray, target_state: np.ndarray,
                 flow: Optional[SpectralFlow] = None, method: str = "shooting") -> None:
        if source_id == target_id:
            raise ValueError("a heteroclinic orbit needs two different end points")
        self.id = None  # type: Optional[str]
        self.source_id = source_id
        self.target_id = target_id
        self.trajectory = trajectory
        self.relative_index = relative_index
        self.energy_drop = energy_drop
        self.source_state = source_state
        self.target_state = target_state
        self.flow = flow
        self.method = method
        self.tail_rates = None  # type: Optional[Tuple[float, float]]
        self.predicted_rates = None  # type: Optional[Tuple[float, float]]

    @property
    def pair(self) -> Tuple[str, str]:
        return self.source_id, self.target_id

    @property
    def spectral_flow(self) -> Optional[int]:
        return None if self.flow is None else self.flow.net

    def to_dict(self) -> dict:
        return {'id': self.id, 'source': self.source_id, 'target': self.target_id,
                'relative_index': self.relative_index, 'energy_drop': self.energy_drop,
                'spectral_flow': None if self.flow is None else self.flow.to_dict(),
                'tail_rates': None if self.tail_rates is None else list(self.tail_rates),
                'predicted_rates': None if self.predicted_rates is None else list(self.predicted_rates),
                'method': self.method, 'samples': len(self.trajectory),
                'integrator': self.trajectory.metadata}

    def __repr__(self) -> str:
        return f"HeteroclinicOrbit({self.source_id} -> {self.target_id}, index {self.relative_index})"


class OrbitSearch(object):
    """
    Result of an orbit search: accepted orbits and everything that was not accepted.
    A search is certified if its orbits can be counted, i.e. nothing was undecided, no pair was missed and all
    orbits of a pair are well separated.
    """

    def __init__(self, orbits: List[HeteroclinicOrbit], undecided: List[dict], misses: List[Tuple[str, str]],
                 rejected: List[dict], certified: bool, method: str) -> None:
        self.orbits = orbits
        self.undecided = undecided
        self.misses = misses
        self.rejected = rejected
        self.certified = certified
        self.method = method

    def __iter__(self):
        return iter(self.orbits)

    def __len__(self) -> int:
        return len(self.orbits)

    def to_dict(self) -> dict:
        return {'method': self.method, 'certified': self.certified,
                'orbits': [orbit.to_dict() for orbit in self.orbits],
                'undecided': self.undecided, 'misses': [list(pair) for pair in self.misses],
                'rejected': self.rejected}


class IsolatingSet(object):
    """
    The isolating set N: the whole phase space (level None) or the energy sublevel set {E <= level}.
    """

    def __init__(self, level: Optional[float] = None) -> None:
        self.level = level

    @property
    def whole_space(self) -> bool:
        return self.level is None

    def check_regular(self, points: Sequence[StationaryPoint]) -> None:
        """
        Raises NonRegularLevelError if the level is within LEVEL_TOL of a stationary energy.
        """
        if self.level is None:
            return
        for point in points:
            if abs(point.energy - self.level) <= LEVEL_TOL:
                raise NonRegularLevelError(f"energy level {self.level} is the energy of stationary point {point.id}")

    def contains(self, point: StationaryPoint) -> bool:
        return self.level is None or point.energy <= self.level

    def contains_orbit(self, orbit: HeteroclinicOrbit, source: StationaryPoint) -> bool:
        # energy decreases along orbits, so the orbit lies in {E <= level} iff its source does
        return self.contains(source)

    def to_dict(self) -> dict:
        return {'kind': 'whole' if self.level is None else 'sublevel', 'level': self.level}

    def __repr__(self) -> str:
        return "N(whole space)" if self.level is None else f"N(E <= {self.level:g})"


class OrbitCount(object):
    """
    Raw and mod 2 numbers of orbits for every ordered pair (X, Y) of generators in N with index difference 1.
    """

    def __init__(self, raw: Dict[Tuple[str, str], int], representatives: Dict[Tuple[str, str], List[str]],
                 isolating: IsolatingSet, certified: bool) -> None:
        self.raw = raw
        self.representatives = representatives
        self.isolating = isolating
        self.certified = certified

    def mod2(self, source_id: str, target_id: str) -> int:
        return self.raw.get((source_id, target_id), 0) % 2

    @property
    def pairs(self) -> List[Tuple[str, str]]:
        return list(self.raw)

    def to_dict(self) -> dict:
        return {'isolating_set': self.isolating.to_dict(), 'certified': self.certified,
                'pairs': [{'source': s, 'target': t, 'raw': raw, 'mod2': raw % 2,
                           'orbits': self.representatives.get((s, t), [])}
                          for (s, t), raw in self.raw.items()]}


def _strictly_decreasing(energies: np.ndarray) -> np.ndarray:
    """
    Indices of samples whose energy is below all previous energies.
    """
    keep = [0]
    for k in range(1, energies.shape[0]):
        if energies[k] < energies[keep[-1]]:
            keep.append(k)
    return np.array(keep)


def orbit_distance(first: Trajectory, second: Trajectory, levels: int = 200) -> float:
    """
    Time shift invariant distance of two orbits: the sup distance of their states at equal energy levels.
    Returns infinity if the energy ranges do not overlap.
    """
    parts = []
    for trajectory in (first, second):
        keep = _strictly_decreasing(trajectory.energies)
        parts.append((trajectory.energies[keep][::-1], trajectory.states[keep][::-1]))
    low = max(parts[0][0][0], parts[1][0][0])
    high = min(parts[0][0][-1], parts[1][0][-1])
    if not high > low:
        return float('inf')
    grid = np.linspace(low, high, levels)
    states = [np.stack([np.interp(grid, energies, column) for column in states.T], axis=1)
              for energies, states in parts]
    return float(np.max(np.linalg.norm(states[0] - states[1], axis=1)))


def tail_rate(orbit: HeteroclinicOrbit, system: FlowSystem, basin: float = BASIN_TOL,
              min_samples: int = MIN_TAIL_SAMPLES) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """
    Fits the exponential decay rates of an orbit towards its end points.
    Distances are measured in the eigen-coordinates of the linearization at each end point, so that a spiral tail
    decays without oscillation.
    Raises InsufficientDataError if a tail has fewer than `min_samples` samples inside the basin.
    :return: the fitted rates (gamma_-, gamma_+) and the predicted rates from the rest point spectra
    """
    trajectory = orbit.trajectory
    times = trajectory.times
    rates = []
    predicted = []
    for state, side in ((orbit.source_state, -1), (orbit.target_state, 1)):
        spectrum = rest_point_spectrum(system, state, system.t_minus if side < 0 else system.t_plus)
        distance = np.linalg.norm(spectrum.eigen_coordinates(trajectory.states - state), axis=1)
        inside = distance <= basin
        # the tail is the contiguous run of samples inside the basin at the respective end
        ordered = inside if side < 0 else inside[::-1]
        run = int(np.argmin(ordered)) if not np.all(ordered) else ordered.shape[0]
        if run < min_samples:
            raise InsufficientDataError(f"only {run} tail samples of {orbit} are within {basin:g} of its end point")
        indices = np.arange(run) if side < 0 else np.arange(inside.shape[0] - run, inside.shape[0])
        slope = np.polyfit(times[indices], np.log(distance[indices]), 1)[0]
        rates.append(float(abs(slope)))
        predicted.append(spectrum.unstable_rate if side < 0 else spectrum.stable_rate)
    return (rates[0], rates[1]), (predicted[0], predicted[1])


def accept_orbit(orbit: HeteroclinicOrbit, system: FlowSystem, atol: float) -> Optional[str]:
    """
    Runs the checks of an orbit candidate. Returns None if it passes, else the reason for the rejection.
    Raises DegenerateOrbitError for a relative index smaller than 1.
    """
    if orbit.relative_index < 1:
        raise DegenerateOrbitError(f"{orbit} is nonconstant with relative index {orbit.relative_index}")
    if not orbit.trajectory.energy_monotone(10 * atol):
        return "energy increases along the orbit"
    sampled_drop = orbit.trajectory.energies[0] - orbit.trajectory.energies[-1]
    if not orbit.energy_drop > 0 or abs(sampled_drop - orbit.energy_drop) > ENERGY_DROP_TOL:
        return f"energy drop {sampled_drop:.6g} does not match {orbit.energy_drop:.6g}"
    orbit.flow = spectral_flow(system, orbit.trajectory)
    if orbit.flow.net != orbit.relative_index:
        return f"spectral flow {orbit.flow.net} differs from the relative index {orbit.relative_index}"
    return None


def add_distinct(orbit: HeteroclinicOrbit, accepted: List[HeteroclinicOrbit], dedup_tol: float = DEDUP_TOL) \
        -> Tuple[bool, bool]:
    """
    Adds `orbit` unless it equals an accepted orbit of the same pair up to time shift.
    :return: whether it was added, and whether it is well separated from all orbits of its pair
    """
    separated = True
    for other in accepted:
        if other.pair != orbit.pair:
            continue
        distance = orbit_distance(orbit.trajectory, other.trajectory)
        if distance < dedup_tol:
            return False, True
        if distance < SEPARATION_FACTOR * dedup_tol:
            separated = False
    accepted.append(orbit)
    return True, separated


def sort_orbits(orbits: List[HeteroclinicOrbit], points: Sequence[StationaryPoint]) -> List[HeteroclinicOrbit]:
    """
    Orders orbits by their end points and assigns the ids o0, o1, ...
    """
    order = {point.id: number for number, point in enumerate(points)}

    def key(orbit: HeteroclinicOrbit):
        middle = orbit.trajectory.states[len(orbit.trajectory) // 2]
        return order[orbit.source_id], order[orbit.target_id], tuple(np.round(middle, 6))

    ordered = sorted(orbits, key=key)
    for number, orbit in enumerate(ordered):
        orbit.id = f"o{number}"
    return ordered


def _planar_system(problem: SpatialProblem) -> FlowSystem:
    if not problem.domain.is_point:
        raise ConfigurationError("manifold shooting needs the point domain")
    return FlowSystem(problem)


def find_heteroclinics_planar(problem: SpatialProblem, rest_points: Sequence[StationaryPoint],
                              settings: Optional[ShootingSettings] = None) -> OrbitSearch:
    """
    Finds all heteroclinic orbits of the planar system by shooting along the invariant manifolds of its saddles.
    Both stable branches of a saddle are integrated backward and both unstable branches forward; a branch that
    reaches another rest point is an orbit candidate, a branch that neither escapes nor converges is reported as
    undecided.
    :param problem: a problem on the point domain
    :param rest_points: hyperbolic stationary points
    :param settings: shooting parameters
    :return: the accepted orbits and the rejected, undecided candidates
    """
    settings = settings or ShootingSettings()
    system = _planar_system(problem)
    points = list(rest_points)
    states = [system.rest_state(point) for point in points]
    spectra = [rest_point_spectrum(system, state) for state in states]

    accepted = []  # type: List[HeteroclinicOrbit]
    undecided = []
    rejected = []
    certified = True

    for number, (point, state, spectrum) in enumerate(zip(points, states, spectra)):
        if spectrum.unstable_dim != 1 or spectrum.stable_dim != 1:
            continue
        others = [k for k in range(len(points)) if k != number]
        for stable, span in ((True, (0.0, -settings.t_max)), (False, (0.0, settings.t_max))):
            basis = spectrum.stable_basis if stable else spectrum.unstable_basis
            direction = basis[:, 0] / np.linalg.norm(basis[:, 0])
            for sign in (1.0, -1.0):
                branch = f"{point.id}:{'stable' if stable else 'unstable'}:{'+' if sign > 0 else '-'}"
                trajectory = integrate(system, state + sign * settings.offset * direction, span,
                                       sample_step=settings.sample_step, rtol=settings.rtol, atol=settings.atol,
                                       targets=[states[k] for k in others], capture_tol=settings.capture_tol,
                                       escape_radius=settings.escape_radius)
                if trajectory.terminal_event == 'escape':
                    logger.debug("branch %s escapes", branch)
                    continue
                if trajectory.terminal_event != 'capture':
                    warnings.warn(f"branch {branch} neither escapes nor converges by t = {span[1]:g}",
                                  UndecidedOrbitWarning)
                    undecided.append({'branch': branch, 't_max': settings.t_max})
                    certified = False
                    continue

                other = others[trajectory.captured]
                if stable:
                    source, target = other, number
                    trajectory = trajectory.reversed()
                else:
                    source, target = number, other
                orbit = HeteroclinicOrbit(points[source].id, points[target].id, trajectory,
                                          points[source].morse_index - points[target].morse_index,
                                          system.energy(states[source]) - system.energy(states[target]),
                                          states[source], states[target])
                try:
                    reason = accept_orbit(orbit, system, settings.atol)
                except DegenerateOrbitError as error:
                    logger.warning("%s", error)
                    rejected.append({'source': orbit.source_id, 'target': orbit.target_id,
                                     'reason': str(error)})
                    continue
                if reason is not None:
                    logger.warning("rejecting %s: %s", orbit, reason)
                    rejected.append({'source': orbit.source_id, 'target': orbit.target_id, 'reason': reason})
                    certified = False
                    continue
                added, separated = add_distinct(orbit, accepted)
                certified = certified and separated
                if added:
                    _fit_tails(orbit, system)

    orbits = sort_orbits(accepted, points)
    logger.info("planar shooting found %d orbits (%d undecided, %d rejected)", len(orbits), len(undecided),
                len(rejected))
    return OrbitSearch(orbits, undecided, [], rejected, certified, "shooting")


def _fit_tails(orbit: HeteroclinicOrbit, system: FlowSystem) -> None:
    try:
        orbit.tail_rates, orbit.predicted_rates = tail_rate(orbit, system)
    except InsufficientDataError as error:
        logger.debug("%s", error)


def sweep_connections_planar(problem: SpatialProblem, rest_points: Sequence[StationaryPoint], samples: int = 64,
                             radius: float = 1e-4, t_max: float = 200.0, sample_step: float = 0.05,
                             tol: float = 1e-8) -> set:
    """
    Brute force connection matrix of a planar system: integrates from `samples` points on a small circle around
    every rest point, backward around saddles and forward around sources, and records which rest points are
    reached.
    :return: the set of (source id, target id) pairs
    """
    system = _planar_system(problem)
    points = list(rest_points)
    states = [system.rest_state(point) for point in points]
    angles = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    circle = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    pairs = set()
    for number, (point, state) in enumerate(zip(points, states)):
        spectrum = rest_point_spectrum(system, state)
        if spectrum.unstable_dim == 2:
            span = (0.0, t_max)
        elif spectrum.unstable_dim == 1:
            span = (0.0, -t_max)
        else:
            continue
        others = [k for k in range(len(points)) if k != number]
        for offset in circle:
            trajectory = integrate(system, state + radius * offset, span, sample_step=sample_step, rtol=tol,
                                   atol=tol, targets=[states[k] for k in others], capture_tol=1e-6)
            if trajectory.terminal_event != 'capture':
                continue
            other = points[others[trajectory.captured]].id
            pairs.add((point.id, other) if span[1] > 0 else (other, point.id))
    return pairs


def index_one_pairs(points: Sequence[StationaryPoint], isolating: Optional[IsolatingSet] = None) \
        -> List[Tuple[str, str]]:
    """
    All ordered pairs (X, Y) of generators in N with m(X) - m(Y) = 1.
    """
    isolating = isolating or IsolatingSet()
    members = [point for point in points if isolating.contains(point)]
    return [(x.id, y.id) for x in members for y in members if x.morse_index - y.morse_index == 1]


def count_mod2(search: OrbitSearch, points: Sequence[StationaryPoint],
               isolating: Optional[IsolatingSet] = None) -> OrbitCount:
    """
    Counts the accepted orbits per index-1 pair of generators inside the isolating set.
    Raises NonRegularLevelError if the level of a sublevel set is the energy of a stationary point.
    :param search: a completed orbit search
    :param points: the stationary points
    :param isolating: N; the whole space if omitted
    :return: raw and mod 2 counts
    """
    isolating = isolating or IsolatingSet()
    isolating.check_regular(points)
    by_id = {point.id: point for point in points}
    raw = {pair: 0 for pair in index_one_pairs(points, isolating)}
    representatives = {pair: [] for pair in raw}
    for orbit in search.orbits:
        if orbit.pair not in raw or not isolating.contains_orbit(orbit, by_id[orbit.source_id]):
            continue
        raw[orbit.pair] += 1
        representatives[orbit.pair].append(orbit.id)
    return OrbitCount(raw, representatives, isolating, search.certified)
