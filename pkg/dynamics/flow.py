"""
The travelling wave equation as a first order system U' = -A(U) with U = (u, v), v = u'.
States are stored in Galerkin coordinates y = (a, b) with u = Phi a and v = Phi b, where the columns of Phi are
L2-orthonormal eigenfunctions of the discrete Laplacian. The point domain is the planar system with one mode; the
full-grid system uses all modes.
"""
import logging
import warnings
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from searching.stationary import StationaryPoint
from travelwave.errors import (AssemblyError, NumericError, StiffnessError, TangentialCrossingWarning)
from travelwave.problem import HomotopyPath, SpatialProblem

logger = logging.getLogger(__name__)

# number of consecutive samples inside the zero band after which a crossing counts as tangential
LINGER_SAMPLES = 5
SPECTRUM_TOL = 1e-8


class FlowSystem(object):
    """
    Galerkin truncation of the travelling wave equation, optionally nonautonomous along a `HomotopyPath`.
    """

    def __init__(self, problem: SpatialProblem, modes: Optional[int] = None, path: Optional[HomotopyPath] = None,
                 newton_tol: float = 1e-9) -> None:
        """
        :param problem: the problem; the start of `path` if a path is given
        :param modes: number of Laplacian modes; all modes if None
        :param path: makes f and c depend on t
        :param newton_tol: tolerance that enters the zero band of the linearization
        """
        if path is not None:
            problem = path.start
        self.problem = problem
        self.path = path
        self.mu, self.basis = problem.laplacian.modes(modes)
        self.N = self.mu.shape[0]
        self.nodes = problem.nodes
        self.weights = problem.weights
        self._projector = (self.basis * self.weights[:, None]).T
        self.zero_band = problem.hyperbolicity_threshold(newton_tol)

    @property
    def dimension(self) -> int:
        return 2 * self.N

    @property
    def autonomous(self) -> bool:
        return self.path is None or self.path.is_constant

    @property
    def t_minus(self) -> float:
        """
        A time at which the system equals its t -> -infinity limit.
        """
        return 0.0 if self.path is None else -2.0 * self.path.ell

    @property
    def t_plus(self) -> float:
        return 0.0 if self.path is None else 2.0 * self.path.ell

    def nonlinearity_at(self, t: float):
        return self.problem.nonlinearity if self.path is None else self.path.nonlinearity_at(t)

    def wave_speed_at(self, t: float) -> float:
        return self.problem.wave_speed if self.path is None else self.path.wave_speed_at(t)

    def split(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return y[:self.N], y[self.N:2 * self.N]

    def to_grid(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        a, b = self.split(y)
        return self.basis @ a, self.basis @ b

    def from_grid(self, u: np.ndarray, v: Optional[np.ndarray] = None) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.zeros_like(u) if v is None else np.atleast_1d(np.asarray(v, dtype=float))
        return np.concatenate([self._projector @ u, self._projector @ v])

    def _columns(self, t, a: np.ndarray, which: str) -> np.ndarray:
        """
        Evaluates f, f_u or F at u = Phi a; columns of a 2-d `a` may belong to different times.
        """
        u = self.basis @ a
        nodes = self.nodes if a.ndim == 1 else self.nodes[:, None]
        if self.autonomous:
            return getattr(self.problem.nonlinearity, which)(nodes, u)
        # f_t = (1 - s(t)) f_- + s(t) f_+, evaluated for all columns at once
        s = self.path.switch(t)
        start = getattr(self.path.start.nonlinearity, which)(nodes, u)
        end = getattr(self.path.end.nonlinearity, which)(nodes, u)
        return (1.0 - s) * start + s * end

    def _speeds(self, t, count: int) -> np.ndarray:
        if self.autonomous:
            return np.full(count, self.problem.wave_speed)
        s = self.path.switch(t)
        return np.broadcast_to((1.0 - s) * self.path.start.wave_speed + s * self.path.end.wave_speed,
                               (count,)).astype(float)

    def force(self, t, a: np.ndarray) -> np.ndarray:
        """
        Galerkin projection Phi^T W f(x, Phi a).
        """
        return self._projector @ self._columns(t, a, 'f')

    def rhs(self, t, y: np.ndarray) -> np.ndarray:
        """
        The vector field dU/dt = (v, -Delta u - f(x, u) + c v) in Galerkin coordinates. Accepts a single state or
        states as columns (with one time per column).
        """
        a, b = self.split(y)
        mu = self.mu if y.ndim == 1 else self.mu[:, None]
        c = self._speeds(t, 1 if y.ndim == 1 else y.shape[1])
        c = c[0] if y.ndim == 1 else c[None, :]
        return np.concatenate([b, c * b - mu * a - self.force(t, a)])

    def galerkin_derivative(self, t, a: np.ndarray) -> np.ndarray:
        """
        Phi^T W diag(f_u) Phi for a single state or a stack of N x N matrices (last axis) for columns.
        """
        fu = self._columns(t, a, 'fu')
        if a.ndim == 1:
            return self._projector @ (fu[:, None] * self.basis)
        return np.einsum('ki,ij,il->klj', self._projector, fu, self.basis)

    def linear_operator(self, t, a: np.ndarray) -> np.ndarray:
        """
        Galerkin matrix of Delta + f_u(x, u); symmetric.
        """
        return np.diag(self.mu) + self.galerkin_derivative(t, a)

    def jacobian(self, t, y: np.ndarray) -> np.ndarray:
        """
        Jacobian of `rhs`, i.e. -dA(U) = [[0, I], [-(Delta + f_u), c I]].
        """
        a, _ = self.split(y)
        n = self.N
        jac = np.zeros((2 * n, 2 * n))
        jac[:n, n:] = np.eye(n)
        jac[n:, :n] = -self.linear_operator(t, a)
        jac[n:, n:] = self.wave_speed_at(t) * np.eye(n)
        return jac

    def jacobian_columns(self, t, Y: np.ndarray) -> np.ndarray:
        """
        Jacobians of `rhs` for states as columns, shape (2N, 2N, m).
        """
        n = self.N
        m = Y.shape[1]
        jac = np.zeros((2 * n, 2 * n, m))
        jac[:n, n:, :] = np.eye(n)[:, :, None]
        a, _ = self.split(Y)
        jac[n:, :n, :] = -(np.diag(self.mu)[:, :, None] + self.galerkin_derivative(t, a))
        jac[n:, n:, :] = np.eye(n)[:, :, None] * self._speeds(t, m)[None, None, :]
        return jac

    def energy(self, y: np.ndarray, t=0.0):
        """
        Energy -1/2 |b|^2 - 1/2 sum mu a^2 - int F(x, Phi a); an array for states as columns.
        """
        a, b = self.split(y)
        mu = self.mu if y.ndim == 1 else self.mu[:, None]
        w = self.weights if y.ndim == 1 else self.weights[:, None]
        F = self._columns(t, a, 'F')
        value = -0.5 * np.sum(b ** 2, axis=0) - 0.5 * np.sum(mu * a ** 2, axis=0) - np.sum(w * F, axis=0)
        return float(value) if y.ndim == 1 else value

    def energy_gradient(self, y: np.ndarray, t=0.0) -> np.ndarray:
        a, b = self.split(y)
        mu = self.mu if y.ndim == 1 else self.mu[:, None]
        return np.concatenate([-mu * a - self.force(t, a), -b])

    def speed_sq(self, y: np.ndarray):
        """
        ||v||^2 in L2.
        """
        _, b = self.split(y)
        return np.sum(b ** 2, axis=0)

    def rest_state(self, point: StationaryPoint, t: Optional[float] = None, tol: float = 1e-12,
                   max_iters: int = 50) -> np.ndarray:
        """
        Projects a stationary point to Galerkin coordinates and polishes it into a rest point of the truncated
        system.
        :param point: the stationary point of the full grid problem
        :param t: time at which the (frozen) system is taken
        :return: the rest state (a, 0)
        """
        t = 0.0 if t is None else t
        a = self._projector @ point.z
        for _ in range(max_iters):
            residual = self.mu * a + self.force(t, a)
            if np.max(np.abs(residual)) <= tol * (1.0 + np.max(np.abs(a))):
                break
            try:
                a = a - scipy.linalg.solve(self.linear_operator(t, a), residual, assume_a='sym')
            except np.linalg.LinAlgError:
                raise NumericError(f"rest point {point.id} is singular in the truncated system")
        return np.concatenate([a, np.zeros(self.N)])


def vector_field(system: FlowSystem, state: np.ndarray, t: float = 0.0) -> np.ndarray:
    """
    Returns dU/dt = -A(U) at `state`.
    """
    state = np.asarray(state, dtype=float)
    if not np.all(np.isfinite(state)):
        raise NumericError("non-finite state")
    return system.rhs(t, state)


class RestSpectrum(object):
    """
    Spectrum of -dA(Z) at a rest point, from the dense matrix and from the per-mode closed form
    lambda = (c +- sqrt(c^2 - 4 s)) / 2 over the eigenvalues s of the Galerkin linearization.
    """

    def __init__(self, eigenvalues: np.ndarray, closed_form: np.ndarray, linear_eigenvalues: np.ndarray,
                 zero_band: float, unstable_schur: Tuple[np.ndarray, int], stable_schur: Tuple[np.ndarray, int],
                 eigenvectors: np.ndarray) -> None:
        self.eigenvalues = eigenvalues
        self.closed_form = closed_form
        self.linear_eigenvalues = linear_eigenvalues
        self.eigenvectors = eigenvectors
        self.hyperbolic = bool(np.min(np.abs(linear_eigenvalues)) > zero_band)
        self.morse_index = int(np.sum(linear_eigenvalues > zero_band))
        self.unstable_dim = int(np.sum(eigenvalues.real > 0))
        self.stable_dim = int(np.sum(eigenvalues.real < 0))
        positive = eigenvalues.real[eigenvalues.real > 0]
        negative = eigenvalues.real[eigenvalues.real < 0]
        #: slowest decay rate towards the rest point in backward resp. forward time
        self.unstable_rate = float(np.min(positive)) if positive.size else None
        self.stable_rate = float(np.min(-negative)) if negative.size else None
        schur_u, dim_u = unstable_schur
        schur_s, dim_s = stable_schur
        self.unstable_basis = schur_u[:, :dim_u]
        #: rows annihilate the unstable subspace
        self.unstable_complement = schur_u[:, dim_u:].T
        self.stable_basis = schur_s[:, :dim_s]
        self.stable_complement = schur_s[:, dim_s:].T

    @property
    def index_identity_holds(self) -> bool:
        """
        The unstable dimension equals N + m for c > 0.
        """
        return self.unstable_dim == self.linear_eigenvalues.shape[0] + self.morse_index

    def eigen_coordinates(self, displacement: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.eigenvectors, displacement.T).T

    def to_dict(self) -> dict:
        return {'eigenvalues': [[z.real, z.imag] for z in self.eigenvalues],
                'unstable_dim': self.unstable_dim, 'hyperbolic': self.hyperbolic, 'morse_index': self.morse_index,
                'unstable_rate': self.unstable_rate, 'stable_rate': self.stable_rate}


def _sort_complex(values: np.ndarray) -> np.ndarray:
    return values[np.lexsort((values.imag, values.real))]


def rest_point_spectrum(system: FlowSystem, state: np.ndarray, t: float = 0.0,
                        tol: float = SPECTRUM_TOL) -> RestSpectrum:
    """
    Computes the spectrum of -dA(Z) twice, from the dense Jacobian and from the per-mode formula.
    Raises AssemblyError if the two disagree by more than `tol` (relative).
    :param system: the flow system
    :param state: a rest state in Galerkin coordinates
    :param t: time at which the (frozen) system is taken
    :return: both spectra, the unstable dimension, rates and Schur bases of the invariant subspaces
    """
    jac = system.jacobian(t, state)
    dense, vectors = scipy.linalg.eig(jac)
    a, _ = system.split(state)
    linear = np.sort(scipy.linalg.eigvalsh(system.linear_operator(t, a)))[::-1]
    c = system.wave_speed_at(t)
    root = np.sqrt(c ** 2 - 4 * linear + 0j)
    closed = np.concatenate([(c + root) / 2, (c - root) / 2])

    unmatched = list(dense)
    mismatch = 0.0
    for value in closed:
        distances = np.abs(np.array(unmatched) - value)
        nearest = int(np.argmin(distances))
        mismatch = max(mismatch, distances[nearest] / (1.0 + abs(value)))
        unmatched.pop(nearest)
    if mismatch > tol:
        raise AssemblyError(f"dense and per-mode rest point spectra differ by {mismatch:.3g}")

    schur_u, _, dim_u = scipy.linalg.schur(jac, output='real', sort='rhp')
    schur_s, _, dim_s = scipy.linalg.schur(jac, output='real', sort='lhp')
    return RestSpectrum(_sort_complex(dense), _sort_complex(closed), linear, system.zero_band, (schur_u, dim_u),
                        (schur_s, dim_s), vectors)


class Trajectory(object):
    """
    Samples of a solution of the flow together with its energies and integrator metadata.
    """

    def __init__(self, times: np.ndarray, states: np.ndarray, energies: np.ndarray, speed_sq: np.ndarray,
                 wave_speeds: np.ndarray, dense: Optional[Callable[[float], np.ndarray]] = None,
                 terminal_event: Optional[str] = None, captured: Optional[int] = None,
                 metadata: Optional[dict] = None) -> None:
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float)
        self.energies = np.asarray(energies, dtype=float)
        self.speed_sq = np.asarray(speed_sq, dtype=float)
        self.wave_speeds = np.asarray(wave_speeds, dtype=float)
        self.dense = dense
        self.terminal_event = terminal_event
        self.captured = captured
        self.metadata = dict(metadata or {})

    def __len__(self) -> int:
        return self.times.shape[0]

    def reversed(self) -> 'Trajectory':
        """
        The same samples in increasing time order; used for backward integrations.
        """
        return Trajectory(self.times[::-1], self.states[::-1], self.energies[::-1], self.speed_sq[::-1],
                          self.wave_speeds[::-1], self.dense, self.terminal_event, self.captured, self.metadata)

    def shifted(self, offset: float) -> 'Trajectory':
        dense = None if self.dense is None else (lambda t, d=self.dense: d(t - offset))
        return Trajectory(self.times + offset, self.states, self.energies, self.speed_sq, self.wave_speeds, dense,
                          self.terminal_event, self.captured, self.metadata)

    def energy_monotone(self, band: float = 1e-9) -> bool:
        """
        Whether the sampled energy never increases by more than `band`.
        """
        return bool(np.all(np.diff(self.energies) <= band))

    def state_at(self, t: float) -> np.ndarray:
        if self.dense is not None:
            return self.dense(t)
        return np.array([np.interp(t, self.times, column) for column in self.states.T])


def _capture_event(target: np.ndarray, tol: float):
    def event(t, y):
        return np.linalg.norm(y - target) - tol
    event.terminal = True
    event.direction = -1
    return event


def _escape_event(radius: float):
    def event(t, y):
        return radius - np.linalg.norm(y)
    event.terminal = True
    event.direction = -1
    return event


def sample_times(t_span: Tuple[float, float], step: float) -> np.ndarray:
    t0, t1 = t_span
    count = int(np.floor(abs(t1 - t0) / step + 1e-9))
    times = t0 + np.sign(t1 - t0) * step * np.arange(count + 1)
    if abs(times[-1] - t1) > 1e-12:
        times = np.append(times, t1)
    return times


def build_trajectory(system: FlowSystem, times: np.ndarray, states: np.ndarray, **kwargs) -> Trajectory:
    """
    Evaluates energies, speeds and wave speeds for sampled states (rows).
    """
    if system.autonomous:
        energies = system.energy(states.T, 0.0)
        speeds = np.full(times.shape[0], system.wave_speed_at(0.0))
    else:
        energies = np.array([system.energy(state, t) for t, state in zip(times, states)])
        speeds = np.array([system.wave_speed_at(t) for t in times])
    return Trajectory(times, states, np.atleast_1d(energies), system.speed_sq(states.T), speeds, **kwargs)


def integrate(system: FlowSystem, initial_state: np.ndarray, t_span: Tuple[float, float],
              sample_step: float = 5e-3, rtol: float = 1e-9, atol: float = 1e-9,
              targets: Sequence[np.ndarray] = (), capture_tol: float = 1e-7,
              escape_radius: float = 1e3) -> Trajectory:
    """
    Integrates the flow with the implicit Radau scheme and its exact Jacobian.
    Leaving the ball of radius `escape_radius` or reaching one of the `targets` ends the integration; this is
    reported as the terminal event of the trajectory.
    Raises StiffnessError if the step size underflows.
    :param system: the flow system
    :param initial_state: initial state in Galerkin coordinates
    :param t_span: start and end time; the end may lie before the start
    :param sample_step: spacing of the returned samples
    :param rtol: relative tolerance
    :param atol: absolute tolerance
    :param targets: rest states that end the integration when reached
    :param capture_tol: distance at which a target counts as reached
    :param escape_radius: radius of the escape event
    :return: the sampled trajectory
    """
    y0 = np.asarray(initial_state, dtype=float)
    if not np.all(np.isfinite(y0)):
        raise NumericError("non-finite initial state")
    events = [_escape_event(escape_radius)] + [_capture_event(target, capture_tol) for target in targets]

    solution = solve_ivp(system.rhs, t_span, y0, method='Radau', jac=system.jacobian, rtol=rtol, atol=atol,
                         t_eval=sample_times(t_span, sample_step), dense_output=True, events=events)
    if solution.status < 0:
        if "step size" in solution.message:
            raise StiffnessError(solution.message)
        raise NumericError(solution.message)

    times, states = solution.t, solution.y.T
    terminal_event, captured = None, None
    if solution.status == 1:
        for number, event_times in enumerate(solution.t_events):
            if len(event_times):
                times = np.append(times, event_times[0])
                states = np.vstack([states, solution.y_events[number][0]])
                terminal_event = 'escape' if number == 0 else 'capture'
                captured = None if number == 0 else number - 1
                break

    metadata = {'scheme': 'Radau', 'rtol': rtol, 'atol': atol, 'nfev': int(solution.nfev),
                'njev': int(solution.njev), 'sample_step': sample_step}
    return build_trajectory(system, times, states, dense=solution.sol, terminal_event=terminal_event,
                            captured=captured, metadata=metadata)


class SpectralFlow(object):
    """
    Zero crossings of the eigenvalue curves of Delta + f_u(x, u(t)) along a trajectory. An eigenvalue that moves
    from positive to negative counts +1; `opposite` is the count with the reverse convention.
    """

    CONVENTION = "down-crossing counts +1"

    def __init__(self, crossings: List[Tuple[float, int, int]], lingering: bool, times: np.ndarray,
                 traces: np.ndarray) -> None:
        #: (time, eigenvalue number, direction)
        self.crossings = crossings
        self.lingering = lingering
        self.times = times
        self.traces = traces

    @property
    def net(self) -> int:
        return int(sum(direction for _, _, direction in self.crossings))

    @property
    def opposite(self) -> int:
        return -self.net

    @property
    def unsigned(self) -> int:
        return len(self.crossings)

    def to_dict(self) -> dict:
        return {'net': self.net, 'opposite': self.opposite, 'unsigned': self.unsigned,
                'convention': self.CONVENTION, 'lingering': self.lingering,
                'crossings': [{'t': t, 'eigenvalue': k, 'direction': d} for t, k, d in self.crossings]}


def _bisect_crossing(system: FlowSystem, trajectory: Trajectory, k: int, t_left: float, t_right: float,
                     iterations: int = 40) -> float:
    def value(t):
        a, _ = system.split(trajectory.state_at(t))
        return np.sort(scipy.linalg.eigvalsh(system.linear_operator(t, a)))[::-1][k]

    left_sign = np.sign(value(t_left))
    for _ in range(iterations):
        middle = 0.5 * (t_left + t_right)
        if np.sign(value(middle)) == left_sign:
            t_left = middle
        else:
            t_right = middle
        if abs(t_right - t_left) < 1e-10:
            break
    return 0.5 * (t_left + t_right)


def spectral_flow(system: FlowSystem, trajectory: Trajectory, zero_band: Optional[float] = None) -> SpectralFlow:
    """
    Net signed count of zero crossings of the (descending) eigenvalue curves of the linearization along
    `trajectory`. Crossing times are refined by bisection. An eigenvalue that stays within the zero band for more
    than a few consecutive samples triggers a TangentialCrossingWarning.
    """
    zero_band = system.zero_band if zero_band is None else zero_band
    times = trajectory.times
    traces = np.array([np.sort(scipy.linalg.eigvalsh(system.linear_operator(t, system.split(state)[0])))[::-1]
                       for t, state in zip(times, trajectory.states)])

    crossings = []
    lingering = False
    for k in range(traces.shape[1]):
        curve = traces[:, k]
        # a sample that is exactly 0 belongs to the nonpositive side
        down = (curve[:-1] > 0) & (curve[1:] <= 0)
        up = (curve[:-1] <= 0) & (curve[1:] > 0)
        for i in np.nonzero(down | up)[0]:
            t_cross = _bisect_crossing(system, trajectory, k, times[i], times[i + 1])
            crossings.append((float(t_cross), k, 1 if down[i] else -1))

        inside = np.abs(curve) <= zero_band
        run = 0
        for flag in inside:
            run = run + 1 if flag else 0
            if run > LINGER_SAMPLES:
                lingering = True
                break
    if lingering:
        warnings.warn("an eigenvalue lingers in the zero band; the crossing may be tangential",
                      TangentialCrossingWarning)
    crossings.sort()
    return SpectralFlow(crossings, lingering, times, traces)
