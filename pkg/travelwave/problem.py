import logging
from typing import Optional

import numpy as np
from scipy.special import expit

from nonlinearities.families import Nonlinearity, blend
from travelwave.domain import Domain, DiscreteLaplacian, build_laplacian
from travelwave.errors import ConfigurationError, HomotopyValidationError, InsufficientDataError, NumericError

logger = logging.getLogger(__name__)


class SpatialProblem(object):
    """
    Represents the travelling wave problem u'' - c u' + Delta u + f(x, u) = 0 on a discretized cross-section.
    Instances are not modified after construction.
    """

    def __init__(self, domain: Domain, nonlinearity: Nonlinearity, wave_speed: float,
                 laplacian: Optional[DiscreteLaplacian] = None, name: str = "problem") -> None:
        """
        Creates a new problem. Raises ConfigurationError if c <= 0 or if alpha is not positive on the grid.
        :param domain: the cross-section
        :param nonlinearity: the nonlinearity f
        :param wave_speed: the wave speed c > 0
        :param laplacian: a Laplacian that was already assembled for `domain`
        :param name: label used in reports
        """
        if not wave_speed > 0:
            raise ConfigurationError(f"the wave speed must be positive, got {wave_speed}")
        self.domain = domain
        self.nonlinearity = nonlinearity
        self.wave_speed = float(wave_speed)
        self.name = name
        self.laplacian = laplacian if laplacian is not None else build_laplacian(domain)
        self.nodes = domain.nodes()
        if not np.min(nonlinearity.alpha_at(self.nodes)) > 0:
            raise ConfigurationError("alpha must be positive on the cross-section")

    @property
    def size(self) -> int:
        return self.laplacian.size

    @property
    def weights(self) -> np.ndarray:
        return self.laplacian.weights

    @property
    def volume(self) -> float:
        return self.laplacian.volume

    def replace(self, nonlinearity: Optional[Nonlinearity] = None, wave_speed: Optional[float] = None,
                name: Optional[str] = None) -> 'SpatialProblem':
        """
        Returns a problem on the same grid with a different nonlinearity and/or wave speed.
        """
        return SpatialProblem(self.domain,
                              nonlinearity if nonlinearity is not None else self.nonlinearity,
                              wave_speed if wave_speed is not None else self.wave_speed,
                              laplacian=self.laplacian,
                              name=name if name is not None else self.name)

    def _check(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.shape[0] != self.size:
            raise ValueError(f"state of length {z.shape[0]} does not match the grid size {self.size}")
        return z

    def residual(self, z: np.ndarray) -> np.ndarray:
        """
        Discrete residual Delta z + f(x, z) of the stationary equation.
        """
        z = self._check(z)
        return self.laplacian.matrix @ z + self.nonlinearity.f(self.nodes, z)

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        """
        Jacobian Delta + diag(f_u(x, z)) of the residual; this is also the linearization whose positive eigenvalues
        define the Morse index.
        """
        z = self._check(z)
        return self.laplacian.matrix + np.diag(self.nonlinearity.fu(self.nodes, z))

    def linearization(self, z: np.ndarray) -> np.ndarray:
        return self.jacobian(z)

    def hyperbolicity_threshold(self, newton_tol: float, gap_factor: float = 10.0) -> float:
        """
        Eigenvalues of the linearization closer to 0 than this threshold make a point non-hyperbolic.
        """
        return gap_factor * (self.domain.spacing ** 2 + newton_tol)

    def l2_norm(self, z: np.ndarray) -> float:
        return self.laplacian.norm(z)

    def to_dict(self) -> dict:
        return {'name': self.name, 'domain': self.domain.to_dict(), 'nonlinearity': self.nonlinearity.to_dict(),
                'wave_speed': self.wave_speed}


def energy(problem: SpatialProblem, u: np.ndarray, v: Optional[np.ndarray] = None) -> float:
    """
    Discrete energy E(u, v) = int -1/2 v^2 + 1/2 |grad u|^2 - F(x, u) dx. The gradient term is computed as
    -1/2 <u, Delta u> which is exact for the discrete Laplacian with its boundary condition.
    :param problem: the problem whose nonlinearity and grid are used
    :param u: grid values of u
    :param v: grid values of v; 0 if omitted
    :return: the energy
    """
    u = problem._check(u)
    v = np.zeros_like(u) if v is None else problem._check(v)
    w = problem.weights
    value = np.sum(w * (-0.5 * v ** 2 - problem.nonlinearity.F(problem.nodes, u))) \
        - 0.5 * np.sum(w * u * (problem.laplacian.matrix @ u))
    if not np.isfinite(value):
        raise NumericError("non-finite energy")
    return float(value)


def energy_rate_check(problem: Optional[SpatialProblem], trajectory) -> float:
    """
    Compares the centred difference of the sampled energy with the identity dE/dt = -c ||v||^2.
    :param problem: supplies the wave speed of samples without `wave_speeds`; may be None otherwise
    :param trajectory: a `Trajectory` with `times`, `energies`, `speed_sq` and optionally `wave_speeds`
    :return: the maximal deviation over the interior samples
    """
    times = np.asarray(trajectory.times)
    if times.shape[0] < 3:
        raise InsufficientDataError("the energy rate needs at least 3 samples")
    energies = np.asarray(trajectory.energies)
    rate = (energies[2:] - energies[:-2]) / (times[2:] - times[:-2])
    speeds = getattr(trajectory, 'wave_speeds', None)
    if speeds is None:
        if problem is None:
            raise ValueError("samples without wave speeds need a problem")
        speeds = np.full(times.shape[0], problem.wave_speed)
    dissipation = np.asarray(speeds)[1:-1] * np.asarray(trajectory.speed_sq)[1:-1]
    return float(np.max(np.abs(rate + dissipation)))


def smooth_switch(t, ell: float) -> np.ndarray:
    """
    Smooth monotone step s(t) that is 0 for t <= -ell and 1 for t >= ell. It is built from psi(x) = exp(-1/x) as
    psi(tau) / (psi(tau) + psi(1 - tau)) with tau = (t + ell) / (2 ell).
    """
    tau = (np.asarray(t, dtype=float) + ell) / (2.0 * ell)
    inner = np.clip(tau, 1e-300, 1.0 - 1e-16)
    with np.errstate(over='ignore', divide='ignore'):
        s = expit(1.0 / (1.0 - inner) - 1.0 / inner)
    return np.where(tau <= 0.0, 0.0, np.where(tau >= 1.0, 1.0, s))


def smooth_switch_derivative(t, ell: float) -> np.ndarray:
    tau = (np.asarray(t, dtype=float) + ell) / (2.0 * ell)
    inside = (tau > 0.0) & (tau < 1.0)
    safe = np.where(inside, tau, 0.5)
    s = smooth_switch(t, ell)
    derivative = s * (1.0 - s) * (1.0 / safe ** 2 + 1.0 / (1.0 - safe) ** 2) / (2.0 * ell)
    return np.where(inside, derivative, 0.0)


class HomotopyPath(object):
    """
    A family (f_t, c_t) that equals (f_-, c_-) for t <= -ell and (f_+, c_+) for t >= ell; in between both
    nonlinearity and wave speed are blended with a smooth switch s(t).
    """

    def __init__(self, start: SpatialProblem, end: SpatialProblem, ell: float = 1.0) -> None:
        """
        :param start: the problem (f_-, c_-) at t = -infinity
        :param end: the problem (f_+, c_+) at t = +infinity
        :param ell: half width of the transition
        """
        if not ell > 0:
            raise HomotopyValidationError(f"ell must be positive, got {ell}")
        if start.domain != end.domain:
            raise HomotopyValidationError("both endpoints of a homotopy must live on the same grid")
        self.start = start
        self.end = end
        self.ell = float(ell)

    @classmethod
    def between(cls, start: SpatialProblem, end: SpatialProblem, ell: float = 1.0) -> 'HomotopyPath':
        return cls(start, end, ell)

    @classmethod
    def constant(cls, problem: SpatialProblem, ell: float = 1.0) -> 'HomotopyPath':
        return cls(problem, problem, ell)

    @property
    def is_constant(self) -> bool:
        return self.start is self.end

    def switch(self, t):
        return smooth_switch(t, self.ell)

    def switch_derivative(self, t):
        return smooth_switch_derivative(t, self.ell)

    def nonlinearity_at(self, t: float) -> Nonlinearity:
        if self.is_constant:
            return self.start.nonlinearity
        return blend(self.start.nonlinearity, self.end.nonlinearity, float(self.switch(t)))

    def wave_speed_at(self, t: float) -> float:
        s = float(self.switch(t))
        return (1.0 - s) * self.start.wave_speed + s * self.end.wave_speed

    def problem_at(self, t: float) -> SpatialProblem:
        """
        Returns the frozen problem (f_t, c_t).
        """
        s = float(self.switch(t))
        if s <= 0.0:
            return self.start
        if s >= 1.0:
            return self.end
        return self.start.replace(nonlinearity=self.nonlinearity_at(t), wave_speed=self.wave_speed_at(t),
                                  name=f"{self.start.name}@{t:g}")

    def to_dict(self) -> dict:
        return {'ell': self.ell, 'start': self.start.to_dict(), 'end': self.end.to_dict()}
