"""
Grid based validators for the growth hypotheses on f and the hypotheses on homotopies of (f, c).
A passing report is a necessary check on the sampled grid, not a proof; every report records the grid it used.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from nonlinearities.families import FAMILIES, Nonlinearity
from travelwave.errors import ConfigurationError, HomotopyValidationError
from travelwave.problem import HomotopyPath

logger = logging.getLogger(__name__)

F2 = "f2"
F2_PRIME = "f2'"

THETA_GRID = np.round(np.arange(-0.9, 0.95, 0.1), 10)
# an excess function counts as bounded if its maximum on the outer half of the range exceeds the maximum on the
# inner half by at most this relative slack
BOUNDED_SLACK = 0.1
# liminf |f/u| is estimated for |u| >= TAIL_START
TAIL_START = 2.0
SUPERLINEAR_MIN = 1e-2


class HypothesisReport(object):
    """
    Verdicts of (f1), (f2)/(f2') and (f3) for one nonlinearity on a sampled (x, u) grid.
    """

    def __init__(self, u_range: Tuple[float, float], sample_count: int, p: float) -> None:
        self.u_range = u_range
        self.sample_count = sample_count
        self.p = p
        self.f1_constant = float('inf')
        self.f1_passed = False
        self.f2_variant = None  # type: Optional[str]
        self.f2_theta = None  # type: Optional[float]
        self.f2_constant = None  # type: Optional[float]
        self.f2_passed = False
        self.f3_liminf = 0.0
        self.f3_passed = False
        self.f3_required = False

    @property
    def passed(self) -> bool:
        return self.f1_passed and self.f2_passed and (self.f3_passed or not self.f3_required)

    def to_dict(self) -> dict:
        return {
            'u_range': list(self.u_range), 'sample_count': self.sample_count, 'p': self.p,
            'f1': {'constant': self.f1_constant, 'passed': self.f1_passed},
            'f2': {'variant': self.f2_variant, 'theta': self.f2_theta, 'constant': self.f2_constant,
                   'passed': self.f2_passed},
            'f3': {'liminf': self.f3_liminf, 'passed': self.f3_passed, 'required': self.f3_required},
            'passed': self.passed
        }


def _bounded(excess: np.ndarray, u: np.ndarray, radius: float) -> bool:
    """
    Decides whether `excess` (sampled on rows of u values) stays bounded as |u| grows.
    """
    outer = np.max(excess[..., np.abs(u) > radius / 2])
    inner = np.max(excess[..., np.abs(u) <= radius / 2])
    return bool(outer <= inner + BOUNDED_SLACK * max(abs(inner), 1.0))


def _family_theta(nonlinearity: Nonlinearity) -> Optional[float]:
    """
    The first value of the 0.1 grid strictly beyond -2/(p+1) (sigma = -) resp. 2/(p+1) (sigma = +).
    """
    bound = 2.0 / (nonlinearity.p + 1.0)
    beyond = THETA_GRID[THETA_GRID > bound + 1e-12]
    if beyond.size == 0:
        return None
    return float(-beyond[0]) if nonlinearity.family.endswith("-") else float(beyond[0])


def validate_hypotheses(nonlinearity: Nonlinearity, u_range: Tuple[float, float] = (-10.0, 10.0),
                        sample_count: int = 2001, x_nodes: Optional[Sequence[float]] = None,
                        require_f3: bool = False) -> HypothesisReport:
    """
    Checks the hypotheses (f1), (f2) or (f2') and (f3) on a grid.
    Raises ConfigurationError for an empty grid.
    :param nonlinearity: the nonlinearity to check
    :param u_range: symmetric range of u values
    :param sample_count: number of u samples
    :param x_nodes: x values to sample; the point x = 0 if omitted
    :param require_f3: whether (f3) is needed, i.e. for Neumann or periodic boundary data
    :return: the report
    """
    lower, upper = float(u_range[0]), float(u_range[1])
    if sample_count < 3 or not upper > lower:
        raise ConfigurationError(f"empty validation grid {u_range} with {sample_count} samples")
    if not np.isclose(lower, -upper):
        raise ConfigurationError(f"the validation range must be symmetric around 0, got {u_range}")

    x = np.zeros(1) if x_nodes is None or len(x_nodes) == 0 else np.asarray(x_nodes, dtype=float)
    u = np.linspace(lower, upper, sample_count)
    X, U = np.meshgrid(x, u, indexing='ij')
    f = nonlinearity.f(X, U)
    F = nonlinearity.F(X, U)
    radius = upper
    p = nonlinearity.p

    report = HypothesisReport((lower, upper), sample_count, p)
    report.f3_required = require_f3

    # (f1): sup |f| <= C_f (1 + |u|^p)
    ratio = np.abs(f) / (1.0 + np.abs(U) ** p)
    report.f1_constant = float(np.max(ratio))
    report.f1_passed = _bounded(ratio, u, radius)

    # (f2) / (f2'): |F| <= C_f' + theta/2 f u   resp.   theta/2 f |u|
    def excess(theta: float, variant: str) -> np.ndarray:
        factor = U if variant == F2 else np.abs(U)
        return np.abs(F) - 0.5 * theta * f * factor

    if nonlinearity.family in FAMILIES:
        variant = F2 if nonlinearity.family.startswith("odd") else F2_PRIME
        theta = _family_theta(nonlinearity)
        candidates = [] if theta is None else [(variant, theta)]
    else:
        candidates = [(variant, float(theta)) for variant in (F2, F2_PRIME) for theta in THETA_GRID]

    best = None
    for variant, theta in candidates:
        values = excess(theta, variant)
        if not _bounded(values, u, radius):
            continue
        constant = float(max(np.max(values), 0.0))
        key = (constant, abs(theta))
        if best is None or key < best[0]:
            best = (key, variant, theta)
        if nonlinearity.family in FAMILIES:
            break
    if best is not None:
        (constant, _), report.f2_variant, report.f2_theta = best
        report.f2_constant = constant
        report.f2_passed = -1.0 < report.f2_theta < 1.0
    elif candidates:
        report.f2_variant, report.f2_theta = candidates[0]

    # (f3): liminf |f/u| > 0, estimated on the tail of the grid
    tail = np.abs(U) >= min(TAIL_START, radius / 2)
    report.f3_liminf = float(np.min(np.abs(f[tail] / U[tail])))
    report.f3_passed = report.f3_liminf > SUPERLINEAR_MIN

    logger.info("hypotheses: f1=%s (C_f=%.4g), %s=%s (theta=%s, C_f'=%s), f3=%s",
                report.f1_passed, report.f1_constant, report.f2_variant, report.f2_passed, report.f2_theta,
                report.f2_constant, report.f3_passed)
    return report


class HomotopyReport(object):
    """
    Validation data of a homotopy: constancy outside [-ell, ell], the constants Theta and C_f'' of (n3) and the size
    of the smallest epsilon for which the path is an epsilon-perturbation of its start.
    """

    def __init__(self) -> None:
        self.constant_outside = False
        self.min_wave_speed = 0.0
        self.theta = 0.0
        self.c_double_prime = 0.0
        self.alpha_deviation = 0.0
        self.alpha_rate = 0.0
        self.lower_order_ratio = 0.0
        self.epsilon_bound = 0.0

    def is_perturbation(self, epsilon: float) -> bool:
        return self.epsilon_bound < epsilon

    def to_dict(self) -> dict:
        return {
            'constant_outside': self.constant_outside, 'min_wave_speed': self.min_wave_speed,
            'Theta': self.theta, 'C_f_double_prime': self.c_double_prime,
            'epsilon': {'sup_alpha_deviation': self.alpha_deviation, 'sup_alpha_rate': self.alpha_rate,
                        'sup_lower_order_ratio': self.lower_order_ratio, 'bound': self.epsilon_bound}
        }


def validate_homotopy(path: HomotopyPath, sample_count: int = 401, u_range: Tuple[float, float] = (-10.0, 10.0),
                      u_samples: int = 401) -> HomotopyReport:
    """
    Checks (n2) and (n3) for `path` on a (t, x, u) grid and computes its epsilon-perturbation data relative to
    f_* = f_-.
    Raises HomotopyValidationError if the path is not constant outside [-ell, ell] or inf c <= 0.
    :param path: the homotopy
    :param sample_count: number of t samples in [-1.5 ell, 1.5 ell]
    :param u_range: range of u values
    :param u_samples: number of u samples
    :return: the report
    """
    if sample_count < 3 or u_samples < 3:
        raise ConfigurationError("empty homotopy validation grid")
    ell = path.ell
    times = np.linspace(-1.5 * ell, 1.5 * ell, sample_count)
    u = np.linspace(u_range[0], u_range[1], u_samples)
    X, U = np.meshgrid(path.start.nodes, u, indexing='ij')
    report = HomotopyReport()

    # (n2)
    start, end = path.start.nonlinearity, path.end.nonlinearity
    f_minus, f_plus = start.f(X, U), end.f(X, U)
    for t in times[np.abs(times) >= ell]:
        endpoint = f_minus if t < 0 else f_plus
        speed = path.start.wave_speed if t < 0 else path.end.wave_speed
        if not (np.array_equal(path.nonlinearity_at(t).f(X, U), endpoint) and path.wave_speed_at(t) == speed):
            raise HomotopyValidationError(f"the homotopy is not constant at t = {t:g} outside [-ell, ell]")
    report.constant_outside = True
    speeds = np.array([path.wave_speed_at(t) for t in times])
    report.min_wave_speed = float(np.min(speeds))
    if not report.min_wave_speed > 0:
        raise HomotopyValidationError(f"inf c(t) = {report.min_wave_speed} is not positive")

    # (n3): |d_t F| <= C_f'' + Theta |F|, with d_t F = s'(t) (F_+ - F_-)
    F_minus, F_plus = start.F(X, U), end.F(X, U)
    F_jump = F_plus - F_minus

    def time_derivative(t: float) -> Tuple[np.ndarray, np.ndarray]:
        s, ds = float(path.switch(t)), float(path.switch_derivative(t))
        return np.abs(ds * F_jump), np.abs(F_minus + s * F_jump)

    for t in times:
        dF, F_abs = time_derivative(t)
        report.theta = max(report.theta, float(np.max(dF / (1.0 + F_abs))))
    for t in times:
        dF, F_abs = time_derivative(t)
        report.c_double_prime = max(report.c_double_prime, float(np.max(dF - report.theta * F_abs)))

    # epsilon-perturbation: alpha_t = 1 + s (kappa - 1), h_t = s (f_+ - kappa f_-)
    norm = np.sum(f_minus ** 2, axis=1)
    kappa = np.where(norm > 0, np.sum(f_plus * f_minus, axis=1) / np.where(norm > 0, norm, 1.0), 1.0)
    max_switch = float(np.max(path.switch(times)))
    max_rate = float(np.max(path.switch_derivative(times)))
    report.alpha_deviation = float(np.max(np.abs(kappa - 1.0))) * max_switch
    report.alpha_rate = float(np.max(np.abs(kappa - 1.0))) * max_rate
    lower_order = np.abs(f_plus - kappa[:, None] * f_minus) / (1.0 + np.abs(f_minus))
    report.lower_order_ratio = float(np.max(lower_order)) * max_switch
    report.epsilon_bound = max(report.alpha_deviation, report.alpha_rate, report.lower_order_ratio)

    logger.info("homotopy: Theta=%.4g, C_f''=%.4g, epsilon bound=%.4g", report.theta, report.c_double_prime,
                report.epsilon_bound)
    return report
