import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad_vec

from travelwave.errors import ConfigurationError, NumericError

logger = logging.getLogger(__name__)

ODD_MINUS = "odd-"
ODD_PLUS = "odd+"
EVEN_MINUS = "even-"
EVEN_PLUS = "even+"
CUSTOM = "custom"
FAMILIES = (ODD_MINUS, ODD_PLUS, EVEN_MINUS, EVEN_PLUS)

# absolute tolerance of the quadrature rule for primitives without closed form
PRIMITIVE_TOL = 1e-10

# names that may appear in expressions of problem files
EXPRESSION_NAMESPACE = {
    'pi': np.pi, 'e': np.e,
    'sin': np.sin, 'cos': np.cos, 'tan': np.tan, 'exp': np.exp, 'log': np.log, 'sqrt': np.sqrt,
    'abs': np.abs, 'sign': np.sign, 'tanh': np.tanh, 'sinh': np.sinh, 'cosh': np.cosh,
    'arctan': np.arctan, 'power': np.power, 'minimum': np.minimum, 'maximum': np.maximum
}

Array = Union[float, np.ndarray]


def compile_expression(text: str, variables: Sequence[str], parameters: Optional[Dict[str, float]] = None) \
        -> Callable[..., np.ndarray]:
    """
    Compiles an arithmetic expression over numpy functions into a function of the given variables.
    Raises ConfigurationError if the expression can not be compiled or refers to unknown names.
    :param text: the expression, e.g. "lam*(u - u**3)"
    :param variables: positional argument names of the resulting function
    :param parameters: named constants available to the expression
    :return: vectorized function
    """
    parameters = dict(parameters or {})
    try:
        code = compile(text, "<expression>", "eval")
    except SyntaxError as error:
        raise ConfigurationError(f"invalid expression '{text}': {error.msg}")

    known = set(EXPRESSION_NAMESPACE) | set(parameters) | set(variables)
    unknown = [name for name in code.co_names if name not in known]
    if unknown:
        raise ConfigurationError(f"unknown names {unknown} in expression '{text}'")

    def evaluate(*values):
        namespace = dict(EXPRESSION_NAMESPACE)
        namespace.update(parameters)
        namespace.update(zip(variables, values))
        result = eval(code, {'__builtins__': {}}, namespace)
        shape = np.broadcast(*[np.asarray(v) for v in values]).shape if values else ()
        return np.broadcast_to(np.asarray(result, dtype=float), shape).copy()

    return evaluate


def evaluate_constant(value: Union[float, int, str]) -> float:
    """
    Evaluates a number of a problem file; strings like "pi" or "2*pi" are constant expressions.
    """
    if isinstance(value, bool):
        raise ConfigurationError(f"expected a number, got {value}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return float(compile_expression(value, [])())
    raise ConfigurationError(f"expected a number, got {value!r}")


def _check_finite(*arrays) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NumericError("non-finite input to a nonlinearity")


class Nonlinearity(object):
    """
    Base class of all nonlinearities f(x, u) together with the derivative f_u and the primitive
    F(x, u) = int_0^u f(x, s) ds. All methods broadcast over numpy arrays of x and u.
    """

    family = CUSTOM

    def __init__(self, p: float) -> None:
        """
        :param p: growth exponent used by the hypothesis validators
        """
        if not p >= 1:
            raise ConfigurationError(f"growth exponent must be at least 1, got {p}")
        self.p = float(p)

    def f(self, x: Array, u: Array) -> np.ndarray:
        _check_finite(x, u)
        return self._f(np.asarray(x, dtype=float), np.asarray(u, dtype=float))

    def fu(self, x: Array, u: Array) -> np.ndarray:
        _check_finite(x, u)
        return self._fu(np.asarray(x, dtype=float), np.asarray(u, dtype=float))

    def F(self, x: Array, u: Array) -> np.ndarray:
        _check_finite(x, u)
        return self._F(np.asarray(x, dtype=float), np.asarray(u, dtype=float))

    def alpha_at(self, x: Array) -> np.ndarray:
        """
        Samples of the leading coefficient; only meaningful for the families.
        """
        return np.ones_like(np.asarray(x, dtype=float))

    def scaled(self, factor: float) -> 'Nonlinearity':
        """
        Returns a nonlinearity whose leading coefficient is multiplied by `factor`. For nonlinearities without a
        leading term the whole function is scaled.
        """
        return CombinedNonlinearity([(factor, self)])

    def _f(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError()

    def _fu(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        step = 1e-6 * (1.0 + np.abs(u))
        return (self._f(x, u + step) - self._f(x, u - step)) / (2 * step)

    def _F(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        # F(x, u) = u * int_0^1 f(x, u*tau) dtau
        shape = np.broadcast(x, u).shape
        xb = np.broadcast_to(x, shape)
        ub = np.broadcast_to(u, shape)
        integral, _ = quad_vec(lambda tau: self._f(xb, ub * tau), 0.0, 1.0, epsabs=PRIMITIVE_TOL,
                               epsrel=PRIMITIVE_TOL, norm='max')
        return ub * integral

    def to_dict(self) -> dict:
        return {'family': self.family, 'p': self.p}


class FamilyNonlinearity(Nonlinearity):
    """
    f(x, u) = sigma * alpha(x) * |u|^(p-1) u + h(x, u)   (odd families)
    f(x, u) = sigma * alpha(x) * |u|^p + h(x, u)         (even families)
    with a polynomial (or custom) lower order term h.
    """

    def __init__(self, family: str, p: float, alpha: Union[float, str] = 1.0,
                 h_coeffs: Optional[Sequence[float]] = None, lower_order: Optional[Nonlinearity] = None,
                 alpha_scale: float = 1.0) -> None:
        """
        :param family: one of 'odd-', 'odd+', 'even-' and 'even+'
        :param p: exponent of the leading term, p > 1
        :param alpha: positive constant or an expression in x
        :param h_coeffs: coefficients of the polynomial h in ascending powers of u
        :param lower_order: a nonlinearity used as h instead of the polynomial
        :param alpha_scale: factor applied to alpha
        """
        if family not in FAMILIES:
            raise ConfigurationError(f"unknown nonlinearity family '{family}'")
        if not p > 1:
            raise ConfigurationError(f"the families need p > 1, got {p}")
        super().__init__(p)
        self.family = family
        self.sigma = -1.0 if family.endswith("-") else 1.0
        self.odd = family.startswith("odd")
        self.alpha = alpha
        self.alpha_scale = float(alpha_scale)
        if isinstance(alpha, str):
            self._alpha = compile_expression(alpha, ['x'])
        else:
            self._alpha = lambda x: np.full(np.shape(x), float(alpha))
        self.h_coeffs = [float(c) for c in (h_coeffs or [0.0])]
        self.lower_order = lower_order
        self._h = Polynomial(self.h_coeffs)
        self._dh = self._h.deriv()
        self._H = self._h.integ(lbnd=0.0)

    def alpha_at(self, x: Array) -> np.ndarray:
        return self.alpha_scale * self._alpha(np.asarray(x, dtype=float))

    def scaled(self, factor: float) -> 'FamilyNonlinearity':
        return FamilyNonlinearity(self.family, self.p, self.alpha, self.h_coeffs, self.lower_order,
                                  self.alpha_scale * factor)

    def _lower(self, x, u, which: str) -> np.ndarray:
        if self.lower_order is not None:
            return getattr(self.lower_order, which)(x, u)
        polynomial = {'f': self._h, 'fu': self._dh, 'F': self._H}[which]
        return np.broadcast_to(polynomial(u), np.broadcast(x, u).shape)

    def _f(self, x, u):
        a = self.sigma * self.alpha_at(x)
        if self.odd:
            lead = a * np.abs(u) ** (self.p - 1) * u
        else:
            lead = a * np.abs(u) ** self.p
        return lead + self._lower(x, u, 'f')

    def _fu(self, x, u):
        a = self.sigma * self.alpha_at(x)
        if self.odd:
            lead = a * self.p * np.abs(u) ** (self.p - 1)
        else:
            lead = a * self.p * np.abs(u) ** (self.p - 1) * np.sign(u)
        return lead + self._lower(x, u, 'fu')

    def _F(self, x, u):
        a = self.sigma * self.alpha_at(x)
        if self.odd:
            lead = a * np.abs(u) ** (self.p + 1) / (self.p + 1)
        else:
            lead = a * np.abs(u) ** self.p * u / (self.p + 1)
        return lead + self._lower(x, u, 'F')

    def to_dict(self) -> dict:
        result = {'family': self.family, 'p': self.p, 'alpha': self.alpha, 'alpha_scale': self.alpha_scale,
                  'h_coeffs': self.h_coeffs}
        if self.lower_order is not None:
            result['lower_order'] = self.lower_order.to_dict()
        return result


class PolynomialNonlinearity(Nonlinearity):
    """
    A custom nonlinearity that is a polynomial in u, independent of x. The primitive is exact.
    """

    def __init__(self, coefficients: Sequence[float], p: Optional[float] = None) -> None:
        """
        :param coefficients: coefficients in ascending powers of u
        :param p: growth exponent; defaults to the degree
        """
        self.coefficients = [float(c) for c in coefficients]
        self._poly = Polynomial(self.coefficients).trim()
        super().__init__(p if p is not None else max(1, self._poly.degree()))
        self._dpoly = self._poly.deriv()
        self._primitive = self._poly.integ(lbnd=0.0)

    def _f(self, x, u):
        return np.broadcast_to(self._poly(u), np.broadcast(x, u).shape).copy()

    def _fu(self, x, u):
        return np.broadcast_to(self._dpoly(u), np.broadcast(x, u).shape).copy()

    def _F(self, x, u):
        return np.broadcast_to(self._primitive(u), np.broadcast(x, u).shape).copy()

    def to_dict(self) -> dict:
        return {'family': CUSTOM, 'p': self.p, 'coefficients': self.coefficients}


class ExpressionNonlinearity(Nonlinearity):
    """
    A custom nonlinearity given as an expression in x and u. Without a derivative expression f_u is a central
    difference; the primitive always comes from adaptive quadrature.
    """

    def __init__(self, expression: str, parameters: Optional[Dict[str, float]] = None,
                 derivative: Optional[str] = None, p: float = 3.0) -> None:
        super().__init__(p)
        self.expression = expression
        self.parameters = {k: float(v) for k, v in (parameters or {}).items()}
        self.derivative = derivative
        self._expr = compile_expression(expression, ['x', 'u'], self.parameters)
        self._dexpr = compile_expression(derivative, ['x', 'u'], self.parameters) if derivative else None

    def _f(self, x, u):
        return self._expr(x, u)

    def _fu(self, x, u):
        if self._dexpr is None:
            return super()._fu(x, u)
        return self._dexpr(x, u)

    def to_dict(self) -> dict:
        return {'family': CUSTOM, 'p': self.p, 'expression': self.expression, 'parameters': self.parameters,
                'derivative': self.derivative}


class CombinedNonlinearity(Nonlinearity):
    """
    A linear combination sum_i w_i f_i of nonlinearities; used for homotopies between two endpoints.
    """

    def __init__(self, terms: List[Tuple[float, Nonlinearity]]) -> None:
        if not terms:
            raise ConfigurationError("empty combination of nonlinearities")
        super().__init__(max(term.p for _, term in terms))
        self.terms = [(float(weight), term) for weight, term in terms]
        families = {term.family for _, term in terms}
        self.family = families.pop() if len(families) == 1 else CUSTOM

    def _combine(self, which: str, x, u) -> np.ndarray:
        return sum(weight * getattr(term, which)(x, u) for weight, term in self.terms)

    def _f(self, x, u):
        return self._combine('f', x, u)

    def _fu(self, x, u):
        return self._combine('fu', x, u)

    def _F(self, x, u):
        return self._combine('F', x, u)

    def to_dict(self) -> dict:
        return {'family': self.family, 'p': self.p,
                'terms': [{'weight': weight, 'nonlinearity': term.to_dict()} for weight, term in self.terms]}


def blend(start: Nonlinearity, end: Nonlinearity, weight: float) -> Nonlinearity:
    """
    Returns (1 - weight) * start + weight * end; the endpoints themselves for weight 0 and 1.
    """
    if weight <= 0.0:
        return start
    if weight >= 1.0:
        return end
    return CombinedNonlinearity([(1.0 - weight, start), (weight, end)])


def family(name: str, p: float, alpha: Union[float, str] = 1.0,
           h_coeffs: Optional[Sequence[float]] = None) -> FamilyNonlinearity:
    return FamilyNonlinearity(name, p, alpha, h_coeffs)


def polynomial(coefficients: Sequence[float], p: Optional[float] = None) -> PolynomialNonlinearity:
    return PolynomialNonlinearity(coefficients, p)


def expression(text: str, parameters: Optional[Dict[str, float]] = None, derivative: Optional[str] = None,
               p: float = 3.0) -> ExpressionNonlinearity:
    return ExpressionNonlinearity(text, parameters, derivative, p)
