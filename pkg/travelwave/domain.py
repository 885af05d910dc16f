from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from travelwave.errors import ConfigurationError

POINT = "point"
INTERVAL = "interval"
CIRCLE = "circle"
KINDS = (POINT, INTERVAL, CIRCLE)

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
PERIODIC = "periodic"
BOUNDARIES = (DIRICHLET, NEUMANN, PERIODIC)

# relative gap below which two Laplacian eigenvalues belong to the same cluster
DEGENERACY_TOL = 1e-9


class Domain(object):
    """
    A cross-section together with its boundary condition and grid size.
    Intervals carry Dirichlet or Neumann data, circles are periodic, and the point domain has neither.
    """

    def __init__(self, kind: str, a: float = 0.0, b: float = 0.0, boundary: Optional[str] = None,
                 n: int = 0) -> None:
        """
        Creates a new domain and checks that the combination of kind, boundary condition and grid size is supported.
        Raises ConfigurationError otherwise.
        :param kind: one of 'point', 'interval' and 'circle'
        :param a: left end point (the circle starts at a as well)
        :param b: right end point
        :param boundary: one of 'dirichlet', 'neumann' and 'periodic'; ignored for the point domain
        :param n: number of grid nodes; ignored for the point domain
        """
        if kind not in KINDS:
            raise ConfigurationError(f"unknown domain kind '{kind}'")

        if kind == POINT:
            self.kind = kind
            self.a = 0.0
            self.b = 1.0
            self.boundary = None
            self.n = 0
            return

        if boundary not in BOUNDARIES:
            raise ConfigurationError(f"unknown boundary condition '{boundary}'")
        if kind == CIRCLE and boundary != PERIODIC:
            raise ConfigurationError(f"a circle needs periodic boundary data, got '{boundary}'")
        if kind == INTERVAL and boundary == PERIODIC:
            raise ConfigurationError("periodic boundary data needs a circle")
        if not b > a:
            raise ConfigurationError(f"empty cross-section ({a}, {b})")
        if int(n) != n or n < 2:
            raise ConfigurationError(f"grid size must be an integer of at least 2, got {n}")

        self.kind = kind
        self.a = float(a)
        self.b = float(b)
        self.boundary = boundary
        self.n = int(n)

    @classmethod
    def point(cls) -> 'Domain':
        return cls(POINT)

    @classmethod
    def interval(cls, a: float, b: float, n: int, boundary: str = DIRICHLET) -> 'Domain':
        return cls(INTERVAL, a, b, boundary, n)

    @classmethod
    def circle(cls, length: float, n: int) -> 'Domain':
        return cls(CIRCLE, 0.0, length, PERIODIC, n)

    @property
    def is_point(self) -> bool:
        return self.kind == POINT

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def size(self) -> int:
        """
        Number of unknowns of a discrete function on this domain.
        """
        return 1 if self.is_point else self.n

    @property
    def spacing(self) -> float:
        """
        Grid spacing h; 0 for the point domain.
        """
        if self.is_point:
            return 0.0
        if self.boundary == DIRICHLET:
            return self.length / (self.n + 1)
        return self.length / self.n

    def nodes(self) -> np.ndarray:
        """
        Returns the grid nodes: interior nodes for Dirichlet data, cell centres for Neumann data and equidistant nodes
        starting at `a` for periodic data.
        """
        if self.is_point:
            return np.zeros(1)
        h = self.spacing
        j = np.arange(self.n)
        if self.boundary == DIRICHLET:
            return self.a + (j + 1) * h
        if self.boundary == NEUMANN:
            return self.a + (j + 0.5) * h
        return self.a + j * h

    def to_dict(self) -> dict:
        if self.is_point:
            return {'kind': POINT}
        return {'kind': self.kind, 'a': self.a, 'b': self.b, 'boundary': self.boundary, 'n': self.n}

    def __eq__(self, other) -> bool:
        return isinstance(other, Domain) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.to_dict().items())))

    def __repr__(self) -> str:
        if self.is_point:
            return "Domain(point)"
        return f"Domain({self.kind}, ({self.a}, {self.b}), {self.boundary}, n={self.n})"


class DiscreteLaplacian(object):
    """
    Second-order finite difference Laplacian on a `Domain` together with its full eigendecomposition.
    The matrix is symmetric and all quadrature weights are equal to the grid spacing, so the eigenvectors are
    orthonormal in the Euclidean as well as (after scaling) in the discrete L2 inner product.
    """

    def __init__(self, domain: Domain) -> None:
        self.domain = domain
        self.matrix = _assemble(domain)
        eigenvalues, eigenvectors = scipy.linalg.eigh(self.matrix)
        # eigh sorts ascending; the spectrum of the Laplacian is used from the top
        order = np.argsort(-eigenvalues, kind='stable')
        self.eigenvalues = eigenvalues[order]
        self.eigenvectors = eigenvectors[:, order]
        if domain.is_point:
            self.weights = np.ones(1)
        else:
            self.weights = np.full(domain.n, domain.spacing)
        # Dirichlet: the two boundary nodes carry zero values and the two half weights h / 2 that complete Vol
        self.volume = 1.0 if domain.is_point else domain.length

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """
        Discrete L2 inner product.
        """
        return float(np.sum(self.weights * u * v))

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.inner(u, u)))

    def mode_count(self, count: Optional[int]) -> int:
        """
        Returns the smallest mode count >= `count` that does not split a cluster of (numerically) equal eigenvalues.
        `None` selects all modes.
        """
        size = self.size
        if count is None or count >= size:
            return size
        if count < 1:
            raise ConfigurationError(f"mode count must be positive, got {count}")
        k = count
        while k < size:
            scale = max(1.0, abs(self.eigenvalues[k - 1]))
            if abs(self.eigenvalues[k] - self.eigenvalues[k - 1]) > DEGENERACY_TOL * scale:
                break
            k += 1
        return k

    def modes(self, count: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Returns the eigenvalues and L2-orthonormal eigenfunctions (as columns) of the smoothest modes.
        :param count: requested number of modes; extended to complete a degenerate cluster
        :return: eigenvalues mu (descending) and the basis matrix Phi of shape (size, modes)
        """
        k = self.mode_count(count)
        basis = self.eigenvectors[:, :k] / np.sqrt(self.weights)[:, None]
        return self.eigenvalues[:k].copy(), basis


def _assemble(domain: Domain) -> np.ndarray:
    if domain.is_point:
        return np.zeros((1, 1))

    n = domain.n
    h2 = domain.spacing ** 2
    matrix = (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
    if domain.boundary == NEUMANN:
        # mirrored ghost nodes at both cell faces
        matrix[0, 0] = -1.0
        matrix[-1, -1] = -1.0
    elif domain.boundary == PERIODIC:
        if n == 2:
            matrix = np.array([[-2.0, 2.0], [2.0, -2.0]])
        else:
            matrix[0, -1] = 1.0
            matrix[-1, 0] = 1.0
    return matrix / h2


def build_laplacian(domain: Domain) -> DiscreteLaplacian:
    """
    Assembles the discrete Laplacian of `domain`.
    :param domain: the cross-section; unsupported combinations are already rejected by `Domain`
    :return: the Laplacian with its cached eigendecomposition
    """
    return DiscreteLaplacian(domain)
