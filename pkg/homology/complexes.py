"""
Chain complexes over GF(2) generated by hyperbolic stationary points, graded by Morse index, with the boundary
operator given by the mod 2 numbers of connecting orbits.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from homology import gf2
from nonlinearities.families import CUSTOM, ODD_MINUS
from searching.orbits import IsolatingSet, OrbitCount, OrbitSearch, count_mod2
from searching.stationary import StationaryPoint
from travelwave.errors import InvalidPartitionError, NonHyperbolicError, UncertifiedCountError

logger = logging.getLogger(__name__)


class ChainComplex(object):
    """
    C_k is spanned by the generators of grade k; `boundaries[k]` is the |C_{k-1}| x |C_k| matrix of d_k.
    """

    def __init__(self, grades: Dict[int, List[str]], boundaries: Dict[int, np.ndarray],
                 isolating: Optional[IsolatingSet] = None, certified: bool = True,
                 connections: Optional[Dict[Tuple[str, str], int]] = None, provenance: str = "") -> None:
        self.grades = {k: list(ids) for k, ids in sorted(grades.items()) if ids}
        self.boundaries = {k: gf2.as_gf2(matrix) for k, matrix in boundaries.items()}
        self.isolating = isolating or IsolatingSet()
        self.certified = certified
        self.connections = dict(connections or {})
        self.provenance = provenance

    @property
    def generators(self) -> List[str]:
        return [generator for k in self.grades for generator in self.grades[k]]

    def grade_of(self, generator: str) -> int:
        for k, ids in self.grades.items():
            if generator in ids:
                return k
        raise KeyError(generator)

    def dimension(self, k: int) -> int:
        return len(self.grades.get(k, []))

    def boundary(self, k: int) -> np.ndarray:
        """
        The matrix of d_k: C_k -> C_{k-1}; zero if no orbits were counted.
        """
        shape = (self.dimension(k - 1), self.dimension(k))
        matrix = self.boundaries.get(k)
        if matrix is None or matrix.shape != shape:
            return np.zeros(shape, dtype=np.uint8)
        return matrix

    @property
    def grade_range(self) -> List[int]:
        if not self.grades:
            return []
        return list(range(min(self.grades), max(self.grades) + 1))

    def shifted(self, shift: int) -> 'ChainComplex':
        """
        The same complex with every grade k relabelled k + shift.
        """
        return ChainComplex({k + shift: ids for k, ids in self.grades.items()},
                            {k + shift: matrix for k, matrix in self.boundaries.items()}, self.isolating,
                            self.certified, self.connections, self.provenance)

    def direct_sum(self, other: 'ChainComplex', prefixes: Tuple[str, str] = ("a:", "b:")) -> 'ChainComplex':
        """
        Disjoint union of two complexes; generator ids are made unique with `prefixes`.
        """
        first, second = prefixes
        grades = {}
        boundaries = {}
        for k in sorted(set(self.grades) | set(other.grades)):
            grades[k] = [first + g for g in self.grades.get(k, [])] + [second + g for g in other.grades.get(k, [])]
        for k in grades:
            mine, theirs = self.boundary(k), other.boundary(k)
            block = np.zeros((mine.shape[0] + theirs.shape[0], mine.shape[1] + theirs.shape[1]), dtype=np.uint8)
            block[:mine.shape[0], :mine.shape[1]] = mine
            block[mine.shape[0]:, mine.shape[1]:] = theirs
            boundaries[k] = block
        connections = {(first + s, first + t): n for (s, t), n in self.connections.items()}
        connections.update({(second + s, second + t): n for (s, t), n in other.connections.items()})
        return ChainComplex(grades, boundaries, self.isolating, self.certified and other.certified, connections,
                            f"{self.provenance} + {other.provenance}")

    def restricted(self, generators: Sequence[str]) -> 'ChainComplex':
        """
        The subcomplex spanned by `generators`, which must be closed under d.
        """
        keep = set(generators)
        grades = {k: [g for g in ids if g in keep] for k, ids in self.grades.items()}
        boundaries = {}
        for k in self.grades:
            rows = [i for i, g in enumerate(self.grades.get(k - 1, [])) if g in keep]
            columns = [j for j, g in enumerate(self.grades[k]) if g in keep]
            boundaries[k] = self.boundary(k)[np.ix_(rows, columns)]
        connections = {pair: n for pair, n in self.connections.items() if pair[0] in keep and pair[1] in keep}
        return ChainComplex(grades, boundaries, self.isolating, self.certified, connections, self.provenance)

    def to_dict(self) -> dict:
        return {'grades': {str(k): ids for k, ids in self.grades.items()},
                'boundaries': {str(k): self.boundary(k).tolist() for k in self.grades},
                'isolating_set': self.isolating.to_dict(), 'certified': self.certified,
                'provenance': self.provenance}


class HomologyResult(object):
    """
    Ranks of ker d_k / im d_{k+1} per grade, with representative cycles as lists of generator ids.
    """

    def __init__(self, ranks: Dict[int, int], representatives: Dict[int, List[List[str]]],
                 certified: bool = True) -> None:
        self.ranks = {k: r for k, r in sorted(ranks.items())}
        self.representatives = representatives
        self.certified = certified

    @property
    def total(self) -> int:
        return sum(self.ranks.values())

    def rank(self, k: int) -> int:
        return self.ranks.get(k, 0)

    def shifted(self, shift: int) -> 'HomologyResult':
        return HomologyResult({k + shift: r for k, r in self.ranks.items()},
                              {k + shift: reps for k, reps in self.representatives.items()}, self.certified)

    def summary(self) -> str:
        grades = ", ".join(f"grade {k}" for k, r in self.ranks.items() if r > 0)
        text = f"total rank {self.total}" + (f" ({grades})" if grades else "")
        return text if self.certified else text + " UNCERTIFIED"

    def to_dict(self) -> dict:
        return {'ranks': {str(k): r for k, r in self.ranks.items()}, 'total': self.total,
                'representatives': {str(k): reps for k, reps in self.representatives.items()},
                'certified': self.certified}


class DSquaredCheck(object):

    def __init__(self, offending: List[Tuple[int, str, str]]) -> None:
        #: (k, generator of C_{k+1}, generator of C_{k-1}) with a nonzero entry of d_k d_{k+1}
        self.offending = offending

    @property
    def passed(self) -> bool:
        return not self.offending

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return {'passed': self.passed, 'offending': [list(entry) for entry in self.offending]}


def build_complex(points: Sequence[StationaryPoint], count: OrbitCount, force: bool = False,
                  provenance: str = "") -> ChainComplex:
    """
    Builds the complex of the generators in the isolating set of `count`, graded by Morse index.
    Raises NonHyperbolicError for a non-hyperbolic generator and UncertifiedCountError for uncertified counts unless
    `force` is set; a forced complex is marked uncertified.
    """
    isolating = count.isolating
    generators = [point for point in points if isolating.contains(point)]
    for point in generators:
        if not point.hyperbolic:
            raise NonHyperbolicError(f"generator {point.id} is not hyperbolic")
    if not count.certified and not force:
        raise UncertifiedCountError("the orbit counts are not certified; pass force to build the complex anyway")

    grades = {}  # type: Dict[int, List[str]]
    for point in generators:
        grades.setdefault(point.morse_index, []).append(point.id)
    boundaries = {}
    for k, ids in grades.items():
        lower = grades.get(k - 1, [])
        boundaries[k] = np.array([[count.mod2(x, y) for x in ids] for y in lower], dtype=np.uint8) \
            .reshape(len(lower), len(ids))
    return ChainComplex(grades, boundaries, isolating, count.certified, dict(count.raw), provenance)


def check_d_squared(complex_: ChainComplex) -> DSquaredCheck:
    """
    Tests d_k d_{k+1} = 0 over GF(2) for all adjacent grades.
    """
    offending = []
    for k in complex_.grade_range:
        product = gf2.matmul(complex_.boundary(k), complex_.boundary(k + 1))
        for row, col in zip(*np.nonzero(product)):
            offending.append((k, complex_.grades[k + 1][col], complex_.grades[k - 1][row]))
    if offending:
        logger.warning("d^2 != 0 at %d entries", len(offending))
    return DSquaredCheck(offending)


def cycle_basis(complex_: ChainComplex, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Representative cycles of H_k as columns, together with the boundary columns im d_{k+1}.
    Representatives are chosen greedily among the kernel basis vectors, which makes them deterministic.
    """
    kernel = gf2.nullspace(complex_.boundary(k))
    image = complex_.boundary(k + 1)
    chosen = []
    span = image
    for column in kernel.T:
        if not gf2.in_span(span, column):
            chosen.append(column)
            span = np.hstack([span, column[:, None]])
    representatives = np.array(chosen, dtype=np.uint8).T.reshape(complex_.dimension(k), len(chosen))
    return representatives, image


def compute_homology(complex_: ChainComplex) -> HomologyResult:
    """
    Homology over GF(2) by Gaussian elimination: rank_k = dim ker d_k - rank d_{k+1}.
    """
    ranks = {}
    representatives = {}
    for k in complex_.grade_range:
        cycles, _ = cycle_basis(complex_, k)
        ranks[k] = cycles.shape[1]
        ids = complex_.grades.get(k, [])
        representatives[k] = [[ids[i] for i in np.nonzero(column)[0]] for column in cycles.T]
    return HomologyResult(ranks, representatives, complex_.certified)


def connection_components(complex_: ChainComplex) -> List[List[str]]:
    """
    Connected components of the graph whose nodes are the generators and whose edges are the nonzero entries of d.
    """
    graph = nx.Graph()
    graph.add_nodes_from(complex_.generators)
    for k in complex_.grades:
        matrix = complex_.boundary(k)
        for row, col in zip(*np.nonzero(matrix)):
            graph.add_edge(complex_.grades[k][col], complex_.grades[k - 1][row])
    order = {generator: number for number, generator in enumerate(complex_.generators)}
    components = [sorted(component, key=order.get) for component in nx.connected_components(graph)]
    return sorted(components, key=lambda component: order[component[0]])


class DirectSumReport(object):

    def __init__(self, parts: List[List[str]], part_ranks: List[Dict[int, int]], ranks: Dict[int, int]) -> None:
        self.parts = parts
        self.part_ranks = part_ranks
        self.ranks = ranks

    @property
    def passed(self) -> bool:
        grades = set(self.ranks).union(*[set(r) for r in self.part_ranks])
        return all(self.ranks.get(k, 0) == sum(r.get(k, 0) for r in self.part_ranks) for k in grades)

    def to_dict(self) -> dict:
        return {'parts': self.parts, 'passed': self.passed,
                'part_ranks': [{str(k): v for k, v in r.items()} for r in self.part_ranks],
                'ranks': {str(k): v for k, v in self.ranks.items()}}


def direct_sum_check(complex_: ChainComplex, partition: Optional[Sequence[Sequence[str]]] = None) \
        -> DirectSumReport:
    """
    Checks that homology is additive over a partition of the generators that no counted orbit crosses.
    Raises InvalidPartitionError if the partition does not cover the generators exactly or an orbit joins two parts.
    :param complex_: the complex
    :param partition: parts of generator ids; the connection components if omitted
    :return: ranks of the whole complex and of every part
    """
    parts = [list(part) for part in (partition if partition is not None else connection_components(complex_))]
    flat = [g for part in parts for g in part]
    if sorted(flat) != sorted(complex_.generators):
        raise InvalidPartitionError("the partition does not cover every generator exactly once")
    part_of = {g: number for number, part in enumerate(parts) for g in part}
    crossing = [(complex_.grades[k][col], complex_.grades[k - 1][row])
                for k in complex_.grades for row, col in zip(*np.nonzero(complex_.boundary(k)))]
    # an even number of orbits cancels in d but still joins the parts
    crossing += [pair for pair, raw in complex_.connections.items() if raw > 0]
    for source, target in crossing:
        if source in part_of and target in part_of and part_of[source] != part_of[target]:
            raise InvalidPartitionError(f"the orbits from {source} to {target} join two parts")
    part_ranks = [compute_homology(complex_.restricted(part)).ranks for part in parts]
    return DirectSumReport(parts, part_ranks, compute_homology(complex_).ranks)


def expected_homology(family: str) -> Optional[int]:
    """
    The predicted total rank for a nonlinearity class: 1 for odd-, 0 for the other families, None for custom.
    """
    if family == CUSTOM:
        return None
    return 1 if family == ODD_MINUS else 0


class ForcingReport(object):

    def __init__(self, family: str, generators: List[str], endpoints: List[str], waves: int, certified: bool,
                 total_rank: int) -> None:
        self.family = family
        self.generators = generators
        self.endpoints = endpoints
        self.waves = waves
        self.certified = certified
        self.total_rank = total_rank
        count = len(generators)
        self.k = count // 2 if family == ODD_MINUS else (count + 1) // 2
        self.allowed_untouched = 1 if family == ODD_MINUS else 0

    @property
    def untouched(self) -> List[str]:
        return [g for g in self.generators if g not in self.endpoints]

    @property
    def passed(self) -> bool:
        return self.waves >= self.k and len(self.untouched) <= self.allowed_untouched

    @property
    def inconsistent(self) -> bool:
        """
        A failed forcing assertion on certified counts points to a missed orbit.
        """
        return self.certified and not self.passed

    @property
    def parity_consistent(self) -> bool:
        return len(self.generators) % 2 == self.total_rank % 2

    @property
    def predicts_extra_solution(self) -> bool:
        """
        An even number of hyperbolic generators in the odd- class leaves room for another stationary solution.
        """
        return self.family == ODD_MINUS and len(self.generators) % 2 == 0

    def to_dict(self) -> dict:
        return {'family': self.family, 'generators': len(self.generators), 'k': self.k,
                'waves_found': self.waves, 'endpoints': self.endpoints, 'untouched': self.untouched,
                'passed': self.passed, 'inconsistent': self.inconsistent, 'parity_consistent': self.parity_consistent,
                'predicts_extra_solution': self.predicts_extra_solution}


def forcing_analysis(complex_: ChainComplex, homology: HomologyResult, count: OrbitCount,
                     family: str) -> ForcingReport:
    """
    Checks that the counted orbits force at least k distinct travelling waves, k derived from the number of
    hyperbolic generators, and that every generator except the allowed exception is an end point of some orbit.
    """
    generators = complex_.generators
    endpoints = set()
    waves = 0
    for (source, target), raw in count.raw.items():
        if raw > 0:
            endpoints.update((source, target))
            waves += raw
    report = ForcingReport(family, generators, [g for g in generators if g in endpoints], waves, count.certified,
                           homology.total)
    if report.inconsistent:
        logger.warning("forcing: %d waves found, at least %d expected; untouched generators %s", waves, report.k,
                       report.untouched)
    return report


def energy_levels(points: Sequence[StationaryPoint], margin: float = 1.0) -> List[float]:
    """
    One regular level between any two consecutive stationary energies and one above all of them.
    """
    energies = sorted({round(point.energy, 12) for point in points})
    levels = [0.5 * (low + high) for low, high in zip(energies[:-1], energies[1:])]
    if energies:
        levels.append(energies[-1] + margin)
    return levels


def energy_filtration(points: Sequence[StationaryPoint], search: OrbitSearch,
                      levels: Optional[Sequence[float]] = None, force: bool = False) \
        -> List[Tuple[float, HomologyResult]]:
    """
    Homology of the sublevel sets {E <= level}; the last level lies above every stationary energy, so its homology
    is the whole space homology.
    """
    levels = energy_levels(points) if levels is None else list(levels)
    results = []
    for level in levels:
        count = count_mod2(search, points, IsolatingSet(level))
        complex_ = build_complex(points, count, force=force, provenance=f"sublevel {level:g}")
        results.append((level, compute_homology(complex_)))
    return results
