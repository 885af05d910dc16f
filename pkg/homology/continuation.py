"""
Continuation maps between the complexes at the two ends of a homotopy, the chain map identity they satisfy and the
maps they induce on homology.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from homology import gf2
from homology.complexes import ChainComplex, cycle_basis
from searching.collocation import CollocationSettings, find_nonautonomous_connections
from searching.stationary import StationaryPoint
from travelwave.problem import HomotopyPath

logger = logging.getLogger(__name__)


class ContinuationMap(object):
    """
    psi_k: C_k(start) -> C_k(end); `matrices[k]` has one row per end generator and one column per start generator.
    """

    def __init__(self, sources: Dict[int, List[str]], targets: Dict[int, List[str]],
                 matrices: Dict[int, np.ndarray], certified: bool = True, counts: Optional[List[dict]] = None) -> None:
        self.sources = sources
        self.targets = targets
        self.matrices = {k: gf2.as_gf2(matrix) for k, matrix in matrices.items()}
        self.certified = certified
        self.counts = counts or []

    def matrix(self, k: int) -> np.ndarray:
        shape = (len(self.targets.get(k, [])), len(self.sources.get(k, [])))
        matrix = self.matrices.get(k)
        return np.zeros(shape, dtype=np.uint8) if matrix is None or matrix.shape != shape else matrix

    @classmethod
    def identity(cls, complex_: ChainComplex) -> 'ContinuationMap':
        return cls(complex_.grades, complex_.grades,
                   {k: np.eye(len(ids), dtype=np.uint8) for k, ids in complex_.grades.items()}, complex_.certified)

    def to_dict(self) -> dict:
        return {'matrices': {str(k): self.matrix(k).tolist() for k in sorted(set(self.sources) | set(self.targets))},
                'sources': {str(k): ids for k, ids in self.sources.items()},
                'targets': {str(k): ids for k, ids in self.targets.items()},
                'certified': self.certified, 'counts': self.counts}


def build_continuation_map(path: HomotopyPath, start: ChainComplex, end: ChainComplex,
                           start_points: Sequence[StationaryPoint], end_points: Sequence[StationaryPoint],
                           settings: Optional[CollocationSettings] = None) -> ContinuationMap:
    """
    Counts the connections of the nonautonomous equation along `path` between all pairs of generators of equal grade.
    """
    start_by_id = {point.id: point for point in start_points}
    end_by_id = {point.id: point for point in end_points}
    matrices = {}
    counts = []
    certified = start.certified and end.certified
    for k in sorted(set(start.grades) | set(end.grades)):
        sources, targets = start.grades.get(k, []), end.grades.get(k, [])
        matrix = np.zeros((len(targets), len(sources)), dtype=np.uint8)
        for col, source in enumerate(sources):
            for row, target in enumerate(targets):
                connection = find_nonautonomous_connections(path, start_by_id[source], end_by_id[target], settings)
                matrix[row, col] = connection.count
                certified = certified and connection.certified
                counts.append(dict(connection.to_dict(), grade=k))
        matrices[k] = matrix
    return ContinuationMap(start.grades, end.grades, matrices, certified, counts)


class ContinuationReport(object):

    def __init__(self, offending: List[Tuple[int, str, str]], start_ranks: Dict[int, int], end_ranks: Dict[int, int],
                 induced: Dict[int, Optional[np.ndarray]]) -> None:
        #: (k, start generator, end generator of grade k - 1) where d psi and psi d differ
        self.offending = offending
        self.start_ranks = start_ranks
        self.end_ranks = end_ranks
        self.induced = induced

    @property
    def chain_map(self) -> bool:
        return not self.offending

    @property
    def rank_mismatch(self) -> List[int]:
        grades = sorted(set(self.start_ranks) | set(self.end_ranks))
        return [k for k in grades if self.start_ranks.get(k, 0) != self.end_ranks.get(k, 0)]

    @property
    def isomorphism(self) -> bool:
        if self.rank_mismatch:
            return False
        for matrix in self.induced.values():
            if matrix is None or gf2.rank(matrix) != matrix.shape[0]:
                return False
        return True

    @property
    def passed(self) -> bool:
        return self.chain_map and self.isomorphism

    def to_dict(self) -> dict:
        return {'chain_map': self.chain_map, 'offending': [list(entry) for entry in self.offending],
                'isomorphism': self.isomorphism, 'rank_mismatch': self.rank_mismatch,
                'start_ranks': {str(k): v for k, v in self.start_ranks.items()},
                'end_ranks': {str(k): v for k, v in self.end_ranks.items()},
                'induced': {str(k): None if m is None else m.tolist() for k, m in self.induced.items()},
                'passed': self.passed}


def induced_map(start: ChainComplex, end: ChainComplex, psi: ContinuationMap) -> Dict[int, Optional[np.ndarray]]:
    """
    Matrices of the map on homology in the representative bases of both complexes; None for a grade where the image
    of a cycle is not a cycle.
    """
    induced = {}
    for k in sorted(set(start.grades) | set(end.grades)):
        start_cycles, _ = cycle_basis(start, k)
        end_cycles, end_boundaries = cycle_basis(end, k)
        system = np.hstack([end_cycles, end_boundaries])
        matrix = np.zeros((end_cycles.shape[1], start_cycles.shape[1]), dtype=np.uint8)
        for col, cycle in enumerate(start_cycles.T):
            image = gf2.matmul(psi.matrix(k), cycle[:, None])[:, 0]
            coefficients = gf2.solve(system, image)
            if coefficients is None:
                matrix = None
                break
            matrix[:, col] = coefficients[:end_cycles.shape[1]]
        induced[k] = matrix
    return induced


def continuation_check(start: ChainComplex, end: ChainComplex, psi: ContinuationMap) -> ContinuationReport:
    """
    Verifies d(end) psi = psi d(start) over GF(2) and that psi induces an isomorphism on homology.
    """
    offending = []
    for k in sorted(set(start.grades) | set(end.grades)):
        left = gf2.matmul(end.boundary(k), psi.matrix(k))
        right = gf2.matmul(psi.matrix(k - 1), start.boundary(k))
        for row, col in zip(*np.nonzero(left ^ right)):
            offending.append((k, start.grades[k][col], end.grades[k - 1][row]))
    induced = induced_map(start, end, psi)
    start_ranks = {k: cycle_basis(start, k)[0].shape[1] for k in start.grade_range}
    end_ranks = {k: cycle_basis(end, k)[0].shape[1] for k in end.grade_range}
    report = ContinuationReport(offending, start_ranks, end_ranks, induced)
    logger.info("continuation: chain map %s, isomorphism %s", report.chain_map, report.isomorphism)
    return report


def compose_continuations(second: ContinuationMap, first: ContinuationMap) -> ContinuationMap:
    """
    The chain level composition second o first; the targets of `first` must be the sources of `second`.
    """
    grades = sorted(set(first.sources) | set(second.targets))
    for k in grades:
        if first.targets.get(k, []) != second.sources.get(k, []):
            raise ValueError(f"the continuation maps do not compose at grade {k}")
    matrices = {k: gf2.matmul(second.matrix(k), first.matrix(k)) for k in grades}
    return ContinuationMap(first.sources, second.targets, matrices, first.certified and second.certified)


class CompositionReport(object):

    def __init__(self, mismatched: List[int]) -> None:
        self.mismatched = mismatched

    @property
    def passed(self) -> bool:
        return not self.mismatched

    def to_dict(self) -> dict:
        return {'passed': self.passed, 'mismatched_grades': self.mismatched}


def composition_check(first: ContinuationMap, second: ContinuationMap, direct: ContinuationMap,
                      start: ChainComplex, end: ChainComplex) -> CompositionReport:
    """
    Compares the maps induced on homology by `direct` and by the composition `second` o `first`.
    """
    composed = induced_map(start, end, compose_continuations(second, first))
    expected = induced_map(start, end, direct)
    mismatched = [k for k in sorted(set(composed) | set(expected))
                  if composed.get(k) is None or expected.get(k) is None
                  or not np.array_equal(composed[k], expected[k])]
    return CompositionReport(mismatched)
