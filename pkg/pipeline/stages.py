"""
The pipeline stages behind the command line verbs. Every stage reads its prerequisites from the output directory,
writes its results there and records them in the manifest.
"""
import logging
import os
import time
import warnings
from functools import reduce
from typing import Callable, Dict, List, Optional, Tuple

import matplotlib
import numpy as np

from dynamics.flow import FlowSystem, SpectralFlow, Trajectory
from homology.complexes import (build_complex, check_d_squared, compute_homology, direct_sum_check,
                                energy_filtration, expected_homology, forcing_analysis)
from homology.continuation import (build_continuation_map, compose_continuations, composition_check,
                                   continuation_check)
from pipeline import results
from pipeline.config import COLLOCATION, SHOOTING, ExperimentConfig
from searching.collocation import find_heteroclinics_galerkin
from searching.orbits import (HeteroclinicOrbit, IsolatingSet, OrbitCount, OrbitSearch, count_mod2,
                              find_heteroclinics_planar, sweep_connections_planar)
from searching.stationary import StationaryPoint, energy_bound_check, find_all
from searching.util import CountCallback
from travelwave.domain import DIRICHLET
from travelwave.errors import ConfigurationError, DegeneracyWarning, UncertifiedCountError
from travelwave.hypotheses import validate_homotopy, validate_hypotheses
from travelwave.problem import HomotopyPath, SpatialProblem

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

UNCERTIFIED_BANNER = "UNCERTIFIED: orbit counts could not be certified; results below are not verified"


def _pair_key(pair: Tuple[str, str]) -> str:
    return f"{pair[0]}->{pair[1]}"


class Pipeline(object):
    """
    Runs the stages of one experiment against one output directory.
    """

    def __init__(self, config: ExperimentConfig, out_dir: str,
                 log_scalar: Optional[Callable[[str, float], None]] = None,
                 add_artifact: Optional[Callable[[str], None]] = None) -> None:
        """
        :param config: the validated experiment
        :param out_dir: the output directory
        :param log_scalar: receives key numbers of every stage, e.g. the sacred run's log_scalar
        :param add_artifact: receives every written file, e.g. the sacred experiment's add_artifact
        """
        self.config = config
        self.out_dir = out_dir
        self.log_scalar = log_scalar or (lambda name, value: None)
        self.add_artifact = add_artifact or (lambda filename: None)
        self.problem = config.load_problem()
        os.makedirs(out_dir, exist_ok=True)
        self.manifest = results.RunManifest(out_dir, config.to_dict())
        self.stages = {
            'validate': self.validate,
            'stationary': self.stationary,
            'orbits': self.orbits,
            'homology': self.homology,
            'continue': self.continuation,
            'report': self.report,
        }

    def path(self, *parts: str) -> str:
        return os.path.join(self.out_dir, *parts)

    def run(self, stage: str) -> dict:
        """
        Runs a single stage. Raises ConfigurationError if the stage is not recognised.
        :return: a summary of the stage's results
        """
        if stage not in self.stages:
            raise ConfigurationError(f"stage '{stage}' not recognised")
        config_file = self.path("experiment_config.json")
        results.write_json(config_file, self.config.to_dict())
        self._written([config_file])
        start = time.perf_counter()
        logger.info("stage %s started", stage)
        summary = self.stages[stage]()
        self.manifest.stage_done(stage, time.perf_counter() - start, summary.get('certified'))
        self.add_artifact(self.manifest.save())
        logger.info("stage %s done", stage)
        return summary

    def _written(self, filenames: List[str]) -> None:
        self.manifest.record(filenames)
        for filename in filenames:
            self.add_artifact(filename)

    # ---------------------------------------------------------------- validate

    def _hypotheses(self, problem: SpatialProblem):
        validation = self.config.validation
        u_range = tuple(validation.get('u_range', (-10.0, 10.0)))
        domain = problem.domain
        require_f3 = not domain.is_point and domain.boundary != DIRICHLET
        return validate_hypotheses(problem.nonlinearity, u_range, int(validation.get('samples', 2001)),
                                   x_nodes=problem.nodes, require_f3=require_f3)

    def waypoint_problems(self) -> List[SpatialProblem]:
        """
        The problems at the waypoints of the homotopy block.
        """
        if self.config.homotopy is None:
            raise ConfigurationError("the experiment has no homotopy block")
        problems = []
        for number, waypoint in enumerate(self.config.homotopy['waypoints']):
            scale = float(waypoint.get('alpha_scale', 1.0))
            nonlinearity = self.problem.nonlinearity if scale == 1.0 else self.problem.nonlinearity.scaled(scale)
            problems.append(self.problem.replace(nonlinearity=nonlinearity,
                                                 wave_speed=float(waypoint.get('wave_speed', self.problem.wave_speed)),
                                                 name=f"{self.problem.name}[{number}]"))
        return problems

    def _paths(self, problems: List[SpatialProblem]) -> List[HomotopyPath]:
        ell = float(self.config.homotopy.get('ell', 1.0))
        paths = [HomotopyPath.between(a, b, ell) for a, b in zip(problems[:-1], problems[1:])]
        if len(problems) > 2:
            paths.append(HomotopyPath.between(problems[0], problems[-1], ell))
        return paths

    def validate(self) -> dict:
        report = self._hypotheses(self.problem)
        data = {'schema_version': results.RESULT_SCHEMA_VERSION, 'problem': self.problem.to_dict(),
                'hypotheses': report.to_dict(), 'homotopy': None}
        if self.config.homotopy is not None:
            data['homotopy'] = [{'from': path.start.name, 'to': path.end.name,
                                 'report': validate_homotopy(path).to_dict()}
                                for path in self._paths(self.waypoint_problems())]
        filename = self.path("hypotheses.json")
        results.write_json(filename, data)
        self._written([filename])
        return {'hypotheses passed': report.passed, 'f2 variant': report.f2_variant, 'theta': report.f2_theta,
                "C_f'": report.f2_constant}

    # -------------------------------------------------------------- stationary

    def _find_points(self, problem: SpatialProblem, callback: Optional[CountCallback] = None):
        stationary = find_all(problem, self.config.search_strategy(), self.config.solver_settings(), callback)
        for point in stationary:
            if not point.hyperbolic:
                warnings.warn(f"stationary point {point.id} is not hyperbolic (gap {point.spectral_gap:.3g})",
                              DegeneracyWarning)
        return stationary

    def stationary(self) -> dict:
        callback = CountCallback()
        stationary = self._find_points(self.problem, callback)
        hypotheses = self._hypotheses(self.problem)
        bound = None
        if hypotheses.f2_constant is not None:
            bound = {'c_prime': hypotheses.f2_constant,
                     'passed': energy_bound_check(stationary.points, hypotheses.f2_constant, self.problem.volume)}

        data = dict(stationary.to_dict(), schema_version=results.RESULT_SCHEMA_VERSION,
                    problem=self.problem.to_dict(), newton_iterations=callback.counter,
                    newton_starts=callback.starts, energy_bound=bound)
        json_file = self.path("stationary.json")
        results.write_json(json_file, data)
        csv_file = self.path("stationary_profiles.csv")
        profiles = np.column_stack([self.problem.nodes] + [point.z for point in stationary])
        results.write_csv(csv_file, ['x'] + [point.id for point in stationary], profiles)
        self._written([json_file, csv_file])

        self.log_scalar("stationary.count", len(stationary))
        self.log_scalar("stationary.newton_iterations", callback.counter)
        self.log_scalar("stationary.max_initial_residual", callback.max_initial_residual)
        return {'points': len(stationary), 'morse indices': [point.morse_index for point in stationary],
                'energies': [round(point.energy, 6) for point in stationary],
                'newton iterations': callback.counter, 'seeds': stationary.seeds_tried}

    def load_points(self) -> List[StationaryPoint]:
        data = results.read_json(self.path("stationary.json"), "stationary")
        return [StationaryPoint.from_dict(entry) for entry in data['points']]

    # ------------------------------------------------------------------ orbits

    def _method(self, problem: SpatialProblem) -> str:
        method = self.config.orbit_method
        if method == SHOOTING or (method != COLLOCATION and problem.domain.is_point):
            return SHOOTING
        return COLLOCATION

    def flow_system(self, problem: SpatialProblem) -> FlowSystem:
        if problem.domain.is_point:
            return FlowSystem(problem)
        return FlowSystem(problem, self.config.collocation_settings().modes)

    def _search_orbits(self, problem: SpatialProblem, points: List[StationaryPoint]) -> OrbitSearch:
        hyperbolic = [point for point in points if point.hyperbolic]
        if self._method(problem) == SHOOTING:
            return find_heteroclinics_planar(problem, hyperbolic, self.config.shooting_settings())
        pairs = self.config.orbit_pairs
        return find_heteroclinics_galerkin(problem, hyperbolic, None if pairs is None else [tuple(p) for p in pairs],
                                           self.config.collocation_settings(), self.config.threads)

    def orbits(self) -> dict:
        points = self.load_points()
        search = self._search_orbits(self.problem, points)
        count = count_mod2(search, [point for point in points if point.hyperbolic])

        oracle = None
        if self.config.orbits.get('oracle', False) and self.problem.domain.is_point:
            pairs = sweep_connections_planar(self.problem, [point for point in points if point.hyperbolic])
            found = {orbit.pair for orbit in search.orbits}
            oracle = {'pairs': sorted(_pair_key(pair) for pair in pairs), 'agrees': pairs == found}

        written = self._write_orbits(search, count, points, oracle)
        self._written(written)
        self.log_scalar("orbits.count", len(search))
        return {'orbits': [f"{orbit.id}: {orbit.source_id} -> {orbit.target_id}" for orbit in search.orbits],
                'certified': search.certified, 'misses': len(search.misses), 'undecided': len(search.undecided),
                'oracle agrees': None if oracle is None else oracle['agrees']}

    def _write_orbits(self, search: OrbitSearch, count: OrbitCount, points: List[StationaryPoint],
                      oracle: Optional[dict]) -> List[str]:
        system = self.flow_system(self.problem)
        json_file = self.path("orbits.json")
        results.write_json(json_file, {'schema_version': results.RESULT_SCHEMA_VERSION, 'search': search.to_dict(),
                                       'count': count.to_dict(), 'oracle': oracle,
                                       'modes': system.N})
        written = [json_file]

        ids = [point.id for point in points]
        matrix = [[x] + [str(count.mod2(x, y)) for y in ids] for x in ids]
        csv_file = self.path("connection_matrix.csv")
        results.write_csv(csv_file, ['source'] + ids, np.array(matrix, dtype=str).reshape(len(ids), len(ids) + 1),
                          fmt='%s')
        written.append(csv_file)

        arrays = {}
        n = system.basis.shape[0]
        for orbit in search.orbits:
            trajectory = orbit.trajectory
            u = trajectory.states[:, :system.N] @ system.basis.T
            v = trajectory.states[:, system.N:] @ system.basis.T
            table = np.column_stack([trajectory.times, u, v, trajectory.energies])
            header = ['t'] + [f"u{j + 1}" for j in range(n)] + [f"v{j + 1}" for j in range(n)] + ['E']
            trajectory_file = self.path("trajectories", f"orbit_{orbit.id}.csv")
            results.write_csv(trajectory_file, header, table)
            written.append(trajectory_file)
            for name in ('times', 'states', 'energies', 'speed_sq', 'wave_speeds'):
                arrays[f"{orbit.id}_{name}"] = getattr(trajectory, name)
            if orbit.flow is not None:
                arrays[f"{orbit.id}_flow_times"] = orbit.flow.times
                arrays[f"{orbit.id}_flow_traces"] = orbit.flow.traces
        cache = self.path("trajectories.npz")
        results.write_npz(cache, arrays)
        written.append(cache)
        return written

    def load_orbits(self) -> Tuple[OrbitSearch, OrbitCount]:
        """
        Restores the orbit search and the counts from orbits.json and the binary trajectory cache.
        """
        data = results.read_json(self.path("orbits.json"), "orbits")
        arrays = results.read_npz(self.path("trajectories.npz"))
        search_data = data['search']
        orbits = []
        for entry in search_data['orbits']:
            key = entry['id']
            trajectory = Trajectory(*(arrays[f"{key}_{name}"] for name in
                                      ('times', 'states', 'energies', 'speed_sq', 'wave_speeds')),
                                    metadata=entry['integrator'])
            orbit = HeteroclinicOrbit(entry['source'], entry['target'], trajectory, entry['relative_index'],
                                      entry['energy_drop'], trajectory.states[0], trajectory.states[-1],
                                      method=entry['method'])
            orbit.id = key
            flow = entry.get('spectral_flow')
            if flow is not None and f"{key}_flow_traces" in arrays:
                crossings = [(c['t'], c['eigenvalue'], c['direction']) for c in flow['crossings']]
                orbit.flow = SpectralFlow(crossings, flow['lingering'], arrays[f"{key}_flow_times"],
                                          arrays[f"{key}_flow_traces"])
            orbit.tail_rates = None if entry['tail_rates'] is None else tuple(entry['tail_rates'])
            orbit.predicted_rates = None if entry['predicted_rates'] is None else tuple(entry['predicted_rates'])
            orbits.append(orbit)
        search = OrbitSearch(orbits, search_data['undecided'], [tuple(p) for p in search_data['misses']],
                             search_data['rejected'], search_data['certified'], search_data['method'])

        count_data = data['count']
        raw = {(entry['source'], entry['target']): entry['raw'] for entry in count_data['pairs']}
        representatives = {(entry['source'], entry['target']): entry['orbits'] for entry in count_data['pairs']}
        count = OrbitCount(raw, representatives, IsolatingSet(count_data['isolating_set']['level']),
                           count_data['certified'])
        return search, count

    # ---------------------------------------------------------------- homology

    def homology(self) -> dict:
        points = self.load_points()
        search, count = self.load_orbits()
        complex_ = build_complex(points, count, force=self.config.force_uncertified, provenance="orbits.json")
        d_squared = check_d_squared(complex_)
        data = {'schema_version': results.RESULT_SCHEMA_VERSION, 'complex': complex_.to_dict(),
                'd_squared': d_squared.to_dict(), 'certified': complex_.certified}
        json_file = self.path("homology.json")
        if not d_squared.passed:
            results.write_json(json_file, data)
            self._written([json_file])
            raise UncertifiedCountError(f"d^2 != 0 at {d_squared.offending}; an orbit was missed or is spurious")

        homology = compute_homology(complex_)
        family = self.problem.nonlinearity.family
        expected = expected_homology(family)
        levels = self.config.homology.get('energy_levels')
        filtration = energy_filtration(points, search, levels, force=self.config.force_uncertified)
        data.update({
            'homology': homology.to_dict(),
            'direct_sum': direct_sum_check(complex_).to_dict(),
            'expected_total': expected,
            'matches_expected': None if expected is None else homology.total == expected,
            'forcing': forcing_analysis(complex_, homology, count, family).to_dict(),
            'filtration': [{'level': level, 'homology': result.to_dict()} for level, result in filtration],
        })
        if expected is not None and homology.total != expected:
            logger.warning("total rank %d differs from the predicted rank %d of the %s class", homology.total,
                           expected, family)
        results.write_json(json_file, data)

        lines = [] if complex_.certified else [UNCERTIFIED_BANNER]
        lines.append(f"problem: {self.problem.name}")
        for k, ids in complex_.grades.items():
            lines.append(f"C_{k} = <{', '.join(ids)}>")
        lines.append(f"d^2 = 0: {d_squared.passed}")
        for k, rank in homology.ranks.items():
            lines.append(f"H_{k}: rank {rank}")
        lines.append(homology.summary())
        text_file = self.path("homology.txt")
        results.write_text(text_file, "\n".join(lines))
        self._written([json_file, text_file])

        self.log_scalar("homology.total_rank", homology.total)
        return {'ranks': homology.ranks, 'total': homology.total, 'summary': homology.summary(),
                'certified': complex_.certified}

    # ------------------------------------------------------------ continuation

    def _complex_at(self, problem: SpatialProblem):
        points = self._find_points(problem).points
        search = self._search_orbits(problem, points)
        count = count_mod2(search, points)
        complex_ = build_complex(points, count, force=self.config.force_uncertified, provenance=problem.name)
        return points, complex_, compute_homology(complex_)

    def continuation(self) -> dict:
        problems = self.waypoint_problems()
        paths = self._paths(problems)
        states = [self._complex_at(problem) for problem in problems]
        collocation = self.config.collocation_settings()

        legs = []
        maps = []
        for number, path in enumerate(paths):
            first = problems.index(path.start)
            last = problems.index(path.end)
            report = validate_homotopy(path)
            (start_points, start, _), (end_points, end, _) = states[first], states[last]
            psi = build_continuation_map(path, start, end, start_points, end_points, collocation)
            check = continuation_check(start, end, psi)
            maps.append(psi)
            legs.append({'from': first, 'to': last, 'homotopy': report.to_dict(), 'map': psi.to_dict(),
                         'check': check.to_dict()})

        composition = None
        if len(problems) > 2:
            steps = maps[:len(problems) - 1]
            first_part = reduce(lambda composed, step: compose_continuations(step, composed), steps[1:-1], steps[0])
            composition = composition_check(first_part, steps[-1], maps[-1], states[0][1], states[-1][1]).to_dict()

        certified = all(state[1].certified for state in states) and all(psi.certified for psi in maps)
        passed = all(leg['check']['passed'] for leg in legs) and (composition is None or composition['passed'])
        data = {'schema_version': results.RESULT_SCHEMA_VERSION, 'certified': certified, 'passed': passed,
                'waypoints': [{'problem': problem.to_dict(), 'complex': state[1].to_dict(),
                               'homology': state[2].to_dict()} for problem, state in zip(problems, states)],
                'legs': legs, 'composition': composition}
        filename = self.path("continuation.json")
        results.write_json(filename, data)
        self._written([filename])
        return {'legs': len(legs), 'isomorphism verified': passed,
                'composition': None if composition is None else composition['passed'], 'certified': certified}

    # ------------------------------------------------------------------ report

    def report(self) -> dict:
        points = self.load_points()
        written = []
        banner = []
        table = [[p.id, str(p.morse_index), repr(p.energy), repr(p.residual_norm), str(p.hyperbolic)] for p in points]
        filename = self.path("report", "stationary.csv")
        results.write_csv(filename, ['id', 'm', 'energy', 'residual', 'hyperbolic'],
                          np.array(table, dtype=str).reshape(len(points), 5), fmt='%s')
        written.append(filename)

        orbits = []
        if os.path.exists(self.path("orbits.json")):
            search, count = self.load_orbits()
            orbits = search.orbits
            if not search.certified:
                banner.append(UNCERTIFIED_BANNER)
            for orbit in orbits:
                written.extend(self._orbit_report(orbit))
            if self.config.report.get('latex', True):
                written.append(self._latex_matrix(points, count))
            if self.config.report.get('svg', False):
                written.extend(self._figures(orbits))

        if os.path.exists(self.path("homology.json")):
            data = results.read_json(self.path("homology.json"))
            if 'homology' in data:
                ranks = sorted((int(k), v) for k, v in data['homology']['ranks'].items())
                filename = self.path("report", "homology.csv")
                results.write_csv(filename, ['grade', 'rank'], np.array(ranks, dtype=int).reshape(len(ranks), 2),
                                  fmt='%d')
                written.append(filename)
            if not data.get('certified', True) and UNCERTIFIED_BANNER not in banner:
                banner.append(UNCERTIFIED_BANNER)

        summary_file = self.path("report", "summary.txt")
        results.write_text(summary_file, "\n".join(banner + [f"problem: {self.problem.name}",
                                                             f"stationary points: {len(points)}",
                                                             f"orbits: {len(orbits)}"]))
        written.append(summary_file)
        self._written(written)
        return {'files': len(written), 'certified': not banner}

    def _orbit_report(self, orbit: HeteroclinicOrbit) -> List[str]:
        trajectory = orbit.trajectory
        energy_file = self.path("report", f"energy_{orbit.id}.csv")
        results.write_csv(energy_file, ['t', 'E'], np.column_stack([trajectory.times, trajectory.energies]))
        # phase plane of the first Galerkin mode; this is (u, v) itself on the point domain
        half = trajectory.states.shape[1] // 2
        phase_file = self.path("report", f"phase_{orbit.id}.csv")
        results.write_csv(phase_file, ['t', 'u', 'v'],
                          np.column_stack([trajectory.times, trajectory.states[:, 0], trajectory.states[:, half]]))
        written = [energy_file, phase_file]
        if orbit.flow is not None:
            traces = orbit.flow.traces
            crossings_file = self.path("report", f"crossings_{orbit.id}.csv")
            results.write_csv(crossings_file, ['t'] + [f"eig{k + 1}" for k in range(traces.shape[1])],
                              np.column_stack([orbit.flow.times, traces]))
            written.append(crossings_file)
        return written

    def _latex_matrix(self, points: List[StationaryPoint], count: OrbitCount) -> str:
        from util.create_diagrams import to_latex_table
        ids = [point.id for point in points]
        matrix = np.array([[count.mod2(x, y) for y in ids] for x in ids], dtype=int).reshape(len(ids), len(ids))
        filename = self.path("report", "connection_matrix.tex")
        results.write_text(filename, to_latex_table(matrix, ids, ids))
        return filename

    def _figures(self, orbits: List[HeteroclinicOrbit]) -> List[str]:
        matplotlib.rcParams['svg.hashsalt'] = self.problem.name
        written = []
        for name, draw in (('energy', lambda o: (o.trajectory.times, o.trajectory.energies)),
                           ('phase', lambda o: (o.trajectory.states[:, 0],
                                                o.trajectory.states[:, o.trajectory.states.shape[1] // 2]))):
            figure, axes = plt.subplots()
            for orbit in orbits:
                x, y = draw(orbit)
                axes.plot(x, y, label=f"{orbit.source_id} -> {orbit.target_id}")
            axes.set_xlabel('t' if name == 'energy' else 'u')
            axes.set_ylabel('E' if name == 'energy' else 'v')
            if orbits:
                axes.legend()
            filename = self.path("report", f"{name}.svg")
            figure.savefig(filename, format='svg', metadata={'Date': None})
            plt.close(figure)
            written.append(filename)
        return written


def run_stage(stage: str, config: ExperimentConfig, out_dir: str, **hooks) -> dict:
    return Pipeline(config, out_dir, **hooks).run(stage)


def summary_lines(summary: Dict) -> List[str]:
    return [f"{key}: {value}" for key, value in summary.items()]
