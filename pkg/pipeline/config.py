"""
Experiment files: which problem to study, which stages to run and with which tolerances.
"""
import json
import os
from typing import Any, Dict, List, Optional

from searching.collocation import CollocationSettings
from searching.orbits import ShootingSettings
from searching.stationary import SearchStrategy, SolverSettings
from travelwave.errors import ConfigurationError
from travelwave.problemfabric import SCHEMA_VERSION, check_keys, fabricate, load_problem

STAGES = ['validate', 'stationary', 'orbits', 'homology', 'continue', 'report']

EXPERIMENT_KEYS = {'schema_version', 'name', 'problem', 'stages', 'seed', 'tolerances', 'search', 'orbits',
                   'homology', 'homotopy', 'report', 'validation'}
TOLERANCE_KEYS = {'newton_tol', 'step_tol', 'max_iters', 'dedup_factor', 'gap_factor', 'rtol', 'atol',
                  'collocation_tol'}
SEARCH_KEYS = {'modes', 'amplitudes', 'random_starts', 'deflation', 'max_deflations'}
ORBIT_KEYS = {'method', 'modes', 'pairs', 'oracle', 'half_width', 'widths', 'perturbations', 't_max'}
HOMOLOGY_KEYS = {'energy_levels'}
HOMOTOPY_KEYS = {'ell', 'waypoints'}
WAYPOINT_KEYS = {'wave_speed', 'alpha_scale'}
REPORT_KEYS = {'svg', 'latex'}
VALIDATION_KEYS = {'u_range', 'samples'}

AUTO = 'auto'
SHOOTING = 'shooting'
COLLOCATION = 'collocation'


def _section(definition: Dict[str, Any], key: str, allowed: set) -> Dict[str, Any]:
    value = definition.get(key, {})
    if not isinstance(value, dict):
        raise ConfigurationError(f"'{key}' must be an object")
    check_keys(key, value, allowed)
    return value


def _number(section: Dict[str, Any], key: str, default, kind=float):
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"'{key}' must be a number, got {value!r}")
    if kind is int and not isinstance(value, int):
        raise ConfigurationError(f"'{key}' must be an integer, got {value!r}")
    return kind(value)


class ExperimentConfig(object):
    """
    A validated experiment file. Run level options (seed, threads, tolerance scale) are applied on top of it.
    """

    def __init__(self, definition: Dict[str, Any], base_dir: str = ".", seed: Optional[int] = None,
                 threads: int = 1, tol_scale: float = 1.0, force_uncertified: bool = False) -> None:
        """
        Validates `definition`; raises ConfigurationError for unknown or missing keys and wrong types.
        :param definition: the parsed experiment file
        :param base_dir: directory that relative problem paths are resolved against
        :param seed: overrides the seed of the file
        :param threads: number of worker threads
        :param tol_scale: factor applied to every solver tolerance
        :param force_uncertified: build complexes from uncertified counts
        """
        if not isinstance(definition, dict):
            raise ConfigurationError("an experiment definition must be an object")
        check_keys("experiment", definition, EXPERIMENT_KEYS, ['schema_version', 'problem'])
        if definition['schema_version'] != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported experiment schema version {definition['schema_version']}")
        if not tol_scale > 0:
            raise ConfigurationError(f"the tolerance scale must be positive, got {tol_scale}")
        if not isinstance(threads, int) or threads < 1:
            raise ConfigurationError(f"the number of threads must be a positive integer, got {threads!r}")

        self.name = str(definition.get('name', 'experiment'))
        problem = definition['problem']
        if isinstance(problem, str):
            self.problem_file = problem if os.path.isabs(problem) else os.path.join(base_dir, problem)
            self.problem_definition = None
        elif isinstance(problem, dict):
            self.problem_file = None
            self.problem_definition = problem
        else:
            raise ConfigurationError("'problem' must be a file name or an inline problem definition")

        self.stages = definition.get('stages', ['validate', 'stationary', 'orbits', 'homology'])
        if not isinstance(self.stages, list) or any(stage not in STAGES for stage in self.stages):
            raise ConfigurationError(f"stages must be a list of {STAGES}, got {self.stages!r}")
        self.seed = seed if seed is not None else _number(definition, 'seed', 0, int)
        self.threads = threads
        self.tol_scale = float(tol_scale)
        self.force_uncertified = bool(force_uncertified)

        self.tolerances = _section(definition, 'tolerances', TOLERANCE_KEYS)
        self.search = _section(definition, 'search', SEARCH_KEYS)
        self.orbits = _section(definition, 'orbits', ORBIT_KEYS)
        self.homology = _section(definition, 'homology', HOMOLOGY_KEYS)
        self.report = _section(definition, 'report', REPORT_KEYS)
        self.validation = _section(definition, 'validation', VALIDATION_KEYS)
        self.homotopy = _section(definition, 'homotopy', HOMOTOPY_KEYS) if 'homotopy' in definition else None

        if self.orbits.get('method', AUTO) not in (AUTO, SHOOTING, COLLOCATION):
            raise ConfigurationError(f"orbit method '{self.orbits['method']}' not recognised")
        if self.homotopy is not None:
            waypoints = self.homotopy.get('waypoints')
            if not isinstance(waypoints, list) or len(waypoints) < 2:
                raise ConfigurationError("a homotopy needs at least two waypoints")
            for waypoint in waypoints:
                if not isinstance(waypoint, dict):
                    raise ConfigurationError("waypoints must be objects")
                check_keys("waypoint", waypoint, WAYPOINT_KEYS)
        levels = self.homology.get('energy_levels')
        if levels is not None and (not isinstance(levels, list)
                                   or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in levels)):
            raise ConfigurationError("'energy_levels' must be a list of numbers")
        # type checks of the numeric options happen here, before any computation
        self.solver_settings()
        self.search_strategy()
        self.shooting_settings()
        self.collocation_settings()

    def load_problem(self):
        if self.problem_definition is not None:
            return fabricate(self.problem_definition)
        return load_problem(self.problem_file)

    def solver_settings(self) -> SolverSettings:
        t = self.tolerances
        settings = SolverSettings(newton_tol=_number(t, 'newton_tol', 1e-9), step_tol=_number(t, 'step_tol', 1e-9),
                                  max_iters=_number(t, 'max_iters', 100, int),
                                  dedup_factor=_number(t, 'dedup_factor', 1e-6),
                                  gap_factor=_number(t, 'gap_factor', 10.0))
        return settings.scaled(self.tol_scale)

    def search_strategy(self) -> SearchStrategy:
        s = self.search
        values = {}
        for key in ('modes', 'amplitudes'):
            if key in s:
                if not isinstance(s[key], list) or not s[key]:
                    raise ConfigurationError(f"'{key}' must be a non-empty list")
                values[key] = tuple(s[key])
        return SearchStrategy(random_starts=_number(s, 'random_starts', 8, int), seed=self.seed,
                              deflation=bool(s.get('deflation', True)),
                              max_deflations=_number(s, 'max_deflations', 8, int), **values)

    def shooting_settings(self) -> ShootingSettings:
        settings = ShootingSettings(rtol=_number(self.tolerances, 'rtol', 1e-9),
                                    atol=_number(self.tolerances, 'atol', 1e-9),
                                    t_max=_number(self.orbits, 't_max', 1e3))
        return settings.scaled(self.tol_scale)

    def collocation_settings(self) -> CollocationSettings:
        o = self.orbits
        settings = CollocationSettings(modes=_number(o, 'modes', 16, int),
                                       tol=_number(self.tolerances, 'collocation_tol', 1e-6),
                                       atol=_number(self.tolerances, 'atol', 1e-9),
                                       widths=tuple(o.get('widths', (1.0, 2.0, 4.0))),
                                       perturbations=_number(o, 'perturbations', 2, int),
                                       seed=self.seed, half_width=_number(o, 'half_width', None))
        return settings.scaled(self.tol_scale)

    @property
    def orbit_pairs(self) -> Optional[List[List[str]]]:
        return self.orbits.get('pairs')

    @property
    def orbit_method(self) -> str:
        return self.orbits.get('method', AUTO)

    def to_dict(self) -> dict:
        """
        The resolved configuration, as written to the output directory.
        """
        return {'schema_version': SCHEMA_VERSION, 'name': self.name,
                'problem': self.problem_file if self.problem_file is not None else self.problem_definition,
                'stages': self.stages, 'seed': self.seed, 'threads': self.threads, 'tol_scale': self.tol_scale,
                'force_uncertified': self.force_uncertified, 'solver': self.solver_settings().to_dict(),
                'search': self.search_strategy().to_dict(), 'shooting': self.shooting_settings().to_dict(),
                'collocation': self.collocation_settings().to_dict(), 'orbits': self.orbits,
                'homology': self.homology, 'homotopy': self.homotopy, 'report': self.report,
                'validation': self.validation}


def load_experiment_config(filename: str, seed: Optional[int] = None, threads: int = 1, tol_scale: float = 1.0,
                           force_uncertified: bool = False) -> ExperimentConfig:
    """
    Reads and validates an experiment file.
    Raises ConfigurationError if the file can not be read or does not follow the schema.
    """
    try:
        with open(filename, 'r') as f:
            definition = json.load(f)
    except (OSError, json.JSONDecodeError) as error:
        raise ConfigurationError(f"can not read experiment file {filename}: {error}")
    return ExperimentConfig(definition, os.path.dirname(os.path.abspath(filename)), seed, threads, tol_scale,
                            force_uncertified)
