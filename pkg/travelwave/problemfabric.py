import json
from typing import Any, Dict, Iterable

from nonlinearities import families
from nonlinearities.families import Nonlinearity, evaluate_constant
from travelwave.domain import CIRCLE, INTERVAL, POINT, Domain
from travelwave.errors import ConfigurationError
from travelwave.problem import SpatialProblem

SCHEMA_VERSION = 1

PROBLEM_KEYS = {'schema_version', 'name', 'domain', 'nonlinearity', 'wave_speed'}
DOMAIN_KEYS = {
    POINT: {'kind'},
    INTERVAL: {'kind', 'a', 'b', 'n', 'boundary'},
    CIRCLE: {'kind', 'length', 'n'}
}
NONLINEARITY_KEYS = {
    'family': {'family', 'p', 'alpha', 'h_coeffs', 'alpha_scale'},
    'coefficients': {'family', 'coefficients', 'p'},
    'expression': {'family', 'expression', 'parameters', 'derivative', 'p'}
}


def check_keys(section: str, given: Iterable[str], allowed: set, required: Iterable[str] = ()) -> None:
    """
    Raises ConfigurationError if `given` contains keys that are not allowed or misses required keys.
    """
    given = set(given)
    unknown = sorted(given - allowed)
    if unknown:
        raise ConfigurationError(f"unknown keys {unknown} in {section}")
    missing = sorted(set(required) - given)
    if missing:
        raise ConfigurationError(f"missing keys {missing} in {section}")


def _section(definition: Dict[str, Any], key: str) -> Dict[str, Any]:
    value = definition.get(key)
    if not isinstance(value, dict):
        raise ConfigurationError(f"'{key}' must be an object")
    return value


def fabricate_domain(spec: Dict[str, Any]) -> Domain:
    kind = spec.get('kind')
    if kind not in DOMAIN_KEYS:
        raise ConfigurationError(f"unknown domain kind '{kind}'")
    check_keys("domain", spec, DOMAIN_KEYS[kind], DOMAIN_KEYS[kind])
    if kind == POINT:
        return Domain.point()
    n = spec['n']
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigurationError(f"grid size must be an integer, got {n!r}")
    if kind == CIRCLE:
        return Domain.circle(evaluate_constant(spec['length']), n)
    return Domain.interval(evaluate_constant(spec['a']), evaluate_constant(spec['b']), n, spec['boundary'])


def fabricate_nonlinearity(spec: Dict[str, Any]) -> Nonlinearity:
    """
    Creates a nonlinearity from its problem file section.
    Raises ConfigurationError if the section can not be recognised.
    """
    family = spec.get('family')
    if family in families.FAMILIES:
        check_keys("nonlinearity", spec, NONLINEARITY_KEYS['family'], ['family', 'p'])
        alpha = spec.get('alpha', 1.0)
        if not isinstance(alpha, str):
            alpha = evaluate_constant(alpha)
        h_coeffs = [evaluate_constant(c) for c in spec.get('h_coeffs', [0.0])]
        nonlinearity = families.FamilyNonlinearity(family, evaluate_constant(spec['p']), alpha, h_coeffs)
        return nonlinearity.scaled(evaluate_constant(spec.get('alpha_scale', 1.0)))

    if family != families.CUSTOM:
        raise ConfigurationError(f"nonlinearity family '{family}' not recognised")
    if 'coefficients' in spec:
        check_keys("nonlinearity", spec, NONLINEARITY_KEYS['coefficients'], ['coefficients'])
        p = spec.get('p')
        return families.polynomial([evaluate_constant(c) for c in spec['coefficients']],
                                   None if p is None else evaluate_constant(p))
    if 'expression' in spec:
        check_keys("nonlinearity", spec, NONLINEARITY_KEYS['expression'], ['expression'])
        parameters = {k: evaluate_constant(v) for k, v in spec.get('parameters', {}).items()}
        return families.expression(spec['expression'], parameters, spec.get('derivative'),
                                   evaluate_constant(spec.get('p', 3.0)))
    raise ConfigurationError("a custom nonlinearity needs 'coefficients' or 'expression'")


def fabricate(definition: Dict[str, Any]) -> SpatialProblem:
    """
    Creates a problem from a parsed problem file.
    Raises ConfigurationError if the definition does not follow the schema.
    :param definition: the parsed problem file
    :return: the problem instance
    """
    if not isinstance(definition, dict):
        raise ConfigurationError("a problem definition must be an object")
    check_keys("problem", definition, PROBLEM_KEYS, ['schema_version', 'domain', 'nonlinearity', 'wave_speed'])
    if definition['schema_version'] != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported problem schema version {definition['schema_version']}")
    domain = fabricate_domain(_section(definition, 'domain'))
    nonlinearity = fabricate_nonlinearity(_section(definition, 'nonlinearity'))
    return SpatialProblem(domain, nonlinearity, evaluate_constant(definition['wave_speed']),
                          name=str(definition.get('name', 'problem')))


def load_problem(filename: str) -> SpatialProblem:
    try:
        with open(filename, 'r') as f:
            definition = json.load(f)
    except (OSError, json.JSONDecodeError) as error:
        raise ConfigurationError(f"can not read problem file {filename}: {error}")
    return fabricate(definition)
