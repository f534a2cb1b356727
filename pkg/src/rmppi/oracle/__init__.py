"""Brute-force tabular checks on small deterministic MDPs."""

from rmppi.oracle.discretize import GridSpec, discretize_env
from rmppi.oracle.fixtures import (
    FixtureCase,
    OracleReport,
    load_fixture_suite,
    random_mdp,
    run_fixture_suite,
    write_report,
)
from rmppi.oracle.rql import RqlReport, augmented_optimal_action, check_rql_equivalence
from rmppi.oracle.sequences import (
    ENUMERATION_LIMIT,
    boltzmann_product,
    factorization_gap,
    sequence_distribution,
    total_variation,
)

__all__ = [
    "ENUMERATION_LIMIT",
    "FixtureCase",
    "GridSpec",
    "OracleReport",
    "RqlReport",
    "augmented_optimal_action",
    "boltzmann_product",
    "check_rql_equivalence",
    "discretize_env",
    "load_fixture_suite",
    "factorization_gap",
    "random_mdp",
    "run_fixture_suite",
    "sequence_distribution",
    "total_variation",
    "write_report",
]
