"""Committed oracle fixture suites.

A suite is a JSON document listing cases. Each case either names a seed
from which a batch of random MDPs is drawn, or spells out a single MDP
inline. Two kinds are understood: ``factorization`` compares the closed-form
sequence distribution with the Boltzmann product, ``rql`` compares the full
task with its augmented counterpart.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from rmppi.errors import ArtifactIOError, ConfigError
from rmppi.mdp import DiscreteMDP
from rmppi.oracle.rql import check_rql_equivalence
from rmppi.oracle.sequences import factorization_gap
from rmppi.priors.soft_q import soft_q_iteration
from rmppi.tracker import track

logger = logging.getLogger(__name__)

CASE_KINDS = ("factorization", "rql")
EXPECTATIONS = ("pass", "fail")

_CASE_FIELDS = {
    "name",
    "kind",
    "seed",
    "count",
    "n_states",
    "n_actions",
    "horizon",
    "alpha",
    "omega",
    "omega_prime",
    "tolerance",
    "expect",
    "mdp",
}


def random_mdp(
    rng: np.random.Generator, n_states: int, n_actions: int, with_addon: bool = True
) -> DiscreteMDP:
    """Deterministic MDP with Gaussian rewards and uniformly drawn successors."""
    transition = rng.integers(0, n_states, size=(n_states, n_actions))
    reward = rng.normal(size=(n_states, n_actions))
    addon = rng.normal(size=(n_states, n_actions)) if with_addon else None
    return DiscreteMDP(transition, reward, 1.0, addon)


@dataclass
class FixtureCase:
    name: str
    kind: str
    seed: int = 0
    count: int = 1
    n_states: int = 4
    n_actions: int = 3
    horizon: int = 3
    alpha: float = 1.0
    omega: float = 1.0
    # None means "same as alpha"
    omega_prime: float | None = None
    tolerance: float = 1e-10
    expect: str = "pass"
    mdp: dict | None = None

    def __post_init__(self):
        if self.kind not in CASE_KINDS:
            raise ConfigError(f"Case '{self.name}': unknown kind '{self.kind}'")
        if self.expect not in EXPECTATIONS:
            raise ConfigError(f"Case '{self.name}': expect must be one of {EXPECTATIONS}")
        if self.count < 1 or self.horizon < 1:
            raise ConfigError(f"Case '{self.name}': count and horizon must be positive")
        if not self.alpha > 0 or not self.tolerance > 0:
            raise ConfigError(f"Case '{self.name}': alpha and tolerance must be positive")

    def mdps(self):
        if self.mdp is not None:
            spec = self.mdp
            try:
                yield DiscreteMDP(
                    np.asarray(spec["transition"], dtype=np.int64),
                    np.asarray(spec["reward"], dtype=np.float64),
                    float(spec.get("action_cell_volume", 1.0)),
                    None if spec.get("addon") is None else np.asarray(spec["addon"], np.float64),
                )
            except KeyError as e:
                raise ConfigError(f"Case '{self.name}': inline MDP lacks {e}") from e
            return
        rng = np.random.default_rng(self.seed)
        for _ in range(self.count):
            yield random_mdp(rng, self.n_states, self.n_actions)


@dataclass
class CaseResult:
    name: str
    kind: str
    expect: str
    measured: float
    tolerance: float
    status: str


@dataclass
class OracleReport:
    results: list[CaseResult] = field(default_factory=list)

    @property
    def violations(self) -> list[CaseResult]:
        return [r for r in self.results if r.status in ("fail", "unexpected-pass")]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps({"results": [asdict(r) for r in self.results], "ok": self.ok}, indent=2)


def load_fixture_suite(path) -> list[FixtureCase]:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as e:
        raise ArtifactIOError(path, str(e)) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    cases = raw.get("cases") if isinstance(raw, dict) else None
    if not isinstance(cases, list) or not cases:
        raise ConfigError(f"{path}: expected a non-empty 'cases' list")
    loaded = []
    for i, case in enumerate(cases):
        unknown = set(case) - _CASE_FIELDS
        if unknown:
            raise ConfigError(f"{path}: case {i} has unknown keys {sorted(unknown)}")
        if "name" not in case or "kind" not in case:
            raise ConfigError(f"{path}: case {i} needs 'name' and 'kind'")
        loaded.append(FixtureCase(**case))
    names = [c.name for c in loaded]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: duplicate case names")
    return loaded


def measure_case(case: FixtureCase) -> float:
    """Worst gap observed over every MDP the case generates."""
    worst = 0.0
    for mdp in case.mdps():
        if case.kind == "factorization":
            sol = soft_q_iteration(mdp, case.alpha, horizon=case.horizon, gamma=1.0)
            gap = factorization_gap(mdp, sol, case.horizon)
        else:
            addon = mdp.addon if mdp.addon is not None else np.zeros_like(mdp.reward)
            omega_prime = case.alpha if case.omega_prime is None else case.omega_prime
            report = check_rql_equivalence(
                mdp, case.omega, addon, omega_prime, case.alpha, horizon=case.horizon
            )
            gap = report.max_tv
        worst = max(worst, gap)
    return worst


def _status(expect: str, measured: float, tolerance: float) -> str:
    within = measured <= tolerance
    if expect == "pass":
        return "pass" if within else "fail"
    # negative controls must show a gap above the tolerance
    return "unexpected-pass" if within else "expected-fail"


def run_fixture_suite(cases: list[FixtureCase]) -> OracleReport:
    report = OracleReport()
    for case in track(cases, description="Oracle fixtures"):
        measured = measure_case(case)
        status = _status(case.expect, measured, case.tolerance)
        if status in ("fail", "unexpected-pass"):
            logger.warning(
                "Fixture %s: %s (gap %.3e, tolerance %.1e)",
                case.name,
                status,
                measured,
                case.tolerance,
            )
        else:
            logger.info("Fixture %s: %s (gap %.3e)", case.name, status, measured)
        report.results.append(
            CaseResult(case.name, case.kind, case.expect, measured, case.tolerance, status)
        )
    return report


def write_report(report: OracleReport, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.to_json() + "\n")
    except OSError as e:
        raise ArtifactIOError(path, str(e)) from e
