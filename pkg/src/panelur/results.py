from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

LEVELS = (0.01, 0.05, 0.10)
REJECT = "reject"
ACCEPT = "accept"


@dataclass(frozen=True)
class UnitDiagnostic:
    unit: str
    t_stat: float
    lag: int
    p_value: float | None = None
    n_obs: int | None = None
    rho2: float | None = None
    covariate_lag: int | None = None


@dataclass(frozen=True)
class TestResult:
    """Panel test outcome with decisions at the 1%, 5% and 10% levels.

    A decision is ``"reject"`` when the statistic lies strictly beyond the
    critical value in the direction of ``tail``.
    """

    __test__ = False  # keep pytest from collecting this class

    test_name: str
    statistic: float
    p_value: float | None
    critical_values: Mapping[float, float]
    tail: str
    decisions: Mapping[float, str] = field(default=None)
    per_unit: Sequence[UnitDiagnostic] = ()
    diagnostics: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.tail not in ("left", "right"):
            raise ValueError("tail must be 'left' or 'right'")
        object.__setattr__(self, "critical_values", dict(self.critical_values))
        object.__setattr__(self, "per_unit", tuple(self.per_unit))
        expected = decide(self.statistic, self.critical_values, self.tail)
        if self.decisions is None:
            object.__setattr__(self, "decisions", expected)
        elif dict(self.decisions) != expected:
            raise ValueError("decisions do not follow from statistic, critical values and tail")

    def rejects(self, level: float) -> bool:
        return self.decisions[level] == REJECT


def decide(statistic: float, critical_values: Mapping[float, float], tail: str) -> dict[float, str]:
    out = {}
    for level, cv in critical_values.items():
        beyond = statistic > cv if tail == "right" else statistic < cv
        out[level] = REJECT if beyond else ACCEPT
    return out
