"""Named solver variants: the two adaptive methods and the three baselines.

The baselines share the drivers of the adaptive methods and differ only in
how mu_k is chosen.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

from .core import MuKind, MuStrategy, NlsProblem, SolveReport, SolverConfig
from .lmls import lmls_solve
from .lmtr import lmtr_solve

_VARIANTS = {
    "lmls": (lmls_solve, MuKind.ADAPTIVE),
    "lmtr": (lmtr_solve, MuKind.ADAPTIVE),
    "lm-yf": (lmls_solve, MuKind.YF),
    "lm-fy": (lmls_solve, MuKind.FY),
    "levmar": (lmtr_solve, MuKind.LEVMAR),
}

SOLVER_NAMES = tuple(_VARIANTS)


@dataclass(frozen=True)
class Solver:
    name: str
    driver: Callable[..., SolveReport]
    config: SolverConfig

    def __call__(self, problem: NlsProblem, x0=None) -> SolveReport:
        return self.driver(problem, x0, self.config, name=self.name)


def make_solver(name: str, config: SolverConfig | None = None, label: str | None = None) -> Solver:
    """Solver ``name`` with ``config``; the mu strategy is forced to the variant's kind.

    For the adaptive variants the eta and schedule of ``config.mu`` are kept.
    """
    try:
        driver, kind = _VARIANTS[name]
    except KeyError:
        raise KeyError(f"unknown solver {name!r}; available: {', '.join(SOLVER_NAMES)}") from None
    config = config or SolverConfig()
    if config.mu.kind is not kind:
        config = dataclasses.replace(config, mu=dataclasses.replace(config.mu, kind=kind))
    return Solver(label or name, driver, config)
