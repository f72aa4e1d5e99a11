"""Demand curves, expected revenue, optimal prices and scenario validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .optimize import GridConfig, grid_maximize

EPS = 1e-12
INFORMATIVENESS_TOL = 1e-6
KINDS = ("linear", "logistic", "tabulated")


@dataclass(frozen=True)
class DemandModel:
    """Acceptance probability as a function of the offered price.

    ``linear``: params ``(a, b)`` with rho(p) = a + b p.
    ``logistic``: params ``(c0, c1)`` with rho(p) = 1 / (1 + exp(c0 + c1 p)).
    ``tabulated``: params is a sequence of ``(price, probability)`` knots,
    linearly interpolated and held constant beyond the end knots.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown demand model kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "tabulated":
            knots = tuple((float(p), float(q)) for p, q in self.params)
            if len(knots) < 2:
                raise ValueError("tabulated demand model needs at least two knots")
            prices = np.array([k[0] for k in knots])
            probs = np.array([k[1] for k in knots])
            if np.any(np.diff(prices) <= 0):
                raise ValueError("tabulated knots must be strictly increasing in price")
            if np.any((probs < 0) | (probs > 1)):
                raise ValueError("tabulated probabilities must lie in [0, 1]")
            object.__setattr__(self, "params", knots)
        else:
            params = tuple(float(x) for x in self.params)
            if len(params) != 2:
                raise ValueError(f"{self.kind} demand model takes 2 params, got {len(params)}")
            object.__setattr__(self, "params", params)

    @classmethod
    def linear(cls, intercept: float, slope: float) -> "DemandModel":
        return cls("linear", (intercept, slope))

    @classmethod
    def logistic(cls, c0: float, c1: float) -> "DemandModel":
        return cls("logistic", (c0, c1))

    @classmethod
    def tabulated(cls, knots: Sequence[tuple]) -> "DemandModel":
        return cls("tabulated", tuple(knots))

    def raw(self, p):
        """Curve value before clamping."""
        p = np.asarray(p, dtype=float)
        if self.kind == "linear":
            a, b = self.params
            return a + b * p
        if self.kind == "logistic":
            c0, c1 = self.params
            # exp overflow saturates to 0 probability, which clamping handles
            with np.errstate(over="ignore"):
                return 1.0 / (1.0 + np.exp(c0 + c1 * p))
        xs = np.array([k[0] for k in self.params])
        ys = np.array([k[1] for k in self.params])
        return np.interp(p, xs, ys)

    def __call__(self, p):
        return eval_model(self, p)


def eval_model(model: DemandModel, p):
    """rho(p) clamped to [EPS, 1 - EPS]; scalars in, floats out."""
    out = np.clip(model.raw(p), EPS, 1.0 - EPS)
    return float(out) if np.ndim(out) == 0 else out


def revenue(model: DemandModel, p):
    """Expected revenue p * rho(p)."""
    out = np.asarray(p, dtype=float) * eval_model(model, p)
    return float(out) if np.ndim(out) == 0 else out


def optimal_price(model: DemandModel, interval: tuple, grid: GridConfig = GridConfig()):
    """Return ``(p_star, r_star)`` maximizing expected revenue on ``interval``."""
    lo, hi = interval
    return grid_maximize(lambda p: revenue(model, p), float(lo), float(hi), grid)


@dataclass(frozen=True)
class Scenario:
    """A finite hypothesis set of demand curves on a common price interval."""

    models: tuple
    interval: tuple
    optimal_prices: tuple
    revenue_at_optimal: tuple
    prob_matrix: np.ndarray  # prob_matrix[i, k] = rho_i(p_k*)
    true_model_index: Optional[int] = None
    informativeness_tol: float = INFORMATIVENESS_TOL
    grid: GridConfig = field(default_factory=GridConfig)

    @classmethod
    def build(
        cls,
        models: Sequence[DemandModel],
        interval: tuple,
        true_model_index: Optional[int] = None,
        grid: GridConfig = GridConfig(),
        informativeness_tol: float = INFORMATIVENESS_TOL,
    ) -> "Scenario":
        models = tuple(models)
        if len(models) < 2:
            raise ValueError(f"a scenario needs at least 2 demand models, got {len(models)}")
        lo, hi = float(interval[0]), float(interval[1])
        if not lo < hi:
            raise ValueError(f"interval must satisfy l < u, got ({lo}, {hi})")
        if true_model_index is not None and not 0 <= true_model_index < len(models):
            raise ValueError(f"true_model_index {true_model_index} out of range [0, {len(models)})")
        opt = [optimal_price(m, (lo, hi), grid) for m in models]
        prices = tuple(p for p, _ in opt)
        mat = np.array([[eval_model(m, p) for p in prices] for m in models])
        mat.setflags(write=False)
        return cls(
            models=models,
            interval=(lo, hi),
            optimal_prices=prices,
            revenue_at_optimal=tuple(r for _, r in opt),
            prob_matrix=mat,
            true_model_index=true_model_index,
            informativeness_tol=informativeness_tol,
            grid=grid,
        )

    @property
    def n_models(self) -> int:
        return len(self.models)

    def with_true_model(self, index: Optional[int]) -> "Scenario":
        if index is not None and not 0 <= index < self.n_models:
            raise ValueError(f"true_model_index {index} out of range [0, {self.n_models})")
        return Scenario(
            self.models, self.interval, self.optimal_prices, self.revenue_at_optimal,
            self.prob_matrix, index, self.informativeness_tol, self.grid,
        )


@dataclass
class ValidationReport:
    violations: list  # (k, i, j, gap) with |rho_i(p_k*) - rho_j(p_k*)| <= tol
    boundary_warnings: list  # indices k whose p_k* sits on an interval endpoint
    clamped: list  # (i, k, raw value) entries of the probability matrix that were clamped

    @property
    def valid(self) -> bool:
        return not self.violations

    def lines(self) -> list:
        out = [f"valid: {'yes' if self.valid else 'no'}"]
        for k, i, j, gap in self.violations:
            out.append(f"uninformative: price k={k} models i={i} j={j} gap={gap:.3g}")
        for k in self.boundary_warnings:
            out.append(f"warning: optimal price of model {k} lies on the interval boundary")
        for i, k, v in self.clamped:
            out.append(f"warning: rho_{i}(p_{k}*) = {v:.6g} clamped to [{EPS}, {1 - EPS}]")
        return out


def validate_scenario(scenario: Scenario) -> ValidationReport:
    n = scenario.n_models
    mat = scenario.prob_matrix
    tol = scenario.informativeness_tol
    violations = []
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                gap = abs(mat[i, k] - mat[j, k])
                if not gap > tol:
                    violations.append((k, i, j, float(gap)))
    lo, hi = scenario.interval
    boundary = [k for k, p in enumerate(scenario.optimal_prices) if p <= lo or p >= hi]
    clamped = []
    for i, m in enumerate(scenario.models):
        for k, p in enumerate(scenario.optimal_prices):
            v = float(m.raw(p))
            if v < EPS or v > 1.0 - EPS:
                clamped.append((i, k, v))
    return ValidationReport(violations, boundary, clamped)


class InvalidScenarioError(ValueError):
    """Raised when an operation needs an informative scenario and got another."""

    def __init__(self, report: ValidationReport):
        self.report = report
        first = report.violations[0]
        super().__init__(
            f"scenario is not informative: {len(report.violations)} violation(s), "
            f"first at price k={first[0]} between models {first[1]} and {first[2]}"
        )


def require_valid(scenario: Scenario) -> ValidationReport:
    report = validate_scenario(scenario)
    if not report.valid:
        raise InvalidScenarioError(report)
    return report
