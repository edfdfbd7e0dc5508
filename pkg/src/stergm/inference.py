"""Maximum likelihood fitting, standard errors and hypothesis tests."""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import DEFAULT_STATE_BUDGET, GraphError, Panel
from .likelihood import CompiledPanel, ThetaVector, compiled_bounds
from .optimize import bfgs
from .statistics import ModelSpec

OK = "ok"
AT_LOWER = "at_lower_boundary"
AT_UPPER = "at_upper_boundary"
CONSTANT = "constant"


class FitError(RuntimeError):
    pass


class NestingError(ValueError):
    """Two fits cannot be compared by a likelihood ratio test."""


# --- chi-square tail ---------------------------------------------------------


def chisq_sf(x: float, df: int) -> float:
    """Upper tail ``P(X >= x)`` of a chi-square variable with integer ``df``.

    Uses the closed forms of the regularized upper incomplete gamma function
    ``Q(df/2, x/2)`` for integer and half-integer shape.
    """
    if int(df) != df or df < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {df}")
    if x < 0 or math.isnan(x):
        raise ValueError(f"x must be nonnegative, got {x}")
    df = int(df)
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    y = 0.5 * x
    if y == 0.0:  # subnormal x
        return 1.0
    log_y = math.log(y)
    m = df // 2
    if df % 2 == 0:
        # Q(m, y) = exp(-y) * sum_{i<m} y^i / i!
        total = sum(math.exp(-y + i * log_y - math.lgamma(i + 1)) for i in range(m))
    else:
        # Q(m + 1/2, y) = erfc(sqrt y) + exp(-y) * sum_{i<m} y^(i+1/2) / Gamma(i + 3/2)
        total = math.erfc(math.sqrt(y)) + sum(
            math.exp(-y + (i + 0.5) * log_y - math.lgamma(i + 1.5)) for i in range(m)
        )
    return min(1.0, max(0.0, total))


def normal_two_sided_p(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


# --- fitting -----------------------------------------------------------------


@dataclass
class FitConfig:
    init: ThetaVector | None = None
    grad_tol: float = 1e-8
    max_iters: int = 500
    param_cap: float = 25.0
    existence_check: bool = True
    budget: int = DEFAULT_STATE_BUDGET
    threads: int | None = None

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.param_cap > 0:
            raise ValueError("param_cap must be positive")


@dataclass
class FitResult:
    spec: ModelSpec
    theta_hat: np.ndarray  # +-inf for boundary parameters, nan when not identified
    se: np.ndarray
    cov: np.ndarray
    loglik: float
    residual_deviance: float
    n_params: int
    converged: bool
    existence_flags: list[str]
    iterations: int
    message: str = ""
    gradient: np.ndarray = field(default_factory=lambda: np.zeros(0))
    singular_information: bool = False
    n_transitions: int = 0
    panel_digest: str | None = None

    @property
    def names(self) -> list[str]:
        return self.spec.param_names()

    @property
    def degenerate(self) -> bool:
        return any(f != OK for f in self.existence_flags)

    @property
    def status(self) -> str:
        if self.degenerate:
            return "mle_nonexistent"
        if not self.converged:
            return "not_converged"
        if self.singular_information:
            return "singular_information"
        return "ok"

    def divergence(self) -> dict[str, str]:
        """Direction in which each nonexistent estimate runs off."""
        out = {}
        for name, flag in zip(self.names, self.existence_flags):
            if flag == AT_UPPER:
                out[name] = "+inf"
            elif flag == AT_LOWER:
                out[name] = "-inf"
            elif flag == CONSTANT:
                out[name] = "unidentified"
        return out


def _flag_and_restrict(cp: CompiledPanel, names: list[str]):
    """Condition away parameters whose observed statistic is extreme.

    Returns the reduced compiled panel, the surviving parameter positions and
    per-parameter flags.  Repeats until the reduced problem has no boundary
    statistic left.
    """
    d = len(names)
    flags = [OK] * d
    active = list(range(d))
    work = cp
    while active:
        local = compiled_bounds(work, [names[a] for a in active]).flags()
        hits = [(pos, f) for pos, f in enumerate(local) if f != OK]
        if not hits:
            break
        for pos, f in sorted(hits, reverse=True):
            flags[active[pos]] = f
            d_f = work.formation.n_terms
            side_name, col = ("formation", pos) if pos < d_f else ("persistence", pos - d_f)
            side = getattr(work, side_name)
            if f == CONSTANT:
                side = side.drop(col)
            else:
                tol = 1e-9 if side.absdiff_cols[col] else 0.0
                side = side.restrict(col, upper=(f == AT_UPPER), tol=tol)
            work = replace(work, **{side_name: side})
            del active[pos]
    return work, active, flags


def maximize(panel: Panel, spec: ModelSpec, config: FitConfig | None = None,
             compiled: CompiledPanel | None = None, digest: str | None = None) -> FitResult:
    """Exact maximum likelihood estimate by BFGS on the enumerated likelihood."""
    config = config or FitConfig()
    if compiled is None:
        compiled = CompiledPanel.build(panel, spec, config.budget, config.threads)
    if digest is None:
        from .serialization import panel_digest

        digest = panel_digest(panel)
    d = spec.n_params
    names = spec.param_names()

    if config.existence_check:
        work, active, flags = _flag_and_restrict(compiled, names)
    else:
        work, active, flags = compiled, list(range(d)), [OK] * d

    x0 = config.init.flat if config.init is not None else np.zeros(d)
    if len(x0) != d:
        raise ValueError(f"initial theta has {len(x0)} entries, model has {d}")
    x0 = np.asarray(x0, dtype=np.float64)[active]

    def objective(x):
        ll, grad = work.loglik_and_gradient(x)
        if not np.isfinite(ll) or not np.all(np.isfinite(grad)):
            raise FitError(f"non-finite log-likelihood at theta={x}")
        return -ll, -grad

    res = bfgs(objective, x0, gtol=config.grad_tol, max_iters=config.max_iters, x_cap=config.param_cap)
    report = work.evaluate(res.x)

    theta = np.full(d, np.nan)
    se = np.full(d, np.nan)
    cov = np.full((d, d), np.nan)
    grad_full = np.zeros(d)
    for pos, a in enumerate(active):
        theta[a] = res.x[pos]
        grad_full[a] = report.gradient[pos]
    for a, f in enumerate(flags):
        if f == AT_UPPER:
            theta[a] = math.inf
        elif f == AT_LOWER:
            theta[a] = -math.inf

    singular = False
    if active:
        info = report.fisher_info
        eig = np.linalg.eigvalsh(info)
        if eig[0] <= max(1e-10 * abs(eig[-1]), 1e-300):
            singular = True
        else:
            inv = np.linalg.inv(info)
            inv = 0.5 * (inv + inv.T)
            idx = np.array(active)
            cov[np.ix_(idx, idx)] = inv
            se[idx] = np.sqrt(np.diag(inv))

    return FitResult(
        spec=spec,
        theta_hat=theta,
        se=se,
        cov=cov,
        loglik=report.loglik,
        residual_deviance=-2.0 * report.loglik,
        n_params=d,
        converged=res.converged,
        existence_flags=flags,
        iterations=res.iterations,
        message=res.message,
        gradient=grad_full,
        singular_information=singular,
        n_transitions=compiled.n_transitions,
        panel_digest=digest,
    )


# --- tests -------------------------------------------------------------------


@dataclass
class WaldTest:
    name: str
    estimate: float
    se: float
    z: float
    p_value: float
    stars: str


def wald_tests(fit: FitResult) -> list[WaldTest | None]:
    """Per-parameter z tests; ``None`` where no finite estimate or SE exists."""
    out: list[WaldTest | None] = []
    for name, est, se, flag in zip(fit.names, fit.theta_hat, fit.se, fit.existence_flags):
        if flag != OK or not (np.isfinite(est) and np.isfinite(se)) or se <= 0:
            out.append(None)
            continue
        z = float(est / se)
        p = normal_two_sided_p(z)
        out.append(WaldTest(name, float(est), float(se), z, p, significance_stars(p)))
    return out


@dataclass
class LrTestResult:
    deviance: float
    df: int
    p_value: float


def _is_subset(small, big) -> bool:
    need, have = Counter(small), Counter(big)
    return all(have[t] >= c for t, c in need.items())


def check_nested(reduced: ModelSpec, full: ModelSpec) -> None:
    if not (_is_subset(reduced.formation, full.formation)
            and _is_subset(reduced.persistence, full.persistence)):
        raise NestingError("reduced model terms are not a subset of the full model terms")


DEVIANCE_SLACK = 1e-8


def lr_test(fit_reduced: FitResult, fit_full: FitResult) -> LrTestResult:
    """Deviance test of a nested pair of fits on the same panel."""
    check_nested(fit_reduced.spec, fit_full.spec)
    if (fit_reduced.panel_digest and fit_full.panel_digest
            and fit_reduced.panel_digest != fit_full.panel_digest):
        raise NestingError("fits were computed on different panels")
    if fit_reduced.n_transitions != fit_full.n_transitions:
        raise NestingError("fits cover different numbers of transitions")
    deviance = fit_reduced.residual_deviance - fit_full.residual_deviance
    if deviance < 0:
        if deviance < -DEVIANCE_SLACK:
            warnings.warn(f"negative deviance {deviance:.3g}; the full fit did not reach its maximum",
                          stacklevel=2)
        deviance = 0.0
    df = fit_full.n_params - fit_reduced.n_params
    p = 1.0 if df == 0 else chisq_sf(deviance, df)
    return LrTestResult(deviance, df, p)


@dataclass
class SliceFit:
    step: int
    fit: FitResult | None
    error: str | None = None


def fit_per_time(panel: Panel, spec: ModelSpec, config: FitConfig | None = None) -> list[SliceFit]:
    """Separate fits on the k-th transition of every game, k = 1, 2, ..."""
    if len(panel.games) < 2:
        warnings.warn("per-time fits with fewer than 2 games usually have singular information",
                      stacklevel=2)
    out = []
    for step, sub in panel.slice_by_step().items():
        try:
            out.append(SliceFit(step, maximize(sub, spec, config)))
        except (FitError, GraphError, RuntimeError, ValueError) as exc:
            out.append(SliceFit(step, None, str(exc)))
    return out
