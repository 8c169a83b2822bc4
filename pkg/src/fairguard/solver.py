"""Constrained logistic regression for fair and perturbation-tolerant classification.

Fairness and mass constraints are optimized through soft predictions
``sigmoid(<x, theta> / T)``; whether a returned point is feasible is always
judged with hard 0/1 predictions.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .classifier import LinearClassifier, design_matrix, logistic_loss, predict_dataset, sigmoid
from .metrics import Dataset, MetricSpec, fairness_value, group_performance, soft_group_sums

__all__ = [
    "SolverConfig",
    "RobustParams",
    "SolveResult",
    "FEAS_TOL",
    "constrained_minimize",
    "fit_unconstrained",
    "fit_target_fair",
    "robust_fairness_threshold",
    "compute_scaling_s",
    "fit_err_tolerant",
    "fit_err_tolerant_plus",
    "fit_general_err_tolerant",
    "estimate_params",
    "FairnessProgram",
]

FEAS_TOL = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 1000
    conv_tol: float = 1e-4
    fd_step: float = 1e-4
    restarts: int = 10
    init_box: float = 1.0
    temperature: float = 1.0
    seed: int = 0
    anneal: float = 0.5  # restart r of a fairness program uses temperature * anneal**r

    def __post_init__(self):
        if self.max_iters < 1 or self.restarts < 1:
            raise ValueError("max_iters and restarts must be at least 1")
        if not 0.0 < self.anneal <= 1.0:
            raise ValueError("anneal must lie in (0, 1]")
        for name in ("conv_tol", "fd_step", "init_box", "temperature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class RobustParams:
    """Perturbation budget ``eta``, target ``tau`` and per-group mass constants.

    ``lambda_vec[l]`` lower-bounds the mass of ``E and E'`` on group ``l``;
    ``gamma_vec[l]`` that of ``E'``.  ``delta`` is the slack added to ``eta``.
    """

    eta: float
    tau: float
    lambda_vec: np.ndarray
    gamma_vec: np.ndarray
    delta: float = 0.01

    def __post_init__(self):
        lam = np.array(self.lambda_vec, dtype=float).ravel()
        gam = np.array(self.gamma_vec, dtype=float).ravel()
        if not 0.0 <= self.eta < 1.0:
            raise ValueError("eta must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if lam.shape != gam.shape or lam.size == 0:
            raise ValueError("lambda_vec and gamma_vec must be nonempty and of equal length")
        if np.any(lam <= 0) or np.any(lam > 1) or np.any(gam <= 0) or np.any(gam > 1):
            raise ValueError("lambda and gamma entries must lie in (0, 1]")
        if np.any(lam > gam + 1e-12):
            raise ValueError("lambda_l must not exceed gamma_l")
        lam.setflags(write=False)
        gam.setflags(write=False)
        object.__setattr__(self, "lambda_vec", lam)
        object.__setattr__(self, "gamma_vec", gam)

    @property
    def p(self) -> int:
        return self.lambda_vec.size

    @property
    def budget(self) -> float:
        return self.eta + self.delta

    @property
    def lam_min(self) -> float:
        return float(self.lambda_vec.min())

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "tau": self.tau,
            "lambda_vec": self.lambda_vec.tolist(),
            "gamma_vec": self.gamma_vec.tolist(),
            "delta": self.delta,
        }


@dataclass
class SolveResult:
    classifier: LinearClassifier
    feasible: bool
    objective: float
    constraint_slacks: np.ndarray
    restarts_used: int
    info: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# generic local solver


def _fd_jacobian(g: Callable, theta: np.ndarray, h: float) -> np.ndarray:
    cols = []
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        cols.append((np.atleast_1d(g(theta + e)) - np.atleast_1d(g(theta - e))) / (2 * h))
    return np.stack(cols, axis=1)


def constrained_minimize(
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
    constraints: Sequence[Callable[[np.ndarray], np.ndarray | float]],
    config: SolverConfig,
    dim: int,
    slack_fn: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, bool, float, np.ndarray, int]:
    """Minimize ``objective`` subject to ``g(theta) >= 0`` for each constraint.

    Runs SLSQP from a uniform random start in ``[-init_box, init_box]^dim``
    (seed ``config.seed + r`` for restart ``r``) and stops at the first run
    whose ``slack_fn`` values are all ``>= -1e-6``.  ``slack_fn`` defaults to
    the constraints themselves.  Without a feasible run the last iterate is
    returned flagged infeasible.

    Returns ``(theta, feasible, objective, slacks, restarts_used)``.
    """

    def all_cons(theta):
        if not constraints:
            return np.zeros(0)
        return np.concatenate([np.atleast_1d(np.asarray(g(theta), dtype=float)) for g in constraints])

    if slack_fn is None:
        slack_fn = all_cons

    scipy_cons = []
    if constraints:
        scipy_cons.append({
            "type": "ineq",
            "fun": all_cons,
            "jac": lambda th: _fd_jacobian(all_cons, th, config.fd_step),
        })

    last = None
    any_finite = False
    for r in range(config.restarts):
        rng = np.random.default_rng(config.seed + r)
        theta0 = rng.uniform(-config.init_box, config.init_box, size=dim)
        f0, _ = objective(theta0)
        if not np.isfinite(f0):
            continue
        any_finite = True
        res = minimize(
            objective,
            theta0,
            jac=True,
            method="SLSQP",
            constraints=scipy_cons,
            options={"maxiter": config.max_iters, "ftol": config.conv_tol},
        )
        theta = np.asarray(res.x, dtype=float)
        if not np.all(np.isfinite(theta)):
            theta = theta0
        fval = float(objective(theta)[0])
        slacks = np.asarray(slack_fn(theta), dtype=float)
        feasible = bool(np.all(slacks >= -FEAS_TOL))
        last = (theta, feasible, fval, slacks, r + 1)
        if feasible:
            return last
    if not any_finite:
        raise FloatingPointError("objective is not finite at any initial point")
    return last


# --------------------------------------------------------------------------
# fairness programs


def _loss_fn(dataset: Dataset, use_protected: bool):
    def f(theta):
        return logistic_loss(LinearClassifier(theta, use_protected), dataset)

    return f


@dataclass
class FairnessProgram:
    """Soft and hard evaluation of fairness and mass constraints on one dataset.

    Each ``(spec, threshold)`` pair adds ``q_l - threshold * q_k >= 0`` for
    all ordered pairs ``l != k`` (soft) and ``Omega - threshold >= 0``
    (hard).  ``floors[spec_index][l]`` adds ``mass(E and E', group l) >=
    floor``.  ``boxes`` adds ``low <= q_l <= high`` per group.  When
    ``box_acceptance`` holds ``(threshold, alpha)``, the hard check replaces
    box membership by ``min q >= threshold * max q - alpha``.
    """

    dataset: Dataset
    fairness: list = field(default_factory=list)  # [(spec, threshold)]
    floors: list = field(default_factory=list)  # [(spec, vector of floors)]
    boxes: list = field(default_factory=list)  # [(spec, low, high)]
    box_acceptance: tuple | None = None
    temperature: float = 1.0
    use_protected: bool = False

    def _soft(self, theta, spec):
        X = design_matrix(LinearClassifier(theta, self.use_protected), self.dataset)
        pos = sigmoid(X @ theta / self.temperature)
        num, den = soft_group_sums(pos, self.dataset, spec)
        return num, den

    def soft_constraints(self, theta) -> np.ndarray:
        out = []
        n = self.dataset.n
        cache = {}
        for spec, *_ in self.fairness + self.floors + self.boxes:
            if spec not in cache:
                cache[spec] = self._soft(theta, spec)
        for spec, thr in self.fairness:
            num, den = cache[spec]
            q = num / np.maximum(den, 1e-12)
            p = q.size
            for a in range(p):
                for b in range(p):
                    if a != b:
                        out.append(q[a] - thr * q[b])
        for spec, fl in self.floors:
            num, _ = cache[spec]
            out.extend(num / n - np.asarray(fl))
        for spec, lo, hi in self.boxes:
            num, den = cache[spec]
            q = num / np.maximum(den, 1e-12)
            out.extend(q - lo)
            out.extend(hi - q)
        return np.asarray(out, dtype=float)

    def hard_slacks(self, theta) -> np.ndarray:
        pred = predict_dataset(LinearClassifier(theta, self.use_protected), self.dataset)
        out = []
        for spec, thr in self.fairness:
            out.append(fairness_value(group_performance(self.dataset, pred, spec)) - thr)
        for spec, fl in self.floors:
            tab = group_performance(self.dataset, pred, spec)
            out.extend(tab.numerators - np.asarray(fl))
        for spec, lo, hi in self.boxes:
            tab = group_performance(self.dataset, pred, spec)
            if self.box_acceptance is not None:
                thr, alpha = self.box_acceptance
                ok = tab.defined.all()
                out.append(tab.q.min() - thr * tab.q.max() + alpha if ok else -np.inf)
                continue
            q = np.where(tab.defined, tab.q, -np.inf)
            out.extend(q - lo)
            out.extend(np.where(tab.defined, hi - tab.q, -np.inf))
        return np.asarray(out, dtype=float)

    @property
    def empty(self) -> bool:
        return not (self.fairness or self.floors or self.boxes)

    def solve(self, config: SolverConfig) -> SolveResult:
        """Restart loop with a sharper soft surrogate on every retry.

        A run whose soft constraints hold but whose hard predictions do not
        is usually one where ``sigma`` is too flat; restart ``r`` therefore
        uses temperature ``self.temperature * config.anneal**r``.
        """
        dim = self.dataset.dim + int(self.use_protected)
        loss = _loss_fn(self.dataset, self.use_protected)
        if self.empty:
            theta, feas, obj, slacks, used = constrained_minimize(loss, [], config, dim)
        else:
            for r in range(config.restarts):
                stage = replace(self, temperature=self.temperature * config.anneal ** r)
                sub = replace(config, restarts=1, seed=config.seed + r)
                theta, feas, obj, slacks, _ = constrained_minimize(
                    loss, [stage.soft_constraints], sub, dim, slack_fn=self.hard_slacks,
                )
                used = r + 1
                if feas:
                    break
        clf = LinearClassifier(theta, self.use_protected, config.temperature)
        return SolveResult(clf, feas, obj, slacks, used)


def fit_unconstrained(dataset: Dataset, config: SolverConfig = SolverConfig(), use_protected: bool = False) -> SolveResult:
    return FairnessProgram(dataset, temperature=config.temperature, use_protected=use_protected).solve(config)


def fit_target_fair(
    dataset: Dataset, spec: MetricSpec, tau: float, config: SolverConfig = SolverConfig(), use_protected: bool = False
) -> SolveResult:
    """Logistic loss subject to ``Omega(f, dataset) >= tau``."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    fair = [(spec, float(tau))] if tau > 0 else []
    prog = FairnessProgram(dataset, fairness=fair, temperature=config.temperature, use_protected=use_protected)
    return prog.solve(config)


def robust_fairness_threshold(params: RobustParams) -> float:
    """``tau * ((1 - x) / (1 + x))**2`` with ``x = (eta + delta) / min lambda``."""
    x = params.budget / params.lam_min
    if x >= 1.0:
        raise ValueError(
            f"assumption violated: eta + delta = {params.budget} must be below min lambda = {params.lam_min}"
        )
    return params.tau * ((1.0 - x) / (1.0 + x)) ** 2


def _grid_steps(p: int, resolution: int, max_points: int = 2_000_000) -> int:
    steps = int(resolution)
    while steps > 1 and math.comb(steps + p, p) > max_points:
        steps = max(1, int(steps * 0.8))
    return steps


def compute_scaling_s(params: RobustParams, grid_resolution: int = 1000) -> float:
    """Worst-case fairness deflation over per-group budgets.

    Minimizes the pairwise ratio bound over ``eta_l >= 0`` with
    ``sum eta_l <= eta + delta``: an exhaustive grid over the whole simplex
    (coarsened for many groups) followed by a coordinate polish that keeps
    the point feasible.  The value is clamped to ``[0, 1]``.
    """
    budget = params.budget
    if budget >= params.lam_min:
        raise ValueError(
            f"assumption violated: eta + delta = {budget} must be below min lambda = {params.lam_min}"
        )
    if budget == 0.0:
        return 1.0
    lam, gam = params.lambda_vec, params.gamma_vec
    steps = _grid_steps(params.p, grid_resolution)
    best, eta = _kernels.scaling_grid_min(lam, gam, budget, steps)
    eta = np.array(eta, dtype=float)

    def value(e):
        return float(_kernels.scaling_objective(e[None, :], lam, gam)[0])

    h = budget / steps
    while h > budget * 1e-9:
        improved = False
        for i in range(params.p):
            for sgn in (1.0, -1.0):
                cand = eta.copy()
                cand[i] = max(0.0, cand[i] + sgn * h)
                if cand.sum() > budget:
                    cand[i] -= cand.sum() - budget
                    if cand[i] < 0:
                        continue
                v = value(cand)
                if v < best:
                    best, eta, improved = v, cand, True
        if not improved:
            h /= 2
    return float(min(1.0, max(0.0, best)))


def _floors(params: RobustParams, per_group: bool) -> np.ndarray:
    lam = params.lambda_vec if per_group else np.full(params.p, params.lam_min)
    return lam - params.eta - params.delta


def fit_err_tolerant(
    perturbed: Dataset, spec: MetricSpec, params: RobustParams, config: SolverConfig = SolverConfig(),
    use_protected: bool = False,
) -> SolveResult:
    """Fairness at the deflated threshold plus ``mass >= min lambda - eta - delta`` per group."""
    return fit_general_err_tolerant(perturbed, [spec], params, config, use_protected)


def fit_err_tolerant_plus(
    perturbed: Dataset, spec: MetricSpec, params: RobustParams, config: SolverConfig = SolverConfig(),
    grid_resolution: int = 1000, use_protected: bool = False,
) -> SolveResult:
    """Fairness at ``tau * s`` plus per-group ``mass >= lambda_l - eta - delta``."""
    _check_groups(perturbed, params)
    s = compute_scaling_s(params, grid_resolution)
    thr = params.tau * s
    prog = FairnessProgram(
        perturbed,
        fairness=[(spec, thr)],
        floors=[(spec, _floors(params, per_group=True))],
        temperature=config.temperature,
        use_protected=use_protected,
    )
    res = prog.solve(config)
    res.info.update({"threshold": thr, "scaling_s": s})
    return res


def fit_general_err_tolerant(
    perturbed: Dataset, specs: Sequence[MetricSpec], params, config: SolverConfig = SolverConfig(),
    use_protected: bool = False,
) -> SolveResult:
    """All fairness and mass constraints for several metrics at once.

    ``params`` is a single :class:`RobustParams` shared by every metric or a
    sequence with one entry per metric.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("at least one metric is required")
    plist = list(params) if isinstance(params, (list, tuple)) else [params] * len(specs)
    if len(plist) != len(specs):
        raise ValueError("need one RobustParams per metric")
    fair, floors, thrs = [], [], []
    for spec, pr in zip(specs, plist):
        _check_groups(perturbed, pr)
        thr = robust_fairness_threshold(pr)
        thrs.append(thr)
        fair.append((spec, thr))
        floors.append((spec, _floors(pr, per_group=False)))
    prog = FairnessProgram(perturbed, fairness=fair, floors=floors,
                           temperature=config.temperature, use_protected=use_protected)
    res = prog.solve(config)
    res.info.update({"threshold": thrs[0] if len(thrs) == 1 else thrs})
    return res


def _check_groups(dataset: Dataset, params: RobustParams):
    if params.p != dataset.p:
        raise ValueError(f"params describe {params.p} groups, dataset has {dataset.p}")


def estimate_params(
    perturbed: Dataset, spec: MetricSpec, eta: float, tau: float, delta: float = 0.01, mode: str = "joint",
    lambda_value: float | None = None,
) -> RobustParams:
    """Plug-in estimates of the per-group constants, using labels in place of predictions.

    ``mode="joint"``: ``lambda_l = Pr[E(Y), E'(Y), Z=l]``, ``gamma_l = Pr[E'(Y), Z=l]``.
    ``mode="prime"``: ``lambda_l = gamma_l = Pr[E'(Y), Z=l]``.
    ``lambda_value`` fixes every ``lambda_l`` instead (``gamma_l`` is raised
    to it if needed); metrics such as FPR need this, since labels never
    fall in ``E and E'`` there.
    """
    tab = group_performance(perturbed, perturbed.y, spec)
    gam = tab.denominators
    if lambda_value is not None:
        lam = np.full(perturbed.p, float(lambda_value))
        return RobustParams(eta, tau, lam, np.maximum(gam, lam), delta)
    if mode == "joint":
        lam = tab.numerators
    elif mode == "prime":
        lam = gam
    else:
        raise ValueError("mode must be 'joint' or 'prime'")
    if np.any(lam <= 0):
        raise ValueError(
            f"estimated lambda is zero for metric {spec.name!r} on some group; pass an explicit lambda value"
        )
    return RobustParams(eta, tau, lam, gam, delta)


def config_dict(config: SolverConfig) -> dict:
    return asdict(config)
