"""Exact finite-distribution lab.

Finite distributions over ``X x {0,1} x [p]`` with rational masses, the three
lower-bound families (A: three 6-point distributions, B: three 10-point
distributions, C: a pair with identical (X, Z) marginals), exhaustive
enumeration of every classifier on the finite domain, and checks built on
top of it.

Masses are kept as :class:`fractions.Fraction` so that equality cases
(e.g. an error exactly equal to its bound) are decided exactly.  Parameters
given as floats are converted through their decimal representation, so
``0.04`` means exactly 1/25.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .metrics import SR, Dataset, MetricSpec

__all__ = [
    "FiniteDistribution",
    "EnumClassifier",
    "VerificationReport",
    "as_fraction",
    "build_family_A",
    "build_family_B",
    "build_family_C",
    "exact_metrics",
    "exact_metrics_exact",
    "metrics_table",
    "all_classifiers",
    "tv_distance",
    "verify_no_good_classifier",
    "verify_good_classifier_exists",
    "verify_pair_error_sum",
    "verify_interval_sandwich",
    "family_b_case_bound",
    "family_b_witness",
    "sample_from",
    "perturb_mix",
    "mix_table",
    "run_all_checks",
    "DEFAULT_THEORY_PARAMS",
    "empirical_joint_deviation",
]


def as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    return Fraction(repr(float(v)))


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Probability table over labelled points ``(x_id, z, y)``.

    ``xs`` fixes the order of feature symbols; cells ``(x, z)`` are ordered
    x-major, i.e. cell index ``xs.index(x) * p + z - 1``.
    """

    xs: tuple
    p: int
    points: tuple
    mass_exact: tuple
    name: str = ""
    mass: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        points = tuple((x, int(z), int(y)) for x, z, y in self.points)
        m = tuple(as_fraction(v) for v in self.mass_exact)
        if len(points) != len(m):
            raise ValueError("one mass per point")
        if any(v < 0 for v in m):
            raise ValueError("masses must be nonnegative")
        if sum(m) != 1:
            raise ValueError(f"masses sum to {float(sum(m))!r}, not 1")
        xs = tuple(self.xs)
        for x, z, y in points:
            if x not in xs or not 1 <= z <= self.p or y not in (0, 1):
                raise ValueError(f"point {(x, z, y)} outside the domain")
        if len(set(points)) != len(points):
            raise ValueError("duplicate points")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "mass_exact", m)
        object.__setattr__(self, "xs", xs)
        arr = np.array([float(v) for v in m])
        arr.setflags(write=False)
        object.__setattr__(self, "mass", arr)

    @property
    def n_cells(self) -> int:
        return len(self.xs) * self.p

    @property
    def cells(self) -> list[tuple]:
        return [(x, z) for x in self.xs for z in range(1, self.p + 1)]

    def cell_index(self, x, z: int) -> int:
        return self.xs.index(x) * self.p + int(z) - 1

    def point_cells(self) -> np.ndarray:
        return np.array([self.cell_index(x, z) for x, z, _ in self.points], dtype=np.int64)

    def joint(self) -> dict:
        """(x, z, y) -> exact mass, zero-mass points dropped."""
        return {pt: m for pt, m in zip(self.points, self.mass_exact) if m}

    def marginal_xz(self) -> dict:
        out = {c: Fraction(0) for c in self.cells}
        for (x, z, _), m in zip(self.points, self.mass_exact):
            out[(x, z)] += m
        return out

    def marginal_x(self) -> dict:
        out = {x: Fraction(0) for x in self.xs}
        for (x, _, _), m in zip(self.points, self.mass_exact):
            out[x] += m
        return out

    def label_given_x(self) -> dict | None:
        """x -> label when the label is a function of x alone on the support."""
        lab: dict = {}
        for (x, _, y), m in zip(self.points, self.mass_exact):
            if m == 0:
                continue
            if lab.setdefault(x, y) != y:
                return None
        return lab


def _table(xs, rows: dict, label, name):
    # rows: z -> list of masses aligned with xs
    pts, ms = [], []
    for x_i, x in enumerate(xs):
        for z in (1, 2):
            pts.append((x, z, label(x, z)))
            ms.append(rows[z][x_i])
    return FiniteDistribution(tuple(xs), 2, tuple(pts), tuple(ms), name)


def build_family_A(c, alpha):
    """Three distributions on {x_A, x_B, x_C} x [2] with Y = 1[X = x_A]."""
    c, a = as_fraction(c), as_fraction(alpha)
    if not (0 < c < Fraction(1, 2)):
        raise ValueError("c must lie in (0, 1/2)")
    if not (0 < a <= 1):
        raise ValueError("alpha must lie in (0, 1]")
    xs = ("x_A", "x_B", "x_C")

    def label(x, z):
        return int(x == "x_A")

    h = Fraction(1, 2)
    d1 = _table(xs, {1: [c * (1 - a), (1 - c) * (1 - a), a * h], 2: [c * a * h, a * (1 - c) * h, 0]}, label, "A.D1")
    d2 = _table(xs, {1: [c * (1 - a), (1 - c) * (1 - a * h), c * a * h], 2: [c * a * h, 0, a * (1 - c) * h]}, label, "A.D2")
    d3 = _table(xs, {1: [c * (1 - a * h), (1 - c) * (1 - a), a * (1 - c) * h], 2: [0, a * (1 - c) * h, c * a * h]}, label, "A.D3")
    return d1, d2, d3


def build_family_B(lam, c):
    """Three distributions on {x_A..x_E} x [2] with Y = 1[X != x_E]."""
    lam, c = as_fraction(lam), as_fraction(c)
    if not (0 < lam <= Fraction(1, 4)):
        raise ValueError("lambda must lie in (0, 1/4]")
    if not (0 < c <= 2 * lam / 9):
        raise ValueError("c must lie in (0, 2*lambda/9]")
    xs = ("x_A", "x_B", "x_C", "x_D", "x_E")

    def label(x, z):
        return int(x != "x_E")

    h = Fraction(1, 2)
    big = h - lam - c * h
    small = lam - c
    rows = [
        {1: [0, c * h, c * h, big, big], 2: [c, c * h, c * h, small, small]},
        {1: [c * h, 0, c * h, big, big], 2: [c * h, c, c * h, small, small]},
        {1: [c * h, c * h, 0, big, big], 2: [c * h, c * h, c, small, small]},
    ]
    return tuple(_table(xs, r, label, f"B.D{k + 1}") for k, r in enumerate(rows))


def build_family_C(eta):
    """Pair with identical (X, Z) marginals but labels that depend on Z."""
    eta = as_fraction(eta)
    if not (0 < eta <= Fraction(1, 2)):
        raise ValueError("eta must lie in (0, 1/2]")
    xs = ("x_A", "x_B", "x_C")
    h = Fraction(1, 2)
    rows = {1: [eta * h, h - eta, eta * h], 2: [eta * h, h - eta, eta * h]}
    p_lab = {("x_A", 1): 1, ("x_B", 1): 1, ("x_C", 1): 0, ("x_A", 2): 0, ("x_B", 2): 1, ("x_C", 2): 1}
    q_lab = {("x_A", 1): 0, ("x_B", 1): 1, ("x_C", 1): 1, ("x_A", 2): 1, ("x_B", 2): 1, ("x_C", 2): 0}
    P = _table(xs, rows, lambda x, z: p_lab[(x, z)], "C.P")
    Q = _table(xs, rows, lambda x, z: q_lab[(x, z)], "C.Q")
    return P, Q


def tv_distance(a: FiniteDistribution, b: FiniteDistribution) -> Fraction:
    ja, jb = a.joint(), b.joint()
    return sum((max(ja.get(k, 0) - jb.get(k, 0), 0) for k in set(ja) | set(jb)), Fraction(0))


@dataclass(frozen=True)
class EnumClassifier:
    """Binary output per (x, z) cell, in the distribution's cell order."""

    outputs: tuple

    @classmethod
    def from_code(cls, code: int, n_cells: int) -> "EnumClassifier":
        return cls(tuple((code >> i) & 1 for i in range(n_cells)))

    @classmethod
    def from_function(cls, dist: FiniteDistribution, f: Callable) -> "EnumClassifier":
        return cls(tuple(int(f(x, z)) for x, z in dist.cells))

    @property
    def code(self) -> int:
        return sum(b << i for i, b in enumerate(self.outputs))

    def describe(self, dist: FiniteDistribution) -> dict:
        return {f"{x},{z}": int(b) for (x, z), b in zip(dist.cells, self.outputs)}


def all_classifiers(dist: FiniteDistribution) -> Iterable[EnumClassifier]:
    for code in range(1 << dist.n_cells):
        yield EnumClassifier.from_code(code, dist.n_cells)


def _exact_fairness(num, den):
    q = [n / d if d > 0 else None for n, d in zip(num, den)]
    vals = [v for v in q if v is not None]
    if not vals:
        return Fraction(1), q
    hi = max(vals)
    if hi <= 0:
        return Fraction(1), q
    if len(vals) < len(q):
        return Fraction(0), q
    return min(vals) / hi, q


def exact_metrics_exact(dist: FiniteDistribution, clf: EnumClassifier, spec: MetricSpec = SR):
    """Exact ``(error, fairness)`` as Fractions."""
    if len(clf.outputs) != dist.n_cells:
        raise ValueError("classifier is not total on the domain")
    joint, prime = spec.e_mask & spec.e_prime_mask, spec.e_prime_mask
    err = Fraction(0)
    num = [Fraction(0)] * dist.p
    den = [Fraction(0)] * dist.p
    for (x, z, y), m in zip(dist.points, dist.mass_exact):
        if not m:
            continue
        f = clf.outputs[dist.cell_index(x, z)]
        if f != y:
            err += m
        if joint[f, y]:
            num[z - 1] += m
        if prime[f, y]:
            den[z - 1] += m
    omega, _ = _exact_fairness(num, den)
    return err, omega


def exact_metrics(dist: FiniteDistribution, clf: EnumClassifier, spec: MetricSpec = SR) -> tuple[float, float]:
    err, omega = exact_metrics_exact(dist, clf, spec)
    return float(err), float(omega)


def metrics_table(dists: Sequence[FiniteDistribution], spec: MetricSpec = SR):
    """Float error and fairness of every classifier on every distribution.

    Returns ``(err, omega)`` arrays of shape ``(2**n_cells, len(dists))``.
    All distributions must share the same labelled point list.
    """
    base = dists[0]
    for d in dists[1:]:
        if d.points != base.points or d.xs != base.xs:
            raise ValueError("distributions must share a point list")
    mass = np.stack([d.mass for d in dists])
    pts_y = np.array([y for _, _, y in base.points], dtype=np.int64)
    pts_z = np.array([z for _, z, _ in base.points], dtype=np.int64)
    err, num, den = _kernels.enumerate_metrics(
        base.n_cells, base.point_cells(), pts_y, pts_z, mass, spec.joint, spec.prime, base.p
    )
    defined = den > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(defined, num / np.where(defined, den, 1.0), np.nan)
    qmax = np.nanmax(np.where(defined, q, -np.inf), axis=2)
    qmin = np.min(np.where(defined, q, np.inf), axis=2)
    all_def = defined.all(axis=2)
    any_def = defined.any(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        omega = np.where(all_def, qmin / np.where(qmax > 0, qmax, 1.0), 0.0)
    omega = np.where(~any_def | (qmax <= 0), 1.0, omega)
    return err, omega


@dataclass
class VerificationReport:
    name: str
    passed: bool
    checked: int
    counterexamples: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "checked": int(self.checked),
            "counterexamples": self.counterexamples,
            "witnesses": self.witnesses,
            "details": self.details,
        }


def _row(dist_list, clf, errs, omegas):
    return {
        "classifier": clf.describe(dist_list[0]),
        "code": clf.code,
        "err": [float(e) for e in errs],
        "omega": [float(o) for o in omegas],
    }


def _cross_check(dists, spec, exact_rows):
    err_f, om_f = metrics_table(dists, spec)
    err_x = np.array([[float(e) for e in r[0]] for r in exact_rows])
    om_x = np.array([[float(o) for o in r[1]] for r in exact_rows])
    return float(max(np.abs(err_f - err_x).max(), np.abs(om_f - om_x).max()))


def _exact_rows(dists, spec):
    rows = []
    for clf in all_classifiers(dists[0]):
        vals = [exact_metrics_exact(d, clf, spec) for d in dists]
        rows.append(([v[0] for v in vals], [v[1] for v in vals]))
    return rows


def verify_no_good_classifier(
    dists: Sequence[FiniteDistribution],
    err_bound,
    omega_bound,
    spec: MetricSpec = SR,
    strict_omega: bool = False,
    name: str = "no_common_good_classifier",
) -> VerificationReport:
    """Check that no classifier is simultaneously accurate and fair on all ``dists``.

    A classifier is good on a distribution when ``err < err_bound`` and
    ``omega >= omega_bound`` (``>`` with ``strict_omega``).  Every classifier
    on the finite domain is enumerated; any that is good on every
    distribution is reported as a counterexample.
    """
    eb, ob = as_fraction(err_bound), as_fraction(omega_bound)
    rows = _exact_rows(dists, spec)
    bad = []
    for code, (errs, oms) in enumerate(rows):
        good = all(e < eb and (o > ob if strict_omega else o >= ob) for e, o in zip(errs, oms))
        if good:
            bad.append(_row(dists, EnumClassifier.from_code(code, dists[0].n_cells), errs, oms))
    return VerificationReport(
        name,
        passed=not bad,
        checked=len(rows),
        counterexamples=bad,
        details={
            "err_bound": float(eb),
            "omega_bound": float(ob),
            "strict_omega": strict_omega,
            "float_kernel_max_abs_diff": _cross_check(dists, spec, rows),
        },
    )


def verify_good_classifier_exists(
    dists: Sequence[FiniteDistribution],
    accept: Callable[[Fraction, Fraction], bool],
    spec: MetricSpec = SR,
    name: str = "per_distribution_witness",
    criterion: str = "",
) -> VerificationReport:
    """For each distribution, find by enumeration a classifier passing ``accept(err, omega)``.

    The reported witness is the accepted classifier with the smallest error.
    """
    rows = _exact_rows(dists, spec)
    witnesses = []
    missing = []
    for k, d in enumerate(dists):
        best = None
        for code, (errs, oms) in enumerate(rows):
            if accept(errs[k], oms[k]) and (best is None or errs[k] < rows[best][0][k]):
                best = code
        if best is None:
            missing.append(d.name)
            continue
        clf = EnumClassifier.from_code(best, d.n_cells)
        witnesses.append({
            "distribution": d.name,
            "classifier": clf.describe(d),
            "code": best,
            "err": float(rows[best][0][k]),
            "omega": float(rows[best][1][k]),
        })
    return VerificationReport(
        name,
        passed=not missing,
        checked=len(rows),
        witnesses=witnesses,
        details={"missing": missing, "criterion": criterion},
    )


def verify_pair_error_sum(P: FiniteDistribution, Q: FiniteDistribution, bound, name="pair_error_sum") -> VerificationReport:
    """Every classifier has ``Err_P + Err_Q >= bound``."""
    b = as_fraction(bound)
    rows = _exact_rows([P, Q], SR)
    bad = []
    lo = None
    for code, (errs, oms) in enumerate(rows):
        s = errs[0] + errs[1]
        lo = s if lo is None else min(lo, s)
        if s < b:
            bad.append(_row([P, Q], EnumClassifier.from_code(code, P.n_cells), errs, oms))
    return VerificationReport(
        name, passed=not bad, checked=len(rows), counterexamples=bad,
        details={"bound": float(b), "min_error_sum": float(lo)},
    )


def family_b_case_bound(lam, c) -> Fraction:
    """Largest fairness upper bound over the case split for family B.

    Any classifier that avoids error ``>= 1/2 - lam - c/2`` on every member
    has statistical rate at most this value on some member.  Unlike the
    simplified closed form ``1 - c(1-4 lam)/(2 lam) + 3c^2/(4 lam^2)``,
    it stays below 1 for all valid parameters.
    """
    lam, c = as_fraction(lam), as_fraction(c)
    r1_low = (1 - 2 * lam - c) / (2 * (1 - 2 * lam))
    g2_zero = c / lam
    case_zero = min(g2_zero, r1_low) / max(g2_zero, r1_low)
    case_one = (Fraction(1, 2) - c / (2 * (1 - 2 * lam))) / (1 - c / lam)
    case_many = (1 + c / (1 - 2 * lam)) / (1 + c / (2 * lam))
    case_few = (1 - c / (2 * lam)) / (1 - c / (1 - 2 * lam))
    return max(case_zero, case_one, case_many, case_few)


def family_b_witness(dist: FiniteDistribution) -> EnumClassifier:
    """Balanced classifier for the first family-B member: positive on x_B, x_D and (x_C, 2)."""
    return EnumClassifier.from_function(
        dist, lambda x, z: x in ("x_B", "x_D") or (x == "x_C" and z == 2)
    )


def verify_interval_sandwich(
    dist: FiniteDistribution,
    tau,
    alpha,
    spec: MetricSpec = SR,
) -> VerificationReport:
    """Check ``K(tau,0) ⊆ ∪_j P(L_j,U_j) ⊆ K(tau,alpha)`` over all classifiers.

    ``K(t, a)`` holds classifiers with ``min q >= t * max q - a``;
    ``P(L, U)`` those with every group performance in ``[L, U]``.
    """
    from .reduction import partition_intervals

    tau_f, alpha_f = as_fraction(tau), as_fraction(alpha)
    part = partition_intervals(tau_f, alpha_f, exact=True)
    bad = []
    n = 0
    for clf in all_classifiers(dist):
        n += 1
        num = [Fraction(0)] * dist.p
        den = [Fraction(0)] * dist.p
        jt, pr = spec.e_mask & spec.e_prime_mask, spec.e_prime_mask
        for (x, z, y), m in zip(dist.points, dist.mass_exact):
            f = clf.outputs[dist.cell_index(x, z)]
            if jt[f, y]:
                num[z - 1] += m
            if pr[f, y]:
                den[z - 1] += m
        if any(d == 0 for d in den):
            continue
        q = [a / b for a, b in zip(num, den)]
        in_k0 = min(q) >= tau_f * max(q)
        in_box = any(all(lo <= v <= hi for v in q) for lo, hi in zip(part.lows, part.highs))
        in_ka = min(q) >= tau_f * max(q) - alpha_f
        if (in_k0 and not in_box) or (in_box and not in_ka):
            bad.append({"code": clf.code, "q": [float(v) for v in q], "in_k0": in_k0, "in_box": in_box, "in_ka": in_ka})
    return VerificationReport(
        "interval_sandwich", passed=not bad, checked=n, counterexamples=bad,
        details={"tau": float(tau_f), "alpha": float(alpha_f), "J": part.J},
    )


def sample_from(dist: FiniteDistribution, n: int, seed: int) -> Dataset:
    """``n`` iid draws; symbols become one-hot feature vectors over ``dist.xs``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(dist.points), size=n, p=dist.mass / dist.mass.sum())
    x_of = np.array([dist.xs.index(x) for x, _, _ in dist.points])
    X = np.eye(len(dist.xs))[x_of[idx]]
    y = np.array([pt[2] for pt in dist.points])[idx]
    z = np.array([pt[1] for pt in dist.points])[idx]
    return Dataset(X, y, z, dist.p, check_groups=False)


def mix_table(dist: FiniteDistribution, keep=("x_B",)) -> dict:
    """Exact joint law of (x, z~, y) after the half-flip perturbation."""
    out: dict = {}
    for (x, z, y), m in zip(dist.points, dist.mass_exact):
        if x in keep:
            out[(x, z, y)] = out.get((x, z, y), 0) + m
        else:
            for zz in range(1, dist.p + 1):
                share = m / 2 if dist.p == 2 else None
                if share is None:
                    raise ValueError("half-flip perturbation needs two groups")
                out[(x, zz, y)] = out.get((x, zz, y), 0) + share
    return out


def perturb_mix(dataset: Dataset, dist: FiniteDistribution, eta: float, seed: int, keep=("x_B",)):
    """Flip the group of each sample outside ``keep`` with probability 1/2.

    Returns the original data untouched when more than ``eta * N`` flips
    would be needed.  Samples must come from :func:`sample_from` on ``dist``.
    """
    from .adversaries import PerturbationRecord, adversary_rng

    if dataset.p != 2:
        raise ValueError("half-flip perturbation needs two groups")
    rng = adversary_rng(seed, "mix")
    x_idx = dataset.X.argmax(axis=1)
    keep_idx = np.array([dist.xs.index(k) for k in keep])
    eligible = ~np.isin(x_idx, keep_idx)
    t = rng.random(dataset.n)
    flip = eligible & (t > 0.5)
    n_flip = int(flip.sum())
    ok = n_flip <= eta * dataset.n
    if not ok:
        flip = np.zeros(dataset.n, dtype=bool)
        perturbed = dataset.replace()
    else:
        perturbed = dataset.replace(z=np.where(flip, 3 - dataset.z, dataset.z))
    return PerturbationRecord(
        perturbed, flip, float(eta), "mix", int(seed),
        {"success": bool(ok), "proposed_flips": n_flip},
    )


def family_grid(family: str, params: dict) -> list:
    """Build a family from a params dict; missing entries take the default values."""
    key = f"family_{family}"
    if key not in DEFAULT_THEORY_PARAMS:
        raise ValueError(f"unknown family {family!r}")
    params = {**DEFAULT_THEORY_PARAMS[key], **(params or {})}
    if family == "A":
        return list(build_family_A(params["c"], params["alpha"]))
    if family == "B":
        return list(build_family_B(params["lambda"], params["c"]))
    if family == "C":
        return list(build_family_C(params["eta"]))
    raise ValueError(f"unknown family {family!r}")



DEFAULT_THEORY_PARAMS = {
    "family_A": {"c": 0.3, "alpha": 0.1},
    "family_B": {"lambda": 0.2, "c": 0.04},
    "family_C": {"eta": 0.2},
    "coupling": {"eta": 0.1, "n": 20000, "budget_n": 5000, "budget_trials": 200, "tol": 0.01},
    "seed": 0,
}


def _merge(base: dict, over: dict | None) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k].update(v)
        else:
            out[k] = v
    return out


def _tv_report(name, dists, bound, strict=False):
    pairs = {}
    ok = True
    for i in range(len(dists)):
        for j in range(i + 1, len(dists)):
            tv = tv_distance(dists[i], dists[j])
            pairs[f"{dists[i].name}-{dists[j].name}"] = float(tv)
            ok &= tv < bound if strict else tv <= bound
    return VerificationReport(name, passed=bool(ok), checked=len(pairs), details={"bound": float(bound), "tv": pairs})


def empirical_joint_deviation(dataset: Dataset, dist: FiniteDistribution) -> float:
    """Max |empirical - exact| over all (x, z, y) of the domain."""
    x_idx = dataset.X.argmax(axis=1)
    worst = 0.0
    exact = dist.joint()
    for xi, x in enumerate(dist.xs):
        for z in range(1, dist.p + 1):
            for y in (0, 1):
                emp = np.count_nonzero((x_idx == xi) & (dataset.z == z) & (dataset.y == y)) / dataset.n
                worst = max(worst, abs(emp - float(exact.get((x, z, y), 0))))
    return worst


def coupling_budget_check(source, target, eta, n, trials, seed=0) -> VerificationReport:
    """Fraction of trials in which the coupling adversary stays within ``eta * n`` flips."""
    from .adversaries import perturb_tv_coupling

    ok = 0
    for t in range(trials):
        ds = sample_from(source, n, seed + t)
        ok += perturb_tv_coupling(ds, source, target, eta, seed + t).info["success"]
    rate = ok / trials
    return VerificationReport(
        "coupling_budget", passed=rate >= 0.95, checked=trials,
        details={"success_rate": rate, "eta": float(eta), "n": n, "required": 0.95},
    )


def coupling_law_check(source, target, eta, n, tol, seed=0, max_tries=50) -> VerificationReport:
    """Conditioned on success, coupled samples follow ``target``'s joint law."""
    from .adversaries import perturb_tv_coupling

    for t in range(max_tries):
        ds = sample_from(source, n, seed + t)
        rec = perturb_tv_coupling(ds, source, target, eta, seed + t)
        if rec.info["success"]:
            dev = empirical_joint_deviation(rec.perturbed, target)
            return VerificationReport(
                "coupling_law", passed=dev <= tol, checked=1,
                details={"max_deviation": dev, "tol": tol, "n": n, "seed": seed + t, "flips": rec.n_flipped},
            )
    return VerificationReport("coupling_law", passed=False, checked=0, details={"error": "no successful coupling"})


def mix_law_check(dist, eta, n, tol, seed=0, max_tries=50) -> VerificationReport:
    """Half-flip perturbation of ``dist`` samples matches :func:`mix_table`."""
    table = mix_table(dist)
    target = FiniteDistribution(dist.xs, dist.p, tuple(table), tuple(table.values()), "mix")
    for t in range(max_tries):
        ds = sample_from(dist, n, seed + t)
        rec = perturb_mix(ds, dist, float(eta), seed + t)
        if rec.info["success"]:
            dev = empirical_joint_deviation(rec.perturbed, target)
            return VerificationReport(
                "mix_law", passed=dev <= tol, checked=1,
                details={"max_deviation": dev, "tol": tol, "n": n, "seed": seed + t},
            )
    return VerificationReport("mix_law", passed=False, checked=0, details={"error": "no successful perturbation"})


def run_all_checks(params: dict | None = None, include_monte_carlo: bool = True) -> list[VerificationReport]:
    """Every exact check on the three families plus the Monte-Carlo coupling checks.

    ``params`` overrides entries of :data:`DEFAULT_THEORY_PARAMS`; the
    per-family dicts also accept ``err_bound``/``omega_bound`` to replace
    the default thresholds.
    """
    P = _merge(DEFAULT_THEORY_PARAMS, params)
    seed = int(P["seed"])
    out = []

    pa = P["family_A"]
    c, a = as_fraction(pa["c"]), as_fraction(pa["alpha"])
    A = build_family_A(c, a)
    out.append(verify_no_good_classifier(
        A, pa.get("err_bound", c * (1 - a)), pa.get("omega_bound", c + a), name="family_A_no_common_good",
    ))
    half = c * a / 2
    out.append(verify_good_classifier_exists(
        A, lambda e, o: e < half and o > 1 - a, name="family_A_witness",
        criterion=f"err < {float(half)} and omega > {float(1 - a)}",
    ))
    out.append(verify_good_classifier_exists(
        A, lambda e, o: e <= half and o > 1 - a, name="family_A_witness_nonstrict",
        criterion=f"err <= {float(half)} and omega > {float(1 - a)}",
    ))
    out.append(_tv_report("family_A_tv", A, a))

    pb = P["family_B"]
    lam, cb = as_fraction(pb["lambda"]), as_fraction(pb["c"])
    B = build_family_B(lam, cb)
    out.append(verify_no_good_classifier(
        B, pb.get("err_bound", Fraction(1, 2) - lam - cb / 2),
        pb.get("omega_bound", 1 - cb * (1 - 4 * lam) / (2 * lam) + 3 * cb ** 2 / (4 * lam ** 2)),
        name="family_B_no_common_good",
    ))
    out.append(verify_no_good_classifier(
        B, Fraction(1, 2) - lam - cb / 2, family_b_case_bound(lam, cb), strict_omega=True,
        name="family_B_no_common_good_case_bound",
    ))
    out.append(verify_good_classifier_exists(
        B, lambda e, o: e <= 3 * cb / 2 and o == 1, name="family_B_witness",
        criterion=f"err <= {float(3 * cb / 2)} and omega == 1",
    ))
    e1, o1 = exact_metrics_exact(B[0], family_b_witness(B[0]))
    out.append(VerificationReport(
        "family_B_known_witness", passed=bool(e1 <= 3 * cb / 2 and o1 == 1), checked=1,
        details={"err": float(e1), "omega": float(o1)},
    ))
    out.append(_tv_report("family_B_tv", B, cb))

    pc = P["family_C"]
    eta = as_fraction(pc["eta"])
    Pd, Qd = build_family_C(eta)
    out.append(verify_pair_error_sum(Pd, Qd, 2 * eta, name="family_C_error_sum"))
    out.append(verify_good_classifier_exists(
        [Pd, Qd], lambda e, o: e == 0 and o == 1, name="family_C_witness", criterion="err == 0 and omega == 1",
    ))
    same = Pd.marginal_xz() == Qd.marginal_xz()
    tv = tv_distance(Pd, Qd)
    out.append(VerificationReport(
        "family_C_marginals", passed=bool(same and tv == 2 * eta), checked=1,
        details={"identical_xz_marginals": bool(same), "tv": float(tv)},
    ))

    if include_monte_carlo:
        pcp = P["coupling"]
        out.append(coupling_budget_check(A[0], A[1], pcp["eta"], int(pcp["budget_n"]), int(pcp["budget_trials"]), seed))
        out.append(coupling_law_check(A[0], A[1], pcp["eta"], int(pcp["n"]), float(pcp["tol"]), seed))
        out.append(mix_law_check(Pd, eta, int(pcp["n"]), float(pcp["tol"]), seed))
    return out
