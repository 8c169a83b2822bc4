"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with the same signature.  The numba path
is used unless ``FAIRGUARD_DISABLE_NUMBA`` is set to a truthy value or numba
cannot be imported; :data:`BACKEND` records which one is active.  Both paths
are importable directly (``*_numpy`` / ``*_numba``) so tests and the
benchmark can compare them.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("FAIRGUARD_DISABLE_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
    "on",
}

try:
    if _DISABLE:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# group event sums
#
# ``pos`` holds P(prediction = 1) per sample: exactly 0/1 for hard predictions,
# a probability for the soft surrogate.  ``joint`` and ``prime`` are 2x2 float
# tables indexed [prediction, label] for E∧E' and E'.


def group_event_sums_numpy(pos, y, z, joint, prime, p):
    yi = y.astype(np.intp)
    w_joint = pos * joint[1, yi] + (1.0 - pos) * joint[0, yi]
    w_prime = pos * prime[1, yi] + (1.0 - pos) * prime[0, yi]
    zi = z.astype(np.intp) - 1
    num = np.bincount(zi, weights=w_joint, minlength=p)[:p]
    den = np.bincount(zi, weights=w_prime, minlength=p)[:p]
    return num, den


def _group_event_sums_loop(pos, y, z, joint, prime, p):
    num = np.zeros(p)
    den = np.zeros(p)
    for i in range(pos.shape[0]):
        yi = y[i]
        g = z[i] - 1
        s = pos[i]
        num[g] += s * joint[1, yi] + (1.0 - s) * joint[0, yi]
        den[g] += s * prime[1, yi] + (1.0 - s) * prime[0, yi]
    return num, den


# --------------------------------------------------------------------------
# scaling program: evaluate min_{l,k} ratio term at many budget vectors


def scaling_objective_numpy(etas, lam, gam):
    # etas: (M, p)
    el = etas[:, :, None]
    ek = etas[:, None, :]
    lam_l = lam[None, :, None]
    lam_k = lam[None, None, :]
    gam_l = gam[None, :, None]
    gam_k = gam[None, None, :]
    left = (1.0 - el / lam_l) / (1.0 + (ek - el) / gam_l)
    right = (1.0 + (el - ek) / gam_k) / (1.0 + el / lam_k)
    return (left * right).reshape(etas.shape[0], -1).min(axis=1)


def _scaling_objective_loop(etas, lam, gam):
    m, p = etas.shape
    out = np.empty(m)
    for r in range(m):
        best = np.inf
        for a in range(p):
            ea = etas[r, a]
            for b in range(p):
                eb = etas[r, b]
                v = (1.0 - ea / lam[a]) / (1.0 + (eb - ea) / gam[a])
                v *= (1.0 + (ea - eb) / gam[b]) / (1.0 + ea / lam[b])
                if v < best:
                    best = v
        out[r] = best
    return out


def _scaling_grid_min_loop(lam, gam, budget, steps):
    """Exhaustive min over all integer compositions k_1+...+k_p <= steps."""
    p = lam.shape[0]
    h = budget / steps
    ks = np.zeros(p, dtype=np.int64)
    eta = np.zeros(p)
    best = np.inf
    best_eta = np.zeros(p)
    done = False
    while not done:
        for a in range(p):
            eta[a] = ks[a] * h
        v = np.inf
        for a in range(p):
            for b in range(p):
                t = (1.0 - eta[a] / lam[a]) / (1.0 + (eta[b] - eta[a]) / gam[a])
                t *= (1.0 + (eta[a] - eta[b]) / gam[b]) / (1.0 + eta[a] / lam[b])
                if t < v:
                    v = t
        if v < best:
            best = v
            best_eta[:] = eta
        # odometer increment restricted to sum(ks) <= steps
        pos = 0
        while True:
            if pos == p:
                done = True
                break
            ks[pos] += 1
            if ks.sum() <= steps:
                break
            ks[pos] = 0
            pos += 1
    return best, best_eta


def scaling_grid_min_numpy(lam, gam, budget, steps):
    p = lam.shape[0]
    axes = np.meshgrid(*[np.arange(steps + 1)] * p, indexing="ij")
    ks = np.stack([a.ravel() for a in axes], axis=1)
    ks = ks[ks.sum(axis=1) <= steps]
    etas = ks * (budget / steps)
    vals = scaling_objective_numpy(etas, lam, gam)
    i = int(np.argmin(vals))
    return float(vals[i]), etas[i].copy()


# --------------------------------------------------------------------------
# exhaustive classifier enumeration over a finite domain
#
# cells: m (x, z) cells; a classifier is an m-bit integer.  For every
# distribution d and every classifier c returns error and per-group
# numerator/denominator masses.  ``pts_*`` describe labelled points, each
# belonging to one cell.


def enumerate_metrics_numpy(n_cells, pts_cell, pts_y, pts_z, mass, joint, prime, p):
    n_clf = 1 << n_cells
    codes = np.arange(n_clf, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(n_cells)[None, :]) & 1).astype(np.float64)
    pred = bits[:, pts_cell]  # (C, P)
    yi = pts_y.astype(np.intp)
    wrong = (pred != pts_y[None, :]).astype(np.float64)
    err = wrong @ mass.T  # (C, D)
    w_joint = pred * joint[1, yi][None, :] + (1.0 - pred) * joint[0, yi][None, :]
    w_prime = pred * prime[1, yi][None, :] + (1.0 - pred) * prime[0, yi][None, :]
    n_dist = mass.shape[0]
    num = np.zeros((n_clf, n_dist, p))
    den = np.zeros((n_clf, n_dist, p))
    for g in range(p):
        sel = pts_z == g + 1
        num[:, :, g] = w_joint[:, sel] @ mass[:, sel].T
        den[:, :, g] = w_prime[:, sel] @ mass[:, sel].T
    return err, num, den


def _enumerate_metrics_loop(n_cells, pts_cell, pts_y, pts_z, mass, joint, prime, p):
    n_clf = 1 << n_cells
    n_dist = mass.shape[0]
    n_pts = pts_cell.shape[0]
    err = np.zeros((n_clf, n_dist))
    num = np.zeros((n_clf, n_dist, p))
    den = np.zeros((n_clf, n_dist, p))
    for c in range(n_clf):
        for j in range(n_pts):
            f = (c >> pts_cell[j]) & 1
            yj = pts_y[j]
            g = pts_z[j] - 1
            wj = joint[f, yj]
            wp = prime[f, yj]
            for d in range(n_dist):
                mj = mass[d, j]
                if f != yj:
                    err[c, d] += mj
                num[c, d, g] += wj * mj
                den[c, d, g] += wp * mj
    return err, num, den


if HAVE_NUMBA:
    group_event_sums_numba = njit(cache=True)(_group_event_sums_loop)
    scaling_objective_numba = njit(cache=True)(_scaling_objective_loop)
    scaling_grid_min_numba = njit(cache=True)(_scaling_grid_min_loop)
    enumerate_metrics_numba = njit(cache=True)(_enumerate_metrics_loop)

    def group_event_sums(pos, y, z, joint, prime, p):
        return group_event_sums_numba(
            np.ascontiguousarray(pos, dtype=np.float64),
            np.ascontiguousarray(y, dtype=np.int64),
            np.ascontiguousarray(z, dtype=np.int64),
            np.ascontiguousarray(joint, dtype=np.float64),
            np.ascontiguousarray(prime, dtype=np.float64),
            int(p),
        )

    def scaling_objective(etas, lam, gam):
        return scaling_objective_numba(
            np.ascontiguousarray(etas, dtype=np.float64),
            np.ascontiguousarray(lam, dtype=np.float64),
            np.ascontiguousarray(gam, dtype=np.float64),
        )

    def scaling_grid_min(lam, gam, budget, steps):
        v, eta = scaling_grid_min_numba(
            np.ascontiguousarray(lam, dtype=np.float64),
            np.ascontiguousarray(gam, dtype=np.float64),
            float(budget),
            int(steps),
        )
        return float(v), eta

    def enumerate_metrics(n_cells, pts_cell, pts_y, pts_z, mass, joint, prime, p):
        return enumerate_metrics_numba(
            int(n_cells),
            np.ascontiguousarray(pts_cell, dtype=np.int64),
            np.ascontiguousarray(pts_y, dtype=np.int64),
            np.ascontiguousarray(pts_z, dtype=np.int64),
            np.ascontiguousarray(mass, dtype=np.float64),
            np.ascontiguousarray(joint, dtype=np.float64),
            np.ascontiguousarray(prime, dtype=np.float64),
            int(p),
        )

else:
    group_event_sums = group_event_sums_numpy
    scaling_objective = scaling_objective_numpy
    scaling_grid_min = scaling_grid_min_numpy
    enumerate_metrics = enumerate_metrics_numpy
