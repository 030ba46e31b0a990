"""Amoebas, stability screening along ``M R^n``, and realness by density.

A zero ``x`` of ``F(x) = P(exp(2 pi i M x))`` has ``log|z| = -2 pi M Im x``,
so nonreal zeros of ``F`` are exactly the zeros of ``P`` whose log-modulus
vector lies on the subspace ``M R^n`` away from the origin.  The checks here
are numerical screens: they can find violations, and otherwise report the
resolution at which none were found.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from . import _exact
from ._lp import feasible_point, nonzero_cone_point
from .exposys import ExponentMap, LaurentSystem, TrigSystem, _mpf_to_fraction, compose
from .zerofind import (BKKMismatchError, _laurent_zeros_1d, _laurent_zeros_2d, damped_newton, density,
                       trig_zeros_box)

__all__ = [
    "AmoebaSample",
    "amoeba_sample",
    "m_stability_check",
    "halfspace_row_test",
    "halfspace_row_test_dual",
    "realness_by_density",
    "ap_scan",
    "write_amoeba_csv",
    "REAL_VERDICT",
    "NONREAL_VERDICT",
]

log = logging.getLogger(__name__)

REAL_VERDICT = "all real (numerical)"
NONREAL_VERDICT = "nonreal zeros present or undecided"
AMOEBA_TOL = 1e-10


# ---------------------------------------------------------------------------
# amoeba sampling


@dataclass
class AmoebaSample:
    """Log-modulus points ``(ln|z_1|, ..., ln|z_m|)`` of verified zeros of ``P``."""

    points: np.ndarray
    residuals: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)


def _specialise(P: LaurentSystem, fixed):
    """Substitute numeric values for the last ``m - n`` variables."""
    n = P.n
    polys = []
    for p in P.to_double().polys:
        acc = {}
        for k, c in p:
            mono = complex(c) * complex(np.prod([w ** e for w, e in zip(fixed, k[n:])])) if len(fixed) else complex(c)
            head = tuple(k[:n])
            acc[head] = acc.get(head, 0j) + mono
        polys.append(tuple((k, c) for k, c in sorted(acc.items()) if abs(c) > 1e-300))
    return LaurentSystem(n, tuple(polys), "double")


def _polish(P: LaurentSystem, z, iters=8):
    """Newton on the first ``n`` coordinates with the rest held fixed."""
    n = P.n
    z = np.asarray(z, dtype=complex).copy()
    for _ in range(iters):
        v = P.evaluate(z)
        J = P.jacobian(z)[:, :n]
        try:
            dz = np.linalg.solve(J, v)
        except np.linalg.LinAlgError:
            break
        z[:n] -= dz
        if np.linalg.norm(dz) < 1e-16 * max(1.0, np.linalg.norm(z)):
            break
    return z


def amoeba_sample(P: LaurentSystem, fiber_grid=8, radius_grid=None, *, tol=AMOEBA_TOL) -> AmoebaSample:
    """Sample the amoeba of ``P`` by fixing the last ``m - n`` coordinates.

    For every log-radius vector ``r`` in ``radius_grid`` (shape ``(K, m - n)``)
    and every angle vector on a ``fiber_grid``-point grid per free coordinate,
    the remaining square system in ``z_1..z_n`` is solved and every zero whose
    residual in ``P`` is below ``tol`` contributes its log-modulus vector.
    Square systems (``m = n``) ignore both grids.
    """
    m, n = P.m, P.n
    if n > 2:
        raise ValueError("amoeba sampling supports n <= 2")
    free = m - n
    Pd = P.to_double()
    if free == 0:
        fibers = [np.zeros(0, complex)]
    else:
        if radius_grid is None:
            radius_grid = np.linspace(-1.0, 1.0, 5)
        R = np.asarray(radius_grid, float).reshape(-1, free)
        if np.isscalar(fiber_grid) or np.ndim(fiber_grid) == 0:
            angles = np.arange(int(fiber_grid)) / int(fiber_grid)
        else:
            angles = np.asarray(fiber_grid, float)
        thetas = np.array(list(itertools.product(angles, repeat=free)))
        fibers = [np.exp(r + 2j * np.pi * th) for r in R for th in thetas]
    pts, res = [], []
    solve = _laurent_zeros_1d if n == 1 else _laurent_zeros_2d
    failed = 0
    for w in fibers:
        S = _specialise(P, w)
        try:
            zs = solve(S)
        except (BKKMismatchError, ValueError, ZeroDivisionError):
            failed += 1
            continue
        for z in zs:
            full = np.concatenate([np.asarray(z.location, complex), w])
            full = _polish(Pd, full)
            r = float(np.linalg.norm(Pd.evaluate(full)))
            if r < tol:
                pts.append(np.log(np.abs(full)))
                res.append(r)
    meta = {"fibers": len(fibers), "failed_fibers": failed, "free_coordinates": free, "tol": tol}
    pts = np.array(pts).reshape(-1, m)
    return AmoebaSample(pts, np.array(res), meta)


def write_amoeba_csv(sample: AmoebaSample, path):
    import csv
    m = sample.points.shape[1] if sample.points.ndim == 2 else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"r_{i + 1}" for i in range(m)])
        for p in sample.points:
            w.writerow([f"{x:.17g}" for x in p])


# ---------------------------------------------------------------------------
# stability along M R^n


def m_stability_check(P: LaurentSystem, M: ExponentMap, t_grid=None, *, starts=4, seed=0, t_min=1e-3,
                      tol=AMOEBA_TOL):
    """Search for zeros of ``P`` with log-modulus ``M t``, ``t != 0``.

    Least squares over ``(t, theta)`` on ``z = exp(M t + 2 pi i theta)``
    starting from every ``t`` in ``t_grid`` and ``starts`` random angles.
    A converged point with ``|t| > t_min`` and ``|P(z)| < tol`` is a
    violation.  The angles ``theta`` are free, so the amoeba point need not
    sit on the image of a complex ``x``; when ``M`` is rational the torus
    orbit of ``M R^n`` is closed and ``-t / (2 pi)`` (reported as ``im_x``)
    is only close to the imaginary part of a zero of ``F = P o exp(2 pi i M .)``.
    The witness therefore also carries ``x``: a nonreal zero of ``F`` found by
    damped Newton seeded at ``Im x = im_x`` (``None`` if no seed converged).
    """
    n, m = M.n, M.m
    Mf = M.float_matrix()
    Pd = P.to_double()
    rng = np.random.default_rng(seed)
    if t_grid is None:
        axis = np.linspace(-1.0, 1.0, 9)
        t_grid = np.array(list(itertools.product(axis, repeat=n)))
    T = np.asarray(t_grid, float).reshape(-1, n)
    T = T[np.linalg.norm(T, axis=1) > t_min]
    scale = max(abs(complex(c)) for p in Pd.polys for _, c in p)

    def z_of(v):
        t, th = v[:n], v[n:]
        return np.exp(Mf @ t + 2j * np.pi * th)

    def resid(v):
        val = Pd.evaluate(z_of(v)) / scale
        return np.concatenate([val.real, val.imag])

    best = None
    for t0 in T:
        for _ in range(starts):
            v0 = np.concatenate([t0, rng.uniform(0, 1, m)])
            try:
                sol = least_squares(resid, v0, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400)
            except (ValueError, FloatingPointError):
                continue
            v = sol.x
            if not np.all(np.isfinite(v)):
                continue
            r = float(np.linalg.norm(Pd.evaluate(z_of(v))))
            tn = float(np.linalg.norm(v[:n]))
            if tn > t_min and (best is None or r < best[0]):
                best = (r, v)
            if tn > t_min and r < tol:
                t = v[:n]
                im_x = -t / (2 * np.pi)
                x, fres = _composed_zero_near(P, M, im_x, t_min / (2 * np.pi))
                return {"verdict": "violated",
                        "witness": {"t": t.tolist(), "theta": (v[n:] % 1.0).tolist(),
                                    "log_modulus": (Mf @ t).tolist(), "residual": r,
                                    "im_x": im_x.tolist(),
                                    "x": None if x is None else [[float(c.real), float(c.imag)] for c in x],
                                    "x_residual": fres},
                        "grid_points": int(len(T)), "starts": starts}
    return {"verdict": "consistent", "grid_points": int(len(T)), "starts": starts, "t_min": t_min,
            "t_range": [float(T.min()) if T.size else 0.0, float(T.max()) if T.size else 0.0],
            "smallest_residual_off_origin": best[0] if best else None}


def _composed_zero_near(P, M, im_x, im_min, *, width=4.0, pitch=0.05, tol=1e-11):
    """Nonreal zero of ``P o exp(2 pi i M .)`` closest in ``Im`` to ``im_x``."""
    F = compose(P, M)
    n = F.n
    k = max(2, int(round(width / pitch)) if n == 1 else int(round(width / (4 * pitch))))
    axis = np.linspace(0.0, width, k, endpoint=False)
    re = np.array(list(itertools.product(axis, repeat=n)))
    X, res, _ = damped_newton(F, re + 1j * im_x[None, :])
    ok = np.isfinite(res) & (res < tol) & (np.linalg.norm(X.imag, axis=1) > im_min)
    if not ok.any():
        return None, None
    idx = np.flatnonzero(ok)
    j = idx[np.argmin(np.linalg.norm(X[idx].imag - im_x, axis=1))]
    return X[j], float(res[j])


# ---------------------------------------------------------------------------
# half-space test


def _exact_rows(M):
    if isinstance(M, ExponentMap):
        if M.is_rational:
            return [[Fraction(x) for x in r] for r in M.rational_matrix()]
        mp = M.mp_matrix()
        return [[_mpf_to_fraction(mp[i, j]) for j in range(M.n)] for i in range(M.m)]
    return [[_exact.to_fraction(x) for x in r] for r in M]


def halfspace_row_test(M, return_witness=False):
    """Is there ``y != 0`` with ``M y >= 0`` (all rows in a closed half-space)?

    Exact LP over the rationals; irrational declared constants enter at
    their stored 50-digit values.
    """
    rows = _exact_rows(M)
    n = len(rows[0])
    y = nonzero_cone_point(rows, [], n)
    ok = y is not None
    return (ok, y) if return_witness else ok


def halfspace_row_test_dual(M):
    """Same question through the alternative: no such ``y`` iff ``M`` has rank ``n``
    and some strictly positive ``w`` has ``M^T w = 0``."""
    rows = _exact_rows(M)
    n = len(rows[0])
    if _exact.rank(rows) < n:
        return True
    # w = 1 + u with u >= 0:  M^T u = -M^T 1
    Mt = _exact.transpose(rows)
    rhs = [-sum(r) for r in Mt]
    return feasible_point(Mt, rhs) is None


# ---------------------------------------------------------------------------
# realness by density


def realness_by_density(F: TrigSystem, R=10.0, *, im_band=1.0, gap_tol=0.05, real_tol=1e-9, zeros=None,
                        saturation_box=2.0, saturation_factor=2.0):
    """Compare the density of real zeros with ``n! V(N(F))``.

    Verdict ``"all real (numerical)"`` requires a real-zero density gap at
    most ``gap_tol``, no nonreal zeros inside the scanned band, and band
    saturation: a doubled band (``saturation_factor``) on a sub-box of
    half-width ``saturation_box`` finds no additional zeros.
    """
    n = F.n
    est = density(F, [R], im_band=im_band, zeros=zeros, real_tol=real_tol)
    pred = est.predicted
    real_gap = abs(est.real_densities[-1] - pred) / pred if pred > 0 else float("inf")
    hw = min(saturation_box, R)
    box = [(-hw, hw)] * n
    narrow = trig_zeros_box(F, box, im_band=im_band)
    wide = trig_zeros_box(F, box, im_band=saturation_factor * im_band)
    saturated = wide.total_multiplicity == narrow.total_multiplicity
    ok = real_gap <= gap_tol and est.nonreal == 0 and saturated
    return {"verdict": REAL_VERDICT if ok else NONREAL_VERDICT, "R": R, "predicted_density": pred,
            "real_density": est.real_densities[-1], "density": est.densities[-1], "gap": real_gap,
            "nonreal_in_band": est.nonreal, "max_abs_im": est.max_abs_im, "im_band": im_band,
            "band_saturated": bool(saturated), "saturation_box": hw, "estimate": est}


# ---------------------------------------------------------------------------
# arithmetic progressions


def ap_scan(zeros, min_len=3, tol=1e-6):
    """Maximal arithmetic progressions of length ``>= min_len`` among the points.

    ``zeros`` is an array of points (real parts are used), an
    :class:`~fqlab.spectral.AtomicMeasure`, or a list of zeros.  Every pair
    ``(x_i, x_j)`` is tried as the first step; a progression is reported once,
    from its first element.  An empty result is evidence only.
    """
    if hasattr(zeros, "locations"):
        X = np.asarray(zeros.locations)
    elif len(zeros) and hasattr(zeros[0], "location"):
        X = np.array([z.location for z in zeros])
    else:
        X = np.asarray(zeros)
    X = np.real(X).astype(float)
    if X.ndim == 1:
        X = X[:, None]
    N = len(X)
    if N < min_len or min_len < 2:
        return []
    tree = cKDTree(X)
    found = []
    for i in range(N):
        D = X - X[i]
        # one orientation per pair: lexicographically positive steps
        pos = np.zeros(N, bool)
        for c in range(X.shape[1]):
            undecided = ~pos & np.all(np.abs(D[:, :c]) <= tol, axis=1) if c else ~pos
            pos |= undecided & (D[:, c] > tol)
        js = np.flatnonzero(pos)
        if js.size == 0:
            continue
        steps = D[js]
        # skip if the progression extends backwards (reported from an earlier start)
        back, _ = tree.query(X[i] - steps, distance_upper_bound=tol)
        keep = ~np.isfinite(back)
        steps = steps[keep]
        length = np.full(len(steps), 2)
        alive = np.ones(len(steps), bool)
        k = 2
        while alive.any():
            d, _ = tree.query(X[i] + k * steps[alive], distance_upper_bound=tol)
            hit = np.isfinite(d)
            idx = np.flatnonzero(alive)
            length[idx[hit]] = k + 1
            alive[idx[~hit]] = False
            k += 1
        for s, L in zip(steps, length):
            if L >= min_len:
                found.append({"start": X[i].tolist(), "step": s.tolist(), "length": int(L)})
    found.sort(key=lambda a: (-a["length"], a["start"], a["step"]))
    return found


