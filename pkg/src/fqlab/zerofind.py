"""Zeros of Laurent systems on the torus and of trigonometric systems on C^n.

Laurent systems (``n <= 2``) are solved by elimination: companion-matrix
roots in one variable, an exact resultant in two, then Newton polishing.  The
total multiplicity is compared against the BKK number and any mismatch is a
hard error.  Trigonometric systems are scanned by damped Newton from a seed
grid whose pitch follows the predicted zero density.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np
from scipy.spatial import cKDTree

from .exposys import GaussianRational, LaurentSystem, TrigSystem
from .polytope import bkk_number, is_unfolded, mixed_volume

__all__ = [
    "Zero",
    "ZeroList",
    "DensityEstimate",
    "BKKMismatchError",
    "laurent_zeros",
    "torus_zeros",
    "trig_zeros_box",
    "multiplicity",
    "density",
    "predicted_density",
    "argument_count",
    "write_zeros_csv",
]

log = logging.getLogger(__name__)

ACCEPT_TOL = 1e-10
SINGULAR_TOL = 1e-8
DEDUP_TOL = 1e-6


class BKKMismatchError(RuntimeError):
    pass


@dataclass
class Zero:
    location: np.ndarray
    multiplicity: int = 1
    residual: float = 0.0
    condition: float = float("inf")
    estimated: bool = False

    def __post_init__(self):
        self.location = np.atleast_1d(np.asarray(self.location, dtype=complex))


class ZeroList(list):
    """List of :class:`Zero` with scan statistics in ``stats``."""

    def __init__(self, items=(), stats=None):
        super().__init__(items)
        self.stats = dict(stats or {})

    @property
    def locations(self):
        if not self:
            return np.zeros((0, 0), dtype=complex)
        return np.array([z.location for z in self])

    @property
    def total_multiplicity(self):
        return sum(z.multiplicity for z in self)


# ---------------------------------------------------------------------------
# Laurent systems


def _sympy_coef(c):
    import sympy as sp
    if isinstance(c, GaussianRational):
        re, im = c.re, c.im
    else:
        c = complex(c)
        re, im = Fraction(c.real), Fraction(c.imag)
    return sp.Rational(re.numerator, re.denominator) + sp.I * sp.Rational(im.numerator, im.denominator)


def _cleared_poly(terms, gens, shift):
    import sympy as sp
    expr = sp.Integer(0)
    for k, c in terms:
        mono = sp.Integer(1)
        for g, e, s in zip(gens, k, shift):
            mono *= g ** (e - s)
        expr += _sympy_coef(c) * mono
    return sp.Poly(expr, *gens)


def _poly_roots_with_mult(p):
    """Distinct roots and multiplicities of a univariate sympy Poly (exact sqf)."""
    out = []
    for factor, mult in p.sqf_list()[1]:
        coeffs = [complex(x) for x in factor.all_coeffs()]
        if len(coeffs) <= 1:
            continue
        for r in np.roots(coeffs):
            out.append((r, mult))
    return out


def _newton_laurent(Q, z, iters=60):
    """Polish ``z``; NaNs if an iterate leaves the torus (a zero or non-finite coordinate)."""
    z = np.asarray(z, dtype=complex).copy()
    for _ in range(iters):
        v = Q.evaluate(z)
        J = Q.jacobian(z)
        try:
            dz = np.linalg.solve(J, v)
        except np.linalg.LinAlgError:
            break
        z = z - dz
        if np.any(z == 0) or not np.all(np.isfinite(z)):
            return np.full_like(z, np.nan)
        if np.linalg.norm(dz) <= 1e-16 * max(1.0, np.linalg.norm(z)):
            break
    return z


def _relative_residual(Q, z):
    """``max_j |q_j(z)| / sum_k |c_k z^k|``, computed in log space.

    Measuring each polynomial against its own terms matters near toric
    infinity: for unfolded data one polynomial is dominated by a single
    monomial there, so spurious far-away points score close to 1.
    """
    logz = np.log(np.asarray(z, dtype=complex))
    worst = 0.0
    for p in Q.polys:
        K = np.array([k for k, _ in p], dtype=float)
        logt = np.log(np.array([complex(c) for _, c in p])) + K @ logz
        t = np.exp(logt - np.max(logt.real))
        worst = max(worst, float(abs(t.sum()) / np.abs(t).sum()))
    return worst


def _finish_zero(Q, z):
    Qd = Q.to_double()
    res = float(np.linalg.norm(Qd.evaluate(z)))
    J = Qd.jacobian(z)
    cond = float(abs(np.linalg.det(J)))
    return res, cond


def _laurent_zeros_1d(Q: LaurentSystem):
    import sympy as sp
    z = sp.Symbol("z")
    terms = Q.polys[0]
    lo = min(k[0] for k, _ in terms)
    p = _cleared_poly(terms, [z], [lo])
    zs = []
    Qd = Q.to_double()
    for r, mult in _poly_roots_with_mult(p):
        if abs(r) < 1e-300:
            continue
        if mult == 1:
            polished = _newton_laurent(Qd, np.array([r]))[0]
            r = polished if np.isfinite(polished) else r
        res, cond = _finish_zero(Qd, np.array([r]))
        zs.append(Zero(np.array([r]), mult, res, cond))
    return zs


def _laurent_zeros_2d(Q: LaurentSystem, swap=False):
    import sympy as sp
    z1, z2 = sp.symbols("z1 z2")
    Qd = Q.to_double()
    polys = Q.polys
    if swap:
        polys = tuple(tuple(((k[1], k[0]), c) for k, c in p) for p in polys)
    lows = [[min(k[i] for k, _ in p) for i in range(2)] for p in polys]
    p1 = _cleared_poly(polys[0], [z1, z2], lows[0])
    p2 = _cleared_poly(polys[1], [z1, z2], lows[1])
    R = sp.Poly(sp.resultant(p1.as_expr(), p2.as_expr(), z2), z1)
    if R.is_zero:
        raise BKKMismatchError("resultant vanishes identically (common factor)")
    cands = []
    for r1, _mult in _poly_roots_with_mult(R):
        if abs(r1) < 1e-12:
            continue
        # numeric univariate polys in z2 at z1 = r1
        c1 = _numeric_slice(polys[0], lows[0], r1)
        c2 = _numeric_slice(polys[1], lows[1], r1)
        base = c1 if len(c1) >= 2 else c2
        if len(base) < 2:
            continue
        for r2 in np.roots(base):
            if abs(r2) < 1e-12 or not np.isfinite(r2):
                continue
            cands.append(np.array([r1, r2]) if not swap else np.array([r2, r1]))
    found = []
    for c in cands:
        zc = _newton_laurent(Qd, c)
        if not np.all(np.isfinite(zc)) or np.any(np.abs(zc) < 1e-12):
            continue
        if _relative_residual(Qd, zc) > 1e-9:
            continue
        if any(np.linalg.norm(zc - f) <= 1e-7 * max(1.0, np.linalg.norm(f)) for f in found):
            continue
        found.append(zc)
    zs = []
    for zc in found:
        res, cond = _finish_zero(Qd, zc)
        zs.append(Zero(zc, 1, res, cond))
    return zs


def _numeric_slice(terms, low, r1):
    """Coefficients (highest first) in z2 of the cleared polynomial at z1 = r1."""
    deg = max(k[1] - low[1] for k, _ in terms)
    coeffs = np.zeros(deg + 1, dtype=complex)
    for k, c in terms:
        coeffs[deg - (k[1] - low[1])] += complex(c) * r1 ** (k[0] - low[0])
    nz = np.flatnonzero(np.abs(coeffs) > 1e-14 * np.max(np.abs(coeffs)))
    return coeffs[nz[0]:] if nz.size else coeffs[:0]


def _perturbed_cluster_count(Q: LaurentSystem, z, radius=1e-2, eps=1e-6, seed=0):
    rng = np.random.default_rng(seed)
    Qd = Q.to_double()
    polys = []
    for p in Qd.polys:
        polys.append(tuple((k, c * (1 + eps * (rng.standard_normal() + 1j * rng.standard_normal())))
                           for k, c in p))
    Qp = LaurentSystem(Q.m, tuple(polys), "double")
    zp = _laurent_zeros_2d(Qp) if Q.n == 2 else _laurent_zeros_1d(Qp)
    return sum(1 for w in zp if np.linalg.norm(w.location - z) < radius * max(1.0, np.linalg.norm(z)))


def laurent_zeros(Q: LaurentSystem, check_unfolded=True) -> ZeroList:
    """All zeros of a square Laurent system on ``C*^n`` (``n`` in {1, 2}).

    Raises :class:`BKKMismatchError` unless the total multiplicity equals
    ``n! V(N(Q))``.
    """
    n = Q.n
    if Q.m != n:
        raise ValueError("laurent_zeros needs a square system")
    if n not in (1, 2):
        raise ValueError("laurent_zeros supports n in {1, 2}")
    T = Q.newton_tuple()
    if check_unfolded and not is_unfolded(T):
        raise ValueError("Newton data of Q is not unfolded")
    expected = bkk_number(T)
    if expected == 0:
        return ZeroList([], {"bkk": 0})
    if n == 1:
        zs = _laurent_zeros_1d(Q)
    else:
        zs = None
        for swap in (False, True):
            try:
                zs = _laurent_zeros_2d(Q, swap)
            except BKKMismatchError:
                zs = None
                continue
            for z in zs:
                if z.condition <= SINGULAR_TOL:
                    z.multiplicity = max(1, _perturbed_cluster_count(Q, z.location))
                    z.estimated = True
            if sum(z.multiplicity for z in zs) == expected:
                break
    total = sum(z.multiplicity for z in zs) if zs is not None else -1
    if total != expected:
        raise BKKMismatchError(f"found total multiplicity {total}, BKK number {expected}")
    zs.sort(key=lambda z: tuple(np.round(z.location.real, 12)) + tuple(np.round(z.location.imag, 12)))
    return ZeroList(zs, {"bkk": expected})


def _wrap_torus(zs):
    """Identify zeros that sit on opposite faces of the unit cube (same torus point)."""
    if len(zs) == 0:
        return zs
    X = np.array([z.location for z in zs])
    re = X.real % 1.0
    re = np.where(re > 1.0 - 1e-9, re - 1.0, re)
    X = re + 1j * X.imag
    res = np.array([z.residual for z in zs])
    idx = np.arange(len(zs))
    Xk, _, kept, _ = _dedup(X, res, idx.astype(float))
    out = []
    for x, i in zip(Xk, kept.astype(int)):
        z = zs[i]
        out.append(Zero(x, z.multiplicity, z.residual, z.condition, z.estimated))
    return ZeroList(out, dict(zs.stats, wrapped=len(zs) - len(out)))


def torus_zeros(Q: LaurentSystem, im_band=None) -> ZeroList:
    """Zeros of ``Q`` found by scanning ``x -> Q(exp(2 pi i x))`` over ``[0,1)^n``.

    Intended for high-degree sparse systems where elimination is too costly.
    The count is checked against the BKK number; for ``n = 1`` a mismatch
    falls back to companion-matrix roots.
    """
    n = Q.n
    T = Q.newton_tuple()
    expected = bkk_number(T)
    freqs = tuple(np.array(Q.spectrum(j), dtype=float) for j in range(n))
    coefs = tuple(np.array([complex(c) for _, c in p]) for p in Q.polys)
    G = TrigSystem(n, freqs, coefs)
    band = 0.05 if im_band is None else im_band
    zs = trig_zeros_box(G, [(0.0, 1.0)] * n, im_band=band, half_open=True, density_hint=float(expected))
    zs = _wrap_torus(zs)
    total = zs.total_multiplicity
    if total != expected and n == 1:
        log.info("torus scan found %d of %d zeros; falling back to companion roots", total, expected)
        return laurent_zeros(Q, check_unfolded=False)
    if total != expected:
        raise BKKMismatchError(f"torus scan found {total} zeros, BKK number {expected}")
    out = []
    for z in zs:
        w = np.exp(2j * np.pi * z.location)
        out.append(Zero(w, z.multiplicity, z.residual, z.condition, z.estimated))
    return ZeroList(out, {"bkk": expected, "source": "torus_scan"})


# ---------------------------------------------------------------------------
# trigonometric scanning


def predicted_density(F: TrigSystem):
    """``n! V(N(F))`` as ``(float, Fraction)`` (rational Newton data or 30-digit rounding)."""
    try:
        T = F.newton_tuple()
        exact = True
    except ValueError:
        T = F.newton_tuple_approx()
        exact = False
    v = factorial(F.n) * mixed_volume(T)
    return float(v), v, exact


def _solve_small(J, v):
    """Batched ``J^{-1} v`` for ``n <= 2``; rows with singular ``J`` get NaN."""
    n = J.shape[-1]
    if n == 1:
        d = J[:, 0, 0]
        with np.errstate(all="ignore"):
            return (v[:, 0] / d)[:, None], np.abs(d)
    if n == 2:
        a, b, c, d = J[:, 0, 0], J[:, 0, 1], J[:, 1, 0], J[:, 1, 1]
        det = a * d - b * c
        with np.errstate(all="ignore"):
            x0 = (d * v[:, 0] - b * v[:, 1]) / det
            x1 = (-c * v[:, 0] + a * v[:, 1]) / det
        return np.stack([x0, x1], axis=1), np.abs(det)
    det = np.linalg.det(J)
    out = np.full(v.shape, np.nan, dtype=complex)
    ok = np.abs(det) > 0
    out[ok] = np.linalg.solve(J[ok], v[ok][..., None])[..., 0]
    return out, np.abs(det)


def damped_newton(F: TrigSystem, X0, iters=60, tol=1e-13):
    """Vectorised damped Newton; returns final points, residual norms, |det J|.

    Seeds that run off to large imaginary parts overflow; they end with a
    non-finite residual and are simply not accepted.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _damped_newton(F, X0, iters, tol)


def _damped_newton(F, X0, iters, tol):
    X = np.array(X0, dtype=complex).reshape(-1, F.n)
    vals, jac = F.eval_and_jacobian(X)
    res = np.linalg.norm(vals, axis=1)
    active = np.isfinite(res)
    for _ in range(iters):
        idx = np.flatnonzero(active & (res > tol))
        if idx.size == 0:
            break
        step, _ = _solve_small(jac[idx], vals[idx])
        bad = ~np.all(np.isfinite(step), axis=1)
        step[bad] = 0
        active[idx[bad]] = False
        # limit step length so Newton cannot jump across many zero spacings
        norm = np.linalg.norm(step, axis=1)
        lim = 0.5
        scale = np.where(norm > lim, lim / np.maximum(norm, 1e-300), 1.0)
        step = step * scale[:, None]
        t = np.ones(idx.size)
        Xi = X[idx]
        ri = res[idx]
        newX = Xi - step
        nv, nj = F.eval_and_jacobian(newX)
        nr = np.linalg.norm(nv, axis=1)
        for _h in range(6):
            worse = ~(nr < ri) & (t > 1 / 64)
            if not worse.any():
                break
            t[worse] *= 0.5
            w = np.flatnonzero(worse)
            newX[w] = Xi[w] - t[w, None] * step[w]
            v2, j2 = F.eval_and_jacobian(newX[w])
            nv[w], nj[w], nr[w] = v2, j2, np.linalg.norm(v2, axis=1)
        X[idx], vals[idx], jac[idx], res[idx] = newX, nv, nj, nr
        stalled = np.linalg.norm(t[:, None] * step, axis=1) < 1e-15 * np.maximum(1, np.linalg.norm(Xi, axis=1))
        active[idx[stalled]] = False
    _, det = _solve_small(jac, vals)
    return X, res, det


def _dedup(X, res, det, tol=DEDUP_TOL):
    """Cluster points closer than ``tol``; keep the best residual representative."""
    if len(X) == 0:
        return X, res, det, np.zeros(0, int)
    pts = np.concatenate([X.real, X.imag], axis=1)
    order = np.lexsort(pts.T[::-1])
    pts, X, res, det = pts[order], X[order], res[order], det[order]
    tree = cKDTree(pts)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    parent = np.arange(len(X))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(X))])
    keep = []
    sizes = []
    for r in np.unique(roots):
        members = np.flatnonzero(roots == r)
        best = members[np.argmin(res[members])]
        keep.append(best)
        sizes.append(len(members))
    keep = np.array(keep)
    return X[keep], res[keep], det[keep], np.array(sizes)


def _seed_grid(lo, hi, pitch, im_levels):
    n = len(lo)
    axes = []
    for a, b in zip(lo, hi):
        k = max(1, int(math.ceil((b - a) / pitch)))
        axes.append(a + (np.arange(k) + 0.5) * (b - a) / k)
    re = np.array(np.meshgrid(*axes, indexing="ij")).reshape(n, -1).T
    seeds = [re + 1j * np.asarray(lvl)[None, :] for lvl in im_levels]
    return np.concatenate(seeds, axis=0)


def _im_levels(n, band):
    if band <= 0:
        return [np.zeros(n)]
    hs = [band / 2, band]
    levels = [np.zeros(n)]
    if n == 1:
        for h in hs:
            levels += [np.array([h]), np.array([-h])]
        return levels
    for h in hs:
        for s in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)]:
            v = np.zeros(n)
            v[:2] = np.array(s, dtype=float) * h
            levels.append(v)
    return levels


def trig_zeros_box(F: TrigSystem, box, im_band=1.0, *, pitch=None, density_hint=None,
                   half_open=False, tile=None, compute_multiplicity=True, im_seed_stride=1) -> ZeroList:
    """Zeros of ``F`` whose real parts lie in ``box`` (list of ``(lo, hi)``).

    Seeds form a grid of pitch ``0.5 / (n! V)^{1/n}`` over the box at several
    imaginary offsets inside ``[-im_band, im_band]^n``; converged points with
    residual below 1e-10 are kept and merged at 1e-6.  For ``n = 2`` the box
    is cut into tiles with 10% overlap and each zero is owned by the tile whose
    core contains it.
    """
    n = F.n
    lo = np.array([b[0] for b in box], float)
    hi = np.array([b[1] for b in box], float)
    if density_hint is None:
        density_hint = predicted_density(F)[0]
    if density_hint <= 0:
        raise ValueError("zero scan needs positive mixed volume")
    if pitch is None:
        pitch = 0.5 / density_hint ** (1.0 / n)
    levels = _im_levels(n, im_band)
    stats = {"seeds": 0, "converged": 0, "unconverged": 0, "pitch": pitch, "im_band": im_band,
             "im_levels": len(levels)}
    if tile is None:
        tile = max(hi - lo) if n == 1 else max(4 * pitch, min(max(hi - lo), 60 * pitch))
    ntiles = [max(1, int(math.ceil((h - l) / tile - 1e-12))) for l, h in zip(lo, hi)]
    edges = [np.linspace(l, h, k + 1) for l, h, k in zip(lo, hi, ntiles)]
    found_X, found_res, found_det = [], [], []
    for cell in np.ndindex(*ntiles):
        clo = np.array([edges[d][cell[d]] for d in range(n)])
        chi = np.array([edges[d][cell[d] + 1] for d in range(n)])
        pad = 0.1 * (chi - clo)
        slo, shi = clo - pad, chi + pad
        seeds = _seed_grid(slo, shi, pitch, levels[:1])
        if len(levels) > 1:
            extra = [_seed_grid(slo, shi, pitch * im_seed_stride, [lvl]) for lvl in levels[1:]]
            seeds = np.concatenate([seeds] + extra)
        stats["seeds"] += len(seeds)
        X, res, det = damped_newton(F, seeds)
        ok = res < ACCEPT_TOL
        stats["converged"] += int(ok.sum())
        stats["unconverged"] += int((~ok).sum())
        X, res, det = X[ok], res[ok], det[ok]
        re = X.real
        # ownership: core of this tile (outer box edges are closed unless half_open)
        upper_closed = np.array([cell[d] == ntiles[d] - 1 and not half_open for d in range(n)])
        own = np.all(re >= clo - 0.0, axis=1)
        own &= np.all(np.where(upper_closed, re <= chi, re < chi), axis=1)
        found_X.append(X[own])
        found_res.append(res[own])
        found_det.append(det[own])
    X = np.concatenate(found_X) if found_X else np.zeros((0, n), complex)
    res = np.concatenate(found_res) if found_res else np.zeros(0)
    det = np.concatenate(found_det) if found_det else np.zeros(0)
    X, res, det, sizes = _dedup(X, res, det)
    zs = []
    for x, r, d in zip(X, res, det):
        z = Zero(x, 1, float(r), float(d))
        if compute_multiplicity and d <= SINGULAR_TOL:
            m, info = multiplicity(F, x, return_info=True)
            z.multiplicity = m
            z.estimated = info["estimated"]
        zs.append(z)
    zs.sort(key=lambda z: tuple(z.location.real) + tuple(z.location.imag))
    stats["clusters_merged"] = int(np.sum(sizes > 1)) if len(sizes) else 0
    return ZeroList(zs, stats)


def argument_count(F: TrigSystem, re_lo, re_hi, im_band, samples_per_unit=None):
    """Number of zeros (with multiplicity) of a univariate ``F`` inside the
    rectangle ``[re_lo, re_hi] x [-im_band, im_band]`` by the argument principle."""
    if F.n != 1:
        raise ValueError("argument_count is univariate")
    wmax = max(float(np.max(np.abs(w))) for w in F.freqs)
    if samples_per_unit is None:
        samples_per_unit = max(200.0, 100.0 * wmax)
    L = re_hi - re_lo
    nh = max(64, int(L * samples_per_unit))
    nv = max(64, int(2 * im_band * samples_per_unit))
    bottom = np.linspace(re_lo, re_hi, nh, endpoint=False) - 1j * im_band
    right = re_hi + 1j * np.linspace(-im_band, im_band, nv, endpoint=False)
    top = np.linspace(re_hi, re_lo, nh, endpoint=False) + 1j * im_band
    left = re_lo + 1j * np.linspace(im_band, -im_band, nv, endpoint=False)
    path = np.concatenate([bottom, right, top, left, bottom[:1]])
    vals = F.evaluate(path[:, None])[:, 0]
    dphi = np.angle(vals[1:] / vals[:-1])
    if np.max(np.abs(dphi)) > 2.0:
        log.warning("argument_count: coarse sampling (max phase step %.2f)", np.max(np.abs(dphi)))
    return int(round(dphi.sum() / (2 * math.pi)))


# ---------------------------------------------------------------------------
# multiplicity


def multiplicity(F: TrigSystem, lam, *, return_info=False, radius=1e-3, nodes=512,
                 eps=1e-6, seed=0):
    """Multiplicity of the zero ``lam`` of ``F``.

    Well-conditioned zeros (``|det J| > 1e-8``) are simple.  Otherwise ``n = 1``
    uses the winding number on a circle of radius ``radius``; ``n >= 2`` perturbs
    the constant terms by ``eps`` times each component's largest coefficient
    and counts nearby simple zeros (flagged as estimated).
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    _, jac = F.eval_and_jacobian(lam[None, :])
    det = abs(np.linalg.det(jac[0]))
    if det > SINGULAR_TOL:
        m, info = 1, {"method": "jacobian", "estimated": False}
    elif F.n == 1:
        t = np.exp(2j * np.pi * np.arange(nodes + 1) / nodes)
        vals = F.evaluate((lam[0] + radius * t)[:, None])[:, 0]
        wind = np.angle(vals[1:] / vals[:-1]).sum() / (2 * math.pi)
        m = int(round(wind))
        if m < 1 or abs(wind - m) > 0.1:
            raise ValueError(f"ambiguous winding number {wind:.3f} at {lam}")
        info = {"method": "winding", "estimated": False, "winding": float(wind)}
    else:
        m = _perturbation_count(F, lam, eps, seed, radius=max(10 * radius, 1e-2))
        info = {"method": "perturbation", "estimated": True}
    return (m, info) if return_info else m


def _perturbation_count(F: TrigSystem, lam, eps, seed, radius):
    rng = np.random.default_rng(seed)
    freqs, coefs = list(F.freqs), list(F.coefs)
    for j in range(F.n):
        # relative to the component's own scale
        shift = eps * np.max(np.abs(coefs[j])) * (rng.standard_normal() + 1j * rng.standard_normal())
        freqs[j] = np.vstack([freqs[j], np.zeros((1, F.n))])
        coefs[j] = np.concatenate([coefs[j], [shift]])
    Fp = TrigSystem(F.n, tuple(freqs), tuple(coefs))
    g = np.linspace(-radius, radius, 7)
    offs = np.array(np.meshgrid(*([g] * F.n), indexing="ij")).reshape(F.n, -1).T
    seeds = np.concatenate([lam[None, :] + offs, lam[None, :] + 1j * offs])
    X, res, det = damped_newton(Fp, seeds)
    ok = (res < ACCEPT_TOL) & (np.linalg.norm(X - lam[None, :], axis=1) < radius)
    X, res, det, _ = _dedup(X[ok], res[ok], det[ok], tol=1e-9)
    if len(X) == 0:
        raise ValueError(f"perturbation lost the zero at {lam}")
    return len(X)


# ---------------------------------------------------------------------------
# density


@dataclass
class DensityEstimate:
    radii: list
    counts: list
    densities: list
    predicted: float
    relative_gap: float
    real_counts: list = field(default_factory=list)
    real_densities: list = field(default_factory=list)
    predicted_exact: bool = True
    nonreal: int = 0
    max_abs_im: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_json(self):
        return {"radii": list(self.radii), "counts": list(self.counts), "densities": list(self.densities),
                "real_counts": list(self.real_counts), "real_densities": list(self.real_densities),
                "predicted": self.predicted, "predicted_exact": self.predicted_exact,
                "relative_gap": self.relative_gap, "nonreal": self.nonreal,
                "max_abs_im": self.max_abs_im, "meta": self.meta}


def _ball_volume(n, R):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * R ** n


def density(F: TrigSystem, R_list, *, im_band=1.0, zeros=None, real_tol=1e-9, pf=None, **scan) -> DensityEstimate:
    """Weighted zero counts over balls ``|Re lambda| < R`` against ``n! V(N(F))``.

    Zeros come from ``zeros`` if given, from the coset description when a
    periodic factorization ``pf`` is supplied, else from a box scan.
    """
    R_list = sorted(float(r) for r in R_list)
    Rmax = R_list[-1]
    n = F.n
    pred, pred_exact_val, exact = predicted_density(F)
    if zeros is None:
        if pf is not None:
            pts, mults = pf.zeros_in_box([-Rmax] * n, [Rmax] * n)
            zeros = ZeroList([Zero(p, m) for p, m in zip(pts, mults)], {"source": "cosets"})
        else:
            zeros = trig_zeros_box(F, [(-Rmax, Rmax)] * n, im_band=im_band, **scan)
    locs = np.array([z.location for z in zeros]).reshape(-1, n)
    mults = np.array([z.multiplicity for z in zeros], dtype=float)
    radial = np.linalg.norm(locs.real, axis=1)
    imag = np.linalg.norm(locs.imag, axis=1)
    real = imag < real_tol
    counts, dens, rcounts, rdens = [], [], [], []
    for R in R_list:
        inside = radial < R
        c = float(mults[inside].sum())
        rc = float(mults[inside & real].sum())
        vol = _ball_volume(n, R)
        counts.append(c)
        dens.append(c / vol)
        rcounts.append(rc)
        rdens.append(rc / vol)
    gap = abs(dens[-1] - pred) / pred if pred > 0 else float("inf")
    return DensityEstimate(R_list, counts, dens, pred, gap, rcounts, rdens, exact,
                           nonreal=int((~real).sum()),
                           max_abs_im=float(imag.max()) if imag.size else 0.0,
                           meta=dict(getattr(zeros, "stats", {})))


# ---------------------------------------------------------------------------
# output


def write_zeros_csv(zeros, path_or_file, n=None):
    """CSV with columns ``re_1..re_n, im_1..im_n, multiplicity, residual``."""
    if n is None:
        n = len(zeros[0].location) if zeros else 1
    header = [f"re_{i + 1}" for i in range(n)] + [f"im_{i + 1}" for i in range(n)] + ["multiplicity", "residual"]
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for z in zeros:
            loc = z.location
            w.writerow([f"{x:.17g}" for x in loc.real] + [f"{x:.17g}" for x in loc.imag]
                       + [z.multiplicity, f"{z.residual:.3e}"])
    finally:
        if own:
            fh.close()
