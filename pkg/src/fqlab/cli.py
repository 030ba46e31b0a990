"""Command-line front end.

``fqlab <command> (--input system.json | --example NAME) [options]``

Every command prints a JSON report (sorted keys, config echo and seed
included) and writes its artifacts to ``--out`` when given.  Exit codes:
0 checks passed, 1 checks failed, 2 input error.  ``FQLAB_LOG`` sets the
log level (e.g. ``INFO``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

log = logging.getLogger("fqlab")

COMMANDS = ("analyze", "zeros", "density", "spectrum", "psf-check", "stability", "example")
ASSUMPTION = ("declared irrational constants are treated as algebraically independent over Q "
              "and enter numerics at 50 significant digits")


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument handling


def _csv_list(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"{text!r} must be positive")
        return v
    return parse


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="system JSON file")
    src.add_argument("--example", help="poisson | kurasov-sarnak | sine-pair | ex41 | ex42")
    ex = common.add_argument_group("example parameters")
    ex.add_argument("--omega", type=_csv_list, help="two frequencies, e.g. 1,1.41421356")
    ex.add_argument("--n", type=_positive(int), help="dimension for ex41/ex42")
    ex.add_argument("--delta", help="delta for ex42 / sine-pair (exact, e.g. 1/2 or 0.5)")
    ex.add_argument("--b", type=_csv_list, help="last row of M for ex41/ex42")
    ex.add_argument("--s", type=_csv_list, help="s_j for ex41")
    ex.add_argument("--period", help="period of the poisson example")
    knobs = common.add_argument_group("numerical knobs")
    knobs.add_argument("--R", type=_positive(float), help="scan radius")
    knobs.add_argument("--im-band", type=_positive(float), default=1.0, help="|Im| band for zero scans")
    knobs.add_argument("--cutoff", type=_positive(float), help="spectrum cutoff radius")
    knobs.add_argument("--degree", type=_positive(int), help="truncation degree for vertex expansions")
    knobs.add_argument("--rational-q", type=_csv_list, help="denominators for rational approximation")
    knobs.add_argument("--tol", type=_positive(float), help="tolerance of the command's main check")
    knobs.add_argument("--seed", type=int, default=0)
    knobs.add_argument("--threads", type=_positive(int), default=1, help="cap on worker threads")
    knobs.add_argument("--out", help="directory for CSV/JSON artifacts")

    parser = argparse.ArgumentParser(prog="fqlab", description="Zero sets of trigonometric systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "analyze": "Newton data, unfolded test, mixed volume, BKK number, period group",
        "zeros": "zeros in the box [-R, R]^n",
        "density": "zero density against n! V and the realness verdict",
        "spectrum": "lattice spectrum with the vertex route, or rational-approximation spectra",
        "psf-check": "two-sided summation-formula certificate",
        "stability": "amoeba sample, stability screen, half-space test",
        "example": "print an example system as JSON",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _set_threads(k):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(k))


def _config(args):
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _load(args):
    from .builders import build
    from .exposys import SystemFormatError, load_system
    if args.input:
        try:
            P, M, gens = load_system(args.input, mode="exact")
        except OSError as exc:
            raise InputError(f"cannot read {args.input}: {exc.strerror}") from exc
        except SystemFormatError as exc:
            raise InputError(str(exc)) from exc
        return P, M, gens
    params = {}
    if args.omega is not None:
        if len(args.omega) != 2:
            raise InputError("--omega needs two comma-separated values")
        params["omega"] = tuple(args.omega)
    if args.n is not None:
        params["n"] = args.n
    if args.delta is not None:
        params["delta"] = args.delta
    if args.b is not None:
        params["b"] = args.b
    if args.s is not None:
        params["s"] = args.s
    if args.period is not None:
        params["period"] = args.period
    try:
        P, M = build(args.example, **params)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise InputError(str(exc)) from exc
    return P, M, None


def _jsonable(x):
    import numpy as np
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "to_json"):
        return _jsonable(x.to_json())
    return x


def _dump(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _outdir(args):
    if not args.out:
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write(args, name, text):
    d = _outdir(args)
    if d is not None:
        (d / name).write_text(text, encoding="utf-8")


def _is_periodic(M, n):
    return M.is_rational and M.rationality_rank == n


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args, P, M):
    from .exposys import compose, period_group
    from .polytope import is_unfolded, mixed_volume
    F = compose(P, M)
    n = F.n
    try:
        T = F.newton_tuple()
        exact = True
    except ValueError:
        T = F.newton_tuple_approx()
        exact = False
    cert = is_unfolded(T)
    V = mixed_volume(T)
    bkk = math.factorial(n) * V
    pg = period_group(F)
    report = {
        "newton_polytopes": [p.to_json() for p in T.polytopes],
        "newton_exact": exact,
        "unfolded": {"verdict": bool(cert), "witness": list(cert.witness) if cert.witness else None,
                     "checked_directions": cert.checked_directions},
        "mixed_volume": V,
        "bkk_number": bkk,
        "predicted_density": float(bkk),
        "period_group": pg if isinstance(pg, str) else [[str(x) for x in r] for r in pg],
        "rank_M": M.rank,
        "rationality_rank": M.rationality_rank,
    }
    if not M.is_rational:
        report["assumption"] = ASSUMPTION
    return report, bool(cert)


def cmd_zeros(args, P, M):
    from .exposys import compose
    from .zerofind import predicted_density, trig_zeros_box, write_zeros_csv
    F = compose(P, M)
    n = F.n
    R = args.R or 10.0
    zs = trig_zeros_box(F, [(-R, R)] * n, im_band=args.im_band)
    d = _outdir(args)
    if d is not None:
        write_zeros_csv(zs, d / "zeros.csv", n)
    locs = zs.locations.reshape(-1, n) if len(zs) else None
    max_im = float(abs(locs.imag).max()) if locs is not None else 0.0
    vol = (2 * R) ** n
    report = {"box": [[-R, R]] * n, "count": zs.total_multiplicity, "distinct": len(zs),
              "box_density": zs.total_multiplicity / vol, "predicted_density": predicted_density(F)[0],
              "max_abs_im": max_im, "stats": zs.stats}
    return report, True


def cmd_density(args, P, M):
    from .exposys import compose
    from .stability import REAL_VERDICT, realness_by_density
    from .zerofind import density, trig_zeros_box
    F = compose(P, M)
    R = args.R or 10.0
    tol = args.tol or 0.05
    zs = trig_zeros_box(F, [(-R, R)] * F.n, im_band=args.im_band)
    res = realness_by_density(F, R, im_band=args.im_band, gap_tol=tol, zeros=zs)
    res.pop("estimate")
    curve = density(F, [R * f for f in (0.25, 0.5, 0.75, 1.0)], zeros=zs)
    report = {"realness": res, "density_curve": curve.to_json(), "relative_gap": curve.relative_gap}
    ok = curve.relative_gap <= tol and res["verdict"] == REAL_VERDICT
    return report, ok


def cmd_spectrum(args, P, M):
    from .exposys import compose, periodic_factorization
    from .spectral import (compare_spectra, default_family, direct_side, growth_fit, lattice_spectrum,
                           rational_approx_spectrum, solve_combinatorial_coefficients, vertex_spectrum)
    F = compose(P, M)
    n = F.n
    d = _outdir(args)
    tol = args.tol or 1e-7
    if _is_periodic(M, n):
        cutoff = args.cutoff or 5.0
        pf = periodic_factorization(P, M)
        pf.populate_cosets()
        lat = lattice_spectrum(pf, cutoff)
        report = {"periodic": True, "B": [[str(x) for x in r] for r in pf.B], "det_B": pf.det_B,
                  "cosets": pf.L, "coset_source": pf.coset_source, "atoms": len(lat), "dropped": lat.dropped,
                  "cutoff": cutoff}
        ok = True
        if n <= 2:
            fit = solve_combinatorial_coefficients(pf, seed=args.seed)
            vs = vertex_spectrum(pf, cutoff, fit=fit, D=args.degree)
            gap, agree = compare_spectra(lat, vs, tol)
            report["vertex_route"] = {"coefficients": {",".join(map(str, v)): k for v, k in
                                                       sorted(fit.coefficients.items())},
                                      "fit_residual": fit.residual, "heldout_residual": fit.heldout_residual,
                                      "max_atom_gap": gap}
            ok = bool(agree) and fit.heldout_residual < tol
        g = growth_fit(lat)
        report["growth_fit"] = {"C": g["C"], "N": g["N"], "margin": g["margin"]}
        if d is not None:
            _write_spectrum_csv(lat, d / "spectrum.csv")
        return report, ok
    qs = [int(q) for q in args.rational_q] if args.rational_q else ([10, 100, 1000] if n == 1 else [10, 50])
    h = default_family(n)[0]
    direct, tail, info = direct_side(F, h, None, im_band=args.im_band)
    cutoff = args.cutoff or 3.0
    # folded approximations count only when their zero count certifies a complete, finite set
    steps, gaps = rational_approx_spectrum(P, M, qs, h, cutoff=cutoff, folded="count")
    to_direct = [abs(st.value - direct) for st in steps]
    decreasing = all(gaps[i + 1] < gaps[i] for i in range(len(gaps) - 1))
    toward = all(to_direct[i + 1] < to_direct[i] for i in range(len(to_direct) - 1))
    if d is not None:
        for st in steps:
            _write_spectrum_csv(st.spectrum, d / f"spectrum_q{st.q}.csv")
    report = {"periodic": False, "test_function": h.to_json(), "denominators": [st.q for st in steps],
              "det_B": [st.det_B for st in steps], "cosets": [st.L for st in steps],
              "zero_set": [st.zero_set for st in steps],
              "spectral_values": [st.value for st in steps], "cauchy_gaps": gaps,
              "direct": direct, "direct_tail": tail, "gaps_to_direct": to_direct,
              "cauchy_decreasing": decreasing, "approaching_direct": toward, "cutoff": cutoff,
              "assumption": ASSUMPTION}
    return report, len(steps) >= 2 and decreasing and toward


def _write_spectrum_csv(spec, path):
    import csv
    n = spec.s.shape[1] if spec.s.ndim == 2 else 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"s_{i + 1}" for i in range(n)] + ["re_a", "im_a"])
        for row in spec.to_rows():
            w.writerow([f"{x:.17g}" for x in row])


def cmd_psf_check(args, P, M):
    from .exposys import compose, periodic_factorization
    from .spectral import (default_family, direct_side, fq_certificate, residue_sum, solve_combinatorial_coefficients,
                           spectral_side, vertex_spectrum)
    from .stability import realness_by_density
    F = compose(P, M)
    n = F.n
    R = args.R or 10.0
    real = realness_by_density(F, R, im_band=args.im_band)
    real.pop("estimate")
    qs = [int(q) for q in args.rational_q] if args.rational_q else None
    kw = {"realness": real["verdict"], "denominators": qs, "cutoff": args.cutoff, "im_band": args.im_band}
    if args.tol:
        kw["tol_periodic" if _is_periodic(M, n) else "tol_aperiodic"] = args.tol
    report = fq_certificate(P, M, **kw)
    report["realness_check"] = real
    ok = report["verdict"] == "pass"
    if _is_periodic(M, n) and n <= 2 and ok:
        # the two further routes of the periodic formula
        pf = periodic_factorization(P, M)
        pf.populate_cosets()
        fit = solve_combinatorial_coefficients(pf, seed=args.seed)
        routes = []
        for h in default_family(n):
            dval, _, _ = direct_side(F, h, pf)
            sval = spectral_side(pf, h)
            rval = residue_sum(pf, h)
            vs = vertex_spectrum(pf, h.half_width * math.sqrt(n) + 1e-9, fit=fit, D=args.degree)
            vval = complex(sum(a * w for a, w in zip(vs.a, h.h(vs.s))))
            vals = [dval, sval, rval, vval]
            worst = max(abs(a - b) for a in vals for b in vals)
            routes.append({"direct": dval, "lattice": sval, "residue": rval, "vertex": vval, "max_pair_gap": worst})
            ok &= worst <= (args.tol or 1e-8)
        report["routes"] = routes
        report["verdict"] = "pass" if ok else "fail"
    if not M.is_rational:
        report["assumption"] = ASSUMPTION
    return report, ok


def cmd_stability(args, P, M):
    import numpy as np
    from .exposys import compose
    from .stability import (REAL_VERDICT, amoeba_sample, halfspace_row_test, m_stability_check,
                            realness_by_density, write_amoeba_csv)
    F = compose(P, M)
    report = {}
    if P.n <= 2:
        amoeba = amoeba_sample(P, 8, np.linspace(-1.0, 1.0, 5))
        report["amoeba"] = {"points": len(amoeba), **amoeba.meta}
        d = _outdir(args)
        if d is not None:
            write_amoeba_csv(amoeba, d / "amoeba.csv")
    stab = m_stability_check(P, M, seed=args.seed)
    hs, y = halfspace_row_test(M, return_witness=True)
    real = realness_by_density(F, args.R or 10.0, im_band=args.im_band)
    real.pop("estimate")
    report.update({"m_stability": stab, "halfspace_rows": {"verdict": hs, "witness": y}, "realness": real})
    ok = stab["verdict"] == "consistent" and real["verdict"] == REAL_VERDICT
    return report, ok


def cmd_example(args, P, M):
    from .exposys import system_to_json
    doc = system_to_json(P, M)
    # a bare copy that --input accepts directly
    _write(args, "system.json", _dump(doc))
    return {"system": doc}, True


HANDLERS = {
    "analyze": cmd_analyze,
    "zeros": cmd_zeros,
    "density": cmd_density,
    "spectrum": cmd_spectrum,
    "psf-check": cmd_psf_check,
    "stability": cmd_stability,
    "example": cmd_example,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _set_threads(args.threads)
    level = os.environ.get("FQLAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    import numpy as np
    np.random.seed(args.seed)
    try:
        P, M, _ = _load(args)
        report, ok = HANDLERS[args.command](args, P, M)
    except InputError as exc:
        print(f"fqlab: input error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # preconditions of the underlying operation (e.g. non-square system)
        print(f"fqlab: {args.command}: {exc}", file=sys.stderr)
        return 2
    report = {"command": args.command, "config": _config(args), "seed": args.seed,
              "status": "pass" if ok else "fail", **report}
    text = _dump(report)
    _write(args, f"{args.command}.json", text)
    sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
