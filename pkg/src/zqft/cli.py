"""Command-line interface: ``zqft <subcommand> ...``.

Every subcommand prints a JSON object (or CSV rows) with floats rounded to
15 significant digits. Parse errors exit with status 2, failed
verifications with status 1.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import __version__
from . import dnglue as dn
from . import feyngraph as fg
from . import pertpart as pp
from . import rgpetal as rg
from . import zetareg as zr
from .geometry import (Circle, Cylinder, Disk, Hemisphere, Interval, Sphere, SphericalSector,
                       Torus, parse_geometry)
from .specfun import EULER_GAMMA


class ParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# output

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.15g}") if math.isfinite(x) else str(x)
    return obj


def _rows(result):
    """Flatten a result into CSV rows: tables stay tables, records become key,value."""
    if isinstance(result, dict):
        for key in ("rows", "checks"):
            if isinstance(result.get(key), list) and result[key]:
                return result[key]
        return [{"key": k, "value": json.dumps(v) if isinstance(v, (list, dict)) else v}
                for k, v in result.items()]
    return result


def emit(result, fmt: str, out=None) -> None:
    out = out or sys.stdout
    result = _clean(result)
    if fmt == "json":
        out.write(json.dumps(result, indent=2) + "\n")
        return
    rows = _rows(result)
    fields = list(dict.fromkeys(k for row in rows for k in row))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v
                    for k, v in row.items()})
    out.write(buf.getvalue())


def write_svg(path: str, series, xlabel: str, ylabel: str, logx=False, logy=False) -> None:
    """Minimal SVG line plot. ``series`` is a list of (label, xs, ys)."""
    W, H, pad = 640, 420, 60
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = [[(tx(x), ty(y)) for x, y in zip(xs, ys)
            if (not logx or x > 0) and (not logy or y > 0)] for _, xs, ys in series]
    allx = [p[0] for s in pts for p in s] or [0, 1]
    ally = [p[1] for s in pts for p in s] or [0, 1]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    sx = lambda v: pad + (v - x0) / (x1 - x0) * (W - 2 * pad)
    sy = lambda v: H - pad - (v - y0) / (y1 - y0) * (H - 2 * pad)
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>',
             f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle">'
             f'{("log10 " if logx else "") + xlabel}</text>',
             f'<text x="15" y="{H / 2}" transform="rotate(-90 15 {H / 2})" text-anchor="middle">'
             f'{("log10 " if logy else "") + ylabel}</text>',
             f'<text x="{pad}" y="{H - pad + 18}" text-anchor="middle">{x0:.3g}</text>',
             f'<text x="{W - pad}" y="{H - pad + 18}" text-anchor="middle">{x1:.3g}</text>',
             f'<text x="{pad - 5}" y="{H - pad}" text-anchor="end">{y0:.3g}</text>',
             f'<text x="{pad - 5}" y="{pad}" text-anchor="end">{y1:.3g}</text>']
    for i, ((label, _, _), s) in enumerate(zip(series, pts)):
        c = colors[i % len(colors)]
        line = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in s)
        parts.append(f'<polyline fill="none" stroke="{c}" points="{line}"/>')
        parts.append(f'<text x="{W - pad}" y="{pad + 16 * i}" text-anchor="end" fill="{c}">'
                     f'{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# argument helpers

def _geometry(text: str):
    try:
        return parse_geometry(text)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _point(text: str | None):
    if text is None:
        return None
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ParseError(f"cannot parse point {text!r}") from None
    return vals[0] if len(vals) == 1 else tuple(vals)


def _potential(text: str) -> pp.Potential:
    try:
        return pp.Potential.parse(text)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _number(text: str) -> float | Fraction:
    try:
        return Fraction(text) if "/" in text else float(text)
    except ValueError:
        raise ParseError(f"cannot parse number {text!r}") from None


def _pieces(left, right, arcs: bool):
    if isinstance(left, Interval) and isinstance(right, Interval):
        side = ("both", "both") if arcs else ("right", "left")
    elif isinstance(left, Cylinder) and isinstance(right, Cylinder):
        side = ("top", "bottom")
    elif isinstance(left, Hemisphere) and isinstance(right, Hemisphere):
        side = ("circle", "circle")
    else:
        raise ParseError(f"cannot glue {left.kind} to {right.kind}")
    lp, rp = dn.Piece(left, side[0]), dn.Piece(right, side[1])
    try:
        dn.glued_geometry(lp, rp)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return lp, rp


def _potential_terms(pot: pp.Potential) -> list[dict]:
    return [{"k": k, "hbar_order": h2 / 2, "coefficient": c}
            for (k, h2), c in sorted(pot.terms.items())]


# ---------------------------------------------------------------------------
# subcommands

def cmd_det(a):
    g = _geometry(a.geometry)
    ld = zr.log_det_zeta(g, a.mass, a.method)
    return {"geometry": a.geometry, "mass": a.mass, "log_det": ld, "det": math.exp(ld)}


def cmd_tadpole(a):
    g = _geometry(a.geometry)
    p = _point(a.point)
    val = zr.tau_reg(g, a.mass, p) if a.scheme == "zeta" else zr.tau_split(g, a.mass, p)
    return {"geometry": a.geometry, "mass": a.mass, "point": p, "scheme": a.scheme, "tau": val}


def cmd_dn(a):
    g = _geometry(a.geometry)
    if g.dim == 1:
        return {"geometry": a.geometry, "mass": a.mass,
                "dn_matrix": dn.dn_eigenvalue(g, None, a.mass)}
    rows = []
    for n in range(a.modes + 1):
        lam = dn.dn_eigenvalue(g, a.boundary, a.mass, n, asymptotic_ok=True)
        om = dn._omega(g, a.mass, n)
        rows.append({"n": n, "lambda": lam, "omega": om, "ratio": lam / om,
                     "delta": dn.dn_delta(g, a.mass, n)})
    if a.plot:
        write_svg(a.plot, [("lambda/omega", [r["n"] for r in rows],
                            [r["ratio"] for r in rows])], "n", "lambda/omega")
    return {"geometry": a.geometry, "mass": a.mass, "rows": rows}


def cmd_delta_order(a):
    g = _geometry(a.geometry)
    lo, hi = a.n_min, a.n_max
    fit = dn.delta_order_fit(g, a.mass, (lo, hi))
    out = {"geometry": a.geometry, "mass": a.mass, "n_range": [lo, hi], **fit}
    if a.plot:
        ns = list(range(max(lo // 4, 1), hi + 1))
        write_svg(a.plot, [("|delta_n|", ns, [abs(dn.dn_delta(g, a.mass, n)) for n in ns])],
                  "n", "|delta_n|", logx=True, logy=True)
    return out


def _glue_pieces(a):
    if a.geometry is not None:
        if a.split is None or a.what != "partition":
            raise ParseError("--geometry is only used with glue partition --split")
        whole = _geometry(a.geometry)
        if not isinstance(whole, Interval) or not 0 < a.split < whole.l:
            raise ParseError("--split must cut an interval into two pieces")
        a.left = f"interval:l={a.split!r}"
        a.right = f"interval:l={whole.l - a.split!r}"
    if a.left is None or a.right is None:
        raise ParseError("glue needs --left and --right (or --geometry with --split)")
    return _geometry(a.left), _geometry(a.right)


def cmd_glue(a):
    left, right = _glue_pieces(a)
    lp, rp = _pieces(left, right, a.arcs)
    glued = dn.glued_geometry(lp, rp)
    tol = a.tol if a.tol is not None else (1e-12 if glued.dim == 1 else 1e-6)
    out = {"what": a.what, "left": a.left, "right": a.right, "glued": repr(glued),
           "mass": a.mass}
    if a.what == "det":
        out["log_det_dn"] = dn.log_det_dn(lp, rp, a.mass, a.modes)
        out["residual"] = dn.bfk_residual(lp, rp, a.mass, a.modes)
        if a.plot:
            cut = [8, 16, 32, 64, 128]
            write_svg(a.plot, [("residual", cut, [dn.bfk_residual(lp, rp, a.mass, n) or 1e-17
                                                  for n in cut])],
                      "n_max", "residual", logx=True, logy=True)
    elif a.what == "greens":
        p, q = _point(a.p), _point(a.q)
        if p is None or q is None:
            raise ParseError("glue greens needs --p and --q")
        out["G"] = dn.glued_greens(lp, rp, a.mass, p, q, a.modes)
        out["residual"] = dn.greens_glue_residual(lp, rp, a.mass, p, q, a.modes)
    elif a.what == "tadpole":
        p = _point(a.p)
        if p is None:
            raise ParseError("glue tadpole needs --p")
        kind = "closed" if left.dim == 1 else "zeta"
        fl = zr.TadpoleField(left, a.mass, kind)
        fr = zr.TadpoleField(right, a.mass, kind)
        val = dn.tadpole_glue(fl, fr, a.mass, p, a.modes)
        out["tau_glued"] = val
        out["residual"] = abs(val - zr.tau_reg(glued, a.mass, p))
        tol = a.tol if a.tol is not None else (1e-12 if glued.dim == 1 else 1e-5)
    elif a.what == "partition":
        if not (isinstance(left, Interval) and isinstance(right, Interval)) or a.arcs:
            raise ParseError("glue partition supports interval + interval only")
        res = pp.gluing_theorem_residual(left.l, right.l, a.mass, _potential(a.potential),
                                         a.tadpole, a.order)
        out["per_order"] = [{"hbar_order": i / 2, "residual": r} for i, r in enumerate(res)]
        out["residual"] = float(np.max(res))
        tol = a.tol if a.tol is not None else 1e-6
    out["tolerance"] = tol
    out["pass"] = out["residual"] < tol
    return out


def cmd_graphs(a):
    try:
        vals = {int(v) for v in a.valences.split(",")}
    except ValueError:
        raise ParseError(f"cannot parse valences {a.valences!r}") from None
    gs = fg.enumerate_graphs(a.max_half_edges, vals, a.left, a.right,
                             allow_short_loops=not a.no_short_loops,
                             low_valence=min(vals) < 3)
    rows = [{"graph": g.to_text(), "vertices": g.n_bulk, "edges": g.n_edges,
             "aut": fg.aut_order(g), "loop_order": str(fg.loop_order(g))} for g in gs]
    return {"count": len(rows), "rows": rows}


def cmd_partition(a):
    g = _geometry(a.geometry)
    if g.dim != 1:
        raise ParseError("interacting partition functions are 1D only")
    pot = _potential(a.potential)
    Z = pp.partition_function(g, a.mass, pot=pot, tadpole=a.tadpole, k_max=a.order)
    if a.eta is not None:
        try:
            grid = [float(v) for v in a.eta.split(",")]
        except ValueError:
            raise ParseError(f"cannot parse eta grid {a.eta!r}") from None
        rows = []
        for eta in itertools.product(grid, repeat=len(Z.names)):
            ser = Z.evaluate(eta)
            rows.append({"eta": list(eta),
                         **{f"hbar^{i / 2:g}": float(v) for i, v in enumerate(ser.c)}})
        return {"geometry": a.geometry, "mass": a.mass, "names": list(Z.names), "rows": rows}
    rows = []
    for exps, c in sorted(Z.poly.items()):
        for i, v in enumerate(c):
            if v != 0:
                rows.append({"eta_powers": list(exps), "hbar_order": i / 2, "value": float(v)})
    return {"geometry": a.geometry, "mass": a.mass, "names": list(Z.names),
            "gaussian_Q": Z.Q, "rows": rows}


def cmd_petal(a):
    pot = _potential(a.potential)
    tau = _number(a.tau)
    if isinstance(tau, Fraction):
        pot = pp.Potential({k: Fraction(v).limit_denominator(10**12) for k, v in pot.terms.items()},
                           low_valence=True)
    q = rg.petal_transform(pot, tau, a.order)
    return {"tau": tau, "rows": _potential_terms(q)}


def cmd_reduce(a):
    try:
        coeffs = {}
        for part in filter(None, a.potential.replace(" ", "").split(",")):
            k, _, v = part.partition("=")
            coeffs[int(k[1:])] = float(v)
    except ValueError:
        raise ParseError(f"cannot parse potential {a.potential!r}") from None
    arr = [coeffs.get(k, 0.0) for k in range(max(coeffs, default=0) + 1)]
    res = rg.reduce_low_valence(arr, a.mass)
    res["p_tilde"] = {f"p{k}": v for k, v in res["p_tilde"].items()}
    return {"mass": a.mass, **res}


def cmd_anomaly(a):
    lhs = rg.log_det_scaling(a.radius, a.mass)
    rhs = -1 / 3 + (a.mass * a.radius) ** 2
    zloc, formula = rg.anomaly_density(Sphere(a.radius), a.mass, (0.4, 0.1))
    return {"radius": a.radius, "mass": a.mass, "scaling_derivative": lhs, "expected": rhs,
            "residual": abs(lhs - rhs),
            "averaged_classical_trace": rg.averaged_classical_trace(a.radius, a.mass),
            "anomaly_density": zloc, "anomaly_density_formula": formula}


# ---------------------------------------------------------------------------
# verification matrix

def _rel(a, b):
    return abs(a - b) / abs(b)


def _check_closed_forms(quick):
    from mpmath import besseli
    worst = 0.0
    for m in (0.5, 1.0, 1.7):
        worst = max(worst,
                    _rel(math.exp(zr.log_det_zeta(Interval(1.3), m)), 2 * math.sinh(1.3 * m) / m),
                    _rel(math.exp(zr.log_det_zeta(Circle(2.0), m)), 4 * math.sinh(m) ** 2),
                    _rel(zr.tau_reg(Interval(1.3), m, 0.4),
                         math.sinh(0.4 * m) * math.sinh(0.9 * m) / (m * math.sinh(1.3 * m))),
                    _rel(zr.tau_reg(Circle(2.0), m, 0.3), 1 / (2 * m * math.tanh(m))),
                    _rel(dn.dn_eigenvalue(Disk(1.0), None, m, 0),
                         float(m * besseli(1, m) / besseli(0, m))))
    for mR in (0.2, 0.4, 0.45):
        H = dn.Piece(Hemisphere(1.0), "circle")
        worst = max(worst, _rel(math.exp(dn.log_det_dn(H, H, mR)),
                                2 * math.cos(math.pi * math.sqrt(0.25 - mR * mR))))
    return worst, 1e-10


def _check_bfk_1d(quick):
    return max(dn.bfk_residual(dn.Piece(Interval(0.6), "right"), dn.Piece(Interval(1.1), "left"), 1.0),
               dn.bfk_residual(dn.Piece(Interval(0.7), "both"), dn.Piece(Interval(1.3), "both"), 1.0)), 1e-12


def _check_bfk_2d(quick):
    n = 32 if quick else 64
    C1, C2 = dn.Piece(Cylinder(2 * math.pi, 1.0), "top"), dn.Piece(Cylinder(2 * math.pi, 1.5), "bottom")
    H = dn.Piece(Hemisphere(1.0), "circle")
    return max(dn.bfk_residual(C1, C2, 1.0, n), dn.bfk_residual(H, H, 0.4, n)), 1e-6


def _check_tadpole_glue(quick):
    f1 = zr.TadpoleField(Interval(1.0), 1.0, "closed")
    f2 = zr.TadpoleField(Interval(0.8), 1.0, "closed")
    r1 = abs(dn.tadpole_glue(f1, f2, 1.0, 0.3) - zr.tau_reg(Interval(1.8), 1.0, 0.3)) / 1e-12
    c1 = zr.TadpoleField(Cylinder(2 * math.pi, 1.0), 1.0)
    c2 = zr.TadpoleField(Cylinder(2 * math.pi, 1.5), 1.0)
    r2 = abs(dn.tadpole_glue(c1, c2, 1.0, (0.2, 0.7), 32 if quick else 64)
             - zr.tau_reg(Cylinder(2 * math.pi, 2.5), 1.0, (0.2, 0.7))) / 1e-5
    r3 = abs(zr.tau_reg(Sphere(1.0), 0.7, (0.3, 0.2), "closed")
             - zr.tau_reg(Sphere(1.0), 0.7, (0.3, 0.2), "mellin")) / 1e-8
    return max(r1, r2, r3), 1.0


def _check_weak(quick):
    gs = [Interval(1.0), Circle(2.0), Torus(1.0, 1.5), Cylinder(2 * math.pi, 1.0), Sphere(1.0)]
    return max(zr.weak_compatibility_residual(g, 0.8) for g in gs), 1e-6


def _check_split(quick):
    target = (EULER_GAMMA - math.log(2)) / (2 * math.pi)
    cases = [(Torus(1.0, 1.5), (0.1, 0.2)), (Cylinder(2 * math.pi, 2.0), (0.3, 0.7)),
             (Sphere(1.0), (0.8, 0.3))]
    return max(abs(zr.tau_reg(g, 1.0, p) - zr.tau_split(g, 1.0, p) - target)
               for g, p in cases), 1e-10


def _check_graphs(quick):
    h_dec, h_glue = (8, 6) if quick else (12, 10)
    bad = 0
    for nl in range(h_dec + 1):
        for nr in range(h_dec + 1 - nl):
            for g in fg.enumerate_graphs(h_dec, {3, 4}, nl, nr):
                bad += fg.decor_identity_residual(g) != 0
    small = [fg.FeynmanGraph((), 0, 0, ())]
    for nl in range(h_glue + 1):
        for nr in range(h_glue + 1 - nl):
            small += fg.enumerate_graphs(h_glue, {3, 4}, nl, nr)
    lefts = [g for g in small if g.boundary_edges()["RR"] == 0]
    rights = [g for g in small if g.boundary_edges()["LL"] == 0]
    for gL in lefts:
        for gR in rights:
            if gL.n_half_edges + gR.n_half_edges > h_glue or (gL.n_right + gR.n_left) % 2:
                continue
            bad += fg.auto_gluing_residual(gL, gR) != 0
            for dg, _ in fg.glue_graphs(gL, gR).items():
                cl, cr = fg.cut_graph(dg)
                bad += (cl.key(), cr.key()) != (gL.key(), gR.key())
    return float(bad), 0.5


def _check_gluing_theorem(quick):
    p3 = pp.Potential.from_coeffs({3: 1.0})
    free = float(np.max(pp.gluing_theorem_residual(1.0, 1.0, 1.0, pp.Potential())))
    inter = float(np.max(pp.gluing_theorem_residual(1.0, 1.0, 1.0, p3, "closed")))
    unc = pp.gluing_theorem_residual(1.0, 1.0, 1.0, p3, "zero-uncorrected")[2]
    ok_unc = 0.0 if unc > 1e-5 else 1.0
    return max(free / 1e-12, inter / 1e-6, ok_unc), 1.0


def _check_petal(quick):
    c = Circle(2.0)
    tau = float(zr.tau_reg(c, 1.0, 0.0))
    p4 = pp.Potential.from_coeffs({4: 1.0})
    r1 = float(np.max(rg.partition_consistency_residual(c, 1.0, p4, tau, 1.0)))
    r2 = float(np.max(rg.partition_consistency_residual(c, 1.0, p4, tau, 1.0, tau2=tau / 2)))
    exact = rg.group_law_residual(pp.Potential.from_coeffs({6: Fraction(1)}),
                                  Fraction(1, 5), Fraction(1, 2))
    p6 = pp.Potential.from_coeffs({4: 1.0, 6: 0.5})
    ratio = rg.rg_flow_residual(p6, 0.2, 1e-2) / rg.rg_flow_residual(p6, 0.2, 5e-3)
    return max(r1 / 1e-7, r2 / 1e-7, float(exact != 0), abs(ratio - 4) / 0.5), 1.0


def _check_regularity(quick):
    hi = 128 if quick else 256
    disk = dn.delta_order_fit(Disk(1.0), 1.0, (32, hi))["slope"]
    hemi = dn.delta_order_fit(Hemisphere(1.0), 1.0, (32, hi))["slope"]
    cyl = abs(dn.dn_delta(Cylinder(2 * math.pi, 2.0), 1.0, 20))
    n = 1000
    d1 = dn.dn_delta(SphericalSector(1.0, 1.0), 1.0, n)
    d2 = dn.dn_delta(SphericalSector(1.0, math.pi - 1.0), 1.0, n)
    c3 = abs(dn.sector_delta_coefficients(1.0, 1.0, 1.0)[0])
    sector = abs(d1 + d2) * n**3 / c3
    return max(abs(disk + 3) / 0.1, abs(hemi + 4) / 0.1, cyl / 1e-12, sector / 1e-3), 1.0


def _check_pairing(quick):
    res = max(pp.pairing_2kappa_residual(1.0, 0.9, 1.2))
    thr = math.atanh(0.5)  # arccoth(2)
    refused_below = refused_above = False
    try:
        pp.pairing_2kappa_residual(1.0, thr - 1e-3, 1.0)
    except pp.AssumptionViolation:
        refused_below = True
    try:
        pp.pairing_2kappa_residual(1.0, thr + 1e-3, 1.0)
    except pp.AssumptionViolation:
        refused_above = True
    return max(res / 1e-10, float(not refused_below), float(refused_above)), 1.0


def _check_anomaly(quick):
    r1 = rg.trace_anomaly_sphere_residual(1.0, 0.8) / 1e-5
    r2 = abs(rg.averaged_classical_trace(1.0, 1e-3) + 1) / 1e-2
    return max(r1, r2), 1.0


CHECKS = [
    ("closed-form golden values", _check_closed_forms),
    ("1D determinant gluing", _check_bfk_1d),
    ("2D determinant gluing", _check_bfk_2d),
    ("tadpole gluing", _check_tadpole_glue),
    ("weak compatibility", _check_weak),
    ("zeta minus point-splitting tadpole", _check_split),
    ("graph decoration and gluing identities", _check_graphs),
    ("1D gluing of partition functions", _check_gluing_theorem),
    ("petal resummation", _check_petal),
    ("DN regularity", _check_regularity),
    ("dressed pairing series", _check_pairing),
    ("sphere trace anomaly", _check_anomaly),
]


def _run_check(i: int, quick: bool) -> dict:
    name, fn = CHECKS[i]
    t = time.perf_counter()
    try:
        res, tol = fn(quick)
        ok = bool(res < tol)
        err = ""
    except Exception as exc:  # a crashing check is a failed check
        res, tol, ok, err = float("nan"), float("nan"), False, f"{type(exc).__name__}: {exc}"
    return {"criterion": i + 1, "identity": name, "residual": res, "tolerance": tol,
            "pass": ok, "seconds": round(time.perf_counter() - t, 1), "error": err}


def cmd_verify_all(a):
    workers = _threads()
    idx = range(len(CHECKS))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_run_check, idx, [a.quick] * len(CHECKS)))
    else:
        rows = [_run_check(i, a.quick) for i in idx]
    if not a.timings:
        for r in rows:
            r.pop("seconds")
    return {"quick": a.quick, "all_pass": all(r["pass"] for r in rows), "checks": rows}


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("ZQFT_THREADS", "1")))
    except ValueError:
        raise ParseError("ZQFT_THREADS must be an integer") from None


# ---------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="zqft", description="Gluing checks for scalar field theory on surfaces.")
    ap.add_argument("--version", action="version", version=f"zqft {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--plot", metavar="SVG", help="write an SVG plot where supported")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("det", parents=[common], help="zeta-regularized log det(Delta + m^2)")
    p.add_argument("--geometry", required=True)
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--method", choices=("auto", "closed", "mellin"), default="auto")
    p.set_defaults(func=cmd_det)

    p = sub.add_parser("tadpole", parents=[common], help="regularized diagonal of the Green's function")
    p.add_argument("--geometry", required=True)
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--point", required=True, help="x or x,y")
    p.add_argument("--scheme", choices=("zeta", "split"), default="zeta")
    p.set_defaults(func=cmd_tadpole)

    p = sub.add_parser("dn", parents=[common], help="Dirichlet-to-Neumann spectrum")
    p.add_argument("--geometry", required=True)
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--boundary", default=None)
    p.add_argument("--modes", type=int, default=8)
    p.set_defaults(func=cmd_dn)

    p = sub.add_parser("delta-order", parents=[common], help="decay order of lambda_n/omega_n - 1")
    p.add_argument("--geometry", required=True)
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--n-min", type=int, default=32)
    p.add_argument("--n-max", type=int, default=256)
    p.set_defaults(func=cmd_delta_order)

    p = sub.add_parser("glue", parents=[common], help="gluing residuals")
    p.add_argument("what", choices=("det", "greens", "tadpole", "partition"))
    p.add_argument("--left")
    p.add_argument("--right")
    p.add_argument("--geometry", help="whole interval, cut at --split (glue partition)")
    p.add_argument("--split", type=float, help="cut position for --geometry")
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--modes", type=int, default=64)
    p.add_argument("--arcs", action="store_true", help="glue two intervals into a circle")
    p.add_argument("--p", help="first point, glued coordinates")
    p.add_argument("--q", help="second point, glued coordinates")
    p.add_argument("--potential", default="p3=1")
    p.add_argument("--order", type=float, default=1.0)
    p.add_argument("--tadpole", choices=("closed", "zero", "zero-uncorrected"), default="closed")
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_glue)

    p = sub.add_parser("graphs", parents=[common], help="enumerate Feynman graphs")
    p.add_argument("--max-half-edges", type=int, required=True)
    p.add_argument("--valences", default="3,4")
    p.add_argument("--left", type=int, default=0)
    p.add_argument("--right", type=int, default=0)
    p.add_argument("--no-short-loops", action="store_true")
    p.set_defaults(func=cmd_graphs)

    p = sub.add_parser("partition", parents=[common], help="perturbative partition function in 1D")
    p.add_argument("--geometry", required=True)
    p.add_argument("--mass", type=float, required=True)
    p.add_argument("--potential", required=True)
    p.add_argument("--order", type=float, default=1.0)
    p.add_argument("--tadpole", choices=("closed", "zero"), default="closed")
    p.add_argument("--eta", help="grid of boundary values, e.g. -1,0,1: evaluate on its product")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("petal", parents=[common], help="petal transform of a potential")
    p.add_argument("--potential", required=True)
    p.add_argument("--tau", required=True, help="number or fraction like 1/3")
    p.add_argument("--order", type=float, default=None)
    p.set_defaults(func=cmd_petal)

    p = sub.add_parser("reduce", parents=[common], help="remove p0, p1, p2 around the critical point")
    p.add_argument("--potential", required=True)
    p.add_argument("--mass", type=float, required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("anomaly", parents=[common], help="free trace anomaly on the round sphere")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--mass", type=float, required=True)
    p.set_defaults(func=cmd_anomaly)

    p = sub.add_parser("verify-all", parents=[common], help="run the acceptance matrix")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--timings", action="store_true", help="include wall times (not deterministic)")
    p.set_defaults(func=cmd_verify_all)
    return ap


def _attach_negative_values(argv):
    """Turn ``--eta -1,0,1`` into ``--eta=-1,0,1`` so argparse does not read a flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--eta", "--tau", "--potential"):
            nxt = next(it, None)
            if nxt is not None and nxt.startswith("-") and (nxt[1:2].isdigit() or nxt[1:2] == "."):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(tok)
    return out


def main(argv=None) -> int:
    argv = _attach_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = build_parser().parse_args(argv)
        result = args.func(args)
    except ParseError as exc:
        print(f"zqft: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, TypeError, OSError) as exc:
        print(f"zqft: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    emit(result, args.format)
    if args.command == "verify-all":
        return 0 if result["all_pass"] else 1
    if args.command == "glue":
        return 0 if result["pass"] else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
