"""Perturbative partition functions of 1D scalar field theory.

Partition functions are boundary states: a Gaussian factor
exp(-1/2 eta^T Q eta) in the rescaled boundary values, times a polynomial in
those values whose coefficients are truncated series in hbar^(1/2). The
boundary-boundary edges of the graph expansion are exactly the terms of the
Gaussian factor, so they are never expanded. Pairings integrate the interface
values out exactly by completing the square.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import feyngraph as fg
from . import zetareg as zr
from .dnglue import glued_tadpole_field
from .geometry import Circle, Geometry, Interval

__all__ = [
    "HbarSeries", "Potential", "BoundaryState", "IntervalModel", "CircleModel",
    "ModeCircleModel", "feynman_weight", "partition_function", "pairing_dn",
    "pairing_2kappa", "dress", "gluing_theorem_residual", "pairing_2kappa_residual",
    "functoriality_residual", "mode_oracle_circle", "AssumptionViolation",
]


class AssumptionViolation(ValueError):
    """Raised when ||delta|| >= 1 makes the dressed propagator series diverge."""


# ---------------------------------------------------------------------------
# hbar series

class HbarSeries:
    """Truncated series sum_k c_k hbar^k with k in {0, 1/2, 1, ...}.

    Stored as an array indexed by 2k.
    """

    def __init__(self, coeffs=None, k_max: float = 1.0):
        self.k_max = float(k_max)
        n = int(round(2 * self.k_max)) + 1
        self.c = np.zeros(n)
        if coeffs is None:
            return
        if isinstance(coeffs, dict):
            for k, v in coeffs.items():
                i = int(round(2 * k))
                if i < 0:
                    raise ValueError("negative powers of hbar are not allowed")
                if i < n:
                    self.c[i] = v
        else:
            arr = np.asarray(coeffs, dtype=float)
            self.c[: min(n, len(arr))] = arr[:n]

    @classmethod
    def constant(cls, value: float, k_max: float) -> "HbarSeries":
        return cls({0: value}, k_max)

    def __getitem__(self, k: float) -> float:
        i = int(round(2 * k))
        return float(self.c[i]) if 0 <= i < len(self.c) else 0.0

    def _coerce(self, other) -> "HbarSeries":
        if isinstance(other, HbarSeries):
            return other
        return HbarSeries.constant(float(other), self.k_max)

    def __add__(self, other):
        o = self._coerce(other)
        k = min(self.k_max, o.k_max)
        n = int(round(2 * k)) + 1
        return HbarSeries(self.c[:n] + o.c[:n], k)

    __radd__ = __add__

    def __neg__(self):
        return HbarSeries(-self.c, self.k_max)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, HbarSeries):
            return HbarSeries(self.c * float(other), self.k_max)
        k = min(self.k_max, other.k_max)
        n = int(round(2 * k)) + 1
        return HbarSeries(np.convolve(self.c[:n], other.c[:n])[:n], k)

    __rmul__ = __mul__

    def to_dict(self) -> dict[float, float]:
        return {i / 2: float(v) for i, v in enumerate(self.c)}

    def max_abs_diff(self, other) -> float:
        return float(np.max(np.abs((self - other).c)))

    def __repr__(self):
        terms = " + ".join(f"{v:.6g} h^{i / 2:g}" for i, v in enumerate(self.c) if v)
        return f"HbarSeries({terms or '0'})"


# ---------------------------------------------------------------------------
# potentials

@dataclass
class Potential:
    """p(phi) = sum_k p_k phi^k / k!, each p_k a series in hbar.

    ``terms`` maps (k, h2) to the coefficient of hbar^(h2/2) in p_k. A
    coefficient may be a callable of the position (used by the petal
    transform with a position-dependent tadpole).
    """

    terms: dict = field(default_factory=dict)
    low_valence: bool = False

    def __post_init__(self):
        self.terms = {(int(k), int(h)): v for (k, h), v in self.terms.items()
                      if callable(v) or v != 0}
        if not self.low_valence and any(k < 3 for k, _ in self.terms):
            raise ValueError("p0, p1, p2 must vanish unless low_valence is enabled")

    @classmethod
    def from_coeffs(cls, coeffs, low_valence: bool = False) -> "Potential":
        """From a list p_0..p_N or a dict {k: p_k} (hbar-independent)."""
        items = coeffs.items() if isinstance(coeffs, dict) else enumerate(coeffs)
        return cls({(k, 0): v for k, v in items}, low_valence)

    @classmethod
    def parse(cls, text: str) -> "Potential":
        """Parse ``p3=1,p4=0.5``."""
        coeffs = {}
        for part in filter(None, text.replace(" ", "").split(",")):
            k, _, v = part.partition("=")
            if not k.startswith("p"):
                raise ValueError(f"bad potential term {part!r}")
            coeffs[int(k[1:])] = float(v)
        return cls.from_coeffs(coeffs, low_valence=any(k < 3 for k in coeffs))

    @property
    def degree(self) -> int:
        return max((k for k, _ in self.terms), default=0)

    def vertex_types(self) -> list[tuple[int, int]]:
        return sorted(self.terms)

    def coefficient(self, k: int, h2: int = 0):
        return self.terms.get((k, h2), 0.0)


# ---------------------------------------------------------------------------
# 1D propagator models

class _Model:
    geometry: Geometry
    m: float
    points: list  # (name, side, position)
    breakpoints: tuple = ()

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p[0] for p in self.points)

    def side_points(self, side: str) -> list[str]:
        return [p[0] for p in self.points if p[1] == side]

    def log_det(self) -> float:
        return zr.log_det_zeta(self.geometry, self.m)


class IntervalModel(_Model):
    """Dirichlet interval [0, l] with left point ``names[0]`` and right point ``names[1]``."""

    def __init__(self, l: float, m: float, names=("a", "b"), breakpoints=()):
        self.geometry = Interval(l)
        self.l, self.m = float(l), float(m)
        self.points = [(names[0], "L", 0.0), (names[1], "R", self.l)]
        self.breakpoints = tuple(breakpoints)
        self.lo, self.hi = 0.0, self.l

    def G(self, x, y):
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        m, l = self.m, self.l
        return np.sinh(m * lo) * np.sinh(m * (l - hi)) / (m * math.sinh(m * l))

    def diag(self, x):
        return self.G(x, x)

    def P(self, name: str, x):
        """Poisson kernel -dG/dnu(x, point)."""
        m, l = self.m, self.l
        if name == self.points[0][0]:
            return np.sinh(m * (l - x)) / math.sinh(m * l)
        return np.sinh(m * x) / math.sinh(m * l)

    def D(self) -> np.ndarray:
        a = self.m / math.tanh(self.m * self.l)
        b = self.m / math.sinh(self.m * self.l)
        return np.array([[a, -b], [-b, a]])


class CircleModel(_Model):
    def __init__(self, L: float, m: float):
        self.geometry = Circle(L)
        self.L, self.m = float(L), float(m)
        self.points = []
        self.lo, self.hi = 0.0, self.L

    def G(self, x, y):
        d = np.abs(x - y) % self.L
        m, L = self.m, self.L
        return np.cosh(m * (L / 2 - d)) / (2 * m * math.sinh(m * L / 2))

    def diag(self, x):
        return self.G(x, x)

    def D(self):
        return np.zeros((0, 0))


class ModeCircleModel(CircleModel):
    """Circle propagator truncated to Fourier modes |n| <= n_modes."""

    def __init__(self, L: float, m: float, n_modes: int = 1):
        super().__init__(L, m)
        self.n_modes = n_modes
        ks = 2 * math.pi * np.arange(1, n_modes + 1) / L
        self.ks, self.lams = ks, ks**2 + m * m

    def G(self, x, y):
        d = x - y
        out = np.full(np.shape(d), 1 / (self.L * self.m**2))
        for k, lam in zip(self.ks, self.lams):
            out = out + 2 * np.cos(k * d) / (self.L * lam)
        return out

    def log_det(self) -> float:
        return math.log(self.m**2) + 2 * float(np.sum(np.log(self.lams)))


# ---------------------------------------------------------------------------
# quadrature over ordered simplices

def _simplex_rule(n: int, a: float, b: float, breakpoints, n_nodes: int):
    """Nodes and weights for {a <= x_1 <= ... <= x_n <= b}, panels split at breakpoints."""
    t, wt = np.polynomial.legendre.leggauss(n_nodes)
    t, wt = (t + 1) / 2, wt / 2
    edges = sorted(set([b] + [p for p in breakpoints if a < p < b]))
    X = np.zeros((1, 0))
    W = np.ones(1)
    for k in range(n):
        lo = np.full(len(W), a) if k == 0 else X[:, -1]
        newX, newW = [], []
        for j, e in enumerate(edges):
            prev = edges[j - 1] if j else -np.inf
            mask = lo < e
            if not mask.any():
                continue
            start = np.maximum(lo[mask], prev)
            length = e - start
            x = start[:, None] + length[:, None] * t[None, :]
            w = W[mask][:, None] * length[:, None] * wt[None, :]
            newX.append(np.concatenate([np.repeat(X[mask], n_nodes, axis=0),
                                        x.reshape(-1, 1)], axis=1))
            newW.append(w.reshape(-1))
        X, W = np.concatenate(newX), np.concatenate(newW)
    return X, W


def _default_nodes(n: int) -> int:
    return {0: 1, 1: 32, 2: 32, 3: 24}.get(n, 12)


# ---------------------------------------------------------------------------
# Feynman weights

def _pmul(P1: dict, P2: dict) -> dict:
    out = {}
    for e1, c1 in P1.items():
        for e2, c2 in P2.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0) + c1 * c2
    return out


def _tadpole_callable(tadpole, model):
    if tadpole is None:
        return None
    if isinstance(tadpole, str):
        if tadpole == "zero":
            return None
        if tadpole == "closed":
            return model.diag
        raise ValueError(f"unknown tadpole {tadpole!r}")
    if getattr(tadpole, "kind", None) == "zero":
        return None
    return tadpole


def feynman_weight(g: fg.FeynmanGraph, model, pot: Potential, tadpole=None,
                   n_nodes: int | None = None) -> dict:
    """F^tau(G) as a polynomial {exponents over model.names: value}.

    Bulk vertices carry -p_v (the label of a bulk vertex is the hbar index h2
    of its coefficient), bulk-bulk edges G, short loops tau, bulk-boundary
    edges the Poisson kernel times eta, boundary-boundary edges -D times
    eta eta. Positions are integrated over ordered simplices, summed over
    vertex orders.
    """
    if model.geometry.dim != 1:
        raise ValueError("interacting partition functions are implemented in 1D only")
    names = model.names
    idx = {nm: i for i, nm in enumerate(names)}
    nvar = len(names)
    zero = (0,) * nvar
    n = g.n_bulk
    tau = _tadpole_callable(tadpole, model)
    side_of = {fg.LEFT: "L", fg.RIGHT: "R"}
    D = model.D()

    # constant factor from boundary-boundary edges
    const = {zero: 1.0}
    for u, v in g.edges():
        if g.kind(u) != fg.BULK and g.kind(v) != fg.BULK:
            term = {}
            for p in model.side_points(side_of[g.kind(u)]):
                for q in model.side_points(side_of[g.kind(v)]):
                    e = [0] * nvar
                    e[idx[p]] += 1
                    e[idx[q]] += 1
                    term[tuple(e)] = term.get(tuple(e), 0) - D[idx[p], idx[q]]
            const = _pmul(const, term)
    if n == 0:
        return {e: float(c) for e, c in const.items() if c != 0}
    coefs = []
    for k, lab in zip(g.valences, g.labels):
        c = pot.coefficient(k, lab)
        if not callable(c) and c == 0:
            return {}
        coefs.append(c)
    loops = [0] * n
    bb = []
    legs = [[] for _ in range(n)]
    for u, v in g.edges():
        ku, kv = g.kind(u), g.kind(v)
        if ku == fg.BULK and kv == fg.BULK:
            if u == v:
                loops[u] += 1
            else:
                bb.append((u, v))
        elif ku == fg.BULK:
            legs[u].append(side_of[kv])
        elif kv == fg.BULK:
            legs[v].append(side_of[ku])
    if any(loops) and tau is None:
        return {}
    for v in range(n):
        for s in legs[v]:
            if not model.side_points(s):
                return {}
    X, W = _simplex_rule(n, model.lo, model.hi, getattr(model, "breakpoints", ()),
                         n_nodes or _default_nodes(n))
    total: dict = {}
    for perm in itertools.permutations(range(n)):
        xs = [X[:, perm[v]] for v in range(n)]
        scal = np.ones(len(W))
        for v in range(n):
            c = coefs[v]
            scal = scal * (-(c(xs[v]) if callable(c) else c))
            if loops[v]:
                scal = scal * tau(xs[v]) ** loops[v]
        for u, v in bb:
            scal = scal * model.G(xs[u], xs[v])
        poly = {zero: W * scal}
        for v in range(n):
            for s in legs[v]:
                form = {}
                for nm in model.side_points(s):
                    e = [0] * nvar
                    e[idx[nm]] = 1
                    form[tuple(e)] = model.P(nm, xs[v])
                poly = _pmul(poly, form)
        for e, arr in poly.items():
            total[e] = total.get(e, 0.0) + float(np.sum(arr))
    return {e: float(c) for e, c in _pmul(total, const).items() if c != 0}


# ---------------------------------------------------------------------------
# boundary states

@dataclass
class BoundaryState:
    """exp(-1/2 eta^T Q eta) * sum_exps coeff(exps) eta^exps.

    ``poly`` maps exponent tuples (ordered like ``names``) to coefficient
    arrays indexed by 2k for hbar^k.
    """

    names: tuple
    Q: np.ndarray
    poly: dict
    k_max: float

    @property
    def K2(self) -> int:
        return int(round(2 * self.k_max))

    def coefficient(self, exps) -> HbarSeries:
        return HbarSeries(self.poly.get(tuple(exps), np.zeros(self.K2 + 1)), self.k_max)

    def evaluate(self, eta) -> HbarSeries:
        """Value at boundary data ``eta`` (sequence ordered like names, or dict)."""
        if isinstance(eta, dict):
            eta = [eta[nm] for nm in self.names]
        eta = np.asarray(eta, dtype=float)
        if len(eta) != len(self.names):
            raise ValueError("eta has the wrong length")
        gauss = math.exp(-0.5 * eta @ self.Q @ eta) if len(eta) else 1.0
        acc = np.zeros(self.K2 + 1)
        for e, c in self.poly.items():
            acc = acc + c * np.prod(eta ** np.asarray(e)) if len(e) else acc + c
        return HbarSeries(gauss * acc, self.k_max)

    def permuted(self, names) -> "BoundaryState":
        perm = [self.names.index(nm) for nm in names]
        poly = {tuple(e[i] for i in perm): c for e, c in self.poly.items()}
        return BoundaryState(tuple(names), self.Q[np.ix_(perm, perm)], poly, self.k_max)


def partition_function(model, m: float | None = None, pot: Potential | None = None,
                       tadpole=None, k_max: float = 1.0, include_det: bool = True,
                       n_nodes: int | None = None) -> BoundaryState:
    """Z^tau = det^{-1/2} exp(-1/2 eta^T D eta) sum_G F^tau(G) hbar^l(G) / |Aut(G)|.

    The sum runs over graphs without boundary-boundary edges; those edges
    form the Gaussian factor. ``model`` is a 1D propagator model (or a 1D
    geometry, in which case ``m`` is required).
    """
    if isinstance(model, Geometry):
        if model.dim != 1:
            raise ValueError("interacting partition functions are implemented in 1D only")
        model = IntervalModel(model.l, m) if isinstance(model, Interval) else CircleModel(model.L, m)
    pot = pot or Potential()
    K2 = int(round(2 * k_max))
    nvar = len(model.names)
    zero = (0,) * nvar
    poly = {zero: np.zeros(K2 + 1)}
    poly[zero][0] = 1.0
    types = pot.vertex_types()
    for k, h2 in types:
        if k - 2 + h2 <= 0:
            raise ValueError(f"vertex p_{k} at hbar^{h2 / 2} has non-positive order")
    tau = _tadpole_callable(tadpole, model)
    has_L = bool(model.side_points("L"))
    has_R = bool(model.side_points("R"))

    def multisets(i, budget):
        if i == len(types):
            yield []
            return
        k, h2 = types[i]
        step = k - 2 + h2
        for cnt in range(budget // step + 1):
            for rest in multisets(i + 1, budget - cnt * step):
                yield [(k, h2)] * cnt + rest
    for combo in multisets(0, K2):
        if not combo:
            continue
        order = sum(k - 2 + h2 for k, h2 in combo)
        graphs = fg.graphs_with_vertices(combo, None if has_L else 0, None if has_R else 0,
                                         allow_short_loops=tau is not None,
                                         allow_boundary_edges=False)
        for g in graphs:
            w = feynman_weight(g, model, pot, tau, n_nodes)
            if not w:
                continue
            aut = fg.aut_order(g)
            for e, val in w.items():
                arr = poly.setdefault(e, np.zeros(K2 + 1))
                arr[order] += val / aut
    pref = math.exp(-0.5 * model.log_det()) if include_det else 1.0
    poly = {e: pref * c for e, c in poly.items()}
    return BoundaryState(model.names, np.array(model.D(), dtype=float).reshape(nvar, nvar),
                         poly, k_max)


# ---------------------------------------------------------------------------
# exact Gaussian pairings

@lru_cache(maxsize=None)
def _moment(gamma: tuple, cov_key: tuple) -> float:
    """E[xi^gamma] for xi ~ N(0, C) by the Isserlis recursion."""
    if sum(gamma) == 0:
        return 1.0
    if sum(gamma) % 2:
        return 0.0
    k = len(gamma)
    C = np.array(cov_key).reshape(k, k)
    i = next(j for j, a in enumerate(gamma) if a)
    g1 = list(gamma)
    g1[i] -= 1
    total = 0.0
    for j in range(k):
        if g1[j] == 0:
            continue
        g2 = list(g1)
        total += g1[j] * C[i, j] * _moment(tuple(g2[:j] + [g2[j] - 1] + g2[j + 1:]), cov_key)
    return total


def _combine(A: BoundaryState, B: BoundaryState) -> BoundaryState:
    names = list(A.names) + [nm for nm in B.names if nm not in A.names]
    n = len(names)
    ia = [names.index(nm) for nm in A.names]
    ib = [names.index(nm) for nm in B.names]
    Q = np.zeros((n, n))
    Q[np.ix_(ia, ia)] += A.Q
    Q[np.ix_(ib, ib)] += B.Q
    k_max = min(A.k_max, B.k_max)
    K2 = int(round(2 * k_max))
    poly = {}
    for ea, ca in A.poly.items():
        full_a = [0] * n
        for i, v in zip(ia, ea):
            full_a[i] += v
        for eb, cb in B.poly.items():
            e = list(full_a)
            for i, v in zip(ib, eb):
                e[i] += v
            c = np.convolve(ca[:K2 + 1], cb[:K2 + 1])[:K2 + 1]
            key = tuple(e)
            poly[key] = poly.get(key, 0) + c
    return BoundaryState(tuple(names), Q, poly, k_max)


def _integrate_out(S: BoundaryState, interface, extra_diag: float = 0.0) -> BoundaryState:
    """pi^{-k/2} int dy exp(-1/2 y^T extra y) S(o, y) over interface values y."""
    yi = [S.names.index(nm) for nm in interface]
    oi = [i for i in range(len(S.names)) if i not in yi]
    k = len(yi)
    Q = S.Q
    A = Q[np.ix_(yi, yi)] + extra_diag * np.eye(k)
    if k and np.min(np.linalg.eigvalsh(A)) <= 0:
        raise ValueError("interface quadratic form is not positive definite")
    B = Q[np.ix_(yi, oi)]
    Ainv = np.linalg.inv(A) if k else np.zeros((0, 0))
    Qnew = Q[np.ix_(oi, oi)] - B.T @ Ainv @ B
    Mlin = -Ainv @ B  # y = Mlin o + xi
    factor = (2.0 ** (k / 2)) / math.sqrt(np.linalg.det(A)) if k else 1.0
    cov_key = tuple(np.round(Ainv, 15).ravel().tolist())
    no = len(oi)
    K2 = S.K2

    @lru_cache(maxsize=None)
    def lin_power(i: int, p: int):
        """(sum_j M_ij o_j + xi_i)^p as {(o-exps, xi-exps): coeff}."""
        if p == 0:
            return {((0,) * no, (0,) * k): 1.0}
        base = {}
        for j in range(no):
            if Mlin[i, j] != 0:
                eo = [0] * no
                eo[j] = 1
                base[(tuple(eo), (0,) * k)] = Mlin[i, j]
        ex = [0] * k
        ex[i] = 1
        base[((0,) * no, tuple(ex))] = 1.0
        prev = lin_power(i, p - 1)
        out = {}
        for (eo1, ex1), c1 in prev.items():
            for (eo2, ex2), c2 in base.items():
                key = (tuple(a + b for a, b in zip(eo1, eo2)), tuple(a + b for a, b in zip(ex1, ex2)))
                out[key] = out.get(key, 0.0) + c1 * c2
        return out
    poly = {}
    for e, c in S.poly.items():
        eo = tuple(e[i] for i in oi)
        terms = {((0,) * no, (0,) * k): 1.0}
        for a, i in enumerate(yi):
            p = e[i]
            if p == 0:
                continue
            nxt = {}
            for (eo1, ex1), c1 in terms.items():
                for (eo2, ex2), c2 in lin_power(a, p).items():
                    key = (tuple(x + y for x, y in zip(eo1, eo2)), tuple(x + y for x, y in zip(ex1, ex2)))
                    nxt[key] = nxt.get(key, 0.0) + c1 * c2
            terms = nxt
        for (eo2, ex2), c2 in terms.items():
            mom = _moment(ex2, cov_key)
            if mom == 0.0:
                continue
            key = tuple(x + y for x, y in zip(eo, eo2))
            poly[key] = poly.get(key, 0) + c * (c2 * mom * factor)
    names = tuple(S.names[i] for i in oi)
    return BoundaryState(names, Qnew, poly, S.k_max)


def pairing_dn(stateL: BoundaryState, stateR: BoundaryState, interface=None,
               m: float | None = None) -> BoundaryState:
    """Glue two states along shared boundary points by exact Gaussian integration.

    The measure is pi^{-k/2} d^k y for k interface points, which makes the
    free partition functions compose (it equals det(D_L + D_R)^{-1/2} times
    the Wick expectation with kernel K and the 1D constant 2^{k/2}).
    """
    interface = list(interface or [nm for nm in stateL.names if nm in stateR.names])
    return _integrate_out(_combine(stateL, stateR), interface)


def dress(state: BoundaryState, m: float) -> BoundaryState:
    """Zbar = exp(+1/2 eta^T kappa eta) Z with kappa = m on point boundaries."""
    return BoundaryState(state.names, state.Q - m * np.eye(len(state.names)),
                         dict(state.poly), state.k_max)


def pairing_2kappa(stateL: BoundaryState, stateR: BoundaryState, m: float,
                   interface=None) -> BoundaryState:
    """det(kappa)^{-1/2} E_{(2 kappa)^{-1}} of the product of dressed states."""
    interface = list(interface or [nm for nm in stateL.names if nm in stateR.names])
    return _integrate_out(_combine(stateL, stateR), interface, extra_diag=2 * m)


# ---------------------------------------------------------------------------
# checks

def _state_residual(S1: BoundaryState, S2: BoundaryState, grid) -> np.ndarray:
    S2 = S2.permuted(S1.names)
    worst = np.zeros(S1.K2 + 1)
    for eta in itertools.product(grid, repeat=len(S1.names)):
        d = np.abs(S1.evaluate(eta).c - S2.evaluate(eta).c)
        worst = np.maximum(worst, d)
    return worst


def _make_fields(mode: str, l1: float, l2: float, m: float):
    if mode == "closed":
        return (zr.TadpoleField(Interval(l1), m, "closed"),
                zr.TadpoleField(Interval(l2), m, "closed"))
    if mode in ("zero", "zero-uncorrected"):
        return (zr.TadpoleField(Interval(l1), m, "zero"),
                zr.TadpoleField(Interval(l2), m, "zero"))
    raise ValueError(f"unknown tadpole mode {mode!r}")


def gluing_theorem_residual(l1: float, l2: float, m: float, pot: Potential,
                            tadpole_mode: str = "closed", k_max: float = 1.0,
                            grid=(-1.0, 0.0, 1.0), n_nodes: int | None = None) -> np.ndarray:
    """Per-order max over an eta grid of |Z_Sigma - <Z_L, Z_R>|.

    ``closed``: pieces use G(x,x), the glued interval uses tau_L * tau_R.
    ``zero``: pieces use 0, the glued interval uses the glued (pure
    correction) field. ``zero-uncorrected``: pieces use 0 and the glued
    interval also uses 0, which violates locality.
    """
    tL, tR = _make_fields(tadpole_mode, l1, l2, m)
    ZL = partition_function(IntervalModel(l1, m, ("a", "y")), pot=pot, tadpole=tL,
                            k_max=k_max, n_nodes=n_nodes)
    ZR = partition_function(IntervalModel(l2, m, ("y", "c")), pot=pot, tadpole=tR,
                            k_max=k_max, n_nodes=n_nodes)
    if tadpole_mode == "zero-uncorrected":
        tS = None
    else:
        tS = glued_tadpole_field(tL, tR, m)
    ZS = partition_function(IntervalModel(l1 + l2, m, ("a", "c"), breakpoints=(l1,)), pot=pot,
                            tadpole=tS, k_max=k_max, n_nodes=n_nodes)
    return _state_residual(ZS, pairing_dn(ZL, ZR, ["y"]), grid)


def functoriality_residual(lengths, m: float, pot: Potential, k_max: float = 1.0,
                           grid=(-1.0, 0.5), n_nodes: int | None = None) -> dict:
    """Dressed states on three intervals composed two ways and in one shot."""
    l1, l2, l3 = lengths
    f = [zr.TadpoleField(Interval(l), m, "closed") for l in lengths]
    Z1 = dress(partition_function(IntervalModel(l1, m, ("a", "y1")), pot=pot, tadpole=f[0],
                                  k_max=k_max, n_nodes=n_nodes), m)
    Z2 = dress(partition_function(IntervalModel(l2, m, ("y1", "y2")), pot=pot, tadpole=f[1],
                                  k_max=k_max, n_nodes=n_nodes), m)
    Z3 = dress(partition_function(IntervalModel(l3, m, ("y2", "c")), pot=pot, tadpole=f[2],
                                  k_max=k_max, n_nodes=n_nodes), m)
    left_first = pairing_2kappa(pairing_2kappa(Z1, Z2, m), Z3, m)
    right_first = pairing_2kappa(Z1, pairing_2kappa(Z2, Z3, m), m)
    one_shot = _integrate_out(_combine(_combine(Z1, Z2), Z3), ["y1", "y2"], extra_diag=2 * m)
    t12 = glued_tadpole_field(f[0], f[1], m)
    t123 = glued_tadpole_field(t12, f[2], m)
    ZS = dress(partition_function(IntervalModel(l1 + l2 + l3, m, ("a", "c"),
                                                breakpoints=(l1, l1 + l2)),
                                  pot=pot, tadpole=t123, k_max=k_max, n_nodes=n_nodes), m)
    return {"associativity": _state_residual(left_first, right_first, grid),
            "one_shot": _state_residual(left_first, one_shot, grid),
            "glued": _state_residual(ZS, left_first, grid)}


def pairing_2kappa_residual(m: float, l1: float, l2: float, k_max: int = 60) -> tuple[float, float]:
    """Dressed boundary propagator and Fredholm log series at one interface point.

    Returns (|sum_k (-(S_L+S_R)/2m)^k / 2m - 1/(D_L+D_R)|,
    |-1/2 log((D_L+D_R)/2m) - sum_p (-delta)^p / 2p|).
    """
    for l in (l1, l2):
        if 1 / math.tanh(m * l) - 1 >= 1:
            raise AssumptionViolation(
                f"||delta|| >= 1 for a piece of length {l} (needs l > arccoth(2)/m)")
    SL = m / math.tanh(m * l1) - m
    SR = m / math.tanh(m * l2) - m
    D = SL + SR + 2 * m
    delta = (SL + SR) / (2 * m)
    series = sum((-delta) ** k for k in range(k_max + 1)) / (2 * m)
    logser = sum((-delta) ** p / (2 * p) for p in range(1, k_max + 1))
    return abs(series - 1 / D), abs(-0.5 * math.log(D / (2 * m)) - logser)


def mode_oracle_circle(L: float, m: float, p3: float, n_modes: int = 1) -> float:
    """hbar^1 coefficient of Z/Z_free for a cubic potential with the field
    truncated to Fourier modes |n| <= n_modes, from exact Gaussian moments
    of the truncated action in the mode basis."""
    x = np.linspace(0, L, 4096, endpoint=False)
    basis = [np.full_like(x, 1 / math.sqrt(L))]
    lams = [m * m]
    for n in range(1, n_modes + 1):
        k = 2 * math.pi * n / L
        basis += [math.sqrt(2 / L) * np.cos(k * x), math.sqrt(2 / L) * np.sin(k * x)]
        lams += [k * k + m * m] * 2
    nb = len(basis)
    dx = L / len(x)
    T = np.einsum("ix,jx,kx->ijk", basis, basis, basis) * dx
    lams = np.asarray(lams)

    def moment(idx):
        cnt = np.bincount(idx, minlength=nb)
        if np.any(cnt % 2):
            return 0.0
        out = 1.0
        for i, c in enumerate(cnt):
            out *= math.prod(range(c - 1, 0, -2)) / lams[i] ** (c // 2)
        return out
    total = 0.0
    for idx in itertools.product(range(nb), repeat=6):
        t = T[idx[:3]] * T[idx[3:]]
        if t != 0:
            total += t * moment(np.array(idx))
    return (p3 / 6) ** 2 * total / 2
