"""Half-edge Feynman graphs: enumeration, automorphisms, decorations and gluing.

A graph has bulk vertices (with a valence and an integer label, used by
:mod:`zqft.pertpart` for the hbar-order of a vertex coefficient), univalent
left-boundary vertices and univalent right-boundary vertices. Half-edges are
numbered by vertex blocks: bulk vertices first, then left, then right.

Isomorphism questions are reduced to a vertex-coloured multigraph whose
entries count edges between two vertices (by edge colour, for decorated
graphs). Every half-edge automorphism is a vertex automorphism of that
multigraph combined with a permutation of parallel edges and flips of short
loops, so

    |Aut| = |Aut_V| * prod_{u<v} A_uv! * prod_v A_vv! 2^A_vv.

Vertex automorphisms and canonical labelings are found by exhaustive
backtracking inside colour-refinement classes.
"""
from __future__ import annotations

import itertools
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

__all__ = [
    "FeynmanGraph", "DecoratedGraph", "GluedSum", "enumerate_graphs",
    "graphs_with_vertices", "aut_order", "loop_order", "canonical_key",
    "enumerate_decorations", "glue_graphs", "auto_gluing_residual",
    "cut_graph", "decor_identity_residual", "perfect_matchings",
    "parse_graph", "MAX_HALF_EDGES",
]

MAX_HALF_EDGES = 16

BULK, LEFT, RIGHT = 0, 1, 2


# ---------------------------------------------------------------------------
# graph data

@dataclass(frozen=True)
class FeynmanGraph:
    """Feynman graph in the half-edge model.

    ``pairs`` lists the orbits of the involution on half-edges. ``labels``
    tags bulk vertices (default 0); two bulk vertices are interchangeable
    only if valence and label agree.
    """

    valences: tuple[int, ...]
    n_left: int
    n_right: int
    pairs: tuple[tuple[int, int], ...]
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "valences", tuple(int(v) for v in self.valences))
        if self.labels is None:
            object.__setattr__(self, "labels", (0,) * len(self.valences))
        else:
            object.__setattr__(self, "labels", tuple(int(x) for x in self.labels))
        if len(self.labels) != len(self.valences):
            raise ValueError("labels and valences differ in length")
        pairs = tuple(sorted(tuple(sorted(p)) for p in self.pairs))
        object.__setattr__(self, "pairs", pairs)
        seen = [h for p in pairs for h in p]
        if sorted(seen) != list(range(self.n_half_edges)):
            raise ValueError("pairs must form a fixed-point-free involution on all half-edges")
        if any(a == b for a, b in pairs):
            raise ValueError("involution has a fixed point")

    # sizes ---------------------------------------------------------------
    @property
    def n_bulk(self) -> int:
        return len(self.valences)

    @property
    def n_vertices(self) -> int:
        return self.n_bulk + self.n_left + self.n_right

    @property
    def n_half_edges(self) -> int:
        return sum(self.valences) + self.n_left + self.n_right

    @property
    def n_edges(self) -> int:
        return self.n_half_edges // 2

    # structure -----------------------------------------------------------
    def incidence(self) -> list[int]:
        """Vertex index of each half-edge."""
        out = []
        for v, k in enumerate(self.valences):
            out.extend([v] * k)
        out.extend(range(self.n_bulk, self.n_vertices))
        return out

    def kind(self, v: int) -> int:
        if v < self.n_bulk:
            return BULK
        return LEFT if v < self.n_bulk + self.n_left else RIGHT

    def vertex_colors(self) -> list[tuple]:
        cols = [(BULK, k, lab) for k, lab in zip(self.valences, self.labels)]
        return cols + [(LEFT,)] * self.n_left + [(RIGHT,)] * self.n_right

    def edges(self) -> list[tuple[int, int]]:
        inc = self.incidence()
        return [tuple(sorted((inc[a], inc[b]))) for a, b in self.pairs]

    def multiplicity(self) -> list[list[int]]:
        n = self.n_vertices
        A = [[0] * n for _ in range(n)]
        for u, v in self.edges():
            A[u][v] += 1
            if u != v:
                A[v][u] += 1
        return A

    def edge_types(self) -> dict[str, int]:
        """Counts of bulk-bulk (E0), bulk-boundary (E1) and boundary-boundary (E2) edges."""
        c = Counter()
        for u, v in self.edges():
            nb = (u < self.n_bulk) + (v < self.n_bulk)
            c[{2: "E0", 1: "E1", 0: "E2"}[nb]] += 1
        return {k: c.get(k, 0) for k in ("E0", "E1", "E2")}

    def boundary_edges(self) -> dict[str, int]:
        """Counts of LL, LR, RR boundary-boundary edges."""
        c = Counter()
        for u, v in self.edges():
            ku, kv = sorted((self.kind(u), self.kind(v)))
            if ku != BULK:
                c[{(LEFT, LEFT): "LL", (LEFT, RIGHT): "LR", (RIGHT, RIGHT): "RR"}[(ku, kv)]] += 1
        return {k: c.get(k, 0) for k in ("LL", "LR", "RR")}

    def n_short_loops(self) -> int:
        return sum(1 for u, v in self.edges() if u == v)

    def canonical(self) -> "FeynmanGraph":
        return _graph_from_multigraph(*_canonical_graph_data(self))

    def key(self):
        return canonical_key(self)

    def to_text(self) -> str:
        vb = ",".join(str(k) for k in self.valences)
        s = f"V_b=[{vb}];V_L={self.n_left};V_R={self.n_right};pairs=[" + ",".join(
            f"({a},{b})" for a, b in self.pairs) + "]"
        if any(self.labels):
            s += ";labels=[" + ",".join(str(x) for x in self.labels) + "]"
        return s

    def __str__(self) -> str:
        return self.to_text()


def parse_graph(text: str) -> FeynmanGraph:
    """Parse ``V_b=[3,3];V_L=2;V_R=0;pairs=[(0,1),...]``."""
    fields = {}
    for part in text.replace(" ", "").split(";"):
        if not part:
            continue
        k, _, v = part.partition("=")
        fields[k] = v
    try:
        vb = [int(x) for x in fields["V_b"].strip("[]").split(",") if x]
        nl, nr = int(fields.get("V_L", 0)), int(fields.get("V_R", 0))
        pairs = [(int(a), int(b)) for a, b in re.findall(r"\((\d+),(\d+)\)", fields["pairs"])]
        labels = None
        if "labels" in fields:
            labels = [int(x) for x in fields["labels"].strip("[]").split(",") if x]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"cannot parse graph {text!r}") from exc
    return FeynmanGraph(tuple(vb), nl, nr, tuple(pairs), labels and tuple(labels))


def _graph_from_multigraph(colors, A) -> FeynmanGraph:
    """Build the graph whose vertex order is ``colors`` (bulk, then L, then R)."""
    n = len(colors)
    bulk = [c for c in colors if c[0] == BULK]
    nl = sum(1 for c in colors if c[0] == LEFT)
    nr = sum(1 for c in colors if c[0] == RIGHT)
    if colors != sorted(colors, key=lambda c: c[0]):
        raise ValueError("vertices must be ordered bulk, left, right")
    start, nxt = [], 0
    for c in colors:
        start.append(nxt)
        nxt += c[1] if c[0] == BULK else 1
    free = list(start)
    pairs = []
    for u in range(n):
        for v in range(u, n):
            for _ in range(A[u][v]):
                a = free[u]; free[u] += 1
                b = free[v]; free[v] += 1
                pairs.append((a, b))
    return FeynmanGraph(tuple(c[1] for c in bulk), nl, nr, tuple(pairs),
                        tuple(c[2] for c in bulk))


# ---------------------------------------------------------------------------
# coloured multigraph machinery

def _nonzero(entry) -> bool:
    return any(entry) if isinstance(entry, tuple) else entry != 0


def _refine(colors, M):
    """Colour refinement; returns an isomorphism-invariant integer class per vertex."""
    n = len(colors)
    keys = sorted(set(colors))
    cls = [keys.index(c) for c in colors]
    while True:
        sig = [(cls[v], tuple(sorted((M[v][w], cls[w]) for w in range(n) if w != v and _nonzero(M[v][w]))),
                M[v][v]) for v in range(n)]
        keys = sorted(set(sig))
        new = [keys.index(s) for s in sig]
        if len(keys) == len(set(cls)):
            return new
        cls = new


def _vertex_automorphisms(colors, M):
    """All vertex permutations preserving colours and the matrix M."""
    n = len(colors)
    cls = _refine(colors, M)
    order = sorted(range(n), key=lambda v: (cls[v], v))
    perm = [-1] * n
    used = [False] * n
    out = []

    def rec(i):
        if i == n:
            out.append(tuple(perm))
            return
        v = order[i]
        for w in range(n):
            if used[w] or cls[w] != cls[v] or M[w][w] != M[v][v]:
                continue
            ok = True
            for j in range(i):
                u = order[j]
                if M[v][u] != M[w][perm[u]]:
                    ok = False
                    break
            if ok:
                perm[v] = w
                used[w] = True
                rec(i + 1)
                used[w] = False
                perm[v] = -1
    rec(0)
    return out


def _canonical(colors, M):
    """Lexicographically minimal (colours, lower-triangle) encoding and labeling."""
    n = len(colors)
    cls = _refine(colors, M)
    slots = sorted(cls)  # position i must hold a vertex of class slots[i]
    best = [None]
    best_perm = [None]
    perm = []
    used = [False] * n

    def rec(i, tight, enc):
        if i == n:
            if best[0] is None or enc < best[0]:
                best[0] = list(enc)
                best_perm[0] = list(perm)
            return
        for w in range(n):
            if used[w] or cls[w] != slots[i]:
                continue
            row = [M[w][perm[j]] for j in range(i)] + [M[w][w]]
            new_tight = tight
            if tight and best[0] is not None:
                ref = best[0][len(enc):len(enc) + len(row)]
                if row > ref:
                    continue
                new_tight = row == ref
            used[w] = True
            perm.append(w)
            rec(i + 1, new_tight, enc + row)
            perm.pop()
            used[w] = False
    rec(0, True, [])
    p = best_perm[0]
    key = (tuple(colors[w] for w in p), tuple(best[0]))
    return key, p


def _degree(entry) -> int:
    return sum(entry) if isinstance(entry, tuple) else entry


def _components(M) -> list[list[int]]:
    n = len(M)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in range(n):
                if not seen[w] and _nonzero(M[v][w]):
                    seen[w] = True
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def _analyze_connected(colors, M):
    """(key, number of vertex automorphisms, canonical vertex order) of a
    connected coloured multigraph. Leaves hanging off larger vertices are
    folded into the colour of their neighbour, with a factorial for each
    group of interchangeable leaves."""
    n = len(colors)
    deg = [sum(_degree(M[v][w]) for w in range(n) if w != v) + 2 * _degree(M[v][v])
           for v in range(n)]
    leaves = [v for v in range(n) if deg[v] == 1] if n > 2 else []
    if not leaves:
        key, p = _canonical(colors, M)
        return key, len(_vertex_automorphisms(colors, M)), p
    core = [v for v in range(n) if deg[v] != 1]
    attach = defaultdict(list)
    for v in leaves:
        w = next(w for w in range(n) if w != v and _nonzero(M[v][w]))
        attach[w].append((colors[v], M[v][w], v))
    ccolors, factor = [], 1
    for w in core:
        sig = Counter((c, e) for c, e, _ in attach[w])
        for cnt in sig.values():
            factor *= math.factorial(cnt)
        ccolors.append((colors[w], tuple(sorted(sig.items()))))
    CM = [[M[a][b] for b in core] for a in core]
    key, p = _canonical(ccolors, CM)
    order = [core[i] for i in p]
    for w in list(order):
        order.extend(v for _, _, v in sorted(attach[w], key=lambda t: (t[0], t[1])))
    return key, len(_vertex_automorphisms(ccolors, CM)) * factor, order


def _analyze(colors, M):
    """Isomorphism key, vertex-automorphism count and canonical vertex order.

    Connected components are analysed separately; identical components
    contribute a factorial of their multiplicity."""
    parts = []
    for comp in _components(M):
        sub_c = [colors[v] for v in comp]
        sub_M = [[M[a][b] for b in comp] for a in comp]
        key, aut, p = _analyze_connected(sub_c, sub_M)
        parts.append((repr(key), key, aut, [comp[i] for i in p]))
    parts.sort(key=lambda t: t[0])
    aut = 1
    for cnt in Counter(t[0] for t in parts).values():
        aut *= math.factorial(cnt)
    for t in parts:
        aut *= t[2]
    return tuple(t[1] for t in parts), aut, [v for t in parts for v in t[3]]


def _multiplicity_factor(M) -> int:
    """prod over vertex pairs of (parallel edge permutations) and loop flips.

    Entries of M are ints or tuples of ints (edge counts per edge colour)."""
    n = len(M)
    f = 1
    for u in range(n):
        for v in range(u, n):
            entry = M[u][v]
            counts = entry if isinstance(entry, tuple) else (entry,)
            for a in counts:
                f *= math.factorial(a)
                if u == v:
                    f *= 2 ** a
    return f


def _canonical_graph_data(g: FeynmanGraph):
    colors = g.vertex_colors()
    A = g.multiplicity()
    _, _, order = _analyze(colors, A)
    p = sorted(order, key=lambda v: colors[v][0])
    ccols = [colors[v] for v in p]
    B = [[A[p[i]][p[j]] for j in range(len(p))] for i in range(len(p))]
    return list(ccols), B


def canonical_key(g: FeynmanGraph):
    """Relabeling-invariant encoding; equal keys iff isomorphic graphs."""
    return _analyze(g.vertex_colors(), g.multiplicity())[0]


def aut_order(g: FeynmanGraph) -> int:
    """Order of the half-edge automorphism group of ``g``."""
    if g.n_half_edges > MAX_HALF_EDGES:
        raise ValueError(f"more than {MAX_HALF_EDGES} half-edges")
    A = g.multiplicity()
    if g.n_vertices == 0:
        return 1
    return _analyze(g.vertex_colors(), A)[1] * _multiplicity_factor(A)


def loop_order(g: FeynmanGraph) -> Fraction:
    """l(G) = |E| - |V_b| - |V_boundary| / 2."""
    return Fraction(g.n_edges) - g.n_bulk - Fraction(g.n_left + g.n_right, 2)


# ---------------------------------------------------------------------------
# enumeration

def _bulk_multigraphs(valences, legs_ok, allow_loops, n_left, n_right):
    """Yield (A_bulk, legL, legR) with the prescribed bulk degrees.

    n_left / n_right are the number of bulk-to-boundary legs allowed per side
    (None = any)."""
    n = len(valences)
    A = [[0] * n for _ in range(n)]
    legL = [0] * n
    legR = [0] * n
    rem = list(valences)

    def rec(i, usedL, usedR):
        if i == n:
            yield [row[:] for row in A], legL[:], legR[:]
            return
        r = rem[i]
        for loops in range(0, r // 2 + 1 if allow_loops else 1):
            r1 = r - 2 * loops
            A[i][i] = loops
            yield from distribute(i, i + 1, r1, usedL, usedR)
        A[i][i] = 0

    def distribute(i, j, r, usedL, usedR):
        if j == n:
            if not legs_ok:
                if r == 0:
                    legL[i] = legR[i] = 0
                    yield from rec(i + 1, usedL, usedR)
                return
            for a in range(r + 1):
                b = r - a
                if n_left is not None and usedL + a > n_left:
                    continue
                if n_right is not None and usedR + b > n_right:
                    continue
                legL[i], legR[i] = a, b
                yield from rec(i + 1, usedL + a, usedR + b)
            legL[i] = legR[i] = 0
            return
        for a in range(min(r, rem[j]) + 1):
            A[i][j] = A[j][i] = a
            rem[j] -= a
            yield from distribute(i, j + 1, r - a, usedL, usedR)
            rem[j] += a
        A[i][j] = A[j][i] = 0

    yield from rec(0, 0, 0)


def _assemble(bulk_colors, A, legL, legR, LL, LR, RR) -> FeynmanGraph:
    nb = len(bulk_colors)
    nL = sum(legL) + 2 * LL + LR
    nR = sum(legR) + 2 * RR + LR
    n = nb + nL + nR
    M = [[0] * n for _ in range(n)]
    for u in range(nb):
        for v in range(nb):
            M[u][v] = A[u][v]
    li, ri = nb, nb + nL

    def link(u, v):
        M[u][v] += 1
        M[v][u] += 1
    for v in range(nb):
        for _ in range(legL[v]):
            link(v, li); li += 1
        for _ in range(legR[v]):
            link(v, ri); ri += 1
    for _ in range(LL):
        link(li, li + 1); li += 2
    for _ in range(LR):
        link(li, ri); li += 1; ri += 1
    for _ in range(RR):
        link(ri, ri + 1); ri += 2
    colors = [(BULK, k, lab) for k, lab in bulk_colors] + [(LEFT,)] * nL + [(RIGHT,)] * nR
    return _graph_from_multigraph(colors, M)


def graphs_with_vertices(bulk_colors, n_left=None, n_right=None, allow_short_loops=True,
                         allow_boundary_edges=True, forbid=("RR_none",)) -> list[FeynmanGraph]:
    """All graphs (one per isomorphism class) with the given bulk vertices.

    ``bulk_colors`` is a list of (valence, label). ``n_left``/``n_right`` fix
    the boundary vertex counts; ``None`` allows any number. Boundary-boundary
    edges are only produced when the counts are fixed.
    """
    bulk_colors = sorted((int(k), int(lab)) for k, lab in bulk_colors)
    valences = [k for k, _ in bulk_colors]
    out = {}
    fixed = n_left is not None and n_right is not None
    for A, legL, legR in _bulk_multigraphs(valences, True, allow_short_loops, n_left, n_right):
        sL, sR = sum(legL), sum(legR)
        if fixed:
            restL, restR = n_left - sL, n_right - sR
            combos = []
            for LR in range(min(restL, restR) + 1):
                if (restL - LR) % 2 or (restR - LR) % 2:
                    continue
                LL, RR = (restL - LR) // 2, (restR - LR) // 2
                if not allow_boundary_edges and LL + LR + RR:
                    continue
                combos.append((LL, LR, RR))
        else:
            combos = [(0, 0, 0)]
        for LL, LR, RR in combos:
            g = _assemble(bulk_colors, A, legL, legR, LL, LR, RR)
            out.setdefault(canonical_key(g), g)
    return [out[k] for k in sorted(out, key=repr)]


def enumerate_graphs(max_half_edges: int, allowed_valences, n_left: int = 0, n_right: int = 0,
                     allow_short_loops: bool = True, low_valence: bool = False,
                     include_empty: bool = False) -> list[FeynmanGraph]:
    """One representative per isomorphism class, sorted by half-edge count.

    Bulk valences are drawn from ``allowed_valences``; valences below 3 need
    ``low_valence=True``. The empty graph is excluded unless requested.
    """
    if max_half_edges > MAX_HALF_EDGES:
        raise ValueError(f"max_half_edges is limited to {MAX_HALF_EDGES}")
    vals = sorted(set(int(k) for k in allowed_valences))
    if any(k < 3 for k in vals) and not low_valence:
        raise ValueError("valences below 3 require low_valence=True")
    if any(k < 1 for k in vals):
        raise ValueError("valences must be positive")
    budget = max_half_edges - n_left - n_right
    if budget < 0:
        return []
    result = []
    for nb in range(0, budget // max(1, min(vals, default=1)) + 1):
        for combo in itertools.combinations_with_replacement(vals, nb):
            s = sum(combo)
            if s > budget or (s + n_left + n_right) % 2:
                continue
            if nb == 0 and n_left + n_right == 0 and not include_empty:
                continue
            result.extend(graphs_with_vertices([(k, 0) for k in combo], n_left, n_right,
                                               allow_short_loops))
    result.sort(key=lambda g: (g.n_half_edges, g.n_bulk, repr(canonical_key(g))))
    return result


# ---------------------------------------------------------------------------
# decorations

@dataclass(frozen=True)
class DecoratedGraph:
    """A graph with vertex sides (``L``/``R``) and edge marks (``u``/``c``).

    ``dec_E`` is indexed like ``graph.pairs``."""

    graph: FeynmanGraph
    dec_V: tuple[str, ...]
    dec_E: tuple[str, ...]

    def is_admissible(self) -> bool:
        g = self.graph
        for v in range(g.n_vertices):
            k = g.kind(v)
            if k == LEFT and self.dec_V[v] != "L" or k == RIGHT and self.dec_V[v] != "R":
                return False
        for (u, v), d in zip(g.edges(), self.dec_E):
            if self.dec_V[u] != self.dec_V[v] and d != "c":
                return False
        return True

    def _colored(self):
        g = self.graph
        colors = [c + (self.dec_V[v],) for v, c in enumerate(g.vertex_colors())]
        n = g.n_vertices
        M = [[(0, 0)] * n for _ in range(n)]
        for (u, v), d in zip(g.edges(), self.dec_E):
            i = 0 if d == "u" else 1
            e = list(M[u][v]); e[i] += 1
            M[u][v] = tuple(e)
            if u != v:
                M[v][u] = tuple(e)
        return colors, M

    def key(self):
        return _analyze(*self._colored())[0]

    def aut_order(self) -> int:
        """|Aut^dec| from the decorated multigraph (independent of orbit counts)."""
        colors, M = self._colored()
        if not colors:
            return 1
        return _analyze(colors, M)[1] * _multiplicity_factor(M)

    def n_cut(self) -> int:
        return sum(1 for d in self.dec_E if d == "c")


def _admissible_decorations(g: FeynmanGraph):
    edges = g.edges()
    free_v = [v for v in range(g.n_vertices) if g.kind(v) == BULK]
    for sides in itertools.product("LR", repeat=len(free_v)):
        dv = ["L" if g.kind(v) == LEFT else "R" for v in range(g.n_vertices)]
        for v, s in zip(free_v, sides):
            dv[v] = s
        free_e = [i for i, (u, v) in enumerate(edges) if dv[u] == dv[v]]
        for marks in itertools.product("uc", repeat=len(free_e)):
            de = ["c"] * len(edges)
            for i, mk in zip(free_e, marks):
                de[i] = mk
            yield tuple(dv), tuple(de)


def enumerate_decorations(g: FeynmanGraph) -> list[dict]:
    """Aut(G)-orbits of admissible decorations.

    Two decorations of the same graph lie in one orbit exactly when the
    decorated graphs are isomorphic, so orbits are the classes of decorated
    canonical keys. Each entry has a representative ``decorated`` graph, the
    ``orbit_size`` and the stabilizer order ``aut_dec``, which is counted
    directly on the decorated graph.
    """
    if g.n_half_edges > MAX_HALF_EDGES:
        raise ValueError(f"more than {MAX_HALF_EDGES} half-edges")
    orbits: dict = {}
    for dv, de in _admissible_decorations(g):
        dg = DecoratedGraph(g, dv, de)
        k = dg.key()
        if k in orbits:
            orbits[k][1] += 1
        else:
            orbits[k] = [dg, 1]
    return [{"decorated": dg, "orbit_size": size, "aut_dec": dg.aut_order()}
            for dg, size in (orbits[k] for k in sorted(orbits, key=repr))]


def decor_identity_residual(g: FeynmanGraph, weight=None) -> Fraction:
    """Exact residual of the decoration identity for ``g``.

    With a decoration weight w invariant under Aut(G),
    sum_{all admissible f} w(f)/|Aut| = sum_{orbits} w(f)/|Aut^dec|.
    The default weight counts decorations (w = 1). Also checks
    |orbit| * |Aut^dec| = |Aut| for every orbit.
    """
    weight = weight or (lambda dg: Fraction(1))
    aut = aut_order(g)
    lhs = sum((weight(DecoratedGraph(g, dv, de)) for dv, de in _admissible_decorations(g)),
              Fraction(0)) / aut
    orbits = enumerate_decorations(g)
    rhs = sum((Fraction(weight(o["decorated"])) / o["aut_dec"] for o in orbits), Fraction(0))
    for o in orbits:
        if o["orbit_size"] * o["aut_dec"] != aut:
            return Fraction(-1)
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# gluing

def perfect_matchings(items):
    items = list(items)
    if not items:
        yield []
        return
    if len(items) % 2:
        return
    a = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1:]
        for m in perfect_matchings(rest):
            yield [(a, items[i])] + m


@dataclass
class GluedSum:
    """Decorated graphs with integer multiplicities, keyed by canonical form."""

    terms: dict = field(default_factory=dict)

    def add(self, dg: DecoratedGraph, mult: int = 1):
        k = dg.key()
        if k in self.terms:
            self.terms[k] = (self.terms[k][0], self.terms[k][1] + mult)
        else:
            self.terms[k] = (dg, mult)

    def items(self):
        return [self.terms[k] for k in sorted(self.terms, key=repr)]

    def __len__(self):
        return len(self.terms)

    def total(self) -> int:
        return sum(m for _, m in self.terms.values())


def glue_graphs(gL: FeynmanGraph, gR: FeynmanGraph) -> GluedSum:
    """Sum over perfect matchings of V_R(gL) and V_L(gR), fusing matched legs into c-edges."""
    if gL.boundary_edges()["RR"] or gR.boundary_edges()["LL"]:
        raise ValueError("left graph must have no R-R edges and right graph no L-L edges")
    out = GluedSum()
    # relabel vertices: gL vertices then gR vertices
    offs = gL.n_vertices
    nbrs = {}
    edges_u = []
    for u, v in gL.edges():
        edges_u.append((u, v))
    for u, v in gR.edges():
        edges_u.append((u + offs, v + offs))
    matched = [v for v in range(gL.n_vertices) if gL.kind(v) == RIGHT]
    matched += [v + offs for v in range(gR.n_vertices) if gR.kind(v) == LEFT]
    mset = set(matched)
    for u, v in edges_u:
        if u in mset:
            nbrs[u] = v
        if v in mset:
            nbrs[v] = u
    kept_u = [(u, v) for u, v in edges_u if u not in mset and v not in mset]
    # surviving vertices in final order: bulk(gL), bulk(gR), V_L(gL), V_R(gR)
    survivors = ([v for v in range(gL.n_bulk)] + [v + offs for v in range(gR.n_bulk)]
                 + [v for v in range(gL.n_vertices) if gL.kind(v) == LEFT]
                 + [v + offs for v in range(gR.n_vertices) if gR.kind(v) == RIGHT])
    pos = {v: i for i, v in enumerate(survivors)}
    side = ["L" if v < offs else "R" for v in survivors]
    colors = ([(BULK, k, lab) for k, lab in zip(gL.valences, gL.labels)]
              + [(BULK, k, lab) for k, lab in zip(gR.valences, gR.labels)]
              + [(LEFT,)] * gL.n_left + [(RIGHT,)] * gR.n_right)
    for match in perfect_matchings(matched):
        cut = [(nbrs[a], nbrs[b]) for a, b in match]
        n = len(survivors)
        M = [[0] * n for _ in range(n)]
        elist = [(pos[u], pos[v], "u") for u, v in kept_u] + [(pos[u], pos[v], "c") for u, v in cut]
        for u, v, _ in elist:
            M[u][v] += 1
            if u != v:
                M[v][u] += 1
        g = _graph_from_multigraph(colors, M)
        # recover the decoration aligned with g.pairs
        pool = defaultdict(list)
        for u, v, d in elist:
            pool[tuple(sorted((u, v)))].append(d)
        for k in pool:
            pool[k].sort(reverse=True)  # 'u' before 'c'
        de = tuple(pool[e].pop() for e in g.edges())
        out.add(DecoratedGraph(g, tuple(side), de))
    return out


def cut_graph(dg: DecoratedGraph) -> tuple[FeynmanGraph, FeynmanGraph]:
    """Cut every c-edge; returns the unique (gL, gR) whose gluing contains ``dg``."""
    g = dg.graph
    sides = {"L": [], "R": []}
    for v in range(g.n_vertices):
        sides[dg.dec_V[v]].append(v)
    res = []
    for X in ("L", "R"):
        vs = sides[X]
        bulk = [v for v in vs if g.kind(v) == BULK]
        outer = [v for v in vs if g.kind(v) != BULK]
        new_bdry = []
        edges = []
        for (u, v), d in zip(g.edges(), dg.dec_E):
            if d == "u":
                if dg.dec_V[u] == X:
                    edges.append((u, v))
            else:
                for end in (u, v):
                    if dg.dec_V[end] == X:
                        tag = ("new", len(new_bdry))
                        new_bdry.append(tag)
                        edges.append((end, tag))
        if X == "L":
            order = bulk + outer + new_bdry  # outer are left boundary, new are right
            colors = ([(BULK, g.valences[v], g.labels[v]) for v in bulk]
                      + [(LEFT,)] * len(outer) + [(RIGHT,)] * len(new_bdry))
        else:
            order = bulk + new_bdry + outer
            colors = ([(BULK, g.valences[v], g.labels[v]) for v in bulk]
                      + [(LEFT,)] * len(new_bdry) + [(RIGHT,)] * len(outer))
        pos = {v: i for i, v in enumerate(order)}
        n = len(order)
        M = [[0] * n for _ in range(n)]
        for a, b in edges:
            i, j = pos[a], pos[b]
            M[i][j] += 1
            if i != j:
                M[j][i] += 1
        res.append(_graph_from_multigraph(colors, M))
    return res[0], res[1]


def auto_gluing_residual(gL: FeynmanGraph, gR: FeynmanGraph) -> int:
    """max |m * |Aut^dec| - |Aut(gL)| |Aut(gR)|| over the glued decorated graphs."""
    target = aut_order(gL) * aut_order(gR)
    glued = glue_graphs(gL, gR)
    worst = 0
    for dg, mult in glued.items():
        worst = max(worst, abs(mult * dg.aut_order() - target))
    return worst
