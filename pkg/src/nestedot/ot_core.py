"""Exact optimal transport between two discrete measures.

The solver is a transportation simplex (MODI / u-v method) on a spanning-tree
basis. Supports are small, so a dense tableau-free implementation is enough;
what matters is that the optimum is a true vertex with exact complementary
slackness, which gives a dual certificate for free.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import NestedOTError, NoCertificate, OracleSizeLimit
from .measures import DiscreteMeasure

FEASIBILITY_ATOL = 1e-9
_REDUCED_COST_TOL = 1e-13
_MASS_SNAP = 16 * np.finfo(float).eps
_BLAND_AFTER = 50


@dataclass(frozen=True, eq=False)
class Coupling:
    mass: np.ndarray

    def __post_init__(self):
        m = np.array(self.mass, dtype=float, copy=True)
        if m.ndim != 2:
            raise NestedOTError("coupling mass must be a matrix")
        if np.any(m < 0):
            raise NestedOTError("coupling mass must be nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @property
    def rows(self) -> int:
        return self.mass.shape[0]

    @property
    def cols(self) -> int:
        return self.mass.shape[1]

    def is_feasible(self, mu: DiscreteMeasure, nu: DiscreteMeasure, atol: float = FEASIBILITY_ATOL) -> bool:
        if self.mass.shape != (mu.size, nu.size):
            return False
        return bool(
            np.allclose(self.mass.sum(axis=1), mu.weights, rtol=0, atol=atol)
            and np.allclose(self.mass.sum(axis=0), nu.weights, rtol=0, atol=atol)
        )

    def to_dict(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "mass": self.mass.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Coupling":
        return cls(np.asarray(d["mass"], dtype=float).reshape(int(d["rows"]), int(d["cols"])))


@dataclass(frozen=True, eq=False)
class OTResult:
    """Value of W_p^p, an optimal plan, and (when available) dual potentials."""

    cost: float
    coupling: Coupling
    p: float
    potentials: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def distance(self) -> float:
        return self.cost ** (1.0 / self.p)

    def to_dict(self) -> dict:
        return {"cost": self.cost, "p": self.p, "mass": self.coupling.mass.tolist()}


def cost_matrix(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return np.where(dist > 0, dist ** p, 0.0)


def _check(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> None:
    if mu.dim != nu.dim:
        raise NestedOTError("dimension mismatch")
    if not p >= 1:
        raise NestedOTError("invalid exponent")


# -- transportation simplex ---------------------------------------------------


def _northwest_corner(a: np.ndarray, b: np.ndarray):
    m, n = len(a), len(b)
    x = np.zeros((m, n))
    basis = []
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while True:
        v = min(ra[i], rb[j])
        x[i, j] = v
        basis.append((i, j))
        ra[i] -= v
        rb[j] -= v
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1 or (i < m - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1
    return x, basis


def _potentials(C: np.ndarray, basis, m: int, n: int):
    """Solve u_i + v_j = C_ij on the basis tree with u_0 = 0."""
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    adj_r: list[list[int]] = [[] for _ in range(m)]
    adj_c: list[list[int]] = [[] for _ in range(n)]
    for i, j in basis:
        adj_r[i].append(j)
        adj_c[j].append(i)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, k = stack.pop()
        if kind == "r":
            for j in adj_r[k]:
                if np.isnan(v[j]):
                    v[j] = C[k, j] - u[k]
                    stack.append(("c", j))
        else:
            for i in adj_c[k]:
                if np.isnan(u[i]):
                    u[i] = C[i, k] - v[k]
                    stack.append(("r", i))
    return u, v


def _cycle(basis, m: int, enter: tuple[int, int]):
    """Cells of the unique cycle closed by ``enter`` in the basis tree, starting at ``enter``."""
    i0, j0 = enter
    # tree nodes: rows 0..m-1, columns m..m+n-1; walk from column j0 to row i0
    adj: dict[int, list[tuple[int, tuple[int, int]]]] = {}
    for i, j in basis:
        adj.setdefault(i, []).append((m + j, (i, j)))
        adj.setdefault(m + j, []).append((i, (i, j)))
    start, goal = m + j0, i0
    parent: dict[int, tuple[int, tuple[int, int]] | None] = {start: None}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nxt, cell in adj.get(node, ()):
            if nxt not in parent:
                parent[nxt] = (node, cell)
                stack.append(nxt)
    path = []
    node = goal
    while parent[node] is not None:
        prev, cell = parent[node]
        path.append(cell)
        node = prev
    # path runs from row i0 back to column j0; prepend the entering cell
    return [enter] + path


def transport_simplex(a: np.ndarray, b: np.ndarray, C: np.ndarray, max_iter: int = 10_000):
    """Solve min <C, X> over X >= 0 with X 1 = a, X^T 1 = b.

    ``a`` and ``b`` must be strictly positive with equal sums. Returns the plan
    and the dual potentials (u, v) of the final basis.
    """
    m, n = len(a), len(b)
    x, basis = _northwest_corner(a, b)
    scale = max(1.0, float(np.abs(C).max(initial=0.0)))
    degenerate_run = 0
    for _ in range(max_iter):
        u, v = _potentials(C, basis, m, n)
        red = C - u[:, None] - v[None, :]
        for i, j in basis:
            red[i, j] = 0.0
        tol = -_REDUCED_COST_TOL * scale
        if red.min() >= tol:
            # mass left behind by rounding in the pivots is not transport
            x[x <= _MASS_SNAP * max(a.max(), b.max())] = 0.0
            return x, (u, v)
        if degenerate_run < _BLAND_AFTER:
            enter = np.unravel_index(int(np.argmin(red)), red.shape)
        else:
            # Bland-style fallback: first improving cell in row-major order
            enter = tuple(np.argwhere(red < tol)[0])
        enter = (int(enter[0]), int(enter[1]))
        cyc = _cycle(basis, m, enter)
        minus = cyc[1::2]
        theta = min(x[c] for c in minus)
        leave = min((c for c in minus if x[c] == theta), key=lambda c: (c[0], c[1]))
        for k, c in enumerate(cyc):
            if k % 2 == 0:
                x[c] += theta
            else:
                x[c] -= theta
        x[leave] = 0.0
        basis.remove(leave)
        basis.append(enter)
        degenerate_run = degenerate_run + 1 if theta == 0 else 0
    raise NestedOTError("transport simplex did not converge")


def solve_transport(a: np.ndarray, b: np.ndarray, C: np.ndarray):
    """Exact transport between weight vectors that may contain zeros.

    Zero-weight rows/columns are removed before the simplex and reinstated as
    zero rows/columns; their potentials are set to the tightest feasible value.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ri = np.flatnonzero(a > 0)
    ci = np.flatnonzero(b > 0)
    sub, (us, vs) = transport_simplex(a[ri], b[ci], C[np.ix_(ri, ci)])
    x = np.zeros((len(a), len(b)))
    x[np.ix_(ri, ci)] = sub
    u = np.full(len(a), np.nan)
    v = np.full(len(b), np.nan)
    u[ri] = us
    v[ci] = vs
    zr = np.setdiff1d(np.arange(len(a)), ri)
    zc = np.setdiff1d(np.arange(len(b)), ci)
    if len(zc):
        v[zc] = (C[np.ix_(ri, zc)] - u[ri][:, None]).min(axis=0)
    if len(zr):
        u[zr] = (C[zr, :] - v[None, :]).min(axis=1)
    return x, (u, v)


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> OTResult:
    """W_p^p(mu, nu) with an optimal coupling and its dual potentials."""
    _check(mu, nu, p)
    C = cost_matrix(mu.atoms, nu.atoms, p)
    x, pots = solve_transport(mu.weights, nu.weights, C)
    cost = float(np.sum(x * C))
    return OTResult(cost=max(cost, 0.0), coupling=Coupling(x), p=float(p), potentials=pots)


def kantorovich_gap(result: OTResult, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Worst violation of the Kantorovich optimality certificate.

    Checks dual feasibility phi_i + psi_j <= c_ij, equality on the support of
    the plan, and the duality gap <c, plan> - (<a, phi> + <b, psi>).
    """
    if result.potentials is None:
        raise NoCertificate("no certificate")
    phi, psi = result.potentials
    C = cost_matrix(mu.atoms, nu.atoms, result.p)
    slack = C - phi[:, None] - psi[None, :]
    mass = result.coupling.mass
    if mass.shape != C.shape:
        raise NestedOTError("dimension mismatch")
    infeasible = max(0.0, float(-slack.min()))
    on_support = float(np.abs(slack[mass > 0]).max(initial=0.0))
    primal = float(np.sum(mass * C))
    dual = float(mu.weights @ phi + nu.weights @ psi)
    return max(infeasible, on_support, abs(primal - dual))


# -- brute-force oracle ---------------------------------------------------------

_PERM_LIMIT = 8
_VERTEX_LIMIT = 5


def _vertex_min(a: tuple, b: tuple, C: np.ndarray) -> float:
    """Minimum of <C, X> over all vertices of the transport polytope.

    Every vertex has forest support, so it is produced by repeatedly picking a
    cell, moving min(residual row, residual column) and retiring the exhausted
    line (retired lines are None). All such orders are searched, memoized on
    the residual state.
    """
    memo: dict = {}
    Cl = C.tolist()

    def rec(ra: tuple, rb: tuple) -> float:
        key = (ra, rb)
        hit = memo.get(key)
        if hit is not None:
            return hit
        rows = [i for i, r in enumerate(ra) if r is not None]
        cols = [j for j, r in enumerate(rb) if r is not None]
        if len(rows) == 1:
            i = rows[0]
            out = sum(rb[j] * Cl[i][j] for j in cols)
        elif len(cols) == 1:
            j = cols[0]
            out = sum(ra[i] * Cl[i][j] for i in rows)
        else:
            out = math.inf
            for i in rows:
                ai, Ci = ra[i], Cl[i]
                for j in cols:
                    bj = rb[j]
                    if ai <= bj:
                        val = ai * Ci[j] + rec(ra[:i] + (None,) + ra[i + 1:], rb[:j] + (bj - ai,) + rb[j + 1:])
                    else:
                        val = bj * Ci[j] + rec(ra[:i] + (ai - bj,) + ra[i + 1:], rb[:j] + (None,) + rb[j + 1:])
                    if val < out:
                        out = val
        memo[key] = out
        return out

    return rec(tuple(a), tuple(b))


def brute_force_wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0) -> float:
    """Exact W_p^p by exhaustive enumeration; an independent oracle for tests.

    Equal-size uniform measures (up to 8 atoms) use permutation enumeration;
    anything else enumerates vertices of the transport polytope (up to 5x5
    after dropping zero-weight atoms).
    """
    _check(mu, nu, p)
    ma, mb = mu.weights > 0, nu.weights > 0
    x, a = mu.atoms[ma], mu.weights[ma]
    y, b = nu.atoms[mb], nu.weights[mb]
    C = cost_matrix(x, y, p)
    n = len(a)
    uniform = n == len(b) and np.all(a == a[0]) and np.all(b == b[0])
    if uniform and n <= _PERM_LIMIT:
        best = math.inf
        rows = np.arange(n)
        for perm in itertools.permutations(range(n)):
            best = min(best, float(C[rows, perm].sum()))
        return best / n
    if len(a) > _VERTEX_LIMIT or len(b) > _VERTEX_LIMIT:
        raise OracleSizeLimit("oracle size limit")
    return float(_vertex_min(tuple(a.tolist()), tuple(b.tolist()), C))


def brute_force_transport(a, b, C: np.ndarray) -> float:
    """Exact min <C, X> over the transport polytope of (a, b) by vertex enumeration (<= 5x5)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ra, cb = a > 0, b > 0
    if ra.sum() > _VERTEX_LIMIT or cb.sum() > _VERTEX_LIMIT:
        raise OracleSizeLimit("oracle size limit")
    return float(_vertex_min(tuple(a[ra].tolist()), tuple(b[cb].tolist()), np.asarray(C, dtype=float)[np.ix_(ra, cb)]))
