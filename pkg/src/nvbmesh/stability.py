"""Dyadic nodal weights and measured H1-stability of the L2-projection.

For a node z_j the weight is d_j = 2**(e_j / 2) with the integer exponent

    e_j = min over elements T of (2*delta(z_j, T) - gen(T)),

where delta counts the minimal number of elements in a chain of pairwise
intersecting elements linking z_j to a corner of T.  Storing the exponent
instead of the weight turns every ratio and product bound into exact
integer arithmetic.

Chains connect through shared nodes, not only shared edges.  This is what
makes the weight-ratio law provable: for z_j, z_k in a common element T,
any chain realizing delta(z_k, .) extends by prepending T (which meets the
chain's first element at least in z_k), so the deltas differ by at most 1
and d_j / d_k <= 2 on every mesh.  Under edge-only chains that law is
falsifiable: a node touching a deep cluster can be chain-distance 1 from
it while a neighbor inside the same element needs several extra hops
around a boundary fan.

The factor-2 ratio bound caps the per-element pair sum at 13.5 < 25 and
keeps the smallest eigenvalue of every scaled element mass matrix above
5 - sqrt(13.5) > 1.3, which is the mechanism certifying H1-stability of
the L2-projection onto the P1 space.  This module evaluates those
per-element conditions and measures the realized stability constant on
nested mesh pairs by a deflated generalized power iteration.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh

INFINITE = math.inf


class NumericFailure(RuntimeError):
    """Raised when an iterative solve does not reach its tolerance."""


# -- element matrices ----------------------------------------------------------


def element_mass(coords) -> np.ndarray:
    """Exact P1 mass matrix of one triangle: |T|/6 diagonal, |T|/12 off."""
    p0, p1, p2 = coords
    area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1])
                  - (p1[1] - p0[1]) * (p2[0] - p0[0]))
    if area <= 0.0:
        raise ValueError(f"degenerate or inverted triangle (area {area:g})")
    return (area / 12.0) * (np.ones((3, 3)) + np.eye(3))


def element_stiffness(coords) -> np.ndarray:
    """Exact P1 stiffness matrix of one triangle."""
    p0, p1, p2 = coords
    area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1])
                  - (p1[1] - p0[1]) * (p2[0] - p0[0]))
    if area <= 0.0:
        raise ValueError(f"degenerate or inverted triangle (area {area:g})")
    b = np.array([p1[1] - p2[1], p2[1] - p0[1], p0[1] - p1[1]])
    c = np.array([p2[0] - p1[0], p0[0] - p2[0], p1[0] - p0[0]])
    return (np.outer(b, b) + np.outer(c, c)) / (4.0 * area)


# -- element-path distance ------------------------------------------------------


def _node_stars(mesh: Mesh) -> list[list[int]]:
    stars: list[list[int]] = [[] for _ in range(mesh.n_vertices)]
    for t in range(mesh.n_elements):
        for v in mesh.elements[t]:
            stars[int(v)].append(t)
    return stars


def _touching_adjacency(mesh: Mesh,
                        stars: list[list[int]] | None = None) -> list[list[int]]:
    """Element adjacency through shared nodes (edge-sharers included)."""
    if stars is None:
        stars = _node_stars(mesh)
    neighbor_sets: list[set[int]] = [set() for _ in range(mesh.n_elements)]
    for star in stars:
        for t in star:
            neighbor_sets[t].update(star)
    return [sorted(s - {t}) for t, s in enumerate(neighbor_sets)]


class DeltaDistance:
    """Element-path distance between nodes, computed lazily per source.

    delta(j, j) = 0; delta(j, k) = 1 if the nodes share an element; else
    the minimal number of elements in a chain of pairwise touching
    elements (consecutive ones share at least a node) whose first element
    contains z_j and whose last contains z_k.  Nodes in different
    components report infinity.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.stars = _node_stars(mesh)
        self.adj = _touching_adjacency(mesh, self.stars)
        self._levels: dict[int, np.ndarray] = {}

    def element_levels(self, j: int) -> np.ndarray:
        """BFS level of each element: 1 on the star of z_j, +1 per hop."""
        lv = self._levels.get(j)
        if lv is not None:
            return lv
        n = self.mesh.n_elements
        lv = np.full(n, -1, dtype=np.int64)
        queue = deque()
        for t in self.stars[j]:
            lv[t] = 1
            queue.append(t)
        while queue:
            t = queue.popleft()
            for s in self.adj[t]:
                if lv[s] < 0:
                    lv[s] = lv[t] + 1
                    queue.append(s)
        self._levels[j] = lv
        return lv

    def dist(self, j: int, k: int) -> float:
        if j == k:
            return 0
        lv = self.element_levels(j)
        best = INFINITE
        for t in self.stars[k]:
            if lv[t] > 0:
                best = min(best, int(lv[t]))
        return best

    def node_to_element(self, j: int, t: int) -> float:
        """delta(z_j, T): minimum of dist over the corners of T."""
        if j in (int(v) for v in self.mesh.elements[t]):
            return 0
        return min(self.dist(j, int(k)) for k in self.mesh.elements[t])


def delta_distance(mesh: Mesh) -> DeltaDistance:
    return DeltaDistance(mesh)


def is_element_connected(mesh: Mesh) -> bool:
    """True iff the elements form one component under node-sharing."""
    adj = _touching_adjacency(mesh)
    seen = np.zeros(mesh.n_elements, dtype=bool)
    queue = deque([0])
    seen[0] = True
    while queue:
        t = queue.popleft()
        for s in adj[t]:
            if not seen[s]:
                seen[s] = True
                queue.append(s)
    return bool(seen.all())


# -- nodal weights ---------------------------------------------------------------


@dataclass(frozen=True)
class NodeWeights:
    """Per-node dyadic weights d_j = 2**(exponents_j / 2)."""

    exponents: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return 2.0 ** (self.exponents.astype(np.float64) / 2.0)

    def d(self, j: int) -> float:
        return 2.0 ** (int(self.exponents[j]) / 2.0)


def compute_weights(mesh: Mesh) -> NodeWeights:
    """Evaluate the weight exponents exactly via element potentials.

    With omega(S) = -max{gen(T') : T' touches S}, the minimal exponent
    reachable through a chain of L pairwise touching elements starting at
    S is 2*L + omega(S), so a label-correcting sweep over the touching
    graph with step cost 2 and seeds omega(S) + 2 yields

        e_j = min over T containing z_j of min(-gen(T), beta(T)).

    This equals the brute-force minimum over all elements exactly (integer
    arithmetic throughout); the brute force remains available as
    ``brute_force_weight_exponents`` and is asserted equal in tests.
    """
    if not is_element_connected(mesh):
        raise ValueError("compute_weights requires a connected mesh")
    n_el = mesh.n_elements
    stars = _node_stars(mesh)
    adj = _touching_adjacency(mesh, stars)
    gen = mesh.gen

    # maximal generation among elements touching each node
    maxgen_node = np.zeros(mesh.n_vertices, dtype=np.int64)
    for j, star in enumerate(stars):
        maxgen_node[j] = max(int(gen[t]) for t in star)
    # omega: negated maximal generation in the node neighborhood of S
    omega = np.array([-max(int(maxgen_node[int(v)]) for v in mesh.elements[s])
                      for s in range(n_el)], dtype=np.int64)

    beta = omega + 2
    queue = deque(range(n_el))
    queued = np.ones(n_el, dtype=bool)
    while queue:
        s = queue.popleft()
        queued[s] = False
        cand = beta[s] + 2
        for t in adj[s]:
            if cand < beta[t]:
                beta[t] = cand
                if not queued[t]:
                    queued[t] = True
                    queue.append(t)

    exps = np.empty(mesh.n_vertices, dtype=np.int64)
    for j, star in enumerate(stars):
        exps[j] = min(min(-int(gen[t]), int(beta[t])) for t in star)
    return NodeWeights(exponents=exps)


def brute_force_weight_exponents(mesh: Mesh) -> np.ndarray:
    """Direct evaluation of min over T of (2*delta(z_j,T) - gen(T)).

    Test oracle, O(#nodes * #elements)."""
    dd = DeltaDistance(mesh)
    exps = np.empty(mesh.n_vertices, dtype=np.int64)
    for j in range(mesh.n_vertices):
        best = None
        for t in range(mesh.n_elements):
            d = dd.node_to_element(j, t)
            if math.isinf(d):
                continue
            val = 2 * int(d) - int(mesh.gen[t])
            if best is None or val < best:
                best = val
        assert best is not None
        exps[j] = best
    return exps


# -- per-element stability conditions --------------------------------------------


@dataclass
class ElementCondition:
    elem: int
    exponent_spread: int      # max_j e_j - min_j e_j within the element
    ratio: float              # 2**(spread/2)
    s_sum: float              # sum over j,k of d_j^2 / d_k^2
    lam_min_closed: float     # 5 - sqrt(s_sum)
    lam_min_eig: float        # direct symmetric eigensolve of B-hat
    passes: bool


@dataclass
class StabilityReport:
    """Per-element condition checks and realized global constants."""

    elements: list[ElementCondition] = field(default_factory=list)
    max_ratio: float = 0.0               # realized max weight ratio
    weight_size_ratio: float = 0.0       # max of d_j/h(T) and h(T)/d_j
    scaled_quartic_bound: float = 0.0    # top eigenvalue of the quartic pencil
    scaled_mass_bound: float = 0.0       # top eigenvalue of the mass pencil
    relaxed_ratio_value: float = 0.0     # 1 + r^2 + r^-2 at the realized ratio
    max_s_sum: float = 0.0
    min_lam: float = INFINITE
    measured_h1_constant: float | None = None

    @property
    def all_pass(self) -> bool:
        return all(e.passes for e in self.elements)

    def to_dict(self) -> dict:
        return {
            "all_pass": self.all_pass,
            "n_elements": len(self.elements),
            "max_ratio": self.max_ratio,
            "weight_size_ratio": self.weight_size_ratio,
            "scaled_quartic_bound": self.scaled_quartic_bound,
            "scaled_mass_bound": self.scaled_mass_bound,
            "relaxed_ratio_value": self.relaxed_ratio_value,
            "max_s_sum": self.max_s_sum,
            "min_lam": self.min_lam,
            "measured_h1_constant": self.measured_h1_constant,
            "failing_elements": [e.elem for e in self.elements if not e.passes],
        }


def _bhat(exps) -> np.ndarray:
    """Scaled element matrix: (d_j/d_k + d_k/d_j) * (1 + delta_jk)."""
    e = np.asarray(exps, dtype=np.float64)
    r = 2.0 ** ((e[:, None] - e[None, :]) / 2.0)
    return (r + 1.0 / r) * (np.ones((3, 3)) + np.eye(3))


def check_conditions(mesh: Mesh, weights: NodeWeights,
                     with_c78: bool = True) -> StabilityReport:
    """Evaluate the sufficient stability conditions on every element.

    Per element: weight-ratio bound (exponent spread <= 2), the pair sum
    S_T < 25, and positivity of the smallest eigenvalue 5 - sqrt(S_T) of
    the scaled mass matrix, cross-checked against a direct eigensolve.
    Realized global constants are collected, including the quadratic-form
    constants of the eigenvalue criterion when ``with_c78`` is set.
    """
    report = StabilityReport()
    exps = weights.exponents
    max_spread = 0
    for t in range(mesh.n_elements):
        e = [int(exps[int(v)]) for v in mesh.elements[t]]
        spread = max(e) - min(e)
        max_spread = max(max_spread, spread)
        ratio = 2.0 ** (spread / 2.0)
        s_sum = float(sum(2.0 ** (a - b) for a in e for b in e))
        lam_closed = 5.0 - math.sqrt(s_sum)
        lam_eig = float(np.linalg.eigvalsh(_bhat(e))[0])
        passes = (spread <= 2) and (s_sum < 25.0) and (lam_closed > 0.0)
        report.elements.append(ElementCondition(
            elem=t, exponent_spread=spread, ratio=ratio, s_sum=s_sum,
            lam_min_closed=lam_closed, lam_min_eig=lam_eig, passes=passes))
        report.max_s_sum = max(report.max_s_sum, s_sum)
        report.min_lam = min(report.min_lam, lam_closed)

    report.max_ratio = 2.0 ** (max_spread / 2.0)
    r = max(report.max_ratio, 1.0)
    report.relaxed_ratio_value = 1.0 + r * r + 1.0 / (r * r)

    c6 = 0.0
    d = weights.values
    for t in range(mesh.n_elements):
        p0, p1, p2 = mesh.coords(t)
        h = max(math.dist(p0, p1), math.dist(p1, p2), math.dist(p2, p0))
        for v in mesh.elements[t]:
            val = d[int(v)] / h
            c6 = max(c6, val, 1.0 / val)
    report.weight_size_ratio = c6

    if with_c78:
        c7 = c8 = 0.0
        mass_hat = np.ones((3, 3)) + np.eye(3)
        for cond in report.elements:
            t = cond.elem
            e = [int(exps[int(v)]) for v in mesh.elements[t]]
            p0, p1, p2 = mesh.coords(t)
            h = max(math.dist(p0, p1), math.dist(p1, p2), math.dist(p2, p0))
            lam2 = np.diag([h * h * 2.0 ** (-a) for a in e])  # (h/d_i)^2
            quartic = lam2 @ mass_hat @ lam2
            c7 = max(c7, float(scipy.linalg.eigh(
                quartic, mass_hat, eigvals_only=True)[-1]))
            if cond.lam_min_closed > 0.0:
                # the symmetrized pencil is positive definite exactly when
                # the scaled matrix is; skip failing elements
                sym = 0.5 * (lam2 @ mass_hat + mass_hat @ lam2)
                c8 = max(c8, float(scipy.linalg.eigh(
                    mass_hat, sym, eigvals_only=True)[-1]))
        report.scaled_quartic_bound = c7
        report.scaled_mass_bound = c8
    return report


def weights_to_csv(mesh: Mesh, weights: NodeWeights) -> str:
    lines = ["node,x,y,exponent"]
    for j in range(mesh.n_vertices):
        x, y = mesh.point(j)
        lines.append(f"{j},{x!r},{y!r},{int(weights.exponents[j])}")
    return "\n".join(lines) + "\n"


# -- assembly ---------------------------------------------------------------------


@dataclass
class SparseSystem:
    """Assembled P1 system; for nested pairs also the coarse system,
    the prolongation P (fine x coarse) and the cross mass B (coarse x fine)."""

    mesh: Mesh
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    coarse: "SparseSystem | None" = None
    prolong: sp.csr_matrix | None = None
    cross_mass: sp.csr_matrix | None = None

    _mass_factor: object = field(default=None, repr=False)

    def mass_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._mass_factor is None:
            self._mass_factor = spla.factorized(self.mass.tocsc())
        return self._mass_factor(rhs)


def assemble(mesh: Mesh) -> SparseSystem:
    """Assemble global mass and stiffness by element summation."""
    coords = mesh.vertices
    tris = mesh.elements
    m = mesh.n_elements
    p0 = coords[tris[:, 0]]
    p1 = coords[tris[:, 1]]
    p2 = coords[tris[:, 2]]
    area = 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))

    rows = np.repeat(tris, 3, axis=1).ravel()          # i index, 9 per element
    cols = np.tile(tris, (1, 3)).ravel()               # j index

    mass_hat = (np.ones((3, 3)) + np.eye(3)).ravel() / 12.0
    mass_vals = (area[:, None] * mass_hat[None, :]).ravel()

    b = np.stack([p1[:, 1] - p2[:, 1], p2[:, 1] - p0[:, 1], p0[:, 1] - p1[:, 1]],
                 axis=1)
    c = np.stack([p2[:, 0] - p1[:, 0], p0[:, 0] - p2[:, 0], p1[:, 0] - p0[:, 0]],
                 axis=1)
    stiff = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
        / (4.0 * area)[:, None, None]
    stiff_vals = stiff.reshape(m, 9).ravel()

    n = mesh.n_vertices
    mass = sp.coo_matrix((mass_vals, (rows, cols)), shape=(n, n)).tocsr()
    stiffness = sp.coo_matrix((stiff_vals, (rows, cols)), shape=(n, n)).tocsr()
    return SparseSystem(mesh=mesh, mass=mass, stiffness=stiffness)


def prolongation(coarse: Mesh, fine: Mesh) -> sp.csr_matrix:
    """P1 prolongation: coarse coefficients to fine coefficients.

    Requires fine to be produced from coarse by refinement: the coarse
    vertices are a prefix of the fine ones and every later vertex records
    the edge it bisected.  Each fine-node row holds the coarse hat-function
    values there (at most three nonzeros).
    """
    nc, nf = coarse.n_vertices, fine.n_vertices
    if nf < nc or not np.array_equal(fine.vertices[:nc], coarse.vertices):
        raise ValueError("meshes are not nested (coarse vertices must be a "
                         "prefix of the fine ones)")
    rows: list[dict[int, float]] = [{j: 1.0} for j in range(nc)]
    for j in range(nc, nf):
        a, b = (int(p) for p in fine.vertex_parents[j])
        if a < 0 or b < 0 or a >= j or b >= j:
            raise ValueError(f"fine vertex {j} has no recorded bisection "
                             "parents; meshes are not a refinement chain")
        row: dict[int, float] = {}
        for k, w in rows[a].items():
            row[k] = row.get(k, 0.0) + 0.5 * w
        for k, w in rows[b].items():
            row[k] = row.get(k, 0.0) + 0.5 * w
        rows.append(row)
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for row in rows:
        for k in sorted(row):
            indices.append(k)
            data.append(row[k])
        indptr.append(len(indices))
    return sp.csr_matrix((data, indices, indptr), shape=(nf, nc))


def assemble_nested(coarse: Mesh, fine: Mesh) -> SparseSystem:
    """Assemble the fine system together with the nested-space operators."""
    fine_sys = assemble(fine)
    coarse_sys = assemble(coarse)
    p = prolongation(coarse, fine)
    fine_sys.coarse = coarse_sys
    fine_sys.prolong = p
    fine_sys.cross_mass = (p.T @ fine_sys.mass).tocsr()
    return fine_sys


def project_l2(system: SparseSystem, fine_coefficients: np.ndarray) -> np.ndarray:
    """L2-project a fine-space function onto the coarse space.

    Solves M_coarse c = B u and verifies the discrete orthogonality
    residual to 1e-10 relative.
    """
    if system.coarse is None or system.cross_mass is None:
        raise ValueError("project_l2 requires a system assembled with "
                         "assemble_nested")
    u = np.asarray(fine_coefficients, dtype=np.float64)
    rhs = system.cross_mass @ u
    c = system.coarse.mass_solve(rhs)
    resid = rhs - system.coarse.mass @ c
    scale = max(float(np.linalg.norm(rhs)), 1e-300)
    rel = float(np.linalg.norm(resid)) / scale
    if rel > 1e-10:
        raise NumericFailure(f"projection solve residual {rel:.3e} exceeds 1e-10; "
                             f"coarse mass condition may be degenerate")
    return c


# -- measured H1 stability --------------------------------------------------------


def measure_h1_stability(coarse: Mesh, fine: Mesh, tol: float = 1e-7,
                         max_iter: int = 5000, seed: int = 0,
                         shift: float = 0.0) -> float:
    """Largest gradient amplification of the projection over the fine space.

    Computes sup over nonconstant fine u of |grad Pi u| / |grad u| as the
    square root of the top generalized eigenvalue of the projected
    stiffness pencil, by power iteration with the constant mode deflated
    via mass-orthogonal projection.  The Rayleigh quotients increase
    monotonically, so the returned value is a certified lower bound for
    the true operator norm at any stopping tolerance; it is expected to
    stay bounded along any refinement sequence.
    """
    system = assemble_nested(coarse, fine)
    k_fine = system.stiffness
    k_coarse = system.coarse.stiffness
    b_cross = system.cross_mass
    m_fine = system.mass
    nf = fine.n_vertices

    ones = np.ones(nf)
    m_ones = m_fine @ ones
    vol = float(ones @ m_ones)

    def deflate(x: np.ndarray) -> np.ndarray:
        return x - (float(m_ones @ x) / vol) * ones

    # pinned factorization of the singular stiffness matrix
    k_red = k_fine[1:, :][:, 1:].tocsc()
    k_solve = spla.factorized(k_red)

    def stiffness_solve(r: np.ndarray) -> np.ndarray:
        r = r - r.mean()  # project onto range(K)
        y = np.zeros(nf)
        y[1:] = k_solve(r[1:])
        return deflate(y)

    def apply_a(x: np.ndarray) -> np.ndarray:
        v = system.coarse.mass_solve(b_cross @ x)
        w = system.coarse.mass_solve(k_coarse @ v)
        return b_cross.T @ w

    rng = np.random.default_rng(seed)
    x = deflate(rng.standard_normal(nf))
    xkx = float(x @ (k_fine @ x))
    if xkx <= 0.0:
        raise NumericFailure("deflated start vector has no gradient energy")
    x /= math.sqrt(xkx)

    lam_prev = None
    for _ in range(max_iter):
        ax = apply_a(x)
        lam = float(x @ ax)
        if lam_prev is not None and abs(lam - lam_prev) <= tol * max(1.0, lam):
            return math.sqrt(max(lam, 0.0))
        lam_prev = lam
        y = stiffness_solve(ax + shift * (k_fine @ x))
        yky = float(y @ (k_fine @ y))
        if yky <= 0.0:
            # A x fell into the deflated kernel; restart from fresh noise
            y = deflate(rng.standard_normal(nf))
            yky = float(y @ (k_fine @ y))
        x = y / math.sqrt(yky)
    raise NumericFailure(f"power iteration did not converge in {max_iter} "
                         f"iterations; last value {math.sqrt(max(lam_prev, 0.0))}")


def matrix_to_triplet_text(matrix) -> str:
    """Coordinate (i j value) text dump of a sparse matrix."""
    coo = sp.coo_matrix(matrix)
    lines = [f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}"]
    order = np.lexsort((coo.col, coo.row))
    for idx in order:
        lines.append(f"{coo.row[idx]} {coo.col[idx]} {float(coo.data[idx])!r}")
    return "\n".join(lines) + "\n"
