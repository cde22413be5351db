"""Triangular meshes, linear finite elements and SPDE/GMRF precision matrices."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

logger = logging.getLogger(__name__)

__all__ = [
    "TriangularMesh",
    "FemMatrices",
    "NonstatField",
    "assemble_fem",
    "grid_mesh",
    "unit_square_mesh",
    "precision_stationary",
    "precision_nonstationary",
    "precision_factor",
    "local_variability",
    "matern_variance",
    "kappa_from_range",
    "read_mesh",
    "write_mesh",
]


@dataclass
class TriangularMesh:
    """Vertices (L x 2, or L x 3 for an embedded surface) and 0-based triangles."""

    vertices: np.ndarray
    triangles: np.ndarray
    interior: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] not in (2, 3):
            raise ValueError("vertices must have shape (L, 2) or (L, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must have shape (M, 3)")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValueError("triangle index out of range")
        areas = self.areas()
        if np.any(areas <= 1e-14 * max(1.0, areas.max(initial=0.0))):
            bad = int(np.argmin(areas))
            raise ValueError(f"degenerate triangle {bad} with area {areas[bad]:.3g}")
        n_comp, _ = csgraph.connected_components(self.adjacency(), directed=False)
        if n_comp != 1:
            raise ValueError(f"mesh is not connected ({n_comp} components)")
        # every edge is shared by at most two triangles
        e = self._edge_list()
        _, counts = np.unique(e, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise ValueError("mesh has an edge shared by more than two triangles")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def _edge_vectors(self):
        p = self.vertices[self.triangles]
        # edge i is opposite local vertex i
        e0 = p[:, 2] - p[:, 1]
        e1 = p[:, 0] - p[:, 2]
        e2 = p[:, 1] - p[:, 0]
        return e0, e1, e2

    def areas(self) -> np.ndarray:
        _, e1, e2 = self._edge_vectors()
        if self.vertices.shape[1] == 2:
            cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
            return 0.5 * np.abs(cross)
        return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)

    def _edge_list(self) -> np.ndarray:
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.sort(e, axis=1)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (E, 2) array."""
        return np.unique(self._edge_list(), axis=0)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 vertex adjacency (no diagonal)."""
        e = self._edge_list()
        n = len(self.vertices)
        a = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        a = (a + a.T).tocsr()
        a.data[:] = 1.0
        return a

    def neighbors(self) -> list:
        adj = self.adjacency()
        return [adj.indices[adj.indptr[i]:adj.indptr[i + 1]] for i in range(adj.shape[0])]

    def boundary_vertices(self) -> np.ndarray:
        e, counts = np.unique(self._edge_list(), axis=0, return_counts=True)
        return np.unique(e[counts == 1])


@dataclass
class FemMatrices:
    """Consistent mass ``C``, lumped mass ``C_lumped`` (diagonal) and stiffness ``G``."""

    C: sparse.csr_matrix
    C_lumped: np.ndarray
    G: sparse.csr_matrix
    grad: sparse.csr_matrix | None = None

    @property
    def n(self) -> int:
        return self.C.shape[0]


def assemble_fem(mesh: TriangularMesh) -> FemMatrices:
    """Piecewise-linear mass and stiffness assembly."""
    tri = mesh.triangles
    area = mesh.areas()
    edges = mesh._edge_vectors()
    n = mesh.n_vertices
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()

    local_mass = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    mass_vals = (area[:, None, None] * local_mass[None]).ravel()

    # grad(psi_i) . grad(psi_j) * area = (e_i . e_j) / (4 area)
    stiff = np.empty((len(tri), 3, 3))
    for i in range(3):
        for j in range(3):
            stiff[:, i, j] = np.einsum("td,td->t", edges[i], edges[j]) / (4.0 * area)
    C = sparse.coo_matrix((mass_vals, (rows, cols)), shape=(n, n)).tocsr()
    G = sparse.coo_matrix((stiff.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    C.sum_duplicates()
    G.sum_duplicates()
    c_lumped = np.asarray(C.sum(axis=1)).ravel()
    if np.any(c_lumped <= 0):
        raise ValueError("vertex not covered by any triangle")
    return FemMatrices(C=C, C_lumped=c_lumped, G=G, grad=_gradient_operator(mesh, area, edges))


def _gradient_operator(mesh, area, edges):
    """Area-weighted gradient map D with D^T D = G (one row per triangle and axis)."""
    tri = mesh.triangles
    n_t = len(tri)
    if mesh.vertices.shape[1] == 2:
        # rotate each opposite edge by 90 degrees
        rot = [np.column_stack([-e[:, 1], e[:, 0]]) for e in edges]
    else:
        normal = np.cross(edges[1], edges[2])
        normal /= np.linalg.norm(normal, axis=1, keepdims=True)
        rot = [np.cross(normal, e) for e in edges]
    dim = rot[0].shape[1]
    scale = 1.0 / (2.0 * np.sqrt(area))
    rows, cols, vals = [], [], []
    for i in range(3):
        for ax in range(dim):
            rows.append(np.arange(n_t) * dim + ax)
            cols.append(tri[:, i])
            vals.append(rot[i][:, ax] * scale)
    D = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n_t * dim, mesh.n_vertices))
    return D.tocsr()


def grid_mesh(mask, spacing: float = 1.0):
    """Triangulate the pixel centres of a boolean mask.

    Each 2x2 pixel block fully inside the mask yields two triangles; blocks
    with exactly three pixels inside yield one.  Pixels that end up in no
    triangle, and components other than the largest, are dropped.

    Returns
    -------
    mesh : TriangularMesh
    pixel_index : ndarray of shape (L, 2)
        (row, col) of each mesh vertex in the image.
    """
    mask = np.asarray(mask, dtype=bool)
    nr, nc = mask.shape
    ids = -np.ones(mask.shape, dtype=np.int64)
    rr, cc = np.nonzero(mask)
    ids[rr, cc] = np.arange(len(rr))
    tris = []
    for r in range(nr - 1):
        for c in range(nc - 1):
            a, b, d, e = ids[r, c], ids[r, c + 1], ids[r + 1, c], ids[r + 1, c + 1]
            inside = [x >= 0 for x in (a, b, d, e)]
            n_in = sum(inside)
            if n_in == 4:
                tris.append((a, b, e))
                tris.append((a, e, d))
            elif n_in == 3:
                tris.append(tuple(x for x in (a, b, e, d) if x >= 0))
    tris = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    pix = np.column_stack([rr, cc])
    # keep covered vertices of the largest component
    covered = np.zeros(len(rr), dtype=bool)
    covered[np.unique(tris)] = True
    adj = sparse.coo_matrix(
        (np.ones(3 * len(tris)),
         (tris[:, [0, 1, 2]].ravel(), tris[:, [1, 2, 0]].ravel())),
        shape=(len(rr), len(rr)),
    )
    _, labels = csgraph.connected_components(adj + adj.T, directed=False)
    counts = np.bincount(labels[covered], minlength=labels.max() + 1)
    keep = covered & (labels == np.argmax(counts))
    remap = -np.ones(len(rr), dtype=np.int64)
    remap[keep] = np.arange(keep.sum())
    tris = remap[tris]
    tris = tris[(tris >= 0).all(axis=1)]
    pix = pix[keep]
    # x to the right, y upwards
    coords = np.column_stack([pix[:, 1], nr - 1 - pix[:, 0]]).astype(float) * spacing
    if (~keep).any():
        logger.info("grid_mesh dropped %d uncovered/disconnected pixels", int((~keep).sum()))
    return TriangularMesh(coords, tris), pix


def unit_square_mesh(n: int) -> TriangularMesh:
    """Regular right-triangle mesh of [0, 1]^2 with ``n x n`` nodes."""
    mesh, pix = grid_mesh(np.ones((n, n), dtype=bool), spacing=1.0 / (n - 1))
    return mesh


def kappa_from_range(rho: float, nu: float = 1.0) -> float:
    return math.sqrt(8.0 * nu) / rho


def matern_variance(kappa: float, nu: float = 1.0, dim: int = 2, tau: float = 1.0) -> float:
    """Marginal variance of the SPDE field with smoothness ``nu`` and scaling ``tau``."""
    return math.gamma(nu) / (
        math.gamma(nu + dim / 2.0) * (4.0 * math.pi) ** (dim / 2.0) * kappa ** (2.0 * nu) * tau ** 2
    )


def _check_spd(Q, what):
    from scipy.sparse.linalg import splu

    if abs(Q - Q.T).max() > 1e-10 * abs(Q).max():
        raise ValueError(f"{what} is not symmetric")
    try:
        lu = splu(Q.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise np.linalg.LinAlgError(f"{what} is singular") from exc
    if np.any(lu.U.diagonal() <= 0):
        raise np.linalg.LinAlgError(f"{what} is not positive definite")


def precision_stationary(fem: FemMatrices, kappa: float, alpha: int = 2,
                         lumped: bool = True, check: bool = False) -> sparse.csr_matrix:
    """SPDE precision ``Q_alpha`` for scale ``kappa``.

    ``K = kappa^2 C + G``; ``Q_1 = K``, ``Q_2 = K C^-1 K`` and
    ``Q_a = K C^-1 Q_{a-2} C^-1 K``.  With ``lumped`` the diagonal mass
    ``C_lumped`` replaces ``C`` throughout, which keeps ``Q`` sparse; the
    consistent-mass version is dense in general and meant for validation.
    """
    if alpha not in (1, 2, 3, 4):
        raise ValueError("alpha must be 1, 2, 3 or 4")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if lumped:
        C = sparse.diags(fem.C_lumped)
        C_inv = sparse.diags(1.0 / fem.C_lumped)
        K = (kappa ** 2 * C + fem.G).tocsr()

        def c_solve(M):
            return C_inv @ M
    else:
        from scipy.sparse.linalg import splu

        K = (kappa ** 2 * fem.C + fem.G).tocsc()
        lu = splu(fem.C.tocsc())

        def c_solve(M):
            dense = M.toarray() if sparse.issparse(M) else M
            return sparse.csr_matrix(lu.solve(dense))

    Q = _recurse(K, c_solve, alpha)
    Q = sparse.csr_matrix(Q)
    Q = ((Q + Q.T) * 0.5).tocsr()
    if check:
        _check_spd(Q, "precision")
    return Q


def _recurse(K, c_solve, alpha):
    if alpha == 1:
        return K
    cik = c_solve(K)
    if alpha == 2:
        return K @ cik
    # K C^-1 Q_{a-2} C^-1 K; C^-1 K is the transpose of K C^-1
    return cik.T @ _recurse(K, c_solve, alpha - 2) @ cik


def precision_factor(fem: FemMatrices, kappa: float, alpha: int = 2) -> sparse.csr_matrix:
    """Sparse ``F`` with ``F^T F = Q_alpha`` for the lumped-mass precision."""
    if fem.grad is None:
        raise ValueError("FEM matrices carry no gradient operator")
    sq = np.sqrt(fem.C_lumped)
    K = (kappa ** 2 * sparse.diags(fem.C_lumped) + fem.G).tocsr()
    ci_k = sparse.diags(1.0 / fem.C_lumped) @ K
    if alpha % 2 == 1:
        F = sparse.vstack([sparse.diags(kappa * sq), fem.grad])
    else:
        F = sparse.diags(1.0 / sq) @ K
    for _ in range((alpha - 1) // 2):
        F = F @ ci_k
    return F.tocsr()


@dataclass
class NonstatField:
    """Parameters of the non-stationary prior: log sigma(s) = log sigma0 + theta1 delta(s)."""

    theta1: float
    theta2: float
    delta: np.ndarray
    sigma0: float = 1.0
    rho0: float = 1.0
    nu: float = 1.0
    dim: int = 2

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=float)
        if not np.all(np.isfinite(self.delta)):
            raise ValueError("delta must be finite")

    @property
    def log_kappa0(self) -> float:
        return 0.5 * math.log(8.0 * self.nu) - math.log(self.rho0)

    @property
    def log_tau0(self) -> float:
        c = math.gamma(self.nu) / (math.gamma(self.nu + self.dim / 2.0)
                                   * (4.0 * math.pi) ** (self.dim / 2.0))
        return 0.5 * math.log(c) - math.log(self.sigma0) - self.nu * self.log_kappa0

    @property
    def kappa(self) -> float:
        return math.exp(self.log_kappa0 - self.theta2)

    def log_tau(self) -> np.ndarray:
        return self.log_tau0 - self.theta1 * self.delta + self.theta2 * self.nu

    def max_edge_jump(self, mesh: TriangularMesh) -> float:
        e = mesh.edges()
        return float(np.abs(self.delta[e[:, 0]] - self.delta[e[:, 1]]).max(initial=0.0))


def precision_nonstationary(fem: FemMatrices, field: NonstatField, alpha: int = 2,
                            lumped: bool = True) -> sparse.csr_matrix:
    """``T Q_alpha(kappa) T`` with ``T = diag(tau_v)``."""
    log_tau = field.log_tau()
    if log_tau.shape != (fem.n,):
        raise ValueError("delta must have one value per mesh vertex")
    if np.max(np.abs(log_tau)) > 300:
        raise OverflowError("log tau outside representable range; theta/delta too extreme")
    T = sparse.diags(np.exp(log_tau))
    Q = precision_stationary(fem, field.kappa, alpha=alpha, lumped=lumped)
    return (T @ Q @ T).tocsr()


def local_variability(beta_hat, mesh: TriangularMesh, standardize: bool = True,
                      center: bool = True) -> np.ndarray:
    """Sample standard deviation of ``beta_hat`` over each vertex and its mesh neighbours.

    With ``standardize`` the scores are scaled to unit standard deviation
    across vertices, and also centred unless ``center=False``.  Uncentred
    scores stay positive, so a single coefficient on them can shrink or
    inflate the spatial variance everywhere.  A constant score field is
    returned as zeros with a warning.
    """
    b = np.asarray(beta_hat, dtype=float)
    if b.shape != (mesh.n_vertices,):
        raise ValueError("beta_hat must have one value per mesh vertex")
    adj = mesh.adjacency()
    deg = np.diff(adj.indptr)
    if np.any(deg == 0):
        raise ValueError(f"isolated vertex {int(np.argmin(deg))} has no neighbours")
    incl = adj + sparse.identity(mesh.n_vertices, format="csr")
    cnt = deg + 1.0
    s1 = incl @ b
    s2 = incl @ (b * b)
    var = (s2 - s1 * s1 / cnt) / (cnt - 1.0)
    delta = np.sqrt(np.clip(var, 0.0, None))
    if not standardize:
        return delta
    sd = delta.std(ddof=1)
    if not sd > 1e-12 * max(1.0, abs(delta.mean())):
        logger.warning("local variability is constant; standardised score set to zero")
        return np.zeros_like(delta)
    return ((delta - delta.mean()) if center else delta) / sd


def read_mesh(path) -> TriangularMesh:
    """Read ``L n_triangles`` header, L vertex lines and the triangle lines."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines()
             if ln.strip() and not ln.lstrip().startswith("#")]
    n_v, n_t = int(lines[0][0]), int(lines[0][1])
    if len(lines) != 1 + n_v + n_t:
        raise ValueError(f"{path}: expected {1 + n_v + n_t} lines, found {len(lines)}")
    verts = np.array([[float(x) for x in ln] for ln in lines[1:1 + n_v]])
    tris = np.array([[int(x) for x in ln] for ln in lines[1 + n_v:]], dtype=np.int64)
    return TriangularMesh(verts, tris.reshape(-1, 3))


def write_mesh(mesh: TriangularMesh, path) -> None:
    out = [f"{mesh.n_vertices} {len(mesh.triangles)}"]
    out += [" ".join(repr(float(x)) for x in v) for v in mesh.vertices]
    out += [" ".join(str(int(i)) for i in t) for t in mesh.triangles]
    Path(path).write_text("\n".join(out) + "\n")
