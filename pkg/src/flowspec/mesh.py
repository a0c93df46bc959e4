"""Cell complexes over phase-space manifolds and their Hodge weights.

Three mesh families are supported:

* uniform periodic circle grids (dimension 1),
* uniform periodic rectangular torus grids (dimension 2),
* closed orientable triangulated surfaces with circumcentric duals.

Conventions used throughout the package:

* A degree-k cochain stores one number per k-cell, interpreted as the
  *integral* of the corresponding k-form over that (oriented) cell.  Vertex
  cochains are therefore point values, edge cochains are line integrals, and
  face cochains are fluxes.
* Edges are oriented from the lower to the higher vertex index (on structured
  grids: in the +x / +y direction); faces are oriented counterclockwise.
  This makes all incidence matrices deterministic integer matrices.
* The boundary matrix ``incidence[k]`` maps k-cell indices to signed
  (k-1)-cell coefficients, so ``incidence[k] @ incidence[k+1] = 0`` exactly.
* The noise intensity ``epsilon`` scales a fixed unit base metric, so the
  inverse metric is ``epsilon * identity``.  Diagonal Hodge stars then carry
  a factor ``epsilon**(k - D/2)`` on degree-k cochains, which routes the
  expected ``epsilon`` prefactor into every codifferential (and nothing
  else): the exterior derivative stays metric-free.

Torus cell layout (nx-by-ny grid, row-major with x as the major axis):
vertex (i, j) has index ``i*ny + j``; x-edges (from (i,j) to (i+1,j)) occupy
indices ``0 .. nx*ny-1`` in the same order; y-edges follow in a second block;
face (i, j) spans ``[x_i, x_{i+1}] x [y_j, y_{j+1}]`` and has index
``i*ny + j``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import (
    DegreeError,
    GeometryWarning,
    InvalidNoiseError,
    InvalidResolutionError,
    TopologyError,
)

__all__ = [
    "NoiseSpec",
    "MeshComplex",
    "HodgeStar",
    "build_circle_grid",
    "build_torus_grid",
    "build_triangulated_surface",
    "icosahedron",
    "icosphere",
    "load_off",
    "hodge_star",
]


@dataclass(frozen=True)
class NoiseSpec:
    """Noise intensity multiplying the unit base metric.

    ``epsilon == 0`` is accepted but only meaningful for deterministic-limit
    diagnostics; metric-dependent operators either refuse it or flag it.
    """

    epsilon: float

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise InvalidNoiseError(
                f"noise intensity must be a finite nonnegative real, got {self.epsilon!r}"
            )

    @property
    def is_deterministic(self) -> bool:
        return self.epsilon == 0.0


@dataclass(frozen=True)
class MeshComplex:
    """Immutable cell complex with incidence and primal/dual volume data.

    Attributes
    ----------
    kind : {"circle", "torus", "surface"}
    dimension : int
        Top cell degree (1 or 2).
    vertices : ndarray
        Coordinates: shape (n0,) of angles for the circle, (n0, 2) for the
        torus, (n0, 3) embedded points for surfaces.
    edges : ndarray of shape (n1, 2)
        Tail/head vertex indices per oriented edge.
    faces : ndarray or None
        Vertex index tuples per oriented face ((n2, 4) quads on the torus,
        (n2, 3) triangles on surfaces).
    incidence : tuple of csr_matrix
        ``incidence[k-1]`` is the boundary matrix of degree k (shape
        n_{k-1} x n_k, integer entries).
    primal_volumes, dual_volumes : tuple of ndarray
        Unit-metric cell measures per degree 0..D.
    lengths, grid_shape, spacings
        Structured-grid metadata (None on surfaces).
    """

    kind: str
    dimension: int
    vertices: np.ndarray
    edges: np.ndarray
    faces: Optional[np.ndarray]
    incidence: Tuple[sp.csr_matrix, ...]
    primal_volumes: Tuple[np.ndarray, ...]
    dual_volumes: Tuple[np.ndarray, ...]
    lengths: Optional[Tuple[float, ...]] = None
    grid_shape: Optional[Tuple[int, ...]] = None
    spacings: Optional[Tuple[float, ...]] = None

    def n_cells(self, k: int) -> int:
        if not 0 <= k <= self.dimension:
            raise DegreeError(
                f"degree {k} out of range for a {self.dimension}-dimensional mesh"
            )
        return len(self.primal_volumes[k])

    @property
    def cell_counts(self) -> Tuple[int, ...]:
        return tuple(self.n_cells(k) for k in range(self.dimension + 1))

    def boundary_matrix(self, k: int) -> sp.csr_matrix:
        """Boundary operator of degree k (k-cells to (k-1)-cells), 1 <= k <= D."""
        if not 1 <= k <= self.dimension:
            raise DegreeError(f"no boundary matrix at degree {k}")
        return self.incidence[k - 1]

    def euler_characteristic(self) -> int:
        return int(sum((-1) ** k * self.n_cells(k) for k in range(self.dimension + 1)))

    @property
    def is_structured(self) -> bool:
        return self.kind in ("circle", "torus")

    def total_volume(self) -> float:
        return float(np.sum(self.primal_volumes[self.dimension]))


@dataclass(frozen=True)
class HodgeStar:
    """Diagonal star at one degree: ``values[c]`` multiplies cell c."""

    degree: int
    values: np.ndarray
    deterministic_limit: bool = False

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.values)


# ======================================================================
# structured grid builders
# ======================================================================

def build_circle_grid(n: int, length: float) -> MeshComplex:
    """Uniform periodic grid on a circle of the given circumference.

    Parameters
    ----------
    n : int
        Number of vertices (= number of edges); at least 3.
    length : float
        Circumference; spacing is ``length / n``.
    """
    if n < 3:
        raise InvalidResolutionError(f"circle grid needs n >= 3 vertices, got {n}")
    if length <= 0:
        raise ValueError(f"circumference must be positive, got {length}")
    h = length / n
    idx = np.arange(n)
    vertices = idx * h
    edges = np.column_stack([idx, (idx + 1) % n])

    # boundary of edge i: head minus tail
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([idx, idx])
    vals = np.concatenate([-np.ones(n, dtype=np.int64), np.ones(n, dtype=np.int64)])
    d1 = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    mesh = MeshComplex(
        kind="circle",
        dimension=1,
        vertices=vertices,
        edges=edges,
        faces=None,
        incidence=(d1,),
        primal_volumes=(np.ones(n), np.full(n, h)),
        dual_volumes=(np.full(n, h), np.ones(n)),
        lengths=(length,),
        grid_shape=(n,),
        spacings=(h,),
    )
    _check_chain_complex(mesh)
    return mesh


def torus_vertex_index(i: np.ndarray, j: np.ndarray, nx: int, ny: int) -> np.ndarray:
    return (np.asarray(i) % nx) * ny + (np.asarray(j) % ny)


def build_torus_grid(nx: int, ny: int, lx: float, ly: float) -> MeshComplex:
    """Uniform periodic grid on a flat rectangular torus.

    Cell layout is documented in the module docstring: vertices and faces are
    indexed ``i*ny + j``; edges store the x-directed block first.
    """
    if nx < 3 or ny < 3:
        raise InvalidResolutionError(
            f"torus grid needs nx, ny >= 3, got ({nx}, {ny})"
        )
    if lx <= 0 or ly <= 0:
        raise ValueError(f"torus lengths must be positive, got ({lx}, {ly})")
    hx, hy = lx / nx, ly / ny
    n0 = nx * ny
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    v = torus_vertex_index(ii, jj, nx, ny)

    vertices = np.column_stack([ii * hx, jj * hy])
    x_edges = np.column_stack([v, torus_vertex_index(ii + 1, jj, nx, ny)])
    y_edges = np.column_stack([v, torus_vertex_index(ii, jj + 1, nx, ny)])
    edges = np.vstack([x_edges, y_edges])
    n1 = 2 * n0

    e_idx = np.arange(n1)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([e_idx, e_idx])
    vals = np.concatenate([-np.ones(n1, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    d1 = sp.csr_matrix((vals, (rows, cols)), shape=(n0, n1))

    # face (i, j): counterclockwise boundary
    #   +x-edge(i, j)  +y-edge(i+1, j)  -x-edge(i, j+1)  -y-edge(i, j)
    f = v
    ex = lambda a, b: torus_vertex_index(a, b, nx, ny)          # x-edge index
    ey = lambda a, b: n0 + torus_vertex_index(a, b, nx, ny)     # y-edge index
    rows2 = np.concatenate([ex(ii, jj), ey(ii + 1, jj), ex(ii, jj + 1), ey(ii, jj)])
    cols2 = np.concatenate([f, f, f, f])
    vals2 = np.concatenate(
        [np.ones(n0), np.ones(n0), -np.ones(n0), -np.ones(n0)]
    ).astype(np.int64)
    d2 = sp.csr_matrix((vals2, (rows2, cols2)), shape=(n1, n0))

    faces = np.column_stack(
        [
            v,
            torus_vertex_index(ii + 1, jj, nx, ny),
            torus_vertex_index(ii + 1, jj + 1, nx, ny),
            torus_vertex_index(ii, jj + 1, nx, ny),
        ]
    )

    mesh = MeshComplex(
        kind="torus",
        dimension=2,
        vertices=vertices,
        edges=edges,
        faces=faces,
        incidence=(d1, d2),
        primal_volumes=(
            np.ones(n0),
            np.concatenate([np.full(n0, hx), np.full(n0, hy)]),
            np.full(n0, hx * hy),
        ),
        dual_volumes=(
            np.full(n0, hx * hy),
            np.concatenate([np.full(n0, hy), np.full(n0, hx)]),
            np.ones(n0),
        ),
        lengths=(lx, ly),
        grid_shape=(nx, ny),
        spacings=(hx, hy),
    )
    _check_chain_complex(mesh)
    return mesh


# ======================================================================
# triangulated surfaces
# ======================================================================

def build_triangulated_surface(vertices: Sequence, faces: Sequence) -> MeshComplex:
    """Cell complex of a closed, orientable, consistently oriented triangulation.

    Parameters
    ----------
    vertices : (n0, 3) array_like
        Embedded vertex positions.
    faces : (n2, 3) array_like of int
        Vertex index triples; all faces must share one orientation (each
        interior edge traversed once in each direction).

    Raises
    ------
    TopologyError
        If some edge is not shared by exactly two faces (non-closed) or the
        two traversals agree (non-orientable / inconsistent orientation).

    Warns
    -----
    GeometryWarning
        When the circumcentric dual produces non-positive volumes (mesh not
        well-centered).  Computation proceeds; only kernel dimensions are
        consumed downstream and those are robust.
    """
    pts = np.asarray(vertices, dtype=float)
    tri = np.asarray(faces, dtype=np.int64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise TopologyError(f"vertices must be (n, 3) points, got shape {pts.shape}")
    if tri.ndim != 2 or tri.shape[1] != 3:
        raise TopologyError(f"faces must be (m, 3) index triples, got shape {tri.shape}")
    n0, n2 = len(pts), len(tri)
    if tri.min(initial=0) < 0 or tri.max(initial=-1) >= n0:
        raise TopologyError("face indices out of range")
    if any(len(set(f)) != 3 for f in tri):
        raise TopologyError("degenerate face with repeated vertices")

    # collect oriented half-edges and pair them up
    half = {}  # (a, b) -> face id
    for fi, (a, b, c) in enumerate(tri):
        for u, w in ((a, b), (b, c), (c, a)):
            if (u, w) in half:
                raise TopologyError(
                    f"edge ({u}, {w}) traversed twice in the same direction: "
                    "triangulation is not consistently oriented"
                )
            half[(u, w)] = fi
    edge_set = sorted({(min(u, w), max(u, w)) for (u, w) in half})
    for u, w in edge_set:
        if (u, w) not in half or (w, u) not in half:
            raise TopologyError(
                f"edge ({u}, {w}) is not shared by two faces: surface is not closed"
            )
    edges = np.array(edge_set, dtype=np.int64)
    n1 = len(edges)
    edge_id = {tuple(e): i for i, e in enumerate(edge_set)}

    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([np.arange(n1), np.arange(n1)])
    vals = np.concatenate([-np.ones(n1, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    d1 = sp.csr_matrix((vals, (rows, cols)), shape=(n0, n1))

    r2, c2, v2 = [], [], []
    for fi, (a, b, c) in enumerate(tri):
        for u, w in ((a, b), (b, c), (c, a)):
            lo, hi = (u, w) if u < w else (w, u)
            r2.append(edge_id[(lo, hi)])
            c2.append(fi)
            v2.append(1 if (u, w) == (lo, hi) else -1)
    d2 = sp.csr_matrix((v2, (r2, c2)), shape=(n1, n2), dtype=np.int64)

    edge_len = np.linalg.norm(pts[edges[:, 1]] - pts[edges[:, 0]], axis=1)
    face_area = _triangle_areas(pts, tri)
    dual_len, dual_area = _circumcentric_duals(pts, tri, edges, edge_id)

    bad = int(np.sum(dual_len <= 0)) + int(np.sum(dual_area <= 0))
    if bad:
        warnings.warn(
            f"{bad} non-positive circumcentric dual volumes: "
            "triangulation is not well-centered",
            GeometryWarning,
            stacklevel=2,
        )

    mesh = MeshComplex(
        kind="surface",
        dimension=2,
        vertices=pts,
        edges=edges,
        faces=tri,
        incidence=(d1, d2),
        primal_volumes=(np.ones(n0), edge_len, face_area),
        dual_volumes=(dual_area, dual_len, np.ones(n2)),
    )
    _check_chain_complex(mesh)
    return mesh


def _triangle_areas(pts: np.ndarray, tri: np.ndarray) -> np.ndarray:
    p, q, r = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(q - p, r - p), axis=1)


def _circumcenters(pts: np.ndarray, tri: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Circumcenters and their barycentric weights for each triangle."""
    p, q, r = pts[tri[:, 0]], pts[tri[:, 1]], pts[tri[:, 2]]
    a2 = np.sum((q - r) ** 2, axis=1)   # opposite p
    b2 = np.sum((p - r) ** 2, axis=1)   # opposite q
    c2 = np.sum((p - q) ** 2, axis=1)   # opposite r
    wp = a2 * (b2 + c2 - a2)
    wq = b2 * (c2 + a2 - b2)
    wr = c2 * (a2 + b2 - c2)
    w = np.stack([wp, wq, wr], axis=1)
    centers = (w[:, :, None] * np.stack([p, q, r], axis=1)).sum(axis=1) / w.sum(
        axis=1, keepdims=True
    )
    return centers, w


def _circumcentric_duals(pts, tri, edges, edge_id):
    """Signed dual edge lengths and dual vertex areas (circumcentric)."""
    centers, bary = _circumcenters(pts, tri)
    n1, n0 = len(edges), len(pts)
    dual_len = np.zeros(n1)
    dual_area = np.zeros(n0)
    for fi, (a, b, c) in enumerate(tri):
        cf = centers[fi]
        # per edge of the face: signed distance of the circumcenter to the
        # edge, positive when it lies on the same side as the opposite vertex
        # (sign of the opposite barycentric weight)
        for (u, w), opp_w in (((a, b), bary[fi, 2]), ((b, c), bary[fi, 0]),
                              ((c, a), bary[fi, 1])):
            lo, hi = (u, w) if u < w else (w, u)
            ei = edge_id[(lo, hi)]
            mid = 0.5 * (pts[u] + pts[w])
            dist = np.linalg.norm(cf - mid)
            sgn = 1.0 if opp_w > 0 else -1.0
            piece = sgn * dist
            dual_len[ei] += piece
            # two corner quadrilateral pieces: half edge length times the
            # signed circumcenter distance, split between both endpoints
            contrib = 0.5 * (0.5 * np.linalg.norm(pts[w] - pts[u])) * piece
            dual_area[u] += contrib
            dual_area[w] += contrib
    return dual_len, dual_area


# ---- canonical surface generators ----

def icosahedron() -> Tuple[np.ndarray, np.ndarray]:
    """Unit icosahedron: 12 vertices, 20 consistently oriented faces."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
            (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
            (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )
    return verts, faces


def icosphere(level: int) -> MeshComplex:
    """Icosahedron subdivided ``level`` times and projected to the unit sphere."""
    if level < 0:
        raise ValueError("subdivision level must be nonnegative")
    verts, faces = icosahedron()
    verts = list(map(np.asarray, verts))
    for _ in range(level):
        midpoint: Dict[Tuple[int, int], int] = {}

        def mid(u: int, w: int) -> int:
            key = (u, w) if u < w else (w, u)
            if key not in midpoint:
                m = verts[u] + verts[w]
                m /= np.linalg.norm(m)
                midpoint[key] = len(verts)
                verts.append(m)
            return midpoint[key]

        new_faces: List[Tuple[int, int, int]] = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = np.array(new_faces, dtype=np.int64)
    return build_triangulated_surface(np.array(verts), faces)


def load_off(path) -> MeshComplex:
    """Read an OFF-format triangulation and build its cell complex."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens: List[str] = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or tokens[0].upper() != "OFF":
        raise TopologyError(f"{path}: missing OFF header")
    nv, nf = int(tokens[1]), int(tokens[2])  # edge count in the header is ignored
    pos = 4
    verts = np.array(tokens[pos : pos + 3 * nv], dtype=float).reshape(nv, 3)
    pos += 3 * nv
    faces = []
    for _ in range(nf):
        k = int(tokens[pos])
        if k != 3:
            raise TopologyError(f"{path}: only triangular faces supported, got {k}-gon")
        faces.append(tuple(int(t) for t in tokens[pos + 1 : pos + 4]))
        pos += 1 + k
    return build_triangulated_surface(verts, np.array(faces, dtype=np.int64))


# ======================================================================
# Hodge star
# ======================================================================

def hodge_star(mesh: MeshComplex, k: int, noise: NoiseSpec) -> HodgeStar:
    """Diagonal Hodge star on degree-k cochains under the scaled metric.

    The entries are dual/primal volume ratios times ``epsilon**(k - D/2)``;
    they are strictly positive for ``epsilon > 0``.  With ``epsilon == 0``
    the unit-metric star is returned and flagged ``deterministic_limit`` —
    callers needing the metric scale must treat that flag as "the diffusive
    sector is switched off", not as a usable metric.

    Parameters
    ----------
    mesh : MeshComplex
    k : int
        Cochain degree, 0 <= k <= mesh.dimension.
    noise : NoiseSpec
    """
    if not 0 <= k <= mesh.dimension:
        raise DegreeError(
            f"degree {k} out of range 0..{mesh.dimension} for hodge star"
        )
    ratio = mesh.dual_volumes[k] / mesh.primal_volumes[k]
    if noise.is_deterministic:
        return HodgeStar(degree=k, values=ratio.copy(), deterministic_limit=True)
    scale = noise.epsilon ** (k - mesh.dimension / 2.0)
    return HodgeStar(degree=k, values=scale * ratio, deterministic_limit=False)


def _check_chain_complex(mesh: MeshComplex) -> None:
    """Build-time sanity checks: integer chain identity and volume accounting."""
    for k in range(1, mesh.dimension):
        prod = mesh.incidence[k - 1] @ mesh.incidence[k]
        if prod.nnz and np.any(prod.data != 0):
            raise TopologyError(
                f"boundary-of-boundary is nonzero between degrees {k + 1} and {k - 1}"
            )
    for k in range(mesh.dimension + 1):
        if np.any(mesh.primal_volumes[k] <= 0):
            raise TopologyError(f"non-positive primal volume at degree {k}")
