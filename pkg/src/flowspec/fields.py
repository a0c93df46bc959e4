"""Flow fields sampled on mesh vertices and edges.

A flow is the velocity field of the underlying dynamics.  It is stored twice:

* ``vertex_values`` — components per coordinate direction at vertices
  (shape (n0,) on the circle, (n0, 2) on the torus, (n0, 3) tangent vectors
  on surfaces).  This is the user-facing sampling and the one consumed by
  critical-point analysis and trajectory simulation.
* ``edge_vectors`` — the full flow vector at each edge midpoint (structured
  grids only, shape (n1, dim)).  Operators contract against edge samples;
  for generic flows these are endpoint averages of the vertex samples.

Gradient (Langevin) flows get a sharper edge rule: the tangential edge sample
is ``(epsilon/h) * tanh(W_head - W_tail)``.  It agrees with
``epsilon * (W_head - W_tail)/h`` to second order in h, and it is the unique
local rule for which the assembled degree-0 generator satisfies discrete
detailed balance *exactly* (the similarity transform by diag(e^W) is exactly
symmetric at any resolution).  Vertex samples of a Langevin flow are the
average of the two incident tangential edge samples per direction, so the
"flow equals metric-scaled discrete gradient of W" consistency holds by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .exceptions import NotPotentialError, UnsupportedMeshError
from .mesh import MeshComplex, NoiseSpec

__all__ = [
    "FlowField",
    "zero_flow",
    "flow_from_vertex_samples",
    "langevin_flow",
    "with_tilt",
]


@dataclass(frozen=True)
class FlowField:
    """Flow samples bound to one mesh (identified by kind and cell counts)."""

    kind: str
    vertex_values: np.ndarray
    edge_vectors: Optional[np.ndarray]
    langevin: bool = False
    w: Optional[np.ndarray] = None
    epsilon: Optional[float] = None

    @property
    def is_zero(self) -> bool:
        if np.any(self.vertex_values != 0):
            return False
        return self.edge_vectors is None or not np.any(self.edge_vectors != 0)

    def tangential_edge_values(self, mesh: MeshComplex) -> np.ndarray:
        """Flow component along each edge's orientation, at the midpoint."""
        ev = self._validated_edges(mesh)
        if mesh.kind == "circle":
            return ev[:, 0]
        n0 = mesh.n_cells(0)
        return np.concatenate([ev[:n0, 0], ev[n0:, 1]])

    def transverse_edge_values(self, mesh: MeshComplex) -> np.ndarray:
        """Flow component across each edge (torus: A_y at x-edges, A_x at y-edges)."""
        if mesh.kind != "torus":
            raise UnsupportedMeshError(
                "transverse edge samples are defined on torus grids only"
            )
        ev = self._validated_edges(mesh)
        n0 = mesh.n_cells(0)
        return np.concatenate([ev[:n0, 1], ev[n0:, 0]])

    def _validated_edges(self, mesh: MeshComplex) -> np.ndarray:
        if self.edge_vectors is None:
            raise UnsupportedMeshError(
                f"flow field on a {self.kind} mesh carries no edge samples"
            )
        if self.kind != mesh.kind or len(self.edge_vectors) != mesh.n_cells(1):
            raise ValueError("flow field does not match this mesh")
        return self.edge_vectors

    def max_speed(self) -> float:
        v = np.atleast_2d(self.vertex_values if self.vertex_values.ndim > 1
                          else self.vertex_values[:, None])
        return float(np.max(np.linalg.norm(v, axis=1), initial=0.0))

    def require_langevin(self) -> np.ndarray:
        if not self.langevin or self.w is None:
            raise NotPotentialError(
                "flow is not declared as the gradient of a superpotential"
            )
        return self.w

    def langevin_consistency_residual(self, mesh: MeshComplex) -> float:
        """Max relative deviation of the stored samples from the gradient rule."""
        w = self.require_langevin()
        rebuilt = langevin_flow(mesh, w, NoiseSpec(self.epsilon))
        scale = max(np.max(np.abs(rebuilt.vertex_values)), 1e-300)
        dv = np.max(np.abs(self.vertex_values - rebuilt.vertex_values))
        de = np.max(np.abs(self.edge_vectors - rebuilt.edge_vectors))
        return float(max(dv, de) / scale)


def zero_flow(mesh: MeshComplex) -> FlowField:
    n0, n1 = mesh.n_cells(0), mesh.n_cells(1)
    if mesh.kind == "circle":
        return FlowField("circle", np.zeros(n0), np.zeros((n1, 1)))
    if mesh.kind == "torus":
        return FlowField("torus", np.zeros((n0, 2)), np.zeros((n1, 2)))
    return FlowField("surface", np.zeros((n0, 3)), None)


def flow_from_vertex_samples(mesh: MeshComplex, samples) -> FlowField:
    """Generic flow from vertex samples; edge samples by endpoint averaging."""
    a = np.asarray(samples, dtype=float)
    n0 = mesh.n_cells(0)
    if mesh.kind == "circle":
        if a.shape != (n0,):
            raise ValueError(f"circle flow samples must have shape ({n0},)")
        ev = 0.5 * (a[mesh.edges[:, 0]] + a[mesh.edges[:, 1]])[:, None]
        return FlowField("circle", a, ev)
    if mesh.kind == "torus":
        if a.shape != (n0, 2):
            raise ValueError(f"torus flow samples must have shape ({n0}, 2)")
        ev = 0.5 * (a[mesh.edges[:, 0]] + a[mesh.edges[:, 1]])
        return FlowField("torus", a, ev)
    if a.shape != (n0, 3):
        raise ValueError(f"surface flow samples must have shape ({n0}, 3)")
    return FlowField("surface", a, None)


def langevin_flow(mesh: MeshComplex, w, noise: NoiseSpec) -> FlowField:
    """Gradient flow A = epsilon * (discrete gradient of W), tanh edge rule."""
    w = np.asarray(w, dtype=float)
    n0 = mesh.n_cells(0)
    if w.shape != (n0,):
        raise ValueError(f"superpotential must be sampled per vertex, shape ({n0},)")
    if not mesh.is_structured:
        raise UnsupportedMeshError("gradient flows are built on structured grids only")
    eps = noise.epsilon

    if mesh.kind == "circle":
        h = mesh.spacings[0]
        dw = w[mesh.edges[:, 1]] - w[mesh.edges[:, 0]]
        tang = (eps / h) * np.tanh(dw)
        vertex = 0.5 * (tang + np.roll(tang, 1))   # edges i-1 and i meet vertex i
        return FlowField("circle", vertex, tang[:, None],
                         langevin=True, w=w.copy(), epsilon=eps)

    nx, ny = mesh.grid_shape
    hx, hy = mesh.spacings
    wg = w.reshape(nx, ny)
    tx = (eps / hx) * np.tanh(np.roll(wg, -1, axis=0) - wg)   # x-edge (i,j)
    ty = (eps / hy) * np.tanh(np.roll(wg, -1, axis=1) - wg)   # y-edge (i,j)
    ax = 0.5 * (tx + np.roll(tx, 1, axis=0))                  # A_x at vertex (i,j)
    ay = 0.5 * (ty + np.roll(ty, 1, axis=1))
    vertex = np.column_stack([ax.ravel(), ay.ravel()])
    # full vector at edge midpoints: own tanh sample along the edge,
    # endpoint-averaged vertex sample across it
    ay_on_xedge = 0.5 * (ay + np.roll(ay, -1, axis=0))
    ax_on_yedge = 0.5 * (ax + np.roll(ax, -1, axis=1))
    ev = np.vstack([
        np.column_stack([tx.ravel(), ay_on_xedge.ravel()]),
        np.column_stack([ax_on_yedge.ravel(), ty.ravel()]),
    ])
    return FlowField("torus", vertex, ev, langevin=True, w=w.copy(), epsilon=eps)


def with_tilt(flow: FlowField, tilt) -> FlowField:
    """Add a constant drive to every sample; the result is no longer a gradient."""
    tilt = np.atleast_1d(np.asarray(tilt, dtype=float))
    if flow.kind == "circle":
        if tilt.shape != (1,):
            raise ValueError("circle tilt is a single number")
        return replace(
            flow,
            vertex_values=flow.vertex_values + tilt[0],
            edge_vectors=flow.edge_vectors + tilt[0],
            langevin=False, w=None, epsilon=None,
        )
    if flow.kind == "torus":
        if tilt.shape != (2,):
            raise ValueError("torus tilt is a 2-vector")
        return replace(
            flow,
            vertex_values=flow.vertex_values + tilt[None, :],
            edge_vectors=flow.edge_vectors + tilt[None, :],
            langevin=False, w=None, epsilon=None,
        )
    raise UnsupportedMeshError("tilt is defined on structured grids only")
