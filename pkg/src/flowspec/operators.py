"""Operator blocks between cochain spaces: d, codifferential, contraction, Lie.

Two backends exist on uniform periodic grids:

* ``fd`` — local stencils.  Hodge stars are the diagonal dual/primal volume
  ratios; the contraction averages incident-edge samples.  Second-order
  accurate.
* ``fourier`` — circulant operators with exact bandlimited symbols.  The
  mass matrices are the exact "integrate the interpolated mode" forms, so the
  assembled generator reproduces continuum eigenvalues to rounding on every
  resolved mode.  Odd symbols (the edge-to-point resampler used by the
  contraction) have no real value at the Nyquist mode of an even grid and are
  set to zero there — the fd stencil's symbol vanishes at Nyquist as well, so
  the two backends agree on that convention.

The exterior derivative is the signed incidence transpose in *both* backends:
integration of forms over cells makes Stokes' theorem an identity, so d is
exact and metric-free.  Only star-dependent operators differ by backend.

Adjointness of the codifferential holds in each backend's own inner product:
``<d a, b>_k = <a, d† b>_{k-1}`` with the mass matrices from
``inner_product_matrix``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    DegreeError,
    DeterministicLimitError,
    UnsupportedMeshError,
)
from .fields import FlowField
from .mesh import MeshComplex, NoiseSpec, hodge_star

__all__ = [
    "OperatorBlock",
    "normalize_backend",
    "exterior_derivative",
    "inner_product_matrix",
    "codifferential",
    "interior_product",
    "lie_derivative",
]

_BACKEND_ALIASES = {
    "fd": "fd",
    "finite-difference": "fd",
    "fourier": "fourier",
}


def normalize_backend(backend: str) -> str:
    try:
        return _BACKEND_ALIASES[backend]
    except KeyError:
        raise ValueError(
            f"unknown backend {backend!r}; expected 'fd' or 'fourier'"
        ) from None


@dataclass(frozen=True)
class OperatorBlock:
    """Linear map from degree ``domain_degree`` cochains to ``codomain_degree``."""

    matrix: np.ndarray
    domain_degree: int
    codomain_degree: int
    backend: str = "fd"

    def apply(self, cochain: np.ndarray) -> np.ndarray:
        return self.matrix @ cochain

    @property
    def shape(self):
        return self.matrix.shape


# ----------------------------------------------------------------------
# exterior derivative (backend-independent)
# ----------------------------------------------------------------------

def exterior_derivative(mesh: MeshComplex, k: int, backend: str = "fd") -> OperatorBlock:
    """d_k: degree k -> k+1, the signed incidence transpose (exact, both backends)."""
    backend = normalize_backend(backend)
    if not 0 <= k < mesh.dimension:
        raise DegreeError(
            f"exterior derivative undefined at degree {k} on a "
            f"{mesh.dimension}-dimensional mesh"
        )
    mat = np.asarray(mesh.boundary_matrix(k + 1).T.todense(), dtype=float)
    return OperatorBlock(mat, k, k + 1, backend)


# ----------------------------------------------------------------------
# Fourier-backend circulant factory
# ----------------------------------------------------------------------

def _circulant(mult: np.ndarray) -> np.ndarray:
    col = np.fft.ifft(mult)
    if np.max(np.abs(col.imag)) > 1e-12 * max(np.max(np.abs(col.real)), 1.0):
        raise ValueError("multiplier array does not define a real circulant")
    return scipy.linalg.circulant(col.real)


def _axis_symbols(n: int, length: float):
    """Integer mode numbers, physical wavenumbers, and grid phases for one axis."""
    kk = np.rint(np.fft.fftfreq(n) * n).astype(int)
    kappa = 2.0 * np.pi * kk / length
    theta = 2.0 * np.pi * kk / n
    return kk, kappa, theta


def _fourier_factors(n: int, length: float):
    """1-D circulant factors: vertex mass, edge mass, edge->point resampler."""
    h = length / n
    kk, kappa, theta = _axis_symbols(n, length)
    s = 2.0 * np.sin(theta / 2.0)

    m0 = np.empty(n)
    m1 = np.empty(n)
    nz = kk != 0
    m0[~nz] = h
    m1[~nz] = 1.0 / h
    m0[nz] = s[nz] / kappa[nz]
    m1[nz] = kappa[nz] / s[nz]

    sigma = np.exp(1j * theta) - 1.0
    r = np.zeros(n, dtype=complex)
    r[~nz] = 1.0 / h
    nyq = np.abs(kk) == n // 2 if n % 2 == 0 else np.zeros(n, dtype=bool)
    ok = nz & ~nyq
    r[ok] = 1j * kappa[ok] / sigma[ok]

    return _circulant(m0), _circulant(m1), _circulant(r)


def _require_fourier_grid(mesh: MeshComplex) -> None:
    if not mesh.is_structured:
        raise UnsupportedMeshError(
            "fourier backend is defined on uniform periodic grids only"
        )


# ----------------------------------------------------------------------
# inner products / mass matrices
# ----------------------------------------------------------------------

def inner_product_matrix(
    mesh: MeshComplex, k: int, noise: NoiseSpec, backend: str = "fd"
) -> np.ndarray:
    """SPD mass matrix of the degree-k inner product under the scaled metric."""
    backend = normalize_backend(backend)
    if not 0 <= k <= mesh.dimension:
        raise DegreeError(f"degree {k} out of range for the inner product")
    if noise.is_deterministic:
        raise DeterministicLimitError(
            "the scaled metric degenerates at epsilon = 0; no inner product exists"
        )
    if backend == "fd":
        return np.diag(hodge_star(mesh, k, noise).values)

    _require_fourier_grid(mesh)
    eps = noise.epsilon
    if mesh.kind == "circle":
        s0, s1, _ = _fourier_factors(mesh.grid_shape[0], mesh.lengths[0])
        return eps ** (k - 0.5) * (s0 if k == 0 else s1)

    (nx, ny), (lx, ly) = mesh.grid_shape, mesh.lengths
    s0x, s1x, _ = _fourier_factors(nx, lx)
    s0y, s1y, _ = _fourier_factors(ny, ly)
    if k == 0:
        return np.kron(s0x, s0y) / eps
    if k == 2:
        return eps * np.kron(s1x, s1y)
    n0 = nx * ny
    m = np.zeros((2 * n0, 2 * n0))
    m[:n0, :n0] = np.kron(s1x, s0y)
    m[n0:, n0:] = np.kron(s0x, s1y)
    return m


# ----------------------------------------------------------------------
# codifferential
# ----------------------------------------------------------------------

def codifferential(
    mesh: MeshComplex, k: int, noise: NoiseSpec, backend: str = "fd"
) -> OperatorBlock:
    """d†_k: degree k -> k-1, the metric adjoint of d_{k-1}.

    Assembled as ``M_{k-1}^{-1} d^T M_k``; the epsilon powers in the masses
    combine to a single overall factor epsilon relative to the unit metric.
    """
    backend = normalize_backend(backend)
    if k == 0:
        raise DegreeError("the codifferential has no target below degree 0")
    if not 1 <= k <= mesh.dimension:
        raise DegreeError(f"degree {k} out of range for the codifferential")
    if noise.is_deterministic:
        raise DeterministicLimitError(
            "codifferential requires epsilon > 0 (it scales linearly with the "
            "noise metric and vanishes identically in the deterministic limit)"
        )
    d = exterior_derivative(mesh, k - 1, backend).matrix
    m_lo = inner_product_matrix(mesh, k - 1, noise, backend)
    m_hi = inner_product_matrix(mesh, k, noise, backend)
    if backend == "fd":
        mat = (d.T * np.diag(m_hi)) / np.diag(m_lo)[:, None]
    else:
        mat = np.linalg.solve(m_lo, d.T @ m_hi)
    return OperatorBlock(mat, k, k - 1, backend)


# ----------------------------------------------------------------------
# interior product (contraction with the flow)
# ----------------------------------------------------------------------

def interior_product(
    mesh: MeshComplex, flow: FlowField, k: int, backend: str = "fd"
) -> OperatorBlock:
    """iota_A: degree k -> k-1, contraction of k-forms with the flow.

    fd backend: each k-cell's cochain value is converted to a pointwise form
    value (divide by the cell measure), contracted with the flow sample on
    the cell, and the results from all k-cells adjacent to a (k-1)-cell are
    averaged.  On uniform grids this is second-order accurate and makes the
    Cartan-assembled Lie derivative commute with d exactly.

    fourier backend: pseudospectral form diag(flow) @ (exact resampler).
    """
    backend = normalize_backend(backend)
    if not 1 <= k <= mesh.dimension:
        raise DegreeError(f"contraction maps degrees 1..{mesh.dimension}, got {k}")
    if not mesh.is_structured:
        if flow.is_zero:
            mat = np.zeros((mesh.n_cells(k - 1), mesh.n_cells(k)))
            return OperatorBlock(mat, k, k - 1, backend)
        raise UnsupportedMeshError(
            "contraction with a nonzero flow needs a structured grid"
        )

    if backend == "fourier":
        return _interior_product_fourier(mesh, flow, k)

    n_lo, n_hi = mesh.n_cells(k - 1), mesh.n_cells(k)
    mat = np.zeros((n_lo, n_hi))
    if k == 1:
        tang = flow.tangential_edge_values(mesh)
        hlen = mesh.primal_volumes[1]
        w = tang / (2.0 * hlen)
        e = np.arange(n_hi)
        np.add.at(mat, (mesh.edges[:, 0], e), w)
        np.add.at(mat, (mesh.edges[:, 1], e), w)
        return OperatorBlock(mat, 1, 0, "fd")

    # k == 2, torus: faces -> edges. A 2-form F dx^dy contracts to
    # A_x F dy - A_y F dx; each face contributes to its four boundary edges
    # with the transverse flow sample taken on the receiving edge.
    nx, ny = mesh.grid_shape
    hx, hy = mesh.spacings
    n0 = nx * ny
    trans = flow.transverse_edge_values(mesh)
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    f = ii * ny + jj
    ex_bot = ii * ny + jj
    ex_top = ii * ny + (jj + 1) % ny
    ey_left = n0 + (ii * ny + jj)
    ey_right = n0 + (((ii + 1) % nx) * ny + jj)
    np.add.at(mat, (ex_bot, f), -trans[ex_bot] / (2.0 * hy))
    np.add.at(mat, (ex_top, f), -trans[ex_top] / (2.0 * hy))
    np.add.at(mat, (ey_left, f), trans[ey_left] / (2.0 * hx))
    np.add.at(mat, (ey_right, f), trans[ey_right] / (2.0 * hx))
    return OperatorBlock(mat, 2, 1, "fd")


def _interior_product_fourier(mesh: MeshComplex, flow: FlowField, k: int) -> OperatorBlock:
    if mesh.kind == "circle":
        _, _, r = _fourier_factors(mesh.grid_shape[0], mesh.lengths[0])
        mat = flow.vertex_values[:, None] * r
        return OperatorBlock(mat, 1, 0, "fourier")

    (nx, ny), (lx, ly) = mesh.grid_shape, mesh.lengths
    _, _, rx = _fourier_factors(nx, lx)
    _, _, ry = _fourier_factors(ny, ly)
    n0 = nx * ny
    rx_full = np.kron(rx, np.eye(ny))
    ry_full = np.kron(np.eye(nx), ry)
    if k == 1:
        ax, ay = flow.vertex_values[:, 0], flow.vertex_values[:, 1]
        mat = np.hstack([ax[:, None] * rx_full, ay[:, None] * ry_full])
        return OperatorBlock(mat, 1, 0, "fourier")
    trans = flow.transverse_edge_values(mesh)
    mat = np.vstack([
        -trans[:n0, None] * ry_full,
        trans[n0:, None] * rx_full,
    ])
    return OperatorBlock(mat, 2, 1, "fourier")


# ----------------------------------------------------------------------
# Lie derivative (Cartan assembly)
# ----------------------------------------------------------------------

def lie_derivative(
    mesh: MeshComplex, flow: FlowField, k: int, backend: str = "fd"
) -> OperatorBlock:
    """L_A at degree k via the Cartan formula L = d iota + iota d.

    Terms outside the degree range 0..D are dropped (there is nothing to
    contract a 0-form with, and nothing above top degree to differentiate
    into).  Because L is assembled from the same d and iota blocks used
    everywhere else, d L_k = L_{k+1} d_k holds as an algebraic identity.
    """
    backend = normalize_backend(backend)
    if not 0 <= k <= mesh.dimension:
        raise DegreeError(f"degree {k} out of range for the Lie derivative")
    if not mesh.is_structured and not flow.is_zero:
        raise UnsupportedMeshError(
            "Lie derivative along a nonzero flow needs a structured grid"
        )
    n = mesh.n_cells(k)
    mat = np.zeros((n, n))
    if k < mesh.dimension:
        mat = mat + (
            interior_product(mesh, flow, k + 1, backend).matrix
            @ exterior_derivative(mesh, k, backend).matrix
        )
    if k > 0:
        mat = mat + (
            exterior_derivative(mesh, k - 1, backend).matrix
            @ interior_product(mesh, flow, k, backend).matrix
        )
    return OperatorBlock(mat, k, k, backend)
