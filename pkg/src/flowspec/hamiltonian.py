"""Graded evolution operator of the noisy flow, and its algebraic relatives.

The generator acts degree-by-degree on cochains:

    H_k = (d d† + d† d)_k / 2 - L_A(k)

with the codifferential carrying the noise scale and L_A the Cartan-assembled
Lie derivative.  Ghost number (form degree) is conserved, so the operator is
a tuple of square blocks.  The companion charge

    Qbar_k = d†_k - 2 iota_A(k)

satisfies H = (Q Qbar + Qbar Q)/2 with Q = d; both assembly routes are built
from the same blocks and compared at every assembly as a self-check (the
identity is algebraic, so a violation means memory corruption, not roundoff).

Degree-0 blocks propagate observables (kets); the top-degree block conjugated
by the top Hodge star is the conventional density generator.  For gradient
flows the whole operator is brought to a real symmetric form by a diagonal
similarity; see ``hermitianize_langevin``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .exceptions import (
    DegreeError,
    DeterministicLimitError,
    NumericalError,
    UnsupportedMeshError,
)
from .fields import FlowField, langevin_flow
from .mesh import MeshComplex, NoiseSpec, hodge_star
from .operators import (
    OperatorBlock,
    codifferential,
    exterior_derivative,
    inner_product_matrix,
    interior_product,
    lie_derivative,
    normalize_backend,
)

__all__ = [
    "GradedOperator",
    "LangevinSimilarity",
    "assemble_hamiltonian",
    "pseudo_adjoint_charge",
    "conventional_fp_operator",
    "hermitianize_langevin",
]

_TWO_ROUTE_TOL = 1e-11


@dataclass(frozen=True)
class GradedOperator:
    """Degree-graded operator: ``blocks[i]`` acts on degree ``i + max(0, -degree_shift)``.

    ``degree_shift`` is 0 for degree-preserving operators (the generator) and
    -1 for the conjugate charge (degree k -> k-1, defined for k >= 1).
    """

    blocks: Tuple[np.ndarray, ...]
    degree_shift: int
    mesh: MeshComplex
    flow: FlowField
    noise: NoiseSpec
    backend: str = "fd"

    @property
    def min_degree(self) -> int:
        return max(0, -self.degree_shift)

    @property
    def max_degree(self) -> int:
        return self.min_degree + len(self.blocks) - 1

    def block(self, k: int) -> np.ndarray:
        if k < self.min_degree or k > self.max_degree:
            if self.degree_shift < 0 and k == 0:
                raise DegreeError(
                    "the conjugate charge lowers degree and there are no "
                    "(-1)-forms to map 0-cochains into"
                )
            raise DegreeError(
                f"degree {k} outside {self.min_degree}..{self.max_degree}"
            )
        return self.blocks[k - self.min_degree]

    def apply(self, k: int, cochain: np.ndarray) -> np.ndarray:
        return self.block(k) @ cochain

    def degrees(self):
        return range(self.min_degree, self.max_degree + 1)

    def intertwining_residual(self) -> float:
        """max_k ||d H_k - H_{k+1} d|| / ||H|| — zero up to roundoff by construction."""
        if self.degree_shift != 0:
            raise DegreeError("intertwining is defined for degree-preserving operators")
        scale = max(np.max(np.abs(b)) for b in self.blocks)
        worst = 0.0
        for k in range(self.mesh.dimension):
            d = exterior_derivative(self.mesh, k, self.backend).matrix
            r = np.max(np.abs(d @ self.block(k) - self.block(k + 1) @ d))
            worst = max(worst, r)
        return float(worst / max(scale, 1e-300))


def _deterministic_guard(flow: FlowField, noise: NoiseSpec, allow: bool, what: str):
    if noise.is_deterministic and not flow.is_zero and not allow:
        raise DeterministicLimitError(
            f"{what} is singular at epsilon = 0 with a nonzero flow: the "
            "diffusive part vanishes and the spectrum collapses onto the "
            "imaginary axis. Use the noise-sweep diagnostic "
            "(reporting.sweep_epsilon) to study the approach to this limit, "
            "or pass allow_deterministic=True for the bare advection operator."
        )


def _graded_pieces(mesh, flow, noise, backend):
    dim = mesh.dimension
    d = [exterior_derivative(mesh, k, backend).matrix for k in range(dim)]
    if noise.is_deterministic:
        ddag = [np.zeros((mesh.n_cells(k - 1), mesh.n_cells(k))) for k in range(1, dim + 1)]
    else:
        ddag = [codifferential(mesh, k, noise, backend).matrix for k in range(1, dim + 1)]
    iota = [interior_product(mesh, flow, k, backend).matrix for k in range(1, dim + 1)]
    return d, ddag, iota


def assemble_hamiltonian(
    mesh: MeshComplex,
    flow: FlowField,
    noise: NoiseSpec,
    backend: str = "fd",
    allow_deterministic: bool = False,
) -> GradedOperator:
    """Generator blocks H_k = (d d† + d† d)/2 - L_A at every degree.

    The construction is verified on the spot against the charge route
    H = (Q Qbar + Qbar Q)/2; a mismatch raises rather than returning a bad
    operator.

    Parameters
    ----------
    mesh, flow, noise
        The discretized phase space, the velocity field, and the noise scale.
    backend : {"fd", "fourier"}
    allow_deterministic : bool
        Opt in to the epsilon = 0 advection-only operator H = -L_A.
    """
    backend = normalize_backend(backend)
    _deterministic_guard(flow, noise, allow_deterministic, "the generator")
    dim = mesh.dimension
    d, ddag, iota = _graded_pieces(mesh, flow, noise, backend)

    blocks = []
    for k in range(dim + 1):
        n = mesh.n_cells(k)
        hk = np.zeros((n, n))
        if k >= 1:
            hk += 0.5 * (d[k - 1] @ ddag[k - 1])
        if k < dim:
            hk += 0.5 * (ddag[k] @ d[k])
        hk -= lie_derivative(mesh, flow, k, backend).matrix
        blocks.append(hk)

    op = GradedOperator(tuple(blocks), 0, mesh, flow, noise, backend)
    _check_two_routes(op, d, ddag, iota)
    return op


def _check_two_routes(op: GradedOperator, d, ddag, iota) -> None:
    dim = op.mesh.dimension
    qbar = [ddag[i] - 2.0 * iota[i] for i in range(dim)]
    scale = max(max(np.max(np.abs(b)) for b in op.blocks), 1e-300)
    for k in range(dim + 1):
        n = op.mesh.n_cells(k)
        alt = np.zeros((n, n))
        if k >= 1:
            alt += 0.5 * (d[k - 1] @ qbar[k - 1])
        if k < dim:
            alt += 0.5 * (qbar[k] @ d[k])
        resid = np.max(np.abs(alt - op.block(k))) / scale
        if resid > _TWO_ROUTE_TOL:
            raise NumericalError(
                f"generator self-check failed at degree {k}: the charge-route "
                f"assembly differs by {resid:.3e} relative (tolerance "
                f"{_TWO_ROUTE_TOL:g})"
            )


def pseudo_adjoint_charge(
    mesh: MeshComplex,
    flow: FlowField,
    noise: NoiseSpec,
    backend: str = "fd",
    allow_deterministic: bool = False,
) -> GradedOperator:
    """Conjugate charge blocks Qbar_k = d†_k - 2 iota_A(k) for k = 1..D."""
    backend = normalize_backend(backend)
    _deterministic_guard(flow, noise, allow_deterministic, "the conjugate charge")
    _, ddag, iota = _graded_pieces(mesh, flow, noise, backend)
    blocks = tuple(ddag[i] - 2.0 * iota[i] for i in range(mesh.dimension))
    return GradedOperator(blocks, -1, mesh, flow, noise, backend)


def conventional_fp_operator(
    mesh: MeshComplex,
    flow: FlowField,
    noise: NoiseSpec,
    backend: str = "fd",
) -> OperatorBlock:
    """Density generator: the top-degree block conjugated by the top Hodge star.

    The result acts on pointwise density values at dual vertices (cell
    centers).  On a uniform grid the top star is a scalar, so the matrix
    equals the top block itself; its columns sum to zero exactly (each edge
    bounds one cell positively and one negatively), which is discrete
    probability conservation.  For zero flow it reduces to the (negative,
    scaled) dual-grid diffusion stencil.
    """
    backend = normalize_backend(backend)
    if not mesh.is_structured:
        raise UnsupportedMeshError(
            "the density generator is assembled on structured grids only"
        )
    if noise.is_deterministic:
        raise DeterministicLimitError(
            "the density generator requires epsilon > 0"
        )
    h = assemble_hamiltonian(mesh, flow, noise, backend)
    top = h.block(mesh.dimension)
    if backend == "fd":
        s = hodge_star(mesh, mesh.dimension, noise).values
        mat = (s[:, None] * top) / s[None, :]
    else:
        m = inner_product_matrix(mesh, mesh.dimension, noise, backend)
        mat = m @ top @ np.linalg.inv(m)
    return OperatorBlock(mat, mesh.dimension, mesh.dimension, backend)


@dataclass(frozen=True)
class LangevinSimilarity:
    """Diagonal similarity bringing the gradient-flow generator to symmetric form.

    ``eta[k]`` holds the per-cell metric weights at degree k (vertex weights
    e^{2W}; edge and face weights are harmonic means of the vertex weights
    over the cell's vertices).  ``asymmetry[k]`` is the measured relative
    asymmetry of the transformed block.
    """

    eta: Tuple[np.ndarray, ...]
    asymmetry: Tuple[float, ...]
    w: np.ndarray
    epsilon: float

    def to_hermitian(self, k: int, cochain: np.ndarray) -> np.ndarray:
        return np.sqrt(self.eta[k]) * cochain

    def from_hermitian(self, k: int, vec: np.ndarray) -> np.ndarray:
        return vec / np.sqrt(self.eta[k])


def hermitianize_langevin(
    mesh: MeshComplex,
    w_or_flow: Union[np.ndarray, FlowField],
    noise: NoiseSpec,
) -> Tuple[GradedOperator, LangevinSimilarity]:
    """Similarity-transform the gradient-flow generator to real symmetric form.

    Accepts either vertex samples of the superpotential W or a flow field
    declared as a gradient flow (anything else raises the not-potential
    error).  Uses the fd backend.  Per degree, the transformed block is
    diag(sqrt(eta)) H diag(1/sqrt(eta)); the vertex weights are eta = e^{2W}
    and higher-degree cell weights are harmonic means of the vertex weights.
    On circle grids this is exactly symmetric at every degree for any W (the
    tanh edge-flow rule is chosen to make it so).  On torus grids the
    degree-0 block is still exactly symmetric, but the degree-1 block mixes
    the two edge families with weights no diagonal similarity can reconcile,
    so the call measures the asymmetry and raises rather than return a
    silently non-symmetric operator.
    """
    if noise.is_deterministic:
        raise DeterministicLimitError("hermitianization requires epsilon > 0")
    if isinstance(w_or_flow, FlowField):
        w = w_or_flow.require_langevin()
    else:
        w = np.asarray(w_or_flow, dtype=float)
    flow = langevin_flow(mesh, w, noise)
    ham = assemble_hamiltonian(mesh, flow, noise, backend="fd")

    inv_vertex = np.exp(-2.0 * w)
    etas = [np.exp(2.0 * w)]
    etas.append(1.0 / (0.5 * (inv_vertex[mesh.edges[:, 0]] + inv_vertex[mesh.edges[:, 1]])))
    if mesh.dimension == 2:
        etas.append(1.0 / np.mean(inv_vertex[mesh.faces], axis=1))

    blocks, asym = [], []
    for k in range(mesh.dimension + 1):
        s = np.sqrt(etas[k])
        hk = (s[:, None] * ham.block(k)) / s[None, :]
        scale = max(np.max(np.abs(hk)), 1e-300)
        a = float(np.max(np.abs(hk - hk.T)) / scale)
        blocks.append(hk)
        asym.append(a)

    worst = max(asym)
    if worst > 1e-10:
        raise NumericalError(
            f"diagonal similarity left a relative asymmetry of {worst:.3e} "
            "(tolerance 1e-10). On product grids the degree-1 block couples "
            "the two edge families with weights that no diagonal metric can "
            "reconcile; exact hermitianization is available on circle grids."
        )
    hermitian = GradedOperator(tuple(blocks), 0, mesh, flow, noise, "fd")
    return hermitian, LangevinSimilarity(tuple(etas), tuple(asym), w.copy(), noise.epsilon)
