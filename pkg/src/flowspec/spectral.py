"""Non-Hermitian eigenanalysis of graded operators, and spectrum-level verdicts.

Each degree block is decomposed densely with two-sided eigenvectors.  Left
and right eigenvectors are paired per eigenvalue *cluster* (eigenvalues
closer than 1e-7 of the spectral radius are handled jointly: under
degeneracy the individual left/right pairing is ill-posed, but the
cluster-local Gram matrix is invertible and one solve bi-orthonormalizes the
whole cluster).  Entries are ordered lexicographically by
(Re eigenvalue, Im eigenvalue, degree), which makes reports deterministic.

Naming: for an eigenvalue lambda = Gamma + i E, Gamma is the attenuation
rate (decay rate of the mode) and E the oscillation frequency.  States with
Gamma ~ 0 survive the long-time evolution; their oscillation content decides
the phase verdict:

* some surviving state oscillates (|E| > tau_E)      -> "Q-broken"
* surviving states exist and none oscillates          -> "unbroken-Markovian"
* no surviving state at all                           -> "indeterminate"

The alternating zero-mode count (the index) is a topological invariant: it
matches the mesh Euler characteristic and is independent of the flow.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .exceptions import (
    CapacityError,
    EigensolverError,
    ErgodicZeroMissingError,
    GapAmbiguityWarning,
)
from .hamiltonian import GradedOperator

__all__ = [
    "SpectrumEntry",
    "SpectrumReport",
    "PhaseClassification",
    "PairingReport",
    "full_spectrum",
    "synthetic_spectrum",
    "physical_states",
    "classify_phase",
    "witten_index",
    "zero_mode_counts",
    "susy_pairing_check",
    "conjugate_closure_residual",
    "export_spectrum_csv",
]

_CLUSTER_REL = 1e-7
_DEFAULT_TOL_REL = 1e-8


@dataclass(frozen=True)
class SpectrumEntry:
    """One eigenpair: ``gamma + 1j*e`` with its bi-orthonormalized vectors.

    ``residual`` is the worst deviation of this entry's row of the left-right
    Gram matrix from the identity.  Synthetic entries carry no vectors.
    """

    degree: int
    eigenvalue: complex
    right: Optional[np.ndarray]
    left: Optional[np.ndarray]
    residual: float

    @property
    def gamma(self) -> float:
        return float(self.eigenvalue.real)

    @property
    def e(self) -> float:
        return float(self.eigenvalue.imag)


@dataclass(frozen=True)
class SpectrumReport:
    entries: Tuple[SpectrumEntry, ...]
    spectral_radius: float
    dimension: int
    block_sizes: Tuple[int, ...]

    def eigenvalues(self, degree: Optional[int] = None) -> np.ndarray:
        if degree is None:
            return np.array([en.eigenvalue for en in self.entries])
        return np.array([en.eigenvalue for en in self.entries if en.degree == degree])

    def max_residual(self) -> float:
        return max((en.residual for en in self.entries), default=0.0)


@dataclass(frozen=True)
class PhaseClassification:
    verdict: str  # "unbroken-Markovian" | "Q-broken" | "indeterminate"
    tau_gamma: float
    tau_e: float
    evidence: Tuple[SpectrumEntry, ...]
    witten_index: int


def _default_tau(report: SpectrumReport, given: Optional[float]) -> float:
    if given is not None:
        if given <= 0:
            raise ValueError("tolerances must be positive")
        return float(given)
    return _DEFAULT_TOL_REL * report.spectral_radius


# ----------------------------------------------------------------------
# decomposition
# ----------------------------------------------------------------------

def full_spectrum(op: GradedOperator, cap: int = 8192) -> SpectrumReport:
    """Dense two-sided eigendecomposition of every degree block.

    Raises the capacity error when the summed block sizes exceed ``cap`` and
    the eigensolver error if LAPACK fails to converge on some block.
    """
    sizes = tuple(b.shape[0] for b in op.blocks)
    if sum(sizes) > cap:
        raise CapacityError(
            f"total unknowns {sum(sizes)} exceed the dense-solver cap {cap} "
            f"(blocks: {sizes})"
        )
    per_degree = []
    radius = 0.0
    for k in op.degrees():
        try:
            w, vl, vr = scipy.linalg.eig(op.block(k), left=True, right=True)
        except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
            raise EigensolverError(
                f"eigensolver failed to converge on the degree-{k} block"
            ) from exc
        per_degree.append((k, w, vl, vr))
        if len(w):
            radius = max(radius, float(np.max(np.abs(w))))

    entries: List[SpectrumEntry] = []
    for k, w, vl, vr in per_degree:
        vl, vr, residuals = _biorthonormalize(w, vl, vr, radius)
        for i in range(len(w)):
            entries.append(
                SpectrumEntry(k, complex(w[i]), vr[:, i].copy(), vl[:, i].copy(),
                              float(residuals[i]))
            )
    entries.sort(key=lambda en: (en.gamma, en.e, en.degree))
    return SpectrumReport(tuple(entries), radius, op.mesh.dimension, sizes)


def _biorthonormalize(w, vl, vr, radius):
    """Cluster-joint bi-orthonormalization; returns adjusted vl, vr, residuals.

    scipy convention: ``vl[:,i].conj().T @ A = w[i] * vl[:,i].conj().T``.
    After this transform, ``vl.conj().T @ vr`` is the identity within
    roundoff (cluster-local solve handles degeneracies).
    """
    n = len(w)
    if n == 0:
        return vl, vr, np.zeros(0)
    thr = _CLUSTER_REL * max(radius, 1e-300)
    order = np.lexsort((w.imag, w.real))
    clusters: List[List[int]] = [[order[0]]]
    for prev, cur in zip(order[:-1], order[1:]):
        if abs(w[cur] - w[prev]) <= thr:
            clusters[-1].append(cur)
        else:
            clusters.append([cur])

    vl = vl.astype(complex).copy()
    vr = vr.astype(complex).copy()
    for idx in clusters:
        sub_l = vl[:, idx]
        sub_r = vr[:, idx]
        gram = sub_l.conj().T @ sub_r
        try:
            vl[:, idx] = sub_l @ np.linalg.inv(gram).conj().T
        except np.linalg.LinAlgError as exc:
            raise EigensolverError(
                "left/right eigenvector cluster is numerically defective "
                f"(cluster eigenvalues {w[idx]})"
            ) from exc

    # deterministic scale: unit right vector, dominant component real positive
    for i in range(n):
        r = vr[:, i]
        j = int(np.argmax(np.abs(r)))
        s = r[j] / abs(r[j]) * np.linalg.norm(r)
        vr[:, i] = r / s
        vl[:, i] = vl[:, i] * np.conj(s)

    if n <= 3000:
        gram = vl.conj().T @ vr
        residuals = np.max(np.abs(gram - np.eye(n)), axis=1)
    else:  # cluster-local residual for very large blocks
        residuals = np.zeros(n)
        for idx in clusters:
            g = vl[:, idx].conj().T @ vr[:, idx]
            residuals[idx] = np.max(np.abs(g - np.eye(len(idx))), axis=1)
    return vl, vr, residuals


def synthetic_spectrum(values: Sequence[complex], degree: int = 0,
                       dimension: int = 1) -> SpectrumReport:
    """Wrap a bare eigenvalue multiset for the classifiers (no eigenvectors)."""
    vals = [complex(v) for v in values]
    entries = tuple(
        SpectrumEntry(degree, v, None, None, 0.0)
        for v in sorted(vals, key=lambda z: (z.real, z.imag))
    )
    radius = max((abs(v) for v in vals), default=0.0)
    return SpectrumReport(entries, radius, dimension, (len(vals),))


# ----------------------------------------------------------------------
# physical states and phase verdicts
# ----------------------------------------------------------------------

def physical_states(report: SpectrumReport,
                    tau_gamma: Optional[float] = None) -> Tuple[SpectrumEntry, ...]:
    """Entries surviving the long-time evolution: |Gamma| <= tau_gamma.

    Every sound discretization of an ergodic flow has at least one (the
    stationary state); an empty result therefore raises.
    """
    tau = _default_tau(report, tau_gamma)
    kept = tuple(en for en in report.entries if abs(en.gamma) <= tau)
    if not kept:
        raise ErgodicZeroMissingError(
            "no state with |Gamma| <= "
            f"{tau:.3e} found; the stationary zero mode is missing, which "
            "signals an inconsistent discretization"
        )
    return kept


def classify_phase(report: SpectrumReport,
                   tau_gamma: Optional[float] = None,
                   tau_e: Optional[float] = None) -> PhaseClassification:
    """Phase verdict as a pure function of the eigenvalue multiset.

    An empty survivor set yields "indeterminate" rather than an error so
    sweeps over marginal operators always complete; call
    ``physical_states`` directly to get the hard failure.
    """
    tg = _default_tau(report, tau_gamma)
    te = _default_tau(report, tau_e)
    surviving = tuple(en for en in report.entries if abs(en.gamma) <= tg)
    if any(abs(en.e) > te for en in surviving):
        verdict = "Q-broken"
    elif surviving:
        verdict = "unbroken-Markovian"
    else:
        verdict = "indeterminate"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GapAmbiguityWarning)
        wi = witten_index(report)
    return PhaseClassification(verdict, tg, te, surviving, wi)


def witten_index(report: SpectrumReport, tau0: Optional[float] = None) -> int:
    """Alternating-by-degree count of zero modes, sum_k (-1)^k #{|lambda| <= tau0}.

    If some eigenvalue magnitude falls in the ambiguous band (tau0, 10*tau0],
    a gap-ambiguity warning is issued: the zero/nonzero split is then
    sensitive to the threshold.
    """
    tau = _default_tau(report, tau0)
    total = 0
    ambiguous = []
    for en in report.entries:
        mag = abs(en.eigenvalue)
        if mag <= tau:
            total += -1 if en.degree % 2 else 1
        elif mag <= 10.0 * tau:
            ambiguous.append((en.degree, en.eigenvalue))
    if ambiguous:
        warnings.warn(
            f"{len(ambiguous)} eigenvalue(s) within a factor 10 of the "
            f"zero-mode threshold {tau:.3e}; the index count is "
            f"threshold-sensitive: {ambiguous[:4]}",
            GapAmbiguityWarning,
            stacklevel=2,
        )
    return total


def zero_mode_counts(report: SpectrumReport, tau0: Optional[float] = None) -> Tuple[int, ...]:
    """Number of |lambda| <= tau0 eigenvalues per degree 0..D."""
    tau = _default_tau(report, tau0)
    counts = [0] * (report.dimension + 1)
    for en in report.entries:
        if abs(en.eigenvalue) <= tau:
            counts[en.degree] += 1
    return tuple(counts)


# ----------------------------------------------------------------------
# pairing across adjacent degrees
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PairingReport:
    n_bonds: int
    bonds_by_adjacency: Tuple[Tuple[int, int, int], ...]
    unpaired: Tuple[Tuple[int, complex], ...]
    max_mismatch: float
    multiset_equal: Optional[bool]
    tol: float


def susy_pairing_check(report: SpectrumReport, tol: float = 1e-8) -> PairingReport:
    """Match every nonzero eigenvalue with a partner in an adjacent degree.

    Nonzero modes of adjacent blocks pair up through d and its adjoint; a
    middle-degree value may bond either down or up but not both, so matching
    proceeds degree pair by degree pair with consumption.  On 1-dimensional
    meshes the check additionally reports whether the nonzero degree-0 and
    degree-1 spectra agree as multisets.
    """
    atol = tol * max(report.spectral_radius, 1.0)
    zero_thr = _DEFAULT_TOL_REL * report.spectral_radius
    by_degree: List[List[complex]] = [[] for _ in range(report.dimension + 1)]
    for en in report.entries:
        if abs(en.eigenvalue) > zero_thr:
            by_degree[en.degree].append(en.eigenvalue)

    used = [np.zeros(len(v), dtype=bool) for v in by_degree]
    bonds = []
    max_mismatch = 0.0
    for k in range(report.dimension):
        lo, hi = by_degree[k], by_degree[k + 1]
        count = 0
        for i, lam in enumerate(lo):
            if used[k][i]:
                continue
            best, best_d = -1, np.inf
            for j, mu in enumerate(hi):
                if used[k + 1][j]:
                    continue
                d = abs(lam - mu)
                if d < best_d:
                    best, best_d = j, d
            if best >= 0 and best_d <= atol:
                used[k][i] = True
                used[k + 1][best] = True
                count += 1
                max_mismatch = max(max_mismatch, best_d)
        bonds.append((k, k + 1, count))

    unpaired = tuple(
        (k, lam)
        for k, vals in enumerate(by_degree)
        for i, lam in enumerate(vals)
        if not used[k][i]
    )
    multiset_equal: Optional[bool] = None
    if report.dimension == 1:
        a = sorted(by_degree[0], key=lambda z: (z.real, z.imag))
        b = np.array(by_degree[1], dtype=complex)
        if len(a) != len(b):
            multiset_equal = False
        else:  # greedy nearest matching: robust to degenerate real parts
            taken = np.zeros(len(b), dtype=bool)
            ok = True
            for x in a:
                dist = np.abs(b - x)
                dist[taken] = np.inf
                j = int(np.argmin(dist)) if len(b) else -1
                if j < 0 or dist[j] > atol:
                    ok = False
                    break
                taken[j] = True
            multiset_equal = ok
    return PairingReport(
        n_bonds=sum(c for _, _, c in bonds),
        bonds_by_adjacency=tuple(bonds),
        unpaired=unpaired,
        max_mismatch=float(max_mismatch),
        multiset_equal=multiset_equal,
        tol=tol,
    )


def conjugate_closure_residual(report: SpectrumReport) -> float:
    """Worst distance from each eigenvalue's conjugate to its own degree multiset."""
    worst = 0.0
    for k in range(report.dimension + 1):
        vals = report.eigenvalues(degree=k)
        if len(vals) == 0:
            continue
        for lam in vals:
            worst = max(worst, float(np.min(np.abs(vals - np.conj(lam)))))
    return worst


# ----------------------------------------------------------------------
# CSV export
# ----------------------------------------------------------------------

def export_spectrum_csv(report: SpectrumReport, path,
                        tau_gamma: Optional[float] = None) -> None:
    """Write (degree, index, gamma, e, pair_id, physical_flag) rows.

    ``index`` is the global ordinal in the report's deterministic ordering.
    ``pair_id`` links an oscillating eigenvalue with its complex conjugate
    within the same degree (-1 for effectively real eigenvalues).
    """
    tau = _default_tau(report, tau_gamma)
    pair_tol = 1e-10 * max(report.spectral_radius, 1.0)
    pair_ids = [-1] * len(report.entries)
    next_id = 0
    for k in range(report.dimension + 1):
        idxs = [i for i, en in enumerate(report.entries) if en.degree == k]
        pos = [i for i in idxs if report.entries[i].e > pair_tol]
        neg = [i for i in idxs if report.entries[i].e < -pair_tol]
        taken = np.zeros(len(neg), dtype=bool)
        for i in pos:
            lam = report.entries[i].eigenvalue
            best, best_d = -1, np.inf
            for jj, j in enumerate(neg):
                if taken[jj]:
                    continue
                d = abs(np.conj(lam) - report.entries[j].eigenvalue)
                if d < best_d:
                    best, best_d = jj, d
            if best >= 0 and best_d <= 1e-8 * max(report.spectral_radius, 1.0):
                pair_ids[i] = next_id
                pair_ids[neg[best]] = next_id
                taken[best] = True
                next_id += 1

    from .reporting import format_float  # local import to avoid a cycle

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["degree", "index", "gamma", "e", "pair_id", "physical_flag"])
        for i, en in enumerate(report.entries):
            writer.writerow([
                en.degree,
                i,
                format_float(en.gamma),
                format_float(en.e),
                pair_ids[i],
                int(abs(en.gamma) <= tau),
            ])
