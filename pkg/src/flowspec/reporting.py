"""Run configurations, task execution, and byte-stable report writing.

A run configuration is a JSON object:

.. code-block:: json

    {
      "model": {"name": "constant_drive_circle",
                "params": {"a": 1.0, "epsilon": 0.2, "n": 64}},
      "backend": "fourier",
      "tasks": ["spectrum", "classify", "sweep"],
      "tolerances": {"tau_gamma": null, "tau_e": null, "tau0": null},
      "sweep": {"epsilons": [0.4, 0.2, 0.1, 0.05]},
      "simulate": {"dt": 0.004, "steps": 4000, "n_paths": 5000,
                   "seed": 7, "store_every": 1, "bins": 64,
                   "autocorrelation": false},
      "out_dir": "out"
    }

Instead of ``model``, an ``inline`` object may supply a mesh and flow table
directly (see :func:`RunConfig.from_dict`); inline systems support the
operator tasks but not ``simulate``/``sweep``, which need a closed-form
drift and a rebuildable model.

``report.json`` is byte-stable: keys sorted, every float printed with 12
significant digits, negative zero normalized, non-finite values rejected,
complex numbers written as objects with re/im fields.  Wall-clock timings
never enter the report; they go to the ``timings.json`` sidecar.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy

from ._version import __version__
from .exceptions import (
    NumericalError,
    UnsupportedMeshError,
    ValidationError,
)
from .fields import flow_from_vertex_samples, langevin_flow
from .hamiltonian import assemble_hamiltonian
from .mesh import NoiseSpec, build_circle_grid, build_torus_grid
from .models import ModelOracle, ModelSpec, build_model, oracle_spectrum_residual
from .morse import find_critical_points, instanton_splitting_scan, poincare_hopf_sum
from .operators import normalize_backend
from .spectral import (
    classify_phase,
    export_spectrum_csv,
    full_spectrum,
    witten_index,
    zero_mode_counts,
)
from .trajectories import (
    autocorrelation_decay,
    simulate_sde,
    stationary_histogram,
    tv_distance_to_density,
)

__all__ = [
    "TASKS",
    "RunConfig",
    "ReportDocument",
    "format_float",
    "canonical_json",
    "run",
    "sweep_epsilon",
]

TASKS = ("spectrum", "classify", "witten", "stationary", "morse", "simulate", "sweep")


# ----------------------------------------------------------------------
# canonical serialization
# ----------------------------------------------------------------------

def format_float(x: float) -> str:
    """12-significant-digit float token; rejects non-finite, normalizes -0."""
    x = float(x)
    if not np.isfinite(x):
        raise NumericalError(f"non-finite value {x!r} cannot enter a report")
    if x == 0.0:
        x = 0.0  # collapses -0.0
    return "%.11e" % x


def _canon(obj, indent: int, path: str) -> str:
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise ValidationError(f"non-string key {key!r} at {path}")
            parts.append(
                f'{inner}{json.dumps(key)}: '
                + _canon(obj[key], indent + 2, f"{path}.{key}")
            )
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not len(obj):
            return "[]"
        parts = [
            inner + _canon(v, indent + 2, f"{path}[{i}]") for i, v in enumerate(obj)
        ]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        return _canon({"re": z.real, "im": z.imag}, indent, path)
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, np.ndarray):
        return _canon(obj.tolist(), indent, path)
    raise ValidationError(f"cannot serialize {type(obj).__name__} at {path}")


def canonical_json(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed float format, newline end)."""
    return _canon(obj, 0, "$") + "\n"


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    tasks: Tuple[str, ...]
    backend: str = "fd"
    model_name: Optional[str] = None
    model_params: Dict = field(default_factory=dict)
    inline: Optional[Dict] = None
    tau_gamma: Optional[float] = None
    tau_e: Optional[float] = None
    tau0: Optional[float] = None
    sweep_epsilons: Optional[Tuple[float, ...]] = None
    sim: Dict = field(default_factory=dict)
    morse_epsilons: Optional[Tuple[float, ...]] = None
    out_dir: Optional[str] = None
    raw: Dict = field(default_factory=dict)

    @staticmethod
    def from_file(path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ValidationError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file is not valid JSON: {exc}") from exc
        return RunConfig.from_dict(data)

    @staticmethod
    def from_dict(data: Dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
        known = {"model", "inline", "backend", "tasks", "tolerances",
                 "sweep", "simulate", "morse", "out_dir"}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(
                f"unknown config keys: {sorted(unknown)}; known: {sorted(known)}"
            )
        tasks = data.get("tasks")
        if not isinstance(tasks, list) or not tasks:
            raise ValidationError("config needs a non-empty 'tasks' list")
        bad = [t for t in tasks if t not in TASKS]
        if bad:
            raise ValidationError(f"unknown tasks {bad}; available: {list(TASKS)}")

        has_model = "model" in data
        has_inline = "inline" in data
        if has_model == has_inline:
            raise ValidationError("config needs exactly one of 'model' or 'inline'")
        model_name, model_params, inline = None, {}, None
        if has_model:
            m = data["model"]
            if not isinstance(m, dict) or "name" not in m:
                raise ValidationError("'model' must be an object with a 'name'")
            model_name = m["name"]
            model_params = dict(m.get("params", {}))
        else:
            inline = dict(data["inline"])
            if any(t in ("simulate", "sweep") for t in tasks):
                raise ValidationError(
                    "'simulate' and 'sweep' need a registered model, not an "
                    "inline system"
                )

        backend = normalize_backend(data.get("backend", "fd"))

        tol = data.get("tolerances", {}) or {}
        if not isinstance(tol, dict):
            raise ValidationError("'tolerances' must be an object")
        taus = {}
        for key in ("tau_gamma", "tau_e", "tau0"):
            v = tol.get(key)
            if v is not None:
                v = float(v)
                if v <= 0 or not np.isfinite(v):
                    raise ValidationError(f"{key} must be positive, got {v}")
            taus[key] = v

        sweep_eps = None
        if "sweep" in tasks:
            sw = data.get("sweep") or {}
            eps = sw.get("epsilons")
            if not isinstance(eps, list) or not eps:
                raise ValidationError("'sweep' task needs sweep.epsilons")
            sweep_eps = tuple(float(e) for e in eps)
            _validate_sweep_epsilons(sweep_eps)

        sim = dict(data.get("simulate", {}) or {})
        if "simulate" in tasks:
            sim.setdefault("dt", 0.005)
            sim.setdefault("steps", 20_000)
            sim.setdefault("n_paths", 200)
            sim.setdefault("seed", 2024)
            sim.setdefault("store_every", 1)
            sim.setdefault("bins", 64)
            sim.setdefault("autocorrelation", False)

        morse_eps = None
        mo = data.get("morse") or {}
        if mo.get("splitting_epsilons"):
            morse_eps = tuple(float(e) for e in mo["splitting_epsilons"])

        return RunConfig(
            tasks=tuple(tasks),
            backend=backend,
            model_name=model_name,
            model_params=model_params,
            inline=inline,
            tau_gamma=taus["tau_gamma"],
            tau_e=taus["tau_e"],
            tau0=taus["tau0"],
            sweep_epsilons=sweep_eps,
            sim=sim,
            morse_epsilons=morse_eps,
            out_dir=data.get("out_dir"),
            raw=data,
        )


def _validate_sweep_epsilons(eps: Tuple[float, ...]) -> None:
    if any((not np.isfinite(e)) or e < 0 for e in eps):
        raise ValidationError(f"sweep noise levels must be finite and >= 0: {eps}")
    if any(b >= a for a, b in zip(eps[:-1], eps[1:])):
        raise ValidationError(f"sweep noise levels must be strictly decreasing: {eps}")


def _resolve_model(config: RunConfig) -> ModelSpec:
    if config.model_name is not None:
        return build_model(config.model_name, config.model_params)
    return _build_inline(config.inline)


def _build_inline(spec: Dict) -> ModelSpec:
    mesh_spec = spec.get("mesh")
    if not isinstance(mesh_spec, dict) or "kind" not in mesh_spec:
        raise ValidationError("inline system needs mesh.kind")
    kind = mesh_spec["kind"]
    try:
        if kind == "circle":
            mesh = build_circle_grid(
                int(mesh_spec["n"]), float(mesh_spec.get("length", 2 * np.pi))
            )
        elif kind == "torus":
            mesh = build_torus_grid(
                int(mesh_spec["nx"]), int(mesh_spec["ny"]),
                float(mesh_spec.get("lx", 2 * np.pi)),
                float(mesh_spec.get("ly", 2 * np.pi)),
            )
        else:
            raise ValidationError(f"inline mesh kind must be circle or torus, got {kind!r}")
    except KeyError as exc:
        raise ValidationError(f"inline mesh is missing {exc}") from exc

    if "epsilon" not in spec:
        raise ValidationError("inline system needs an 'epsilon'")
    noise = NoiseSpec(float(spec["epsilon"]))

    flow_spec = spec.get("flow")
    if not isinstance(flow_spec, dict):
        raise ValidationError("inline system needs a 'flow' object")
    w = None
    if "potential" in flow_spec:
        w = np.asarray(flow_spec["potential"], dtype=float)
        flow = langevin_flow(mesh, w, noise)
    elif "vertex_samples" in flow_spec:
        flow = flow_from_vertex_samples(
            mesh, np.asarray(flow_spec["vertex_samples"], dtype=float)
        )
    elif "constant" in flow_spec:
        c = np.atleast_1d(np.asarray(flow_spec["constant"], dtype=float))
        n0 = mesh.n_cells(0)
        samples = np.full(n0, c[0]) if mesh.dimension == 1 else np.tile(c, (n0, 1))
        flow = flow_from_vertex_samples(mesh, samples)
    else:
        raise ValidationError(
            "inline flow needs one of: potential, vertex_samples, constant"
        )
    return ModelSpec(
        name="inline",
        params={},
        mesh=mesh,
        flow=flow,
        noise=noise,
        langevin=flow.langevin,
        oracle=ModelOracle(basis="structural", rel_tol=1e-9),
        w=w,
    )


# ----------------------------------------------------------------------
# tasks
# ----------------------------------------------------------------------

class _RunState:
    """Lazily shared operator and spectrum across tasks of one run."""

    def __init__(self, config: RunConfig, model: ModelSpec):
        self.config = config
        self.model = model
        self._op = None
        self._spectrum = None

    @property
    def op(self):
        if self._op is None:
            m = self.model
            self._op = assemble_hamiltonian(
                m.mesh, m.flow, m.noise, backend=self.config.backend,
                allow_deterministic=m.noise.is_deterministic,
            )
        return self._op

    @property
    def spectrum(self):
        if self._spectrum is None:
            self._spectrum = full_spectrum(self.op)
        return self._spectrum


def _task_spectrum(state: _RunState, out_dir: Path) -> Dict:
    rep = state.spectrum
    export_spectrum_csv(rep, out_dir / "spectrum.csv", state.config.tau_gamma)
    counts = {}
    for en in rep.entries:
        counts[en.degree] = counts.get(en.degree, 0) + 1
    result = {
        "spectral_radius": rep.spectral_radius,
        "entries_per_degree": {str(k): counts[k] for k in sorted(counts)},
        "max_biorthogonality_residual": rep.max_residual(),
        "csv": "spectrum.csv",
    }
    dev = oracle_spectrum_residual(state.model, rep, state.config.backend)
    if dev is not None:
        result["oracle_max_rel_deviation"] = dev
        result["oracle_satisfied"] = bool(dev <= state.model.oracle.rel_tol)
    return result


def _task_classify(state: _RunState, out_dir: Path) -> Dict:
    cls = classify_phase(state.spectrum, state.config.tau_gamma, state.config.tau_e)
    return {
        "verdict": cls.verdict,
        "tau_gamma": cls.tau_gamma,
        "tau_e": cls.tau_e,
        "n_surviving": len(cls.evidence),
        "witten_index": cls.witten_index,
    }


def _task_witten(state: _RunState, out_dir: Path) -> Dict:
    idx = witten_index(state.spectrum, state.config.tau0)
    counts = zero_mode_counts(state.spectrum, state.config.tau0)
    chi = state.model.mesh.euler_characteristic()
    return {
        "witten_index": idx,
        "zero_modes_per_degree": list(counts),
        "euler_characteristic": chi,
        "matches_euler_characteristic": bool(idx == chi),
    }


def _task_stationary(state: _RunState, out_dir: Path) -> Dict:
    rep = state.spectrum
    mesh = state.model.mesh
    top = mesh.dimension
    top_entries = [en for en in rep.entries if en.degree == top]
    if not top_entries:
        raise NumericalError("no top-degree entries in the spectrum")
    ground = min(top_entries, key=lambda en: abs(en.eigenvalue))
    vec = ground.right
    if vec is None:
        raise ValidationError("stationary task needs eigenvectors (not synthetic input)")
    vec = np.real_if_close(vec, tol=1e6)
    if np.iscomplexobj(vec):
        vec = vec.real
    # fix sign so the dominant component is positive, then unit total mass
    j = int(np.argmax(np.abs(vec)))
    if vec[j] < 0:
        vec = -vec
    mass = float(np.sum(vec * mesh.primal_volumes[top]))
    if mass <= 0:
        raise NumericalError("top-degree ground state has non-positive mass")
    vec = vec / mass

    result = {
        "degree": top,
        "ground_eigenvalue": complex(ground.eigenvalue),
        "csv": "stationary.csv",
    }
    if state.model.density is not None and mesh.dimension == 1:
        phis = np.asarray(mesh.vertices).reshape(-1)
        rho = np.asarray(state.model.density(phis), dtype=float)
        edges = mesh.edges
        oracle_cells = 0.5 * (rho[edges[:, 0]] + rho[edges[:, 1]])
        oracle_cells /= float(np.sum(oracle_cells * mesh.primal_volumes[top]))
        result["oracle_max_rel_deviation"] = float(
            np.max(np.abs(vec - oracle_cells)) / np.max(np.abs(oracle_cells))
        )
    with open(out_dir / "stationary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "density"])
        for i, v in enumerate(vec):
            writer.writerow([i, format_float(v)])
    return result


def _task_morse(state: _RunState, out_dir: Path) -> Dict:
    model = state.model
    points = find_critical_points(model.mesh, model.flow)
    ph = poincare_hopf_sum(points)
    result = {
        "n_critical_points": len(points),
        "points": [
            {
                "location": [float(x) for x in p.location],
                "delta": p.delta,
                "sign": p.sign,
                "hyperbolic": bool(p.hyperbolic),
                "eigenvalues": [complex(z) for z in p.eigenvalues],
            }
            for p in points
        ],
        "poincare_hopf_sum": ph,
        "euler_characteristic": model.mesh.euler_characteristic(),
    }
    if "witten" in state.config.tasks or "spectrum" in state.config.tasks:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result["matches_witten_index"] = bool(
                ph == witten_index(state.spectrum, state.config.tau0)
            )
    if state.config.morse_epsilons and model.langevin:
        scan = instanton_splitting_scan(model, state.config.morse_epsilons)
        result["splitting_scan"] = {
            "epsilons": list(scan.epsilons),
            "splittings": list(scan.splittings),
            "first_nontunneling": list(scan.first_nontunneling),
            "n_minima": scan.n_minima,
            "strictly_decreasing": scan.strictly_decreasing,
            "convex_log_trend": scan.convex_log_trend,
        }
    return result


def _task_simulate(state: _RunState, out_dir: Path) -> Dict:
    model = state.model
    if model.drift is None:
        raise ValidationError("simulation needs a model with a closed-form drift")
    sim = state.config.sim
    ens = simulate_sde(
        model,
        dt=float(sim["dt"]),
        steps=int(sim["steps"]),
        n_paths=int(sim["n_paths"]),
        seed=int(sim["seed"]),
        store_every=int(sim["store_every"]),
    )
    result = {
        "dt": ens.dt,
        "steps": ens.n_steps,
        "n_paths": ens.n_paths,
        "seed": ens.seed,
        "store_every": ens.store_every,
    }
    if model.mesh.dimension == 1:
        hist = stationary_histogram(ens, bins=int(sim["bins"]))
        result["histogram"] = {
            "bins": len(hist.counts),
            "n_samples": hist.n_samples,
            "csv": "histogram.csv",
        }
        if model.density is not None:
            result["histogram"]["tv_distance_to_oracle"] = tv_distance_to_density(
                hist, model.density
            )
        with open(out_dir / "histogram.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_lo", "bin_hi", "count", "density"])
            for b in range(len(hist.counts)):
                writer.writerow([
                    format_float(hist.bin_edges[b]),
                    format_float(hist.bin_edges[b + 1]),
                    int(hist.counts[b]),
                    format_float(hist.density[b]),
                ])
    if sim.get("autocorrelation"):
        window = sim.get("fit_window")
        fit = autocorrelation_decay(
            ens, fit_window=tuple(window) if window else None
        )
        result["autocorrelation"] = {
            "rate": fit.rate,
            "frequency": fit.frequency,
            "window": list(fit.window),
            "n_lags": fit.n_lags,
        }
    return result


def _task_sweep(state: _RunState, out_dir: Path) -> Dict:
    return sweep_epsilon(
        state.model,
        state.config.sweep_epsilons,
        backend=state.config.backend,
        tau_gamma=state.config.tau_gamma,
        tau_e=state.config.tau_e,
    )


def sweep_epsilon(model: ModelSpec, epsilons, backend: str = "fd",
                  tau_gamma: Optional[float] = None,
                  tau_e: Optional[float] = None) -> Dict:
    """Re-assemble the model across descending noise levels.

    Per level: phase verdict, index, and the attenuation-to-oscillation
    ratio |Gamma|/|E| of the slowest oscillating modes.  When that ratio
    falls below 0.05 at the smallest level the spectrum is flagged as
    condensing onto the imaginary axis; a sweep whose rows never oscillate
    reports no condensation.
    """
    if model.name == "inline":
        raise ValidationError("sweeps need a registered, rebuildable model")
    eps_tuple = tuple(float(e) for e in epsilons)
    if not eps_tuple:
        raise ValidationError("sweep needs at least one noise level")
    _validate_sweep_epsilons(eps_tuple)

    rows: List[Dict] = []
    for eps in eps_tuple:
        m = model.rebuild_at(eps)
        op = assemble_hamiltonian(
            m.mesh, m.flow, m.noise, backend=backend,
            allow_deterministic=m.noise.is_deterministic,
        )
        rep = full_spectrum(op)
        cls = classify_phase(rep, tau_gamma, tau_e)
        oscillating = [en for en in rep.entries if abs(en.e) > cls.tau_e]
        row = {
            "epsilon": eps,
            "verdict": cls.verdict,
            "witten_index": cls.witten_index,
            "n_oscillating": len(oscillating),
            "ratio_gamma_over_e": None,
        }
        if oscillating:
            lam_min = min(abs(en.eigenvalue) for en in oscillating)
            low = [en for en in oscillating
                   if abs(en.eigenvalue) <= (1.0 + 1e-6) * lam_min]
            row["ratio_gamma_over_e"] = max(abs(en.gamma) / abs(en.e) for en in low)
        rows.append(row)

    ratios = [r["ratio_gamma_over_e"] for r in rows]
    if ratios[-1] is None:
        condensation = False
        note = "no condensation: no oscillating modes at the smallest level"
    else:
        condensation = bool(ratios[-1] < 0.05)
        note = (
            "slow modes condense onto the imaginary axis"
            if condensation else "no condensation at the smallest level"
        )
    return {"rows": rows, "condensation": condensation, "note": note}


_TASK_FNS = {
    "spectrum": _task_spectrum,
    "classify": _task_classify,
    "witten": _task_witten,
    "stationary": _task_stationary,
    "morse": _task_morse,
    "simulate": _task_simulate,
    "sweep": _task_sweep,
}


# ----------------------------------------------------------------------
# run driver
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ReportDocument:
    data: Dict
    out_dir: Path
    timings: Dict

    @property
    def path(self) -> Path:
        return self.out_dir / "report.json"

    def to_json(self) -> str:
        return canonical_json(self.data)


def run(config: RunConfig, out_dir=None) -> ReportDocument:
    """Execute the configured tasks in declared order and write the report.

    Writes ``report.json`` (byte-stable) plus per-task CSVs into the output
    directory, and wall-clock timings into the ``timings.json`` sidecar.
    """
    out = Path(out_dir if out_dir is not None else (config.out_dir or "."))
    out.mkdir(parents=True, exist_ok=True)
    model = _resolve_model(config)
    state = _RunState(config, model)

    results: Dict[str, Dict] = {}
    timings: Dict[str, float] = {}
    t_all = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for task in config.tasks:
            t0 = time.perf_counter()
            results[task] = _TASK_FNS[task](state, out)
            timings[task] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_all

    data = {
        "config": config.raw,
        "model": {"name": model.name, "params": model.params},
        "results": results,
        "warnings": sorted(
            f"{w.category.__name__}: {w.message}" for w in caught
        ),
        "versions": {
            "package": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    doc = ReportDocument(data=data, out_dir=out, timings=timings)
    with open(doc.path, "w", encoding="utf-8") as fh:
        fh.write(doc.to_json())
    with open(out / "timings.json", "w", encoding="utf-8") as fh:
        json.dump({k: round(v, 6) for k, v in timings.items()}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    return doc
