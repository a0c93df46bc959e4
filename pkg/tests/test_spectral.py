"""Non-normal eigendecomposition, phase verdicts, index counting, pairing."""

import csv
import warnings

import numpy as np
import pytest

import flowspec as fs


def constant_drive_report(a=1.0, eps=0.2, n=64, backend="fd"):
    model = fs.build_model(
        "constant_drive_circle", {"a": a, "epsilon": eps, "n": n}
    )
    op = fs.assemble_hamiltonian(model.mesh, model.flow, model.noise, backend)
    return model, fs.full_spectrum(op)


def test_full_spectrum_against_difference_symbols():
    model, report = constant_drive_report()
    assert report.block_sizes == (64, 64)
    assert report.max_residual() < 1e-10
    assert fs.oracle_spectrum_residual(model, report, "fd") < 1e-12


def test_entry_ordering_and_normalization():
    _, report = constant_drive_report(n=32)
    keys = [(en.gamma, en.e, en.degree) for en in report.entries]
    assert keys == sorted(keys)
    for en in report.entries[:10]:
        np.testing.assert_allclose(np.linalg.norm(en.right), 1.0, rtol=1e-12)
        j = int(np.argmax(np.abs(en.right)))
        assert abs(en.right[j].imag) < 1e-12  # pinned phase
        assert en.right[j].real > 0


def test_decomposition_is_reproducible():
    _, r1 = constant_drive_report(n=24)
    _, r2 = constant_drive_report(n=24)
    for a, b in zip(r1.entries, r2.entries):
        assert a.eigenvalue == b.eigenvalue
        np.testing.assert_array_equal(a.right, b.right)
        np.testing.assert_array_equal(a.left, b.left)


def test_biorthonormality_within_degenerate_clusters():
    # gradient double well: tunneling doublet is near-degenerate, the
    # joint normalization must still give <L_i, R_j> = delta_ij
    model = fs.build_model(
        "langevin_double_well_circle", {"depth": 1.0, "epsilon": 0.2, "n": 64}
    )
    op = fs.assemble_hamiltonian(model.mesh, model.flow, model.noise)
    report = fs.full_spectrum(op)
    assert report.max_residual() < 1e-8
    ents = [en for en in report.entries if en.degree == 0]
    gram = np.array([[np.vdot(a.left, b.right) for b in ents] for a in ents])
    np.testing.assert_allclose(gram, np.eye(len(ents)), atol=1e-8)


def test_capacity_cap():
    model, _ = constant_drive_report(n=16)
    op = fs.assemble_hamiltonian(model.mesh, model.flow, model.noise)
    with pytest.raises(fs.CapacityError):
        fs.full_spectrum(op, cap=8)


def test_verdicts_on_synthetic_multisets():
    unbroken = fs.synthetic_spectrum([0.0, 0.5 + 0.3j, 0.5 - 0.3j, 1.2])
    assert fs.classify_phase(unbroken).verdict == "unbroken-Markovian"

    broken = fs.synthetic_spectrum([0.0, 0.7j, -0.7j, 0.4])
    cls = fs.classify_phase(broken)
    assert cls.verdict == "Q-broken"
    assert len(cls.evidence) == 3  # all three surviving modes are reported

    gapped = fs.synthetic_spectrum([1.0, 2.0, 3.0])
    assert fs.classify_phase(gapped).verdict == "indeterminate"


def test_verdict_thresholds_are_relative_to_radius():
    # same multiset at wildly different overall scales, same verdicts
    base = np.array([0.0, 0.5 + 0.3j, 0.5 - 0.3j, 1.2])
    for s in (1e-6, 1.0, 1e6):
        rep = fs.synthetic_spectrum(base * s)
        assert fs.classify_phase(rep).verdict == "unbroken-Markovian"


def test_explicit_tau_overrides():
    rep = fs.synthetic_spectrum([0.0, 1e-5, 1.0])
    assert fs.zero_mode_counts(rep, tau0=1e-4) == (2, 0)
    assert fs.zero_mode_counts(rep, tau0=1e-6) == (1, 0)
    with pytest.raises(ValueError):
        fs.classify_phase(rep, tau_gamma=-1.0)


def test_missing_stationary_mode_is_a_hard_error():
    rep = fs.synthetic_spectrum([1.0, 2.0])
    with pytest.raises(fs.ErgodicZeroMissingError):
        fs.physical_states(rep)


def test_gap_ambiguity_warning():
    rep = fs.synthetic_spectrum([0.0, 3e-8, 1.0])  # 3e-8 = 3*tau0, inside the band
    with pytest.warns(fs.GapAmbiguityWarning):
        idx = fs.witten_index(rep)
    assert idx == 1
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert fs.witten_index(rep, tau0=1e-12) == 1  # clean gap, no warning


def test_index_and_counts_on_gradient_double_well():
    model = fs.build_model(
        "langevin_double_well_circle", {"depth": 1.0, "epsilon": 0.2, "n": 64}
    )
    op = fs.assemble_hamiltonian(model.mesh, model.flow, model.noise)
    report = fs.full_spectrum(op)
    assert fs.zero_mode_counts(report) == (1, 1)
    assert fs.witten_index(report) == 0
    assert fs.classify_phase(report).verdict == "unbroken-Markovian"


def test_nonzero_spectrum_pairs_across_adjacent_degrees():
    _, report = constant_drive_report()
    pairing = fs.susy_pairing_check(report)
    assert pairing.n_bonds == 63
    assert pairing.unpaired == ()
    assert pairing.multiset_equal is True
    assert pairing.max_mismatch < 1e-10 * report.spectral_radius


def test_pairing_on_torus_splits_by_adjacency():
    model = fs.build_model(
        "torus_shear_model",
        {"ax": 1.0, "ay": np.sqrt(2.0), "epsilon": 0.2, "n": 6},
    )
    op = fs.assemble_hamiltonian(model.mesh, model.flow, model.noise)
    report = fs.full_spectrum(op)
    pairing = fs.susy_pairing_check(report)
    assert pairing.unpaired == ()
    # 36 modes at the end degrees (one zero each), 72 in the middle
    # (two zeros): 35 bonds on each adjacency
    assert pairing.bonds_by_adjacency == ((0, 1, 35), (1, 2, 35))


def test_conjugate_closure_of_real_operator():
    _, report = constant_drive_report(n=48)
    assert fs.conjugate_closure_residual(report) < 1e-10


def test_spectrum_csv_layout(tmp_path):
    _, report = constant_drive_report(n=16)
    path = tmp_path / "spec.csv"
    fs.export_spectrum_csv(report, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["degree", "index", "gamma", "e", "pair_id", "physical_flag"]
    assert len(rows) == 1 + 32
    body = rows[1:]
    # indices are the deterministic global ordering
    assert [int(r[1]) for r in body] == list(range(32))
    # conjugate partners share a pair id, real modes carry -1
    by_id = {}
    for r in body:
        pid = int(r[4])
        if pid >= 0:
            by_id.setdefault(pid, []).append(float(r[3]))
    for pid, es in by_id.items():
        assert len(es) == 2
        np.testing.assert_allclose(es[0], -es[1], rtol=1e-9)
    # exactly the two stationary modes (one per degree) are flagged physical
    assert sum(int(r[5]) for r in body) == 2
