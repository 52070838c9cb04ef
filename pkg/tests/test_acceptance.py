"""End-to-end acceptance checks, one test per criterion.

Each test enforces its own runtime budget.  A summary line per criterion is
printed at the end of the pytest session (see conftest.py).
"""

import math
import time
import textwrap

import numpy as np
import pytest

from kcosym import (
    BaseVectorField,
    ChartPoint,
    ConcentratedGauge,
    Dimensions,
    KTangent,
    QuadraticHamiltonian,
    SymmetricGauge,
    WaveParams,
    bracket_field,
    build_hdw,
    complete_lift,
    conserved_from_killing,
    conserved_from_noether,
    contract_eta,
    contract_omega,
    divergence,
    hdw_residual,
    integrate_wave,
    kernel_dimension,
    kernel_residual,
    lie_bracket,
    noether_check,
    read_section_csv,
    reeb,
    sample_box,
    wave_grid,
    wave_hamiltonian,
    write_section_csv,
)
from kcosym.cli import EXIT_FAIL, EXIT_INVALID, EXIT_OK, main
from kcosym.fields import wave_residual, wave_terms_scale
from kcosym.symmetry import component_field

TOL = 1e-8
RANGE = [(k, n) for k in range(1, 6) for n in range(1, 5)]


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f} s, budget {self.seconds} s"


def report(number, **values):
    print(f"criterion {number}: " + " ".join(f"{k}={v}" for k, v in values.items()))


def plane_wave_runs():
    """Numerical 1+1D plane waves at 64, 128, 256 nodes, CFL 0.5, on [0, 2pi] x [0, 1]."""
    params = WaveParams(1.0, 1.0, 1, np.sin, lambda x: -np.cos(x))
    runs = []
    for nx in (64, 128, 256):
        grid = wave_grid(nx, cfl=0.5, t_final=1.0, length=2 * math.pi)
        runs.append(integrate_wave(params, grid))
    return runs


def ratios(values):
    return [values[i] / values[i + 1] for i in range(len(values) - 1)]


def random_constant_metrics(rng):
    k, n = int(rng.integers(1, 5)), int(rng.integers(1, 4))
    g = []
    for _ in range(k):
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        g.append(Q @ np.diag(rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n)) @ Q.T)
    K = rng.standard_normal((n, n))
    K = K + K.T
    return QuadraticHamiltonian(
        np.array(g), potential=lambda t, q: 0.5 * q @ K @ q, potential_grad=lambda t, q: (np.zeros(k), K @ q)
    )


@pytest.mark.criterion(1, "structure identities of the Reeb fields")
def test_criterion_1_structure_identities():
    with Budget(1.0):
        bad = 0
        for k, n in RANGE:
            dims = Dimensions(k, n)
            for A in range(k):
                R = reeb(A, dims)
                for B in range(k):
                    bad += contract_eta(B, R) != (1.0 if A == B else 0.0)
                    bad += bool(np.any(contract_omega(B, R).flat()))
    report(1, violations=bad)
    assert bad == 0


@pytest.mark.criterion(2, "kernel rank equals (k-1)(kn+n)")
def test_criterion_2_kernel_rank():
    with Budget(5.0):
        got = {(k, n): kernel_dimension(Dimensions(k, n), 1e-9) for k, n in RANGE}
    wrong = {kn: d for kn, d in got.items() if d != (kn[0] - 1) * (kn[0] * kn[1] + kn[1])}
    report(2, cases=len(got), mismatches=len(wrong))
    assert not wrong


@pytest.mark.criterion(3, "HDW construction residuals and gauge freedom")
def test_criterion_3_hdw_construction():
    rng = np.random.default_rng(2024)
    systems = [wave_hamiltonian(1.0, 1.0, 3)] + [random_constant_metrics(rng) for _ in range(5)]
    worst = worst_gauge = 0.0
    with Budget(5.0):
        for H in systems:
            dims = H.dims
            Xs, Xc = build_hdw(H, SymmetricGauge()), build_hdw(H, ConcentratedGauge(dims.k - 1))
            for row in rng.uniform(-2.0, 2.0, (1000, dims.N)):
                x = ChartPoint.from_flat(row, dims)
                a, b = Xs(x), Xc(x)
                for X in (a, b):
                    E, c = hdw_residual(H, X, x)
                    worst = max(worst, np.max(np.abs(E)), np.max(np.abs(c.flat())))
                worst_gauge = max(worst_gauge, kernel_residual(a - b))
    report(3, max_residual=f"{worst:.3e}", max_gauge_kernel_residual=f"{worst_gauge:.3e}")
    assert worst <= 1e-12
    assert worst_gauge <= 1e-10


@pytest.mark.criterion(4, "1+1D plane wave converges at second order")
def test_criterion_4_wave_convergence():
    with Budget(10.0):
        runs = plane_wave_runs()
        errs = []
        for s in runs:
            T, X = s.grid.mesh()
            errs.append(float(np.max(np.abs(s.psi[..., 0] - np.sin(X - T)))))
    r = ratios(errs)
    report(4, errors=[f"{e:.3e}" for e in errs], ratios=[f"{x:.3f}" for x in r])
    assert all(3.6 <= x <= 4.4 for x in r)
    assert errs[-1] <= 2e-3


@pytest.mark.criterion(5, "Killing current is conserved at O(h^2) and matches the wave residual")
def test_criterion_5_conservation():
    F = conserved_from_killing(BaseVectorField.translation(Dimensions(2, 1), [1.0]))
    with Budget(10.0):
        divs, rel = [], []
        for s in plane_wave_runs():
            d = divergence(F, s)
            divs.append(float(np.max(np.abs(d))))
            # relative to the size of the terms that cancel in the residual
            rel.append(float(np.max(np.abs(d - wave_residual(s, 1.0, 1.0))) / wave_terms_scale(s, 1.0, 1.0)))
    r = ratios(divs)
    report(5, max_div=[f"{v:.3e}" for v in divs], ratios=[f"{x:.3f}" for x in r], rel_gap=[f"{v:.2e}" for v in rel])
    assert all(3.6 <= x <= 4.4 for x in r)
    assert max(rel) <= 0.05


@pytest.mark.criterion(6, "Noether check of the translation lift and its failure under a potential")
def test_criterion_6_noether_verification():
    with Budget(5.0):
        H = wave_hamiltonian(1.0, 1.0, 3)
        Y = complete_lift(BaseVectorField.translation(H.dims, [1.0]))
        samples = sample_box(H.dims, count=256, seed=0)
        free = noether_check(Y, H, samples, TOL)
        HV = QuadraticHamiltonian(
            H.metrics, potential=lambda t, q: float(q @ q), potential_grad=lambda t, q: (np.zeros(4), 2 * q)
        )
        forced = noether_check(Y, HV, samples, TOL)
    worst_dV = max(abs(2 * x.q[0]) for x in samples)
    report(6, free=free.verdicts, forced_H_residual=f"{forced.residual_H:.6e}", max_dV=f"{worst_dV:.6e}")
    assert free.passed
    assert not forced.verdicts["hamiltonian"] and forced.verdicts["omega"] and forced.verdicts["eta"]
    assert abs(forced.residual_H - worst_dV) <= 1e-6


@pytest.mark.criterion(7, "Noether and Killing currents agree; dF = i(Y)omega")
def test_criterion_7_current_consistency():
    with Budget(5.0):
        H = wave_hamiltonian(1.0, 1.0, 3)
        Z = BaseVectorField.translation(H.dims, [1.0])
        Y = complete_lift(Z)
        samples = sample_box(H.dims, count=256, seed=1)
        Fn, Fk = conserved_from_noether(Y, H, samples, TOL), conserved_from_killing(Z)
        gap = max(float(np.max(np.abs(Fn(x) - Fk(x)))) for x in samples)
        fd_err = 0.0
        for x in samples:
            v = Y(x)
            for A in range(H.dims.k):
                fd_err = max(fd_err, float(np.max(np.abs(Fn.gradient(A, x).flat() - contract_omega(A, v).flat()))))
    bound = 10 * Y.fd_step**2
    report(7, current_gap=f"{gap:.3e}", fd_error=f"{fd_err:.3e}", fd_bound=f"{bound:.3e}")
    assert gap <= 1e-9
    assert fd_err <= bound


@pytest.mark.criterion(8, "brackets of symmetries stay symmetries and preserve the HDW kernel")
def test_criterion_8_brackets():
    with Budget(5.0):
        flat = QuadraticHamiltonian(np.array([np.eye(3), -np.eye(3)]))
        samples = sample_box(flat.dims, count=64, seed=2)
        Y1 = complete_lift(BaseVectorField.rotation(flat.dims, 0, 1))
        Y2 = complete_lift(BaseVectorField.rotation(flat.dims, 1, 2))
        rep = noether_check(bracket_field(Y1, Y2), flat, samples, 10 * TOL)

        H = wave_hamiltonian(1.0, 1.0, 3)
        Y = complete_lift(BaseVectorField.translation(H.dims, [1.0]))
        X = build_hdw(H)
        fields = [component_field(X, A, H.dims) for A in range(H.dims.k)]
        worst = 0.0
        for x in sample_box(H.dims, count=64, seed=3):
            worst = max(worst, kernel_residual(KTangent([lie_bracket(Y, XA, x) for XA in fields])))
    report(8, bracket_verdicts=rep.verdicts, kernel_residual=f"{worst:.3e}")
    assert rep.passed
    assert worst <= 1e-8


@pytest.mark.criterion(9, "CLI exit codes and bit-exact CSV round trip")
def test_criterion_9_cli_contract(tmp_path, capsys):
    def cfg(name, text):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text))
        return str(path)

    malformed = cfg("malformed.yaml", "system: {type: wave, sigma: [\n")
    with Budget(5.0):
        codes = {
            "wave/pass": main(["wave", "--out", str(tmp_path / "w")]),
            "wave/fail": main(
                ["wave", "--refine", "1", "--config", cfg("w.yaml", "checks: {divergence: 1.0e-12}\n"), "--out", str(tmp_path / "wf")]
            ),
            "wave/malformed": main(["wave", "--config", malformed, "--out", str(tmp_path / "wm")]),
            "check-noether/pass": main(["check-noether", "--out", str(tmp_path / "n")]),
            "check-noether/fail": main(
                ["check-noether", "--config", cfg("r.yaml", "field: {family: reeb, index: 0}\n"), "--out", str(tmp_path / "nf")]
            ),
            "check-noether/malformed": main(
                ["check-noether", "--config", cfg("b.yaml", "field: {family: boost}\n"), "--out", str(tmp_path / "nm")]
            ),
            "kernel-dim/pass": main(["kernel-dim", "2", "1"]),
            "kernel-dim/malformed": main(["kernel-dim", "0", "1"]),
        }
        section = read_section_csv(tmp_path / "w" / "section.csv")
        write_section_csv(section, tmp_path / "again.csv")
        again = read_section_csv(tmp_path / "again.csv")
    capsys.readouterr()
    expected = {
        "wave/pass": EXIT_OK,
        "wave/fail": EXIT_FAIL,
        "wave/malformed": EXIT_INVALID,
        "check-noether/pass": EXIT_OK,
        "check-noether/fail": EXIT_FAIL,
        "check-noether/malformed": EXIT_INVALID,
        "kernel-dim/pass": EXIT_OK,
        "kernel-dim/malformed": EXIT_INVALID,
    }
    same_bytes = (tmp_path / "w" / "section.csv").read_bytes() == (tmp_path / "again.csv").read_bytes()
    report(9, codes=codes, csv_bytes_identical=same_bytes)
    assert codes == expected
    assert same_bytes
    assert np.array_equal(section.psi, again.psi) and np.array_equal(section.momenta, again.momenta)
