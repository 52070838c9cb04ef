import math

import numpy as np
import pytest

from kcosym import (
    BaseGrid,
    BaseVectorField,
    ConservedCurrent,
    Dimensions,
    QuadraticHamiltonian,
    SectionGrid,
    WaveParams,
    conserved_from_killing,
    divergence,
    hdw_residual_on_section,
    integrate_quadratic,
    integrate_wave,
    momenta_from_section,
    read_section_csv,
    wave_grid,
    wave_hamiltonian,
    write_section_csv,
)
from kcosym.fields import check_cfl, leapfrog_evolve, wave_residual, wave_terms_scale

TWO_PI = 2 * math.pi


def plane_wave(sigma=1.0, tau=1.0, d=1):
    c = math.sqrt(tau / sigma)
    return WaveParams(sigma, tau, d, lambda *xs: np.sin(xs[0]), lambda *xs: -c * np.cos(xs[0]))


def killing_current(k):
    return conserved_from_killing(BaseVectorField.translation(Dimensions(k, 1), [1.0]))


def refinement_ratios(values):
    return [values[i] / values[i + 1] for i in range(len(values) - 1)]


# ---- grids ------------------------------------------------------------------


def test_grid_spacing_and_coords():
    g = BaseGrid([(0.0, 1.0, 11), (0.0, TWO_PI, 8)])
    assert g.boundary == ("dirichlet", "periodic")
    assert g.spacing == pytest.approx((0.1, TWO_PI / 8))
    assert g.coords(0)[-1] == 1.0
    assert g.coords(1)[-1] == pytest.approx(TWO_PI * 7 / 8)
    assert g.interior() == (slice(1, -1), slice(None))


@pytest.mark.parametrize(
    "extents,boundary",
    [([(0, 1, 2)], None), ([(1, 0, 5)], None), ([(0, 1, 5)], ["wrap"]), ([(0, 1, 5)], ["dirichlet", "periodic"])],
)
def test_grid_validation(extents, boundary):
    with pytest.raises(ValueError):
        BaseGrid(extents, boundary)


def test_wave_grid_respects_cfl():
    for d in (1, 2, 3):
        g = wave_grid(16, cfl=0.5, spatial_dims=d, speed=2.0)
        assert check_cfl(WaveParams(1.0, 4.0, d, np.zeros_like, np.zeros_like), g) <= 0.5 + 1e-12


def test_cfl_violation_rejected():
    g = BaseGrid([(0.0, 1.0, 3), (0.0, TWO_PI, 64)], ["dirichlet", "periodic"])
    with pytest.raises(ValueError, match="CFL"):
        integrate_wave(plane_wave(), g)


def test_wave_params_validation():
    with pytest.raises(ValueError):
        WaveParams(0.0, 1.0, 1, np.sin, np.cos)
    with pytest.raises(ValueError):
        WaveParams(1.0, 1.0, 4, np.sin, np.cos)


# ---- wave integration -------------------------------------------------------


def test_plane_wave_second_order():
    errs = []
    for nx in (32, 64, 128):
        g = wave_grid(nx, 0.5, 1.0)
        s = integrate_wave(plane_wave(), g)
        T, X = g.mesh()
        errs.append(np.max(np.abs(s.psi[..., 0] - np.sin(X - T))))
    assert all(3.6 <= r <= 4.4 for r in refinement_ratios(errs)), errs


def test_standing_wave_with_unequal_coefficients():
    sigma, tau = 2.0, 0.5
    c = math.sqrt(tau / sigma)
    params = WaveParams(sigma, tau, 1, np.sin, np.zeros_like)
    errs = []
    for nx in (32, 64):
        g = wave_grid(nx, 0.5, 2.0, speed=c)
        s = integrate_wave(params, g)
        T, X = g.mesh()
        errs.append(np.max(np.abs(s.psi[..., 0] - np.sin(X) * np.cos(c * T))))
    assert errs[1] < 2e-3 and 3.5 <= errs[0] / errs[1] <= 4.5


def test_zero_data_gives_zero_field():
    g = wave_grid(16)
    s = integrate_wave(WaveParams(1.0, 1.0, 1, np.zeros_like, np.zeros_like), g)
    assert not np.any(s.psi) and not np.any(s.momenta)


def test_two_dimensional_plane_wave_converges():
    params = WaveParams(1.0, 1.0, 2, lambda x, y: np.sin(x + y), lambda x, y: -math.sqrt(2) * np.cos(x + y))
    errs = []
    for nx in (16, 32):
        g = wave_grid(nx, 0.5, 0.5, spatial_dims=2)
        s = integrate_wave(params, g)
        T, X, Y = g.mesh()
        errs.append(np.max(np.abs(s.psi[..., 0] - np.sin(X + Y - math.sqrt(2) * T))))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_dirichlet_spatial_boundary_pinned():
    g = wave_grid(33, 0.5, 1.0, length=math.pi, boundary="dirichlet")
    s = integrate_wave(WaveParams(1.0, 1.0, 1, np.sin, np.zeros_like), g)
    T, X = g.mesh()
    assert np.max(np.abs(s.psi[:, 0, 0])) <= 1e-15 and np.max(np.abs(s.psi[:, -1, 0])) <= 1e-15
    assert np.max(np.abs(s.psi[..., 0] - np.sin(X) * np.cos(T))) < 5e-3


def test_wave_momenta_relations():
    sigma, tau = 1.5, 0.6
    g = wave_grid(32, 0.5, 1.0, speed=math.sqrt(tau / sigma))
    s = integrate_wave(plane_wave(sigma, tau), g)
    u = s.psi[..., 0]
    h = g.spacing
    inner = (slice(1, -1), slice(None))
    dt = (u[2:] - u[:-2]) / (2 * h[0])
    dx = (np.roll(u, -1, 1) - np.roll(u, 1, 1)) / (2 * h[1])
    assert np.allclose(s.momenta[inner][..., 0, 0], sigma * dt, rtol=0, atol=1e-13)
    assert np.allclose(s.momenta[..., 1, 0], -tau * dx, rtol=0, atol=1e-13)


# ---- general quadratic systems ----------------------------------------------


def test_quadratic_reproduces_wave_bit_for_bit():
    for d in (1, 2):
        params = WaveParams(1.3, 0.8, d, lambda *xs: np.cos(sum(xs)), lambda *xs: np.sin(xs[0]))
        g = wave_grid(12, 0.5, 0.5, spatial_dims=d, speed=params.speed)
        a = integrate_wave(params, g)
        b = integrate_quadratic(wave_hamiltonian(1.3, 0.8, d), g, params.initial_displacement, params.initial_velocity)
        assert np.array_equal(a.psi, b.psi) and np.array_equal(a.momenta, b.momenta)


def test_free_motion_is_exact():
    H = QuadraticHamiltonian(np.diag([1.0, 2.0])[None])
    g = BaseGrid([(0.0, 3.0, 31)])
    s = integrate_quadratic(H, g, lambda: np.array([1.0, -2.0]), lambda: np.array([0.5, 0.25]))
    t = g.coords(0)[:, None]
    assert np.allclose(s.psi, np.array([1.0, -2.0]) + t * np.array([0.5, 0.25]), atol=1e-13, rtol=0)
    assert np.allclose(s.momenta[:, 0], [0.5, 0.5], atol=1e-12)


def test_harmonic_oscillator():
    H = QuadraticHamiltonian([[[1.0]]], potential=lambda t, q: 0.5 * q @ q, potential_grad=lambda t, q: (np.zeros(1), q))
    errs, drifts = [], []
    for m in (201, 401):
        g = BaseGrid([(0.0, 10.0, m)])
        s = integrate_quadratic(H, g, lambda: 1.0, lambda: 0.0)
        t = g.coords(0)
        errs.append(np.max(np.abs(s.psi[:, 0] - np.cos(t))))
        energy = 0.5 * s.momenta[1:-1, 0, 0] ** 2 + 0.5 * s.psi[1:-1, 0] ** 2
        drifts.append(np.max(np.abs(energy - 0.5)))
    assert 3.6 <= errs[0] / errs[1] <= 4.4
    assert max(drifts) < 5e-3
    rq, rp = hdw_residual_on_section(H, s)
    assert max(rq.max(), rp.max()) < 1e-3


def test_integrate_quadratic_refuses_unsupported():
    g = BaseGrid([(0.0, 1.0, 11), (0.0, 1.0, 8)])
    q_dep = QuadraticHamiltonian(metric_fn=lambda q: np.array([[[1.0]], [[-1.0]]]), k=2, n=1)
    with pytest.raises(ValueError):
        integrate_quadratic(q_dep, g, np.zeros_like, np.zeros_like)
    with pytest.raises(ValueError):
        integrate_quadratic(QuadraticHamiltonian([[[-1.0]], [[-1.0]]]), g, np.zeros_like, np.zeros_like)
    with pytest.raises(ValueError):
        integrate_quadratic(QuadraticHamiltonian([[[1.0]], [[1.0]]]), g, np.zeros_like, np.zeros_like)
    with pytest.raises(ValueError):
        integrate_quadratic(wave_hamiltonian(1, 1, 2), g, np.zeros_like, np.zeros_like)


def test_leapfrog_time_reversible():
    H = QuadraticHamiltonian(
        np.array([np.eye(2), -np.diag([1.0, 0.5])]),
        potential=lambda t, q: 0.5 * q @ q,
        potential_grad=lambda t, q: (np.zeros(2), q),
    )
    g = BaseGrid([(0.0, 1.0, 41), (0.0, TWO_PI, 32)])
    x = g.coords(1)
    u0 = np.stack([np.sin(x), np.cos(2 * x)], axis=-1)
    u1 = u0 + 0.01 * np.stack([np.cos(x), np.zeros_like(x)], axis=-1)
    prev, cur = leapfrog_evolve(H, g, u0, u1, 200)
    back_prev, back_cur = leapfrog_evolve(H, g, cur, prev, 200, dt=-g.spacing[0])
    assert np.max(np.abs(back_cur - u0)) <= 1e-10
    assert np.max(np.abs(back_prev - u1)) <= 1e-10


def test_periodic_mean_of_time_momentum_conserved():
    g = wave_grid(64, 0.5, 2.0)
    s = integrate_wave(WaveParams(1.0, 1.0, 1, lambda x: np.exp(np.sin(x)), lambda x: np.cos(3 * x) + 0.2), g)
    means = s.momenta[1:-1, :, 0, 0].mean(axis=1)
    assert np.max(np.abs(means - means[0])) <= 1e-10


# ---- momenta, divergence, residuals -----------------------------------------


def test_momenta_from_section_examples():
    g = BaseGrid([(0.0, 1.0, 6), (-1.0, 2.0, 7)], ["dirichlet", "dirichlet"])
    T, X = g.mesh()
    H = QuadraticHamiltonian([[[1.0]], [[1.0]]])
    s = momenta_from_section(SectionGrid(g, T * X, np.zeros(g.shape + (2, 1))), H)
    assert np.allclose(s.momenta[..., 0, 0], X, atol=1e-13)
    assert np.allclose(s.momenta[..., 1, 0], T, atol=1e-13)
    s0 = momenta_from_section(SectionGrid(g, np.full(g.shape, 2.0), np.ones(g.shape + (2, 1))), H)
    assert not np.any(s0.momenta)


def test_boundary_momenta_second_order():
    errs = []
    for m in (11, 21, 41):
        g = BaseGrid([(0.0, 1.0, m), (0.0, 1.0, m)], ["dirichlet", "dirichlet"])
        T, X = g.mesh()
        s = momenta_from_section(SectionGrid(g, np.sin(2 * T + X), np.zeros(g.shape + (2, 1))), QuadraticHamiltonian([[[1.0]], [[1.0]]]))
        errs.append(np.max(np.abs(s.momenta[..., 0, 0] - 2 * np.cos(2 * T + X))))
    assert all(3.5 <= r <= 4.5 for r in refinement_ratios(errs)), errs


def test_divergence_examples():
    g = wave_grid(16)
    s = integrate_wave(plane_wave(), g)
    const = ConservedCurrent(lambda x: np.array([1.0, -2.0]))
    assert not np.any(divergence(const, s))
    coord = ConservedCurrent(lambda x: np.array([x.t[0], 0.0]))
    assert np.allclose(divergence(coord, s), 1.0, atol=1e-12)


def test_killing_current_divergence_and_wave_residual():
    divs, rel = [], []
    F = killing_current(2)
    for nx in (64, 128, 256):
        g = wave_grid(nx, 0.5, 1.0)
        s = integrate_wave(plane_wave(), g)
        d = divergence(F, s)
        divs.append(np.max(np.abs(d)))
        rel.append(np.max(np.abs(d - wave_residual(s, 1.0, 1.0))) / wave_terms_scale(s, 1.0, 1.0))
    assert all(3.6 <= r <= 4.4 for r in refinement_ratios(divs)), divs
    assert max(rel) <= 0.05


def test_hdw_residual_on_sections():
    H = wave_hamiltonian(1.0, 1.0, 1)
    zero = SectionGrid(wave_grid(8), np.zeros(wave_grid(8).shape), np.zeros(wave_grid(8).shape + (2, 1)))
    rq, rp = hdw_residual_on_section(H, zero)
    assert not np.any(rq) and not np.any(rp)
    exact, numeric = [], []
    for nx in (32, 64, 128):
        g = wave_grid(nx, 0.5, 1.0)
        T, X = g.mesh()
        mom = np.stack([-np.cos(X - T), -np.cos(X - T)], axis=-1)[..., None]
        rq, rp = hdw_residual_on_section(H, SectionGrid(g, np.sin(X - T), mom))
        exact.append(max(rq.max(), rp.max()))
        rq, rp = hdw_residual_on_section(H, integrate_wave(plane_wave(), g))
        numeric.append(max(rq.max(), rp.max()))
    assert all(3.5 <= r <= 4.5 for r in refinement_ratios(exact)), exact
    assert all(3.5 <= r <= 4.5 for r in refinement_ratios(numeric)), numeric


# ---- CSV --------------------------------------------------------------------


def test_csv_round_trip_bit_exact(tmp_path):
    g = wave_grid(12, 0.5, 0.7, spatial_dims=2)
    params = WaveParams(1.0, 1.0, 2, lambda x, y: np.sin(x) * np.cos(y) / 3, lambda x, y: np.exp(-x))
    s = integrate_wave(params, g)
    path = tmp_path / "section.csv"
    write_section_csv(s, path)
    header = path.read_text().splitlines()[0]
    assert header == "t1,t2,t3,q1,p1_1,p2_1,p3_1"
    back = read_section_csv(path, grid=g)
    assert np.array_equal(back.psi, s.psi) and np.array_equal(back.momenta, s.momenta)
    inferred = read_section_csv(path)
    assert inferred.grid.shape == g.shape and np.array_equal(inferred.psi, s.psi)
    assert np.allclose(inferred.grid.spacing, g.spacing, rtol=1e-12)


def test_csv_multi_component_layout(tmp_path):
    g = BaseGrid([(0.0, 1.0, 3), (0.0, 1.0, 4)], ["dirichlet", "dirichlet"])
    psi = np.arange(np.prod(g.shape) * 2, dtype=float).reshape(g.shape + (2,)) / 7
    mom = np.arange(np.prod(g.shape) * 4, dtype=float).reshape(g.shape + (2, 2)) / 11
    s = SectionGrid(g, psi, mom)
    path = tmp_path / "s.csv"
    write_section_csv(s, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t1,t2,q1,q2,p1_1,p1_2,p2_1,p2_2"
    row = [float(v) for v in lines[1 + 5].split(",")]  # node (1, 1)
    assert row[2:4] == list(psi[1, 1]) and row[4:] == list(mom[1, 1].ravel())
    back = read_section_csv(path, boundary=["dirichlet", "dirichlet"])
    assert np.array_equal(back.momenta, mom)


def test_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_section_csv(path)
