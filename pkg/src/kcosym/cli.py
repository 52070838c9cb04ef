"""Command-line runs of the solvers and symmetry checks.

Every command reads a YAML config (``--config``), writes its outputs under
``--out`` and prints a line-oriented report

    check=<name> residual=<float> tol=<float> verdict=<pass|fail>

Exit codes: 0 all checks passed, 1 a check failed, 2 invalid input.

Config defaults (any key may be omitted)::

    system:
      type: wave              # wave | quadratic
      sigma: 1.0
      tau: 1.0
      spatial_dims: 1
      profile: {name: plane_wave, amplitude: 1.0, wavenumber: [1]}
                              # plane_wave | standing_wave | gaussian (center, width)
      # quadratic only:
      # metrics: [[[1.0]]]    # k x n x n, constant
      # potential: {type: quadratic, matrix: [[1.0]]}   # V = q.K.q / 2
      # initial_q: [1.0]      # constant initial data, used when no profile is given
      # initial_v: [0.0]
    grid:
      spatial_nodes: 64
      length: 6.283185307179586
      t_final: 1.0
      cfl: 0.5
      boundary: periodic      # periodic | dirichlet (spatial axes)
      # time_nodes: 101       # overrides the CFL-derived count
    checks:                   # name: tolerance
      divergence: 1.0e-2
      hdw_residual: 1.0e-2
      convergence: 0.25       # |observed order - 2|, needs --refine >= 2
      solution_error: 1.0e-2  # plane/standing wave only
    field:                    # check-noether only
      family: translation     # translation | rotation | linear | reeb
      direction: [1.0]        # translation
      plane: [0, 1]           # rotation
      matrix: [[0.0]]         # linear (n x n)
      index: 0                # reeb
    samples: {count: 256, low: -1.0, high: 1.0}
    seed: 0
"""

from __future__ import annotations

import argparse
import math
import sys
import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .chart import Dimensions, TangentVector, kernel_dimension, reeb
from .fields import (
    BaseGrid,
    SectionGrid,
    WaveParams,
    divergence,
    hdw_residual_on_section,
    integrate_quadratic,
    integrate_wave,
    read_section_csv,
    wave_grid,
    write_section_csv,
)
from .hamiltonian import QuadraticHamiltonian, wave_hamiltonian
from .symmetry import (
    BaseVectorField,
    PhaseVectorField,
    complete_lift,
    conserved_from_killing,
    conserved_from_noether,
    killing_check,
    noether_check,
    sample_box,
)

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2

PROFILES = ("plane_wave", "standing_wave", "gaussian")
FAMILIES = ("translation", "rotation", "linear", "reeb")
DEFAULT_CHECKS = {
    "wave": {"divergence": 1e-2, "hdw_residual": 1e-2, "convergence": 0.25, "solution_error": 1e-2},
    "quadratic": {"hdw_residual": 1e-2},
    "check-noether": {"omega": 1e-8, "eta": 1e-8, "hamiltonian": 1e-8, "killing": 1e-8},
    "hdw-residual": {"hdw_residual": 1e-2},
}


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    system: dict
    grid: dict
    checks: dict
    out: Path
    seed: int = 0
    refine: int = 1
    vector_field: dict = dataclasses.field(default_factory=dict)
    samples: dict = dataclasses.field(default_factory=dict)
    section: Optional[str] = None


@dataclass
class CheckResult:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual)) and self.residual <= self.tol

    def line(self) -> str:
        verdict = "pass" if self.passed else "fail"
        return f"check={self.name} residual={self.residual:.6e} tol={self.tol:.6e} verdict={verdict}"


@dataclass
class Report:
    command: str
    seed: int
    checks: list = dataclasses.field(default_factory=list)
    notes: list = dataclasses.field(default_factory=list)

    def add(self, name, residual, tol):
        self.checks.append(CheckResult(name, float(residual), float(tol)))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def text(self) -> str:
        lines = [f"# command={self.command} seed={self.seed}"]
        lines += [f"# {note}" for note in self.notes]
        lines += [c.line() for c in self.checks]
        lines.append(f"overall={'pass' if self.passed else 'fail'}")
        return "\n".join(lines) + "\n"


def _positive(value, name):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise ConfigError(f"{name} must be positive and finite, got {value!r}")
    return v


def load_config(args, command: str) -> RunConfig:
    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    system = dict(raw.get("system") or {})
    system.setdefault("type", "wave")
    if system["type"] not in ("wave", "quadratic"):
        raise ConfigError(f"unknown system type {system['type']!r}")
    checks = dict(DEFAULT_CHECKS[command])
    checks.update(raw.get("checks") or {})
    if args.tol is not None:
        checks = {name: args.tol for name in checks}
    checks = {name: _positive(tol, f"tolerance of check {name!r}") for name, tol in checks.items()}
    profile = system.get("profile")
    if profile is not None:
        if not isinstance(profile, dict) or profile.get("name") not in PROFILES:
            raise ConfigError(f"unknown initial profile {profile!r}; choose one of {', '.join(PROFILES)}")
    seed = int(args.seed if args.seed is not None else raw.get("seed", 0))
    refine = int(args.refine if args.refine is not None else raw.get("refine", 3 if command == "wave" else 1))
    if refine < 1:
        raise ConfigError("--refine must be at least 1")
    out = Path(args.out if args.out is not None else raw.get("output", {}).get("dir", "kcosym-out"))
    return RunConfig(
        system=system,
        grid=dict(raw.get("grid") or {}),
        checks=checks,
        out=out,
        seed=seed,
        refine=refine,
        vector_field=dict(raw.get("field") or {}),
        samples=dict(raw.get("samples") or {}),
        section=raw.get("section"),
    )


def _spatial_dims(cfg: RunConfig) -> int:
    if cfg.system["type"] == "wave":
        return int(cfg.system.get("spatial_dims", 1))
    return _quadratic(cfg).dims.k - 1


def _profile(cfg: RunConfig, speed: float):
    """(displacement, velocity, exact or None) as vectorized callables."""
    prof = dict(cfg.system.get("profile") or {"name": "plane_wave"})
    d = _spatial_dims(cfg)
    amp = float(prof.get("amplitude", 1.0))
    name = prof["name"]
    if name == "gaussian":
        center = np.broadcast_to(np.asarray(prof.get("center", cfg.grid.get("length", 2 * math.pi) / 2), float), (d,))
        width = _positive(prof.get("width", 0.5), "gaussian width")

        def bump(*xs):
            r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
            return amp * np.exp(-r2 / (2 * width**2))

        return bump, lambda *xs: np.zeros(np.shape(xs[0]) if xs else ()), None
    kv = np.zeros(d)
    kv_in = np.atleast_1d(np.asarray(prof.get("wavenumber", [1.0]), float))
    kv[: min(d, kv_in.size)] = kv_in[:d]
    omega = speed * float(np.linalg.norm(kv))

    def phase(*xs):
        return sum(kk * x for kk, x in zip(kv, xs))

    if name == "plane_wave":
        return (
            lambda *xs: amp * np.sin(phase(*xs)),
            lambda *xs: -amp * omega * np.cos(phase(*xs)),
            lambda t, *xs: amp * np.sin(phase(*xs) - omega * t),
        )
    return (
        lambda *xs: amp * np.sin(phase(*xs)),
        lambda *xs: np.zeros(np.shape(xs[0]) if xs else ()),
        lambda t, *xs: amp * np.sin(phase(*xs)) * np.cos(omega * t),
    )


def _grid(cfg: RunConfig, level: int, speed: float, spatial_dims: int) -> BaseGrid:
    g = cfg.grid
    if "extents" in g:
        extents = [tuple(e) for e in g["extents"]]
        ext = [extents[0]] + [(a, b, int(m) * 2**level) for a, b, m in extents[1:]]
        if level:
            a, b, m = extents[0]
            ext[0] = (a, b, (int(m) - 1) * 2**level + 1)
        return BaseGrid(ext, g.get("boundary_flags"))
    nodes = int(g.get("spatial_nodes", 64)) * 2**level
    if "time_nodes" in g:
        length = float(g.get("length", 2 * math.pi))
        t_final = float(g.get("t_final", 1.0))
        tn = (int(g["time_nodes"]) - 1) * 2**level + 1
        b = g.get("boundary", "periodic")
        return BaseGrid([(0.0, t_final, tn)] + [(0.0, length, nodes)] * spatial_dims, ["dirichlet"] + [b] * spatial_dims)
    return wave_grid(
        nodes,
        cfl=_positive(g.get("cfl", 0.5), "cfl"),
        t_final=_positive(g.get("t_final", 1.0), "t_final"),
        length=_positive(g.get("length", 2 * math.pi), "length"),
        spatial_dims=spatial_dims,
        speed=speed,
        boundary=g.get("boundary", "periodic"),
    )


def _quadratic(cfg: RunConfig) -> QuadraticHamiltonian:
    s = cfg.system
    if s["type"] == "wave":
        return wave_hamiltonian(
            _positive(s.get("sigma", 1.0), "sigma"), _positive(s.get("tau", 1.0), "tau"), int(s.get("spatial_dims", 1))
        )
    if "metrics" not in s:
        raise ConfigError("quadratic system needs 'metrics'")
    g = np.asarray(s["metrics"], dtype=float)
    pot = s.get("potential") or {"type": "none"}
    kind = pot.get("type", "none")
    if kind == "none":
        return QuadraticHamiltonian(g)
    if kind != "quadratic":
        raise ConfigError(f"unknown potential type {kind!r}")
    K = np.atleast_2d(np.asarray(pot["matrix"], dtype=float))
    k = g.shape[0] if g.ndim == 3 else 1
    return QuadraticHamiltonian(
        g,
        potential=lambda t, q: 0.5 * float(q @ K @ q),
        potential_grad=lambda t, q: (np.zeros(k), K @ q),
    )


def _wave_params(cfg: RunConfig) -> WaveParams:
    s = cfg.system
    sigma, tau = _positive(s.get("sigma", 1.0), "sigma"), _positive(s.get("tau", 1.0), "tau")
    disp, vel, _ = _profile(cfg, math.sqrt(tau / sigma))
    return WaveParams(sigma, tau, int(s.get("spatial_dims", 1)), disp, vel)


def _killing_current(dims: Dimensions):
    return conserved_from_killing(BaseVectorField.translation(dims, np.ones(dims.n)))


def _finish(report: Report, out: Path) -> int:
    text = report.text()
    sys.stdout.write(text)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(text)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_wave(cfg: RunConfig) -> int:
    if cfg.system["type"] != "wave":
        raise ConfigError("the wave command needs system.type = wave")
    params = _wave_params(cfg)
    H = params.hamiltonian()
    _, _, exact = _profile(cfg, params.speed)
    report = Report("wave", cfg.seed)
    F = _killing_current(H.dims)
    divs, errs = [], []
    for level in range(cfg.refine):
        grid = _grid(cfg, level, params.speed, params.spatial_dims)
        section = integrate_wave(params, grid)
        divs.append(float(np.max(np.abs(divergence(F, section)))))
        if exact is not None:
            T, *X = grid.mesh()
            errs.append(float(np.max(np.abs(section.psi[..., 0] - exact(T, *X)))))
        report.notes.append(f"level={level} grid={list(grid.shape)} max_div={divs[-1]:.6e}")
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_section_csv(section, cfg.out / "section.csv")
    rq, rp = hdw_residual_on_section(H, section)
    report.add("divergence", divs[-1], cfg.checks["divergence"])
    report.add("hdw_residual", max(float(np.max(rq)), float(np.max(rp))), cfg.checks["hdw_residual"])
    if exact is not None and "solution_error" in cfg.checks:
        report.add("solution_error", errs[-1], cfg.checks["solution_error"])
    if cfg.refine >= 2 and "convergence" in cfg.checks:
        orders = [math.log2(a / b) for a, b in zip(divs[:-1], divs[1:])]
        report.notes.append("div_orders=" + ",".join(f"{o:.4f}" for o in orders))
        report.add("convergence", max(abs(o - 2.0) for o in orders), cfg.checks["convergence"])
    return _finish(report, cfg.out)


def _quadratic_initial(cfg: RunConfig, H: QuadraticHamiltonian):
    s = cfg.system
    n = H.dims.n
    if "profile" in s:
        speed = math.sqrt(max(1e-300, -H.metrics[1][0, 0] / H.metrics[0][0, 0])) if H.dims.k > 1 else 1.0
        disp, vel, _ = _profile(cfg, speed)
        return disp, vel
    q0 = np.broadcast_to(np.asarray(s.get("initial_q", np.zeros(n)), float), (n,)).copy()
    v0 = np.broadcast_to(np.asarray(s.get("initial_v", np.zeros(n)), float), (n,)).copy()
    return (lambda *xs: np.broadcast_to(q0, np.shape(xs[0]) + (n,)) if xs else q0), (
        lambda *xs: np.broadcast_to(v0, np.shape(xs[0]) + (n,)) if xs else v0
    )


def _quadratic_grid(cfg: RunConfig, H: QuadraticHamiltonian) -> BaseGrid:
    d = H.dims.k - 1
    if d == 0:
        g = cfg.grid
        return BaseGrid([(0.0, _positive(g.get("t_final", 1.0), "t_final"), int(g.get("time_nodes", 101)))])
    speed = 1.0
    if H.constant_metrics:
        lam1 = np.min(np.linalg.eigvalsh(H.metrics[0]))
        lam = max(float(np.max(-np.linalg.eigvalsh(H.metrics[A]))) for A in range(1, H.dims.k))
        speed = math.sqrt(max(lam, 1e-300) / lam1)
    return _grid(cfg, 0, speed, d)


def cmd_quadratic(cfg: RunConfig) -> int:
    H = _quadratic(cfg)
    grid = _quadratic_grid(cfg, H)
    disp, vel = _quadratic_initial(cfg, H)
    section = integrate_quadratic(H, grid, disp, vel)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_section_csv(section, cfg.out / "section.csv")
    report = Report("quadratic", cfg.seed)
    report.notes.append(f"grid={list(grid.shape)}")
    rq, rp = hdw_residual_on_section(H, section)
    report.add("hdw_residual", max(float(np.max(rq)), float(np.max(rp))), cfg.checks["hdw_residual"])
    return _finish(report, cfg.out)


def _candidate_field(cfg: RunConfig, dims: Dimensions):
    """(phase field, base field on Q or None) from the ``field`` config block."""
    block = cfg.vector_field or {"family": "translation"}
    family = block.get("family", "translation")
    if family not in FAMILIES:
        raise ConfigError(f"unknown vector-field family {family!r}; choose one of {', '.join(FAMILIES)}")
    if family == "reeb":
        A = int(block.get("index", 0))
        if not 0 <= A < dims.k:
            raise ConfigError(f"reeb index {A} out of range for k={dims.k}")
        return PhaseVectorField.constant(reeb(A, dims)), None
    if family == "translation":
        direction = np.broadcast_to(np.asarray(block.get("direction", 1.0), float), (dims.n,))
        Z = BaseVectorField.translation(dims, direction)
    elif family == "rotation":
        i, j = (int(a) for a in block.get("plane", [0, 1]))
        if not (0 <= i < dims.n and 0 <= j < dims.n and i != j):
            raise ConfigError(f"rotation plane {(i, j)} invalid for n={dims.n}")
        Z = BaseVectorField.rotation(dims, i, j)
    else:
        M = np.asarray(block.get("matrix"), dtype=float)
        if M.shape != (dims.n, dims.n):
            raise ConfigError(f"linear field matrix must be {dims.n} x {dims.n}")
        Z = BaseVectorField.linear_on_q(dims, M)
    return complete_lift(Z), Z


def cmd_check_noether(cfg: RunConfig) -> int:
    H = _quadratic(cfg)
    dims = H.dims
    Y, Z = _candidate_field(cfg, dims)
    sp = cfg.samples
    samples = sample_box(
        dims, float(sp.get("low", -1.0)), float(sp.get("high", 1.0)), int(sp.get("count", 256)), cfg.seed
    )
    tol_n = min(cfg.checks[c] for c in ("omega", "eta", "hamiltonian"))
    rep = noether_check(Y, H, samples, tol_n)
    report = Report("check-noether", cfg.seed)
    report.notes.append(f"samples={len(samples)} family={(cfg.vector_field or {}).get('family', 'translation')}")
    report.add("omega", rep.residual_omega, cfg.checks["omega"])
    report.add("eta", rep.residual_eta, cfg.checks["eta"])
    report.add("hamiltonian", rep.residual_H, cfg.checks["hamiltonian"])
    report.notes.append(f"reeb_residual={rep.residual_reeb:.6e} exact_residual={rep.exact_residual:.6e}")
    if Z is not None and "killing" in cfg.checks:
        report.add("killing", killing_check(Z, H, [x.q for x in samples]), cfg.checks["killing"])
    if report.passed:
        F = conserved_from_noether(Y, H, samples, tol_n)
        cfg.out.mkdir(parents=True, exist_ok=True)
        header = [f"x{a + 1}" for a in range(dims.N)] + [f"F{A + 1}" for A in range(dims.k)]
        rows = [np.concatenate([x.flat(), F(x)]) for x in samples]
        with open(cfg.out / "current.csv", "w") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(repr(float(v)) for v in r) + "\n")
    return _finish(report, cfg.out)


def cmd_hdw_residual(cfg: RunConfig) -> int:
    H = _quadratic(cfg)
    if cfg.section:
        section = read_section_csv(cfg.section)
    elif cfg.system["type"] == "wave":
        params = _wave_params(cfg)
        section = integrate_wave(params, _grid(cfg, 0, params.speed, params.spatial_dims))
    else:
        section = integrate_quadratic(H, _quadratic_grid(cfg, H), *_quadratic_initial(cfg, H))
    rq, rp = hdw_residual_on_section(H, section)
    report = Report("hdw-residual", cfg.seed)
    report.notes.append(f"grid={list(section.grid.shape)}")
    report.add("hdw_residual", max(float(np.max(rq)), float(np.max(rp))), cfg.checks["hdw_residual"])
    return _finish(report, cfg.out)


def cmd_kernel_dim(k: int, n: int) -> int:
    if k < 1 or n < 1:
        raise ConfigError(f"k and n must be positive, got k={k}, n={n}")
    numeric = kernel_dimension(Dimensions(k, n))
    closed = (k - 1) * (k * n + n)
    print(numeric, closed)
    return EXIT_OK if numeric == closed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kcosym",
        description="k-cosymplectic Hamiltonian field theory: solvers and symmetry checks.",
        epilog="Exit codes: 0 all checks pass, 1 a check failed, 2 invalid input. "
        "Config keys and defaults are listed in the kcosym.cli module docstring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--out", help="output directory (default: kcosym-out)")
        p.add_argument("--tol", type=float, help="override every check tolerance")
        p.add_argument("--refine", type=int, help="grid refinement levels (default 3 for wave, else 1)")
        p.add_argument("--seed", type=int, help="sampling seed (default 0)")

    common(sub.add_parser("wave", help="integrate the wave equation and check conservation"))
    common(sub.add_parser("quadratic", help="integrate a constant-metric quadratic system"))
    common(sub.add_parser("check-noether", help="check a candidate Noether symmetry"))
    common(sub.add_parser("hdw-residual", help="HDW residual of an integrated or stored section"))
    kd = sub.add_parser("kernel-dim", help="dimension of ker omega# ∩ ker eta#")
    kd.add_argument("k", type=int)
    kd.add_argument("n", type=int)
    return parser


COMMANDS = {
    "wave": cmd_wave,
    "quadratic": cmd_quadratic,
    "check-noether": cmd_check_noether,
    "hdw-residual": cmd_hdw_residual,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.command == "kernel-dim":
            return cmd_kernel_dim(args.k, args.n)
        cfg = load_config(args, args.command)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ValueError, KeyError, TypeError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
