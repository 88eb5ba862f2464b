"""Benchmark studies: biharmonic convergence, plate spectra, linear shells and stresses.

Every study produces a :class:`BenchmarkReport` whose rows become a CSV file.
Level ``l`` of a refinement study uses ``n0 * 2**l`` elements per patch
direction and reports ``h = 1 / (n0 * 2**l)``.
"""
from __future__ import annotations

import csv
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sps

from . import linalg, multipatch, pde, shell, smoothspace
from .multipatch import MultiPatch

STUDIES = ("biharmonic", "spectrum", "shell-hyperbolic", "shell-elliptic", "stress", "trace")
DOMAINS = ("single", "fig6", "file")
COUPLINGS = ("single", "c0", "penalty", "nitsche", "smooth-c1")

DEFAULT_LEVELS = {"biharmonic": 5, "spectrum": 1, "shell-hyperbolic": 5, "shell-elliptic": 5,
                  "stress": 1, "trace": 1}
DEFAULT_ALPHA = {"nitsche": 1e5, "penalty": 1e5}
DEFAULT_SHELL_ALPHA = 10.0
SHELL_MATERIAL = shell.ShellMaterial(E=2.0e5, nu=0.3, t=0.01)


class ConfigError(ValueError):
    """Configuration that cannot be run as stated."""


class RequirementGateError(ConfigError):
    """Degree/regularity combination rejected by the requirement table."""

    def __init__(self, report: smoothspace.RequirementReport):
        self.report = report
        super().__init__("no smooth construction admits this (p, r) on this domain:\n" + report.summary())


class ProblemTooLarge(MemoryError):
    """The direct solver would not fit into the available memory."""


# --- configuration ---------------------------------------------------------------------

def parse_coupling(text: str) -> tuple:
    """``'nitsche(1e5)'`` -> ``('nitsche', 1e5)``; a bare name gives ``alpha=None``."""
    m = re.fullmatch(r"\s*([a-z0-9-]+)\s*(?:\(\s*([^)]*)\s*\))?\s*", text)
    if not m or m.group(1) not in COUPLINGS:
        raise ConfigError(f"unknown coupling {text!r}; expected one of {', '.join(COUPLINGS)}")
    name, arg = m.group(1), m.group(2)
    alpha = None
    if arg:
        try:
            alpha = float(arg)
        except ValueError:
            raise ConfigError(f"bad coupling parameter in {text!r}") from None
        if name not in ("penalty", "nitsche"):
            raise ConfigError(f"coupling {name!r} takes no parameter")
        if alpha <= 0:
            raise ConfigError("coupling parameter must be positive")
    return name, alpha


@dataclass
class BenchConfig:
    study: str
    domain: str = "single"
    coupling: str = "single"
    alpha: float | None = None
    degree: int = 3
    regularity: int = 2
    levels: int | None = None
    output: str = "."
    mesh: str | None = None
    base_elements: int | None = None
    boundary_alpha: float = 1e5
    samples: int = 64
    jump_points: int = 200
    dump_maps: str | None = None

    def __post_init__(self):
        name, alpha = parse_coupling(self.coupling)
        self.coupling = name
        if alpha is not None:
            self.alpha = alpha
        if self.study not in STUDIES:
            raise ConfigError(f"unknown study {self.study!r}")
        if self.domain not in DOMAINS:
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.levels is None:
            self.levels = DEFAULT_LEVELS[self.study]
        if self.levels < 1:
            raise ConfigError("at least one level is required")
        if self.degree < 1 or not 0 <= self.regularity < self.degree:
            raise ConfigError("need p >= 1 and 0 <= r < p")
        if self.domain == "file" and not self.mesh:
            raise ConfigError("domain 'file' needs a mesh path")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError("coupling parameter must be positive")

    @property
    def coupling_alpha(self) -> float | None:
        if self.coupling not in ("penalty", "nitsche"):
            return None
        if self.alpha is not None:
            return self.alpha
        if self.study.startswith("shell") or self.study == "stress":
            return DEFAULT_SHELL_ALPHA
        return DEFAULT_ALPHA[self.coupling]

    @property
    def coupling_label(self) -> str:
        a = self.coupling_alpha
        return self.coupling if a is None else f"{self.coupling}({a:g})"


CONFIG_KEYS = {
    "study": str, "domain": str, "coupling": str, "alpha": float, "degree": int, "p": int,
    "regularity": int, "r": int, "levels": int, "L": int, "output": str, "o": str, "mesh": str,
    "base_elements": int, "base-elements": int, "boundary_alpha": float, "boundary-alpha": float,
    "samples": int, "jump_points": int, "jump-points": int, "dump_maps": str, "dump-maps": str,
}
ALIASES = {"p": "degree", "r": "regularity", "L": "levels", "o": "output"}


def read_config(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            val = CONFIG_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"config line {lineno}: bad value for {key!r}") from None
        key = ALIASES.get(key, key).replace("-", "_")
        out[key] = val
    return out


# --- reports -------------------------------------------------------------------------------

@dataclass
class BenchmarkReport:
    study: str
    columns: list
    rows: list = field(default_factory=list)
    rates: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def column(self, name) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=float)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_fmt(row[c]) for c in self.columns])

    def write_rates(self, path) -> None:
        with open(path, "w") as fh:
            for k, v in self.rates.items():
                fh.write(f"{k} {v:.6f}\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def compute_rates(h, errors, last: int = 3) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)`` over the last levels."""
    h = np.asarray(h, dtype=float)[-last:]
    e = np.asarray(errors, dtype=float)[-last:]
    if h.size < last:
        raise ValueError(f"need at least {last} levels")
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and mesh sizes must be positive")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


@dataclass(frozen=True)
class PlateSpec:
    E: float = 1e5
    t: float = 1e-2
    nu: float = 0.2
    rho: float = 1e5

    @property
    def D(self) -> float:
        return self.E * self.t ** 3 / (12.0 * (1.0 - self.nu ** 2))

    def frequency(self, n, m):
        return (np.asarray(n) ** 2 + np.asarray(m) ** 2) * np.pi ** 2 * np.sqrt(self.D / (self.rho * self.t))

    def analytic_spectrum(self, count: int) -> np.ndarray:
        """Lowest ``count`` simply supported unit-square frequencies with multiplicity."""
        k = int(np.ceil(np.sqrt(2 * count))) + 2
        while True:
            n, m = np.meshgrid(np.arange(1, k + 1), np.arange(1, k + 1))
            w = np.sort(self.frequency(n, m).ravel())
            # every frequency below the cut-off (k+1)^2 + 1 is present in the k x k table
            if w[count - 1] < self.frequency(k + 1, 1):
                return w[:count]
            k *= 2


# --- domains and maps -----------------------------------------------------------------------

def load_domain(cfg: BenchConfig) -> MultiPatch:
    if cfg.domain == "single":
        return multipatch.make_unit_square()
    if cfg.domain == "fig6":
        return multipatch.make_fig_domain()
    return multipatch.loads(Path(cfg.mesh).read_text())


def gate(cfg: BenchConfig, mp: MultiPatch) -> smoothspace.RequirementReport | None:
    """Requirement table check for smooth-c1; other couplings only need a matching domain."""
    if cfg.coupling == "single" and len(mp.patches) != 1:
        raise ConfigError("coupling 'single' needs a one-patch domain")
    if cfg.coupling != "smooth-c1":
        return None
    rep = smoothspace.check_requirements(mp, cfg.degree, cfg.regularity)
    if not rep.any_passed():
        raise RequirementGateError(rep)
    return rep


def _scalar_map(mp, coupling, zero_local=()):
    name = {"single": "single", "c0": "c0", "penalty": "penalty", "nitsche": "nitsche",
            "smooth-c1": "smooth-c1"}[coupling]
    return smoothspace.build_map(mp, name, zero_local)


def _dump_maps(cfg, mp, emap, level):
    if not cfg.dump_maps:
        return
    out = Path(cfg.dump_maps)
    out.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(str(out / f"E_level{level}.mtx"), emap.stacked())
    if cfg.coupling == "smooth-c1":
        c0 = smoothspace.build_c0_map(mp)
        scipy.io.mmwrite(str(out / f"C_level{level}.mtx"), smoothspace.build_c1_constraints(mp, c0))


def _elements(cfg, base, level, single_default, fig_default):
    n0 = cfg.base_elements or (single_default if len(base.patches) == 1 else fig_default)
    return n0 * 2 ** level


# --- studies ------------------------------------------------------------------------------------

def run_biharmonic(cfg: BenchConfig) -> BenchmarkReport:
    """Manufactured biharmonic problem; boundary data imposed with Nitsche terms."""
    base = load_domain(cfg)
    if base.dim != 2:
        raise ConfigError("biharmonic study needs a planar domain")
    if cfg.degree < 2:
        raise ConfigError("biharmonic study needs p >= 2")
    if cfg.coupling == "c0":
        raise ConfigError("a C0 space is not admissible for the fourth-order problem")
    gate(cfg, base)
    exact = pde.ManufacturedBiharmonic()
    rep = BenchmarkReport("biharmonic", ["level", "h", "dofs", "L2", "H1", "H2"])
    rep.notes.append(f"coupling={cfg.coupling_label} p={cfg.degree} r={cfg.regularity}")
    for level in range(cfg.levels):
        n = _elements(cfg, base, level, 4, 2)
        mp = base.refined(cfg.degree, cfg.regularity, n)
        emap = _scalar_map(mp, cfg.coupling)
        _dump_maps(cfg, mp, emap, level)
        S = pde.assemble_biharmonic(mp, emap, exact.rhs)
        K = S.K
        if cfg.coupling == "nitsche":
            K = K + pde.nitsche_interface_terms(mp, emap, cfg.coupling_alpha)
        elif cfg.coupling == "penalty":
            K = K + pde.penalty_interface_terms(mp, emap, cfg.coupling_alpha)
        Kb, fb = pde.nitsche_boundary_terms(mp, emap, cfg.boundary_alpha, cfg.boundary_alpha)
        u = linalg.solve_spd(K + Kb, S.f + fb)
        err = pde.error_norms(mp, emap, u, exact)
        rep.rows.append({"level": level, "h": 1.0 / n, "dofs": emap.n_global,
                         "L2": err.L2, "H1": err.H1, "H2": err.H2})
    if len(rep.rows) >= 3:
        h = rep.column("h")
        rep.rates = {k: compute_rates(h, rep.column(k)) for k in ("L2", "H1", "H2")}
    return rep


def plate_system(mp: MultiPatch, coupling: str, alpha: float | None, plate: PlateSpec):
    """Simply supported plate: ``K = D int Lap Lap (+ Nitsche)``, ``M = rho t int u v``."""
    zero = pde.boundary_zero_local(mp, 1)
    emap = _scalar_map(mp, coupling, zero)
    K = pde.assemble_biharmonic(mp, emap).K
    if coupling == "nitsche":
        K = K + pde.nitsche_interface_terms(mp, emap, alpha)
    elif coupling == "penalty":
        K = K + pde.penalty_interface_terms(mp, emap, alpha)
    M = pde.assemble_mass(mp, emap, plate.rho * plate.t)
    return plate.D * K, M, emap


def run_spectrum(cfg: BenchConfig, plate: PlateSpec = PlateSpec()) -> BenchmarkReport:
    base = load_domain(cfg)
    if base.dim != 2:
        raise ConfigError("spectrum study needs a planar domain")
    if cfg.coupling == "c0":
        raise ConfigError("a C0 space is not admissible for the plate problem")
    gate(cfg, base)
    rep = BenchmarkReport("spectrum", ["level", "h", "i", "i/N", "omega_h", "omega", "ratio"])
    for level in range(cfg.levels):
        n = _elements(cfg, base, level, 32, 11)
        mp = base.refined(cfg.degree, cfg.regularity, n)
        K, M, emap = plate_system(mp, cfg.coupling, cfg.coupling_alpha, plate)
        _dump_maps(cfg, mp, emap, level)
        pairs = linalg.eig_general(K, M)
        if np.any(pairs.values < -1e-8 * np.abs(pairs.values).max()):
            raise np.linalg.LinAlgError("negative plate eigenvalue: coupling is unstable")
        w_h = np.sqrt(np.clip(pairs.values, 0.0, None))
        w = plate.analytic_spectrum(w_h.size)
        N = w_h.size
        for i in range(N):
            rep.rows.append({"level": level, "h": 1.0 / n, "i": i + 1, "i/N": (i + 1) / N,
                             "omega_h": w_h[i], "omega": w[i], "ratio": w_h[i] / w[i]})
        ratio = w_h / w
        rep.extra[level] = {"dofs": N, "ratio": ratio}
        rep.rates = {"omega_1": float(w_h[0]), "omega_11": float(plate.frequency(1, 1)),
                     "max_dev_first_half": float(np.abs(ratio[: N // 2] - 1).max()),
                     "min_ratio": float(ratio.min())}
    return rep


def shell_problem(kind: str, mp: MultiPatch, load_patch: int | None = None):
    """Boundary conditions and load of the two paraboloid benchmarks."""
    t = SHELL_MATERIAL.t
    if kind == "elliptic":
        # the four corners are held vertically and one corner in all directions;
        # fixing y at a second corner removes the remaining rotation about z
        bc = shell.ShellBC(points=[((-0.5, -0.5), "fixed_all"), ((0.5, -0.5), "fixed_vertical"),
                                   ((0.5, -0.5), "fixed_y"), ((0.5, 0.5), "fixed_vertical"),
                                   ((-0.5, 0.5), "fixed_vertical")])
        k = load_patch if load_patch is not None else locate_patch(mp, (0.0, 0.0))
        load = shell.LoadSpec(point=(0.0, 0.0), force=(0.0, 0.0, -1e8 * t), patch=k)
    elif kind == "hyperbolic":
        sides = shell.boundary_sides_on(mp, 0, -0.5, 1e-9 * max(1.0, mp.diameter()))
        if not sides:
            raise ConfigError("no boundary side on x = -1/2 to clamp")
        bc = shell.ShellBC(sides={ks: "clamped" for ks in sides})
        load = shell.LoadSpec(distributed=(0.0, 0.0, -8000.0 * t))
    else:
        raise ConfigError(f"unknown shell kind {kind!r}")
    return bc, load


def locate_patch(mp: MultiPatch, xy) -> int:
    """Last patch whose planar image contains ``xy``."""
    found = None
    for k, p in enumerate(mp.patches):
        try:
            multipatch.newton_invert(p, xy)
            found = k
        except (ValueError, np.linalg.LinAlgError):
            continue
    if found is None:
        raise ValueError(f"point {tuple(xy)} lies in no patch")
    return found


APEX_PATCH_FIG6 = 4


DENSE_NULL_LIMIT = 500


def shell_space(mp: MultiPatch, coupling: str):
    """Vector map for a shell solve plus optional linear constraints on it.

    Smooth C1 spaces whose constraints touch more than ``DENSE_NULL_LIMIT``
    scalar coefficients are not reduced explicitly: the dense orthonormal
    null-space block would couple every touched coefficient with every other.
    They are returned as the C0 space together with the vector C1 constraints.
    """
    if coupling == "smooth-c1":
        c0 = smoothspace.build_c0_map(mp)
        G = smoothspace.build_c1_constraints(mp, c0)
        if np.count_nonzero(G.getnnz(axis=0)) > DENSE_NULL_LIMIT:
            return smoothspace.vector_map([c0] * 3), sps.block_diag([G] * 3, format="csr")
        return smoothspace.vector_map([smoothspace.build_smooth_c1_map(G, c0)] * 3), None
    return smoothspace.vector_map([_scalar_map(mp, coupling)] * 3), None


def solve_shell(kind: str, mp: MultiPatch, coupling: str, alpha: float | None,
                mat: shell.ShellMaterial = SHELL_MATERIAL, load_patch: int | None = None,
                load_scale: float = 1.0, check_memory: bool = True):
    """Assemble, couple, constrain and solve; returns ``(coeffs, ConstrainedShell)``."""
    if check_memory:
        require_memory(mp, coupling)
    vmap, G = shell_space(mp, coupling)
    S = shell.assemble_kl_stiffness(mp, vmap, mat)
    if coupling == "penalty":
        S.K = S.K + shell.penalty_shell_coupling(mp, vmap, alpha, mat)
    bc, load = shell_problem(kind, mp, load_patch)
    S.f = load_scale * shell.assemble_shell_load(mp, vmap, load)
    C = shell.apply_shell_bcs(S, mp, vmap, bc, mat, constraints=G)
    del S
    return C.solve(), C


def _shell_domain(cfg: BenchConfig, kind: str):
    base = load_domain(cfg)
    if base.dim != 2:
        raise ConfigError("shell studies lift a planar layout onto the paraboloid")
    if cfg.degree < 2:
        raise ConfigError("paraboloid geometry needs p >= 2")
    if cfg.coupling in ("c0", "nitsche"):
        raise ConfigError("shell coupling must be single, penalty or smooth-c1")
    gate(cfg, base)
    surf = multipatch.make_paraboloid(kind, base)
    apex = APEX_PATCH_FIG6 if cfg.domain == "fig6" and kind == "elliptic" else None
    return base, surf, apex


def run_shell(cfg: BenchConfig) -> BenchmarkReport:
    kind = cfg.study.split("-", 1)[1]
    base, surf, apex = _shell_domain(cfg, kind)
    rep = BenchmarkReport(cfg.study, ["level", "h", "dofs", "W_int"])
    rep.notes.append(f"coupling={cfg.coupling_label} p={cfg.degree} r={cfg.regularity}")
    if kind == "hyperbolic":
        rep.notes.append("distributed load direction (0,0,-8000t) per unit area")
    for level in range(cfg.levels):
        n = _elements(cfg, base, level, 2, 1)
        mp = surf.refined(cfg.degree, cfg.regularity, n)
        u, C = solve_shell(kind, mp, cfg.coupling, cfg.coupling_alpha, load_patch=apex)
        _dump_maps(cfg, mp, C.emap, level)
        rep.rows.append({"level": level, "h": 1.0 / n, "dofs": C.K.shape[0],
                         "W_int": shell.bending_energy(u, C.K)})
    return rep


def run_stress(cfg: BenchConfig) -> BenchmarkReport:
    """Elliptic paraboloid on a fixed mesh; stress fields and interface jumps."""
    _, surf, apex = _shell_domain(cfg, "elliptic")
    n = cfg.base_elements or 64
    mp = surf.refined(cfg.degree, cfg.regularity, n)
    u, C = solve_shell("elliptic", mp, cfg.coupling, cfg.coupling_alpha, load_patch=apex)
    _dump_maps(cfg, mp, C.emap, 0)
    fields = shell.von_mises_membrane(mp, C.emap, u, SHELL_MATERIAL, cfg.samples)
    jumps = shell.interface_stress_jumps(mp, C.emap, u, SHELL_MATERIAL, cfg.jump_points)
    rep = BenchmarkReport("stress", ["interface", "patch_a", "side_a", "patch_b", "side_b",
                                     "points", "max_jump", "mean_jump"])
    per = np.full(len(mp.interfaces), cfg.jump_points // max(1, len(mp.interfaces)))
    per[: cfg.jump_points - per.sum()] += 1
    start = 0
    for i, (f, m) in enumerate(zip(mp.interfaces, per)):
        seg = jumps[start:start + m]
        start += m
        rep.rows.append({"interface": i, "patch_a": f.patch_a, "side_a": f.side_a,
                         "patch_b": f.patch_b, "side_b": f.side_b, "points": int(m),
                         "max_jump": float(seg.max()) if seg.size else 0.0,
                         "mean_jump": float(seg.mean()) if seg.size else 0.0})
    smax = max(float(fl.sigma.max()) for fl in fields)
    rep.rates = {"max_jump": float(jumps.max()) if jumps.size else 0.0, "max_sigma": smax}
    rep.extra = {"fields": fields, "jumps": jumps, "dofs": C.K.shape[0], "elements": n}
    return rep


# --- memory guard --------------------------------------------------------------------------------

def available_memory() -> int:
    """Bytes the process may still allocate (cgroup limit or MemAvailable)."""
    limits = []
    for path in ("/sys/fs/cgroup/memory.max", "/sys/fs/cgroup/memory/memory.limit_in_bytes"):
        try:
            text = Path(path).read_text().strip()
            if text.isdigit():
                limits.append(int(text))
        except OSError:
            pass
    try:
        for line in Path("/proc/meminfo").read_text().splitlines():
            if line.startswith("MemAvailable:"):
                limits.append(int(line.split()[1]) * 1024)
    except OSError:
        limits.append(os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_AVPHYS_PAGES"))
    return min(limits)


def estimate_shell_memory(mp: MultiPatch, coupling: str) -> int:
    """Rough peak bytes of a shell solve.

    Calibrated on the paraboloid benchmarks: with Pardiso the peak is about five
    times the stiffness matrix (4.2 GB at 64 x 64 elements per patch, p=4); the
    SuperLU factor grows faster (2.7 GB at 32 x 32).
    """
    n_local = sum(p.basis.dim for p in mp.patches)
    p = max(max(pt.basis.degrees) for pt in mp.patches)
    dofs = 3 * n_local
    matrix = dofs * 3 * (2 * p + 1) ** 2 * 12
    if dofs >= linalg.PARDISO_MIN_SIZE and linalg.pardiso_available():
        factor = 5.0
    else:
        factor = 4.0 + 2.0 * max(0.0, np.log2(dofs / 1e4))
    svd = 0
    if coupling == "smooth-c1":
        touched = sum(3 * pt.side_spec(s).dim * 2 for pt in mp.patches for s in range(4))
        if touched / 3 <= DENSE_NULL_LIMIT:
            svd = 3 * 8 * touched ** 2
    return int(factor * matrix + svd)


def require_memory(mp: MultiPatch, coupling: str) -> None:
    need, have = estimate_shell_memory(mp, coupling), available_memory()
    if need > have:
        raise ProblemTooLarge(f"estimated {need / 2**30:.1f} GiB needed for the direct solve, "
                              f"{have / 2**30:.1f} GiB available")


# --- entry point -------------------------------------------------------------------------------

def run(cfg: BenchConfig) -> BenchmarkReport:
    if cfg.study == "biharmonic":
        return run_biharmonic(cfg)
    if cfg.study == "spectrum":
        return run_spectrum(cfg)
    if cfg.study in ("shell-hyperbolic", "shell-elliptic"):
        return run_shell(cfg)
    if cfg.study == "stress":
        return run_stress(cfg)
    if cfg.study == "trace":
        return run_trace(cfg)
    raise ConfigError(cfg.study)


def run_trace(cfg: BenchConfig) -> BenchmarkReport:
    from . import quadlayout

    if not cfg.mesh:
        raise ConfigError("trace study needs a mesh path")
    mesh = quadlayout.load_quad_obj(Path(cfg.mesh).read_text())
    mp, summary = quadlayout.segment(mesh)
    rep = BenchmarkReport("trace", ["vertices", "edges", "faces", "patches", "iEV", "bEV"])
    nv, ne, nf = mesh.counts()
    rep.rows.append({"vertices": nv, "edges": ne, "faces": nf, "patches": summary.patches,
                     "iEV": summary.interior_evs, "bEV": summary.boundary_evs})
    rep.extra = {"multipatch": mp, "summary": summary}
    return rep


def write_outputs(cfg: BenchConfig, rep: BenchmarkReport) -> list:
    """Write ``<study>.csv`` and any study-specific files; returns the written paths."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / f"{rep.study}.csv"]
    rep.write_csv(written[0])
    if rep.rates and rep.study in ("biharmonic", "spectrum", "stress"):
        written.append(out / "rates.txt")
        rep.write_rates(written[-1])
    if rep.study == "stress":
        fields = rep.extra["fields"]
        shell.write_stress_csv(fields, out / "stress_field.csv")
        written.append(out / "stress_field.csv")
        for fl in fields:
            path = out / f"stress_patch{fl.patch}.vtk"
            shell.write_stress_vtk(fl, path)
            written.append(path)
        shell.write_contours_csv(shell.stress_contours(fields), out / "stress_contours.csv")
        written.append(out / "stress_contours.csv")
    if rep.study == "trace":
        path = out / "trace.mpatch"
        path.write_text(multipatch.dumps(rep.extra["multipatch"]))
        written.append(path)
    return written
