"""
Command line front end.

    ellipot {kernels,equilibrium,maxmin,tiling,aztec} [--config PATH] [--out DIR]
            [--seed N] [--tol X] [--preset NAME]

A run is described by a TOML file with the sections ``backend``, ``field``,
``contour``, ``family``, ``solver``, ``tiling`` and ``aztec`` and the
top-level keys ``preset``, ``out`` and ``seed``.  A named preset supplies
defaults that the file overrides.  Every key can also be set from the
environment as ELLIPOT_<SECTION>__<KEY> (or ELLIPOT_<KEY> at top level);
values are read as TOML literals and fall back to plain strings.

Exit codes: 0 success, 2 invalid input, 3 numerical failure or failed
checks, 4 hypothesis gate failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .elliptic import DegenerateCurveError, EllipticCurve, NonConvergenceError
from .energy import (
    Component,
    Contour,
    ContourError,
    NotPositiveDefiniteError,
    equilibrium_measure,
    variational_check,
)
from .fields import ExternalField, FieldError, Rational, ThetaQuotient
from .kernels import CurveBackend, SphereBackend, TorusBackend, contour_residue
from .qp import QPNonConvergence

log = logging.getLogger("ellipot")

ENV_PREFIX = "ELLIPOT_"
SECTIONS = ("backend", "field", "contour", "family", "solver", "tiling", "aztec")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_GATE = 4


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# presets

PRESETS = {
    "arcsine": dict(
        backend=dict(kind="sphere"),
        field=dict(kind="none"),
        contour=dict(components=[dict(kind="segment", a=[-1.0, 0.0], b=[1.0, 0.0])]),
        solver=dict(n=400, tol=5e-3),
    ),
    "torus": dict(
        backend=dict(kind="torus", tau=[0.0, 2.0]),
        field=dict(kind="none"),
        solver=dict(pairs=50, tol=1e-8),
    ),
    "aztec": dict(
        backend=dict(kind="curve", x1=-2.25, x2=-1.0 / 2.25),
        field=dict(kind="aztec", alpha=1.5),
        contour=dict(components=[dict(kind="circle", center=[1.0, 0.0], radius=0.5, chart="z1")]),
        solver=dict(n=200, tol=1e-6),
        aztec=dict(alpha=1.5, radii=[0.3, 0.5, 0.8], n=200, harmonicity_tol=1e-6, balayage_tol=1e-4,
                   s_property_tol=1e-3, density_tol=1e-3),
    ),
    "hexagon": dict(
        backend=dict(kind="spectral"),
        field=dict(kind="tiling", b=1.0, c=0.5),
        contour=dict(components=[dict(kind="circle", center=[0.5, 0.0], radius=0.12, kmax=6)]),
        family=dict(p0=[0.5, 0.0], pinf=[0.0, 0.0], delta=0.05, kmax=6, n_components=1, sigma_symmetric=True),
        solver=dict(n=120, gtol=1e-2, max_iter=200, newton=False, refine=True, refine_n=64,
                    criticality_kmax=8, qd_points=60, criticality_tol=1e-3, qd_tol=1e-6,
                    hausdorff_tol=1e-3, poles=8, zeros=8),
        tiling=dict(weighting="hexagon"),
    ),
    "tiny": dict(
        tiling=dict(weighting="uniform", p=3, q=2, N=1, M=1, L=1, tol=1e-8),
    ),
}

DEFAULTS = dict(
    backend=dict(kind="sphere"),
    field=dict(kind="none"),
    contour=dict(components=[]),
    family=dict(),
    solver=dict(n=200, tol=1e-6),
    tiling=dict(weighting="uniform", p=3, q=2, N=1, M=1, L=1, tol=1e-8),
    aztec=dict(alpha=1.5, radii=[0.3, 0.5, 0.8], n=200, harmonicity_tol=1e-6, balayage_tol=1e-4,
               s_property_tol=1e-3, density_tol=1e-3),
)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    preset: str = ""
    backend: dict = dc_field(default_factory=dict)
    field: dict = dc_field(default_factory=dict)
    contour: dict = dc_field(default_factory=dict)
    family: dict = dc_field(default_factory=dict)
    solver: dict = dc_field(default_factory=dict)
    tiling: dict = dc_field(default_factory=dict)
    aztec: dict = dc_field(default_factory=dict)
    out: str = "out"
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        unknown = set(d) - set(SECTIONS) - {"preset", "out", "seed"}
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)}")
        preset = d.get("preset", "") or ""
        if preset and preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r} (have {sorted(PRESETS)})")
        base = _merge(DEFAULTS, PRESETS.get(preset, {}))
        merged = _merge(base, {k: v for k, v in d.items() if k in SECTIONS})
        for s in SECTIONS:
            if not isinstance(merged.get(s, {}), dict):
                raise ConfigError(f"{s}: expected a table")
        cfg = cls(preset=preset, out=str(d.get("out", "out")), seed=d.get("seed", 0),
                  **{s: merged.get(s, {}) for s in SECTIONS})
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        try:
            d = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"config parse error: {e}") from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = dict(preset=self.preset, out=self.out, seed=self.seed)
        for s in SECTIONS:
            d[s] = copy.deepcopy(getattr(self, s))
        return d

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def with_override(self, path, value) -> "RunConfig":
        d = self.to_dict()
        node = d
        for k in path[:-1]:
            if k not in node or not isinstance(node[k], dict):
                raise ConfigError(f"{'.'.join(path)}: no such section")
            node = node[k]
        node[path[-1]] = value
        return RunConfig.from_dict(d)

    def validate(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed: expected a nonnegative integer, got {self.seed!r}")
        kind = self.backend.get("kind")
        if kind not in ("sphere", "torus", "curve", "spectral"):
            raise ConfigError(f"backend.kind: expected sphere, torus, curve or spectral, got {kind!r}")
        if kind == "torus":
            tau = self.backend.get("tau")
            if not (isinstance(tau, list) and len(tau) == 2):
                raise ConfigError("backend.tau: expected [re, im]")
            if not float(tau[1]) > 0:
                raise ConfigError(f"backend.tau: Im tau must be positive, got {tau[1]}")
        if kind == "curve":
            try:
                x1, x2 = float(self.backend["x1"]), float(self.backend["x2"])
            except (KeyError, TypeError, ValueError):
                raise ConfigError("backend.x1, backend.x2: expected numbers") from None
            if not x1 < x2 < 0:
                raise ConfigError(f"backend: need x1 < x2 < 0, got x1={x1}, x2={x2}")
        fk = self.field.get("kind", "none")
        if fk not in ("none", "primitives", "tiling", "aztec"):
            raise ConfigError(f"field.kind: expected none, primitives, tiling or aztec, got {fk!r}")
        for sec in SECTIONS:
            for k, v in getattr(self, sec).items():
                if k == "tol" or k.endswith("_tol") or k == "gtol":
                    if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                        raise ConfigError(f"{sec}.{k}: tolerance must be positive, got {v!r}")
        n = self.solver.get("n")
        if n is not None and (isinstance(n, bool) or not isinstance(n, int) or n < 8):
            raise ConfigError(f"solver.n: expected an integer >= 8, got {n!r}")
        tp = self.tiling.get("weighting")
        if isinstance(tp, str) and tp not in ("uniform", "hexagon") and not tp.endswith((".json", ".toml")):
            raise ConfigError(f"tiling.weighting: unknown weighting {tp!r}")


def _parse_literal(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_env(cfg: RunConfig, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    for key in sorted(environ):
        if not key.startswith(ENV_PREFIX):
            continue
        path = key[len(ENV_PREFIX):].lower().split("__")
        if path[0] not in SECTIONS + ("preset", "out", "seed"):
            raise ConfigError(f"{key}: unknown config key")
        if path == ["preset"]:
            d = cfg.to_dict()
            d["preset"] = environ[key]
            cfg = RunConfig.from_dict(d)
            continue
        cfg = cfg.with_override(path, _parse_literal(environ[key]))
    return cfg


def load_config(path=None, preset=None, environ=None) -> RunConfig:
    d = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {path} not found")
        try:
            d = tomllib.loads(p.read_text())
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
    if preset:
        d.setdefault("preset", preset)
    return apply_env(RunConfig.from_dict(d), environ)


# ---------------------------------------------------------------------------
# builders


def _c(v, name="value"):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, list) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ConfigError(f"{name}: expected a number or [re, im], got {v!r}")


def _weighting(cfg: RunConfig):
    from .tiling import PeriodicWeighting, hexagon_preset_weighting

    w = cfg.tiling.get("weighting", "uniform")
    if isinstance(w, dict):
        return PeriodicWeighting.from_dict(w)
    if w == "uniform":
        return PeriodicWeighting.uniform(int(cfg.tiling.get("p", 3)), int(cfg.tiling.get("q", 2)))
    if w == "hexagon":
        return hexagon_preset_weighting()
    return PeriodicWeighting.from_file(w)


def _tiling_curve(cfg: RunConfig):
    from .tiling import EigenvalueFunction, genus_one_curve, spectral_curve

    sc = spectral_curve(_weighting(cfg))
    cur = genus_one_curve(sc)
    return sc, cur, EigenvalueFunction(sc, cur)


def build_backend(cfg: RunConfig):
    kind = cfg.backend["kind"]
    if kind == "sphere":
        return SphereBackend()
    if kind == "torus":
        return TorusBackend(_c(cfg.backend["tau"], "backend.tau"))
    if kind == "curve":
        return CurveBackend(EllipticCurve(float(cfg.backend["x1"]), float(cfg.backend["x2"])))
    return CurveBackend(_tiling_curve(cfg)[1])


def build_field(cfg: RunConfig, backend) -> ExternalField:
    f = cfg.field
    kind = f.get("kind", "none")
    if kind == "none":
        return ExternalField.zero()
    if kind == "primitives":
        terms = []
        for k, t in enumerate(f.get("terms", [])):
            zeros = [_c(z, f"field.terms[{k}].zeros") for z in t.get("zeros", [])]
            poles = [_c(p, f"field.terms[{k}].poles") for p in t.get("poles", [])]
            if isinstance(backend, SphereBackend):
                prim = Rational(zeros, poles, t.get("const", 1.0))
            else:
                prim = ThetaQuotient(backend.tau, zeros, poles, t.get("const", 1.0))
            terms.append((float(t["residue"]), prim))
        return ExternalField(terms, sigma_invariant=bool(f.get("sigma_invariant", False)))
    if kind == "tiling":
        from .tiling import tiling_field

        if not isinstance(backend, CurveBackend):
            raise ConfigError("field.kind = tiling needs backend.kind = spectral")
        _, cur, lam = _tiling_curve(cfg)
        if abs(cur.tau - backend.tau) > 1e-12:
            raise ConfigError("backend curve does not match the tiling weighting")
        return tiling_field(backend.curve, lam, f.get("b", 1.0), f.get("c", 0.5))
    from .tiling import aztec_setup

    st = aztec_setup(f.get("alpha", 1.5))
    if not isinstance(backend, CurveBackend) or abs(st.curve.tau - backend.tau) > 1e-12:
        raise ConfigError("field.kind = aztec needs the curve x1 = -alpha^2, x2 = -alpha^-2")
    return st.field


def build_contour(cfg: RunConfig, backend) -> Contour:
    comps = []
    for k, c in enumerate(cfg.contour.get("components", [])):
        kind = c.get("kind", "fourier")
        chart = c.get("chart", "s")
        name = f"contour.components[{k}]"
        if kind == "circle":
            comps.append(Component.circle(_c(c["center"], name), float(c["radius"]), chart, int(c.get("kmax", 1))))
        elif kind == "ellipse":
            comps.append(Component.ellipse(_c(c["center"], name), float(c["a"]), float(c["b"]), chart,
                                           int(c.get("kmax", 1))))
        elif kind == "segment":
            comps.append(Component.segment(_c(c["a"], name), _c(c["b"], name), chart))
        elif kind == "fourier":
            comps.append(Component.from_dict(dict(coeffs_re=c["coeffs_re"], coeffs_im=c["coeffs_im"],
                                                  closed=c.get("closed", True), chart=chart)))
        else:
            raise ConfigError(f"{name}.kind: unknown component kind {kind!r}")
    if not comps:
        raise ConfigError("contour.components: at least one component is needed")
    return Contour(comps, backend)


# ---------------------------------------------------------------------------
# output helpers


def _clean(x):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(float(x.real)), _clean(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.12g}") if x != 0 else 0.0
    return x


def write_json(path: Path, obj):
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands

KERNELS_SCHEMA = {
    "type": "object",
    "required": ["backend", "tol", "checks", "all_passed"],
    "properties": {
        "backend": {"type": "string"},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "all_passed": {"type": "boolean"},
        "checks": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["value", "passed"],
                "properties": {"value": {"type": "number"}, "passed": {"type": "boolean"}},
            },
        },
    },
}


def _random_points(backend, rng, count, clearance=0.05):
    out = []
    while len(out) < count:
        if isinstance(backend, SphereBackend):
            out.append(complex(rng.uniform(-2, 2), rng.uniform(-2, 2)))
            continue
        p = complex(backend.reduce(rng.uniform(0, 1) + rng.uniform(0, 1) * backend.tau))
        if backend.distance_to_sink(p) > clearance:
            out.append(p)
    return np.array(out)


def _far(x):
    """Whichever of 1/4, 3/4 is farther from x mod 1."""
    x = x % 1.0
    return 0.25 if abs(x - 0.25) > abs(x - 0.75) else 0.75


def cmd_kernels(cfg: RunConfig, out: Path) -> int:
    """Symmetry and periodicity of G, residues and periods of C."""
    be = build_backend(cfg)
    tol = float(cfg.solver.get("tol", 1e-8))
    count = int(cfg.solver.get("pairs", 50))
    rng = np.random.default_rng(cfg.seed)
    p = _random_points(be, rng, count)
    q = _random_points(be, rng, count)
    keep = be.distance(p, q) > 0.05
    p, q = p[keep], q[keep]
    checks = {}
    G = be.green(p, q)
    checks["green_symmetry"] = float(np.max(np.abs(G - be.green(q, p))))
    if not isinstance(be, SphereBackend):
        checks["green_period_1"] = float(np.max(np.abs(be.green(p + 1.0, q) - G)))
        checks["green_period_tau"] = float(np.max(np.abs(be.green(p + be.tau, q) - G)))
    res_q, res_sink = [], []
    for qq in q[:10]:
        res_q.append(contour_residue(lambda z: be.cauchy(z, qq), qq, 1e-2, 128) - 1.0)
        if isinstance(be, SphereBackend):
            # residue at infinity is minus the integral over a large circle
            R = 10.0 * (1.0 + abs(qq))
            res_sink.append(-contour_residue(lambda z: be.cauchy(z, qq), 0j, R, 512) + 1.0)
        else:
            res_sink.append(contour_residue(lambda z: be.cauchy(z, qq), 0j, 1e-2, 128) + 1.0)
    checks["cauchy_residue_q"] = float(np.max(np.abs(res_q)))
    checks["cauchy_residue_sink"] = float(np.max(np.abs(res_sink)))
    if not isinstance(be, SphereBackend):
        m = 512
        t = np.arange(m) / m
        worst = 0.0
        for qq in q[:10]:
            # a-cycle and b-cycle lines at lattice coordinate 1/4 or 3/4,
            # whichever keeps away from q (the sink sits at 0)
            b = qq.imag / be.tau.imag
            a = qq.real - b * be.tau.real
            for base, step in ((_far(b) * be.tau, 1.0), (_far(a) + 0j, be.tau)):
                per = np.mean(be.cauchy(base + step * t, qq)) * step
                worst = max(worst, abs(per.real))
        checks["cauchy_period_real_part"] = float(worst)
    report = dict(backend=be.name, tol=tol,
                  checks={k: dict(value=v, passed=bool(v < tol)) for k, v in checks.items()})
    report["all_passed"] = all(c["passed"] for c in report["checks"].values())
    write_json(out / "report.json", report)
    return EXIT_OK if report["all_passed"] else EXIT_NUMERICAL


def cmd_equilibrium(cfg: RunConfig, out: Path) -> int:
    be = build_backend(cfg)
    fld = build_field(cfg, be)
    contour = build_contour(cfg, be)
    lat = getattr(be, "lattice", None)
    contour.check(poles=[p for p, _ in fld.poles(lat)])
    n = int(cfg.solver.get("n", 200))
    tol = float(cfg.solver.get("tol", 1e-6))
    res = equilibrium_measure(contour, fld, n)
    mu = res.measure
    var = variational_check(mu, fld)
    passed = var.sup_on_support < tol and var.min_off_support > -tol
    (out / "measure.csv").write_text(mu.to_csv())
    write_json(out / "variational.json", dict(
        c=var.c, sup_on_support=var.sup_on_support,
        min_off_support=var.min_off_support if math.isfinite(var.min_off_support) else None,
        kkt=res.kkt, energy=res.energy, nodes=int(mu.disc.N), tol=tol, passed=bool(passed)))
    return EXIT_OK if passed else EXIT_NUMERICAL


def _oval_lines(backend, m=200):
    t = np.linspace(0.0, 1.0, m)
    return [t + 0j, t + 0.5 * backend.tau]


def _measure_csv(measure, backend) -> str:
    """Rows (component, parameter, z, sheet, density) for a quadrature measure."""
    import csv
    import io

    d = measure.disc
    z, sheet = backend.curve.abel_inverse(d.q_s) if isinstance(backend, CurveBackend) else (d.q_s, 0 * d.q_th)
    dens = measure.density
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["component", "theta", "z_re", "z_im", "sheet", "density"])
    for k in range(len(d.q_th)):
        w.writerow([0, f"{d.q_th[k]:.12g}", f"{z[k].real:.12g}", f"{z[k].imag:.12g}", int(sheet[k]),
                    f"{dens[k]:.12g}"])
    return buf.getvalue()


def run_maxmin(cfg: RunConfig) -> dict:
    """Max-min search, refinement and the checks on the critical measure.

    Returns a dict with the report and the objects needed for the output
    files.  Raises GateError, MaxMinNonConvergence, BoundaryStallError or
    NumericalFailure.
    """
    from .maxmin import ContourFamily, GateError, VectorFieldBasis, criticality_check, maximize_energy, residue_gate
    from .quaddiff import (
        emanation_structure,
        find_a_on_oval,
        gap_inequality,
        gap_path,
        off_support_grid,
        qd_residual,
        quad_diff,
        refine_critical_measure,
        trajectory_consistency,
        trajectory_trace,
    )

    be = build_backend(cfg)
    if isinstance(be, SphereBackend):
        raise ConfigError("backend: the max-min search runs on genus one backends")
    fld = build_field(cfg, be)
    lat = be.lattice
    fam_cfg = cfg.family
    if "p0" not in fam_cfg:
        raise ConfigError("family.p0: the point p0 is required")
    family = ContourFamily(_c(fam_cfg["p0"], "family.p0"), _c(fam_cfg.get("pinf", 0.0), "family.pinf"),
                           float(fam_cfg.get("delta", 0.05)), int(fam_cfg.get("kmax", 6)),
                           int(fam_cfg.get("n_components", 1)), bool(fam_cfg.get("sigma_symmetric", False)))
    sv = cfg.solver
    report = dict(config=dict(preset=cfg.preset, seed=cfg.seed))
    gate = residue_gate(fld, family.p0, family.pinf, lat)
    report["gate"] = gate
    if not gate["passed"]:
        raise GateError(f"residue gate failed: r0={gate['r0']}, r_inf={gate['r_inf']}")
    seed = build_contour(cfg, be)
    r = maximize_energy(family, fld, seed, n=int(sv.get("n", 120)), tol=float(sv.get("gtol", 1e-2)),
                        max_iter=int(sv.get("max_iter", 200)), newton_polish=bool(sv.get("newton", False)),
                        log_every=0)
    basis = VectorFieldBasis.fourier(r.contour, kmax=int(sv.get("criticality_kmax", 8)))
    crit1 = criticality_check(r.measure, fld, basis)
    report["stage1"] = dict(energy=r.energy, gradient_norm=r.gradient_norm, iterations=r.iterations,
                            converged=r.converged, criticality=crit1["max_abs_re"])
    result = dict(stage1=r, backend=be, field=fld)
    if sv.get("refine", True):
        try:
            rf = refine_critical_measure(r.measure, fld, n=int(sv.get("refine_n", 64)))
        except (ValueError, RuntimeError) as e:
            raise NumericalFailure(f"refinement failed: {e}") from e
        mu = rf.measure
        br = rf.boutroux
        report["refined"] = dict(boutroux_cost=br.cost, endpoints=list(br.endpoints),
                                 double_zeros=list(br.double_zeros), mass=mu.mass)
        result["refined"] = rf
    else:
        rf = None
        mu = r.measure
    om = quad_diff(mu, fld, find_a_on_oval(mu, be.curve if isinstance(be, CurveBackend) else None).u)
    om.locate()
    report["omega"] = dict(zeros=om.zeros, poles=om.poles, zero_count=int(sum(o for _, o in om.zeros)),
                           pole_count=int(sum(o for _, o in om.poles)), a=om.a)
    pts = off_support_grid(mu, int(sv.get("qd_points", 60)), 0.08, avoid=list(om.pole_candidates), seed=cfg.seed)
    qd = qd_residual(om, pts)
    crit = criticality_check(mu, fld, basis)
    report["criticality"] = dict(max_abs_re=crit["max_abs_re"], worst=crit["worst"], basis_size=len(basis))
    report["qd_residual"] = dict(residual=qd["residual"], relative=qd.get("relative"), points=len(pts))
    omega_t = rf.omega if rf is not None else om
    tc = trajectory_consistency(omega_t, mu)
    report["trajectory_hausdorff"] = max(t["hausdorff"] for t in tc)
    if rf is not None:
        gi = gap_inequality(rf, gap_path(r.measure, rf))
        report["gap_inequality"] = dict(minimum=gi["minimum"], closure=gi["closure"],
                                        branch_error=gi["branch_error"])
    # critical trajectories from the zeros, for the figure
    trajs = []
    poles = [p for p, _ in om.poles]
    zeros = [z for z, _ in om.zeros]
    for z, o in om.zeros:
        for ang in emanation_structure(omega_t, z, order=None):
            start = z + 2e-3 * np.exp(1j * ang)
            trajs.append(trajectory_trace(omega_t, start, np.exp(1j * ang), max_length=1.0, zeros=zeros,
                                          poles=poles, lattice=lat, stop_radius=1e-3))
    result.update(measure=mu, omega=om, trajectories=trajs, consistency=tc)
    checks = dict(
        gate=bool(gate["passed"]),
        criticality=bool(crit["max_abs_re"] < float(sv.get("criticality_tol", 1e-3))),
        qd_residual=bool(qd["residual"] < float(sv.get("qd_tol", 1e-6))),
        trajectory=bool(report["trajectory_hausdorff"] < float(sv.get("hausdorff_tol", 1e-3))),
    )
    if "poles" in sv:
        checks["pole_count"] = report["omega"]["pole_count"] == int(sv["poles"])
    if "zeros" in sv:
        checks["zero_count"] = report["omega"]["zero_count"] == int(sv["zeros"])
    report["checks"] = checks
    report["passed"] = all(checks.values())
    result["report"] = report
    return result


def cmd_maxmin(cfg: RunConfig, out: Path) -> int:
    from .quaddiff import support_polylines, svg_overlay, zeros_csv

    res = run_maxmin(cfg)
    rep = res["report"]
    r = res["stage1"]
    be = res["backend"]
    mu = res["measure"]
    om = res["omega"]
    contour = dict(family_contour=r.contour.to_dict(), support=[list(s) for s in support_polylines(mu)])
    if "refined" in res:
        contour["endpoints"] = list(res["refined"].boutroux.endpoints)
        (out / "measure.csv").write_text(_measure_csv(mu, be))
        (out / "measure_stage1.csv").write_text(r.measure.to_csv())
    else:
        (out / "measure.csv").write_text(r.measure.to_csv())
    write_json(out / "contour.json", contour)
    (out / "omega_zeros.csv").write_text(zeros_csv(om.zeros, om.poles))
    svg = svg_overlay(supports=support_polylines(mu), trajectories=res["trajectories"], zeros=om.zeros,
                      poles=om.poles, ovals=_oval_lines(be), box=(0.0, 1.0, 0.0, be.tau.imag))
    (out / "trajectories.svg").write_text(svg)
    write_json(out / "report.json", rep)
    return EXIT_OK if rep["passed"] else EXIT_NUMERICAL


def cmd_tiling(cfg: RunConfig, out: Path) -> int:
    import csv
    import io

    from .tiling import HexagonDims, enumeration_check, kernel_matrix, kernel_sites, spectral_curve

    W = _weighting(cfg)
    t = cfg.tiling
    tol = float(t.get("tol", 1e-8))
    sc = spectral_curve(W)
    write_json(out / "spectral_curve.json", sc.to_dict())
    dims = HexagonDims.from_NML(int(t.get("N", 1)), int(t.get("M", 1)), int(t.get("L", 1)), W.p, W.q)
    sites = kernel_sites(W, dims)
    K = kernel_matrix(W, dims, sites)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["x", "y", "x2", "y2", "re", "im"])
    for a, (xa, ya) in enumerate(sites):
        for b, (xb, yb) in enumerate(sites):
            wr.writerow([xa, ya, xb, yb, f"{K[a, b].real:.12g}", f"{K[a, b].imag:.12g}"])
    (out / "kernel.csv").write_text(buf.getvalue())
    chk = enumeration_check(W, dims)
    lo, hi = chk["density_range"]
    ok = (chk["Z_agree"] and chk["one_point_error"] < tol and chk["two_point_error"] < tol
          and lo > -tol and hi < 1 + tol)
    chk.update(dims=dict(N=dims.N, M=dims.M, L=dims.L), tol=tol, verdict="pass" if ok else "fail")
    write_json(out / "enumeration_check.json", chk)
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_aztec(cfg: RunConfig, out: Path) -> int:
    from .tiling import aztec_verify

    a = cfg.aztec
    rows = []
    ok = True
    for r in a.get("radii", [0.5]):
        rep = aztec_verify(float(a.get("alpha", 1.5)), float(r), n=int(a.get("n", 200)), seed=cfg.seed)
        passed = dict(
            harmonicity=rep["harmonicity"] < a.get("harmonicity_tol", 1e-6)
            and abs(rep["log_coefficient_p1"] + 1) < a.get("harmonicity_tol", 1e-6) * 100
            and abs(rep["log_coefficient_inf"] - 1) < a.get("harmonicity_tol", 1e-6) * 100,
            balayage=rep["balayage"] < a.get("balayage_tol", 1e-4),
            equilibrium=rep["density_error"] < a.get("density_tol", 1e-3)
            and rep["variational"] < a.get("s_property_tol", 1e-3),
            s_property=max(rep["s_property_real"], rep["s_property_imag"]) < a.get("s_property_tol", 1e-3),
        )
        rep["checks"] = passed
        ok = ok and all(passed.values())
        rows.append(rep)
    write_json(out / "report.json", dict(alpha=a.get("alpha", 1.5), runs=rows, passed=ok))
    return EXIT_OK if ok else EXIT_NUMERICAL


COMMANDS = dict(kernels=cmd_kernels, equilibrium=cmd_equilibrium, maxmin=cmd_maxmin, tiling=cmd_tiling,
                aztec=cmd_aztec)


def _exit_code(exc) -> int:
    from .maxmin import AdmissibilityError, BoundaryStallError, GateError, MaxMinNonConvergence
    from .quaddiff import StepCollapseError
    from .tiling import WeightingError

    if isinstance(exc, GateError):
        return EXIT_GATE
    if isinstance(exc, (QPNonConvergence, MaxMinNonConvergence, BoundaryStallError, NonConvergenceError,
                        NotPositiveDefiniteError, StepCollapseError, NumericalFailure, DegenerateCurveError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigError, ContourError, FieldError, WeightingError, AdmissibilityError, ValueError,
                        OSError)):
        return EXIT_INVALID
    return EXIT_NUMERICAL


def run(command, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[command](cfg, out)
    except Exception as e:  # noqa: BLE001 - mapped onto the exit-code contract
        code = _exit_code(e)
        print(f"ellipot {command}: {type(e).__name__}: {e}", file=sys.stderr)
        return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="ellipot", description="Weighted potential theory on genus-one surfaces.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="TOML run configuration")
    ap.add_argument("--preset", help="named preset (" + ", ".join(sorted(PRESETS)) + ")")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int, help="random seed")
    ap.add_argument("--tol", type=float, help="solver tolerance")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, args.preset)
        if args.out is not None:
            cfg = cfg.with_override(["out"], args.out)
        if args.seed is not None:
            cfg = cfg.with_override(["seed"], args.seed)
        if args.tol is not None:
            cfg = cfg.with_override(["solver", "tol"], args.tol)
    except ConfigError as e:
        print(f"ellipot: {e}", file=sys.stderr)
        return EXIT_INVALID
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
