"""Config parsing, the solve/verify/plot command surface, and serialization.

Configs and reports are JSON with a canonical form: sorted keys and floats
printed to 17 significant digits, so write -> load -> write is byte-stable.
Field files are flat CSVs over the full lattice (x varying slowest), which
keeps them trivially reloadable for plotting.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from jsonschema import Draft202012Validator
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from . import design, oracles, solver_flow, solver_grid
from .geometry import Domain2D, Grid, GeometryError, build_grid
from .measures import (ArcDensity, Atom, AreaDensity, BoundaryDensity,
                       MeasureError, SegmentDensity, SourceMeasure, rasterize)

BACKENDS = ("pdhg", "flow-grid", "flow-visibility")
DEFAULT_VIS_RESOLUTION = 128

REPORT_KEYS = ("value_Q1", "Y", "gap", "residual_div", "trace_total",
               "rank_one_max_violation", "flux_mismatch", "support_defect",
               "iterations", "backend", "resolution", "wall_time")


class CliError(ValueError):
    """Raised for config and command-surface problems (exit status 1)."""


# ---------------------------------------------------------------------------
# Canonical JSON
# ---------------------------------------------------------------------------

def _canonical(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        if not math.isfinite(obj):
            raise CliError(f"non-finite number {obj!r} is not serializable")
        out.append(format(obj, ".17g"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for k, item in enumerate(obj):
            if k:
                out.append(", ")
            _canonical(item, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for k, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise CliError(f"non-string key {key!r}")
            if k:
                out.append(", ")
            out.append(json.dumps(key) + ": ")
            _canonical(obj[key], out)
        out.append("}")
    else:
        raise CliError(f"unserializable object of type {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit floats."""
    out: list = []
    _canonical(obj, out)
    return "".join(out) + "\n"


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Config schema and loading
# ---------------------------------------------------------------------------

_POINT = {"type": "array", "items": {"type": "number"},
          "minItems": 2, "maxItems": 2}
_RING = {"type": "array", "items": _POINT, "minItems": 3}
_COEFFS = {"type": "array", "items": {"type": "number"},
           "minItems": 3, "maxItems": 3}

_SOURCE_VARIANTS = [
    {"type": "object", "additionalProperties": False,
     "required": ["type", "point", "weight"],
     "properties": {"type": {"const": "atom"}, "point": _POINT,
                    "weight": {"type": "number"}}},
    {"type": "object", "additionalProperties": False,
     "required": ["type", "a", "b"],
     "properties": {"type": {"const": "segment"}, "a": _POINT, "b": _POINT,
                    "coeffs": _COEFFS}},
    {"type": "object", "additionalProperties": False,
     "required": ["type", "center", "radius", "theta0", "theta1"],
     "properties": {"type": {"const": "arc"}, "center": _POINT,
                    "radius": {"type": "number", "exclusiveMinimum": 0},
                    "theta0": {"type": "number"}, "theta1": {"type": "number"},
                    "coeffs": _COEFFS}},
    {"type": "object", "additionalProperties": False,
     "required": ["type", "coef"],
     "properties": {"type": {"const": "boundary"}, "coef": {"type": "number"},
                    "i": {"type": "integer", "minimum": 0},
                    "j": {"type": "integer", "minimum": 0}}},
    {"type": "object", "additionalProperties": False,
     "required": ["type", "polygon", "value"],
     "properties": {"type": {"const": "area"}, "polygon": _RING,
                    "value": {"type": "number"}}},
]

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["domain", "sources", "lambda0", "solver"],
    "properties": {
        "domain": {
            "type": "object", "additionalProperties": False,
            "minProperties": 1, "maxProperties": 1,
            "properties": {
                "polygon": {
                    "type": "object", "additionalProperties": False,
                    "required": ["outer"],
                    "properties": {"outer": _RING,
                                   "holes": {"type": "array",
                                             "items": _RING}}},
                "disc": {
                    "type": "object", "additionalProperties": False,
                    "required": ["center", "radius"],
                    "properties": {"center": _POINT,
                                   "radius": {"type": "number",
                                              "exclusiveMinimum": 0}}},
            }},
        "sources": {"type": "array", "minItems": 1,
                    "items": {"oneOf": _SOURCE_VARIANTS}},
        "lambda0": {"type": "number", "exclusiveMinimum": 0},
        "solver": {
            "type": "object", "additionalProperties": False,
            "required": ["backend"],
            "properties": {
                "backend": {"enum": list(BACKENDS)},
                "resolution": {"type": "integer", "minimum": 4},
                "max_iter": {"type": "integer", "minimum": 1},
                "tol_gap": {"type": "number", "exclusiveMinimum": 0},
                "tol_div": {"type": "number", "exclusiveMinimum": 0},
                "step_ratio": {"type": "number", "exclusiveMinimum": 0},
            }},
        "outputs": {
            "type": "object", "additionalProperties": False,
            "properties": {"out_dir": {"type": "string"}}},
    },
}

_VALIDATOR = Draft202012Validator(CONFIG_SCHEMA)


@dataclass(frozen=True, eq=False)
class ProblemConfig:
    """A validated problem: domain, balanced source, budget, solver choices."""
    raw: dict
    domain: Domain2D
    Q: SourceMeasure
    lambda0: float
    backend: str
    resolution: Optional[int]
    max_iter: Optional[int]
    tol_gap: Optional[float]
    tol_div: Optional[float]
    step_ratio: Optional[float]
    out_dir: Optional[str]

    def to_json(self) -> str:
        return canonical_json(self.raw)


def _build_domain(rec: dict) -> Domain2D:
    if "polygon" in rec:
        poly = rec["polygon"]
        holes = tuple(np.asarray(hl, float) for hl in poly.get("holes", []))
        return Domain2D(outer=np.asarray(poly["outer"], float), holes=holes)
    disc = rec["disc"]
    return Domain2D(center=tuple(disc["center"]), radius=float(disc["radius"]))


def _build_component(rec: dict):
    kind = rec["type"]
    if kind == "atom":
        return Atom(point=tuple(rec["point"]), weight=float(rec["weight"]))
    if kind == "segment":
        return SegmentDensity(a=tuple(rec["a"]), b=tuple(rec["b"]),
                              coeffs=tuple(rec.get("coeffs", (1.0, 0.0, 0.0))))
    if kind == "arc":
        return ArcDensity(center=tuple(rec["center"]),
                          radius=float(rec["radius"]),
                          theta0=float(rec["theta0"]),
                          theta1=float(rec["theta1"]),
                          coeffs=tuple(rec.get("coeffs", (1.0, 0.0, 0.0))))
    if kind == "boundary":
        return BoundaryDensity(coef=float(rec["coef"]),
                               i=int(rec.get("i", 0)), j=int(rec.get("j", 0)))
    return AreaDensity(region=Domain2D(outer=np.asarray(rec["polygon"], float)),
                       value=float(rec["value"]))


def parse_config(data: dict) -> ProblemConfig:
    """Validate a parsed JSON object and assemble the typed problem."""
    errors = sorted(_VALIDATOR.iter_errors(data),
                    key=lambda e: (len(e.absolute_path), str(e.absolute_path)))
    if errors:
        err = errors[-1]
        where = "/".join(str(p) for p in err.absolute_path) or "(top level)"
        raise CliError(f"config field {where}: {err.message}")
    try:
        domain = _build_domain(data["domain"])
        comps = tuple(_build_component(r) for r in data["sources"])
        Q = SourceMeasure(components=comps, domain=domain)
    except (GeometryError, MeasureError) as exc:
        raise CliError(str(exc)) from exc
    solver = data["solver"]
    backend = solver["backend"]
    resolution = solver.get("resolution")
    if backend in ("pdhg", "flow-grid") and resolution is None:
        raise CliError(f"backend {backend!r} needs solver.resolution")
    return ProblemConfig(
        raw=data, domain=domain, Q=Q, lambda0=float(data["lambda0"]),
        backend=backend, resolution=resolution,
        max_iter=solver.get("max_iter"), tol_gap=solver.get("tol_gap"),
        tol_div=solver.get("tol_div"), step_ratio=solver.get("step_ratio"),
        out_dir=data.get("outputs", {}).get("out_dir"))


def load_config(path: str) -> ProblemConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"config parse error at line {exc.lineno}, "
                       f"column {exc.colno}: {exc.msg}") from exc
    return parse_config(data)


def write_config(cfg: ProblemConfig, path: str) -> None:
    _atomic_write(path, cfg.to_json())


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolveReport:
    """Flat scalar summary of one pipeline run."""
    value_Q1: float
    Y: float
    gap: float
    residual_div: float
    trace_total: float
    rank_one_max_violation: float
    flux_mismatch: float
    support_defect: float
    iterations: int
    backend: str
    resolution: int
    wall_time: float
    converged: bool = True  # drives the exit status; not serialized

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_KEYS}

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def _auto_step_ratio(resolution: int) -> float:
    # the dual potential is O(1) while cell fluxes are O(h); biasing the
    # steps toward the dual by ~resolution/4 is what makes 256-cell runs
    # reach their certificates inside the default iteration budget
    return float(min(64, max(8, resolution // 4)))


def _solver_params(cfg: ProblemConfig) -> solver_grid.SolverParams:
    ratio = cfg.step_ratio if cfg.step_ratio is not None \
        else _auto_step_ratio(cfg.resolution)
    kw = {"step_ratio": ratio}
    if cfg.max_iter is not None:
        kw["max_iter"] = cfg.max_iter
    if cfg.tol_gap is not None:
        kw["tol_gap"] = cfg.tol_gap
    if cfg.tol_div is not None:
        kw["tol_div"] = cfg.tol_div
    return solver_grid.SolverParams(**kw)


def _lipschitz_extension(domain: Domain2D, grid: Grid, points: np.ndarray,
                         values: np.ndarray) -> np.ndarray:
    """Tightest 1-Lipschitz extension of node values to the whole lattice.

    u(x) = min_k (values[k] + d(x, p_k)) with d the grid-path metric, which
    reproduces values[k] at the anchor nodes whenever values is itself
    1-Lipschitz for that metric.
    """
    net = solver_flow._grid_network(domain, SourceMeasure((), domain), grid)
    n = net.n_nodes
    adj = coo_matrix((net.costs, (net.edges[:, 0], net.edges[:, 1])),
                     shape=(n, n))
    gi = np.clip(np.rint((points[:, 0] - grid.origin[0]) / grid.h), 0,
                 grid.nx).astype(int)
    gj = np.clip(np.rint((points[:, 1] - grid.origin[1]) / grid.h), 0,
                 grid.ny).astype(int)
    nid = np.full((grid.nx + 1, grid.ny + 1), -1, np.int64)
    nid[net.node_ij[:, 0], net.node_ij[:, 1]] = np.arange(n)
    src = nid[gi, gj]
    if np.any(src < 0):
        raise CliError("a flow node has no active lattice node nearby")
    d = dijkstra(adj, directed=False, indices=src)
    u = np.min(values[:, None] + d, axis=0)
    out = np.zeros((grid.nx + 1, grid.ny + 1))
    out[net.node_ij[:, 0], net.node_ij[:, 1]] = u
    return out


def _deposit_segments(sol: solver_flow.FlowSolution, net: solver_flow.FlowNetwork,
                      grid: Grid) -> solver_grid.FluxMeasure:
    """Spread visibility-edge flows over the grid cells they cross."""
    p = np.zeros((grid.nx, grid.ny, 2))
    for k in np.nonzero(sol.flows)[0]:
        a = net.nodes[net.edges[k, 0]]
        b = net.nodes[net.edges[k, 1]]
        length = float(np.hypot(*(b - a)))
        if length == 0:
            continue
        m = max(int(math.ceil(4 * length / grid.h)), 1)
        t = (np.arange(m) + 0.5) / m
        xs = a[0] + t * (b[0] - a[0])
        ys = a[1] + t * (b[1] - a[1])
        # flux opposes the shipping direction of the flow
        seg = -sol.flows[k] * (b - a) / m
        for x, y in zip(xs, ys):
            ci, cj = grid.locate_cell(x, y)
            p[ci, cj, 0] += seg[0]
            p[ci, cj, 1] += seg[1]
    return solver_grid.FluxMeasure(p=p, grid=grid)


def _run_backend(cfg: ProblemConfig):
    """Dispatch to a backend; return (u, p, value, rel_gap, resid, iters,
    converged, grid)."""
    if cfg.backend == "pdhg":
        grid = build_grid(cfg.domain, cfg.resolution)
        q = rasterize(cfg.Q, grid)
        sol = solver_grid.solve(q, _solver_params(cfg))
        rel_gap = sol.gap / max(abs(sol.value), 1e-300)
        return (sol.u, sol.p, sol.value, rel_gap, sol.residual_div,
                sol.iterations, sol.converged, grid)

    if cfg.backend == "flow-grid":
        net = solver_flow.build_network(cfg.domain, cfg.Q, mode="grid",
                                        resolution=cfg.resolution)
        fsol = solver_flow.min_cost_flow(net)
        grid = net.grid
        p = solver_flow.flow_to_flux(fsol, net, grid)
        u = solver_flow.potential_field(fsol, net)
        rep = solver_flow.slackness_report(fsol, net)
        scale = float(np.abs(net.supplies).sum()) or 1.0
        return (u, p, fsol.objective, 0.0, rep["conservation"] / scale,
                0, True, grid)

    net = solver_flow.build_network(cfg.domain, cfg.Q, mode="visibility")
    fsol = solver_flow.min_cost_flow(net)
    res = cfg.resolution or DEFAULT_VIS_RESOLUTION
    grid = build_grid(cfg.domain, res)
    p = _deposit_segments(fsol, net, grid)
    uvals = _lipschitz_extension(cfg.domain, grid, net.nodes, fsol.potentials)
    anchor = (int(np.argwhere(grid.active_nodes)[0, 0]),
              int(np.argwhere(grid.active_nodes)[0, 1]))
    u = solver_grid.PotentialField(values=uvals, grid=grid, anchor=anchor)
    rep = solver_flow.slackness_report(fsol, net)
    scale = float(np.abs(net.supplies).sum()) or 1.0
    return (u, p, fsol.objective, 0.0, rep["conservation"] / scale,
            0, True, grid)


def run_solve(cfg: ProblemConfig, out_dir: Optional[str] = None) -> SolveReport:
    """Solve, assemble the design, and write report plus field files."""
    t0 = time.perf_counter()
    u, p, value, rel_gap, resid, iters, converged, grid = _run_backend(cfg)
    C = design.build_optimal_tensor(u, p, cfg.lambda0)
    u_tilde = design.optimal_temperature(u, value, cfg.lambda0)
    q = solver_grid.effective_source(rasterize(cfg.Q, grid))
    comp = design.compliance_report(C, u_tilde, q, p)
    defect = design.support_condition(u, p)
    report = SolveReport(
        value_Q1=value, Y=value ** 2 / cfg.lambda0, gap=rel_gap,
        residual_div=resid, trace_total=C.trace_total(),
        rank_one_max_violation=C.rank_one_max_violation(),
        flux_mismatch=comp.flux_mismatch, support_defect=defect,
        iterations=iters, backend=cfg.backend,
        resolution=grid.nx, wall_time=time.perf_counter() - t0,
        converged=converged)
    target = out_dir or cfg.out_dir
    if target is not None:
        write_outputs(report, u, p, C, grid, target)
    return report


def _csv_rows(header: str, cols: list[np.ndarray]) -> str:
    lines = [header]
    flat = [np.asarray(c).ravel() for c in cols]
    for row in zip(*flat):
        lines.append(",".join(format(float(v), ".17g") for v in row))
    return "\n".join(lines) + "\n"


def write_outputs(report: SolveReport, u, p, C, grid: Grid, out_dir: str) -> None:
    """Write report.json and the u/p/tensor CSVs atomically."""
    os.makedirs(out_dir, exist_ok=True)
    xn, yn = np.meshgrid(
        grid.origin[0] + np.arange(grid.nx + 1) * grid.h,
        grid.origin[1] + np.arange(grid.ny + 1) * grid.h, indexing="ij")
    xc, yc = grid.cell_centers()
    _atomic_write(os.path.join(out_dir, "report.json"), report.to_json())
    _atomic_write(os.path.join(out_dir, "u.csv"),
                  _csv_rows("x,y,u", [xn, yn, u.values]))
    _atomic_write(os.path.join(out_dir, "p.csv"),
                  _csv_rows("x,y,p1,p2", [xc, yc, p.p[:, :, 0], p.p[:, :, 1]]))
    _atomic_write(os.path.join(out_dir, "tensor.csv"),
                  _csv_rows("x,y,rho,n1,n2",
                            [xc, yc, C.rho, C.n[:, :, 0], C.n[:, :, 1]]))


# ---------------------------------------------------------------------------
# Verify
# ---------------------------------------------------------------------------

def run_verify(example: str, backend: str = "pdhg",
               resolution: Optional[int] = 256,
               tol: float = 0.02, lambda0: float = 1.0) -> list[dict]:
    """Compare a solver run against the named closed-form benchmark.

    Returns one row per check: {check, measured, tol, pass}.
    """
    try:
        ex = oracles.get_example(example)
    except KeyError as exc:
        raise CliError(str(exc)) from exc
    if backend not in BACKENDS:
        raise CliError(f"unknown backend {backend!r}; pick one of {BACKENDS}")
    raw = {"domain": {"disc": {"center": [0.0, 0.0], "radius": 1.0}}}
    cfg = ProblemConfig(
        raw=raw, domain=ex.domain, Q=ex.Q, lambda0=lambda0, backend=backend,
        resolution=resolution, max_iter=None, tol_gap=None, tol_div=None,
        step_ratio=None, out_dir=None)
    u, p, value, rel_gap, resid, iters, converged, grid = _run_backend(cfg)
    C = design.build_optimal_tensor(u, p, lambda0)

    mu = p.density()
    total = float(mu.sum())
    if total > 0:
        xc, yc = grid.cell_centers()
        inside = ex.in_support(xc.ravel(), yc.ravel(), pad=2 * grid.h)
        outside_frac = float(mu.ravel()[~inside].sum()) / total
    else:
        outside_frac = 0.0

    rows = [
        {"check": "value_Q1",
         "measured": abs(value - ex.value_Q1) / ex.value_Q1},
        {"check": "trace",
         "measured": abs(C.trace_total() - lambda0) / lambda0},
        {"check": "gap", "measured": rel_gap},
        {"check": "support_outside_mass", "measured": outside_frac},
        {"check": "alignment_defect",
         "measured": design.support_condition(u, p)},
    ]
    for row in rows:
        row["tol"] = tol
        row["pass"] = bool(row["measured"] <= tol)
    return rows


# ---------------------------------------------------------------------------
# Plots
# ---------------------------------------------------------------------------

def _load_csv(path: str, ncols: int) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != ncols:
        raise CliError(f"{os.path.basename(path)} has {data.shape[1]} columns, "
                       f"expected {ncols}")
    return data


def emit_plots(field_dir: str, out_dir: Optional[str] = None) -> list[str]:
    """Render u, flux density, and tensor-direction images from field CSVs."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = out_dir or field_dir
    needed = ["u.csv", "p.csv", "tensor.csv"]
    missing = [f for f in needed if not os.path.exists(os.path.join(field_dir, f))]
    if missing:
        raise CliError("missing field files: " + ", ".join(missing))
    os.makedirs(out_dir, exist_ok=True)

    def grid_shape(xy: np.ndarray) -> tuple[int, int]:
        ny = int(np.count_nonzero(xy[:, 0] == xy[0, 0]))
        return len(xy) // ny, ny

    paths = []
    udata = _load_csv(os.path.join(field_dir, "u.csv"), 3)
    nxu, nyu = grid_shape(udata)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.pcolormesh(udata[:, 0].reshape(nxu, nyu), udata[:, 1].reshape(nxu, nyu),
                  udata[:, 2].reshape(nxu, nyu), shading="nearest")
    ax.set_aspect("equal")
    ax.set_title("potential u")
    paths.append(os.path.join(out_dir, "u.png"))
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)

    pdata = _load_csv(os.path.join(field_dir, "p.csv"), 4)
    nxc, nyc = grid_shape(pdata)
    dens = np.hypot(pdata[:, 2], pdata[:, 3])
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.pcolormesh(pdata[:, 0].reshape(nxc, nyc), pdata[:, 1].reshape(nxc, nyc),
                  dens.reshape(nxc, nyc), shading="nearest", cmap="magma")
    ax.set_aspect("equal")
    ax.set_title("flux density |p|")
    paths.append(os.path.join(out_dir, "density.png"))
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)

    tdata = _load_csv(os.path.join(field_dir, "tensor.csv"), 5)
    live = tdata[:, 2] > 0
    fig, ax = plt.subplots(figsize=(5, 5))
    if live.any():
        scale = tdata[live, 2] / tdata[:, 2].max()
        ax.quiver(tdata[live, 0], tdata[live, 1],
                  tdata[live, 3] * scale, tdata[live, 4] * scale,
                  angles="xy", scale_units="xy", scale=None,
                  width=0.002, pivot="mid")
    ax.set_aspect("equal")
    ax.set_title("tensor directions (length ~ rho)")
    paths.append(os.path.join(out_dir, "tensor.png"))
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)
    return paths


# ---------------------------------------------------------------------------
# Command surface
# ---------------------------------------------------------------------------

def _cmd_solve(args) -> int:
    cfg = load_config(args.config)
    report = run_solve(cfg, out_dir=args.out)
    print(report.to_json(), end="")
    return 0 if report.converged else 2


def _cmd_verify(args) -> int:
    rows = run_verify(args.example, backend=args.backend,
                      resolution=args.resolution, tol=args.tol)
    width = max(len(r["check"]) for r in rows)
    ok = True
    for r in rows:
        ok &= r["pass"]
        print(f"{r['check']:<{width}}  {r['measured']:13.6e}  "
              f"tol {r['tol']:.3g}  {'pass' if r['pass'] else 'FAIL'}")
    return 0 if ok else 2


def _cmd_plot(args) -> int:
    for path in emit_plots(args.dir, out_dir=args.out):
        print(path)
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="heatdesign",
        description="Optimal conductivity design via minimal-flow transport")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run a config through the pipeline")
    ps.add_argument("config")
    ps.add_argument("--out", default=None, help="output directory")
    ps.set_defaults(func=_cmd_solve)

    pv = sub.add_parser("verify", help="check a solver against a benchmark")
    pv.add_argument("example")
    pv.add_argument("--backend", default="pdhg", choices=BACKENDS)
    pv.add_argument("--resolution", type=int, default=256)
    pv.add_argument("--tol", type=float, default=0.02)
    pv.set_defaults(func=_cmd_verify)

    pp = sub.add_parser("plot", help="render images from field files")
    pp.add_argument("dir")
    pp.add_argument("--out", default=None)
    pp.set_defaults(func=_cmd_plot)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, solver_flow.FlowError, solver_grid.SolverError,
            design.DesignError, GeometryError, MeasureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
