"""End-to-end analysis of one potential: averaging, both spectra, bounds and verdicts."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import grid as grid_mod
from .errors import ConfigError, ConvergenceError, ZeroMeanError
from .potential import AngularQuadrature, PotentialField, spec_from_dict, verify_zero_mean
from .radial import RadialGrid, isotropic_spectrum
from .symmetry import INVARIANCE_TOL, parse_group, selection_rule, verify_invariance
from .perturbation import perturbation_report
from .variational import (
    build_coupling_matrix,
    ground_on_grid,
    hylleraas_undheim_bounds,
    matrix_element,
    p_basis,
    shell_coupling_matrix,
    verify_excited_inequality,
    verify_ground_inequality,
)

SCHEMA_VERSION = 1

DEFAULTS = {
    "radial": {"r_max": 20.0, "n_points": 2000, "n_channels": 3, "n_states": 4},
    "grid": {"L": 8.0, "n": 64, "n_coarse": None, "k": 6, "tol": 1e-8},
    "quadrature": {"scheme": "product_gauss_trapezoid", "polar_order": 32, "azimuthal_order": 64},
    "perturbation": {"max_channel": 4, "states_per_channel": 40, "cutoff": None, "energy_cap": None},
}
RUN_KEYS = set(DEFAULTS) | {"seed"}

ZERO_MEAN_TOL = 1e-9
EQ7_RTOL = 1e-6
CROSS_RTOL = 1e-6
TRACE_RTOL = 1e-8
ROUNDOFF_FLOOR = 1e-12  # relative to the spectral scale, for M near zero
LAMBDA_RTOL = 1e-12
BASIS_TOL = 1e-6
TABLE_SPACING = 0.005


@dataclass
class RunConfig:
    spec: object
    radial: dict
    grid: dict
    quadrature: dict
    perturbation: dict
    seed: int = 0


def parse_config(data: dict) -> RunConfig:
    """Split a config mapping into the potential description and solver blocks."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    spec_part = {k: v for k, v in data.items() if k not in RUN_KEYS}
    spec = spec_from_dict(spec_part)
    blocks = {}
    for name, defaults in DEFAULTS.items():
        block = data.get(name, {}) or {}
        if not isinstance(block, dict):
            raise ConfigError(f"{name} must be an object")
        unknown = set(block) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
        blocks[name] = {**defaults, **block}
    _check_blocks(blocks)
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    if spec.symmetry is not None:
        try:
            tag = parse_group(spec.symmetry)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if tag.dimension != spec.dimension:
            raise ConfigError(f"symmetry {spec.symmetry!r} does not apply in {spec.dimension}D")
    return RunConfig(spec, blocks["radial"], blocks["grid"], blocks["quadrature"],
                     blocks["perturbation"], seed)


def _check_blocks(blocks):
    def positive(block, key, integer=False, minimum=0):
        v = blocks[block][key]
        ok = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not ok or not v > minimum:
            raise ConfigError(f"{block}.{key} must be a {'integer' if integer else 'number'} > {minimum}")

    positive("radial", "r_max")
    positive("radial", "n_points", True, 63)
    positive("radial", "n_channels", True, 1)
    positive("radial", "n_states", True)
    positive("grid", "L")
    positive("grid", "n", True, 2)
    positive("grid", "k", True, 1)
    positive("grid", "tol")
    if blocks["grid"]["n_coarse"] is not None:
        positive("grid", "n_coarse", True, 1)
        if blocks["grid"]["n_coarse"] >= blocks["grid"]["n"]:
            raise ConfigError("grid.n_coarse must be smaller than grid.n")
    positive("quadrature", "polar_order", True)
    positive("quadrature", "azimuthal_order", True)
    positive("perturbation", "max_channel", True)
    positive("perturbation", "states_per_channel", True)
    if blocks["perturbation"]["cutoff"] is not None:
        positive("perturbation", "cutoff", True)


def load_config(path) -> dict:
    try:
        with open(Path(path)) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _v(value, error):
    return {"value": None if value is None else float(value),
            "error": None if error is None else float(error)}


def _t(value, tolerance):
    return {"value": None if value is None else float(value), "tolerance": float(tolerance)}


def _plain(obj):
    """Recursively convert numpy scalars/arrays into JSON-friendly Python objects."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def build_field(cfg: RunConfig) -> PotentialField:
    d = cfg.spec.dimension
    quad = None
    if d > 1:
        q = cfg.quadrature
        quad = AngularQuadrature(d, q["scheme"], q["polar_order"], q["azimuthal_order"])
    reach = 2.25 * cfg.grid["L"] * np.sqrt(d) + 1.0
    points = int(np.ceil(reach / TABLE_SPACING)) + 1
    return PotentialField(cfg.spec, quad, table_r_max=reach, table_points=points)


def _boundary_values(field, g):
    """V on the outer layer of the Cartesian box."""
    pts = g.points()
    on_edge = np.any(np.isclose(np.abs(pts), g.axis[-1]), axis=1)
    return field.values(pts[on_edge])


def analyse(cfg: RunConfig, dump_dir=None) -> dict:
    """Run the whole analysis; returns the report mapping.

    Raises ConvergenceError (with ``partial`` set to the report so far) when
    the Cartesian eigensolver fails.
    """
    timings = {}
    t0 = time.perf_counter()
    spec = cfg.spec
    d = spec.dimension
    report = {"schema_version": SCHEMA_VERSION, "spec": spec.to_dict(),
              "parameters": {"radial": cfg.radial, "grid": cfg.grid, "quadrature": cfg.quadrature,
                             "perturbation": cfg.perturbation, "seed": cfg.seed}}
    flags = []

    field = build_field(cfg)
    check_radii = np.linspace(0.0, cfg.radial["r_max"], 41)[1:] - 0.5 * cfg.radial["r_max"] / 40 / 3
    zero_mean = verify_zero_mean(field, field.quad, check_radii, ZERO_MEAN_TOL)
    report["zero_mean"] = {"max_residual": _t(zero_mean, ZERO_MEAN_TOL), "radii": len(check_radii)}
    timings["average"] = time.perf_counter() - t0

    t = time.perf_counter()
    rgrid = RadialGrid(cfg.radial["r_max"], cfg.radial["n_points"])
    iso = isotropic_spectrum(field, rgrid, cfg.radial["n_channels"], cfg.radial["n_states"])
    timings["radial"] = time.perf_counter() - t
    e0b = iso.ground.energy if iso.ground else None
    e0b_err = iso.ground.error if iso.ground else None
    e1b = iso.excited.energy if iso.excited else None
    e1b_err = iso.excited.error if iso.excited else None
    report["isotropic"] = {
        "E0bar": _v(e0b, e0b_err),
        "E1bar": _v(e1b, e1b_err),
        "first_excited_kind": iso.first_excited_kind,
        "n_bound": iso.n_bound,
        "tail_converged": iso.tail_converged,
        "states": [{"channel": s.channel, "radial_index": s.radial_index,
                    "energy": _v(s.energy, s.error)} for s in iso.states],
        "s_candidate": _v(iso.s_candidate.energy, iso.s_candidate.error) if iso.s_candidate else None,
        "p_candidate": _v(iso.p_candidate.energy, iso.p_candidate.error) if iso.p_candidate else None,
        "notes": iso.notes,
    }

    scale_terms = [abs(e) for e in (e0b, e1b) if e is not None]
    if e0b is not None and e1b is not None:
        scale_terms.append(abs(e1b - e0b))
    spectral_scale = max(scale_terms) if scale_terms else 1.0
    spectral_scale = spectral_scale if spectral_scale > 0 else 1.0
    report["spectral_scale"] = spectral_scale

    t = time.perf_counter()
    g = cfg.grid
    try:
        full = grid_mod.grid_spectrum(field, g["L"], g["n"], g["n_coarse"], g["k"], g["tol"], cfg.seed)
    except ConvergenceError as exc:
        report["flags"] = {"bug": False, "messages": [f"grid solver: {exc}"]}
        report["timings"] = timings
        exc.partial = _plain(report)
        raise
    timings["grid"] = time.perf_counter() - t

    boundary = _boundary_values(field, full.grid)
    decaying = bool(np.max(np.abs(boundary)) <= 1e-6 * spectral_scale)
    threshold = 0.0 if decaying else float(np.min(boundary))
    n_bound_full = sum(1 for p in full.pairs if p.energy < threshold - full.E0_error)
    # number of distinct bound levels matters for E1
    full_levels = 0
    if full.E0 < threshold - full.E0_error:
        full_levels = 1
        if full.E1 is not None and full.E1 < threshold - full.E1_error:
            full_levels = 2
    report["full"] = {
        "E0": _v(full.E0, full.E0_error),
        "E1": _v(full.E1, full.E1_error) if full_levels >= 2 else _v(None, None),
        "ground_degeneracy": full.ground_degeneracy,
        "excited_degeneracy": full.excited_degeneracy,
        "n_bound_eigenpairs": n_bound_full,
        "bound_threshold": threshold,
        "box_converged": full.box_converged,
        "box_enlargements": full.enlargements,
        "L": full.grid.L, "n": full.grid.n, "n_coarse": full.coarse_grid.n,
        "max_residual": _t(max(p.residual_norm for p in full.pairs), g["tol"]),
        "fine_energies": [p.energy for p in full.pairs],
        "coarse_energies": full.coarse_energies,
    }

    # ---- bound-state existence
    if decaying:
        ev = grid_mod.bound_state_exists(field, full.grid.L, full.grid.n, full.coarse_grid.n,
                                         tol=g["tol"], seed=cfg.seed, spectrum=full)
        exists = {"verdict": ev.verdict, "E0": _v(ev.E0, ev.error), "E0_coarse": ev.E0_coarse,
                  "E0_doubled_box": ev.E0_doubled_box, "stable": ev.stable, "threshold": 0.0}
    else:
        ok = full.E0 < threshold - full.E0_error
        exists = {"verdict": "true" if ok else "inconclusive", "E0": _v(full.E0, full.E0_error),
                  "threshold": threshold, "reason": "confining box boundary"}

    # ---- variational analysis on the fine Cartesian grid
    t = time.perf_counter()
    fg = full.grid
    dv = field.delta(fg.points()).reshape(fg.shape)
    cell = fg.cell_volume
    var = {}
    coupling = None
    cross_max = None
    gs_element = 0.0
    cross_threshold = None
    hu = {}
    reliable = iso.tail_converged and full.box_converged
    if iso.ground is not None:
        u0 = ground_on_grid(iso.ground, fg)
        gs_element = matrix_element(u0, dv, u0, cell)
        var["u0_dV_u0"] = _t(gs_element, EQ7_RTOL * spectral_scale)
        if e0b is not None and e1b is not None:
            cross_threshold = CROSS_RTOL * (abs(e1b) + abs(e0b) + spectral_scale)
        else:
            cross_threshold = CROSS_RTOL * (abs(e0b) + spectral_scale)
        if d >= 2 and iso.p_candidate is not None:
            pb = p_basis(iso.p_candidate, fg)
            coupling = shell_coupling_matrix(field, iso.p_candidate)
            grid_coupling = build_coupling_matrix(pb, dv)
            cross = [matrix_element(u0, dv, f, cell) for f in pb.functions]
            cross_max = max(abs(c) for c in cross)
            norm_m = max(coupling.norm, 0.0)
            trace_tol = max(TRACE_RTOL * norm_m, ROUNDOFF_FLOOR * spectral_scale)
            var["p_basis"] = {
                "orthonormality": _t(pb.orthonormality_error(), BASIS_TOL),
                "orthogonality_to_u0": _t(pb.orthogonality_to(u0), BASIS_TOL),
            }
            var["coupling_matrix"] = {
                "basis": ["p_x", "p_y", "p_z"][:d],
                "M": coupling.M,
                "eigenvalues": coupling.eigenvalues,
                "a_star": coupling.a_star,
                "norm": coupling.norm,
                "trace": _t(coupling.trace_residual, trace_tol),
                "min_eigenvalue": _t(coupling.eigenvalues[0], max(LAMBDA_RTOL * norm_m, ROUNDOFF_FLOOR * spectral_scale)),
                "tolerance": BASIS_TOL,
                "grid_check": {"M": grid_coupling.M,
                               "max_difference": float(np.max(np.abs(grid_coupling.M - coupling.M)))},
            }
            var["cross_elements"] = {"values": cross, "max": cross_max, "threshold": cross_threshold}
            if e1b is not None and iso.p_candidate is not None:
                u1 = pb.combination(coupling.a_star)
                c01 = matrix_element(u0, dv, u1, cell)
                hum = hylleraas_undheim_bounds(e0b, max(e1b, e0b), c01, coupling.eigenvalues[0])
                hu["p_branch"] = {"matrix": hum.matrix, "eigenvalues": hum.eigenvalues,
                                  "cross": c01, "excited_shift": coupling.eigenvalues[0]}
        if iso.s_candidate is not None and e1b is not None:
            u1s = ground_on_grid(iso.s_candidate, fg)
            c01 = matrix_element(u0, dv, u1s, cell)
            c11 = matrix_element(u1s, dv, u1s, cell)
            hum = hylleraas_undheim_bounds(e0b, max(e1b, e0b), c01, c11)
            hu["s_branch"] = {"matrix": hum.matrix, "eigenvalues": hum.eigenvalues,
                              "cross": c01, "excited_shift": c11}
    timings["variational"] = time.perf_counter() - t

    # pick the branch matching the first excited kind
    kind = iso.first_excited_kind
    active = None
    if kind in ("p_state", "m1_state"):
        active = hu.get("p_branch")
    elif kind in ("s_state", "m0_state", "degenerate_within_tolerance"):
        active = hu.get("s_branch")
    eps_hu = (e0b_err or 0.0) + full.E0_error + (e1b_err or 0.0) + (full.E1_error or 0.0)
    if active is not None:
        e1p, e2p = active["eigenvalues"]
        hu_checks = {
            "E0_le_Eprime1": _t(full.E0 - e1p, eps_hu),
            "E1_le_Eprime2": _t(full.E1 - e2p, eps_hu) if full_levels >= 2 else None,
            "diagonal_case": _t(float(np.max(np.abs(np.array([e1p, e2p])
                                                        - np.sort(np.diag(active["matrix"]))))), 1e-10)
            if abs(active["cross"]) <= (cross_threshold or 0.0) else None,
        }
    else:
        hu_checks = None
    var["hu_matrix"] = {**hu, "active_branch": None if active is None else
                        ("p_branch" if active is hu.get("p_branch") else "s_branch"),
                        "checks": hu_checks}
    report["variational"] = var

    # ---- symmetry
    sym = {"declared": spec.symmetry}
    guaranteed = False
    if spec.symmetry is not None:
        tag = parse_group(spec.symmetry)
        rule = selection_rule(tag, d)
        dev = verify_invariance(field, tag, 2000, radius=fg.L, axis=spec.axis, seed=cfg.seed)
        accepted = dev <= INVARIANCE_TOL
        guaranteed = rule.guaranteed_zero and accepted
        sym.update({"group": rule.group, "guaranteed_zero": rule.guaranteed_zero, "reason": rule.reason,
                    "invariance_deviation": _t(dev, INVARIANCE_TOL), "invariance_accepted": accepted})
    numerically_zero = None if cross_max is None else bool(cross_max <= cross_threshold)
    sym["numerically_confirmed"] = numerically_zero
    sym["cross_max"] = None if cross_max is None else _t(cross_max, cross_threshold)
    if guaranteed and numerically_zero is False:
        flags.append("selection rule predicts zero cross elements but numerics disagree")
    report["symmetry"] = sym

    # ---- perturbation theory
    t = time.perf_counter()
    pert = None
    if iso.ground is not None and d >= 2 and kind is not None and kind != "higher_channel":
        branch_channel = 1 if kind in ("p_state", "m1_state") else 0
        pgrid = iso.channels[branch_channel].grid
        pc = cfg.perturbation
        pr = perturbation_report(field, pgrid, kind, gs_element, coupling, pc["cutoff"],
                                 pc["max_channel"], pc["states_per_channel"], pc["energy_cap"])
        half = max(1, pr.basis_cutoff // 2)
        pert = {
            "first_order_gs": _t(pr.first_order_gs, EQ7_RTOL * spectral_scale),
            "degenerate_first_order": pr.degenerate_first_order,
            "second_order_excited": _t(pr.second_order_excited, 1e-10),
            "basis_cutoff": pr.basis_cutoff,
            "cutoff_tail_estimate": pr.cutoff_tail_estimate,
            "half_cutoff_value": pr.partial_sum(half),
            "max_channel": pc["max_channel"],
            "states_per_channel": pc["states_per_channel"],
            "energy_cap": pc["energy_cap"],
            "excluded_degenerate": pr.excluded_degenerate,
            "e1_reference": pr.e1_reference,
        }
    elif iso.ground is not None:
        pert = {"first_order_gs": _t(gs_element, EQ7_RTOL * spectral_scale),
                "degenerate_first_order": [] if coupling is None else coupling.eigenvalues,
                "second_order_excited": None}
    report["perturbation"] = pert
    timings["perturbation"] = time.perf_counter() - t

    # ---- verdicts
    if iso.ground is None:
        ground = {"status": "inconclusive", "margin": None, "tolerance": None,
                  "reason": "no bound state of the averaged potential", "bug": False}
    else:
        ground = verify_ground_inequality(e0b, e0b_err, full.E0, full.E0_error, reliable).to_dict()
    if d == 1:
        excited = {"status": "not_applicable", "margin": None, "tolerance": None,
                   "reason": "one-dimensional problem", "bug": False}
    else:
        excited = verify_excited_inequality(
            kind, iso.n_bound, full_levels, e1b, e1b_err,
            full.E1 if full_levels >= 2 else None, full.E1_error,
            guaranteed, cross_max, cross_threshold or 0.0, reliable).to_dict()
    report["verdicts"] = {"ground": ground, "excited": excited, "bound_state_exists": exists}
    bug = ground["bug"] or excited["bug"] or bool(flags)
    report["flags"] = {"bug": bug, "messages": flags}

    if dump_dir is not None:
        out = Path(dump_dir)
        out.mkdir(parents=True, exist_ok=True)
        grid_mod.write_wavefunction(out / "psi0.bin", full.pairs[0].wavefunction)
        if full.ground_degeneracy < len(full.pairs):
            grid_mod.write_wavefunction(out / "psi1.bin", full.pairs[full.ground_degeneracy].wavefunction)

    timings["total"] = time.perf_counter() - t0
    report["timings"] = timings
    return _plain(report)


def violated(report: dict) -> bool:
    v = report.get("verdicts", {})
    return any(v.get(k, {}).get("status") == "violated" for k in ("ground", "excited"))


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def run_average(cfg: RunConfig, radii) -> list[tuple[float, float, float]]:
    """Rows (r, Vbar(r), |integral of dV over directions|) for the ``average`` command."""
    field = build_field(cfg)
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 0):
        raise ConfigError("radii must be >= 0")
    from .potential import zero_mean_residuals

    vbar = field.average(radii)
    check = field.quad.refined(2) if field.quad is not None else None
    res = zero_mean_residuals(field, check, radii)
    return [(float(r), float(v), float(e)) for r, v, e in zip(radii, vbar, res)]


__all__ = ["analyse", "parse_config", "load_config", "run_average", "violated", "dumps",
           "ConfigError", "ZeroMeanError", "ConvergenceError"]
