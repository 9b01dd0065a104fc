"""Randomised corpus runs over Gaussian-sum wells."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ConfigError, ConvergenceError
from .pipeline import DEFAULTS, analyse, dumps, parse_config, violated

CONSTRUCTIONS = ("inversion_symmetric", "generic", "broken_symmetry")

SCAN_DEFAULTS = {
    "dimension": 3,
    "construction": "inversion_symmetric",
    "count": 20,
    "ranges": {"n_wells": [1, 2], "depth": [-14.0, -8.0], "width": [0.6, 1.2], "offset": [0.2, 0.8]},
    "radial": {"r_max": 12.0, "n_points": 2000},
    "grid": {"L": 6.5, "n": 40},
    "quadrature": {},
    "perturbation": {},
}

SUMMARY_COLUMNS = [
    "index", "construction", "n_wells", "symmetry", "first_excited_kind",
    "E0bar", "E0bar_error", "E0", "E0_error", "E1bar", "E1bar_error", "E1", "E1_error",
    "margin_ground", "margin_excited", "trace_M", "lambda1", "cross_max", "u0_dV_u0",
    "second_order_excited", "ground", "excited", "bound_state_exists", "bug",
]


def parse_scan_config(data: dict | None) -> dict:
    data = dict(data or {})
    unknown = set(data) - set(SCAN_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown scan keys: {sorted(unknown)}")
    cfg = {**SCAN_DEFAULTS, **data}
    cfg["ranges"] = {**SCAN_DEFAULTS["ranges"], **(data.get("ranges") or {})}
    if set(cfg["ranges"]) != set(SCAN_DEFAULTS["ranges"]):
        raise ConfigError(f"unknown range keys: {sorted(set(cfg['ranges']) - set(SCAN_DEFAULTS['ranges']))}")
    if cfg["construction"] not in CONSTRUCTIONS:
        raise ConfigError(f"construction must be one of {CONSTRUCTIONS}")
    if cfg["dimension"] not in (2, 3):
        raise ConfigError("scan dimension must be 2 or 3")
    if not isinstance(cfg["count"], int) or cfg["count"] < 0:
        raise ConfigError("count must be a non-negative integer")
    for key, pair in cfg["ranges"].items():
        if len(pair) != 2 or pair[0] > pair[1]:
            raise ConfigError(f"range {key} must be [low, high] with low <= high")
    lo, hi = cfg["ranges"]["n_wells"]
    if int(lo) < 1:
        raise ConfigError("n_wells must be >= 1")
    if cfg["ranges"]["width"][0] <= 0:
        raise ConfigError("widths must be positive")
    for block in ("radial", "grid", "quadrature", "perturbation"):
        cfg[block] = {**SCAN_DEFAULTS[block], **(data.get(block) or {})}
        extra = set(cfg[block]) - set(DEFAULTS[block])
        if extra:
            raise ConfigError(f"unknown keys in {block}: {sorted(extra)}")
    return cfg


def _rotation(rng, d):
    if d == 3:
        return Rotation.random(random_state=rng).as_matrix()
    a = rng.uniform(0, 2 * np.pi)
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def _well(rng, d, r, center):
    return {
        "depth": float(rng.uniform(*r["depth"])),
        "width": [float(w) for w in rng.uniform(*r["width"], size=d)],
        "center": [float(c) for c in center],
        "rotation": _rotation(rng, d).tolist(),
    }


def _direction(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def draw_spec(rng: np.random.Generator, cfg: dict) -> dict:
    """One random Gaussian-sum potential according to the construction rule.

    inversion_symmetric: wells come in mirror pairs at +-c (a lone well sits
    at the origin), declared S2. generic: independent wells, nothing
    declared. broken_symmetry: wells displaced from the origin with no
    mirror partner, S2 declared anyway so the invariance check rejects it.
    """
    d, r, kind = cfg["dimension"], cfg["ranges"], cfg["construction"]
    lo, hi = (int(x) for x in r["n_wells"])
    n = int(rng.integers(lo, hi + 1))
    wells = []
    if kind == "inversion_symmetric":
        if n % 2:
            wells.append(_well(rng, d, r, np.zeros(d)))
        for _ in range(n // 2):
            c = _direction(rng, d) * rng.uniform(*r["offset"])
            w = _well(rng, d, r, c)
            wells += [w, {**w, "center": [-x for x in w["center"]]}]
        symmetry = "S2" if d == 3 else "C2(2d)"
    else:
        for _ in range(n):
            c = _direction(rng, d) * rng.uniform(*r["offset"])
            wells.append(_well(rng, d, r, c))
        symmetry = None if kind == "generic" else ("S2" if d == 3 else "C2(2d)")
    spec = {"dimension": d, "family": "gaussian_well_sum", "parameters": {"wells": wells}}
    if symmetry:
        spec["symmetry"] = symmetry
    return spec


def build_configs(scan_cfg: dict, seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    configs = []
    for i in range(scan_cfg["count"]):
        spec = draw_spec(rng, scan_cfg)
        configs.append({**spec, "radial": scan_cfg["radial"], "grid": scan_cfg["grid"],
                        "quadrature": scan_cfg["quadrature"],
                        "perturbation": scan_cfg["perturbation"], "seed": seed})
    return configs


def _run_one(config: dict):
    try:
        return 0, analyse(parse_config(config))
    except ConvergenceError as exc:
        return 3, exc.partial or {"error": str(exc)}


def _get(report, *path):
    cur = report
    for key in path:
        if not isinstance(cur, dict) or key not in cur or cur[key] is None:
            return None
        cur = cur[key]
    return cur


def summary_row(index: int, construction: str, config: dict, report: dict) -> dict:
    wells = config["parameters"]["wells"]
    v = report.get("verdicts", {})
    eig = _get(report, "variational", "coupling_matrix", "eigenvalues")
    return {
        "index": index,
        "construction": construction,
        "n_wells": len(wells),
        "symmetry": config.get("symmetry", ""),
        "first_excited_kind": _get(report, "isotropic", "first_excited_kind"),
        "E0bar": _get(report, "isotropic", "E0bar", "value"),
        "E0bar_error": _get(report, "isotropic", "E0bar", "error"),
        "E0": _get(report, "full", "E0", "value"),
        "E0_error": _get(report, "full", "E0", "error"),
        "E1bar": _get(report, "isotropic", "E1bar", "value"),
        "E1bar_error": _get(report, "isotropic", "E1bar", "error"),
        "E1": _get(report, "full", "E1", "value"),
        "E1_error": _get(report, "full", "E1", "error"),
        "margin_ground": _get(v, "ground", "margin"),
        "margin_excited": _get(v, "excited", "margin"),
        "trace_M": _get(report, "variational", "coupling_matrix", "trace", "value"),
        "lambda1": eig[0] if eig else None,
        "cross_max": _get(report, "variational", "cross_elements", "max"),
        "u0_dV_u0": _get(report, "variational", "u0_dV_u0", "value"),
        "second_order_excited": _get(report, "perturbation", "second_order_excited", "value"),
        "ground": _get(v, "ground", "status"),
        "excited": _get(v, "excited", "status"),
        "bound_state_exists": _get(v, "bound_state_exists", "verdict"),
        "bug": _get(report, "flags", "bug"),
    }


def run_scan(scan_cfg: dict, seed: int, out_dir, jobs: int = 1) -> tuple[int, list[dict]]:
    """Draw, verify and write the corpus; returns (exit code, summary rows).

    Reports are written in draw order whatever the job count. Exit code is
    1 if any verdict is violated, 3 if any run failed to converge, else 0.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    configs = build_configs(scan_cfg, seed)
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, configs))
    else:
        results = [_run_one(c) for c in configs]

    rows, code = [], 0
    for i, (config, (status, report)) in enumerate(zip(configs, results)):
        (out / f"report_{i:04d}.json").write_text(dumps(report))
        rows.append(summary_row(i, scan_cfg["construction"], config, report))
        if status == 3:
            code = max(code, 3)
        elif violated(report):
            code = 1 if code == 0 else code
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v))
                             for k, v in row.items()})
    (out / "scan.json").write_text(json.dumps({"seed": seed, **scan_cfg}, indent=2, sort_keys=True) + "\n")
    return code, rows
