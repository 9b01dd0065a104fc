"""Potential descriptions, angular averaging and the isotropic/anisotropic split.

A potential V is split as V(x) = Vbar(|x|) + dV(x), where Vbar is the mean of
V over directions at fixed radius (over the sphere in 3D, the circle in 2D,
the point pair {x, -x} in 1D).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import lebedev_rule
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .errors import ConfigError, ZeroMeanError

FAMILIES = ("anisotropic_harmonic", "gaussian_well_sum", "polynomial_well", "tabulated")

SPEC_KEYS = {"dimension", "family", "parameters", "symmetry", "axis", "kinetic_coefficient"}

_FAMILY_KEYS = {
    "anisotropic_harmonic": ({"omega"}, set()),
    "gaussian_well_sum": ({"wells"}, set()),
    "polynomial_well": ({"terms"}, set()),
    "tabulated": ({"axes", "values"}, set()),
}
_WELL_KEYS = {"depth", "width", "center", "rotation"}
_TERM_KEYS = {"coefficient", "powers"}

# Available Lebedev degrees in scipy.integrate.lebedev_rule.
_LEBEDEV_ORDERS = (3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31, 35, 41, 47,
                   53, 59, 65, 71, 77, 83, 89, 95, 101, 107, 113, 119, 125, 131)


@dataclass(frozen=True)
class PotentialSpec:
    """Declarative description of a potential V(x) in units with hbar = m = 1.

    ``parameters`` depends on ``family``:

    anisotropic_harmonic
        ``{"omega": [w1, ..., wd]}``, V = 1/2 sum w_i^2 x_i^2.
    gaussian_well_sum
        ``{"wells": [{"depth": D, "width": s or [s1..sd], "center": [..],
        "rotation": [[..]]}]}``, each well D exp(-1/2 |R^T (x - c) / s|^2).
    polynomial_well
        ``{"terms": [{"coefficient": c, "powers": [p1..pd]}]}``.
    tabulated
        ``{"axes": [[x..], [y..], ...], "values": nested array}``, multilinear
        interpolation, clamped to the table outside its extent.
    """

    dimension: int
    family: str
    parameters: dict
    symmetry: str | None = None
    axis: tuple | None = None
    kinetic_coefficient: float = 0.5

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.dimension!r}")
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not (np.isfinite(self.kinetic_coefficient) and self.kinetic_coefficient > 0):
            raise ConfigError("kinetic_coefficient must be a positive number")
        if self.axis is not None:
            if len(self.axis) != 3 or np.linalg.norm(self.axis) == 0:
                raise ConfigError("axis must be a non-zero 3-vector")
        _validate_parameters(self)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "dimension": self.dimension,
            "family": self.family,
            "parameters": self.parameters,
            "kinetic_coefficient": self.kinetic_coefficient,
        }
        if self.symmetry is not None:
            out["symmetry"] = self.symmetry
        if self.axis is not None:
            out["axis"] = list(self.axis)
        return out


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _check_keys(obj, required, optional, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(obj) - required - optional
    _require(not unknown, f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(obj)
    _require(not missing, f"missing keys in {where}: {sorted(missing)}")


def _validate_parameters(spec: PotentialSpec):
    d = spec.dimension
    p = spec.parameters
    required, optional = _FAMILY_KEYS[spec.family]
    _check_keys(p, required, optional, f"parameters of {spec.family}")

    if spec.family == "anisotropic_harmonic":
        omega = p["omega"]
        _require(isinstance(omega, (list, tuple)) and len(omega) == d,
                 f"omega needs {d} entries")
        _require(all(np.isfinite(w) and w > 0 for w in omega), "all frequencies must be > 0")

    elif spec.family == "gaussian_well_sum":
        wells = p["wells"]
        _require(isinstance(wells, (list, tuple)), "wells must be a list")
        for i, w in enumerate(wells):
            _check_keys(w, {"depth", "width"}, _WELL_KEYS - {"depth", "width"}, f"wells[{i}]")
            _require(np.isfinite(w["depth"]), f"wells[{i}].depth must be finite")
            width = np.atleast_1d(np.asarray(w["width"], dtype=float))
            _require(width.size in (1, d), f"wells[{i}].width needs 1 or {d} entries")
            _require(bool(np.all(width > 0)), f"wells[{i}] widths must be > 0")
            center = np.asarray(w.get("center", [0.0] * d), dtype=float)
            _require(center.shape == (d,), f"wells[{i}].center needs {d} entries")
            if "rotation" in w:
                rot = np.asarray(w["rotation"], dtype=float)
                _require(rot.shape == (d, d), f"wells[{i}].rotation must be {d}x{d}")
                _require(np.allclose(rot @ rot.T, np.eye(d), atol=1e-10),
                         f"wells[{i}].rotation must be orthogonal")

    elif spec.family == "polynomial_well":
        terms = p["terms"]
        _require(isinstance(terms, (list, tuple)), "terms must be a list")
        for i, t in enumerate(terms):
            _check_keys(t, _TERM_KEYS, set(), f"terms[{i}]")
            powers = t["powers"]
            _require(len(powers) == d, f"terms[{i}].powers needs {d} entries")
            _require(all(int(q) == q and q >= 0 for q in powers),
                     f"terms[{i}].powers must be non-negative integers")
            _require(np.isfinite(t["coefficient"]), f"terms[{i}].coefficient must be finite")

    elif spec.family == "tabulated":
        axes = p["axes"]
        _require(len(axes) == d, f"tabulated potential needs {d} axes")
        shape = []
        for i, ax in enumerate(axes):
            ax = np.asarray(ax, dtype=float)
            _require(ax.ndim == 1 and ax.size >= 2 and bool(np.all(np.diff(ax) > 0)),
                     f"axes[{i}] must be strictly increasing with >= 2 points")
            shape.append(ax.size)
        values = np.asarray(p["values"], dtype=float)
        _require(values.shape == tuple(shape),
                 f"values shape {values.shape} does not match axes {tuple(shape)}")
        _require(bool(np.all(np.isfinite(values))), "tabulated values must be finite")


def spec_from_dict(data: dict) -> PotentialSpec:
    """Build a :class:`PotentialSpec` from a parsed config mapping (unknown keys are errors)."""
    if not isinstance(data, dict):
        raise ConfigError("potential config must be a JSON object")
    unknown = set(data) - SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    for key in ("dimension", "family", "parameters"):
        if key not in data:
            raise ConfigError(f"missing required key {key!r}")
    axis = data.get("axis")
    return PotentialSpec(
        dimension=data["dimension"],
        family=data["family"],
        parameters=data["parameters"],
        symmetry=data.get("symmetry"),
        axis=tuple(float(a) for a in axis) if axis is not None else None,
        kinetic_coefficient=float(data.get("kinetic_coefficient", 0.5)),
    )


def load_spec(path) -> PotentialSpec:
    with open(Path(path)) as fh:
        return spec_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# evaluation


def _compile(spec: PotentialSpec):
    """Return a vectorised callable mapping (N, d) points to V values."""
    d = spec.dimension
    p = spec.parameters

    if spec.family == "anisotropic_harmonic":
        k = 0.5 * np.asarray(p["omega"], dtype=float) ** 2
        return lambda x: x**2 @ k

    if spec.family == "gaussian_well_sum":
        wells = []
        for w in p["wells"]:
            width = np.broadcast_to(np.asarray(w["width"], dtype=float), (d,))
            center = np.asarray(w.get("center", [0.0] * d), dtype=float)
            rot = np.asarray(w["rotation"], dtype=float) if "rotation" in w else np.eye(d)
            # rows: y = R^T (x - c) / s  is  (x - c) @ (R / s)
            wells.append((float(w["depth"]), center, rot / width))

        def gaussian_sum(x):
            out = np.zeros(x.shape[0])
            for depth, center, A in wells:
                y = (x - center) @ A
                out += depth * np.exp(-0.5 * np.einsum("ij,ij->i", y, y))
            return out

        return gaussian_sum

    if spec.family == "polynomial_well":
        terms = [(float(t["coefficient"]), np.asarray(t["powers"], dtype=int)) for t in p["terms"]]

        def polynomial(x):
            out = np.zeros(x.shape[0])
            for c, powers in terms:
                out += c * np.prod(x**powers, axis=1)
            return out

        return polynomial

    axes = [np.asarray(a, dtype=float) for a in p["axes"]]
    interp = RegularGridInterpolator(axes, np.asarray(p["values"], dtype=float), method="linear")
    lo = np.array([a[0] for a in axes])
    hi = np.array([a[-1] for a in axes])
    return lambda x: interp(np.clip(x, lo, hi))


def evaluate(spec: PotentialSpec, point) -> float:
    """V at a single point of length ``spec.dimension``."""
    point = np.asarray(point, dtype=float)
    if point.shape != (spec.dimension,):
        raise ValueError(f"point must have length {spec.dimension}, got shape {point.shape}")
    return float(_compile(spec)(point[None, :])[0])


# ---------------------------------------------------------------------------
# angular quadrature


@dataclass(frozen=True)
class AngularQuadrature:
    """Directions and weights over the unit sphere (3D) or circle (2D).

    The product rule uses ``polar_order`` Gauss-Legendre nodes in cos(theta)
    and ``azimuthal_order`` uniform nodes in phi. It integrates real
    spherical harmonic products Y_lm Y_l'm' exactly for l, l' <= polar_order - 1
    as long as azimuthal_order >= 2 * polar_order - 1. The Lebedev rule is
    chosen with degree >= 2 * polar_order - 1.
    """

    dimension: int
    scheme: str = "product_gauss_trapezoid"
    polar_order: int = 32
    azimuthal_order: int = 64
    directions: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ConfigError("angular quadrature exists for dimension 2 or 3")
        if self.polar_order < 4 or self.azimuthal_order < 8:
            raise ConfigError("polar_order must be >= 4 and azimuthal_order >= 8")
        phi = 2.0 * np.pi * np.arange(self.azimuthal_order) / self.azimuthal_order
        if self.dimension == 2:
            dirs = np.column_stack([np.cos(phi), np.sin(phi)])
            w = np.full(self.azimuthal_order, 2.0 * np.pi / self.azimuthal_order)
        elif self.scheme == "product_gauss_trapezoid":
            mu, wmu = leggauss(self.polar_order)
            st = np.sqrt(1.0 - mu**2)
            dirs = np.column_stack([
                np.outer(st, np.cos(phi)).ravel(),
                np.outer(st, np.sin(phi)).ravel(),
                np.repeat(mu, self.azimuthal_order),
            ])
            w = np.outer(wmu, np.full(self.azimuthal_order, 2.0 * np.pi / self.azimuthal_order)).ravel()
        elif self.scheme == "lebedev_like_fixed_order":
            need = 2 * self.polar_order - 1
            order = next((o for o in _LEBEDEV_ORDERS if o >= need), _LEBEDEV_ORDERS[-1])
            x, w = lebedev_rule(order)
            dirs = x.T
        else:
            raise ConfigError(f"unknown quadrature scheme {self.scheme!r}")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "weights", w)

    @property
    def solid_angle(self) -> float:
        return 4.0 * np.pi if self.dimension == 3 else 2.0 * np.pi

    @property
    def exact_degree(self) -> int:
        """Largest l such that Y_lm Y_l'm' with l, l' <= l is integrated exactly."""
        if self.dimension == 2:
            return (self.azimuthal_order - 1) // 2
        if self.scheme == "product_gauss_trapezoid":
            return min(self.polar_order, (self.azimuthal_order + 1) // 2) - 1
        need = 2 * self.polar_order - 1
        order = next((o for o in _LEBEDEV_ORDERS if o >= need), _LEBEDEV_ORDERS[-1])
        return order // 2

    def integrate(self, values):
        """Quadrature of sampled values; the last axis runs over directions."""
        return np.asarray(values) @ self.weights

    def refined(self, factor=2) -> "AngularQuadrature":
        return AngularQuadrature(self.dimension, self.scheme, self.polar_order * factor,
                                 self.azimuthal_order * factor)


def _direct_average(fn, dimension, quad, radii):
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if dimension == 1:
        pts = radii[:, None]
        return 0.5 * (fn(pts) + fn(-pts))
    dirs = quad.directions
    out = np.empty(radii.size)
    # bounded memory: roughly 4M points per batch
    batch = max(1, 4_000_000 // dirs.shape[0])
    for start in range(0, radii.size, batch):
        r = radii[start:start + batch]
        pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, dimension)
        vals = fn(pts).reshape(r.size, dirs.shape[0])
        out[start:start + batch] = quad.integrate(vals) / quad.solid_angle
    return out


def angular_average(spec: PotentialSpec, quad: AngularQuadrature | None, radius):
    """Mean of V over directions at the given radius (scalar or array)."""
    if np.any(np.asarray(radius) < 0):
        raise ValueError("radius must be >= 0")
    if spec.dimension > 1 and quad is None:
        quad = AngularQuadrature(spec.dimension)
    out = _direct_average(_compile(spec), spec.dimension, quad, radius)
    return float(out[0]) if np.ndim(radius) == 0 else out


# ---------------------------------------------------------------------------
# field


class PotentialField:
    """A potential together with its cached isotropic part.

    The angular average is tabulated on ``table_points`` uniform radii in
    [0, table_r_max] and interpolated by an even-extended cubic spline;
    radii past the table fall back to direct quadrature. Apart from a memo of
    averages on radial grids the object is not mutated after construction.
    """

    def __init__(self, spec: PotentialSpec, quad: AngularQuadrature | None = None,
                 table_r_max: float = 24.0, table_points: int = 4801):
        self.spec = spec
        self.dimension = spec.dimension
        self.kinetic_coefficient = spec.kinetic_coefficient
        if self.dimension > 1 and quad is None:
            quad = AngularQuadrature(self.dimension)
        self.quad = quad
        self._fn = _compile(spec)
        self.table_r_max = float(table_r_max)
        r = np.linspace(0.0, self.table_r_max, table_points)
        self.table_radii = r
        self.table_values = _direct_average(self._fn, self.dimension, quad, r)
        # even extension enforces a zero slope of Vbar at the origin
        rr = np.concatenate([-r[:0:-1], r])
        vv = np.concatenate([self.table_values[:0:-1], self.table_values])
        self._spline = CubicSpline(rr, vv)

    def values(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, self.dimension)
        if points.shape[-1] != self.dimension:
            raise ValueError(f"points must have {self.dimension} components")
        return self._fn(points)

    def average(self, radii) -> np.ndarray:
        """Vbar at the given radii (cached table inside its range)."""
        radii = np.abs(np.atleast_1d(np.asarray(radii, dtype=float)))
        if self.dimension == 1:
            return _direct_average(self._fn, 1, None, radii)
        out = np.empty_like(radii)
        inside = radii <= self.table_r_max
        out[inside] = self._spline(radii[inside])
        if np.any(~inside):
            out[~inside] = _direct_average(self._fn, self.dimension, self.quad, radii[~inside])
        return out

    def direct_average(self, radii, quad: AngularQuadrature | None = None) -> np.ndarray:
        """Vbar from quadrature at exactly these radii (no interpolation)."""
        return _direct_average(self._fn, self.dimension, quad or self.quad, radii)

    def delta(self, points) -> np.ndarray:
        """Anisotropic remainder V(x) - Vbar(|x|)."""
        points = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        return self._fn(points) - self.average(np.linalg.norm(points, axis=1))

    def on_shells(self, radii, quad: AngularQuadrature | None = None):
        """V sampled on spheres: array (len(radii), n_directions)."""
        quad = quad or self.quad
        radii = np.asarray(radii, dtype=float)
        pts = (radii[:, None, None] * quad.directions[None, :, :]).reshape(-1, self.dimension)
        return self._fn(pts).reshape(radii.size, quad.directions.shape[0])


def delta_v(field: PotentialField, point) -> float:
    """V(point) - Vbar(|point|) for a single point."""
    return float(field.delta(np.asarray(point, dtype=float)[None, :])[0])


def zero_mean_residuals(field: PotentialField, quad: AngularQuadrature | None, radii):
    """|integral of dV over directions| per radius, dV using the field's cached Vbar."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii < 0):
        raise ValueError("radii must be >= 0")
    if field.dimension == 1:
        pts = radii[:, None]
        vbar = field.average(radii)
        return np.abs((field.values(pts) - vbar) + (field.values(-pts) - vbar))
    quad = quad or field.quad
    shells = field.on_shells(radii, quad)
    vbar = field.average(radii)
    return np.abs(quad.integrate(shells - vbar[:, None]))


def verify_zero_mean(field: PotentialField, quad: AngularQuadrature | None, radii,
                     tol: float = 1e-9) -> float:
    """Max over radii of |integral of dV over directions|; raise if above ``tol``.

    The tolerance is relative to max(1, |Vbar(r)|) at the offending radius.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if radii.size == 0:
        raise ValueError("radii must be non-empty")
    res = zero_mean_residuals(field, quad, radii)
    scale = np.maximum(1.0, np.abs(field.average(radii)))
    worst = int(np.argmax(res / scale))
    if res[worst] / scale[worst] > tol:
        raise ZeroMeanError(
            f"angular mean of dV is {res[worst]:.3e} at r = {radii[worst]:.6g} "
            f"(tolerance {tol:.1e})",
            worst_radius=float(radii[worst]),
            residual=float(res[worst]),
        )
    return float(res.max())
