"""Point-group tags, the s-p selection rule table, and numerical symmetry checks."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .potential import PotentialField

INVARIANCE_TOL = 1e-9
CONTINUOUS_ORDERS = range(2, 17)

_CUBIC = ("T", "Td", "Th", "O", "Oh", "I", "Ih")
_AXIAL = ("C", "Cv", "Ch", "D", "Dh", "Dd", "S")


@dataclass(frozen=True)
class PointGroupTag:
    """A Schoenflies point-group label.

    ``kind`` is one of the cubic/icosahedral names, an axial family
    (C, Cv, Ch, D, Dh, Dd, S), ``Cinfv``/``Dinfh``, or ``C2d``/``D2d`` for
    the planar groups. ``n`` is the rotation order (for S it is the order of
    the improper rotation, always even).
    """

    kind: str
    n: int | None = None

    @property
    def dimension(self) -> int:
        return 2 if self.kind in ("C2d", "D2d") else 3

    def __str__(self) -> str:
        k, n = self.kind, self.n
        if k in _CUBIC or k in ("Cinfv", "Dinfh"):
            return k
        if k == "C2d":
            return f"C{n}(2d)"
        if k == "D2d":
            return f"D{n}(2d)"
        if k == "Ch" and n == 1:
            return "Cs"
        suffix = {"C": "", "Cv": "v", "Ch": "h", "D": "", "Dh": "h", "Dd": "d", "S": ""}[k]
        return f"{k[0]}{n}{suffix}"


_AXIAL_RE = re.compile(r"^([CDS])(\d+)([vhd]?)$")
_PLANAR_RE = re.compile(r"^([CD])(\d+)\(2d\)$")
_ALIASES = {"Cs": ("Ch", 1), "Ci": ("S", 2), "Cinfv": ("Cinfv", None), "Dinfh": ("Dinfh", None)}


def parse_group(text: str) -> PointGroupTag:
    """Parse a Schoenflies string such as ``"D4h"``, ``"C_s"``, ``"S_2"``, ``"C_3^(2d)"``."""
    if not isinstance(text, str):
        raise ValueError(f"point group must be a string, got {text!r}")
    s = text.strip().replace("_", "").replace("^", "").replace(" ", "")
    s = s.replace("∞", "inf").replace("(2D)", "(2d)")
    if s in _CUBIC:
        return PointGroupTag(s)
    if s in _ALIASES:
        return PointGroupTag(*_ALIASES[s])
    m = _PLANAR_RE.match(s)
    if m:
        n = int(m.group(2))
        if n < 1:
            raise ValueError(f"invalid order in {text!r}")
        return PointGroupTag(m.group(1) + "2d", n)
    m = _AXIAL_RE.match(s)
    if m:
        letter, n, suffix = m.group(1), int(m.group(2)), m.group(3)
        if n < 1:
            raise ValueError(f"invalid order in {text!r}")
        if letter == "S":
            if suffix or n % 2:
                raise ValueError(f"S groups need an even order and no suffix: {text!r}")
            return PointGroupTag("S", n)
        if letter == "C" and suffix == "d":
            raise ValueError(f"unknown point group {text!r}")
        return PointGroupTag(letter + suffix, n)
    raise ValueError(f"unknown point group {text!r}")


@dataclass
class SelectionVerdict:
    group: str
    guaranteed_zero: bool
    reason: str
    numerically_confirmed: bool | None = None
    cross_max: float | None = None


def selection_rule(group: PointGroupTag | str, dimension: int) -> SelectionVerdict:
    """Is <s|V|p> = 0 guaranteed for every V invariant under ``group``?"""
    tag = parse_group(group) if isinstance(group, str) else group
    if tag.dimension != dimension:
        raise ValueError(f"group {tag} is not a {dimension}D point group")
    k, n = tag.kind, tag.n
    name = str(tag)
    if k in _CUBIC:
        return SelectionVerdict(name, True, "cubic or icosahedral group")
    if k == "Dinfh":
        return SelectionVerdict(name, True, "cylindrical group with horizontal mirror")
    if k == "Cinfv":
        return SelectionVerdict(name, False, "p state along the axis is invariant")
    if k in ("C2d", "D2d"):
        if n >= 2:
            return SelectionVerdict(name, True, "planar group with rotation of order >= 2")
        return SelectionVerdict(name, False, "planar group of order <= 2 leaves a p state invariant")
    if k == "S":
        return SelectionVerdict(name, True, "improper rotation group S_2n (S_2 is inversion)")
    if k == "Dd":
        return SelectionVerdict(name, True, "axial group D_nd")
    if k in ("Ch", "D", "Dh"):
        if n >= 2:
            return SelectionVerdict(name, True, f"axial group {k[0]}_n{k[1:]} with n >= 2")
        label = {"Ch": "C_1h = C_s", "Dh": "D_1h = C_2v", "D": "D_1 = C_2"}[k]
        return SelectionVerdict(name, False, f"excluded: {label} leaves a p state invariant")
    return SelectionVerdict(name, False, "group not in the guaranteed list")


# ---------------------------------------------------------------------------
# concrete generators


def rotation(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def reflection(normal) -> np.ndarray:
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    return np.eye(len(normal)) - 2.0 * np.outer(normal, normal)


_Z = (0.0, 0.0, 1.0)
_SIGMA_H = reflection(_Z)
_SIGMA_V = reflection((0.0, 1.0, 0.0))
_C2X = rotation((1.0, 0.0, 0.0), np.pi)
_C3_111 = rotation((1.0, 1.0, 1.0), 2 * np.pi / 3)
_PHI = (1 + np.sqrt(5.0)) / 2


def _rz(n):
    return rotation(_Z, 2 * np.pi / n)


def generators(group: PointGroupTag | str, axis=None) -> list[np.ndarray]:
    """Orthogonal generator matrices; the principal axis is z unless ``axis`` is given."""
    tag = parse_group(group) if isinstance(group, str) else group
    k, n = tag.kind, tag.n
    if tag.dimension == 2:
        c, s = np.cos(2 * np.pi / n), np.sin(2 * np.pi / n)
        gens = [np.array([[c, -s], [s, c]])]
        if k == "D2d":
            gens.append(np.diag([1.0, -1.0]))
        return gens

    if k == "C":
        gens = [_rz(n)]
    elif k == "Cv":
        gens = [_rz(n), _SIGMA_V]
    elif k == "Ch":
        gens = [_rz(n), _SIGMA_H]
    elif k == "D":
        gens = [_rz(n), _C2X]
    elif k == "Dh":
        gens = [_rz(n), _C2X, _SIGMA_H]
    elif k == "Dd":
        a = np.pi / (2 * n)
        gens = [_rz(n), _C2X, reflection((-np.sin(a), np.cos(a), 0.0))]
    elif k == "S":
        gens = [_rz(n) @ _SIGMA_H]
    elif k in ("T", "Td", "Th"):
        gens = [rotation(_Z, np.pi), _C3_111]
        if k == "Td":
            gens.append(reflection((1.0, -1.0, 0.0)))
        if k == "Th":
            gens.append(-np.eye(3))
    elif k in ("O", "Oh"):
        gens = [_rz(4), _C3_111]
        if k == "Oh":
            gens.append(-np.eye(3))
    elif k in ("I", "Ih"):
        gens = [rotation(_Z, np.pi), _C3_111, rotation((0.0, 1.0, _PHI), 2 * np.pi / 5)]
        if k == "Ih":
            gens.append(-np.eye(3))
    elif k == "Cinfv":
        gens = [_rz(m) for m in CONTINUOUS_ORDERS] + [_SIGMA_V]
    elif k == "Dinfh":
        gens = [_rz(m) for m in CONTINUOUS_ORDERS] + [_SIGMA_H, _SIGMA_V]
    else:
        raise ValueError(f"no generators for {tag}")

    if axis is not None:
        R = _frame(axis)
        gens = [R @ g @ R.T for g in gens]
    return gens


def _frame(axis) -> np.ndarray:
    """Rotation taking the z axis onto ``axis``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    z = np.array(_Z)
    v = np.cross(z, a)
    s, c = np.linalg.norm(v), float(z @ a)
    if s < 1e-14:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    return rotation(v, np.arctan2(s, c))


def group_elements(group: PointGroupTag | str, max_order: int = 240) -> list[np.ndarray]:
    """Closure of the generators of a finite group."""
    tag = parse_group(group) if isinstance(group, str) else group
    if tag.kind in ("Cinfv", "Dinfh"):
        raise ValueError("continuous groups have no finite element list")
    gens = generators(tag)
    d = gens[0].shape[0]
    elements = [np.eye(d)]
    frontier = [np.eye(d)]
    while frontier:
        new = []
        for g in frontier:
            for s in gens:
                h = s @ g
                if not any(np.allclose(h, e, atol=1e-9) for e in elements):
                    elements.append(h)
                    new.append(h)
        if len(elements) > max_order:
            raise RuntimeError(f"group {tag} did not close within {max_order} elements")
        frontier = new
    return elements


def verify_invariance(field: PotentialField, group: PointGroupTag | str, n_samples: int = 2000,
                      radius: float = 3.0, axis=None, seed: int = 0) -> float:
    """Max over samples and generators of |V(g x) - V(x)| relative to max |V|.

    Points are drawn uniformly in a ball of the given radius.
    """
    tag = parse_group(group) if isinstance(group, str) else group
    if tag.dimension != field.dimension:
        raise ValueError(f"group {tag} does not act in {field.dimension}D")
    rng = np.random.default_rng(seed)
    d = field.dimension
    x = rng.standard_normal((n_samples, d))
    x *= (radius * rng.random(n_samples) ** (1.0 / d) / np.linalg.norm(x, axis=1))[:, None]
    v = field.values(x)
    scale = max(float(np.max(np.abs(v))), 1e-300)
    dev = 0.0
    for g in generators(tag, axis if d == 3 else None):
        dev = max(dev, float(np.max(np.abs(field.values(x @ g.T) - v))))
    return dev / scale


def cross_element_check(u0, pbasis, dv, cell_volume) -> float:
    """max_i |<u0|dV|f_i>| on the shared Cartesian grid."""
    from .variational import matrix_element

    return max(abs(matrix_element(u0, dv, f, cell_volume)) for f in pbasis.functions)
