"""Variational bounds relating the full spectrum to the spectrum of the angular average.

Matrix elements are plain grid sums  sum conj(bra) * op * ket * h^d  on the
Cartesian grid of the full solver; radial states are transferred onto that
grid by cubic-spline interpolation of R(r) (extended to r < 0 with its
parity) and re-normalised there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import CartesianGrid
from .harmonics import COMPLEX_FROM_REAL, p_functions
from .radial import RadialEigenstate

ZERO_THRESHOLD = 1e-6


def radial_interpolant(state: RadialEigenstate) -> CubicSpline:
    """Spline of R(r) over [-r_max, r_max] using R(-r) = (-1)^parity R(r).

    The parity is that of r^channel (even for s, odd for p in 3D and 2D).
    """
    r = state.radii
    R = state.radial_factor()
    parity = -1.0 if state.channel % 2 else 1.0
    if state.dimension == 1:
        parity = 1.0 if state.channel == 0 else -1.0
    return CubicSpline(np.concatenate([-r[::-1], r]), np.concatenate([parity * R[::-1], R]))


def _normalise(values, cell_volume):
    return values / np.sqrt(np.sum(np.abs(values) ** 2) * cell_volume)


def ground_on_grid(state: RadialEigenstate, grid: CartesianGrid) -> np.ndarray:
    """u0 as a normalised function on the Cartesian grid."""
    pts = grid.points()
    r = np.linalg.norm(pts, axis=1)
    values = radial_interpolant(state)(r)
    return _normalise(values, grid.cell_volume).reshape(grid.shape)


def matrix_element(bra, op, ket, cell_volume: float):
    """sum conj(bra) * op * ket * cell_volume over a shared grid."""
    bra, op, ket = np.asarray(bra), np.asarray(op), np.asarray(ket)
    if not (bra.shape == op.shape == ket.shape):
        raise ValueError(f"grid mismatch: {bra.shape}, {op.shape}, {ket.shape}")
    value = np.sum(np.conj(bra) * op * ket) * cell_volume
    return complex(value) if np.iscomplexobj(value) else float(value)


@dataclass
class AssumptionCheck:
    """<u0|V - U|u0> for a comparison potential U; only ever a one-sided statement."""

    expectation: float
    satisfied: bool
    conclusion: str


def comparison_assumption(u0, v_values, u_values, cell_volume, tol=0.0) -> AssumptionCheck:
    """Check <u0|V - U|u0> <= 0, which gives E0(V) <= E0(U)."""
    value = matrix_element(u0, np.asarray(v_values) - np.asarray(u_values), u0, cell_volume)
    if value <= tol:
        return AssumptionCheck(value, True, "E0(V) <= E0(U)")
    return AssumptionCheck(value, False, "no conclusion (assumption not satisfied)")


@dataclass
class PBasis:
    """The p manifold chi(r) Y_1 realised as real (p_x, p_y[, p_z]) functions on a grid."""

    grid: CartesianGrid
    functions: list = field(repr=False)
    chi: RadialEigenstate = field(repr=False)

    @property
    def overlap(self) -> np.ndarray:
        F = np.array([f.ravel() for f in self.functions])
        return F @ F.T * self.grid.cell_volume

    def orthonormality_error(self) -> float:
        return float(np.max(np.abs(self.overlap - np.eye(len(self.functions)))))

    def orthogonality_to(self, u0) -> float:
        return max(abs(matrix_element(u0, np.ones_like(u0), f, self.grid.cell_volume))
                   for f in self.functions)

    def combination(self, a) -> np.ndarray:
        return sum(ai * f for ai, f in zip(a, self.functions))


def p_basis(chi: RadialEigenstate, grid: CartesianGrid) -> PBasis:
    """Real p functions R1(r) x_i / r on the grid, each re-normalised."""
    if chi.dimension not in (2, 3) or grid.dimension != chi.dimension:
        raise ValueError("p basis needs matching 2D or 3D radial state and grid")
    spline = radial_interpolant(chi)
    pts = grid.points()
    r = np.linalg.norm(pts, axis=1)
    small = r < 1e-12
    ratio = np.empty_like(r)
    ratio[~small] = spline(r[~small]) / r[~small]
    ratio[small] = spline(0.0, 1)
    funcs = [_normalise(ratio * pts[:, i], grid.cell_volume).reshape(grid.shape)
             for i in range(grid.dimension)]
    return PBasis(grid, funcs, chi)


@dataclass
class CouplingMatrix:
    """M_ij = <f_i|dV|f_j> over the real p basis, with its eigen-decomposition."""

    M: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def a_star(self) -> np.ndarray:
        """Unit vector minimising a^T M a (eigenvector of the smallest eigenvalue)."""
        return self.eigenvectors[:, 0]

    @property
    def trace_residual(self) -> float:
        return float(np.sum(self.eigenvalues))

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.eigenvalues.size else 0.0

    def complex_basis(self) -> np.ndarray:
        """M in the Y_{1m} basis (m = -1, 0, 1); 3D only."""
        U = COMPLEX_FROM_REAL
        return np.conj(U) @ self.M @ U.T

    def quadratic_form(self, a) -> float:
        a = np.asarray(a)
        return float(np.real(np.conj(a) @ self.M @ a))


def build_coupling_matrix(pbasis: PBasis, dv) -> CouplingMatrix:
    F = np.array([f.ravel() for f in pbasis.functions])
    M = (F * np.asarray(dv).ravel()) @ F.T * pbasis.grid.cell_volume
    return _decompose(M)


def shell_coupling_matrix(field, chi: RadialEigenstate, quad=None) -> CouplingMatrix:
    """M from the radial grid of ``chi`` times the angular quadrature.

    On every shell dV is taken against the shell average of the same
    quadrature, so sum_i M_ii vanishes to rounding error.
    """
    if chi.dimension not in (2, 3):
        raise ValueError("p manifold needs dimension 2 or 3")
    quad = quad or field.quad
    weights = chi.reduced_wavefunction**2 * chi.h
    keep = weights > 1e-20 * weights.max()  # far tail contributes nothing
    r, weights = chi.radii[keep], weights[keep]
    vbar = field.direct_average(r, quad)
    P = p_functions(chi.dimension, quad.directions)
    M = np.zeros((chi.dimension, chi.dimension))
    batch = max(1, 2_000_000 // quad.directions.shape[0])
    for s in range(0, r.size, batch):
        dv = field.on_shells(r[s:s + batch], quad) - vbar[s:s + batch, None]
        shell = weights[s:s + batch] @ dv  # radial integral first, per direction
        M += (P * (shell * quad.weights)) @ P.T
    return _decompose(M)


def _decompose(M) -> CouplingMatrix:
    M = 0.5 * (M + M.T)
    vals, vecs = np.linalg.eigh(M)
    # deterministic sign: largest component of each eigenvector positive
    for j in range(vecs.shape[1]):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] = -vecs[:, j]
    return CouplingMatrix(M, vals, vecs)


@dataclass
class HUMatrix:
    """2x2 matrix of H over the trial pair (u0, u1)."""

    matrix: np.ndarray
    eigenvalues: np.ndarray


def hylleraas_undheim_bounds(e0_bar: float, e1_bar: float, cross: float, excited_shift: float) -> HUMatrix:
    """H' = [[E0bar, <u0|dV|u1>], [<u1|dV|u0>, E1bar + <u1|dV|u1>]] and its eigenvalues.

    The eigenvalues E'_1 <= E'_2 bound the two lowest levels of the full
    Hamiltonian from above.
    """
    if e0_bar > e1_bar:
        raise ValueError("expected E0bar <= E1bar")
    H = np.array([[e0_bar, cross], [np.conj(cross), e1_bar + excited_shift]], dtype=float)
    if cross == 0:
        vals = np.sort(np.diag(H))
    else:
        vals = np.linalg.eigvalsh(H)
    return HUMatrix(H, vals)


@dataclass
class Verdict:
    status: str
    margin: float | None = None
    tolerance: float | None = None
    reason: str = ""
    bug: bool = False

    def to_dict(self) -> dict:
        return {"status": self.status, "margin": self.margin, "tolerance": self.tolerance,
                "reason": self.reason, "bug": self.bug}


def verify_ground_inequality(e0_bar: float, e0_bar_error: float, e0: float, e0_error: float,
                             reliable: bool = True) -> Verdict:
    """Compare the isotropic and full ground-state energies (E0 <= E0bar).

    ``violated`` only when E0bar < E0 - combined error; it is always flagged
    as a bug because the inequality is unconditional.
    """
    margin = e0_bar - e0
    tol = abs(e0_bar_error) + abs(e0_error)
    if margin < -tol:
        return Verdict("violated", margin, tol, "E0bar < E0 beyond error bars", bug=True)
    if not reliable:
        return Verdict("inconclusive", margin, tol, "numerical convergence checks failed")
    return Verdict("holds", margin, tol, "E0 <= E0bar within error bars")


def verify_excited_inequality(kind: str | None, n_bound_iso: int, n_bound_full: int,
                              e1_bar: float | None, e1_bar_error: float | None,
                              e1: float | None, e1_error: float | None,
                              symmetry_guaranteed: bool, cross_max: float | None,
                              threshold: float, reliable: bool = True) -> Verdict:
    """Compare first excited levels (E1 <= E1bar) when the argument applies.

    p branch: requires the s-p cross elements to vanish, either by the
    selection rule or numerically. s branch: no symmetry needed.
    """
    if n_bound_iso < 2 or n_bound_full < 2 or e1 is None or e1_bar is None:
        return Verdict("not_applicable", reason="fewer than two bound states")
    if kind in ("even", "odd"):
        return Verdict("not_applicable", reason="one-dimensional problem")
    if kind == "higher_channel":
        return Verdict("not_applicable", reason="first excited level is neither s nor p")

    p_like = kind in ("p_state", "m1_state")
    s_like = kind in ("s_state", "m0_state")
    numerically_zero = cross_max is not None and cross_max <= threshold
    if p_like and not (symmetry_guaranteed or numerically_zero):
        return Verdict("not_applicable", reason="insufficient symmetry: <u0|dV|u1> != 0")
    if not (p_like or s_like or kind == "degenerate_within_tolerance"):
        return Verdict("not_applicable", reason=f"unknown excited kind {kind!r}")

    margin = e1_bar - e1
    tol = abs(e1_bar_error) + abs(e1_error)
    if margin < -tol:
        # past the symmetry gate the inequality is a theorem
        return Verdict("violated", margin, tol, "E1 > E1bar beyond error bars", bug=True)
    if not reliable:
        return Verdict("inconclusive", margin, tol, "numerical convergence checks failed")
    branch = "s" if s_like else ("p" if p_like else "degenerate s/p")
    return Verdict("holds", margin, tol, f"E1 <= E1bar within error bars ({branch} branch)")
