"""Finite-difference solution of the full (anisotropic) problem on a Cartesian box."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .convergence import combined, richardson
from .errors import ConvergenceError
from .potential import PotentialField

DEGENERACY_RTOL = 1e-6
BOX_TAIL_TOL = 1e-6
MAX_BOX_ENLARGEMENTS = 2
DENSE_LIMIT = 400


@dataclass(frozen=True)
class CartesianGrid:
    """Interior nodes x_k = -L + k h, k = 1..n, h = 2L / (n + 1), per axis.

    The Dirichlet walls sit at +-L.
    """

    dimension: int
    L: float
    n: int

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if self.L <= 0 or self.n < 1:
            raise ValueError("L must be > 0 and n >= 1")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n + 1)

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(1, self.n + 1)

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dimension

    @property
    def size(self) -> int:
        return self.n**self.dimension

    @property
    def cell_volume(self) -> float:
        return self.h**self.dimension

    def points(self) -> np.ndarray:
        """All nodes as an (n^d, d) array in row-major (C) order."""
        mesh = np.meshgrid(*([self.axis] * self.dimension), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def enlarged(self, factor: float) -> "CartesianGrid":
        """Grid with the same spacing and a box larger by ``factor``."""
        n = int(round((self.n + 1) * factor)) - 1
        return CartesianGrid(self.dimension, 0.5 * (n + 1) * self.h, n)


@dataclass
class SparseHamiltonian:
    matrix: sp.csr_matrix
    grid: CartesianGrid
    potential: np.ndarray
    kinetic_coefficient: float

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, v):
        return self.matrix @ v

    @property
    def gershgorin_lower(self) -> float:
        m = self.matrix
        diag = m.diagonal()
        offsum = np.asarray(abs(m).sum(axis=1)).ravel() - np.abs(diag)
        return float(np.min(diag - offsum))


@dataclass
class GridEigenpair:
    energy: float
    wavefunction: np.ndarray = field(repr=False)
    residual_norm: float = 0.0


def assemble(field: PotentialField, grid: CartesianGrid) -> SparseHamiltonian:
    """Sparse (2d+1)-point Hamiltonian -c Laplacian + V with Dirichlet walls."""
    if grid.dimension != field.dimension:
        raise ValueError("grid and potential dimensions differ")
    n, h, c = grid.n, grid.h, field.kinetic_coefficient
    ones = np.ones(n)
    lap1 = sp.diags([-ones[:-1], 2.0 * ones, -ones[:-1]], [-1, 0, 1], format="csr") * (c / h**2)
    eye = sp.identity(n, format="csr")
    kinetic = sp.csr_matrix((grid.size, grid.size))
    for axis in range(grid.dimension):
        factors = [lap1 if a == axis else eye for a in range(grid.dimension)]
        term = factors[0]
        for f in factors[1:]:
            term = sp.kron(term, f, format="csr")
        kinetic = kinetic + term
    v = field.values(grid.points())
    if not np.all(np.isfinite(v)):
        raise ValueError("potential is not finite on the grid (unbounded below or singular)")
    matrix = (kinetic + sp.diags(v)).tocsr()
    return SparseHamiltonian(matrix, grid, v, c)


def lowest_eigenpairs(H: SparseHamiltonian, k: int, tol: float = 1e-8, seed: int = 0) -> list[GridEigenpair]:
    """The k lowest eigenpairs, each with a residual certificate.

    Uses implicitly restarted Lanczos on H - sigma with sigma = min V - 1
    (positive definite) and a fixed-seed starting vector; small problems go
    to a dense solver. Raises ConvergenceError if any residual exceeds tol.
    """
    N = H.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, N)
    if N <= DENSE_LIMIT or k >= N - 1:
        vals, vecs = np.linalg.eigh(H.matrix.toarray())
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        sigma = float(H.potential.min()) - 1.0
        shifted = H.matrix - sigma * sp.identity(N, format="csr")
        v0 = np.random.default_rng(seed).standard_normal(N)
        try:
            vals, vecs = eigsh(shifted, k=k, which="SA", v0=v0, tol=0.0, maxiter=50 * N)
        except Exception as exc:  # ArpackNoConvergence carries partial results
            raise ConvergenceError(f"eigensolver failed: {exc}") from exc
        vals = vals + sigma
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]

    dv = H.grid.cell_volume
    pairs = []
    residuals = []
    for e, v in zip(vals, vecs.T):
        r = np.linalg.norm(H.apply(v) - e * v) / np.linalg.norm(v)
        residuals.append(r)
        psi = v / np.sqrt(np.sum(v * v) * dv)
        # deterministic sign: largest-magnitude component positive
        if psi[np.argmax(np.abs(psi))] < 0:
            psi = -psi
        pairs.append(GridEigenpair(float(e), psi.reshape(H.grid.shape), float(r)))
    if max(residuals) > tol:
        raise ConvergenceError(
            f"residual {max(residuals):.3e} exceeds tolerance {tol:.1e}",
            residuals=residuals, partial=pairs,
        )
    return pairs


def clusters(energies, rtol=DEGENERACY_RTOL, scale=1.0):
    """Group sorted energies into degenerate clusters; returns index lists."""
    groups = []
    for i, e in enumerate(energies):
        if groups and abs(e - energies[groups[-1][0]]) <= rtol * max(abs(e), scale):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def boundary_ratio(psi: np.ndarray) -> float:
    """max |psi| on the outermost interior layer over max |psi|."""
    a = np.abs(psi)
    edge = 0.0
    for axis in range(psi.ndim):
        edge = max(edge, np.take(a, 0, axis=axis).max(), np.take(a, -1, axis=axis).max())
    return float(edge / a.max())


def boundary_min(values: np.ndarray) -> float:
    """Smallest value on the outermost interior layer of a grid array."""
    return float(min(min(np.take(values, 0, axis=a).min(), np.take(values, -1, axis=a).min())
                     for a in range(values.ndim)))


@dataclass
class GridSpectrum:
    """Extrapolated E0 and E1 from two grids plus the fine-grid eigenpairs."""

    grid: CartesianGrid
    coarse_grid: CartesianGrid
    E0: float
    E0_error: float
    E1: float | None
    E1_error: float | None
    ground_degeneracy: int
    excited_degeneracy: int | None
    pairs: list = field(repr=False)
    coarse_energies: list = field(repr=False)
    box_converged: bool = True
    enlargements: int = 0
    solver_tol: float = 0.0

    def n_bound(self, threshold: float) -> int:
        count = 0
        for p in self.pairs:
            if p.energy < threshold - self.E0_error:
                count += 1
        return count


def _levels(energies, scale):
    groups = clusters(list(energies), scale=scale)
    e0 = energies[groups[0][0]]
    e1 = energies[groups[1][0]] if len(groups) > 1 else None
    return e0, e1, groups


def grid_spectrum(field: PotentialField, L: float, n: int, n_coarse: int | None = None,
                  k: int = 6, tol: float = 1e-8, seed: int = 0,
                  max_enlargements: int = MAX_BOX_ENLARGEMENTS) -> GridSpectrum:
    """Richardson-extrapolated E0, E1 from grids with n_coarse and n points per axis."""
    n_coarse = n_coarse or int(round(0.75 * n))
    enlargements = 0
    fine_grid = CartesianGrid(field.dimension, L, n)
    coarse_grid = CartesianGrid(field.dimension, L, n_coarse)
    while True:
        fine_H = assemble(field, fine_grid)
        fine = lowest_eigenpairs(fine_H, k, tol, seed)
        coarse = lowest_eigenpairs(assemble(field, coarse_grid), k, tol, seed)
        ef = [p.energy for p in fine]
        ec = [p.energy for p in coarse]
        scale = max(1.0, abs(ef[0]))
        f0, f1, groups = _levels(ef, scale)
        c0, c1, _ = _levels(ec, scale)
        E0, err0 = richardson(c0, f0, coarse_grid.h, fine_grid.h)
        if f1 is not None and c1 is not None:
            E1, err1 = richardson(c1, f1, coarse_grid.h, fine_grid.h)
            E1, err1 = float(E1), combined(err1, tol)
        else:
            E1 = err1 = None
        used = groups[0] + (groups[1] if len(groups) > 1 else [])
        # only bound levels (below the lowest wall potential) need decayed tails
        wall = boundary_min(fine_H.potential.reshape(fine_grid.shape))
        box_ok = all(boundary_ratio(fine[i].wavefunction) < BOX_TAIL_TOL
                     for i in used if fine[i].energy < wall)
        if box_ok or enlargements >= max_enlargements:
            return GridSpectrum(
                fine_grid, coarse_grid, float(E0), combined(err0, tol), E1, err1,
                len(groups[0]), len(groups[1]) if len(groups) > 1 else None,
                fine, ec, box_ok, enlargements, tol,
            )
        fine_grid = fine_grid.enlarged(1.5)
        coarse_grid = coarse_grid.enlarged(1.5)
        enlargements += 1


@dataclass
class BoundStateEvidence:
    verdict: str  # "true", "false" or "inconclusive"
    E0: float
    error: float
    E0_coarse: float
    E0_doubled_box: float
    stable: bool

    @property
    def exists(self):
        return {"true": True, "false": False}.get(self.verdict)


def bound_state_exists(field: PotentialField, L: float, n: int, n_coarse: int | None = None,
                       tol: float = 1e-8, seed: int = 0,
                       spectrum: GridSpectrum | None = None) -> BoundStateEvidence:
    """Decide whether the full potential binds (assumes V -> 0 at the walls).

    True iff the extrapolated E0 lies below zero by more than its error bar
    and the coarse-grid E0 is stable when the box is doubled at the coarse
    spacing; a positive E0 beyond the error bar gives false. An already
    computed ``spectrum`` on the same grids can be passed in.
    """
    spec = spectrum or grid_spectrum(field, L, n, n_coarse, k=1, tol=tol, seed=seed,
                                     max_enlargements=0)
    coarse_e0 = spec.coarse_energies[0]
    doubled = spec.coarse_grid.enlarged(2.0)
    big = lowest_eigenpairs(assemble(field, doubled), 1, tol, seed)[0].energy
    err = spec.E0_error
    stable = abs(big - coarse_e0) <= max(err, 1e-9)
    if spec.E0 < -err and big < -err and stable:
        verdict = "true"
    elif spec.E0 > err:
        verdict = "false"
    else:
        verdict = "inconclusive"
    return BoundStateEvidence(verdict, spec.E0, err, coarse_e0, big, bool(stable))


def write_wavefunction(path, psi: np.ndarray):
    """Flat little-endian float64 dump with a one-line ASCII header ``dims: n1 n2 ...``."""
    psi = np.ascontiguousarray(psi, dtype="<f8")
    with open(Path(path), "wb") as fh:
        fh.write(("dims: " + " ".join(str(s) for s in psi.shape) + "\n").encode("ascii"))
        fh.write(psi.tobytes(order="C"))


def read_wavefunction(path) -> np.ndarray:
    with open(Path(path), "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        if not header.startswith("dims:"):
            raise ValueError(f"bad wavefunction header {header!r}")
        dims = tuple(int(s) for s in header[5:].split())
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(dims)
