"""Perturbation theory in dV around the isotropic Hamiltonian.

The second-order shift of the first excited level is summed over the
discrete box spectrum of the isotropic problem: product states
u_{n,c}(r) Y_{c,mu} with channel c <= max_channel. Matrix elements use the
radial grid times the angular quadrature, with dV sampled on each shell
against the shell average from the same quadrature, so its angular mean is
zero node by node. Energies in the denominators are extrapolated from the
grid and its halving; a gap smaller than 1e-6 relative plus the two error
bars counts as a degeneracy and the term is excluded and reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .harmonics import angular_function, angular_labels, p_functions
from .potential import PotentialField
from .convergence import richardson
from .radial import RadialGrid, solve_channel
from .variational import CouplingMatrix

DEGENERACY_RTOL = 1e-6


@dataclass
class IntermediateTerm:
    channel: int
    m: int
    radial_index: int
    energy: float
    element: float
    term: float


@dataclass
class PerturbationReport:
    first_order_gs: float
    degenerate_first_order: np.ndarray
    second_order_excited: float | None
    basis_cutoff: int
    cutoff_tail_estimate: float
    excluded_degenerate: list = field(default_factory=list)
    terms: list = field(default_factory=list, repr=False)
    e1_reference: float | None = None

    def partial_sum(self, cutoff: int) -> float:
        """Second-order shift truncated to the ``cutoff`` lowest intermediate states."""
        return float(sum(t.term for t in self.terms[:cutoff]))


def first_order_shifts(gs_element: float, coupling: CouplingMatrix | None):
    """Ground-state shift <u0|dV|u0> and the p-manifold shifts (eigenvalues of M)."""
    p = coupling.eigenvalues if coupling is not None else np.array([])
    return gs_element, p


def _excited_angular(dimension, kind, a_star, directions):
    if kind in ("p_state", "m1_state"):
        return np.asarray(a_star) @ p_functions(dimension, directions)
    return angular_function(dimension, (0, 0), directions)


def intermediate_terms(field: PotentialField, grid: RadialGrid, kind: str, a_star=None,
                       max_channel: int = 4, states_per_channel: int = 40,
                       energy_cap: float | None = None):
    """All second-order terms |<m|dV|u1>|^2 / (E1 - Em), sorted by intermediate energy.

    ``grid`` is the radial grid the states live on; ``kind`` selects u1
    (first channel-1 state combined with ``a_star``, or the second channel-0
    state). States above ``energy_cap`` are left out. Returns
    (terms, excluded, e1).
    """
    d = field.dimension
    if d not in (2, 3):
        raise ValueError("second-order analysis needs dimension 2 or 3")
    quad = field.quad
    r = grid.nodes
    h = grid.h
    vbar = field.direct_average(r)  # same quadrature as the shells below
    channels = {c: solve_channel(field, grid, c, states_per_channel, vbar=vbar)
                for c in range(max_channel + 1)}
    # energies extrapolated against the halved grid; wavefunctions stay on ``grid``
    fine_grid = grid.halved()
    energy, error = {}, {}
    for c, states in channels.items():
        fine = solve_channel(field, fine_grid, c, len(states))
        for i, (st, fs) in enumerate(zip(states, fine)):
            e, err = richardson(st.energy, fs.energy, grid.h, fine_grid.h)
            energy[c, i], error[c, i] = float(e), float(err)
    p_like = kind in ("p_state", "m1_state")
    u1_state = channels[1][0] if p_like else channels[0][1]
    key1 = (1, 0) if p_like else (0, 1)
    e1 = energy[key1]
    y1 = _excited_angular(d, kind, a_star, quad.directions)

    labels = angular_labels(d, max_channel)
    ylm = np.array([angular_function(d, lab, quad.directions) for lab in labels])
    # A[label, k] = sum_j w_j dV(r_k, j) Y_label(j) Y1(j)
    A = np.empty((len(labels), r.size))
    batch = max(1, 2_000_000 // quad.directions.shape[0])
    for s in range(0, r.size, batch):
        shells = field.on_shells(r[s:s + batch]) - vbar[s:s + batch, None]
        A[:, s:s + batch] = (ylm * (y1 * quad.weights)) @ shells.T

    terms, excluded = [], []
    scale = max(abs(e1), 1.0)
    for li, (c, m) in enumerate(labels):
        for i, st in enumerate(channels[c]):
            key = (c, i)
            if key not in energy:
                continue
            em = energy[key]
            if energy_cap is not None and em > energy_cap:
                continue
            if key == key1:
                continue  # u1 itself; for p, M is diagonal in the a* basis

            element = float(np.sum(st.reduced_wavefunction * u1_state.reduced_wavefunction * A[li]) * h)
            gap = e1 - em
            if abs(gap) < DEGENERACY_RTOL * scale + error[key] + error[key1]:
                excluded.append({"channel": c, "m": m, "radial_index": i,
                                 "energy": em, "element": element})
                continue
            terms.append(IntermediateTerm(c, m, i, em, element, element**2 / gap))
    terms.sort(key=lambda t: (t.energy, t.channel, t.m))
    return terms, excluded, e1


def second_order_excited(field: PotentialField, grid: RadialGrid, kind: str, a_star=None,
                         cutoff: int | None = None, max_channel: int = 4,
                         states_per_channel: int = 40, energy_cap: float | None = None):
    """Truncated second-order shift of the first excited isotropic level."""
    terms, excluded, e1 = intermediate_terms(field, grid, kind, a_star, max_channel,
                                             states_per_channel, energy_cap)
    if cutoff is not None:
        terms = terms[:cutoff]
    total = float(sum(t.term for t in terms))
    tail = abs(terms[-1].term) if terms else 0.0
    return total, terms, excluded, e1, tail


def perturbation_report(field: PotentialField, grid: RadialGrid, kind: str | None,
                        gs_element: float, coupling: CouplingMatrix | None, cutoff: int | None = None,
                        max_channel: int = 4, states_per_channel: int = 40,
                        energy_cap: float | None = None) -> PerturbationReport:
    gs, p_shifts = first_order_shifts(gs_element, coupling)
    branch = kind
    if kind == "degenerate_within_tolerance":
        branch = "s_state" if field.dimension == 3 else "m0_state"
    if field.dimension == 1 or branch not in ("p_state", "m1_state", "s_state", "m0_state"):
        return PerturbationReport(gs, p_shifts, None, 0, 0.0)
    a_star = coupling.a_star if coupling is not None else None
    total, terms, excluded, e1, tail = second_order_excited(
        field, grid, branch, a_star, cutoff, max_channel, states_per_channel, energy_cap)
    return PerturbationReport(gs, p_shifts, total, len(terms), tail, excluded, terms, e1)
