"""Two-mode entanglement witnesses and sideband-energy diagnostics.

Two standard criteria are evaluated on 4x4 two-mode covariance blocks, in
shot-noise units where vacuum variances are 1:

* the joint-quadrature variance witness (sum criterion): the average of the
  variances of (p1 - p2)/sqrt(2) and (q1 + q2)/sqrt(2); values below 1 are
  impossible for separable states;
* the partial-transposition criterion: the smallest symplectic eigenvalue
  of the covariance with the second mode's momentum reversed; values below
  1 certify entanglement (and for two modes also witness it exactly).

Bipartitions of the four-mode field are named:

* ``"sym"``:   probe_sym vs conjugate_sym (balanced sideband combinations);
* ``"pair1"``: probe_upper vs conjugate_lower (directly coupled pair);
* ``"pair2"``: probe_lower vs conjugate_upper.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .gaussian import (
    CovarianceMatrix,
    change_basis,
    is_physical,
    minimum_symplectic_eigenvalue,
    partial_transpose,
    reduce_modes,
)
from .fwm import synthesize_state

__all__ = [
    "BIPARTITIONS",
    "dgcz_value",
    "ppt_min_symplectic",
    "sideband_energy",
    "energy_imbalance",
    "emulate_homodyne",
    "WitnessRecord",
    "witness_records",
    "witness_sweep",
]

BIPARTITIONS = {
    "sym": ("probe_sym", "conjugate_sym"),
    "pair1": ("probe_upper", "conjugate_lower"),
    "pair2": ("probe_lower", "conjugate_upper"),
}

_BASIS_OF = {"sym": "sym_asym", "pair1": "sideband", "pair2": "sideband"}


def dgcz_value(matrix: np.ndarray) -> float:
    """Joint-quadrature variance witness of a 4x4 two-mode covariance.

    Returns (Var[(p1 - p2)/sqrt2] + Var[(q1 + q2)/sqrt2]) / 2; separable
    states satisfy >= 1, two-mode squeezed vacuum gives exp(-2 r).
    """
    m = np.asarray(matrix, dtype=float)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 two-mode covariance, got {m.shape}")
    var_p = (m[0, 0] + m[2, 2] - 2.0 * m[0, 2]) / 2.0
    var_q = (m[1, 1] + m[3, 3] + 2.0 * m[1, 3]) / 2.0
    return float((var_p + var_q) / 2.0)


def ppt_min_symplectic(matrix: np.ndarray) -> float:
    """Minimum symplectic eigenvalue after partially transposing mode 2."""
    m = np.asarray(matrix, dtype=float)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 two-mode covariance, got {m.shape}")
    return minimum_symplectic_eigenvalue(partial_transpose(m, [1]))


def sideband_energy(cov: CovarianceMatrix, mode: str) -> float:
    """Mean photon number of one mode: (Var p + Var q - 2) / 4."""
    k = cov.index_of(mode)
    m = cov.matrix
    return float((m[2 * k, 2 * k] + m[2 * k + 1, 2 * k + 1] - 2.0) / 4.0)


def energy_imbalance(cov: CovarianceMatrix, beam: str) -> float:
    """Half the photon-number difference between a beam's sidebands.

    dE = (n_upper - n_lower) / 2, evaluated in the sideband basis.  In the
    sym/asym basis the same quantity appears as half the isotropic
    sym-asym cross correlation of that beam, which is exactly the part of
    the covariance that balanced homodyne detection cannot see.
    """
    sb = cov if cov.basis == "sideband" else change_basis(cov, "sideband")
    e_up = sideband_energy(sb, f"{beam}_upper")
    e_lo = sideband_energy(sb, f"{beam}_lower")
    return 0.5 * (e_up - e_lo)


def emulate_homodyne(cov: CovarianceMatrix) -> CovarianceMatrix:
    """Covariance as reconstructed by balanced homodyne detection.

    A homodyne measurement at analysis frequency Omega addresses the
    symmetric and antisymmetric sideband combinations but is insensitive to
    the isotropic part of every sym-asym cross block, which carries the
    sideband energy imbalance.  This maps the state to the same matrix with
    those isotropic parts removed (in the sym/asym basis, each 2x2 sym-asym
    cross block B is replaced by B - (tr B / 2) I).

    The result is returned in the basis of the input.  It is generally
    *not* a physical covariance matrix: discarding the imbalance
    correlations can push mode pairs above their actual quantum noise
    budget, which is the point of comparing witnesses with and without this
    emulation.
    """
    sa = cov if cov.basis == "sym_asym" else change_basis(cov, "sym_asym")
    if sa.n_modes != 4:
        raise ValueError("homodyne emulation is defined for the four-mode field")
    m = sa.matrix.copy()
    sym_modes = [sa.index_of("probe_sym"), sa.index_of("conjugate_sym")]
    asym_modes = [sa.index_of("probe_asym"), sa.index_of("conjugate_asym")]
    for s in sym_modes:
        for a in asym_modes:
            block = m[2 * s : 2 * s + 2, 2 * a : 2 * a + 2]
            block = block - 0.5 * np.trace(block) * np.eye(2)
            m[2 * s : 2 * s + 2, 2 * a : 2 * a + 2] = block
            m[2 * a : 2 * a + 2, 2 * s : 2 * s + 2] = block.T
    out = sa.with_matrix(m)
    return out if cov.basis == "sym_asym" else change_basis(out, cov.basis)


@dataclass
class WitnessRecord:
    """Witness values for one state, scenario and bipartition."""

    delta_hz: float | None
    scenario: str
    bipartition: str
    basis: str
    dgcz: float
    ppt_nu_min: float
    dE_probe: float
    dE_conj: float
    state_physical: bool

    def to_dict(self) -> dict:
        return asdict(self)


def two_mode_reduction(cov: CovarianceMatrix, bipartition: str) -> CovarianceMatrix:
    """4x4 marginal covariance of the named bipartition."""
    try:
        labels = BIPARTITIONS[bipartition]
    except KeyError:
        raise ValueError(
            f"unknown bipartition {bipartition!r}; expected one of {sorted(BIPARTITIONS)}"
        )
    work = cov if cov.basis == _BASIS_OF[bipartition] else change_basis(
        cov, _BASIS_OF[bipartition]
    )
    return reduce_modes(work, labels)


def witness_records(
    cov: CovarianceMatrix, scenario: str = "resonator"
) -> list[WitnessRecord]:
    """Evaluate both witnesses on all three bipartitions of one state."""
    physical = is_physical(cov)
    de_pr = energy_imbalance(cov, "probe")
    de_cj = energy_imbalance(cov, "conjugate")
    records = []
    for name in BIPARTITIONS:
        red = two_mode_reduction(cov, name)
        records.append(
            WitnessRecord(
                delta_hz=cov.delta_hz,
                scenario=scenario,
                bipartition=name,
                basis=_BASIS_OF[name],
                dgcz=dgcz_value(red.matrix),
                ppt_nu_min=ppt_min_symplectic(red.matrix),
                dE_probe=de_pr,
                dE_conj=de_cj,
                state_physical=physical,
            )
        )
    return records


def witness_sweep(
    profile,
    omega_hz: float,
    delta_grid,
    scenarios: tuple[str, ...] = ("resonator", "homodyne_emulated"),
) -> list[WitnessRecord]:
    """Witness values across operating detunings, with and without emulation.

    For every pump detuning in ``delta_grid`` the source state is built from
    ``profile`` and evaluated directly (scenario ``"resonator"``, i.e. what
    sideband-resolved detection reconstructs) and/or after
    :func:`emulate_homodyne` (scenario ``"homodyne_emulated"``).
    """
    known = {"resonator", "homodyne_emulated"}
    bad = set(scenarios) - known
    if bad:
        raise ValueError(f"unknown scenarios {sorted(bad)}; expected subset of {sorted(known)}")
    records: list[WitnessRecord] = []
    for delta in np.atleast_1d(np.asarray(delta_grid, dtype=float)):
        state = synthesize_state(profile, omega_hz=omega_hz, delta_hz=float(delta))
        for scenario in scenarios:
            cov = emulate_homodyne(state) if scenario == "homodyne_emulated" else state
            records.extend(witness_records(cov, scenario))
    return records
