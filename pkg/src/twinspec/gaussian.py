"""Gaussian-state covariance matrices in shot-noise units.

Conventions
-----------
Quadratures are ordered (p, q) per mode and scaled so that the vacuum
covariance matrix is the identity: each quadrature of the vacuum has unit
variance (the standard quantum limit).  With that scaling the annihilation
operator is a = (p + i q) / 2 and the mean photon number of a zero-mean
Gaussian mode is n = (Var p + Var q - 2) / 4.

The symplectic form is block diagonal, J = [[0, 1], [-1, 0]] per mode.  A
covariance matrix V is a physical quantum state iff V + i*Omega >= 0, which
is equivalent to V >= 0 together with all symplectic eigenvalues >= 1 in
these units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .modes import ModeLabel, SIDEBAND_ORDER, SYM_ASYM_ORDER, mode_index

__all__ = [
    "CovarianceMatrix",
    "symplectic_form",
    "vacuum_covariance",
    "two_mode_squeezed_covariance",
    "squeezing_to_gain",
    "sa_transform_matrix",
    "change_basis",
    "symplectic_eigenvalues",
    "minimum_symplectic_eigenvalue",
    "is_physical",
    "partial_transpose",
    "reduce_modes",
    "apply_mode_rotation",
    "apply_loss",
    "minimal_physical_inflation",
    "random_physical_covariance",
]

_ORDERS = {"sideband": SIDEBAND_ORDER, "sym_asym": SYM_ASYM_ORDER}

#: Tolerance below 1 allowed for the smallest symplectic eigenvalue of a
#: physical state (absorbs roundoff from basis changes and eigensolves).
PHYSICALITY_TOL = 1e-9

#: Relative asymmetry tolerated when constructing a covariance matrix.
SYMMETRY_TOL = 1e-12


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form for ``n_modes`` modes in (p, q) order."""
    j = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(n_modes), j)


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """A quadrature covariance matrix plus the labels needed to read it.

    Parameters
    ----------
    matrix:
        Real symmetric (2N, 2N) array in shot-noise units.
    basis:
        Either ``"sideband"`` or ``"sym_asym"``; fixes the default mode order.
    mode_order:
        Tuple of :class:`ModeLabel` naming the N modes in storage order.
    omega_hz, delta_hz:
        Optional acquisition metadata: sideband analysis frequency and pump
        detuning at which the state was prepared/measured.
    meta:
        Free-form extra metadata (loss settings, provenance of a fit, ...).
    symmetry_tol:
        Relative asymmetry accepted before the input is rejected; whatever
        passes is symmetrized exactly.
    """

    matrix: np.ndarray
    basis: str = "sideband"
    mode_order: tuple[ModeLabel, ...] = ()
    omega_hz: float | None = None
    delta_hz: float | None = None
    meta: dict = field(default_factory=dict)
    symmetry_tol: float = SYMMETRY_TOL

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError(f"covariance must be square with even size, got {m.shape}")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > self.symmetry_tol * scale:
            raise ValueError("covariance matrix is not symmetric")
        m = 0.5 * (m + m.T)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        if self.basis not in _ORDERS:
            raise ValueError(f"unknown basis {self.basis!r}")
        if not self.mode_order:
            object.__setattr__(self, "mode_order", _ORDERS[self.basis][: self.n_modes])
        if len(self.mode_order) != self.n_modes:
            raise ValueError(
                f"{len(self.mode_order)} mode labels for {self.n_modes} modes"
            )

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def index_of(self, label: ModeLabel | str) -> int:
        if isinstance(label, str):
            label = ModeLabel.parse(label)
        return mode_index(self.mode_order, label)

    def with_matrix(self, matrix: np.ndarray) -> "CovarianceMatrix":
        """Same labels/metadata, different numbers."""
        return CovarianceMatrix(
            matrix=matrix,
            basis=self.basis,
            mode_order=self.mode_order,
            omega_hz=self.omega_hz,
            delta_hz=self.delta_hz,
            meta=dict(self.meta),
            symmetry_tol=self.symmetry_tol,
        )


def vacuum_covariance(n_modes: int = 4, basis: str = "sideband") -> CovarianceMatrix:
    return CovarianceMatrix(np.eye(2 * n_modes), basis=basis)


def squeezing_to_gain(r: float) -> float:
    """Amplifier gain G = cosh(r)^2 equivalent to squeezing parameter r."""
    return float(np.cosh(r) ** 2)


def two_mode_squeezed_covariance(gain: float) -> np.ndarray:
    """Two-mode squeezed vacuum produced by a phase-insensitive amplifier.

    For power gain G >= 1 the 4x4 covariance matrix is
    ``[[a I, c Z], [c Z, a I]]`` with a = 2G - 1, c = 2 sqrt(G (G-1)) and
    Z = diag(1, -1).  The state is pure: both symplectic eigenvalues are 1,
    and the partially transposed minimum symplectic eigenvalue is
    a - c = exp(-2 r) with G = cosh(r)^2.
    """
    if gain < 1.0:
        raise ValueError(f"gain must be >= 1, got {gain}")
    a = 2.0 * gain - 1.0
    c = 2.0 * np.sqrt(gain * (gain - 1.0))
    z = np.diag([1.0, -1.0])
    i2 = np.eye(2)
    return np.block([[a * i2, c * z], [c * z, a * i2]])


def sa_transform_matrix() -> np.ndarray:
    """Orthogonal symplectic map from sideband to sym/asym mode basis.

    Acts per beam: (upper, lower) -> ((upper + lower)/sqrt2,
    (upper - lower)/sqrt2), identically on the p and q quadratures.  The
    matrix is its own inverse.
    """
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    per_beam = np.kron(h, np.eye(2))
    return np.kron(np.eye(2), per_beam)


def change_basis(cov: CovarianceMatrix, basis: str) -> CovarianceMatrix:
    """Re-express a four-mode covariance in ``"sideband"`` or ``"sym_asym"``."""
    if basis not in _ORDERS:
        raise ValueError(f"unknown basis {basis!r}")
    if cov.n_modes != 4:
        raise ValueError("basis change is defined for the four-mode field")
    if basis == cov.basis:
        return cov
    lam = sa_transform_matrix()  # involutive: same matrix both directions
    return CovarianceMatrix(
        lam @ cov.matrix @ lam.T,
        basis=basis,
        mode_order=_ORDERS[basis],
        omega_hz=cov.omega_hz,
        delta_hz=cov.delta_hz,
        meta=dict(cov.meta),
    )


def _as_matrix(cov: CovarianceMatrix | np.ndarray) -> np.ndarray:
    return cov.matrix if isinstance(cov, CovarianceMatrix) else np.asarray(cov, float)


def symplectic_eigenvalues(cov: CovarianceMatrix | np.ndarray) -> np.ndarray:
    """Symplectic spectrum (ascending, one value per mode)."""
    v = _as_matrix(cov)
    omega = symplectic_form(v.shape[0] // 2)
    eig = np.linalg.eigvals(1j * omega @ v)
    return np.sort(np.abs(eig))[::2]


def minimum_symplectic_eigenvalue(cov: CovarianceMatrix | np.ndarray) -> float:
    return float(symplectic_eigenvalues(cov)[0])


def is_physical(cov: CovarianceMatrix | np.ndarray, tol: float = PHYSICALITY_TOL) -> bool:
    """Whether V describes a quantum state: V >= 0 and nu_min >= 1 - tol.

    Positive semidefiniteness is checked explicitly because an indefinite
    matrix can still have all |symplectic eigenvalues| >= 1; such matrices
    (e.g. covariances doctored mode-pair by mode-pair) must be flagged.
    """
    v = _as_matrix(cov)
    scale = max(1.0, float(np.abs(v).max()))
    if np.linalg.eigvalsh(v).min() < -tol * scale:
        return False
    return minimum_symplectic_eigenvalue(v) >= 1.0 - tol


def partial_transpose(
    cov: CovarianceMatrix | np.ndarray, modes: Iterable[int]
) -> np.ndarray:
    """Covariance of the partial transpose over the given mode indices.

    Transposition of a subset of modes flips the sign of their q quadratures
    (momentum reversal), i.e. V -> P V P with P diagonal.
    """
    v = _as_matrix(cov).copy()
    signs = np.ones(v.shape[0])
    for m in modes:
        signs[2 * m + 1] = -1.0
    return (signs[:, None] * v) * signs[None, :]


def reduce_modes(
    cov: CovarianceMatrix, labels: Sequence[ModeLabel | str]
) -> CovarianceMatrix:
    """Marginal covariance of the listed modes, in the order given."""
    modes = [cov.index_of(lab) for lab in labels]
    order = tuple(cov.mode_order[m] for m in modes)
    rows = np.concatenate([[2 * m, 2 * m + 1] for m in modes])
    return CovarianceMatrix(
        cov.matrix[np.ix_(rows, rows)],
        basis=cov.basis,
        mode_order=order,
        omega_hz=cov.omega_hz,
        delta_hz=cov.delta_hz,
        meta=dict(cov.meta),
    )


def apply_mode_rotation(
    cov: CovarianceMatrix | np.ndarray, mode: int, theta: float
) -> np.ndarray:
    """Quadrature rotation by ``theta`` on a single mode (local symplectic)."""
    v = _as_matrix(cov)
    s = np.eye(v.shape[0])
    c, sn = np.cos(theta), np.sin(theta)
    s[2 * mode : 2 * mode + 2, 2 * mode : 2 * mode + 2] = [[c, sn], [-sn, c]]
    return s @ v @ s.T


def apply_loss(
    cov: CovarianceMatrix | np.ndarray,
    eta: float,
    modes: Iterable[int] | None = None,
) -> np.ndarray:
    """Beam-splitter loss with transmission ``eta`` on the given modes.

    Each lossy quadrature pair mixes with vacuum:
    V -> T V T + (I - T^2) with T = diag(sqrt(eta)) on the lossy rows.
    For uniform loss this is the familiar eta*V + (1 - eta)*I.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission must be in [0, 1], got {eta}")
    v = _as_matrix(cov)
    n = v.shape[0]
    t = np.ones(n)
    rows = (
        range(n)
        if modes is None
        else [q for m in modes for q in (2 * m, 2 * m + 1)]
    )
    for q in rows:
        t[q] = np.sqrt(eta)
    return (t[:, None] * v) * t[None, :] + np.diag(1.0 - t**2)


def minimal_physical_inflation(
    matrix: np.ndarray, tol: float = PHYSICALITY_TOL
) -> tuple[np.ndarray, float]:
    """Smallest isotropic noise addition V + eps*I that is physical.

    Returns the inflated matrix and eps (0 when V is already physical).
    Used to repair mildly unphysical reconstructions; eps is found by
    bisection since physicality is monotone in eps.
    """
    v = np.asarray(matrix, float)
    if is_physical(v, tol):
        return v.copy(), 0.0
    hi = 1.0
    while not is_physical(v + hi * np.eye(v.shape[0]), tol):
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("could not regularize covariance")
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if is_physical(v + mid * np.eye(v.shape[0]), tol):
            hi = mid
        else:
            lo = mid
    eps = hi
    return v + eps * np.eye(v.shape[0]), float(eps)


def random_physical_covariance(
    rng: np.random.Generator,
    n_modes: int = 4,
    spread: float = 0.4,
    max_excess_noise: float = 1.0,
) -> np.ndarray:
    """Random physical covariance V = S diag(nu) S^T with S symplectic.

    ``S = expm(Omega H)`` for a random symmetric H (scaled by ``spread``)
    is symplectic by construction; the symplectic eigenvalues nu >= 1 are
    drawn uniformly from [1, 1 + max_excess_noise].
    """
    omega = symplectic_form(n_modes)
    h = rng.normal(scale=spread, size=(2 * n_modes, 2 * n_modes))
    h = 0.5 * (h + h.T)
    s = expm(omega @ h)
    nu = 1.0 + rng.uniform(0.0, max_excess_noise, size=n_modes)
    d = np.repeat(nu, 2)
    v = s @ np.diag(d) @ s.T
    return 0.5 * (v + v.T)
