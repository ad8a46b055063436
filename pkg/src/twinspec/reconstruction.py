"""Covariance reconstruction from cavity noise spectra.

Every measured sample is linear in the entries of the source covariance
matrix: a single-beam sample at detuning delta with coefficient vector c
equals ``eta * c^T V_beam c / (c^T c) + (1 - eta)``, and a cross sample
equals ``eta * c_pr^T C c_cj / (|c_pr| |c_cj|)`` with C the probe-conjugate
block.  Reconstruction therefore reduces to linear least squares for the 36
independent entries of the symmetric 8x8 matrix, plus an optional
physicality treatment:

* ``"penalty"`` (default): when the unconstrained solution is unphysical,
  re-minimize ``|A theta - b|^2 + w * sum_i max(0, -mu_i)^2`` where mu_i are
  the eigenvalues of the Hermitian matrix V + i*Omega (all >= 0 exactly for
  physical states).  This objective is convex and has closed-form gradient
  and Hessian (a spectral function of V), so a damped Newton iteration
  converges in a few dozen steps; the data block is first compressed by a
  thin QR factorization, making each step cheap.
* ``"project_after"``: solve unconstrained, then add the smallest isotropic
  noise eps*I that restores physicality.
* ``"none"``: report the unconstrained solution as is.

If the supplied traces do not span all 36 entries (e.g. synchronized cross
scans only, a single demodulation phase, or a detuning range that never
resolves the sidebands) the design matrix is rank deficient; the fit then
returns the minimum-norm solution flagged ``"underdetermined"`` rather than
guessing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr, solve_triangular
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .cavity import CavityParams, CrossTrace, SpectrumTrace, coeff_vector
from .gaussian import (
    CovarianceMatrix,
    is_physical,
    minimal_physical_inflation,
    symplectic_form,
)

__all__ = [
    "InsufficientDataError",
    "CalibrationWarning",
    "FitConfig",
    "FitResult",
    "build_design",
    "initialize_from_plateaus",
    "fit_covariance",
    "sql_calibrate",
    "undo_detection_efficiency",
    "TwinBeamReconstructor",
]

N_PARAMS = 36
_UPPER = [(i, j) for i in range(8) for j in range(i, 8)]
_POS = {ij: k for k, ij in enumerate(_UPPER)}
_BEAM_OFFSET = {"probe": 0, "conjugate": 4}


class InsufficientDataError(ValueError):
    """The traces cannot support even a rough initial estimate."""


class CalibrationWarning(UserWarning):
    """Shot-noise calibration drifted further than expected."""


def pack_entries(matrix: np.ndarray) -> np.ndarray:
    """Upper-triangle entries of a symmetric 8x8 matrix as a 36-vector."""
    m = np.asarray(matrix, dtype=float)
    return np.array([m[i, j] for i, j in _UPPER])


def unpack_entries(theta: np.ndarray) -> np.ndarray:
    """Symmetric 8x8 matrix from its 36 upper-triangle entries."""
    v = np.zeros((8, 8))
    for k, (i, j) in enumerate(_UPPER):
        v[i, j] = theta[k]
        v[j, i] = theta[k]
    return v


def _single_row(beam: str, delta: float, phase: float, cavity: CavityParams):
    c = coeff_vector(delta, cavity, phase)
    norm = c @ c
    off = _BEAM_OFFSET[beam]
    row = np.zeros(N_PARAMS)
    for a in range(4):
        for b in range(4):
            i, j = sorted((off + a, off + b))
            row[_POS[(i, j)]] += cavity.eta_det * c[a] * c[b] / norm
    return row, 1.0 - cavity.eta_det


def _cross_row(dp: float, dc: float, php: float, phc: float, cavity: CavityParams):
    cp = coeff_vector(dp, cavity, php)
    cc = coeff_vector(dc, cavity, phc)
    norm = np.sqrt((cp @ cp) * (cc @ cc))
    row = np.zeros(N_PARAMS)
    for a in range(4):
        for b in range(4):
            row[_POS[(a, 4 + b)]] += cavity.eta_det * cp[a] * cc[b] / norm
    return row, 0.0


def build_design(
    traces, cavity: CavityParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Design matrix A, constant offsets and samples y, one row per sample.

    Rows are sorted by (trace kind, beam, demodulation phases, detunings) so
    the fit does not depend on the order traces are supplied in.
    """
    entries = []
    for tr in traces:
        if isinstance(tr, SpectrumTrace):
            for d, v in zip(tr.delta_norm, tr.values):
                key = (0, _BEAM_OFFSET[tr.beam], tr.demod_phase_rad, 0.0, float(d), 0.0)
                entries.append((key, ("single", tr.beam, float(d), tr.demod_phase_rad), float(v)))
        elif isinstance(tr, CrossTrace):
            for dp, dc, v in zip(tr.delta_pr_norm, tr.delta_cj_norm, tr.values):
                key = (1, 0, tr.demod_phase_pr_rad, tr.demod_phase_cj_rad, float(dp), float(dc))
                entries.append(
                    (key, ("cross", float(dp), float(dc), tr.demod_phase_pr_rad, tr.demod_phase_cj_rad), float(v))
                )
        else:
            raise TypeError(f"unknown trace type {type(tr).__name__}")
    if not entries:
        raise InsufficientDataError("no traces supplied")
    entries.sort(key=lambda e: e[0])
    rows = np.empty((len(entries), N_PARAMS))
    offsets = np.empty(len(entries))
    y = np.empty(len(entries))
    for k, (_, sample, v) in enumerate(entries):
        if sample[0] == "single":
            rows[k], offsets[k] = _single_row(sample[1], sample[2], sample[3], cavity)
        else:
            rows[k], offsets[k] = _cross_row(
                sample[1], sample[2], sample[3], sample[4], cavity
            )
        y[k] = v
    return rows, offsets, y


def initialize_from_plateaus(
    traces, cavity: CavityParams, min_abs_delta: float = 10.0
) -> np.ndarray:
    """Crude covariance seed from the far-detuned ends of the scans.

    Far from resonance the cavity reflects everything, so single-beam
    samples approach eta * vbar + (1 - eta) with vbar the mean quadrature
    variance of that beam, and phase-0 synchronized cross samples approach
    eta times the mean pair correlation.  The seed puts vbar on the beam's
    diagonal and, if cross plateaus are available, a two-mode-squeezing
    pattern (pp = +c, qq = -c, pq = 0) on both pair blocks.

    Raises :class:`InsufficientDataError` when either beam has no samples
    with ``|delta| > min_abs_delta``.
    """
    theta = np.zeros(N_PARAMS)
    for beam, off in _BEAM_OFFSET.items():
        samples = [
            v
            for tr in traces
            if isinstance(tr, SpectrumTrace) and tr.beam == beam
            for d, v in zip(tr.delta_norm, tr.values)
            if abs(d) > min_abs_delta
        ]
        if not samples:
            raise InsufficientDataError(
                f"no far-detuned (|delta| > {min_abs_delta:g}) samples for {beam}"
            )
        vbar = (np.mean(samples) - (1.0 - cavity.eta_det)) / cavity.eta_det
        for a in range(4):
            theta[_POS[(off + a, off + a)]] = vbar
    cross_far = [
        v
        for tr in traces
        if isinstance(tr, CrossTrace)
        and tr.demod_phase_pr_rad == 0.0
        and tr.demod_phase_cj_rad == 0.0
        for dp, dc, v in zip(tr.delta_pr_norm, tr.delta_cj_norm, tr.values)
        if abs(dp) > min_abs_delta and np.isclose(dp, dc)
    ]
    if cross_far:
        c = np.mean(cross_far) / cavity.eta_det
        # mean pp cross plateau is (c1 + c2)/2; split it evenly over the pairs
        for i, j in ((0, 3), (1, 2)):  # (probe_upper, conj_lower), (probe_lower, conj_upper)
            theta[_POS[(2 * i, 2 * j)]] = c
            theta[_POS[(2 * i + 1, 2 * j + 1)]] = -c
    return theta


@dataclass
class FitConfig:
    """Options for :func:`fit_covariance`."""

    physicality: str = "penalty"  # "none" | "penalty" | "project_after"
    penalty_weight: float = 1e3
    max_iter: int = 200
    tol: float = 1e-10
    rank_rtol: float = 1e-10

    def __post_init__(self) -> None:
        if self.physicality not in ("none", "penalty", "project_after"):
            raise ValueError(f"unknown physicality mode {self.physicality!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.penalty_weight <= 0.0 or self.tol <= 0.0 or self.rank_rtol <= 0.0:
            raise ValueError("penalty_weight, tol and rank_rtol must be positive")


@dataclass
class FitResult:
    """Outcome of a covariance fit."""

    covariance: CovarianceMatrix
    theta: np.ndarray
    status: str  # "ok" | "underdetermined" | "max_iterations"
    condition_estimate: float
    residual_norm: float
    rank: int
    physicality_adjustment: float = 0.0
    n_iterations: int = 0
    meta: dict = field(default_factory=dict)


_OMEGA8 = symplectic_form(4)
_I_IDX = np.array([i for i, _ in _UPPER])
_J_IDX = np.array([j for _, j in _UPPER])
_MULT = np.where(_I_IDX == _J_IDX, 1.0, 2.0)
_OFFDIAG = (_I_IDX != _J_IDX)[:, None, None]


def _herm_eigh(theta: np.ndarray):
    """Eigen-decomposition of V(theta) + i*Omega (Hermitian)."""
    m = unpack_entries(theta).astype(complex) + 1j * _OMEGA8
    return np.linalg.eigh(m)


def _herm_min(theta: np.ndarray) -> float:
    return float(_herm_eigh(theta)[0][0])


def _penalty_refit(
    r_tri: np.ndarray, z: np.ndarray, theta0: np.ndarray, config: FitConfig
) -> tuple[np.ndarray, int, bool]:
    """Minimize |R theta - z|^2 + w * sum_i max(0, -mu_i(V + i Omega))^2.

    Damped Newton iteration on the (convex) objective.  The physicality term
    is a spectral function of V, so its gradient is the matrix function
    h'(V + i Omega) and its Hessian follows from the divided differences of
    h' across the eigenvalues; both come out of one Hermitian
    eigen-decomposition per step.
    """
    lam = config.penalty_weight
    theta = np.asarray(theta0, dtype=float).copy()
    rtr2 = 2.0 * (r_tri.T @ r_tri)

    def fval(th):
        w = np.linalg.eigvalsh(unpack_entries(th).astype(complex) + 1j * _OMEGA8)
        p = np.maximum(0.0, -w)
        dr = r_tri @ th - z
        return dr @ dr + lam * (p @ p)

    f_prev = np.inf
    stall = 0
    for nit in range(1, config.max_iter + 1):
        w, u = _herm_eigh(theta)
        p = np.maximum(0.0, -w)
        dr = r_tri @ theta - z
        f = dr @ dr + lam * (p @ p)
        hp = -2.0 * lam * p  # h'(mu) per eigenvalue
        hm = (u * hp) @ u.conj().T
        grad = 2.0 * (r_tri.T @ dr) + _MULT * hm[_I_IDX, _J_IDX].real
        if np.abs(grad).max() <= config.tol * max(1.0, f):
            return theta, nit, True
        if f_prev - f <= 1e-15 * max(1.0, f):
            stall += 1
            if stall >= 3:  # float-precision floor reached
                return theta, nit, True
        else:
            stall = 0
        f_prev = f

        wd = w[:, None] - w[None, :]
        both_neg = (w[:, None] < 0.0) & (w[None, :] < 0.0)
        kernel = np.where(
            np.abs(wd) > 1e-12,
            (hp[:, None] - hp[None, :]) / np.where(wd == 0.0, 1.0, wd),
            2.0 * lam * both_neg,
        )
        cu = u.conj()
        t1 = np.einsum("ka,kb->kab", cu[_I_IDX, :], u[_J_IDX, :])
        t2 = np.einsum("ka,kb->kab", cu[_J_IDX, :], u[_I_IDX, :])
        et = t1 + t2 * _OFFDIAG
        h_pen = np.einsum("kab,ab,lab->kl", et, kernel, et.conj()).real
        hess = rtr2 + h_pen + 1e-12 * np.eye(N_PARAMS)
        step = np.linalg.solve(hess, -grad)
        slope = grad @ step
        scale = 1.0
        while scale > 1e-14:
            if fval(theta + scale * step) <= f + 1e-4 * scale * slope:
                break
            scale *= 0.5
        if scale <= 1e-14:
            return theta, nit, True  # no float-representable descent left
        theta = theta + scale * step
    return theta, config.max_iter, False


def fit_covariance(
    traces,
    cavity: CavityParams,
    config: FitConfig | None = None,
    theta0: np.ndarray | None = None,
) -> FitResult:
    """Reconstruct the 8x8 sideband covariance from measured traces.

    The estimate is deterministic for given traces: the linear part is
    solved by QR factorization, and the physicality refit (if triggered)
    uses an analytic Jacobian, so repeated runs agree to the bit.
    ``theta0`` overrides the linear solution as the refit starting point
    (see :func:`initialize_from_plateaus`); it does not affect the
    full-rank linear solution itself.
    """
    config = config or FitConfig()
    a, offsets, y = build_design(traces, cavity)
    b = y - offsets

    singulars = np.linalg.svd(a, compute_uv=False)
    rank = int(np.sum(singulars > singulars[0] * config.rank_rtol))
    meta = {"n_samples": int(a.shape[0])}

    if rank < N_PARAMS:
        theta, *_ = np.linalg.lstsq(a, b, rcond=config.rank_rtol)
        eps = 0.0
        if config.physicality == "project_after":
            v, eps = minimal_physical_inflation(unpack_entries(theta))
            theta = pack_entries(v)
        cov = _result_cov(theta, cavity, config, "underdetermined")
        return FitResult(
            covariance=cov,
            theta=theta,
            status="underdetermined",
            condition_estimate=float("inf"),
            residual_norm=float(np.linalg.norm(a @ theta - b)),
            rank=rank,
            physicality_adjustment=eps,
            meta=meta,
        )

    cond = float(singulars[0] / singulars[-1])
    q, r_tri = qr(a, mode="economic")
    z = q.T @ b
    theta = solve_triangular(r_tri, z)

    status = "ok"
    eps = 0.0
    nit = 0
    if config.physicality == "project_after":
        v, eps = minimal_physical_inflation(unpack_entries(theta))
        theta = pack_entries(v)
    elif config.physicality == "penalty":
        if _herm_min(theta) < -1e-12:
            start = theta if theta0 is None else np.asarray(theta0, dtype=float)
            theta, nit, converged = _penalty_refit(r_tri, z, start, config)
            if not converged:
                status = "max_iterations"

    cov = _result_cov(theta, cavity, config, status)
    return FitResult(
        covariance=cov,
        theta=theta,
        status=status,
        condition_estimate=cond,
        residual_norm=float(np.linalg.norm(a @ theta - b)),
        rank=rank,
        physicality_adjustment=eps,
        n_iterations=nit,
        meta=meta,
    )


def _result_cov(
    theta: np.ndarray, cavity: CavityParams, config: FitConfig, status: str
) -> CovarianceMatrix:
    v = unpack_entries(theta)
    return CovarianceMatrix(
        v,
        basis="sideband",
        omega_hz=cavity.omega_hz,
        meta={
            "fit_status": status,
            "physicality": config.physicality,
            "physical": bool(is_physical(v)),
        },
    )


def sql_calibrate(vacuum_values, rtol: float = 0.05) -> float:
    """Shot-noise scale factor from a vacuum (blocked-input) trace.

    Returns the mean measured vacuum level, by which raw traces should be
    divided.  Warns with :class:`CalibrationWarning` when the scale is off
    by more than ``rtol`` from 1, which usually indicates drift between the
    calibration and the measurement.
    """
    scale = float(np.mean(np.asarray(vacuum_values, dtype=float)))
    if scale <= 0.0:
        raise ValueError("vacuum trace mean must be positive")
    if abs(scale - 1.0) > rtol:
        warnings.warn(
            f"shot-noise calibration is {scale:.4g}, more than {rtol:.0%} from 1",
            CalibrationWarning,
            stacklevel=2,
        )
    return scale


def undo_detection_efficiency(values, eta: float, kind: str = "single"):
    """Invert the detection-efficiency map on measured values.

    Single-beam samples were mapped S -> eta S + (1 - eta); cross samples
    scale by eta only.
    """
    v = np.asarray(values, dtype=float)
    if kind == "single":
        return (v - (1.0 - eta)) / eta
    if kind == "cross":
        return v / eta
    raise ValueError(f"unknown trace kind {kind!r}")


class TwinBeamReconstructor(BaseEstimator):
    """Estimator-style wrapper around :func:`fit_covariance`.

    Parameters mirror :class:`FitConfig`; ``fit`` takes a list of traces
    (:class:`SpectrumTrace` / :class:`CrossTrace`) and exposes the
    reconstructed state as ``covariance_``.  ``predict`` evaluates the
    fitted forward model on another set of traces, returning the model
    values concatenated in design-row order, which makes residual checks a
    one-liner.
    """

    def __init__(
        self,
        cavity: CavityParams | None = None,
        physicality: str = "penalty",
        penalty_weight: float = 1e3,
        max_iter: int = 500,
        tol: float = 1e-10,
        rank_rtol: float = 1e-10,
    ):
        self.cavity = cavity
        self.physicality = physicality
        self.penalty_weight = penalty_weight
        self.max_iter = max_iter
        self.tol = tol
        self.rank_rtol = rank_rtol

    def _config(self) -> FitConfig:
        return FitConfig(
            physicality=self.physicality,
            penalty_weight=self.penalty_weight,
            max_iter=self.max_iter,
            tol=self.tol,
            rank_rtol=self.rank_rtol,
        )

    def fit(self, X, y=None):
        cavity = self.cavity or CavityParams()
        result = fit_covariance(X, cavity, self._config())
        self.cavity_ = cavity
        self.result_ = result
        self.covariance_ = result.covariance
        self.theta_ = result.theta
        self.n_iter_ = result.n_iterations
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "theta_")
        a, offsets, _ = build_design(X, self.cavity_)
        return a @ self.theta_ + offsets

    def score(self, X, y=None) -> float:
        """Negative mean squared residual of the forward model on X."""
        check_is_fitted(self, "theta_")
        a, offsets, meas = build_design(X, self.cavity_)
        return -float(np.mean((a @ self.theta_ + offsets - meas) ** 2))
