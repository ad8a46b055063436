import numpy as np
import numpy.testing as npt
import pytest

from twinspec.gaussian import (
    CovarianceMatrix,
    apply_loss,
    apply_mode_rotation,
    change_basis,
    is_physical,
    minimal_physical_inflation,
    minimum_symplectic_eigenvalue,
    partial_transpose,
    random_physical_covariance,
    reduce_modes,
    sa_transform_matrix,
    squeezing_to_gain,
    symplectic_eigenvalues,
    symplectic_form,
    two_mode_squeezed_covariance,
    vacuum_covariance,
)
from twinspec.modes import ModeLabel, SIDEBAND_ORDER, SYM_ASYM_ORDER


def test_mode_label_tokens():
    lab = ModeLabel("probe", "upper")
    assert lab.token == "probe_upper"
    assert ModeLabel.parse("conjugate_asym") == ModeLabel("conjugate", "asym")
    with pytest.raises(ValueError):
        ModeLabel("pump", "upper")
    with pytest.raises(ValueError):
        ModeLabel.parse("probe_carrier")


def test_canonical_orders():
    assert [m.token for m in SIDEBAND_ORDER] == [
        "probe_upper",
        "probe_lower",
        "conjugate_upper",
        "conjugate_lower",
    ]
    assert [m.token for m in SYM_ASYM_ORDER] == [
        "probe_sym",
        "probe_asym",
        "conjugate_sym",
        "conjugate_asym",
    ]


def test_symplectic_form():
    omega = symplectic_form(2)
    npt.assert_array_equal(omega, -omega.T)
    npt.assert_array_equal(omega[:2, :2], [[0, 1], [-1, 0]])


def test_vacuum_is_identity_and_physical():
    vac = vacuum_covariance(4)
    npt.assert_array_equal(vac.matrix, np.eye(8))
    npt.assert_allclose(symplectic_eigenvalues(vac), 1.0)
    assert is_physical(vac)


def test_covariance_validation():
    with pytest.raises(ValueError):
        CovarianceMatrix(np.ones((3, 3)))  # odd size
    bad = np.eye(4)
    bad[0, 1] = 0.5  # asymmetric
    with pytest.raises(ValueError):
        CovarianceMatrix(bad)
    with pytest.raises(ValueError):
        CovarianceMatrix(np.eye(4), basis="fock")
    with pytest.raises(ValueError):
        CovarianceMatrix(np.eye(4), mode_order=SIDEBAND_ORDER)  # 4 labels, 2 modes


def test_covariance_matrix_readonly():
    vac = vacuum_covariance(2)
    with pytest.raises(ValueError):
        vac.matrix[0, 0] = 5.0


def test_two_mode_squeezed_identities():
    # squeezing r <-> gain G = cosh^2 r; pure state, nu-tilde = exp(-2r)
    for r in (0.1, 0.5, 1.0, 2.0):
        gain = squeezing_to_gain(r)
        v = two_mode_squeezed_covariance(gain)
        npt.assert_allclose(symplectic_eigenvalues(v), 1.0, atol=1e-12)
        nu_pt = minimum_symplectic_eigenvalue(partial_transpose(v, [1]))
        npt.assert_allclose(nu_pt, np.exp(-2 * r), atol=1e-12)
    with pytest.raises(ValueError):
        two_mode_squeezed_covariance(0.5)


def test_sa_transform_is_orthogonal_symplectic_involution():
    lam = sa_transform_matrix()
    npt.assert_allclose(lam @ lam, np.eye(8), atol=1e-15)
    npt.assert_allclose(lam @ lam.T, np.eye(8), atol=1e-15)
    omega = symplectic_form(4)
    npt.assert_allclose(lam @ omega @ lam.T, omega, atol=1e-15)


def test_change_basis_round_trip_and_invariance():
    rng = np.random.default_rng(7)
    for _ in range(20):
        v = random_physical_covariance(rng)
        cov = CovarianceMatrix(v, basis="sideband")
        sa = change_basis(cov, "sym_asym")
        assert sa.basis == "sym_asym"
        assert [m.token for m in sa.mode_order] == [m.token for m in SYM_ASYM_ORDER]
        back = change_basis(sa, "sideband")
        npt.assert_allclose(back.matrix, cov.matrix, atol=1e-12)
        npt.assert_allclose(
            symplectic_eigenvalues(sa), symplectic_eigenvalues(cov), atol=1e-11
        )
    # same-basis request is a no-op
    assert change_basis(cov, "sideband") is cov


def test_partial_transpose_flips_momentum_signs():
    rng = np.random.default_rng(3)
    v = random_physical_covariance(rng, n_modes=2)
    pt = partial_transpose(v, [1])
    npt.assert_array_equal(pt[0, 0], v[0, 0])
    npt.assert_array_equal(pt[3, 3], v[3, 3])
    npt.assert_array_equal(pt[0, 3], -v[0, 3])
    npt.assert_array_equal(partial_transpose(pt, [1]), v)


def test_reduce_modes_blocks_and_order():
    rng = np.random.default_rng(11)
    cov = CovarianceMatrix(random_physical_covariance(rng), basis="sideband")
    red = reduce_modes(cov, ["probe_upper", "conjugate_lower"])
    npt.assert_array_equal(red.matrix[:2, :2], cov.matrix[:2, :2])
    npt.assert_array_equal(red.matrix[2:, 2:], cov.matrix[6:, 6:])
    npt.assert_array_equal(red.matrix[:2, 2:], cov.matrix[:2, 6:])
    assert [m.token for m in red.mode_order] == ["probe_upper", "conjugate_lower"]
    with pytest.raises(ValueError):
        reduce_modes(cov, ["probe_sym"])


def test_mode_rotation_preserves_spectrum():
    rng = np.random.default_rng(5)
    v = random_physical_covariance(rng)
    rot = apply_mode_rotation(v, 2, 0.7)
    npt.assert_allclose(
        symplectic_eigenvalues(rot), symplectic_eigenvalues(v), atol=1e-10
    )
    npt.assert_array_equal(apply_mode_rotation(v, 1, 0.0), v)
    # quarter turn maps p -> q on that mode
    single = np.diag([4.0, 1.0])
    rotated = apply_mode_rotation(
        np.block([[single, np.zeros((2, 2))], [np.zeros((2, 2)), np.eye(2)]]), 0, np.pi / 2
    )
    npt.assert_allclose(rotated[:2, :2], np.diag([1.0, 4.0]), atol=1e-15)


def test_apply_loss():
    v = two_mode_squeezed_covariance(4.0)
    npt.assert_array_equal(apply_loss(v, 1.0), v)
    npt.assert_allclose(apply_loss(v, 0.0), np.eye(4), atol=1e-15)
    half = apply_loss(v, 0.5)
    npt.assert_allclose(half, 0.5 * v + 0.5 * np.eye(4), atol=1e-15)
    assert is_physical(half)
    # loss on one mode only leaves the other diagonal block alone
    partial = apply_loss(v, 0.5, modes=[0])
    npt.assert_array_equal(partial[2:, 2:], v[2:, 2:])
    with pytest.raises(ValueError):
        apply_loss(v, 1.2)


def test_is_physical_rejects_indefinite_matrices():
    # |symplectic eigenvalue| = 3 >= 1, but the matrix is indefinite
    v = np.diag([3.0, -3.0])
    assert minimum_symplectic_eigenvalue(v) >= 1.0
    assert not is_physical(v)


def test_is_physical_rejects_below_vacuum_noise():
    assert not is_physical(np.diag([0.9, 0.9]))
    assert is_physical(np.diag([0.5, 2.0]))  # squeezed but allowed (det = 1)


def test_minimal_physical_inflation():
    v = np.diag([0.8, 0.8, 1.0, 1.0])
    fixed, eps = minimal_physical_inflation(v)
    assert eps == pytest.approx(0.2, abs=1e-9)
    assert is_physical(fixed)
    ok, eps0 = minimal_physical_inflation(np.eye(4))
    assert eps0 == 0.0
    npt.assert_array_equal(ok, np.eye(4))


def test_random_physical_covariance_is_physical():
    rng = np.random.default_rng(2026)
    for _ in range(50):
        v = random_physical_covariance(rng)
        npt.assert_allclose(v, v.T, atol=1e-12)
        assert is_physical(v)
