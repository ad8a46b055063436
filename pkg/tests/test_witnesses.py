import numpy as np
import numpy.testing as npt
import pytest

from twinspec.fwm import reference_fwm_params, synthesize_state
from twinspec.gaussian import (
    CovarianceMatrix,
    apply_mode_rotation,
    change_basis,
    is_physical,
    squeezing_to_gain,
    two_mode_squeezed_covariance,
    vacuum_covariance,
)
from twinspec.witnesses import (
    BIPARTITIONS,
    dgcz_value,
    emulate_homodyne,
    energy_imbalance,
    ppt_min_symplectic,
    sideband_energy,
    two_mode_reduction,
    witness_records,
    witness_sweep,
)


def default_state(delta_hz=75e6, **kwargs):
    return synthesize_state(
        reference_fwm_params(**kwargs), omega_hz=7e6, delta_hz=delta_hz
    )


def test_witnesses_on_two_mode_squeezed_vacuum():
    for r in (0.1, 0.5, 1.0, 2.0):
        v = two_mode_squeezed_covariance(squeezing_to_gain(r))
        npt.assert_allclose(dgcz_value(v), np.exp(-2 * r), atol=1e-12)
        npt.assert_allclose(ppt_min_symplectic(v), np.exp(-2 * r), atol=1e-12)


def test_witness_boundaries_on_vacuum():
    v = np.eye(4)
    assert dgcz_value(v) == pytest.approx(1.0)
    assert ppt_min_symplectic(v) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        dgcz_value(np.eye(6))
    with pytest.raises(ValueError):
        ppt_min_symplectic(np.eye(6))


def test_dgcz_blind_to_rotated_correlations():
    # rotating one mode of a strongly entangled pair hides it from the
    # sum-variance witness but not from partial transposition
    gain = 4.0
    v = two_mode_squeezed_covariance(gain)
    rot = apply_mode_rotation(v, 1, np.pi / 2)
    assert dgcz_value(rot) == pytest.approx(2 * gain - 1)  # far above 1
    assert ppt_min_symplectic(rot) == pytest.approx(ppt_min_symplectic(v), abs=1e-10)
    assert ppt_min_symplectic(rot) < 1.0


def test_sideband_energy_values():
    vac = vacuum_covariance(4)
    for mode in ("probe_upper", "conjugate_lower"):
        assert sideband_energy(vac, mode) == 0.0
    thermal = CovarianceMatrix(np.kron(np.eye(4), np.diag([3.0, 3.0])))
    assert sideband_energy(thermal, "probe_upper") == pytest.approx(1.0)
    state = default_state()
    # each sideband of a pair with gain G holds G - 1 photons
    assert sideband_energy(state, "probe_upper") == pytest.approx(14.0)
    assert sideband_energy(state, "probe_lower") == pytest.approx(8.0)


def test_energy_imbalance_signs():
    state = default_state()
    assert energy_imbalance(state, "probe") == pytest.approx(3.0, abs=1e-9)
    assert energy_imbalance(state, "conjugate") == pytest.approx(-3.0, abs=1e-9)
    # works from the sym/asym basis too
    sa = change_basis(state, "sym_asym")
    assert energy_imbalance(sa, "probe") == pytest.approx(3.0, abs=1e-9)


def test_imbalance_appears_as_sym_asym_cross_correlation():
    # the p_sym p_asym covariance of one beam equals twice its imbalance
    state = default_state()
    sa = change_basis(state, "sym_asym")
    assert sa.matrix[0, 2] == pytest.approx(2 * 3.0, abs=1e-9)
    assert sa.matrix[4, 6] == pytest.approx(2 * -3.0, abs=1e-9)


def test_emulate_homodyne_zeroes_imbalance():
    em = emulate_homodyne(default_state())
    assert energy_imbalance(em, "probe") == 0.0
    assert energy_imbalance(em, "conjugate") == 0.0
    assert em.basis == "sideband"  # basis of the input preserved
    # sideband energies equalized at the mean
    assert sideband_energy(em, "probe_upper") == pytest.approx(11.0, abs=1e-9)
    assert sideband_energy(em, "probe_lower") == pytest.approx(11.0, abs=1e-9)


def test_emulate_homodyne_keeps_sym_blocks():
    state = default_state()
    em = emulate_homodyne(state)
    red = two_mode_reduction(state, "sym")
    red_em = two_mode_reduction(em, "sym")
    npt.assert_allclose(red_em.matrix, red.matrix, atol=1e-10)


def test_emulate_homodyne_hides_pair_entanglement():
    state = default_state()
    for pair in ("pair1", "pair2"):
        assert ppt_min_symplectic(two_mode_reduction(state, pair).matrix) < 1.0
    em = emulate_homodyne(state)
    assert ppt_min_symplectic(two_mode_reduction(em, "pair1").matrix) == pytest.approx(
        5.9827534923788761, abs=1e-9
    )
    assert ppt_min_symplectic(two_mode_reduction(em, "pair2").matrix) == pytest.approx(
        6.0294372515228561, abs=1e-6
    )
    assert not is_physical(em)  # the doctored matrix is not a state


def test_emulate_homodyne_fixes_balanced_states():
    # at the gain peak both pairs see the same gain: nothing to hide
    state = default_state(delta_hz=95e6, phase_slope_rad_per_hz=1e-8)
    em = emulate_homodyne(state)
    npt.assert_allclose(em.matrix, state.matrix, atol=1e-9)


def test_witness_records_fields():
    state = default_state()
    records = witness_records(state, "resonator")
    assert [r.bipartition for r in records] == list(BIPARTITIONS)
    for r in records:
        assert r.scenario == "resonator"
        assert r.state_physical is True
        assert r.dE_probe == pytest.approx(3.0, abs=1e-9)
        assert r.delta_hz == 75e6
    em_records = witness_records(emulate_homodyne(state), "homodyne_emulated")
    assert all(not r.state_physical for r in em_records)
    assert all(r.dE_probe == 0.0 for r in em_records)


def test_two_mode_reduction_rejects_unknown_bipartition():
    with pytest.raises(ValueError, match="unknown bipartition"):
        two_mode_reduction(default_state(), "pair3")


def test_witness_sweep_shape_and_scenarios():
    profile = reference_fwm_params()
    deltas = [60e6, 75e6]
    records = witness_sweep(profile, 7e6, deltas)
    assert len(records) == len(deltas) * 2 * 3
    assert {r.scenario for r in records} == {"resonator", "homodyne_emulated"}
    assert {r.delta_hz for r in records} == set(deltas)
    only_res = witness_sweep(profile, 7e6, deltas, scenarios=("resonator",))
    assert len(only_res) == len(deltas) * 3
    with pytest.raises(ValueError, match="unknown scenarios"):
        witness_sweep(profile, 7e6, deltas, scenarios=("direct",))
