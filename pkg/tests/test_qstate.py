import json
import math

import numpy as np
import pytest

from polent import qstate
from polent.errors import DegeneratePhaseError, InvalidArgumentError, InvalidStateError


def wootters_nonhermitian(rho):
    """Independent route: square roots of the spectrum of rho * rho~."""
    yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
    r = rho @ yy @ rho.conj() @ yy
    lam = np.sort(np.sqrt(np.abs(np.linalg.eigvals(r).real)))[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def x_state_closed_form(rho):
    a, b, c, d = np.real(np.diag(rho))
    return 2 * max(0.0, abs(rho[1, 2]) - math.sqrt(a * d), abs(rho[0, 3]) - math.sqrt(b * c))


def test_bell_phase_state_pi_has_negative_coherence():
    rho = qstate.bell_phase_state(math.pi)
    assert rho[1, 2] == pytest.approx(-0.5)
    np.testing.assert_allclose(np.real(np.diag(rho)), [0, 0.5, 0.5, 0], atol=1e-15)
    assert np.all(rho[0] == 0) and np.all(rho[:, 3] == 0)


def test_bell_phase_state_zero_is_triplet():
    assert qstate.bell_phase_state(0.0)[1, 2] == pytest.approx(0.5)


def test_bell_phase_state_reported_led_phase():
    rho = qstate.bell_phase_state(-0.941 * math.pi)
    assert np.angle(rho[2, 1]) == pytest.approx(-0.941 * math.pi, abs=1e-12)


def test_bell_phase_state_rejects_nan():
    with pytest.raises(InvalidArgumentError):
        qstate.bell_phase_state(float("nan"))


def test_x_state_pure_limit_matches_bell_state():
    np.testing.assert_allclose(qstate.x_state(1.0, math.pi), qstate.bell_phase_state(math.pi),
                               atol=1e-15)


def test_x_state_fully_dephased():
    rho = qstate.x_state(0.0, 1.234)
    np.testing.assert_allclose(rho, np.diag([0, 0.5, 0.5, 0]))
    assert qstate.concurrence(rho) == 0.0


@pytest.mark.parametrize("c, phi", [(0.834, -0.941 * math.pi), (0.952, -0.943 * math.pi),
                                    (0.3, 0.2)])
def test_x_state_concurrence_is_exact(c, phi):
    rho = qstate.x_state(c, phi)
    assert rho[1, 2] == pytest.approx(c / 2 * np.exp(-1j * phi))
    assert qstate.concurrence(rho) == pytest.approx(c, abs=1e-12)


def test_x_state_rejects_out_of_range():
    with pytest.raises(InvalidArgumentError):
        qstate.x_state(1.2, 0.0)


def test_x_state_from_visibilities_layout():
    rho = qstate.x_state_from_visibilities(0.97, 0.81)
    np.testing.assert_allclose(np.real(np.diag(rho)), [0.0075, 0.4925, 0.4925, 0.0075])
    assert abs(rho[1, 2]) == pytest.approx(0.405)
    assert qstate.concurrence(rho) == pytest.approx(x_state_closed_form(rho), abs=1e-12)


def test_mix_identity_and_validation():
    rho = qstate.random_density_matrix(np.random.default_rng(3))
    np.testing.assert_allclose(qstate.mix([(1.0, rho)]), rho)
    with pytest.raises(InvalidArgumentError):
        qstate.mix([])
    with pytest.raises(InvalidArgumentError):
        qstate.mix([(0.7, rho), (0.2, rho)])
    with pytest.raises(InvalidArgumentError):
        qstate.mix([(1.5, rho), (-0.5, rho)])


def test_equal_mix_of_opposite_phases_is_separable():
    rho = qstate.mix([(0.5, qstate.bell_phase_state(0)), (0.5, qstate.bell_phase_state(math.pi))])
    assert wootters_nonhermitian(rho) == pytest.approx(0.0, abs=1e-12)
    assert qstate.concurrence(rho) == pytest.approx(0.0, abs=1e-12)


def test_fig4_mixture_closed_form():
    rho = qstate.mix([(0.5, qstate.x_state(0.933, 0.5558 * math.pi)),
                      (0.5, qstate.x_state(0.916, 0.3220 * math.pi))])
    expected = 0.8628574060663645  # 1/2 |0.933 e^{i 0.5558 pi} + 0.916 e^{i 0.3220 pi}|
    assert qstate.concurrence(rho) == pytest.approx(expected, abs=1e-12)
    assert wootters_nonhermitian(rho) == pytest.approx(expected, abs=1e-9)
    assert abs(expected - 0.8558) < 0.02


def test_concurrence_known_states():
    assert qstate.concurrence(qstate.bell_phase_state(0.7)) == pytest.approx(1.0, abs=1e-9)
    assert qstate.concurrence(qstate.product_state("H", "V")) == pytest.approx(0.0, abs=1e-12)
    assert qstate.concurrence(qstate.maximally_mixed()) == 0.0


def test_concurrence_matches_nonhermitian_route(rng):
    for rank in (1, 2, 3, 4):
        for _ in range(10):
            rho = qstate.random_density_matrix(rng, rank)
            assert qstate.concurrence(rho) == pytest.approx(wootters_nonhermitian(rho), abs=1e-7)


def test_concurrence_rejects_unphysical():
    bad = np.diag([0.6, 0.6, -0.2, 0.0]).astype(complex)
    with pytest.raises(InvalidStateError):
        qstate.concurrence(bad)


def test_fidelity_examples():
    assert qstate.fidelity_to_pure(qstate.bell_phase_state(math.pi), math.pi) == pytest.approx(1.0)
    assert qstate.fidelity_to_pure(qstate.bell_phase_state(0.0), math.pi) == pytest.approx(0.0, abs=1e-15)
    f = qstate.fidelity_to_pure(qstate.bell_phase_state(-0.941 * math.pi), math.pi)
    assert f == pytest.approx(0.9914355390661895, abs=1e-12)


def test_infer_phase_examples():
    assert qstate.infer_phase(qstate.bell_phase_state(0.5)) == pytest.approx(0.5, abs=1e-12)
    assert qstate.infer_phase(qstate.x_state(0.9, -0.943 * math.pi)) == pytest.approx(
        -0.943 * math.pi, abs=1e-12)
    with pytest.raises(DegeneratePhaseError):
        qstate.infer_phase(qstate.x_state(0.0, 1.0))


def test_infer_phase_branch_includes_pi():
    assert qstate.infer_phase(qstate.bell_phase_state(math.pi)) == pytest.approx(math.pi)
    assert qstate.infer_phase(qstate.bell_phase_state(-math.pi)) == pytest.approx(math.pi)


def test_validate_physical_reports():
    ok = qstate.validate_physical(qstate.bell_phase_state(math.pi))
    assert ok.passed and ok.hermiticity_defect < 1e-12 and ok.trace_defect < 1e-12
    low = qstate.validate_physical(0.9 * qstate.bell_phase_state(math.pi))
    assert low.trace_defect == pytest.approx(0.1) and not low.passed


def test_validate_physical_flags_noisy_linear_inversion():
    from polent import polarimetry
    from polent.analysis.tomography import linear_inversion

    rng = np.random.default_rng(7)
    rho = qstate.bell_phase_state(math.pi)
    probs = np.array([np.trace(rho @ s.projector).real for s in polarimetry.tomography_settings()])
    flagged = 0
    for _ in range(20):
        noisy = rng.poisson(probs * 1000) / 1000
        flagged += not qstate.validate_physical(linear_inversion(noisy)).passed
    assert flagged > 0


def test_json_round_trip_is_exact(rng):
    rho = qstate.random_density_matrix(rng)
    text = qstate.to_json(rho)
    payload = json.loads(text)
    assert payload["basis"] == ["HH", "HV", "VH", "VV"]
    assert np.array_equal(qstate.from_json(text), rho)


def test_json_rejects_other_basis():
    with pytest.raises(InvalidArgumentError):
        qstate.from_json(json.dumps({"basis": ["VV", "VH", "HV", "HH"], "elements": []}))


def test_trace_distance_and_uhlmann_fidelity():
    a = qstate.bell_phase_state(0.0)
    b = qstate.bell_phase_state(math.pi)
    assert qstate.trace_distance(a, b) == pytest.approx(1.0)
    assert qstate.state_fidelity(a, a) == pytest.approx(1.0)
    assert qstate.state_fidelity(a, b) == pytest.approx(0.0, abs=1e-12)
