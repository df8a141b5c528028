import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qocsim.core import (
    Cutoff,
    MixedState,
    PureState,
    apply,
    partial_trace,
    tensor,
    to_mixed,
)
from qocsim.elements import (
    BeamSplitterParams,
    SqueezerParams,
    beam_splitter_unitary,
    coherent_state,
    fock_state,
    thermal_state,
    two_mode_squeezer_unitary,
    vacuum,
)
from qocsim.measurement import (
    DetectorModel,
    HeraldPattern,
    ZeroProbabilityError,
    click,
    condition,
    conditional_pattern_probability,
    exactly,
    noclick,
    pattern_probability,
    povm_element,
    povm_elements,
    unmeasured,
)
from qocsim.phasespace import fidelity


def test_detector_validation():
    with pytest.raises(ValueError):
        DetectorModel("thermocouple")
    with pytest.raises(ValueError):
        DetectorModel("on-off", 1.5)


@pytest.mark.parametrize("kind", ["on-off", "number-resolving"])
@pytest.mark.parametrize("eta", [1.0, 0.45, 0.0])
def test_povm_completeness(kind, eta):
    c = Cutoff(12)
    elements = povm_elements(DetectorModel(kind, eta), c)
    total = sum(e.matrix for e in elements)
    assert np.max(np.abs(total - np.eye(12))) < 1e-12


def test_ideal_onoff_off_is_vacuum_projector():
    c = Cutoff(6)
    off, on = povm_elements(DetectorModel("on-off", 1.0), c)
    expected = np.zeros((6, 6))
    expected[0, 0] = 1
    assert np.allclose(off.matrix, expected)
    assert np.allclose(on.matrix, np.eye(6) - expected)


def test_onoff_single_photon_click_probability():
    c = Cutoff(6)
    el = povm_element(click, DetectorModel("on-off", 0.45), c)
    assert el.matrix[1, 1].real == pytest.approx(0.45, abs=1e-12)


def test_number_resolving_binomial_thinning():
    c = Cutoff(8)
    eta = 0.6
    el = povm_element(exactly(2), DetectorModel("number-resolving", eta), c)
    for n in range(8):
        expected = math.comb(n, 2) * eta**2 * (1 - eta) ** (n - 2) if n >= 2 else 0.0
        assert el.matrix[n, n].real == pytest.approx(expected, abs=1e-12)


def test_exactly_requires_number_resolving():
    with pytest.raises(ValueError):
        povm_element(exactly(1), DetectorModel("on-off", 1.0), Cutoff(4))


def test_condition_vacuum_noclick_keeps_state():
    c = Cutoff(6)
    joint = tensor(coherent_state(0.8, c, "a"), vacuum(c, "anc"))
    el = povm_element(noclick, DetectorModel("on-off", 1.0), c)
    branch, prob = condition(joint, "anc", el)
    assert prob == pytest.approx(1.0, abs=1e-12)
    assert isinstance(branch, PureState)
    assert fidelity(coherent_state(0.8, c, "a"), branch) == pytest.approx(1.0, abs=1e-12)


def test_condition_idler_heralds_single_photon():
    d = 12
    c = Cutoff(d)
    s = 0.1
    sq = two_mode_squeezer_unitary(SqueezerParams(s, ("a", "d")), c)
    out = apply(sq, tensor(vacuum(c, "a"), vacuum(c, "d")))
    el = povm_element(exactly(1), DetectorModel("number-resolving", 1.0), c)
    branch, prob = condition(out, "d", el)
    lam, mu = math.tanh(s), math.cosh(s)
    assert prob == pytest.approx(lam**2 / mu**2, abs=1e-10)
    assert isinstance(branch, PureState)
    assert fidelity(fock_state(1, c, "a"), branch) == pytest.approx(1.0, abs=1e-10)


def test_condition_reflected_photon_is_subtraction():
    d = 16
    c = Cutoff(d)
    T = 0.99
    bs = beam_splitter_unitary(BeamSplitterParams(T, ("a", "b")), c)
    out = apply(bs, tensor(coherent_state(1.0, c, "a"), vacuum(c, "b")))
    el = povm_element(exactly(1), DetectorModel("number-resolving", 1.0), c)
    branch, prob = condition(out, "b", el)
    # a|t alpha> ∝ |t alpha>: the branch is the attenuated coherent state up to O(r^2)
    ref = coherent_state(math.sqrt(T), c, "a")
    assert fidelity(ref, branch) > 1 - 1e-3


def test_condition_zero_probability_raises():
    c = Cutoff(6)
    joint = tensor(vacuum(c, "a"), vacuum(c, "b"))
    el = povm_element(exactly(2), DetectorModel("number-resolving", 1.0), c)
    with pytest.raises(ZeroProbabilityError):
        condition(joint, "b", el)


def test_condition_probabilities_complete():
    d = 8
    c = Cutoff(d)
    rng = np.random.default_rng(21)
    vec = rng.normal(size=d * d) + 1j * rng.normal(size=d * d)
    state = PureState.create(("a", "b"), c, vec)
    det = DetectorModel("number-resolving", 0.7)
    total = 0.0
    for el in povm_elements(det, c):
        try:
            _, prob = condition(state, "b", el)
        except ZeroProbabilityError:
            prob = 0.0
        total += prob
    assert total == pytest.approx(state.norm_tag, abs=1e-10)


def test_onoff_click_equals_complement_of_vacuum_projector():
    d = 8
    c = Cutoff(d)
    rng = np.random.default_rng(4)
    vec = rng.normal(size=d * d) + 1j * rng.normal(size=d * d)
    state = PureState.create(("a", "b"), c, vec)
    el_click = povm_element(click, DetectorModel("on-off", 1.0), c)
    from qocsim.core import OperatorMatrix

    proj = np.eye(d, dtype=complex)
    proj[0, 0] = 0
    el_manual = OperatorMatrix.create(proj, cutoff=c)
    b1, p1 = condition(state, "b", el_click)
    b2, p2 = condition(state, "b", el_manual)
    assert p1 == pytest.approx(p2, abs=1e-12)
    assert np.allclose(to_mixed(b1).matrix, to_mixed(b2).matrix, atol=1e-12)


def test_condition_mixed_state_diagonal_path():
    d = 10
    c = Cutoff(d)
    joint = tensor(thermal_state(0.8, c, "a"), vacuum(c, "b"))
    bs = beam_splitter_unitary(BeamSplitterParams(0.9, ("a", "b")), c)
    out = apply(bs, joint)
    el = povm_element(click, DetectorModel("on-off", 0.5), c)
    branch, prob = condition(out, "b", el)
    assert isinstance(branch, MixedState)
    assert 0 < prob < 1
    assert branch.trace_tag == pytest.approx(prob, rel=1e-10)
    assert np.linalg.eigvalsh(branch.matrix).min() >= -1e-12


def test_pattern_probability_all_unmeasured_is_weight():
    c = Cutoff(5)
    state = tensor(coherent_state(0.5, c, "a"), vacuum(c, "b"))
    probs = pattern_probability(state, {"a": unmeasured, "b": unmeasured}, {})
    assert probs == pytest.approx(state.norm_tag, abs=1e-12)


def test_herald_pattern_requires_a_measured_mode():
    with pytest.raises(ValueError):
        HeraldPattern({"a": unmeasured})


def test_pattern_probability_click_statistics():
    d = 10
    c = Cutoff(d)
    state = coherent_state(1.0, c, "a")
    dets = {"a": DetectorModel("on-off", 1.0)}
    p_click = pattern_probability(state, HeraldPattern({"a": click}), dets)
    assert p_click == pytest.approx(1 - math.exp(-1.0), abs=1e-6)


def test_conditional_pattern_probability_ratio_and_zero_guard():
    d = 8
    c = Cutoff(d)
    state = tensor(coherent_state(0.7, c, "a"), coherent_state(0.4, c, "b"))
    dets = {m: DetectorModel("on-off", 1.0) for m in ("a", "b")}
    joint = HeraldPattern({"a": click, "b": click})
    given_a = HeraldPattern({"a": click})
    ratio = conditional_pattern_probability(state, joint, given_a, dets)
    pa = pattern_probability(state, given_a, dets)
    pj = pattern_probability(state, joint, dets)
    assert ratio == pytest.approx(pj / pa, rel=1e-12)
    impossible = HeraldPattern({"a": exactly(7)})
    with pytest.raises(ZeroProbabilityError):
        conditional_pattern_probability(
            tensor(vacuum(c, "a"), vacuum(c, "b")), joint, impossible,
            {m: DetectorModel("number-resolving", 1.0) for m in ("a", "b")},
        )


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=6, max_size=6),
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_click_probability_monotone_in_efficiency(pops, eta1, eta2):
    # P(click) is nondecreasing in eta on diagonal states
    total = sum(pops)
    if total == 0:
        pops = [1.0] + pops[1:]
        total = sum(pops)
    diag = np.array(pops) / total
    c = Cutoff(6)
    state = MixedState.create(("a",), c, np.diag(diag).astype(complex))
    lo, hi = sorted((eta1, eta2))
    p_lo = pattern_probability(state, HeraldPattern({"a": click}), {"a": DetectorModel("on-off", lo)})
    p_hi = pattern_probability(state, HeraldPattern({"a": click}), {"a": DetectorModel("on-off", hi)})
    assert p_hi >= p_lo - 1e-12


def test_inefficiency_matches_beam_splitter_dilation():
    # binomial-thinning POVM == tap to an ancilla with an ideal detector
    d = 10
    c = Cutoff(d)
    eta = 0.45
    rng = np.random.default_rng(17)
    vec = rng.normal(size=d * d) + 1j * rng.normal(size=d * d)
    state = PureState.create(("keep", "meas"), c, vec / np.linalg.norm(vec))

    det = DetectorModel("number-resolving", eta)
    # dilation: reflect the measured mode into an ancilla with r^2 = eta
    joint = tensor(state, vacuum(c, "anc"))
    bs = beam_splitter_unitary(BeamSplitterParams(1.0 - eta, ("meas", "anc")), c)
    tapped = apply(bs, joint)
    ideal = DetectorModel("number-resolving", 1.0)
    for k in (0, 1, 2):
        el = povm_element(exactly(k), det, c)
        direct_branch, direct_prob = condition(state, "meas", el)
        el_ideal = povm_element(exactly(k), ideal, c)
        dil_branch, dil_prob = condition(tapped, "anc", el_ideal)
        assert direct_prob == pytest.approx(dil_prob, abs=1e-12)
        red = partial_trace(dil_branch, ("keep",))
        assert np.allclose(to_mixed(direct_branch).matrix, red.matrix, atol=1e-12)
