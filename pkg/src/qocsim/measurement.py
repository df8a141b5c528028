"""Detector POVMs, heralded conditioning, and pattern probabilities.

Detector inefficiency is modeled as binomial thinning inside the POVM (all
elements are diagonal in the Fock basis), which is equivalent to a
beam-splitter dilation for photon-counting statistics; the tests exercise that
equivalence explicitly.  Measured modes are always traced out after
conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import comb

from .core import (
    Cutoff,
    MixedState,
    OperatorMatrix,
    PureState,
    State,
    apply_matrix,
    partial_trace,
    to_mixed,
)

__all__ = [
    "DetectorModel",
    "Requirement",
    "click",
    "noclick",
    "exactly",
    "unmeasured",
    "HeraldPattern",
    "ZeroProbabilityError",
    "povm_elements",
    "povm_element",
    "condition",
    "pattern_probability",
    "conditional_pattern_probability",
]

ZERO_PROBABILITY_FLOOR = 1e-300


class ZeroProbabilityError(ValueError):
    """Conditioning on an outcome of (numerically) zero probability."""


@dataclass(frozen=True)
class DetectorModel:
    """Photodetector: 'number-resolving' or 'on-off', with quantum efficiency."""

    kind: str = "number-resolving"
    efficiency: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("number-resolving", "on-off"):
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")


IDEAL_NR = DetectorModel("number-resolving", 1.0)
IDEAL_ON_OFF = DetectorModel("on-off", 1.0)


@dataclass(frozen=True)
class Requirement:
    """Per-mode herald requirement: click | noclick | exactly(n) | unmeasured."""

    kind: str
    count: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("click", "noclick", "exactly", "unmeasured"):
            raise ValueError(f"unknown requirement {self.kind!r}")
        if self.kind == "exactly":
            if self.count is None or self.count < 0:
                raise ValueError("exactly requires a count >= 0")
        elif self.count is not None:
            raise ValueError(f"{self.kind} takes no count")


click = Requirement("click")
noclick = Requirement("noclick")
unmeasured = Requirement("unmeasured")


def exactly(n: int) -> Requirement:
    return Requirement("exactly", n)


@dataclass(frozen=True)
class HeraldPattern:
    """Required outcome per measured mode; unmeasured modes may be omitted."""

    requirements: Mapping[str, Requirement]

    def __post_init__(self) -> None:
        measured = [m for m, r in self.requirements.items() if r.kind != "unmeasured"]
        if not measured:
            raise ValueError("herald pattern must measure at least one mode")


def _off_diagonal(detector: DetectorModel, d: int) -> np.ndarray:
    """P(no click | n photons) = (1-eta)^n."""
    return (1.0 - detector.efficiency) ** np.arange(d)


def povm_elements(detector: DetectorModel, cutoff: Cutoff) -> list[OperatorMatrix]:
    """Complete POVM of the detector (diagonal elements summing to identity).

    on-off: [E_off, E_on] with E_off = Σ (1−η)ⁿ |n⟩⟨n|, E_on = 1 − E_off.
    number-resolving: E_k = Σ_{n≥k} C(n,k) ηᵏ (1−η)^{n−k} |n⟩⟨n| for k = 0..d−1.
    """
    d = cutoff.d
    if detector.kind == "on-off":
        off = _off_diagonal(detector, d)
        return [
            OperatorMatrix.create(np.diag(off).astype(np.complex128), cutoff=cutoff),
            OperatorMatrix.create(np.diag(1.0 - off).astype(np.complex128), cutoff=cutoff),
        ]
    eta = detector.efficiency
    n = np.arange(d)
    out = []
    for k in range(d):
        diag = np.where(
            n >= k,
            comb(n, k) * eta**k * (1.0 - eta) ** np.maximum(n - k, 0),
            0.0,
        )
        out.append(OperatorMatrix.create(np.diag(diag).astype(np.complex128), cutoff=cutoff))
    return out


def povm_element(requirement: Requirement, detector: DetectorModel, cutoff: Cutoff) -> OperatorMatrix:
    """Single POVM element realizing a herald requirement on one mode."""
    d = cutoff.d
    if requirement.kind == "unmeasured":
        return OperatorMatrix.create(np.eye(d, dtype=np.complex128), cutoff=cutoff)
    if requirement.kind == "noclick":
        diag = _off_diagonal(detector, d)
    elif requirement.kind == "click":
        diag = 1.0 - _off_diagonal(detector, d)
    else:  # exactly(k)
        if detector.kind != "number-resolving":
            raise ValueError("exactly(n) requires a number-resolving detector")
        k = requirement.count
        if k >= d:
            raise ValueError(f"exactly({k}) outside retained levels 0..{d - 1}")
        eta = detector.efficiency
        n = np.arange(d)
        diag = np.where(n >= k, comb(n, k) * eta**k * (1.0 - eta) ** np.maximum(n - k, 0), 0.0)
    return OperatorMatrix.create(np.diag(diag).astype(np.complex128), cutoff=cutoff)


def condition(state: State, mode: str, element: OperatorMatrix) -> tuple[State, float]:
    """Condition on a POVM element at ``mode`` and trace that mode out.

    Returns the unnormalized conditional state (its carried weight equals the
    outcome probability relative to the input weight) and that probability.
    For a rank-one projective outcome on a pure state the conditional branch
    stays pure.  Raises :class:`ZeroProbabilityError` on vanishing outcomes.
    """
    idx = state.mode_index(mode)
    d = state.cutoff.d
    diag = np.real(np.diag(element.matrix)).copy()
    is_diagonal = np.allclose(element.matrix, np.diag(np.diag(element.matrix)), atol=1e-14)
    remaining = tuple(m for m in state.modes if m != mode)

    if isinstance(state, PureState):
        t = np.moveaxis(state.tensor_view(), state.axis_of(mode), 0)  # (d, rest...)
        t = t.reshape(d, -1)
        if is_diagonal:
            weights = diag * np.sum(np.abs(t) ** 2, axis=1)
            prob = float(np.sum(weights))
            _check_prob(prob, state)
            support = np.nonzero(diag > 0)[0]
            if support.size == 1:
                # rank-one diagonal outcome: pure conditional branch
                n = int(support[0])
                branch = np.sqrt(diag[n]) * t[n]
                return (
                    _pure_from_slice(branch, remaining, state, mode),
                    prob,
                )
            rho = np.einsum("n,ni,nj->ij", diag, t, t.conj())
            rho = _reorder_reduced(rho, remaining, state, mode)
            return MixedState.create(remaining, state.cutoff, rho), prob
        # general Hermitian PSD element: E^(1/2) ρ E^(1/2), then trace
        return condition(to_mixed(state), mode, element)

    mat = state.matrix
    if is_diagonal:
        # Tr_mode[E ρ] with diagonal E: weight each (n, n') block
        M = len(state.modes)
        t = mat.reshape((d,) * (2 * M))
        ax_ket = M - 1 - idx
        ax_bra = 2 * M - 1 - idx
        t = np.moveaxis(t, (ax_ket, ax_bra), (0, 1))
        rest = d ** (M - 1)
        t = t.reshape(d, d, rest, rest)
        rho = np.einsum("n,nnij->ij", diag, t)
        prob = float(np.real(np.trace(rho)))
        _check_prob(prob, state)
        rho = _reorder_reduced(rho, remaining, state, mode)
        return MixedState.create(remaining, state.cutoff, rho), prob
    evals, evecs = np.linalg.eigh(element.matrix)
    evals = np.clip(evals, 0.0, None)
    root = (evecs * np.sqrt(evals)) @ evecs.conj().T
    ket = apply_matrix(mat, state.modes, state.cutoff, root, (mode,))
    both = apply_matrix(ket.conj().T, state.modes, state.cutoff, root, (mode,)).conj().T
    sandwiched = MixedState.create(state.modes, state.cutoff, both)
    prob = sandwiched.trace_tag
    _check_prob(prob, state)
    return partial_trace(sandwiched, remaining), prob


def _check_prob(prob: float, state: State) -> None:
    weight = state.norm_tag if isinstance(state, PureState) else state.trace_tag
    if prob <= ZERO_PROBABILITY_FLOOR * max(weight, 1.0):
        raise ZeroProbabilityError(
            f"conditioning outcome has vanishing probability ({prob:.3e})"
        )


def _pure_from_slice(
    branch: np.ndarray, remaining: tuple[str, ...], state: PureState, mode: str
) -> PureState:
    # branch was flattened with `mode` moved to the front; the rest kept the
    # reversed-digit order of the remaining modes, which is already the
    # canonical layout for `remaining`.
    return PureState.create(remaining, state.cutoff, branch.reshape(-1))


def _reorder_reduced(
    rho: np.ndarray, remaining: tuple[str, ...], state: State, mode: str
) -> np.ndarray:
    # moving `mode` to the front preserved the relative order of the other
    # digits, so the reduced matrix is already indexed by `remaining`.
    return rho


def pattern_probability(
    state: State,
    pattern: "HeraldPattern | Mapping[str, Requirement]",
    detectors: Mapping[str, DetectorModel],
) -> float:
    """Tr[ρ ⊗ᵢ Eᵢ] for the per-mode requirements (identity on unmeasured modes).

    Accepts a raw mode→requirement mapping as well, which may leave every mode
    unmeasured (the probability is then the state's carried weight).
    """
    reqs = pattern.requirements if isinstance(pattern, HeraldPattern) else pattern
    d = state.cutoff.d
    # build the joint diagonal over all modes little-endian, then contract
    diags: list[np.ndarray] = []
    for m in state.modes:
        req = reqs.get(m, unmeasured)
        if req.kind == "unmeasured":
            diags.append(np.ones(d))
        else:
            det = detectors.get(m, IDEAL_NR)
            el = povm_element(req, det, state.cutoff)
            diags.append(np.real(np.diag(el.matrix)))
    joint = diags[0]
    for vec in diags[1:]:
        joint = np.kron(vec, joint)  # later modes are slower digits
    if isinstance(state, PureState):
        return float(np.sum(joint * np.abs(state.amps) ** 2))
    return float(np.real(np.sum(joint * np.diag(state.matrix))))


def conditional_pattern_probability(
    state: State,
    joint_pattern: HeraldPattern,
    given_pattern: HeraldPattern,
    detectors: Mapping[str, DetectorModel],
) -> float:
    """P(joint)/P(given); raises ZeroProbabilityError if the condition never occurs."""
    denom = pattern_probability(state, given_pattern, detectors)
    if denom <= 0.0:
        raise ZeroProbabilityError("conditioning pattern has zero probability")
    return pattern_probability(state, joint_pattern, detectors) / denom
