"""Plan executors: a staged ensemble evaluator and a brute-force reference.

The staged executor attaches modes lazily, traces every heralded mode
immediately, and represents (possibly mixed) states as weighted ensembles of
pure vectors: ρ = Σᵢ |vᵢ⟩⟨vᵢ|.  All detector POVM elements are diagonal in the
Fock basis, so conditioning maps ensembles to ensembles; the member count is
compacted back to the live-space rank via an eigendecomposition whenever it
grows past it.  This keeps the Fig.-1-style pipelines at d ≈ 32 with thermal
inputs in ≈ d² live dimensions.

The brute-force executor builds the full joint space up front, applies
embedded conditioning operators without any tracing, and reduces only at the
end.  It exists as an independent oracle: both executors must agree to 1e-10
on small circuits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import measurement
from .core import (
    Cutoff,
    MixedState,
    PureState,
    State,
    apply_matrix,
    partial_trace,
    tensor,
    to_mixed,
)
from .dsl import ElementStmt, ExecutionPlan, HeraldStmt, InputStmt, OutputStmt, PlanStep
from .elements import (
    BeamSplitterParams,
    SqueezerParams,
    beam_splitter_unitary,
    coherent_state,
    fock_state,
    thermal_state,
    two_mode_squeezer_unitary,
    vacuum,
)
from .measurement import DetectorModel, HeraldPattern, Requirement, ZeroProbabilityError
from .phasespace import GridSpec, WignerGrid, fidelity, uhlmann_fidelity, wigner

__all__ = [
    "LeakBudgetError",
    "HeraldRecord",
    "ExecutionResult",
    "Ensemble",
    "execute_plan",
    "execute_plan_brute",
    "detector_for",
    "requirement_for",
]


_DENSIFY_LIMIT = 4096  # largest joint dimension materialized as a dense matrix


class LeakBudgetError(RuntimeError):
    """Top-level population exceeded the leak budget; rerun with a larger cutoff."""

    def __init__(self, stage: str, mode: str, leak: float, budget: float, cutoff: int):
        self.stage = stage
        self.mode = mode
        self.leak = leak
        self.budget = budget
        self.cutoff = cutoff
        super().__init__(
            f"truncation leak {leak:.3e} on mode {mode!r} after {stage} exceeds "
            f"budget {budget:.3e} at cutoff d={cutoff}; increase the cutoff"
        )


@dataclass
class Ensemble:
    """Weighted pure-vector ensemble over the live modes (little-endian digits)."""

    modes: tuple[str, ...]
    cutoff: Cutoff
    members: list[np.ndarray]

    @property
    def weight(self) -> float:
        return float(sum(np.sum(np.abs(v) ** 2) for v in self.members))

    @property
    def dim(self) -> int:
        return self.cutoff.d ** len(self.modes)

    def to_mixed(self) -> MixedState:
        rho = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for v in self.members:
            rho += np.outer(v, v.conj())
        return MixedState.create(self.modes, self.cutoff, rho)

    def to_state(self) -> State:
        if len(self.members) == 1:
            return PureState.create(self.modes, self.cutoff, self.members[0])
        return self.to_mixed()

    def pattern_probability(self, pattern, detectors) -> float:
        """Tr[ρ ⊗ Eᵢ] over the ensemble without densifying it."""
        d = self.cutoff.d
        diags = []
        for m in self.modes:
            req = pattern.requirements.get(m, measurement.unmeasured)
            if req.kind == "unmeasured":
                diags.append(np.ones(d))
            else:
                det = detectors.get(m, measurement.IDEAL_NR)
                el = measurement.povm_element(req, det, self.cutoff)
                diags.append(np.real(np.diag(el.matrix)))
        joint = diags[0]
        for vec in diags[1:]:
            joint = np.kron(vec, joint)
        return float(sum(np.sum(joint * np.abs(v) ** 2) for v in self.members))

    def reduced(self, mode: str) -> MixedState:
        d = self.cutoff.d
        M = len(self.modes)
        ax = M - 1 - self.modes.index(mode)
        rho = np.zeros((d, d), dtype=np.complex128)
        for v in self.members:
            t = np.moveaxis(v.reshape((d,) * M), ax, 0).reshape(d, -1)
            rho += t @ t.conj().T
        return MixedState.create((mode,), self.cutoff, rho)

    def top_level_population(self) -> dict[str, float]:
        d = self.cutoff.d
        M = len(self.modes)
        pops = np.zeros(self.dim)
        for v in self.members:
            pops += np.abs(v) ** 2
        total = float(np.sum(pops))
        t = pops.reshape((d,) * M)
        out = {}
        for m in self.modes:
            ax = M - 1 - self.modes.index(m)
            sl = [slice(None)] * M
            sl[ax] = d - 1
            out[m] = float(np.sum(t[tuple(sl)])) / total if total > 0 else 0.0
        return out

    def compact(self) -> None:
        """Re-express as an eigen-ensemble when the member count exceeds the rank."""
        if len(self.members) <= self.dim:
            return
        rho = self.to_mixed().matrix
        evals, evecs = np.linalg.eigh(rho)
        keep = evals > max(evals[-1], 0.0) * 1e-16
        self.members = [
            np.sqrt(evals[i]) * evecs[:, i] for i in range(len(evals)) if keep[i]
        ]


def detector_for(stmt: HeraldStmt) -> DetectorModel:
    return DetectorModel("on-off" if stmt.onoff else "number-resolving", stmt.eta)


def requirement_for(stmt: HeraldStmt) -> Requirement:
    if stmt.requirement == "exactly":
        return measurement.exactly(stmt.count)
    return Requirement(stmt.requirement)


@dataclass(frozen=True)
class HeraldRecord:
    mode: str
    requirement: str
    probability: float  # conditional on all earlier heralds


@dataclass
class ExecutionResult:
    plan: ExecutionPlan
    cutoff: int
    final_state: State | None
    final_modes: tuple[str, ...]
    heralds: list[HeraldRecord]
    joint_probability: float
    leak_max: float
    outputs: dict[int, object] = field(default_factory=dict)

    def output_value(self, kind: str, mode: str | None = None):
        for i, out in enumerate(self.plan.spec.outputs):
            if out.kind == kind and (mode is None or out.mode == mode):
                return self.outputs[i]
        raise KeyError(f"no {kind!r} output for mode {mode!r}")


def _input_state(stmt: InputStmt, cutoff: Cutoff) -> State:
    if stmt.kind == "coherent":
        return coherent_state(complex(stmt.params[0], stmt.params[1]), cutoff, stmt.mode)
    if stmt.kind == "thermal":
        return thermal_state(stmt.params[0], cutoff, stmt.mode)
    if stmt.kind == "fock":
        return fock_state(int(stmt.params[0]), cutoff, stmt.mode)
    return vacuum(cutoff, stmt.mode)


def _input_members(stmt: InputStmt, cutoff: Cutoff) -> list[np.ndarray]:
    state = _input_state(stmt, cutoff)
    if isinstance(state, PureState):
        return [state.amps.copy()]
    pops = np.real(np.diag(state.matrix))
    out = []
    for n, p in enumerate(pops):
        if p > 0.0:
            v = np.zeros(cutoff.d, dtype=np.complex128)
            v[n] = np.sqrt(p)
            out.append(v)
    return out


@lru_cache(maxsize=64)
def _unitary_matrix_cached(kind: str, value: float, modes: tuple[str, str], d: int) -> np.ndarray:
    cutoff = Cutoff(d)
    if kind == "bs":
        return beam_splitter_unitary(BeamSplitterParams(value, modes), cutoff).matrix
    return two_mode_squeezer_unitary(SqueezerParams(value, modes), cutoff).matrix


def _unitary_matrix(stmt: ElementStmt, cutoff: Cutoff) -> np.ndarray:
    return _unitary_matrix_cached(stmt.kind, stmt.value, stmt.modes, cutoff.d)


class _LeakMonitor:
    def __init__(self, budget: float, cutoff: int):
        self.budget = budget
        self.cutoff = cutoff
        self.max_seen = 0.0

    def check(self, stage: str, populations: dict[str, float]) -> None:
        for mode, leak in populations.items():
            self.max_seen = max(self.max_seen, leak)
            if leak > self.budget:
                raise LeakBudgetError(stage, mode, leak, self.budget, self.cutoff)


def _evaluate_output(
    stmt: OutputStmt,
    reduced: dict[str, MixedState],
    inputs: dict[str, InputStmt],
    cutoff: Cutoff,
    heralds: list[HeraldRecord],
    joint_probability: float,
):
    if stmt.kind == "probs":
        return {
            "herald_probabilities": [
                {"mode": h.mode, "requirement": h.requirement, "probability": h.probability}
                for h in heralds
            ],
            "joint_probability": joint_probability,
        }
    rho = reduced[stmt.mode]
    rho_n = MixedState.create(rho.modes, cutoff, rho.matrix / rho.trace_tag)
    if stmt.kind == "state":
        return rho_n
    if stmt.kind == "wigner":
        lo, hi, cnt = stmt.grid
        return wigner(rho_n, GridSpec.square(lo, hi, cnt))
    # fidelity vs. the mode's own input
    ref = _input_state(inputs[stmt.mode], cutoff)
    if isinstance(ref, PureState):
        return fidelity(ref, rho_n)
    return uhlmann_fidelity(ref, rho_n)


def execute_plan(plan: ExecutionPlan) -> ExecutionResult:
    """Run the staged ensemble executor; retries once at doubled cutoff on leak failure."""
    try:
        return _execute_staged(plan, plan.cutoff)
    except LeakBudgetError:
        if not plan.may_double:
            raise
        return _execute_staged(plan, 2 * plan.cutoff)


def _execute_staged(plan: ExecutionPlan, d: int) -> ExecutionResult:
    cutoff = Cutoff(d)
    inputs = {inp.mode: inp for inp in plan.spec.inputs}
    ens: Ensemble | None = None
    monitor = _LeakMonitor(plan.leak_budget, d)
    heralds: list[HeraldRecord] = []
    joint = 1.0
    reduced_cache: dict[str, MixedState] = {}
    outputs: dict[int, object] = {}
    out_index = 0

    for step in plan.steps:
        if step.op == "prepare":
            new = _input_members(step.payload, cutoff)
            if ens is None:
                ens = Ensemble((step.mode,), cutoff, new)
            else:
                # joint members: index = old + dim_old * new_level (new mode is slower)
                members = [np.kron(nv, ov) for ov in ens.members for nv in new]
                ens = Ensemble(ens.modes + (step.mode,), cutoff, members)
                ens.compact()
            monitor.check(f"prepare {step.mode}", ens.top_level_population())
        elif step.op == "unitary":
            mat = _unitary_matrix(step.payload, cutoff)
            stack = np.stack(ens.members, axis=-1)  # (dim, K): members ride along
            stack = apply_matrix(stack, ens.modes, cutoff, mat, step.payload.modes)
            ens.members = [stack[:, k] for k in range(stack.shape[1])]
            monitor.check(f"{step.payload.kind} {'/'.join(step.payload.modes)}",
                          ens.top_level_population())
        elif step.op == "condition":
            stmt = step.payload
            det = detector_for(stmt)
            req = requirement_for(stmt)
            element = measurement.povm_element(req, det, cutoff)
            diag = np.real(np.diag(element.matrix))
            before = ens.weight
            dd = cutoff.d
            M = len(ens.modes)
            ax = M - 1 - ens.modes.index(stmt.mode)
            new_members: list[np.ndarray] = []
            for v in ens.members:
                t = np.moveaxis(v.reshape((dd,) * M), ax, 0).reshape(dd, -1)
                for n in np.nonzero(diag > 0.0)[0]:
                    branch = np.sqrt(diag[n]) * t[n]
                    if np.any(branch):
                        new_members.append(branch.reshape(-1))
            remaining = tuple(m for m in ens.modes if m != stmt.mode)
            ens = Ensemble(remaining, cutoff, new_members)
            after = ens.weight
            prob = after / before if before > 0 else 0.0
            if after <= 0.0:
                raise ZeroProbabilityError(
                    f"herald {stmt.requirement} on mode {stmt.mode!r} has zero probability"
                )
            ens.compact()
            heralds.append(HeraldRecord(stmt.mode, stmt.requirement, prob))
            joint *= prob
            if ens.modes:
                monitor.check(f"herald {stmt.mode}", ens.top_level_population())
        elif step.op == "trace":
            pass  # folded into the condition step (heralds are destructive)
        elif step.op == "output":
            stmt = step.payload
            if stmt.mode is not None and stmt.mode not in reduced_cache:
                reduced_cache[stmt.mode] = ens.reduced(stmt.mode)
            outputs[out_index] = _evaluate_output(
                stmt, reduced_cache, inputs, cutoff, heralds, joint
            )
            out_index += 1

    final_state: State | Ensemble | None
    if ens is None or not ens.modes:
        final_state = None
    elif len(ens.members) == 1 or ens.dim <= _DENSIFY_LIMIT:
        final_state = ens.to_state()
    else:
        final_state = ens  # too large to densify; still supports pattern probabilities
    return ExecutionResult(
        plan=plan,
        cutoff=d,
        final_state=final_state,
        final_modes=ens.modes if ens is not None else (),
        heralds=heralds,
        joint_probability=joint,
        leak_max=monitor.max_seen,
        outputs=outputs,
    )


def execute_plan_brute(plan: ExecutionPlan) -> ExecutionResult:
    """Full-joint-space reference evaluator: no staging, traces only at the end."""
    d = plan.cutoff
    cutoff = Cutoff(d)
    inputs = {inp.mode: inp for inp in plan.spec.inputs}

    prepared = [s.payload for s in plan.steps if s.op == "prepare"]
    state: State | None = None
    for stmt in prepared:
        nxt = _input_state(stmt, cutoff)
        state = nxt if state is None else tensor(state, nxt)

    heralds: list[HeraldRecord] = []
    joint = 1.0
    measured: list[str] = []
    outputs: dict[int, object] = {}
    out_index = 0
    reduced_cache: dict[str, MixedState] = {}

    def weight(s: State) -> float:
        return s.norm_tag if isinstance(s, PureState) else s.trace_tag

    for step in plan.steps:
        if step.op == "unitary":
            mat = _unitary_matrix(step.payload, cutoff)
            if isinstance(state, PureState):
                amps = apply_matrix(state.amps, state.modes, cutoff, mat, step.payload.modes)
                state = PureState.create(state.modes, cutoff, amps)
            else:
                ket = apply_matrix(state.matrix, state.modes, cutoff, mat, step.payload.modes)
                bra = apply_matrix(ket.conj().T, state.modes, cutoff, mat, step.payload.modes)
                state = MixedState.create(state.modes, cutoff, bra.conj().T)
        elif step.op == "condition":
            stmt = step.payload
            det = detector_for(stmt)
            req = requirement_for(stmt)
            element = measurement.povm_element(req, det, cutoff)
            root = np.diag(np.sqrt(np.real(np.diag(element.matrix)))).astype(np.complex128)
            before = weight(state)
            if isinstance(state, PureState):
                amps = apply_matrix(state.amps, state.modes, cutoff, root, (stmt.mode,))
                state = PureState.create(state.modes, cutoff, amps)
            else:
                ket = apply_matrix(state.matrix, state.modes, cutoff, root, (stmt.mode,))
                bra = apply_matrix(ket.conj().T, state.modes, cutoff, root, (stmt.mode,))
                state = MixedState.create(state.modes, cutoff, bra.conj().T)
            after = weight(state)
            if after <= 0.0:
                raise ZeroProbabilityError(
                    f"herald {stmt.requirement} on mode {stmt.mode!r} has zero probability"
                )
            prob = after / before
            heralds.append(HeraldRecord(stmt.mode, stmt.requirement, prob))
            joint *= prob
            measured.append(stmt.mode)

    keep = tuple(m for m in state.modes if m not in measured)
    if not keep:
        final = None
    elif measured:
        final = partial_trace(state, keep)
    else:
        final = state

    for step in plan.steps:
        if step.op != "output":
            continue
        stmt = step.payload
        if stmt.mode is not None and stmt.mode not in reduced_cache:
            reduced_cache[stmt.mode] = partial_trace(final, (stmt.mode,))
        outputs[out_index] = _evaluate_output(
            stmt, reduced_cache, inputs, cutoff, heralds, joint
        )
        out_index += 1

    return ExecutionResult(
        plan=plan,
        cutoff=d,
        final_state=final,
        final_modes=keep,
        heralds=heralds,
        joint_probability=joint,
        leak_max=float("nan"),
        outputs=outputs,
    )
