"""qocsim: truncated Fock-space simulation of heralded add/subtract interferometry.

The package is organized as:

* :mod:`qocsim.core` — states, operators, conditioning primitives
* :mod:`qocsim.elements` — input states and optical-element unitaries
* :mod:`qocsim.measurement` — detector POVMs and heralded conditioning
* :mod:`qocsim.phasespace` — Wigner functions and fidelities
* :mod:`qocsim.dsl` — the `.qoc` circuit language, parser, and compiler
* :mod:`qocsim.engine` — staged and brute-force plan executors
* :mod:`qocsim.scheme` — the four-mode interferometer and its diagnostics
* :mod:`qocsim.cli` — the ``qocsim`` command-line tool
"""

from importlib import resources

from .core import (
    Cutoff,
    MixedState,
    OperatorMatrix,
    PureState,
    annihilation_matrix,
    apply,
    compose,
    creation_matrix,
    embed,
    expectation,
    inner_product,
    load_state,
    normalize,
    partial_trace,
    save_state,
    tensor,
    truncated_commutator,
)
from .dsl import CircuitSpec, CutoffPolicy, compile_circuit, parse, print_circuit
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
from .engine import LeakBudgetError, execute_plan, execute_plan_brute
from .measurement import (
    DetectorModel,
    HeraldPattern,
    ZeroProbabilityError,
    condition,
    pattern_probability,
    povm_elements,
)
from .phasespace import (
    GridSpec,
    WignerGrid,
    fidelity,
    gaussian_wigner_oracle,
    min_wigner,
    wigner,
)
from .scheme import (
    SchemeParams,
    SchemeResult,
    analytic_branch_oracle,
    build_fig1_circuit,
    commutation_report,
    efficiency_degradation,
    run_interferometer,
)

__version__ = "0.1.0"


def builtin_circuit_text(name: str = "fig1") -> str:
    """Canonical text of a circuit shipped with the package."""
    return resources.files("qocsim").joinpath(f"circuits/{name}.qoc").read_text()
