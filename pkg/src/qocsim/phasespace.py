"""Wigner-function evaluation, fidelity, and nonclassicality diagnostics.

Convention: W(β) = (2/π)·Tr[ρ D(β) Π D(−β)] with Π the photon-number parity
and D the displacement operator, so W(0) = 2/π for vacuum and ∫W d²β = 1.

D(β) is the matrix exponential of (β a† − β* a).  Because a displaced state
reaches photon numbers near (√n + |β|)², the exponential is evaluated on an
internally enlarged space (the state is zero-padded, which is exact); the
resulting accuracy is certified against the closed-form Gaussian oracles
rather than an a-priori bound.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np


from .core import (
    Cutoff,
    DimensionMismatchError,
    MixedState,
    PureState,
    State,
    annihilation_matrix,
    to_mixed,
)

__all__ = [
    "GridSpec",
    "WignerGrid",
    "wigner",
    "wigner_point",
    "gaussian_wigner_oracle",
    "fidelity",
    "uhlmann_fidelity",
    "min_wigner",
    "parity_expectation",
    "grid_integral",
    "save_grid_csv",
    "load_grid_csv",
    "save_grid_json",
    "load_grid_json",
]

DEFAULT_GRID: "GridSpec"


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid in the β plane: (min, max, count) per axis."""

    re_range: tuple[float, float, int]
    im_range: tuple[float, float, int]

    def __post_init__(self) -> None:
        for lo, hi, n in (self.re_range, self.im_range):
            if n < 2:
                raise ValueError("grid needs at least 2 points per axis")
            if not hi > lo:
                raise ValueError("grid range must be increasing")

    @classmethod
    def square(cls, lo: float, hi: float, count: int) -> "GridSpec":
        return cls((lo, hi, count), (lo, hi, count))

    def re_axis(self) -> np.ndarray:
        lo, hi, n = self.re_range
        return np.linspace(lo, hi, n)

    def im_axis(self) -> np.ndarray:
        lo, hi, n = self.im_range
        return np.linspace(lo, hi, n)

    def max_radius(self) -> float:
        corners = [
            abs(complex(re, im))
            for re in (self.re_range[0], self.re_range[1])
            for im in (self.im_range[0], self.im_range[1])
        ]
        return max(corners)


DEFAULT_GRID = GridSpec.square(-3.0, 3.0, 81)


@dataclass(frozen=True)
class WignerGrid:
    """Sampled W(β) on a rectangular grid; values[i, j] = W(re[j] + i·im[i])."""

    re_axis: np.ndarray
    im_axis: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.im_axis.size, self.re_axis.size):
            raise DimensionMismatchError(
                f"values shape {self.values.shape} != (|im|, |re|) = "
                f"{(self.im_axis.size, self.re_axis.size)}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Wigner values must be finite")

    def cell_area(self) -> float:
        return float((self.re_axis[1] - self.re_axis[0]) * (self.im_axis[1] - self.im_axis[0]))


def _single_mode_rho(state: State) -> np.ndarray:
    if len(state.modes) != 1:
        raise DimensionMismatchError("Wigner evaluation requires a single-mode state")
    return to_mixed(state).matrix


def _significant_top_level(diag: np.ndarray, eps: float = 1e-12) -> int:
    total = float(np.sum(diag))
    if total <= 0:
        return diag.size - 1
    cums = np.cumsum(diag) / total
    idx = int(np.searchsorted(cums, 1.0 - eps))
    return min(idx + 1, diag.size - 1)


def _evaluation_dim(d_state: int, n_top: int, radius: float) -> int:
    s = radius + np.sqrt(n_top + 1.0)
    return max(d_state, int(np.ceil(s * s + 2.0 * s + 6.0)))


class _DisplacedParity:
    """Batched displaced-parity evaluator on an enlarged space.

    D(β) = R(φ)·expm(r(a†−a))·R(φ)† for β = r·e^{iφ} with R(φ) = e^{iφn̂};
    the radial factor comes from one eigendecomposition of i(a†−a).
    """

    def __init__(self, d_state: int, d_eval: int):
        self.d_state = d_state
        self.d_eval = d_eval
        a = annihilation_matrix(Cutoff(d_eval)).matrix
        herm = 1j * (a.conj().T - a)  # a† − a = −i·herm
        self.evals, self.evecs = np.linalg.eigh(herm)
        self.parity = (-1.0) ** np.arange(d_eval)
        self.vh_sub = self.evecs.conj().T[:, :d_state]
        self.levels = np.arange(d_eval)

    def rows(self, rho: np.ndarray, betas: np.ndarray) -> np.ndarray:
        """W(β) for a batch of β values; rho is d_state × d_state."""
        r = np.abs(betas)
        phi = np.where(r > 0, np.angle(betas), 0.0)
        # D(−β) = R expm(−r(a†−a)) R† = R V e^{+i r w} V† R†
        radial = np.exp(1j * np.multiply.outer(r, self.evals))  # (K, d_eval)
        tmp = radial[:, :, None] * self.vh_sub[None, :, :]  # (K, d_eval, d_state)
        tmp = tmp * np.exp(-1j * np.multiply.outer(phi, self.levels[: self.d_state]))[:, None, :]
        dsub = np.matmul(self.evecs[None, :, :], tmp)  # (K, d_eval, d_state)
        dsub = dsub * np.exp(1j * np.multiply.outer(phi, self.levels))[:, :, None]
        q = np.einsum("knd,de,kne->kn", dsub, rho, dsub.conj()).real
        return (2.0 / np.pi) * (q @ self.parity)


def wigner_point(state: State, beta: complex, d_eval: int | None = None) -> float:
    """W at a single phase-space point."""
    rho = _single_mode_rho(state)
    d = rho.shape[0]
    if d_eval is None:
        n_top = _significant_top_level(np.real(np.diag(rho)))
        d_eval = _evaluation_dim(d, n_top, abs(beta))
    ev = _DisplacedParity(d, d_eval)
    return float(ev.rows(rho, np.array([beta]))[0])


def wigner(state: State, grid: GridSpec = DEFAULT_GRID, chunk: int = 256) -> WignerGrid:
    """Sample W(β) of a single-mode state on a rectangular grid.

    Grid points are independent; they are evaluated in deterministic chunks and
    assembled row-major, so results are bit-independent of chunking.
    """
    rho = _single_mode_rho(state)
    weight = float(np.real(np.trace(rho)))
    if weight <= 0:
        raise ValueError("cannot evaluate the Wigner function of a zero-weight state")
    rho = rho / weight
    d = rho.shape[0]
    n_top = _significant_top_level(np.real(np.diag(rho)))
    d_eval = _evaluation_dim(d, n_top, grid.max_radius())
    ev = _DisplacedParity(d, d_eval)
    re = grid.re_axis()
    im = grid.im_axis()
    betas = (re[None, :] + 1j * im[:, None]).reshape(-1)
    values = np.empty(betas.size, dtype=np.float64)
    for start in range(0, betas.size, chunk):
        sl = slice(start, min(start + chunk, betas.size))
        values[sl] = ev.rows(rho, betas[sl])
    return WignerGrid(re, im, values.reshape(im.size, re.size))


def gaussian_wigner_oracle(kind: str, params, beta: complex) -> float:
    """Closed-form W(β) for Gaussian reference states (independent test oracle).

    kind='coherent': params = α;  W = (2/π)·exp(−2|β−α|²).
    kind='thermal':  params = n̄;  W = 2/(π(2n̄+1))·exp(−2|β|²/(2n̄+1)).
    """
    if kind == "coherent":
        alpha = complex(params)
        return float(2.0 / np.pi * np.exp(-2.0 * abs(beta - alpha) ** 2))
    if kind == "thermal":
        nbar = float(params)
        width = 2.0 * nbar + 1.0
        return float(2.0 / (np.pi * width) * np.exp(-2.0 * abs(beta) ** 2 / width))
    raise ValueError(f"unknown Gaussian kind {kind!r}")


def parity_expectation(state: State) -> float:
    """⟨Π⟩ from photon-number populations of the (normalized) state."""
    rho = _single_mode_rho(state)
    weight = float(np.real(np.trace(rho)))
    pops = np.real(np.diag(rho)) / weight
    return float(np.sum((-1.0) ** np.arange(pops.size) * pops))


def fidelity(reference: PureState, state: State) -> float:
    """F = ⟨φ|ρ|φ⟩ against a pure reference (states normalized first)."""
    if reference.modes != state.modes or reference.cutoff != state.cutoff:
        raise DimensionMismatchError("fidelity requires identical modes and cutoff")
    ref = reference.amps / np.sqrt(reference.norm_tag)
    if isinstance(state, PureState):
        val = abs(np.vdot(ref, state.amps)) ** 2 / state.norm_tag
    else:
        val = float(np.real(ref.conj() @ state.matrix @ ref)) / state.trace_tag
    # clamp only boundary-grazing numerical noise
    if -1e-9 <= val < 0.0:
        return 0.0
    if 1.0 < val <= 1.0 + 1e-9:
        return 1.0
    return float(val)


def uhlmann_fidelity(rho: MixedState, sigma: MixedState) -> float:
    """F(ρ,σ) = (Tr√(√ρ σ √ρ))² for two (possibly mixed) normalized states."""
    if rho.modes != sigma.modes or rho.cutoff != sigma.cutoff:
        raise DimensionMismatchError("fidelity requires identical modes and cutoff")
    r = rho.matrix / rho.trace_tag
    s = sigma.matrix / sigma.trace_tag
    evals, evecs = np.linalg.eigh(r)
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.conj().T
    inner_evals = np.linalg.eigvalsh(root @ s @ root)
    # sqrt amplifies eigenvalue noise near zero; drop values at the noise floor
    floor = max(float(inner_evals[-1]), 0.0) * 1e-14
    inner_evals = np.where(inner_evals > floor, inner_evals, 0.0)
    val = float(np.sum(np.sqrt(inner_evals)) ** 2)
    return min(val, 1.0) if val <= 1.0 + 1e-9 else val


def min_wigner(grid: WignerGrid) -> tuple[complex, float]:
    """Grid minimum and its location."""
    idx = int(np.argmin(grid.values))
    i, j = np.unravel_index(idx, grid.values.shape)
    beta = complex(grid.re_axis[j], grid.im_axis[i])
    return beta, float(grid.values[i, j])


def grid_integral(grid: WignerGrid, radius: float | None = None) -> float:
    """Riemann sum of W over the grid, optionally restricted to |β| ≤ radius."""
    vals = grid.values
    if radius is not None:
        re = grid.re_axis[None, :]
        im = grid.im_axis[:, None]
        mask = re**2 + im**2 <= radius**2
        vals = np.where(mask, vals, 0.0)
    return float(np.sum(vals) * grid.cell_area())


# ---------------------------------------------------------------------------
# serialization: CSV rows (re, im, W) and JSON {re_axis, im_axis, values}


def save_grid_csv(grid: WignerGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im", "W"])
        for i, im in enumerate(grid.im_axis):
            for j, re in enumerate(grid.re_axis):
                writer.writerow([repr(float(re)), repr(float(im)), repr(float(grid.values[i, j]))])


def load_grid_csv(path) -> WignerGrid:
    res, ims, vals = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["re", "im", "W"]:
            raise ValueError(f"unexpected CSV header {header}")
        for re_s, im_s, w_s in reader:
            res.append(float(re_s))
            ims.append(float(im_s))
            vals.append(float(w_s))
    re_axis = np.array(sorted(set(res)))
    im_axis = np.array(sorted(set(ims)))
    values = np.array(vals).reshape(im_axis.size, re_axis.size)
    return WignerGrid(re_axis, im_axis, values)


def save_grid_json(grid: WignerGrid, path) -> None:
    doc = {
        "re_axis": [float(x) for x in grid.re_axis],
        "im_axis": [float(x) for x in grid.im_axis],
        "values": [[float(v) for v in row] for row in grid.values],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_grid_json(path) -> WignerGrid:
    with open(path) as fh:
        doc = json.load(fh)
    return WignerGrid(
        np.array(doc["re_axis"], dtype=float),
        np.array(doc["im_axis"], dtype=float),
        np.array(doc["values"], dtype=float),
    )
