import math

import numpy as np
import pytest

from qocsim.core import Cutoff, MixedState, PureState, to_mixed
from qocsim.elements import coherent_state, fock_state, thermal_state, vacuum
from qocsim.phasespace import (
    DEFAULT_GRID,
    GridSpec,
    WignerGrid,
    fidelity,
    gaussian_wigner_oracle,
    grid_integral,
    load_grid_csv,
    load_grid_json,
    min_wigner,
    parity_expectation,
    save_grid_csv,
    save_grid_json,
    uhlmann_fidelity,
    wigner,
    wigner_point,
)

TWO_OVER_PI = 2.0 / math.pi


def test_vacuum_wigner_at_origin():
    state = vacuum(Cutoff(12))
    assert wigner_point(state, 0.0) == pytest.approx(TWO_OVER_PI, abs=1e-9)


def test_coherent_wigner_peak():
    state = coherent_state(1.0, Cutoff(25))
    assert wigner_point(state, 1.0) == pytest.approx(TWO_OVER_PI, abs=1e-9)


def test_thermal_wigner_at_origin():
    state = thermal_state(1.0, Cutoff(30))
    assert wigner_point(state, 0.0) == pytest.approx(TWO_OVER_PI / 3.0, abs=1e-9)


def test_fock_one_wigner_at_origin():
    state = fock_state(1, Cutoff(12))
    assert wigner_point(state, 0.0) == pytest.approx(-TWO_OVER_PI, abs=1e-9)


@pytest.mark.parametrize(
    "kind,params,expected",
    [
        ("coherent", 1.0, TWO_OVER_PI * math.exp(-2.0 * 4.0)),
        ("thermal", 1.0, TWO_OVER_PI / 3.0),
    ],
)
def test_gaussian_oracle_values(kind, params, expected):
    beta = -1.0 if kind == "coherent" else 0.0
    assert gaussian_wigner_oracle(kind, params, beta) == pytest.approx(expected, rel=1e-12)


def test_wigner_matches_gaussian_oracle_on_disk():
    d = 30
    cut = Cutoff(d)
    pts = [
        complex(x, y)
        for x in np.linspace(-3, 3, 9)
        for y in np.linspace(-3, 3, 9)
        if abs(complex(x, y)) <= 3.0
    ]
    coh = coherent_state(1.0, cut)
    ther = thermal_state(1.0, cut)
    for beta in pts:
        assert wigner_point(coh, beta) == pytest.approx(
            gaussian_wigner_oracle("coherent", 1.0, beta), abs=1e-6
        )
        assert wigner_point(ther, beta) == pytest.approx(
            gaussian_wigner_oracle("thermal", 1.0, beta), abs=1e-6
        )


def test_parity_identity_at_origin():
    d = 20
    state = coherent_state(0.9, Cutoff(d))
    w0 = wigner_point(state, 0.0)
    assert w0 == pytest.approx(TWO_OVER_PI * parity_expectation(state), abs=1e-10)


def test_grid_values_and_min_wigner():
    state = fock_state(1, Cutoff(10))
    grid = wigner(state, GridSpec.square(-2.0, 2.0, 41))
    beta_min, wmin = min_wigner(grid)
    assert wmin == pytest.approx(-TWO_OVER_PI, abs=1e-6)
    assert abs(beta_min) < 1e-12
    vac_grid = wigner(vacuum(Cutoff(10)), GridSpec.square(-2.0, 2.0, 41))
    assert min_wigner(vac_grid)[1] > 0.0


def test_grid_integral_is_unit():
    # Riemann sum over a disk of radius |alpha| + 4
    state = coherent_state(1.0, Cutoff(20))
    radius = 5.0
    grid = wigner(state, GridSpec.square(-radius, radius, 81))
    assert grid_integral(grid, radius=radius) == pytest.approx(1.0, abs=1e-3)


def test_wigner_requires_single_mode():
    from qocsim.core import tensor

    joint = tensor(vacuum(Cutoff(4), "a"), vacuum(Cutoff(4), "b"))
    with pytest.raises(Exception):
        wigner_point(joint, 0.0)


def test_fidelity_identity_and_overlap():
    c = Cutoff(16)
    assert fidelity(vacuum(c), vacuum(c)) == pytest.approx(1.0, abs=1e-12)
    f = fidelity(coherent_state(1.0, c), to_mixed(vacuum(c)))
    assert f == pytest.approx(math.exp(-1.0), abs=1e-8)


def test_fidelity_attenuated_coherent_formula():
    c = Cutoff(24)
    t = math.sqrt(0.99)
    alpha = 1.0
    f = fidelity(coherent_state(alpha, c), coherent_state(t * alpha, c))
    assert f == pytest.approx(math.exp(-((1 - t) ** 2) * alpha**2), abs=1e-10)


def test_fidelity_linear_under_mixing():
    c = Cutoff(10)
    ref = coherent_state(0.5, c)
    rho1 = to_mixed(fock_state(0, c))
    rho2 = to_mixed(fock_state(1, c))
    p = 0.3
    mix = MixedState.create(("a",), c, p * rho1.matrix + (1 - p) * rho2.matrix)
    lhs = fidelity(ref, mix)
    rhs = p * fidelity(ref, rho1) + (1 - p) * fidelity(ref, rho2)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_fidelity_boundary_clamp():
    c = Cutoff(8)
    state = vacuum(c)
    assert 0.0 <= fidelity(state, state) <= 1.0


def test_uhlmann_matches_pure_overlap():
    c = Cutoff(12)
    a = coherent_state(0.6, c)
    b = coherent_state(0.2, c)
    f_pure = abs(np.vdot(a.amps, b.amps)) ** 2
    f_uhl = uhlmann_fidelity(to_mixed(a), to_mixed(b))
    assert f_uhl == pytest.approx(f_pure, abs=1e-9)
    assert uhlmann_fidelity(to_mixed(a), to_mixed(a)) == pytest.approx(1.0, abs=1e-9)


def test_grid_serialization_round_trip(tmp_path):
    state = coherent_state(0.8, Cutoff(14))
    grid = wigner(state, GridSpec.square(-1.5, 1.5, 11))
    csv_path = tmp_path / "w.csv"
    json_path = tmp_path / "w.json"
    save_grid_csv(grid, csv_path)
    save_grid_json(grid, json_path)
    g1 = load_grid_csv(csv_path)
    g2 = load_grid_json(json_path)
    for g in (g1, g2):
        assert np.array_equal(g.values, grid.values)
        assert np.array_equal(g.re_axis, grid.re_axis)
        assert np.array_equal(g.im_axis, grid.im_axis)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec.square(1.0, -1.0, 11)
    with pytest.raises(ValueError):
        GridSpec.square(-1.0, 1.0, 1)


def test_default_grid_shape():
    assert DEFAULT_GRID.re_range == (-3.0, 3.0, 81)
    assert DEFAULT_GRID.im_range == (-3.0, 3.0, 81)
