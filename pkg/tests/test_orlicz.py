import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orliczwave import (CellField, NFunctionSpec, UnsupportedSpecError,
                        cell_field_to_csv, holder_check, luxemburg_norm,
                        modular, norm_modular_relations)

from oracles import luxemburg_brentq

A_ANISO = np.array([[2.0, -1.0], [-1.0, 2.0]])


def constant_field(vector, measure=1.0):
    vector = np.atleast_1d(np.asarray(vector, dtype=float))
    return CellField(vector[None, :], np.array([measure]))


def random_field(rng, dim, n_cells=12, scale=3.0):
    measures = rng.random(n_cells) + 0.05
    measures /= measures.sum()
    return CellField(scale * rng.standard_normal((n_cells, dim)), measures)


# -- CellField contracts ---------------------------------------------------------

def test_cell_field_validation():
    with pytest.raises(ValueError):
        CellField(np.zeros((3, 1)), np.array([0.5, 0.5]))       # length mismatch
    with pytest.raises(ValueError):
        CellField(np.zeros((2, 1)), np.array([0.5, -0.5]))      # negative measure
    field = CellField(np.ones((2, 2)), np.array([0.25, 0.75]))
    assert field.n_cells == 2 and field.dim == 2
    assert field.total_measure == pytest.approx(1.0)


def test_cell_field_csv(tmp_path):
    field = CellField(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([0.5, 0.5]))
    path = tmp_path / "field.csv"
    cell_field_to_csv(field, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "cell,measure,v0,v1"
    assert lines[1].startswith("0,0.5,1,2")


# -- modular ---------------------------------------------------------------------

def test_modular_examples():
    p2 = NFunctionSpec.power(2.0, dim=2)
    assert modular(p2, constant_field([1.0, 0.0])) == pytest.approx(0.5)
    assert modular(p2, constant_field([0.0, 0.0])) == 0.0
    two_cells = CellField(np.array([[2.0, 0.0], [0.0, 0.0]]),
                          np.array([0.5, 0.5]))
    assert modular(p2, two_cells) == pytest.approx(1.0)


def test_modular_dim_mismatch():
    with pytest.raises(ValueError):
        modular(NFunctionSpec.power(2.0, dim=1), constant_field([1.0, 0.0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_modular_midpoint_convex_along_segments(seed):
    rng = np.random.default_rng(seed)
    spec = NFunctionSpec.power(float(rng.uniform(1.5, 4.0)), dim=2)
    a = random_field(rng, 2)
    b = CellField(3.0 * rng.standard_normal(a.values.shape), a.measures)
    mid = CellField(0.5 * (a.values + b.values), a.measures)
    assert modular(spec, mid) <= 0.5 * (modular(spec, a) + modular(spec, b)) + 1e-12


# -- Luxemburg norm --------------------------------------------------------------

def test_luxemburg_power2_constant():
    # modular(c / lam) = 9 / (2 lam^2) = 1  =>  lam = 3 / sqrt(2)
    spec = NFunctionSpec.power(2.0, dim=2)
    norm = luxemburg_norm(spec, constant_field([3.0, 0.0]))
    assert norm == pytest.approx(3.0 / math.sqrt(2.0), abs=1e-9)


def test_luxemburg_zero_field():
    spec = NFunctionSpec.power(2.0, dim=1)
    assert luxemburg_norm(spec, constant_field([0.0])) == 0.0


def test_luxemburg_exp_vs_root_oracle():
    spec = NFunctionSpec.exponential(dim=2)
    field = constant_field([1.0, 0.0])
    norm = luxemburg_norm(spec, field, tol=1e-12)
    oracle = luxemburg_brentq(spec, field.values, field.measures)
    assert norm == pytest.approx(oracle, abs=1e-10)
    s = 1.0 / norm
    assert math.exp(s) - s - 1.0 == pytest.approx(1.0, abs=1e-9)


def test_luxemburg_normalization_random():
    rng = np.random.default_rng(2)
    for spec in (NFunctionSpec.power(3.0, dim=2), NFunctionSpec.exponential(dim=1),
                 NFunctionSpec.quad_form(A_ANISO)):
        for _ in range(10):
            field = random_field(rng, spec.dim)
            lam = luxemburg_norm(spec, field)
            assert modular(spec, field.scaled(1.0 / lam)) == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1),
       st.floats(-8.0, 8.0).filter(lambda t: abs(t) > 1e-3))
def test_luxemburg_absolute_homogeneity(seed, t):
    rng = np.random.default_rng(seed)
    spec = NFunctionSpec.power(float(rng.uniform(1.5, 4.0)), dim=1)
    field = random_field(rng, 1)
    base = luxemburg_norm(spec, field)
    assert luxemburg_norm(spec, field.scaled(t)) == pytest.approx(
        abs(t) * base, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_luxemburg_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    spec = NFunctionSpec.power(float(rng.uniform(1.5, 4.0)), dim=2)
    a = random_field(rng, 2)
    b = CellField(3.0 * rng.standard_normal(a.values.shape), a.measures)
    both = CellField(a.values + b.values, a.measures)
    assert luxemburg_norm(spec, both) <= (
        luxemburg_norm(spec, a) + luxemburg_norm(spec, b) + 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([1.5, 2.0, 3.0, 4.0]))
def test_luxemburg_matches_scaled_lp_norm(seed, p):
    # For phi = |.|^p / p the norm is the L^p norm times p^(-1/p).
    rng = np.random.default_rng(seed)
    spec = NFunctionSpec.power(p, dim=2)
    field = random_field(rng, 2)
    lp = (field.measures @ np.linalg.norm(field.values, axis=-1) ** p) ** (1.0 / p)
    assert luxemburg_norm(spec, field) == pytest.approx(
        lp * p ** (-1.0 / p), rel=1e-8)


# -- Holder ----------------------------------------------------------------------

def test_holder_zero_fields():
    spec = NFunctionSpec.power(2.0, dim=1)
    result = holder_check(spec, constant_field([0.0]), constant_field([0.0]))
    assert result.lhs == 0.0 and result.rhs == 0.0 and result.ok


def test_holder_power2_equality_case():
    # |<xi, xi>| = 1 and 2 |xi| |xi|_* = 2 (1/sqrt2)(1/sqrt2) = 1: sharp.
    spec = NFunctionSpec.power(2.0, dim=2)
    field = constant_field([1.0, 0.0])
    result = holder_check(spec, field, field)
    assert result.lhs == pytest.approx(1.0, abs=1e-10)
    assert result.rhs == pytest.approx(1.0, abs=1e-8)
    assert result.ok


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_holder_random_trials(p):
    spec = NFunctionSpec.power(p, dim=2)
    rng = np.random.default_rng(17)
    for _ in range(100):
        xi = random_field(rng, 2)
        eta = CellField(3.0 * rng.standard_normal(xi.values.shape), xi.measures)
        assert holder_check(spec, xi, eta).ok


def test_holder_quadform():
    spec = NFunctionSpec.quad_form(A_ANISO)
    rng = np.random.default_rng(23)
    for _ in range(25):
        xi = random_field(rng, 2)
        eta = CellField(3.0 * rng.standard_normal(xi.values.shape), xi.measures)
        assert holder_check(spec, xi, eta).ok


def test_holder_needs_closed_conjugate():
    spec = NFunctionSpec.exponential(dim=1)
    with pytest.raises(UnsupportedSpecError):
        holder_check(spec, constant_field([1.0]), constant_field([1.0]))


# -- norm-modular relations -------------------------------------------------------

def test_norm_modular_zero_field():
    spec = NFunctionSpec.power(3.0, dim=1)
    assert norm_modular_relations(spec, constant_field([0.0])).ok


@pytest.mark.parametrize("target", [0.5, 1.0, 2.0])
def test_norm_modular_at_scaled_norms(target):
    spec = NFunctionSpec.power(3.0, dim=2)
    rng = np.random.default_rng(int(target * 10))
    field = random_field(rng, 2)
    field = field.scaled(target / luxemburg_norm(spec, field))
    result = norm_modular_relations(spec, field)
    assert result.norm == pytest.approx(target, rel=1e-7)
    assert result.ok


def test_norm_modular_exp_constant():
    spec = NFunctionSpec.exponential(dim=2)
    assert norm_modular_relations(spec, constant_field([1.0, 0.0])).ok
