import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transference.ap_count import ap_gap
from transference.dense_model import extract_dense_model, project_to_mean, verify_model
from transference.discrepancy import discrepancy_search, discrepancy_value, transport_witness
from transference.errors import NoConvergence, NotDominated, PreconditionError
from transference.residue import Group, all_forms, linear_form, make_group
from transference.weights import WeightFn, planted_subset, random_sparse_majorant, uniform


@pytest.fixture(scope="module")
def sparse_fixture():
    # sparse enough that the starting model is more than eps away, so boosting has to run
    g = make_group(301, 3)
    nu, S = random_sparse_majorant(g, 0.1, 3)
    f = planted_subset(nu, S, 0.5, 3)
    result = extract_dense_model(f, nu, linear_form(g, 1), 0.05, search_restarts=2, max_iters=300, seed=3)
    return g, nu, f, result


def assert_model_contract(f, result):
    v = result.f_model.values
    assert v.min() >= 0 and v.max() <= 1
    assert abs(v.mean() - f.values.mean()) <= 1e-12


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-3, 5), min_size=1, max_size=40), st.floats(0, 1))
def test_projection_hits_mean_and_range(lam, target):
    out = project_to_mean(np.array(lam), target)
    assert out.min() >= 0 and out.max() <= 1
    assert abs(out.mean() - target) <= 1e-12


def test_projection_keeps_feasible_input():
    lam = np.array([0.1, 0.5, 0.9])
    assert np.array_equal(project_to_mean(lam, lam.mean()), lam)


def test_dense_input_is_returned_unchanged():
    g = Group(31, 3)
    f = WeightFn(g, np.random.default_rng(0).random(31))
    res = extract_dense_model(f, uniform(g), linear_form(g, 1), 0.01, 2, 10, 0)
    assert res.iterations == 0 and res.converged
    assert np.array_equal(res.f_model.values, f.values)
    assert res.final_gap == 0.0


def test_zero_function():
    g = Group(31, 3)
    nu, _ = random_sparse_majorant(g, 0.3, 1)
    res = extract_dense_model(WeightFn(g, np.zeros(31)), nu, linear_form(g, 1), 0.05, 2, 10, 0)
    assert not res.f_model.values.any()


def test_rejects_undominated_and_heavy_inputs():
    g = Group(11, 3)
    nu = uniform(g)
    bad = WeightFn(g, np.full(11, 0.5))
    with pytest.raises(NotDominated):
        extract_dense_model(bad, WeightFn(g, np.full(11, 0.4)), linear_form(g, 1), 0.1)
    with pytest.raises(PreconditionError):
        extract_dense_model(WeightFn(g, np.full(11, 2.0)), WeightFn(g, np.full(11, 2.0)),
                            linear_form(g, 1), 0.1)
    with pytest.raises(PreconditionError):
        extract_dense_model(bad, nu, linear_form(g, 1), 0.0)


def test_boosting_converges(sparse_fixture):
    g, nu, f, res = sparse_fixture
    assert res.converged
    assert res.iterations > 0
    assert res.final_gap <= 0.05
    assert_model_contract(f, res)
    assert len(res.distinguisher_log) == res.iterations + 1
    assert all(abs(e["step"]) == 0.025 for e in res.distinguisher_log[:-1])
    assert res.progress_ok


def test_boosting_passes_fresh_audit(sparse_fixture):
    g, nu, f, res = sparse_fixture
    audit = discrepancy_search(f, res.f_model, linear_form(g, 1), restarts=4, seed=999)
    assert audit.value <= 2 * 0.05
    reports = verify_model(f, res.f_model, all_forms(g), 0.05, restarts=3, seed=1234)
    assert [r.j for r in reports] == [1, 2, 3]
    assert max(r.value for r in reports) <= 2 * 0.05
    assert np.isfinite(ap_gap(f, res.f_model, 3))


def test_no_convergence_payload_keeps_contract(sparse_fixture):
    g, nu, f, _ = sparse_fixture
    with pytest.raises(NoConvergence) as info:
        extract_dense_model(f, nu, linear_form(g, 1), 0.005, search_restarts=1, max_iters=3, seed=0)
    res = info.value.result
    assert not res.converged and res.iterations == 3
    assert_model_contract(f, res)
    assert res.final_gap == min(e["value"] for e in res.distinguisher_log)


def test_extraction_is_deterministic(sparse_fixture):
    g, nu, f, res = sparse_fixture
    again = extract_dense_model(f, nu, linear_form(g, 1), 0.05, search_restarts=2, max_iters=300, seed=3)
    assert np.array_equal(again.f_model.values, res.f_model.values)
    assert again.distinguisher_log == res.distinguisher_log


def test_verify_equal_inputs():
    g = make_group(31, 4)
    f = np.random.default_rng(1).random(31)
    assert all(r.value == 0 for r in verify_model(f, f, all_forms(g), 0.1, restarts=1, seed=0))


def test_transported_witness_gives_same_value(sparse_fixture):
    g, nu, f, res = sparse_fixture
    u = res.last_witness
    base = discrepancy_value(f, res.f_model, linear_form(g, 1), u)
    moved = transport_witness(u, 1, 2, g)
    assert discrepancy_value(f, res.f_model, linear_form(g, 2), moved) == pytest.approx(base, abs=1e-12)
