import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import box_brute_r2, convolution_brute, cut_norm_brute_r2, discrepancy_brute
from transference import discrepancy as D
from transference.residue import Group, all_forms, linear_form, make_group
from transference.weights import WeightFn, interval_adversary, random_sparse_majorant


def family(r, N, seed, binary=False):
    return D.random_family(r, N, seed, binary)


def test_test_family_validation():
    with pytest.raises(ValueError):
        D.TestFamily((np.full(5, 1.5), np.zeros(5)))
    with pytest.raises(ValueError):
        D.TestFamily((np.zeros(5), np.zeros(4)))
    with pytest.raises(ValueError):
        D.TestFamily((np.zeros(5),))


def test_convolution_of_ones():
    for N, k in [(5, 3), (7, 4)]:
        u = D.TestFamily(tuple(np.ones((N,) * (k - 2)) for _ in range(k - 1)))
        for form in all_forms(Group(N, k)):
            assert np.allclose(D.convolution_table(u, form), 1.0)
            assert D.generalized_convolution(u, form, 3) == pytest.approx(1.0)


def test_convolution_point_masses():
    form = linear_form(Group(5, 3), 1)        # y1 + 2 y2
    e0 = np.zeros(5)
    e0[0] = 1
    u = D.TestFamily((e0, e0))
    table = D.convolution_table(u, form)
    assert table[0] == pytest.approx(0.2)
    assert np.all(table[1:] == 0)
    assert D.generalized_convolution(u, form, 0) == pytest.approx(0.2)


@pytest.mark.parametrize("N, k", [(5, 3), (7, 3), (7, 4)])
def test_convolution_matches_brute_force(N, k):
    g = Group(N, k)
    for seed in range(3):
        u = family(k - 1, N, seed)
        for form in all_forms(g):
            table = D.convolution_table(u, form)
            for x in range(N):
                expected = convolution_brute(u.u, form.coefficients, N, x)
                assert table[x] == pytest.approx(expected, rel=1e-12)
                assert D.generalized_convolution(u, form, x) == pytest.approx(expected, rel=1e-12)


def test_discrepancy_trivial():
    rng = np.random.default_rng(0)
    g, gt = rng.random(11) * 2, rng.random(11)
    form = linear_form(Group(11, 3), 1)
    u = family(2, 11, 1)
    assert D.discrepancy_value(g, g, form, u) == 0.0
    ones = D.TestFamily((np.ones(11), np.ones(11)))
    assert D.discrepancy_value(g, gt, form, ones) == pytest.approx(abs(g.mean() - gt.mean()), rel=1e-12)


@pytest.mark.parametrize("N, k", [(5, 3), (7, 3), (11, 3), (5, 4), (7, 4)])
def test_discrepancy_matches_direct_sum(N, k):
    rng = np.random.default_rng(N + k)
    for seed in range(3):
        g, gt = rng.random(N) * 3, rng.random(N)
        u = family(k - 1, N, 10 + seed)
        for form in all_forms(Group(N, k)):
            got = D.discrepancy_value(g, gt, form, u)
            assert got == pytest.approx(discrepancy_brute(g, gt, form.coefficients, N, u.u),
                                        rel=1e-12, abs=1e-15)


def test_multilinearity():
    rng = np.random.default_rng(4)
    N = 7
    g, gt = rng.random(N) * 2, rng.random(N)
    form = linear_form(Group(N, 4), 2)
    u = family(3, N, 3)
    a, b = rng.random((N, N)), rng.random((N, N))
    vals = []
    for t in (0.0, 0.5, 1.0):
        fam = D.TestFamily((u.u[0], (1 - t) * a + t * b, u.u[2]))
        vals.append(D.discrepancy_signed(g, gt, form, fam))
    assert vals[1] == pytest.approx((vals[0] + vals[2]) / 2, rel=1e-12)


def test_search_zero_for_equal_inputs():
    g = np.random.default_rng(0).random(31)
    rep = D.discrepancy_search(g, g, linear_form(Group(31, 3), 1), restarts=2, seed=0)
    assert rep.value == 0.0


@pytest.mark.parametrize("N", [5, 7])
def test_search_matches_exact_enumeration(N):
    rng = np.random.default_rng(N)
    for trial in range(4):
        g, gt = rng.random(N) * 2, rng.random(N)
        form = linear_form(Group(N, 3), 1 + trial % 3)
        brute = cut_norm_brute_r2(g - gt, form.coefficients, N)
        exact = D.discrepancy_exact(g, gt, form)
        assert exact.value == pytest.approx(brute, rel=1e-12)
        rep = D.discrepancy_search(g, gt, form, restarts=8, seed=trial)
        assert rep.value <= brute + 1e-12
        assert rep.value == pytest.approx(brute, rel=1e-9)


@pytest.mark.parametrize("N", [3, 5, 7])
def test_search_never_beats_exact_maximum(N):
    rng = np.random.default_rng(80 + N)
    g, gt = rng.random(N) * 2, rng.random(N)
    form = linear_form(Group(N, 3), 2)
    exact = D.discrepancy_exact(g, gt, form)
    for seed in range(5):
        assert D.discrepancy_search(g, gt, form, restarts=1, seed=seed).value <= exact.value + 1e-12


def test_search_witness_replays_and_ascent_is_monotone():
    nu, _ = random_sparse_majorant(make_group(301, 3), 0.2, 3)
    form = linear_form(nu.group, 1)
    rep = D.discrepancy_search(nu, np.ones(301), form, restarts=3, seed=5)
    assert D.discrepancy_value(nu, np.ones(301), form, rep.witness) == pytest.approx(rep.value, abs=1e-12)
    hist = np.array(rep.history)
    assert np.all(np.diff(hist) >= -1e-12)
    assert hist[-1] == pytest.approx(rep.value, abs=1e-12)


def test_search_handles_r3():
    g = make_group(11, 4)
    rng = np.random.default_rng(2)
    a, b = rng.random(11) * 2, rng.random(11)
    form = linear_form(g, 3)
    rep = D.discrepancy_search(a, b, form, restarts=3, seed=1)
    assert rep.witness.r == 3
    assert D.discrepancy_value(a, b, form, rep.witness) == pytest.approx(rep.value, abs=1e-12)
    assert np.all(np.diff(rep.history) >= -1e-12)


def test_box_norm_trivial():
    g = Group(11, 3)
    form = linear_form(g, 1)
    assert D.box_norm_bound(np.ones(11), form).value == 0.0
    assert D.box_norm_bound(np.full(11, 1.3), form).value == pytest.approx(0.3, rel=1e-12)
    assert D.box_norm_bound(np.full(11, 0.6), linear_form(Group(11, 4), 2)).value == pytest.approx(0.4)


@pytest.mark.parametrize("N", [5, 7])
def test_box_norm_matches_brute_force(N):
    nu = interval_adversary(Group(N, 3), 0.4)
    for form in all_forms(nu.group):
        expected = box_brute_r2(nu.values.tolist(), form.coefficients, N)
        got = D.box_norm_bound(nu, form)
        assert got.raw == pytest.approx(expected, rel=1e-10, abs=1e-14)
        assert got.value == pytest.approx(max(expected, 0) ** 0.25, rel=1e-10)


def test_box_norm_r3_against_enumeration():
    import itertools
    N = 5
    nu = interval_adversary(Group(N, 4), 0.4)
    h = nu.values - 1
    form = linear_form(nu.group, 1)
    c = form.coefficients
    total = 0.0
    for x0 in itertools.product(range(N), repeat=3):
        for x1 in itertools.product(range(N), repeat=3):
            prod = 1.0
            for w in range(8):
                s = sum(c[p] * (x1 if (w >> p) & 1 else x0)[p] for p in range(3))
                prod *= h[s % N]
            total += prod
    assert D.box_norm_bound(nu, form).raw == pytest.approx(total / N ** 6, rel=1e-10)


def test_box_norm_monte_carlo_fallback():
    nu = interval_adversary(Group(7, 5), 0.5)
    form = linear_form(nu.group, 1)
    exact = D.box_norm_bound(nu, form, exact_max_r=4)
    mc = D.box_norm_bound(nu, form, samples=400_000, seed=1)
    assert mc.mode == "monte_carlo" and exact.mode == "exact"
    assert abs(mc.raw - exact.raw) <= 5 * mc.standard_error


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([(31, 0.3), (61, 0.1), (101, 0.5)]))
def test_box_norm_dominates_discrepancy(seed, params):
    N, p = params
    nu, _ = random_sparse_majorant(make_group(N, 3), p, seed)
    form = linear_form(nu.group, 1)
    bound = D.box_norm_bound(nu, form).value
    for fam in (family(2, N, seed), family(2, N, seed + 1, binary=True)):
        assert D.discrepancy_value(nu, np.ones(N), form, fam) <= bound + 1e-9
    searched = D.discrepancy_search(nu, np.ones(N), form, restarts=1, seed=seed)
    assert searched.value <= bound + 1e-9


def test_transport_identity_and_round_trip():
    g = make_group(7, 4)
    u = family(3, 7, 2)
    assert D.transport_witness(u, 2, 2, g) is u
    back = D.transport_witness(D.transport_witness(u, 1, 3, g), 3, 1, g)
    for a, b in zip(u.u, back.u):
        assert np.array_equal(a, b)


@pytest.mark.parametrize("N, k", [(7, 3), (11, 4)])
def test_transport_preserves_discrepancy(N, k):
    g = make_group(N, k)
    rng = np.random.default_rng(N)
    a, b = rng.random(N) * 4, rng.random(N)
    forms = all_forms(g)
    u = family(k - 1, N, 6)
    for src in forms:
        base = D.discrepancy_value(a, b, src, u)
        for dst in forms:
            moved = D.transport_witness(u, src.j, dst.j, g)
            assert D.discrepancy_value(a, b, dst, moved) == pytest.approx(base, abs=1e-12)


def test_product_closure_trivial():
    form = linear_form(Group(5, 3), 1)
    ones = D.TestFamily((np.ones(5), np.ones(5)))
    assert D.product_closure_witness(ones, ones, form, 2) == pytest.approx((1.0, 1.0))
    u = family(2, 5, 3)
    lhs, rhs = D.product_closure_witness(u, ones, form, 4)
    conv = D.generalized_convolution(u, form, 4)
    assert lhs == pytest.approx(conv, abs=1e-15) and rhs == pytest.approx(conv, abs=1e-12)


@pytest.mark.parametrize("N, k", [(5, 3), (7, 4)])
def test_product_closure_identity(N, k):
    form = linear_form(make_group(N, k), 2)
    for seed in range(5):
        u, v = family(k - 1, N, seed, binary=True), family(k - 1, N, 50 + seed, binary=True)
        lhs, rhs = D.product_closure_witness(u, v, form, seed % N)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_zero_fiber():
    form = linear_form(Group(7, 4), 1)
    z = D.zero_fiber(form)
    assert z.shape == (49, 3)
    assert np.all((z @ np.array(form.coefficients)) % 7 == 0)
    assert len({tuple(r) for r in z}) == 49
