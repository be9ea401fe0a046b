import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from bmc_kdetect import linalg, model
from bmc_kdetect.counts import build_counts, trim
from bmc_kdetect.exceptions import FactorizationBreakdown
from bmc_kdetect.linalg import (
    count_singvals_above,
    count_singvals_above_svd,
    embed,
    inertia_from_blocks,
    ldl_bunch_kaufman,
    lowrank_rows,
    svd_truncated,
)


def _sym(rng, n):
    a = rng.standard_normal((n, n))
    return a + a.T


def _eig_inertia(a):
    w = np.linalg.eigvalsh(a)
    tol = 1e-9 * max(1.0, np.abs(w).max())
    return int((w > tol).sum()), int((np.abs(w) <= tol).sum()), int((w < -tol).sum())


@pytest.mark.parametrize("n", [1, 2, 3, 7, 20])
def test_ldl_reconstructs(n):
    rng = np.random.default_rng(n)
    for _ in range(20):
        a = _sym(rng, n)
        f = ldl_bunch_kaufman(a)
        p = f.perm
        np.testing.assert_allclose(f.L @ f.D @ f.L.T, a[np.ix_(p, p)], atol=1e-9)
        assert np.allclose(np.diag(f.L), 1.0)
        assert np.allclose(np.triu(f.L, 1), 0.0)


def test_ldl_inertia_matches_eigenvalues():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 25))
        a = _sym(rng, n)
        f = ldl_bunch_kaufman(a)
        assert inertia_from_blocks(f.D, f.blocks) == _eig_inertia(a)


def test_ldl_uses_two_by_two_pivots():
    # zero diagonal forces a 2x2 pivot
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    f = ldl_bunch_kaufman(a)
    assert f.blocks == [(0, 2)]
    assert inertia_from_blocks(f.D, f.blocks) == (1, 0, 1)


def test_ldl_zero_matrix():
    f = ldl_bunch_kaufman(np.zeros((3, 3)))
    assert inertia_from_blocks(f.D, f.blocks) == (0, 3, 0)


def test_ldl_matches_scipy_inertia_on_semidefinite():
    rng = np.random.default_rng(3)
    b = rng.standard_normal((10, 4))
    a = b @ b.T - 0.5 * np.eye(10)
    f = ldl_bunch_kaufman(a)
    _, d, _ = scipy.linalg.ldl(a)
    w = np.linalg.eigvalsh(d)
    assert inertia_from_blocks(f.D, f.blocks, 1e-9)[0] == int((w > 1e-9).sum())


def test_ldl_rejects_nonfinite():
    with pytest.raises(FactorizationBreakdown):
        ldl_bunch_kaufman(np.array([[np.nan, 1.0], [1.0, 0.0]]))


def test_count_diag_examples():
    a = np.diag([5.0, 3.0, 1.0])
    assert count_singvals_above(a, 2.0) == 2
    assert count_singvals_above(a, 6.0) == 0
    assert count_singvals_above(a, 0.5) == 3


def test_count_exact_tie_counts_as_above():
    a = np.diag([4.0, 2.0, 1.0])
    assert count_singvals_above(a, 2.0) == 2
    assert count_singvals_above_svd(a, 2.0) == 2


def test_count_rejects_nonpositive_gamma():
    with pytest.raises(ValueError):
        count_singvals_above(np.eye(2), 0.0)


def test_count_matches_svd_random():
    rng = np.random.default_rng(42)
    for _ in range(40):
        a = rng.standard_normal((30, 30)) * rng.uniform(0.1, 10)
        s = np.linalg.svd(a, compute_uv=False)
        for g in rng.uniform(0.5 * s[-1], 1.2 * s[0], size=5):
            assert count_singvals_above(a, g) == count_singvals_above_svd(a, g)


def test_count_on_sparse_counts():
    inst = model.build_instance(model.dot_product_example(), 60)
    c = build_counts(model.simulate(inst, 20000, seed=2))
    m = trim(c).matrix
    for g in (1.0, 10.0, 50.0, 200.0):
        assert count_singvals_above(m, g) == count_singvals_above_svd(m, g)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(0.1, 100.0))
def test_count_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((12, 12))
    g = float(rng.uniform(0.2, 5.0))
    assert count_singvals_above(c * a, c * g) == count_singvals_above(a, g)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_count_monotone_in_gamma(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((15, 15))
    gs = np.sort(rng.uniform(0.1, 8.0, size=6))
    counts = [count_singvals_above(a, g) for g in gs]
    assert counts == sorted(counts, reverse=True)


def test_svd_diag():
    r = svd_truncated(np.diag([3.0, 2.0, 1.0]), 2)
    np.testing.assert_allclose(r.s, [3.0, 2.0])


def test_svd_rank_one():
    a, b = np.array([1.0, 2.0, 2.0]), np.array([3.0, 0.0, 4.0])
    s = np.linalg.svd(np.outer(a, b), compute_uv=False)
    r = svd_truncated(np.outer(a, b), 3)
    np.testing.assert_allclose(r.s[0], 15.0)
    np.testing.assert_allclose(r.s[1:], 0.0, atol=1e-12)
    np.testing.assert_allclose(r.s, s, atol=1e-12)


def test_svd_rejects_bad_rank():
    with pytest.raises(ValueError):
        svd_truncated(np.eye(3), 0)


def test_expected_counts_have_rank_of_p():
    inst = model.build_instance(model.dot_product_example(), 40)
    ell = 10_000
    N = ell * inst.Pi[:, None] * inst.transition_matrix()
    s = np.linalg.svd(N, compute_uv=False)
    assert (s > 1e-9 * s[0]).sum() == 2


def test_sparse_svd_path_agrees(monkeypatch):
    rng = np.random.default_rng(1)
    a = rng.poisson(0.3, size=(80, 80)).astype(float)
    dense = svd_truncated(a, 3)
    monkeypatch.setattr(linalg, "DENSE_SVD_MAX_N", 10)
    sparse = svd_truncated(a, 3)
    np.testing.assert_allclose(sparse.s, dense.s, rtol=1e-8)


def test_embed_basis_example():
    n = 4
    u = np.zeros((n, 1)); u[0, 0] = 1
    v = np.zeros((n, 1)); v[1, 0] = 1
    e = embed(linalg.SvdResult(u, np.array([2.0]), v), 1)
    assert e.x_hat[0].tolist() == [2.0, 0.0]
    assert e.x_hat[1].tolist() == [0.0, 2.0]
    assert np.all(e.x_hat[2:] == 0)


def test_embed_scaling():
    rng = np.random.default_rng(5)
    svd = svd_truncated(rng.standard_normal((10, 10)), 3)
    e1 = embed(svd, 3).x_hat
    doubled = linalg.SvdResult(svd.u, svd.s * np.array([2.0, 1.0, 1.0]), svd.v)
    e2 = embed(doubled, 3).x_hat
    np.testing.assert_allclose(e2[:, 0], 2 * e1[:, 0])
    np.testing.assert_allclose(e2[:, 3], 2 * e1[:, 3])
    np.testing.assert_allclose(e2[:, [1, 2, 4, 5]], e1[:, [1, 2, 4, 5]])


def test_lowrank_full_rank_reconstructs():
    a = np.diag([4.0, 3.0, 1.0])
    lr = lowrank_rows(svd_truncated(a, 3), 3)
    np.testing.assert_allclose(lr.r_hat(), a, atol=1e-12)


def test_eckart_young():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((20, 20))
    s = np.linalg.svd(a, compute_uv=False)
    lr = lowrank_rows(svd_truncated(a, 5), 5)
    assert np.linalg.norm(lr.r_hat() - a) ** 2 == pytest.approx((s[5:] ** 2).sum(), rel=1e-10)


def test_rows0_match_r_hat():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((15, 15))
    lr = lowrank_rows(svd_truncated(a, 4), 4)
    R = lr.r_hat()
    for x in (0, 7, 14):
        np.testing.assert_allclose(lr.row0(x), np.concatenate([R[x], R[:, x]]), atol=1e-12)
    np.testing.assert_allclose(lr.rows0([3, 4]),
                               np.vstack([lr.row0(3), lr.row0(4)]), atol=1e-12)


@pytest.mark.parametrize("r", [1, 2, 5])
def test_norm_equivalence(r):
    rng = np.random.default_rng(r)
    inst = model.build_instance(model.sample_uniform_ensemble(5, rng, n=100, alpha="const"), 100)
    t = trim(build_counts(model.simulate(inst, 3000, seed=r)))
    svd = svd_truncated(t.matrix, r)
    lr, e = lowrank_rows(svd, r), embed(svd, r)
    for x, y in rng.integers(0, 100, size=(50, 2)):
        d0 = np.linalg.norm(lr.row0(x) - lr.row0(y))
        d1 = np.linalg.norm(e.x_hat[x] - e.x_hat[y])
        assert abs(d0 - d1) <= 1e-8 * svd.s[0]
