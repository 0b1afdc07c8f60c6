import numpy as np
import pytest

from mst_limits import stats


def test_seed_substream_deterministic_and_distinct():
    a1 = stats.seed_substream(7, "alpha").random(5)
    a2 = stats.seed_substream(7, "alpha").random(5)
    b = stats.seed_substream(7, "beta").random(5)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)


def test_empirical_cf_at_origin_is_one():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(100) + 1j * rng.standard_normal(100)
    assert stats.empirical_cf(z, np.array([0.0 + 0.0j])) == pytest.approx(1.0)


def test_empirical_cf_matches_direct_sum():
    rng = np.random.default_rng(1)
    z = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    t = np.array([0.3 + 0.2j, -1.0 + 0.5j, 2.0 - 1.0j])
    direct = np.array(
        [np.mean(np.exp(1j * (tv.real * z.real + tv.imag * z.imag))) for tv in t]
    )
    assert stats.empirical_cf(z, t) == pytest.approx(direct, rel=1e-12)


def test_empirical_cf_chunking_consistency():
    rng = np.random.default_rng(2)
    z = rng.standard_normal(3000) + 0j
    t = np.array([0.5 + 0.0j, 0.0 + 2.0j])
    assert stats.empirical_cf(z, t, chunk=100) == pytest.approx(
        stats.empirical_cf(z, t, chunk=10**6), rel=1e-12
    )


def test_energy_statistic_zero_for_identical_samples():
    rng = np.random.default_rng(3)
    z = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    assert stats.energy_statistic(z, z) == pytest.approx(0.0, abs=1e-12)


def test_energy_test_null_keeps_p_large():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(600) + 1j * rng.standard_normal(600)
    y = rng.standard_normal(600) + 1j * rng.standard_normal(600)
    res = stats.energy_test(x, y, n_permutations=199, rng=np.random.default_rng(5))
    assert res.p_value > 0.01


def test_energy_test_detects_shift():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(600) + 1j * rng.standard_normal(600)
    y = 0.6 + rng.standard_normal(600) + 1j * rng.standard_normal(600)
    res = stats.energy_test(x, y, n_permutations=199, rng=np.random.default_rng(7))
    assert res.p_value <= 0.01
    assert res.statistic > 0


def test_energy_test_rejects_empty():
    with pytest.raises(ValueError):
        stats.energy_test(np.array([]), np.array([1.0 + 0j]))


def test_chi_square_two_sample_null():
    rng = np.random.default_rng(8)
    a = rng.multinomial(5000, [0.2, 0.3, 0.4, 0.1])
    b = rng.multinomial(5000, [0.2, 0.3, 0.4, 0.1])
    _, p = stats.chi_square_two_sample(a, b)
    assert p > 0.01


def test_chi_square_two_sample_alternative():
    a = np.array([100, 900, 0, 0])
    b = np.array([900, 100, 0, 0])
    stat, p = stats.chi_square_two_sample(a, b)
    assert p < 1e-6 and stat > 0


def test_chi_square_merges_sparse_categories():
    a = np.array([1000, 1, 0, 2])
    b = np.array([1000, 0, 2, 1])
    stat, p = stats.chi_square_two_sample(a, b)
    assert 0.0 <= p <= 1.0


def test_ks_exponential_sanity():
    rng = np.random.default_rng(9)
    _, p_good = stats.ks_exponential(rng.standard_exponential(2000))
    _, p_bad = stats.ks_exponential(rng.standard_normal(2000) ** 2 + 0.5)
    assert p_good > 0.01
    assert p_bad < 1e-4
