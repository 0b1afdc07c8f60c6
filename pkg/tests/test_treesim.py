import math

import numpy as np
import pytest
import scipy.special

from mst_limits import spectral, stats, treesim


@pytest.fixture(scope="module")
def sp27():
    return spectral.eigen_data(27)


@pytest.fixture(scope="module")
def sp5():
    return spectral.eigen_data(5)


def test_composition_vector_validation():
    with pytest.raises(treesim.SimulationError):
        treesim.CompositionVector(4, np.array([0, 0, 0]))
    with pytest.raises(treesim.SimulationError):
        treesim.CompositionVector(4, np.array([1, -1, 0]))
    with pytest.raises(treesim.SimulationError):
        treesim.CompositionVector(4, np.array([1, 0]))


def test_dt_step_forced_transitions():
    rng = np.random.default_rng(0)
    for m in (3, 4, 6):
        # a single one-gap node must become a two-gap node
        out = treesim.dt_step(treesim.CompositionVector.unit(m, 1), rng)
        expect = np.zeros(m - 1, dtype=np.int64)
        if m == 3:
            # type 2 is the last type for m=3; e_1 -> e_2
            expect[1] = 1
        else:
            expect[1] = 1
        assert np.array_equal(out.x, expect)
        # a single (m-1)-gap node must recycle into m fresh one-gap nodes
        out = treesim.dt_step(treesim.CompositionVector.unit(m, m - 1), rng)
        expect = np.zeros(m - 1, dtype=np.int64)
        expect[0] = m
        assert np.array_equal(out.x, expect)


def test_dt_step_two_type_probabilities():
    # from counts (1,1,0) in m=4 the one-gap node is picked w.p. 1/3
    m, reps = 4, 30000
    rng = np.random.default_rng(1)
    state = treesim.CompositionVector(m, np.array([1, 1, 0]))
    hits = 0
    for _ in range(reps):
        out = treesim.dt_step(state, rng)
        if out.x[1] == 2:  # k=1 fired: (1,1,0) -> (0,2,0)
            hits += 1
    p_hat = hits / reps
    se = math.sqrt((1 / 3) * (2 / 3) / reps)
    assert abs(p_hat - 1 / 3) <= 4 * se


def test_dt_simulate_zero_steps_identity():
    x0 = treesim.CompositionVector(5, np.array([2, 0, 1, 0]))
    out = treesim.dt_simulate(5, x0, 0, seed=2)
    assert np.array_equal(out.x, x0.x)


@pytest.mark.parametrize("seed", range(5))
def test_gap_count_grows_by_one_per_step(seed):
    m, n = 6, 37
    x0 = treesim.CompositionVector.unit(m)
    out = treesim.dt_simulate(m, x0, n, seed=seed)
    assert out.gap_count() == x0.gap_count() + n


def test_dt_batch_matches_exhaustive_two_step_law():
    # m=3 from a mixed state: one step has exactly two outcomes
    m, reps = 3, 40000
    state = treesim.CompositionVector(m, np.array([1, 1]))
    rng = np.random.default_rng(3)
    finals = treesim.dt_simulate_batch(m, state, 1, reps, rng)
    # k=1 w.p. 1/3 -> (0,2); k=2 w.p. 2/3 -> (4,0)
    frac_02 = np.mean(finals[:, 0] == 0)
    se = math.sqrt((1 / 3) * (2 / 3) / reps)
    assert abs(frac_02 - 1 / 3) <= 4 * se


def test_key_insertion_small_counts():
    # fewer keys than the node capacity: a single root of the right type
    for m in (3, 5, 8):
        for n in range(0, m - 1):
            cv = treesim.key_insertion_oracle(m, n, seed=4)
            expect = np.zeros(m - 1, dtype=np.int64)
            expect[n] = 1
            assert np.array_equal(cv.x, expect)


def test_key_insertion_gap_conservation():
    cv = treesim.key_insertion_oracle(4, 57, seed=5)
    assert cv.gap_count() == 58


def test_key_insertion_law_matches_chain():
    m, n, reps = 3, 3, 20000
    rng = np.random.default_rng(6)
    oracle = treesim.key_insertion_batch(m, n, reps, rng)
    chain = treesim.dt_simulate_batch(
        m, treesim.CompositionVector.unit(m), n, reps, rng
    )
    a = np.bincount(oracle[:, 1], minlength=3)
    b = np.bincount(chain[:, 1], minlength=3)
    _, p = stats.chi_square_two_sample(a, b)
    assert p > 0.001


def test_ct_jump_times_mean_and_laplace():
    n, n0, reps = 50, 1, 4000
    rng = np.random.default_rng(7)
    finals = np.array([treesim.ct_jump_times(n, n0, rng=rng)[-1] for _ in range(reps)])
    target_mean = sum(1.0 / (n0 + i) for i in range(n))
    se = finals.std(ddof=1) / math.sqrt(reps)
    assert abs(finals.mean() - target_mean) <= 4 * se
    # Laplace transform at s=1 for a unit initial gap count: 1/(n+1)
    vals = np.exp(-finals)
    se = vals.std(ddof=1) / math.sqrt(reps)
    assert abs(vals.mean() - 1.0 / (n + 1)) <= 4 * se


def test_ct_jump_times_strictly_increasing():
    t = treesim.ct_jump_times(200, 3, seed=8)
    assert np.all(np.diff(t) > 0)


def test_ct_batch_matches_marginal():
    n, n0, reps = 30, 2, 5000
    tau = treesim.ct_final_jump_time_batch(n, n0, reps, np.random.default_rng(9))
    target = sum(1.0 / (n0 + i) for i in range(n))
    se = tau.std(ddof=1) / math.sqrt(reps)
    assert abs(tau.mean() - target) <= 4 * se


def test_estimate_limits_fixed_time_identity(sp5):
    # with tau_n = log n the growth estimator is exactly 1
    n = 64
    run = treesim.ct_simulate(5, treesim.CompositionVector.unit(5), n, sp5, seed=10)
    run.jump_times[-1] = math.log(n)
    est = treesim.estimate_limits(run, sp5)
    assert est.xi_hat == pytest.approx(1.0)


def test_discrete_normalizer_matches_product(sp5):
    lam2, n0, n = sp5.lambda2, 3, 17
    direct = 1.0 + 0.0j
    for j in range(n):
        direct *= 1.0 + lam2 / (n0 + j)
    assert treesim.discrete_normalizer(lam2, n0, n) == pytest.approx(direct, rel=1e-12)


def test_one_step_identity_exhaustive(sp5):
    # enumeration oracle equals the martingale factor for several states
    for m in range(3, 7):
        if m == 3:
            lam = complex(spectral.eigenvalues(3)[1])
        else:
            lam = spectral.lambda2_of(m)
        coeffs = spectral.eigenform_coeffs(m, lam)
        mixed = np.zeros(m - 1, dtype=np.int64)
        mixed[0], mixed[1] = 2, 1
        for state in (
            treesim.CompositionVector.unit(m, 1),
            treesim.CompositionVector.unit(m, m - 1),
            treesim.CompositionVector(m, mixed),
        ):
            oracle = treesim.one_step_form_mean(m, coeffs, state)
            claim = (1.0 + lam / state.gap_count()) * (state.x @ coeffs)
            assert abs(oracle - claim) <= 1e-12 * max(1.0, abs(claim))


def test_wdt_is_exact_martingale(sp5):
    # the normalized projection keeps its initial mean at finite n
    m, n, reps = 5, 40, 20000
    x0 = treesim.CompositionVector.unit(m)
    rng = np.random.default_rng(11)
    finals = treesim.dt_simulate_batch(m, x0, n, reps, rng)
    gamma_n = treesim.discrete_normalizer(sp5.lambda2, 1, n)
    wdt = (finals @ sp5.u2_coeffs) / gamma_n
    target = complex(x0.x @ sp5.u2_coeffs)
    for part, tv in (("real", target.real), ("imag", target.imag)):
        vals = getattr(wdt, part)
        se = vals.std(ddof=1) / math.sqrt(reps)
        assert abs(vals.mean() - tv) <= 4 * se


def test_jump_times_independent_of_chain(sp27):
    # correlation between the clock and the chain projection sits at noise level
    n, reps = 100, 4000
    x0 = treesim.CompositionVector.unit(27)
    xi, w, wdt = treesim.ct_limit_batch(27, x0, n, reps, sp27, np.random.default_rng(12))
    tau = -np.log(xi / n)
    for comp in (wdt.real, wdt.imag):
        r = np.corrcoef(tau, comp)[0, 1]
        assert abs(r) <= 4.0 / math.sqrt(reps)


def test_connection_test_exact_null(sp27):
    # both sides built from the same finite-n laws: p must not be extreme
    n, reps = 200, 1500
    x0 = treesim.CompositionVector.unit(27)
    _, w, _ = treesim.ct_limit_batch(27, x0, n, reps, sp27, stats.seed_substream(13, "a"))
    tau = treesim.ct_final_jump_time_batch(n, 1, reps, stats.seed_substream(13, "b"))
    xi = n * np.exp(-tau)
    finals = treesim.dt_simulate_batch(27, x0, n, reps, stats.seed_substream(13, "c"))
    gamma_n = treesim.discrete_normalizer(sp27.lambda2, 1, n)
    wdt = (finals @ sp27.u2_coeffs) / gamma_n
    rep = treesim.martingale_connection_test(
        xi, wdt, w, sp27, n0=1, n_steps=n, n_permutations=99,
        rng=stats.seed_substream(13, "p"),
    )
    assert rep.p_value > 0.01


def test_connection_test_rejects_nonpositive_xi(sp27):
    with pytest.raises(treesim.SimulationError):
        treesim.martingale_connection_test(
            np.array([1.0, -0.5]),
            np.array([1.0 + 0j, 1.0 + 0j]),
            np.array([1.0 + 0j, 1.0 + 0j]),
            sp27,
        )


def test_connection_conversion_limit(sp27):
    # gamma_n / n^lambda2 approaches Gamma(n0)/Gamma(n0+lambda2)
    lam2 = sp27.lambda2
    limit = complex(np.exp(scipy.special.loggamma(1) - scipy.special.loggamma(1 + lam2)))
    at_n = treesim.normalizer_to_power_law(lam2, 1, 10**6)
    assert at_n == pytest.approx(limit, rel=1e-4)
