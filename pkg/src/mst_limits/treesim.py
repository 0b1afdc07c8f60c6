"""Composition-vector chain of an m-ary search tree and its continuous-time
embedding.

The discrete chain lives on nonnegative integer vectors of length m-1; a
step picks type k with probability k*x_k / sum_j j*x_j and applies the
replacement increment of that type, so the weighted gap count u1 grows by
exactly one per step.  The continuous-time process is recovered by drawing
the jump times independently of the state path: the j-th holding time is
exponential with rate N0 + j - 1, where N0 is the initial gap count.

Everything here is estimator territory: the positive limit ``xi`` of
n*exp(-tau_n), the complex limit ``w`` of exp(-lambda2*tau_n)*u2(X_n), and
the discrete martingale limit ``wdt`` of u2(X_n) under its exact product
normalizer.
"""

import bisect
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from . import stats
from .spectral import SpectralData, replacement_matrix


class SimulationError(ValueError):
    """Invalid state or parameters for a chain simulation."""


@dataclass
class CompositionVector:
    """Node-type counts: entry k (1-based) counts nodes holding k-1 keys."""

    m: int
    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int64)
        if self.x.shape != (self.m - 1,):
            raise SimulationError(
                f"composition vector for m={self.m} needs length {self.m - 1}"
            )
        if np.any(self.x < 0) or not np.any(self.x):
            raise SimulationError("composition vector must be nonnegative and nonzero")

    def gap_count(self):
        """u1(x) = sum k * x_k, the number of free key slots."""
        return int(self.x @ np.arange(1, self.m))

    @classmethod
    def unit(cls, m, k=1):
        """e_k: a single node of type k."""
        x = np.zeros(m - 1, dtype=np.int64)
        x[k - 1] = 1
        return cls(m, x)


@dataclass
class EmbeddedRun:
    """One continuous-time trajectory recorded through its jump skeleton."""

    m: int
    n0: int
    steps: int
    jump_times: np.ndarray
    final_state: CompositionVector
    u2_final: complex
    u2_trace: np.ndarray = field(default=None, repr=False)


@dataclass
class LimitEstimates:
    xi_hat: float
    w_hat: complex
    wdt_hat: complex
    n: int


def _step_batch(states, weights_k, rng):
    """Advance every row of ``states`` by one transition, in place."""
    reps, width = states.shape
    w = states * weights_k  # k * x_k
    tot = w.sum(axis=1)
    cdf = np.cumsum(w, axis=1)
    u = rng.random(reps) * tot
    k = (cdf <= u[:, None]).sum(axis=1)
    np.clip(k, 0, width - 1, out=k)
    rows = np.arange(reps)
    recycle = k == width - 1
    plain = ~recycle
    pr = rows[plain]
    states[pr, k[plain]] -= 1
    states[pr, k[plain] + 1] += 1
    rr = rows[recycle]
    states[rr, width - 1] -= 1
    states[rr, 0] += width + 1  # m new type-1 nodes
    return k


def dt_step(state, rng):
    """One transition of the discrete chain."""
    arr = state.x[None, :].copy()
    _step_batch(arr, np.arange(1, state.m, dtype=float), rng)
    return CompositionVector(state.m, arr[0])


def dt_simulate(m, x0, n, seed=None, rng=None, record_u2=None):
    """n transitions from x0; deterministic given the seed.

    With ``record_u2`` set to the u2 coefficient vector, the complex
    projection is recorded after every step and returned alongside the
    final state.
    """
    if n < 0:
        raise SimulationError("step count must be >= 0")
    if rng is None:
        rng = np.random.default_rng(seed)
    state = x0 if isinstance(x0, CompositionVector) else CompositionVector(m, x0)
    if state.m != m:
        raise SimulationError("x0 branching factor mismatch")
    arr = state.x[None, :].copy()
    weights = np.arange(1, m, dtype=float)
    trace = np.empty(n, dtype=complex) if record_u2 is not None else None
    for i in range(n):
        _step_batch(arr, weights, rng)
        if trace is not None:
            trace[i] = arr[0] @ record_u2
    final = CompositionVector(m, arr[0])
    return (final, trace) if record_u2 is not None else final


def dt_simulate_batch(m, x0, n, reps, rng):
    """Final states of ``reps`` independent chains run for n steps each.

    Returns an (reps, m-1) int64 array.  Vectorized across replicas; the
    per-replica streams are interleaved draws from the one generator, which
    keeps aggregates deterministic for a fixed seed.
    """
    state = x0 if isinstance(x0, CompositionVector) else CompositionVector(m, x0)
    states = np.tile(state.x, (reps, 1))
    weights = np.arange(1, m, dtype=float)
    for _ in range(n):
        _step_batch(states, weights, rng)
    return states


class _Node:
    __slots__ = ("keys", "children")

    def __init__(self):
        self.keys = []
        self.children = None


def key_insertion_oracle(m, n, seed=None, rng=None):
    """Composition vector after inserting n uniform keys into a literal
    m-ary search tree.

    A node stores up to m-1 keys; on receiving its (m-1)-th key it spawns m
    empty subtrees over the key-order gaps and stops counting (saturated
    nodes only route).  This is an independent, law-level oracle for the
    chain started from a single empty node.
    """
    if n < 0:
        raise SimulationError("key count must be >= 0")
    if rng is None:
        rng = np.random.default_rng(seed)
    root = _Node()
    for key in rng.random(n):
        node = root
        while node.children is not None:
            node = node.children[bisect.bisect_right(node.keys, key)]
        bisect.insort(node.keys, key)
        if len(node.keys) == m - 1:
            node.children = [_Node() for _ in range(m)]
    counts = np.zeros(m - 1, dtype=np.int64)
    stack = [root]
    while stack:
        node = stack.pop()
        if node.children is None:
            counts[len(node.keys)] += 1
        else:
            stack.extend(node.children)
    return CompositionVector(m, counts)


def key_insertion_batch(m, n, reps, rng):
    """(reps, m-1) composition vectors from the literal-tree oracle."""
    out = np.empty((reps, m - 1), dtype=np.int64)
    for r in range(reps):
        out[r] = key_insertion_oracle(m, n, rng=rng).x
    return out


def ct_jump_times(n, n0, seed=None, rng=None):
    """Jump times tau_1..tau_n: independent holding times, the j-th
    exponential with rate n0 + j - 1."""
    if n < 1 or n0 < 1:
        raise SimulationError("need n >= 1 and n0 >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    incr = rng.standard_exponential(n) / (n0 + np.arange(n, dtype=float))
    return np.cumsum(incr)


def ct_final_jump_time_batch(n, n0, reps, rng, block=200):
    """tau_n for ``reps`` independent trajectories, accumulated blockwise."""
    tau = np.zeros(reps)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        rates = (n0 + np.arange(lo, hi, dtype=float))[:, None]
        tau += (rng.standard_exponential((hi - lo, reps)) / rates).sum(axis=0)
    return tau


def ct_simulate(m, x0, n, spectral, seed=None, rng=None, keep_trace=False):
    """Continuous-time run assembled from an independent jump chain and
    jump-time stream (the embedding makes them independent by construction).
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    state = x0 if isinstance(x0, CompositionVector) else CompositionVector(m, x0)
    n0 = state.gap_count()
    # independent child streams for the chain and the clock
    chain_rng, clock_rng = (np.random.default_rng(s) for s in rng.bit_generator.seed_seq.spawn(2))
    trace_coeffs = spectral.u2_coeffs if keep_trace else None
    if keep_trace:
        final, trace = dt_simulate(m, state, n, rng=chain_rng, record_u2=trace_coeffs)
    else:
        final = dt_simulate(m, state, n, rng=chain_rng)
        trace = None
    times = ct_jump_times(n, n0, rng=clock_rng)
    return EmbeddedRun(
        m=m,
        n0=n0,
        steps=n,
        jump_times=times,
        final_state=final,
        u2_final=complex(final.x @ spectral.u2_coeffs),
        u2_trace=trace,
    )


def discrete_normalizer(lambda2, n0, n):
    """gamma_n = prod_{j=0..n-1} (1 + lambda2/(n0+j)), via log-Gamma."""
    lg = scipy.special.loggamma
    return complex(np.exp(lg(n0 + n + lambda2) - lg(n0 + n) + lg(n0) - lg(n0 + lambda2)))


def normalizer_to_power_law(lambda2, n0, n):
    """gamma_n / n^lambda2: converts the exact-martingale normalization to
    the n^lambda2 scaling in which the continuous/discrete limits satisfy
    w = xi^lambda2 * wdt with independent factors."""
    return discrete_normalizer(lambda2, n0, n) * np.exp(-lambda2 * np.log(n))


def estimate_limits(run, spectral):
    """Limit-variable estimators from one embedded run."""
    if run.steps < 1:
        raise SimulationError("estimates need at least one step")
    if spectral.m != run.m:
        raise SimulationError("spectral data branching factor mismatch")
    tau_n = float(run.jump_times[-1])
    n = run.steps
    lam2 = spectral.lambda2
    gamma_n = discrete_normalizer(lam2, run.n0, n)
    return LimitEstimates(
        xi_hat=n * np.exp(-tau_n),
        w_hat=complex(np.exp(-lam2 * tau_n) * run.u2_final),
        wdt_hat=complex(run.u2_final / gamma_n),
        n=n,
    )


def ct_limit_batch(m, x0, n, reps, spectral, rng):
    """Vectorized limit estimates for ``reps`` independent embedded runs.

    Returns (xi_hat, w_hat, wdt_hat) arrays.  Chain states and jump times
    come from independent child streams, mirroring the single-run layout.
    """
    state = x0 if isinstance(x0, CompositionVector) else CompositionVector(m, x0)
    n0 = state.gap_count()
    chain_rng, clock_rng = (np.random.default_rng(s) for s in rng.bit_generator.seed_seq.spawn(2))
    finals = dt_simulate_batch(m, state, n, reps, chain_rng)
    u2 = finals @ spectral.u2_coeffs
    tau = ct_final_jump_time_batch(n, n0, reps, clock_rng)
    gamma_n = discrete_normalizer(spectral.lambda2, n0, n)
    xi = n * np.exp(-tau)
    w = np.exp(-spectral.lambda2 * tau) * u2
    wdt = u2 / gamma_n
    return xi, w, wdt


@dataclass
class ConnectionTestReport:
    statistic: float
    p_value: float
    n_pairs: int
    n_permutations: int
    conversion: complex


def martingale_connection_test(
    xi_samples,
    wdt_samples,
    w_samples,
    spectral,
    n0=1,
    n_steps=None,
    n_permutations=999,
    rng=None,
):
    """Two-sample energy permutation test of w =law= xi^lambda2 * wdt.

    ``wdt_samples`` are expected in the exact-martingale normalization;
    they are converted to the n^lambda2 convention by gamma_n / n^lambda2
    (its n -> infinity limit Gamma(n0)/Gamma(n0+lambda2) when ``n_steps``
    is omitted) before pairing with independent xi^lambda2 factors.
    """
    xi = np.asarray(xi_samples, dtype=float).ravel()
    wdt = np.asarray(wdt_samples, dtype=complex).ravel()
    w = np.asarray(w_samples, dtype=complex).ravel()
    if np.any(xi <= 0):
        raise SimulationError("xi samples must be positive")
    if rng is None:
        rng = np.random.default_rng()
    lam2 = spectral.lambda2
    if n_steps is None:
        lg = scipy.special.loggamma
        conversion = complex(np.exp(lg(n0) - lg(n0 + lam2)))
    else:
        conversion = normalizer_to_power_law(lam2, n0, n_steps)
    k = min(xi.size, wdt.size)
    product = np.exp(lam2 * np.log(xi[:k])) * conversion * wdt[:k]
    res = stats.energy_test(product, w, n_permutations=n_permutations, rng=rng)
    return ConnectionTestReport(
        statistic=res.statistic,
        p_value=res.p_value,
        n_pairs=k,
        n_permutations=res.n_permutations,
        conversion=conversion,
    )


def one_step_form_mean(m, coeffs, state):
    """Exhaustive one-step conditional mean of a linear form.

    Enumerates every transition with its probability k*x_k / u1(x); used as
    the independent oracle for the exact martingale normalizer.
    """
    x = state.x.astype(float)
    gaps = state.gap_count()
    increments = replacement_matrix(m)
    coeffs = np.asarray(coeffs, dtype=complex)
    total = 0.0 + 0.0j
    for k in range(1, m):
        p = k * x[k - 1] / gaps
        if p == 0:
            continue
        total += p * ((state.x + increments[k - 1]) @ coeffs)
    return complex(total)


def one_step_u2_mean(spectral, state):
    """One-step conditional mean of the u2 projection by full enumeration."""
    return one_step_form_mean(spectral.m, spectral.u2_coeffs, state)
