"""Weighted-replication martingale converging to the smoothing fixed point.

Start from value 1; at every internal node multiply an independent weight
A = exp(-lambda*T) against the sum of the m subtree values.  Since
m*E[A] = 1 when lambda is a root of the characteristic polynomial, the
depth-n value is a mean-one martingale, and for Re(lambda) > 1/2 it is
bounded in L^2 with an explicit limit variance.  Evaluation is iterative,
level by level, so the only cost scaling with depth is the m^depth array.
"""

from dataclasses import dataclass

import numpy as np

from .fixpoint import FixpointError, TSampler, laplace_T

#: hard cap on leaves per replica
LEAF_BUDGET = 10**7


class BudgetExceededError(FixpointError):
    """Requested depth exceeds the per-replica leaf budget."""


class NotSquareIntegrableError(FixpointError):
    """Variance formula requested outside the L^2 regime."""


@dataclass
class CascadeConfig:
    m: int
    lam: complex
    depth: int
    replicas: int = 1

    def __post_init__(self):
        if self.m < 2:
            raise FixpointError(f"branching factor must be >= 2, got {self.m}")
        if self.depth < 0:
            raise FixpointError(f"depth must be >= 0, got {self.depth}")
        if self.replicas < 1:
            raise FixpointError(f"replicas must be >= 1, got {self.replicas}")
        self.lam = complex(self.lam)
        if self.m**self.depth > LEAF_BUDGET:
            raise BudgetExceededError(
                f"m^depth = {self.m}^{self.depth} exceeds the budget {LEAF_BUDGET}"
            )


def cascade_sample(cfg, rng, sampler_mode="beta-inverse"):
    """One depth-``cfg.depth`` value of the replication martingale."""
    return complex(cascade_batch(cfg, rng, replicas=1, sampler_mode=sampler_mode)[0])


def cascade_batch(cfg, rng, replicas=None, sampler_mode="beta-inverse", chunk=2000):
    """Independent depth-n values, vectorized level by level.

    Memory per chunk is chunk * m^(depth-1) complex values, so the chunk
    size shrinks automatically for deep trees.
    """
    reps = cfg.replicas if replicas is None else replicas
    m, lam, depth = cfg.m, cfg.lam, cfg.depth
    if depth == 0:
        return np.ones(reps, dtype=complex)
    sampler = TSampler(m, sampler_mode)
    width = m ** (depth - 1)
    chunk = max(1, min(chunk, max(1, LEAF_BUDGET // max(width, 1))))
    out = np.empty(reps, dtype=complex)
    for lo in range(0, reps, chunk):
        hi = min(lo + chunk, reps)
        b = hi - lo
        # parents of the leaves: value m * A each
        t = sampler.sample(rng, size=(b, width))
        vals = m * np.exp(-lam * t)
        for level in range(depth - 2, -1, -1):
            w = m**level
            t = sampler.sample(rng, size=(b, w))
            vals = np.exp(-lam * t) * vals.reshape(b, w, m).sum(axis=2)
        out[lo:hi] = vals[:, 0]
    return out


def variance_limit(m, lam):
    """(m^2 E|A|^2 - 1) / (1 - m E|A|^2) with E|A|^2 = laplace_T(m, 2 Re lambda).

    The limit variance of the martingale; requires m E|A|^2 < 1.
    """
    ea2 = laplace_T(m, 2.0 * complex(lam).real)
    denom = 1.0 - m * ea2
    if denom <= 0:
        raise NotSquareIntegrableError(
            f"m*E|A|^2 = {m * ea2:.6f} >= 1: martingale not bounded in L^2"
        )
    return float((m * m * ea2 - 1.0) / denom)


@dataclass
class ExpMomentReport:
    """Empirical exponential-moment probe on a small-|t| grid."""

    c_hat: float
    eps: float
    pairing_bound_ok: bool
    modulus_bound_ok: bool
    modulus_checked: int
    failing_t: list
    n_samples: int
    n_blocks: int


def _median_of_means(values, blocks):
    values = np.asarray(values, dtype=float)
    usable = (values.size // blocks) * blocks
    if usable == 0:
        return float(values.mean())
    means = values[:usable].reshape(blocks, -1).mean(axis=1)
    return float(np.median(means))


def exp_moment_probe(samples, tgrid, blocks=10):
    """Estimate E e^{<t,Z>} and E e^{|tZ|} on a grid of small t.

    Fits the smallest constant C with estimate <= exp(Re t + C|t|^2) over
    the grid, then checks the companion bound
    E e^{|tZ|} <= 4 exp(|t| + 2C|t|^2) at grid points whose sqrt(2)-scaled
    corners stay inside the probed disc.  Exponential empirics are noisy in
    the tail, so every estimate is a median of ``blocks`` block means.
    Overflowing grid points are reported, not fatal.
    """
    z = np.asarray(samples, dtype=complex).ravel()
    t = np.asarray(tgrid, dtype=complex).ravel()
    t = t[np.abs(t) > 0]
    if z.size == 0 or t.size == 0:
        raise FixpointError("probe needs nonempty samples and a nonzero grid")
    eps = float(np.abs(t).max())
    failing = []
    c_hat = 0.0
    pair_estimates = {}
    for tv in t:
        pairing = tv.real * z.real + tv.imag * z.imag
        if pairing.max() > 700.0:
            failing.append(complex(tv))
            continue
        est = _median_of_means(np.exp(pairing), blocks)
        pair_estimates[complex(tv)] = est
        c_hat = max(c_hat, (np.log(est) - tv.real) / abs(tv) ** 2)
    pairing_ok = bool(pair_estimates) and all(
        est <= np.exp(tv.real + c_hat * abs(tv) ** 2) * (1 + 1e-9)
        for tv, est in pair_estimates.items()
    )
    modulus_ok = True
    checked = 0
    for tv in t:
        if abs(tv) * np.sqrt(2.0) > eps * (1 + 1e-12):
            continue
        magnitude = abs(tv) * np.abs(z)
        if magnitude.max() > 700.0:
            failing.append(complex(tv))
            continue
        est = _median_of_means(np.exp(magnitude), blocks)
        checked += 1
        if est > 4.0 * np.exp(abs(tv) + 2.0 * c_hat * abs(tv) ** 2):
            modulus_ok = False
    return ExpMomentReport(
        c_hat=float(c_hat),
        eps=eps,
        pairing_bound_ok=pairing_ok,
        modulus_bound_ok=modulus_ok,
        modulus_checked=checked,
        failing_t=failing,
        n_samples=z.size,
        n_blocks=blocks,
    )
