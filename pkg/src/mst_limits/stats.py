"""Shared statistical machinery: empirical characteristic functions, the
two-sample energy permutation test, and deterministic seed substreams.

The energy test works on complex samples viewed as points of the plane.  It
is built for a single-core, memory-tight box: the pooled distance matrix is
assembled blockwise in float32 and every permutation statistic is obtained
from one matrix-vector product, so a 10^4-vs-10^4 test with a few hundred
permutations stays in the seconds-to-a-minute range.
"""

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.stats


def seed_substream(master_seed, label):
    """Deterministic generator for a named task.

    The label is hashed (blake2s, stable across platforms and processes)
    and combined with the master seed, so adding tasks never perturbs the
    streams of existing ones.
    """
    digest = hashlib.blake2s(str(label).encode("utf-8"), digest_size=8).digest()
    child = int.from_bytes(digest, "little")
    return np.random.default_rng(np.random.SeedSequence([int(master_seed) & (2**64 - 1), child]))


def as_plane(z):
    """Complex samples as an (N, 2) float array."""
    z = np.asarray(z, dtype=complex).ravel()
    return np.column_stack([z.real, z.imag])


def empirical_cf(points, tpoints, chunk=65536):
    """phi_hat(t) = mean_j exp(i <t, z_j>) with <x, y> = Re(x)Re(y) + Im(x)Im(y).

    ``points`` and ``tpoints`` are complex arrays; the result has the shape
    of ``tpoints``.  Evaluation is chunked over the sample axis, with the
    real and imaginary accumulators kept separate (much faster than complex
    exponentials).
    """
    z = np.asarray(points, dtype=complex).ravel()
    t = np.asarray(tpoints, dtype=complex)
    tq = np.column_stack([t.real.ravel(), t.imag.ravel()])
    acc_re = np.zeros(tq.shape[0])
    acc_im = np.zeros(tq.shape[0])
    for lo in range(0, z.size, chunk):
        blk = z[lo : lo + chunk]
        phase = np.column_stack([blk.real, blk.imag]) @ tq.T
        acc_re += np.cos(phase).sum(axis=0)
        acc_im += np.sin(phase).sum(axis=0)
    return ((acc_re + 1j * acc_im) / z.size).reshape(t.shape)


def _distance_matrix_f32(xy, block=2048):
    """Pairwise Euclidean distances in float32, assembled by row blocks."""
    n = xy.shape[0]
    sq = (xy**2).sum(axis=1)
    out = np.empty((n, n), dtype=np.float32)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (xy[lo:hi] @ xy.T)
        np.maximum(d2, 0.0, out=d2)
        out[lo:hi] = np.sqrt(d2).astype(np.float32)
    return out


@dataclass
class EnergyTestResult:
    statistic: float
    p_value: float
    n_x: int
    n_y: int
    n_permutations: int


def energy_statistic(x, y):
    """Plain two-sample energy distance 2 E|X-Y| - E|X-X'| - E|Y-Y'|."""
    xy = as_plane(x)
    yz = as_plane(y)
    dxy = np.sqrt(((xy[:, None, :] - yz[None, :, :]) ** 2).sum(2))
    dxx = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(2))
    dyy = np.sqrt(((yz[:, None, :] - yz[None, :, :]) ** 2).sum(2))
    return float(2 * dxy.mean() - dxx.mean() - dyy.mean())


def energy_test(x, y, n_permutations=999, rng=None, perm_batch=128):
    """Two-sample energy permutation test on the plane.

    Group labels are permuted; each permuted statistic comes from one
    D @ z product against the pooled float32 distance matrix, batched into
    a single sgemm per ``perm_batch`` permutations.  The p-value uses the
    add-one rule, so its granularity is 1/(n_permutations+1).
    """
    if rng is None:
        rng = np.random.default_rng()
    xp = as_plane(x)
    yp = as_plane(y)
    n, m = xp.shape[0], yp.shape[0]
    if n == 0 or m == 0:
        raise ValueError("energy test needs nonempty samples")
    pooled = np.vstack([xp, yp])
    D = _distance_matrix_f32(pooled)
    total = pooled.shape[0]

    rowsum = D @ np.ones(total, dtype=np.float32)
    s_tot = float(rowsum.sum(dtype=np.float64))

    def stat_from_indicator(zcols):
        # zcols: (total, B) 0/1 float32, column = membership of group x
        v = D @ zcols
        s_xx = np.einsum("ij,ij->j", zcols, v, dtype=np.float64)
        s_x1 = zcols.T.astype(np.float64) @ rowsum.astype(np.float64)
        s_xy = s_x1 - s_xx
        s_yy = s_tot - 2.0 * s_x1 + s_xx
        return 2.0 * s_xy / (n * m) - s_xx / (n * n) - s_yy / (m * m)

    z0 = np.zeros((total, 1), dtype=np.float32)
    z0[:n, 0] = 1.0
    observed = float(stat_from_indicator(z0)[0])

    exceed = 0
    done = 0
    while done < n_permutations:
        b = min(perm_batch, n_permutations - done)
        cols = np.zeros((total, b), dtype=np.float32)
        for j in range(b):
            idx = rng.permutation(total)[:n]
            cols[idx, j] = 1.0
        stats = stat_from_indicator(cols)
        exceed += int(np.sum(stats >= observed))
        done += b
    p = (1.0 + exceed) / (n_permutations + 1.0)
    return EnergyTestResult(observed, p, n, m, n_permutations)


def ks_exponential(samples):
    """One-sample Kolmogorov-Smirnov test against the unit exponential."""
    res = scipy.stats.kstest(np.asarray(samples, dtype=float), "expon")
    return float(res.statistic), float(res.pvalue)


def ks_two_sample(a, b):
    res = scipy.stats.ks_2samp(np.asarray(a, float), np.asarray(b, float))
    return float(res.statistic), float(res.pvalue)


def chi_square_two_sample(counts_a, counts_b):
    """Homogeneity chi-square for two count vectors over shared categories.

    Categories empty in both samples are dropped; categories with tiny
    pooled counts are merged into their neighbor to keep the asymptotics
    honest.
    """
    a = np.asarray(counts_a, dtype=np.int64)
    b = np.asarray(counts_b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError("count vectors must share categories")
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    # merge pooled counts < 5 into the previous kept category
    cats_a, cats_b = [], []
    for ai, bi in zip(a, b):
        if cats_a and (cats_a[-1] + cats_b[-1]) < 5:
            cats_a[-1] += ai
            cats_b[-1] += bi
        else:
            cats_a.append(int(ai))
            cats_b.append(int(bi))
    table = np.array([cats_a, cats_b])
    if table.shape[1] < 2:
        return 0.0, 1.0
    stat, p, _, _ = scipy.stats.chi2_contingency(table, correction=False)
    return float(stat), float(p)
