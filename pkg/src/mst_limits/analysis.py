"""Density, support and characteristic-function diagnostics for the complex
limit law.

``psi_profile`` measures the radial maximum modulus of the empirical
characteristic function (strictly below 1 away from the origin and decaying
at infinity for the genuinely two-dimensional laws).  ``support_coverage``
maps which annular sectors of a disc the samples reach.  ``spiral_density``
constructs explicit witnesses for the density of {m^n e^(-lambda2 t)} in
the unit disc, the geometric mechanism behind full support.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import stats


class AnalysisError(ValueError):
    """Invalid parameters for a diagnostic computation."""


class UninformativeProfileError(AnalysisError):
    """No resolvable decay window between full modulus and the noise floor."""


@dataclass
class PsiProfile:
    """psi_hat(r) = max over the angle grid of |phi_hat(t)| at |t| = r.

    The max over a finite angle grid lower-bounds the true radial max.  The
    noise floor is calibrated by phase-randomized surrogates: multiplying
    each sample's contribution by an independent random phase nulls the
    true characteristic function while keeping the grid correlation
    structure, so the surrogate maxima measure pure estimation noise
    (~ sqrt(log n_angles / n_samples)).
    """

    radii: np.ndarray
    psi_hat: np.ndarray
    n_samples: int
    n_angles: int
    noise: float
    cf_abs: np.ndarray = field(repr=False, default=None)
    fit_exponent: float = None
    fit_window: tuple = None


def psi_profile(points, radii, n_angles=64, rng=None, surrogate_reps=4, fit=True):
    """Empirical radial profile of the characteristic function.

    Fits the decay exponent a_hat (psi ~ r^(-a_hat)) by least squares on
    the largest log-decade of radii that sit above three times the noise
    floor; raises :class:`UninformativeProfileError` when no such window
    exists.
    """
    z = np.asarray(points, dtype=complex).ravel()
    radii = np.asarray(radii, dtype=float)
    if z.size == 0 or radii.size == 0:
        raise AnalysisError("need samples and radii")
    if np.any(radii < 0):
        raise AnalysisError("radii must be >= 0")
    if rng is None:
        rng = np.random.default_rng()
    angles = np.arange(n_angles) * (2 * np.pi / n_angles)
    tgrid = radii[:, None] * np.exp(1j * angles)[None, :]
    cf = stats.empirical_cf(z, tgrid)
    cf_abs = np.abs(cf)
    psi = cf_abs.max(axis=1)

    # phase-randomized surrogates: same grid, nulled target
    rep_maxima = []
    for _ in range(surrogate_reps):
        phase = rng.uniform(0.0, 2 * np.pi, z.size)
        cfn = _phase_randomized_cf(z, phase, tgrid)
        rep_maxima.append(np.abs(cfn).max())
    rep_maxima = np.array(rep_maxima)
    noise = float(rep_maxima.mean() + 2.0 * rep_maxima.std())

    fit_exponent = None
    window = None
    if fit:
        usable = (radii > 0) & (psi > 3.0 * noise)
        if not np.any(usable):
            raise UninformativeProfileError(
                "every positive radius sits at or below the noise floor"
            )
        r_hi = radii[usable].max()
        sel = usable & (radii >= r_hi / 10.0) & (radii <= r_hi)
        if sel.sum() < 2:
            raise UninformativeProfileError(
                "fewer than two resolvable radii in the top decade"
            )
        lx = np.log(radii[sel])
        ly = np.log(psi[sel])
        slope, _ = np.polyfit(lx, ly, 1)
        fit_exponent = float(-slope)
        window = (float(radii[sel].min()), float(r_hi))
    return PsiProfile(
        radii=radii,
        psi_hat=psi,
        n_samples=z.size,
        n_angles=n_angles,
        noise=noise,
        cf_abs=cf_abs,
        fit_exponent=fit_exponent,
        fit_window=window,
    )


def _phase_randomized_cf(z, phase, tgrid, chunk=65536):
    t = np.asarray(tgrid, dtype=complex)
    tq = np.column_stack([t.real.ravel(), t.imag.ravel()])
    acc_re = np.zeros(tq.shape[0])
    acc_im = np.zeros(tq.shape[0])
    for lo in range(0, z.size, chunk):
        blk = z[lo : lo + chunk]
        ph = np.column_stack([blk.real, blk.imag]) @ tq.T + phase[lo : lo + chunk, None]
        acc_re += np.cos(ph).sum(axis=0)
        acc_im += np.sin(ph).sum(axis=0)
    return ((acc_re + 1j * acc_im) / z.size).reshape(t.shape)


@dataclass
class SupportMap:
    """Occupancy of equal-area annular sectors inside |z| <= rmax."""

    counts: np.ndarray
    annuli_edges: np.ndarray
    n_sectors: int
    rmax: float
    occupancy: float
    n_inside: int
    n_total: int


def support_coverage(points, n_annuli=8, n_sectors=16, rmax=2.0):
    """Histogram the samples over equal-area annuli x uniform sectors.

    Equal-area annuli (edges rmax * sqrt(i/n)) keep the expected counts
    flat for a locally flat density, so the occupancy fraction is an honest
    full-support diagnostic.
    """
    z = np.asarray(points, dtype=complex).ravel()
    if z.size == 0:
        raise AnalysisError("need a nonempty pool")
    if n_annuli < 1 or n_sectors < 1 or rmax <= 0:
        raise AnalysisError("need n_annuli, n_sectors >= 1 and rmax > 0")
    edges = rmax * np.sqrt(np.arange(n_annuli + 1) / n_annuli)
    r = np.abs(z)
    inside = r <= rmax
    zi = z[inside]
    ri = np.clip(np.searchsorted(edges, np.abs(zi), side="right") - 1, 0, n_annuli - 1)
    si = (np.angle(zi) % (2 * np.pi) / (2 * np.pi / n_sectors)).astype(int) % n_sectors
    counts = np.zeros((n_annuli, n_sectors), dtype=np.int64)
    np.add.at(counts, (ri, si), 1)
    return SupportMap(
        counts=counts,
        annuli_edges=edges,
        n_sectors=n_sectors,
        rmax=float(rmax),
        occupancy=float((counts > 0).mean()),
        n_inside=int(inside.sum()),
        n_total=z.size,
    )


@dataclass
class SpiralWitness:
    target: complex
    found: bool
    n: int
    k: int
    t: float
    point: complex
    distance: float
    pairs_checked: int
    best_distance: float


def spiral_density(m, lambda2, targets, eps=1e-2, budget=10**6, k_window=2):
    """Witnesses |m^n e^(-lambda2 t) - z| <= eps for targets in the unit disc.

    Writing z = |z| e^(i theta), the time t = (2 k pi - theta)/tau matches
    the spiral's angle to the target exactly, so the search reduces to the
    one-dimensional lattice n log m - k (2 pi sigma / tau) approximating
    log |z| (sigma, tau the real and imaginary parts of the exponent).
    Candidates are scanned in increasing n, then k around the lattice
    prediction; the first witness wins.  Budget counts (n, k) pairs per
    target; exhausting it reports the best distance found, which bounds
    nothing about the true (dense) orbit closure.
    """
    lam2 = complex(lambda2)
    sigma, tau = lam2.real, lam2.imag
    if tau <= 0:
        raise AnalysisError("exponent needs a positive imaginary part")
    if eps <= 0:
        raise AnalysisError("eps must be positive")
    logm = math.log(m)
    out = []
    for z in np.atleast_1d(np.asarray(targets, dtype=complex)):
        z = complex(z)
        if abs(z) >= 1:
            raise AnalysisError(f"target {z} outside the open unit disc")
        theta = math.atan2(z.imag, z.real)
        magnitude = abs(z)
        log_target = math.log(magnitude) if magnitude > 0 else -math.inf
        best = (math.inf, None)
        checked = 0
        found = None
        n = 0
        while checked < budget and found is None:
            if math.isinf(log_target):
                # a deep spiral point lands within eps of the origin
                t_needed = -math.log(eps / 2.0) / sigma
                k = max(0, math.ceil(tau * t_needed / (2 * math.pi)))
                t = (2 * k * math.pi - theta) / tau
                checked += 1
                point = math.exp(-sigma * t) * complex(math.cos(theta), math.sin(theta))
                dist = abs(point - z)
                if dist <= eps:
                    found = (0, k, t, point, dist)
                break
            k_center = (tau * (n * logm - log_target) / sigma + theta) / (2 * math.pi)
            for k in range(
                max(0, round(k_center) - k_window), round(k_center) + k_window + 1
            ):
                t = (2 * k * math.pi - theta) / tau
                if t < 0:
                    continue
                checked += 1
                log_mag = n * logm - sigma * t
                point = math.exp(log_mag) * complex(math.cos(theta), math.sin(theta))
                dist = abs(point - z)
                if dist < best[0]:
                    best = (dist, (n, k, t, point))
                if dist <= eps:
                    found = (n, k, t, point, dist)
                    break
                if checked >= budget:
                    break
            n += 1
        if found is not None:
            n_w, k_w, t_w, point, dist = found
            out.append(
                SpiralWitness(z, True, n_w, k_w, t_w, point, dist, checked, dist)
            )
        else:
            bn = best[1]
            nan_point = complex(float("nan"), float("nan"))
            out.append(
                SpiralWitness(
                    z,
                    False,
                    bn[0] if bn else -1,
                    bn[1] if bn else -1,
                    bn[2] if bn else float("nan"),
                    bn[3] if bn else nan_point,
                    best[0],
                    checked,
                    best[0],
                )
            )
    return out


def verify_witness(m, lambda2, witness, digits=50):
    """Recompute |m^n e^(-lambda2 t) - target| in high precision.

    An independent check of the float search path: evaluates the spiral
    point with mpmath at the given number of digits.
    """
    import mpmath

    with mpmath.workdps(digits):
        lam = mpmath.mpc(complex(lambda2).real, complex(lambda2).imag)
        expo = witness.n * mpmath.log(m) - lam * mpmath.mpf(witness.t)
        point = mpmath.exp(expo)
        tgt = mpmath.mpc(witness.target.real, witness.target.imag)
        return float(mpmath.fabs(point - tgt))
