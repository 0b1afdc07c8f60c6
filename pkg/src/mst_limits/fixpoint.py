"""The smoothing fixed-point equation Z =law= exp(-lambda*T) (Z1+...+Zm).

T is the total lifetime of one full type cycle: a sum of independent
exponentials with rates 1..m-1, equivalently -log of a Beta(1, m-1)
variable.  Three solvers approximate the fixed point:

* population dynamics (``apply_K`` / ``iterate_to_fixpoint``): resample a
  pool of complex values through the smoothing map;
* a deterministic characteristic-function iteration on a log-polar grid
  (``char_iteration``), with an analytic second-order patch below the
  smallest radius;
* the weighted-replication cascade in :mod:`mst_limits.cascade`.

The characteristic-function metric sup |phi - psi| / |t|^2 over a grid
(``d2star``) quantifies contraction; the exact contraction constant of the
map is m * laplace_T(m, 2 Re lambda).
"""

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import stats


class FixpointError(ValueError):
    """Invalid state or parameters for a fixed-point computation."""


class DivergentTransformError(FixpointError):
    """Laplace transform of T requested at Re(lambda) <= -1."""


class GridOverflowError(FixpointError):
    """Characteristic-function grid queried above its largest radius."""


class ContractionWarning(UserWarning):
    """No contraction guarantee for the requested exponent."""


_MODES = ("sum-of-exponentials", "beta-inverse")


@dataclass
class TSampler:
    """Sampler for the cycle lifetime T with density
    (m-1) e^{-u} (1-e^{-u})^{m-2} on u > 0."""

    m: int
    mode: str = "beta-inverse"

    def __post_init__(self):
        if self.m < 2:
            raise FixpointError(f"branching factor must be >= 2, got {self.m}")
        if self.mode not in _MODES:
            raise FixpointError(f"mode must be one of {_MODES}, got {self.mode!r}")

    def sample(self, rng, size=None):
        return sample_T(self, rng, size=size)


def sample_T(sampler, rng, size=None):
    """Draw from the cycle-lifetime law.

    ``sum-of-exponentials`` adds independent Exp(j) draws for j = 1..m-1;
    ``beta-inverse`` maps one uniform through -log(1 - U^{1/(m-1)}), the
    inverse-CDF route via the Beta(1, m-1) law of e^{-T}.
    """
    m = sampler.m
    if sampler.mode == "sum-of-exponentials":
        shape = (m - 1,) if size is None else (m - 1,) + tuple(np.atleast_1d(size))
        rates = np.arange(1, m, dtype=float).reshape((m - 1,) + (1,) * (len(shape) - 1))
        out = (rng.standard_exponential(shape) / rates).sum(axis=0)
        return float(out) if size is None else out
    u = rng.random(size)
    out = -np.log(-np.expm1(np.log(u) / (m - 1)))
    return float(out) if size is None else out


def laplace_T(m, lam):
    """E e^{-lambda T} = (m-1)! / prod_{k=1..m-1}(lambda + k), Re(lambda) > -1."""
    if m < 2:
        raise FixpointError(f"branching factor must be >= 2, got {m}")
    lam = complex(lam)
    if lam.real <= -1.0:
        raise DivergentTransformError(
            f"transform diverges for Re(lambda) = {lam.real} <= -1"
        )
    prod = 1.0 + 0.0j
    for k in range(1, m):
        prod *= lam + k
    out = float(math.factorial(m - 1)) / prod
    return out.real if lam.imag == 0 else out


def laplace_T_rational(m, lam):
    """Exact rational value of the transform at integer lambda >= 0."""
    lam = int(lam)
    if lam < 0:
        raise FixpointError("rational evaluation needs integer lambda >= 0")
    den = 1
    for k in range(1, m):
        den *= lam + k
    return Fraction(math.factorial(m - 1), den)


def contraction_constant(m, lam):
    """m * E e^{-2 Re(lambda) T}: the contraction factor of the smoothing map
    on second-moment laws; < 1 exactly when Re(lambda) > 1/2."""
    return m * laplace_T(m, 2.0 * complex(lam).real)


@dataclass
class SamplePool:
    """Empirical distribution under smoothing-map iteration."""

    m: int
    lam: complex
    points: np.ndarray
    generation: int = 0
    target_mean: complex = 1.0 + 0.0j

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex).ravel()
        if self.points.size == 0:
            raise FixpointError("sample pool must be nonempty")
        if not np.all(np.isfinite(self.points)):
            raise FixpointError("sample pool contains non-finite entries")
        self.lam = complex(self.lam)
        self.target_mean = complex(self.target_mean)

    def mean(self):
        return complex(self.points.mean())

    def second_central_moment(self):
        """E |Z - EZ|^2 of the pool."""
        return float(np.mean(np.abs(self.points - self.points.mean()) ** 2))


def apply_K(pool, variant="ct", rng=None, sampler=None):
    """One smoothing-map generation by resampling with replacement.

    ``ct``: each new point is exp(-lambda*T) times the sum of m uniform
    picks from the pool, with a fresh T per point.  ``dt``: each new point
    is sum_k V_k^lambda * Z^(k) where V_1..V_m are the spacings of m-1
    independent uniforms on [0, 1].  Complex powers of the positive weights
    use the principal logarithm.
    """
    if rng is None:
        rng = np.random.default_rng()
    if variant not in ("ct", "dt"):
        raise FixpointError(f"variant must be 'ct' or 'dt', got {variant!r}")
    m, lam = pool.m, pool.lam
    n = pool.points.size
    picks = pool.points[rng.integers(0, n, size=(n, m))]
    if variant == "ct":
        if sampler is None:
            sampler = TSampler(m)
        t = sampler.sample(rng, size=n)
        new_points = np.exp(-lam * t) * picks.sum(axis=1)
    else:
        u = np.sort(rng.random((n, m - 1)), axis=1)
        v = np.empty((n, m))
        v[:, 0] = u[:, 0]
        v[:, 1:-1] = np.diff(u, axis=1)
        v[:, -1] = 1.0 - u[:, -1]
        with np.errstate(divide="ignore"):
            logv = np.log(v)
        weights = np.exp(lam * logv)
        weights[v == 0.0] = 0.0  # spacing ties have probability zero anyway
        new_points = (weights * picks).sum(axis=1)
    return SamplePool(
        m=m,
        lam=lam,
        points=new_points,
        generation=pool.generation + 1,
        target_mean=pool.target_mean,
    )


def default_d2star_grid(rmin=0.1, rmax=10.0, n_radii=16, n_angles=16):
    """Geometric radii times uniform angles; excludes the origin, where the
    metric's weight 1/|t|^2 blows up."""
    radii = np.geomspace(rmin, rmax, n_radii)
    angles = np.arange(n_angles) * (2 * np.pi / n_angles)
    return (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()


def d2star(pool_a, pool_b, tgrid=None):
    """max over the grid of |phi_a(t) - phi_b(t)| / |t|^2 between empirical
    characteristic functions.

    A lower bound for the true supremum; the grid must stay away from 0
    (a deterministic shift delta makes the small-t behavior ~ |delta|/|t|).
    """
    if tgrid is None:
        tgrid = default_d2star_grid()
    tgrid = np.asarray(tgrid, dtype=complex).ravel()
    if np.any(tgrid == 0):
        raise FixpointError("d2star grid must exclude the origin")
    pa = pool_a.points if isinstance(pool_a, SamplePool) else np.asarray(pool_a)
    pb = pool_b.points if isinstance(pool_b, SamplePool) else np.asarray(pool_b)
    if isinstance(pool_a, SamplePool) and isinstance(pool_b, SamplePool):
        if pool_a.target_mean != pool_b.target_mean:
            raise FixpointError("pools must share the target mean")
    ca = stats.empirical_cf(pa, tgrid)
    cb = stats.empirical_cf(pb, tgrid)
    return float(np.max(np.abs(ca - cb) / np.abs(tgrid) ** 2))


@dataclass
class FixpointDiagnostics:
    means: np.ndarray
    variances: np.ndarray
    d2star_steps: np.ndarray
    contraction: float
    contracting: bool
    d2star_sample: int


def iterate_to_fixpoint(
    m,
    lam,
    pool_size,
    iters,
    C=1.0,
    seed=None,
    rng=None,
    variant="ct",
    sampler_mode="beta-inverse",
    d2star_grid=None,
    d2star_subsample=20000,
    track_d2star=True,
):
    """Iterate the smoothing map from N copies of C.

    Records the pool mean and central second moment per generation and,
    optionally, the grid metric between consecutive empirical
    characteristic functions (on a fixed-size subsample of the pool).
    Warns when m * laplace_T(m, 2 Re lambda) >= 1, where no contraction is
    guaranteed.
    """
    if pool_size < 1 or iters < 0:
        raise FixpointError("need pool_size >= 1 and iters >= 0")
    if rng is None:
        rng = np.random.default_rng(seed)
    lam = complex(lam)
    kappa = contraction_constant(m, lam)
    contracting = kappa < 1.0
    if not contracting:
        warnings.warn(
            f"m*E|A|^2 = {kappa:.4f} >= 1 at Re(lambda) = {lam.real}: "
            "no contraction guarantee",
            ContractionWarning,
            stacklevel=2,
        )
    sampler = TSampler(m, sampler_mode)
    pool = SamplePool(
        m=m,
        lam=lam,
        points=np.full(pool_size, complex(C)),
        generation=0,
        target_mean=complex(C),
    )
    if d2star_grid is None:
        d2star_grid = default_d2star_grid()
    d2star_grid = np.asarray(d2star_grid, dtype=complex).ravel()
    k_sub = min(d2star_subsample, pool_size)

    means = [pool.mean()]
    variances = [pool.second_central_moment()]
    steps = []
    prev_cf = stats.empirical_cf(pool.points[:k_sub], d2star_grid) if track_d2star else None
    for _ in range(iters):
        pool = apply_K(pool, variant=variant, rng=rng, sampler=sampler)
        means.append(pool.mean())
        variances.append(pool.second_central_moment())
        if track_d2star:
            cur_cf = stats.empirical_cf(pool.points[:k_sub], d2star_grid)
            steps.append(
                float(np.max(np.abs(cur_cf - prev_cf) / np.abs(d2star_grid) ** 2))
            )
            prev_cf = cur_cf
    diags = FixpointDiagnostics(
        means=np.array(means),
        variances=np.array(variances),
        d2star_steps=np.array(steps),
        contraction=float(kappa),
        contracting=contracting,
        d2star_sample=k_sub,
    )
    return pool, diags


@dataclass
class CharGrid:
    """Characteristic-function values on a log-polar grid.

    Radii are geometric, angles uniform; below ``radii[0]`` evaluations use
    the analytic patch exp(i<t, mean> - q(t)) with q the quadratic form
    fitted to the innermost rows.
    """

    radii: np.ndarray
    angles: np.ndarray
    values: np.ndarray
    mean: complex
    patch_coeffs: np.ndarray = field(default=None, repr=False)

    @property
    def tpoints(self):
        return self.radii[:, None] * np.exp(1j * self.angles)[None, :]

    def _fit_patch(self):
        """Least-squares fit of -log|phi| by a quadratic form on the two
        innermost radius rows."""
        t = self.tpoints[:2].ravel()
        mag = np.abs(self.values[:2]).ravel()
        mag = np.clip(mag, 1e-300, None)
        target = -np.log(mag)
        design = np.column_stack([t.real**2, t.real * t.imag, t.imag**2])
        coeffs, *_ = np.linalg.lstsq(design, target, rcond=None)
        self.patch_coeffs = coeffs
        return coeffs

    def _patch_eval(self, tpoints):
        if self.patch_coeffs is None:
            self._fit_patch()
        a, b, c = self.patch_coeffs
        t1, t2 = tpoints.real, tpoints.imag
        q = np.maximum(a * t1**2 + b * t1 * t2 + c * t2**2, 0.0)
        pairing = t1 * self.mean.real + t2 * self.mean.imag
        return np.exp(1j * pairing - q)

    def evaluate(self, tpoints):
        """Evaluate by bilinear interpolation in (log r, angle), analytic
        patch below the smallest radius; raises above the largest."""
        t = np.asarray(tpoints, dtype=complex)
        shape = t.shape
        t = t.ravel()
        out = np.empty(t.size, dtype=complex)
        r = np.abs(t)
        over = r > self.radii[-1] * (1 + 1e-12)
        if np.any(over):
            raise GridOverflowError(
                f"query radius {r.max():.4g} exceeds grid maximum {self.radii[-1]:.4g}"
            )
        small = r < self.radii[0]
        if np.any(small):
            out[small] = self._patch_eval(t[small])
        rest = ~small
        if np.any(rest):
            out[rest] = self._interp(t[rest])
        return out.reshape(shape)

    def _interp(self, t):
        log_r = np.log(np.abs(t))
        theta = np.angle(t) % (2 * np.pi)
        lr0 = np.log(self.radii[0])
        dlr = np.log(self.radii[1]) - lr0 if self.radii.size > 1 else 1.0
        fi = np.clip((log_r - lr0) / dlr, 0.0, self.radii.size - 1 - 1e-12)
        i0 = fi.astype(int)
        fr = fi - i0
        i1 = np.minimum(i0 + 1, self.radii.size - 1)
        ntheta = self.angles.size
        dth = 2 * np.pi / ntheta
        fj = theta / dth
        j0 = fj.astype(int) % ntheta
        ft = fj - np.floor(fj)
        j1 = (j0 + 1) % ntheta
        v = self.values
        return (
            v[i0, j0] * (1 - fr) * (1 - ft)
            + v[i1, j0] * fr * (1 - ft)
            + v[i0, j1] * (1 - fr) * ft
            + v[i1, j1] * fr * ft
        )


def make_char_grid(rmin=0.05, rmax=10.0, n_radii=48, n_angles=32, C=1.0):
    """Initial grid loaded with exp(i<t,C> - |t|^2), a valid mean-C
    characteristic function."""
    if rmin <= 0 or rmax <= rmin:
        raise FixpointError("need 0 < rmin < rmax")
    radii = np.geomspace(rmin, rmax, n_radii)
    angles = np.arange(n_angles) * (2 * np.pi / n_angles)
    t = radii[:, None] * np.exp(1j * angles)[None, :]
    C = complex(C)
    pairing = t.real * C.real + t.imag * C.imag
    values = np.exp(1j * pairing - np.abs(t) ** 2)
    grid = CharGrid(radii=radii, angles=angles, values=values, mean=C)
    grid._fit_patch()
    return grid


def char_iteration(m, lam, grid, iters=100, quad_order=64):
    """Deterministic fixed-point iteration of the characteristic function:

        phi_{n+1}(t) = integral_0^1 (m-1)(1-s)^{m-2} phi_n^m(t * s^conj(lam)) ds

    by Gauss-Legendre quadrature of the given order (weights renormalized
    to unit mass so |phi| <= 1 is preserved exactly).  Off-grid evaluations
    use bilinear interpolation in (log r, angle); arguments falling below
    the smallest radius use the analytic small-t patch refit from the
    innermost rows at every sweep.
    """
    if iters < 0 or quad_order < 2:
        raise FixpointError("need iters >= 0 and quad_order >= 2")
    lam = complex(lam)
    nodes, wts = np.polynomial.legendre.leggauss(quad_order)
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * wts * (m - 1) * (1.0 - s) ** (m - 2)
    w = w / w.sum()
    factors = np.exp(np.conj(lam) * np.log(s))  # s^conj(lam), s in (0,1)

    t_flat = grid.tpoints.ravel()
    shape = grid.values.shape
    for _ in range(iters):
        grid._fit_patch()
        args = t_flat[:, None] * factors[None, :]
        vals = grid.evaluate(args)
        new_vals = (w[None, :] * vals**m).sum(axis=1)
        grid = CharGrid(
            radii=grid.radii,
            angles=grid.angles,
            values=new_vals.reshape(shape),
            mean=grid.mean,
            patch_coeffs=grid.patch_coeffs,
        )
    grid._fit_patch()
    return grid
