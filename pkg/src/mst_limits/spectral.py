"""Eigendata of the replacement dynamics of m-ary search trees.

The node-type dynamics acts on linear forms through an (m-1)x(m-1) matrix
whose characteristic polynomial is  prod_{k=1..m-1}(lambda + k) - m!.  The
root 1 always has the largest real part; the root with the second-largest
real part and positive imaginary part (written ``lambda2`` throughout)
drives the non-Gaussian regime and every downstream computation: martingale
normalizers, fixed-point exponents and the moment system.

Roots are located by a dense nonsymmetric eigensolver on the explicit
matrix and then polished by Newton iteration on the product form of the
characteristic polynomial, which is well conditioned for evaluation even
though the expanded coefficients are astronomically large.
"""

import math
from dataclasses import dataclass, field

import numpy as np

#: relative residual |chi(root)| / m! required after Newton polishing
RESIDUAL_TOL = 1e-12
#: tolerance for derived identities (duality, eigenform relations)
IDENTITY_TOL = 1e-10
#: double-precision products of (lambda + k) degrade beyond this branching factor
MAX_BRANCHING = 60

_NEWTON_MAX_ITER = 80


class SpectralError(ValueError):
    """Invalid parameters for a spectral computation."""


class RootPolishError(RuntimeError):
    """Newton polishing could not reach the residual tolerance."""

    def __init__(self, m, residuals):
        self.m = m
        self.residuals = residuals
        super().__init__(
            f"root polishing failed for m={m}: worst relative residual "
            f"{np.max(residuals):.3e} > {RESIDUAL_TOL:.1e}"
        )


class NoSecondEigenvalueError(ValueError):
    """No eigenvalue with positive imaginary part at the second-largest real part."""


def _check_m(m, minimum=2):
    if not isinstance(m, (int, np.integer)):
        raise SpectralError(f"branching factor must be an integer, got {m!r}")
    if m < minimum:
        raise SpectralError(f"branching factor must be >= {minimum}, got {m}")
    if m > MAX_BRANCHING:
        raise SpectralError(
            f"branching factor {m} exceeds the double-precision limit {MAX_BRANCHING}"
        )
    return int(m)


def replacement_matrix(m):
    """Row k holds the offspring increment of a type-k node (1-based types).

    Types 1..m-2 turn into the next type; a type-(m-1) node dies and spawns
    m fresh type-1 nodes.
    """
    m = _check_m(m)
    R = np.zeros((m - 1, m - 1), dtype=np.int64)
    for k in range(1, m - 1):
        R[k - 1, k - 1] = -1
        R[k - 1, k] = 1
    R[m - 2, 0] = m
    R[m - 2, m - 2] = -1
    return R


def generator_matrix(m):
    """Matrix of the dynamics restricted to linear forms: row k is k * row k of
    the replacement matrix."""
    m = _check_m(m)
    R = replacement_matrix(m).astype(float)
    return R * np.arange(1, m, dtype=float)[:, None]


def char_poly_eval(m, lam):
    """Evaluate prod_{k=1..m-1}(lam + k) - m! by the product form.

    Accepts scalar or array ``lam``; no Gamma-function evaluation is
    involved, so the result is well conditioned everywhere we need it.
    """
    m = _check_m(m)
    lam = np.asarray(lam, dtype=complex)
    prod = np.ones_like(lam)
    for k in range(1, m):
        prod = prod * (lam + k)
    out = prod - float(math.factorial(m))
    return complex(out) if out.ndim == 0 else out


def _char_poly_with_derivative(m, lam):
    # chi(lam) = P(lam) - m!,  chi'(lam) = P(lam) * sum 1/(lam+k)
    prod = 1.0 + 0.0j
    hsum = 0.0 + 0.0j
    for k in range(1, m):
        prod *= lam + k
        hsum += 1.0 / (lam + k)
    return prod - float(math.factorial(m)), prod * hsum


def newton_polish(m, root, tol=RESIDUAL_TOL):
    """Newton-refine one root of the characteristic polynomial.

    Returns (root, relative_residual); the caller decides whether the
    residual is acceptable.
    """
    m = _check_m(m)
    scale = float(math.factorial(m))
    lam = complex(root)
    best, best_resid = lam, abs(_char_poly_with_derivative(m, lam)[0]) / scale
    for _ in range(_NEWTON_MAX_ITER):
        f, fp = _char_poly_with_derivative(m, lam)
        resid = abs(f) / scale
        if resid < best_resid:
            best, best_resid = lam, resid
        if resid <= tol * 0.01 or fp == 0:
            break
        lam = lam - f / fp
    return best, best_resid


def eigenvalues(m):
    """All m-1 roots of the characteristic polynomial, sorted by
    (Re descending, Im descending).

    The roots come from a dense eigensolve of the explicit matrix and are
    polished by Newton iteration until |chi(root)|/m! <= 1e-12.
    """
    m = _check_m(m)
    raw = np.linalg.eigvals(generator_matrix(m))
    polished = np.empty(m - 1, dtype=complex)
    resids = np.empty(m - 1)
    for i, r in enumerate(raw):
        polished[i], resids[i] = newton_polish(m, r)
    if np.max(resids) > RESIDUAL_TOL:
        raise RootPolishError(m, resids)
    # polishing must not have merged two simple roots
    if m > 2:
        dist = np.abs(polished[:, None] - polished[None, :])
        np.fill_diagonal(dist, np.inf)
        if dist.min() < 1e-6:
            raise RootPolishError(m, resids)
    order = np.lexsort((-polished.imag, -polished.real))
    return polished[order]


def residuals(m, roots=None):
    """Relative residuals |chi(root)|/m! for the given (or computed) roots."""
    m = _check_m(m)
    if roots is None:
        roots = eigenvalues(m)
    scale = float(math.factorial(m))
    return np.abs(char_poly_eval(m, np.asarray(roots))) / scale


def lambda2_of(m):
    """The root with second-largest real part and positive imaginary part.

    Raises NoSecondEigenvalueError when that root is real (e.g. m=3, where
    the spectrum is {1, -4}).
    """
    m = _check_m(m, minimum=3)
    ev = eigenvalues(m)
    rest = ev[np.abs(ev - 1.0) > 1e-8]
    if rest.size == 0:
        raise NoSecondEigenvalueError(f"m={m}: no root besides 1")
    top = rest.real.max()
    ties = rest[np.abs(rest.real - top) < 1e-9]
    pos = ties[ties.imag > 0]
    if pos.size == 0:
        raise NoSecondEigenvalueError(
            f"m={m}: second-largest real part {top:.6f} carries no root "
            "with positive imaginary part"
        )
    return complex(pos[0])


def harmonic_sum(m, z):
    """H_m(z) = sum_{k=1..m-1} 1/(z+k)."""
    m = _check_m(m)
    z = complex(z)
    return sum(1.0 / (z + k) for k in range(1, m))


def complex_binomial(z, n):
    """binom(z, n) = z (z-1) ... (z-n+1) / n! for integer n >= 0.

    Computed by the falling product, never through Gamma ratios, so complex
    arguments take no branch cuts.
    """
    if n < 0:
        raise SpectralError(f"binomial order must be >= 0, got {n}")
    out = 1.0 + 0.0j
    z = complex(z)
    for j in range(n):
        out *= (z - j) / (j + 1)
    return out


def eigenform_coeffs(m, lam):
    """Coefficients of the eigenform attached to any eigenvalue: entry k is
    binom(lam+k-1, k-1), generated by the ratio b_{k+1} = b_k (lam+k)/k.

    The linear form sum_k b_k x_k satisfies the one-step identity of the
    dynamics exactly when lam is a root of the characteristic polynomial.
    """
    m = _check_m(m)
    lam = complex(lam)
    b = np.empty(m - 1, dtype=complex)
    b[0] = 1.0
    for k in range(1, m - 1):
        b[k] = b[k - 1] * (lam + k) / k
    return b


@dataclass
class SpectralData:
    """Eigendata attached to the roots 1 and lambda2.

    ``u1_coeffs``/``u2_coeffs`` are the coefficient vectors of the two
    eigenforms on type counts (u1 counts weighted gaps and grows by exactly
    one per insertion; u2 is the complex form whose projection is a
    martingale after normalization).  ``v1``/``v2`` are the dual vectors
    normalized so that u1(v1) = u2(v2) = 1 and the cross pairings vanish.
    """

    m: int
    eigenvalues: np.ndarray
    lambda2: complex
    sigma2: float
    u1_coeffs: np.ndarray
    u2_coeffs: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    hm1: float
    hm_lambda2: complex
    residuals: np.ndarray = field(repr=False, default=None)

    def u1(self, x):
        """Weighted gap count sum k * x_k (exact integer for integer input)."""
        x = np.asarray(x)
        return x @ self.u1_coeffs

    def u2(self, x):
        """Complex eigenform sum binom(lambda2+k-1, k-1) * x_k."""
        x = np.asarray(x)
        return x @ self.u2_coeffs


def eigen_data(m):
    """Fully populated :class:`SpectralData` for branching factor m >= 4."""
    m = _check_m(m, minimum=4)
    ev = eigenvalues(m)
    lam2 = lambda2_of(m)
    ks = np.arange(1, m)

    # rising recurrence b_{k+1} = b_k (lambda2 + k)/k ; b_1 = 1
    b = np.empty(m - 1, dtype=complex)
    b[0] = 1.0
    for k in range(1, m - 1):
        b[k] = b[k - 1] * (lam2 + k) / k
    # binom(lambda2+k, k) = b_{k+1} extended one step past the table
    b_next = np.empty(m - 1, dtype=complex)
    b_next[: m - 2] = b[1:]
    b_next[m - 2] = b[m - 2] * (lam2 + m - 1) / (m - 1)

    hm1 = float(np.sum(1.0 / (1.0 + ks)))
    hml = complex(np.sum(1.0 / (lam2 + ks)))

    v1 = 1.0 / (hm1 * ks * (ks + 1))
    v2 = 1.0 / (hml * ks * b_next)

    return SpectralData(
        m=m,
        eigenvalues=ev,
        lambda2=lam2,
        sigma2=lam2.real,
        u1_coeffs=ks.astype(np.int64),
        u2_coeffs=b,
        v1=v1,
        v2=v2,
        hm1=hm1,
        hm_lambda2=hml,
        residuals=residuals(m, ev),
    )
