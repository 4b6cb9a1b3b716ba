"""Truncated secular equation for the delta and delta' channel models.

An even (delta) or odd (delta') mode expansion

    f(x, y) = sum_n c_n exp(-kappa_n |x|) psi_n(y),   kappa_n = sqrt(n + 1/2 - eps)

turns the interface condition at x = 0 into a symmetric Jacobi matrix
equation B(eps) c = 0:

    delta(lam):      B = diag(kappa_n) + (lam / 2) Y
    delta'(beta):    B = beta diag(kappa_n) + 2 Y

with Y the tridiagonal position matrix of the oscillator basis.  Every
eigenvalue of B(eps) decreases strictly in eps, so the number of negative
eigenvalues (read off from the LDL^T pivots) is a monotone counter of the
roots below eps.  All root finding is done in the depth variable
mu = 1/2 - eps to keep relative precision for weakly bound states.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import ConsistencyError, ConvergenceError, DomainError, ThresholdNotFound
from .oscillator import SQRT2, position_offdiagonal

CRITICAL_DELTA = SQRT2
CRITICAL_DELTA_PRIME = 2.0 * SQRT2
# eps is never evaluated closer to 1/2 than this; kappa_0 -> 0 there
DEFAULT_EDGE = 1e-8
THRESHOLD = 0.5

DELTA = "delta"
DELTA_PRIME = "delta-prime"
KINDS = (DELTA, DELTA_PRIME)


@dataclass(frozen=True)
class CouplingVariant:
    """Interaction type and its strength (lam for delta, beta for delta')."""

    kind: str
    strength: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown coupling kind {self.kind!r}")
        s = float(self.strength)
        if not math.isfinite(s):
            raise ValueError("coupling strength must be finite")
        if self.kind == DELTA and s < 0:
            raise ValueError(f"lam must be >= 0, got {s}")
        if self.kind == DELTA_PRIME and s <= 0:
            raise ValueError(f"beta must be > 0, got {s}")
        object.__setattr__(self, "strength", s)

    @property
    def critical(self):
        return CRITICAL_DELTA if self.kind == DELTA else CRITICAL_DELTA_PRIME

    @property
    def subcritical(self):
        if self.kind == DELTA:
            return self.strength < CRITICAL_DELTA
        return self.strength > CRITICAL_DELTA_PRIME

    @property
    def diagonal_scale(self):
        return 1.0 if self.kind == DELTA else self.strength

    @property
    def coupling_scale(self):
        return 0.5 * self.strength if self.kind == DELTA else 2.0

    def label(self):
        sym = "lam" if self.kind == DELTA else "beta"
        return f"{self.kind}({sym}={self.strength:.12g})"


def delta(lam):
    return CouplingVariant(DELTA, lam)


def delta_prime(beta):
    return CouplingVariant(DELTA_PRIME, beta)


@dataclass(frozen=True)
class SymTridiagonal:
    """Symmetric tridiagonal matrix stored as diagonal ``d`` and off-diagonal ``e``."""

    d: np.ndarray
    e: np.ndarray

    @property
    def size(self):
        return self.d.size

    def toarray(self):
        return np.diag(self.d) + np.diag(self.e, 1) + np.diag(self.e, -1)

    def matvec(self, x):
        y = self.d * x
        y[:-1] += self.e * x[1:]
        y[1:] += self.e * x[:-1]
        return y

    def norm_inf(self):
        r = np.abs(self.d).copy()
        r[:-1] += np.abs(self.e)
        r[1:] += np.abs(self.e)
        return float(r.max())


def negative_count(d, e, shift=0.0):
    """Number of eigenvalues below ``shift`` (Sturm sequence / LDL^T inertia)."""
    dd = (np.asarray(d, dtype=float) - shift).tolist()
    e2 = (np.asarray(e, dtype=float) ** 2).tolist()
    q = dd[0]
    count = 1 if q < 0.0 else 0
    tiny = 1e-300
    for i in range(1, len(dd)):
        if q == 0.0:
            q = tiny
        q = dd[i] - e2[i - 1] / q
        if q < 0.0:
            count += 1
    return count


def _secular_at_depth(variant, depth, N):
    n = np.arange(N + 1, dtype=float)
    d = variant.diagonal_scale * np.sqrt(n + depth)
    e = variant.coupling_scale * position_offdiagonal(N)
    return SymTridiagonal(d, e)


def build_secular(variant, eps, N):
    """Truncated secular matrix B(eps) of size (N+1) x (N+1).

    Raises
    ------
    DomainError
        For ``eps >= 1/2``: that is the continuous spectrum, where kappa_0
        is no longer real.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not eps < THRESHOLD:
        raise DomainError(f"eps={eps} lies in the continuous spectrum [1/2, inf)")
    return _secular_at_depth(variant, THRESHOLD - eps, N)


def smallest_eigenvalue(variant, eps, N):
    B = build_secular(variant, eps, N)
    return float(eigvalsh_tridiagonal(B.d, B.e, select="i", select_range=(0, 0))[0])


def _neg_at_depth(variant, depth, N):
    B = _secular_at_depth(variant, depth, N)
    return negative_count(B.d, B.e)


def count_eigenvalues(variant, N, edge=DEFAULT_EDGE):
    """Number of discrete eigenvalues in (0, 1/2 - edge) for truncation ``N``.

    Inertia of B(1/2 - edge) minus inertia of B(0).
    """
    hi = _neg_at_depth(variant, edge, N)
    lo = _neg_at_depth(variant, THRESHOLD, N)
    if hi < lo:
        raise ConsistencyError(f"crossing count decreased across (0, 1/2): {lo} -> {hi}")
    return hi - lo


def _bisect_depth(variant, N, target, lo, hi, tol):
    """Largest depth mu in (lo, hi) with negative count >= target.

    Invariant: count(lo) >= target > count(hi).
    """
    while True:
        if hi - lo <= tol:
            break
        # geometric steps while the bracket spans decades
        mid = math.sqrt(lo * hi) if lo > 0 and hi > 4.0 * lo else 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if _neg_at_depth(variant, mid, N) >= target:
            lo = mid
        else:
            hi = mid
    return lo, hi


@dataclass
class SpectralScan:
    """Discrete eigenvalues in (0, 1/2) for one coupling and truncation.

    ``depths`` holds 1/2 - eps_j with full relative precision; use it rather
    than ``0.5 - eigenvalues`` for weakly bound states.
    """

    variant: CouplingVariant
    N: int
    eigenvalues: np.ndarray
    depths: np.ndarray
    convergence_gap: float
    near_threshold: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))

    @property
    def count(self):
        return int(self.eigenvalues.size)


def _roots(variant, N, tol, edge):
    n_top = _neg_at_depth(variant, edge, N)
    n_bottom = _neg_at_depth(variant, THRESHOLD, N)
    if n_top < n_bottom:
        raise ConsistencyError(f"crossing count decreased across (0, 1/2): {n_bottom} -> {n_top}")
    depths = []
    hi = THRESHOLD
    for j in range(1, n_top - n_bottom + 1):
        lo, hi_j = _bisect_depth(variant, N, n_bottom + j, edge, hi, tol)
        mu = 0.5 * (lo + hi_j)
        depths.append(mu)
        # next root lies strictly below this one in depth
        hi = lo
    depths = np.array(depths)
    if depths.size > 1 and not np.all(np.diff(depths) < 0):
        raise ConsistencyError("roots of the secular equation are not separated")
    return depths


def _gap(d_full, d_half):
    k = min(d_full.size, d_half.size)
    gap = float(np.max(np.abs(d_full[:k] - d_half[:k]))) if k else 0.0
    if d_full.size > k:
        # eigenvalues missed by the coarser truncation: bounded by their depth
        gap = max(gap, float(d_full[k:].max()))
    return gap


def find_spectrum(variant, N=None, tol=1e-13, edge=DEFAULT_EDGE, with_gap=True,
                  N_start=500, N_max=64000):
    """All eigenvalues eps in (0, 1/2 - edge) of the truncated secular problem.

    Roots are isolated by inertia counting and refined by bisection on the
    count until the depth bracket is narrower than ``tol`` (or floating
    point resolution).  ``convergence_gap`` compares with truncation N // 2.

    With ``N=None`` the truncation starts at ``N_start`` and doubles until
    the gap falls below ``tol`` or ``N_max`` is reached (the last scan is
    returned in that case, with its gap recorded).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if N is None:
        N = N_start
        while True:
            scan = find_spectrum(variant, N, tol=tol, edge=edge, with_gap=True)
            if scan.convergence_gap < tol or 2 * N > N_max:
                return scan
            N *= 2
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")

    depths = _roots(variant, N, tol, edge)
    gap = float("nan")
    if with_gap:
        gap = _gap(depths, _roots(variant, N // 2, tol, edge))
    margin = max(tol, gap) if math.isfinite(gap) else tol
    return SpectralScan(
        variant=variant,
        N=N,
        eigenvalues=THRESHOLD - depths,
        depths=depths,
        convergence_gap=gap,
        near_threshold=depths <= margin,
    )


def coupling_threshold(kind, j, N, tol=1e-9, edge=DEFAULT_EDGE):
    """Coupling at which the j-th discrete eigenvalue emerges from 1/2.

    For delta this is a lam in (0, sqrt 2); for delta' a beta above 2 sqrt 2
    (small beta is strong coupling).
    """
    if j < 2:
        raise ValueError("j must be >= 2 (the first eigenvalue exists for any nonzero coupling)")
    if kind == DELTA:
        lo, hi = 0.0, CRITICAL_DELTA * (1.0 - 1e-12)
        if count_eigenvalues(delta(hi), N, edge) < j:
            raise ThresholdNotFound(
                f"fewer than {j} eigenvalues even at lam={hi:.15g} with N={N}", bracket=(lo, hi))
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if count_eigenvalues(delta(mid), N, edge) >= j:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)
    if kind == DELTA_PRIME:
        lo = CRITICAL_DELTA_PRIME * (1.0 + 1e-12)
        if count_eigenvalues(delta_prime(lo), N, edge) < j:
            raise ThresholdNotFound(
                f"fewer than {j} eigenvalues even at beta={lo:.15g} with N={N}", bracket=(lo, math.inf))
        hi = 2.0 * CRITICAL_DELTA_PRIME
        while count_eigenvalues(delta_prime(hi), N, edge) >= j:
            hi *= 2.0
            if hi > 1e8:
                raise ThresholdNotFound("count never drops below j", bracket=(lo, hi))
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if count_eigenvalues(delta_prime(mid), N, edge) >= j:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)
    raise ValueError(f"unknown coupling kind {kind!r}")


@dataclass
class WeakCouplingFit:
    """Power law  1/2 - E_1 ~ coefficient * coupling**exponent.

    ``correction`` is the coefficient b of the optional relative term
    b * coupling**correction_power (None for the plain two-parameter fit).
    """

    exponent: float
    coefficient: float
    correction: float | None
    correction_power: float | None
    rms_residual: float
    couplings: np.ndarray
    depths: np.ndarray


def fit_power_law(couplings, depths, correction_power=None):
    """Least squares of log(depth) against log(coupling).

    With ``correction_power`` set, a term b * g**correction_power enters the
    design matrix next to log g and the intercept.  It absorbs the leading
    even-order correction so the intercept estimates the asymptotic
    coefficient rather than a grid-averaged one.
    """
    g = np.asarray(couplings, dtype=float)
    mu = np.asarray(depths, dtype=float)
    if g.size != mu.size or g.size < 2:
        raise ValueError("need at least two (coupling, depth) pairs")
    if np.any(g <= 0) or np.any(mu <= 0):
        raise ValueError("couplings and depths must be positive")
    cols = [np.log(g), np.ones_like(g)]
    if correction_power is not None:
        if g.size < 3:
            raise ValueError("corrected fit needs at least three points")
        cols.append(g ** correction_power)
    A = np.column_stack(cols)
    rhs = np.log(mu)
    coef, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    res = rhs - A @ coef
    return WeakCouplingFit(
        exponent=float(coef[0]),
        coefficient=float(math.exp(coef[1])),
        correction=float(coef[2]) if correction_power is not None else None,
        correction_power=correction_power,
        rms_residual=float(np.sqrt(np.mean(res ** 2))),
        couplings=g,
        depths=mu,
    )


def ground_depth(variant, N, rtol=1e-9):
    """Depth 1/2 - E_1 of the ground state, checked against truncation N // 2.

    Raises
    ------
    ConvergenceError
        When no eigenvalue is found or the two truncations disagree by more
        than ``rtol`` relative.
    """
    full = _roots(variant, N, 0.0, DEFAULT_EDGE)
    half = _roots(variant, N // 2, 0.0, DEFAULT_EDGE)
    if full.size == 0 or half.size == 0:
        raise ConvergenceError(f"no bound state found for {variant.label()} at N={N}")
    if abs(full[0] - half[0]) > rtol * full[0]:
        raise ConvergenceError(
            f"E_1 not converged for {variant.label()}: N={N} and N={N // 2} differ by "
            f"{abs(full[0] - half[0]):.3e}", last=full[0])
    return float(full[0])


# power of the leading relative correction: lam**2 for delta, beta**-2 for delta'
_CORRECTION_POWER = {DELTA: 2.0, DELTA_PRIME: -2.0}


def weak_coupling_fit(kind, couplings, N=2000, corrected=True, rtol=1e-9):
    """Fit 1/2 - E_1 against the coupling for weak (delta) or large-beta (delta') coupling.

    Refuses to fit if any grid point has a non-converged E_1.
    """
    make = delta if kind == DELTA else delta_prime
    depths = [ground_depth(make(g), N, rtol=rtol) for g in couplings]
    power = _CORRECTION_POWER[kind] if corrected else None
    return fit_power_law(couplings, depths, correction_power=power)


def asymptotic_count(kind, coupling, cutoff=1e-14):
    """Near-critical eigenvalue count 1 / (4 sqrt(2 (m - 1))).

    m = sqrt(2) / lam for delta and beta / (2 sqrt 2) for delta'.  Returns
    ``inf`` once m - 1 drops below ``cutoff``.
    """
    if kind == DELTA:
        if coupling < 0:
            raise DomainError("lam must be >= 0")
        if coupling == 0:
            return 0.0
        if coupling >= CRITICAL_DELTA:
            raise DomainError(f"lam={coupling} is not subcritical (needs lam < sqrt 2)")
        m = CRITICAL_DELTA / coupling
    elif kind == DELTA_PRIME:
        if coupling <= CRITICAL_DELTA_PRIME:
            raise DomainError(f"beta={coupling} is not subcritical (needs beta > 2 sqrt 2)")
        m = coupling / CRITICAL_DELTA_PRIME
    else:
        raise ValueError(f"unknown coupling kind {kind!r}")
    if m - 1.0 < cutoff:
        return math.inf
    return 1.0 / (4.0 * math.sqrt(2.0 * (m - 1.0)))
