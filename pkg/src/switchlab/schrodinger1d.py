"""One-dimensional Schroedinger eigenvalues by finite differences.

Three uses: the anharmonic ground state gamma_p = inf spec(-u'' + |t|^p u),
its Neumann-cut version on [-k, k], and the sign of the spectral threshold
of comparison operators L = -d^2/dx^2 + omega^2 - lam V.

Discretization: central second differences on the vertex grid
t_i = a + i h.  Dirichlet ends drop the boundary nodes; Neumann ends keep
them with a mirrored ghost node.  The grid step is adjusted so that the
interval midpoint is a node on every level, which keeps kinks of |t|^p at
t = 0 from spoiling the error expansion.  Eigenvalues at h and h/2 are
combined by Richardson extrapolation; a third solve at 2h measures the
observed order.
"""
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.linalg import eigvalsh_tridiagonal
from scipy.optimize import brentq, minimize_scalar

from .errors import ValidationError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

# gamma_p <= pi^2/4 < 2.5 for every p >= 1 (|t|^p <= 1 on the unit box)
GAMMA_UPPER = 2.5


@dataclass
class Problem1D:
    """-u'' + V(t) u on [a, b] with the given boundary condition.

    Whole-line problems are represented by a Dirichlet box [-T, T].
    """

    potential: Callable
    a: float
    b: float
    boundary: str = DIRICHLET
    h: float = 0.01

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"empty interval [{self.a}, {self.b}]")
        if not self.h > 0:
            raise ValueError(f"grid step must be positive, got {self.h}")
        if self.boundary not in (DIRICHLET, NEUMANN):
            raise ValueError(f"unknown boundary condition {self.boundary!r}")

    @classmethod
    def whole_line(cls, potential, T, h=0.01):
        return cls(potential, -T, T, DIRICHLET, h)

    @classmethod
    def interval(cls, potential, k, boundary, h=0.01):
        return cls(potential, -k, k, boundary, h)


@dataclass
class Eigenvalues1D:
    values: np.ndarray
    errors: np.ndarray
    raw: np.ndarray
    order: np.ndarray
    extrapolated: bool


def _discrete(problem, cells, count):
    """Lowest eigenvalues on a vertex grid with ``cells`` intervals."""
    h = (problem.b - problem.a) / cells
    t = problem.a + h * np.arange(cells + 1)
    d = 2.0 / h ** 2 + problem.potential(t)
    e = np.full(cells, -1.0 / h ** 2)
    if problem.boundary == DIRICHLET:
        d, e = d[1:-1], e[1:-1]
    else:
        # mirrored ghost node; the half-weight end rows are symmetrized by
        # the diagonal similarity diag(1/sqrt(2), 1, ..., 1, 1/sqrt(2))
        e[0] *= math.sqrt(2.0)
        e[-1] *= math.sqrt(2.0)
    if count > d.size:
        raise ValueError(f"grid has only {d.size} unknowns, {count} eigenvalues requested")
    return eigvalsh_tridiagonal(d, e, select="i", select_range=(0, count - 1))


def eigenvalues_1d(problem, count=1, order_window=(3.0, 5.5)):
    """Lowest ``count`` eigenvalues, Richardson-extrapolated over h and h/2.

    The observed convergence ratio (E_2h - E_h) / (E_h - E_h/2) should be
    close to 4; outside ``order_window`` (and above rounding level) the raw
    h/2 values are returned with a ``RuntimeWarning``.

    Returns
    -------
    Eigenvalues1D
        ``values`` (extrapolated), ``errors`` (|extrapolated - raw h/2|),
        ``raw`` (h/2 values) and the observed ratios ``order``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    # an even number of coarse cells keeps the midpoint a node on every level
    m = 2 * max(1, int(round((problem.b - problem.a) / (4 * problem.h))))
    e2 = _discrete(problem, m, count)
    e1 = _discrete(problem, 2 * m, count)
    e0 = _discrete(problem, 4 * m, count)
    rich = e0 + (e0 - e1) / 3.0
    d_fine = e1 - e0
    d_coarse = e2 - e1
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(d_fine) > 0, d_coarse / d_fine, np.inf)
    # bisection accuracy is eps * ||T||; differences below that carry no order information
    h_fine = (problem.b - problem.a) / (4 * m)
    vmax = np.abs(problem.potential(np.linspace(problem.a, problem.b, 4 * m + 1))).max()
    noise = 64 * np.finfo(float).eps * (4.0 / h_fine ** 2 + vmax)
    ok = (np.abs(d_fine) < noise) | ((ratio >= order_window[0]) & (ratio <= order_window[1]))
    if not ok.all():
        warnings.warn(f"extrapolation not in the asymptotic regime (ratios {ratio}); returning raw values",
                      RuntimeWarning, stacklevel=2)
        return Eigenvalues1D(e0, np.abs(d_fine), e0, ratio, False)
    return Eigenvalues1D(rich, np.abs(rich - e0), e0, ratio, True)


# ---- anharmonic oscillator --------------------------------------------------

def power_potential(p):
    return lambda t: np.abs(t) ** p


def agmon_box(p, tol):
    """Half-width T with exp(-2 rho(T)) below tol^2, rho the Agmon distance at energy 2.5."""
    turn = GAMMA_UPPER ** (1.0 / p)
    target = -math.log(tol)
    # grow slowly: for large p an oversized box puts 1e30-sized entries on
    # the diagonal and spoils the eigensolver's absolute accuracy
    step = 0.02 * turn
    T = turn + step
    while quad(lambda t: math.sqrt(max(t ** p - GAMMA_UPPER, 0.0)), turn, T)[0] < target:
        step *= 1.25
        T += step
    return T


def gamma_p(p, tol=1e-9, h=None, with_error=False):
    """Ground state of -u'' + |t|^p u on the line.

    The box [-T, T] comes from :func:`agmon_box`; the grid step defaults to
    ``min(0.01, turning point / (10 p))`` so steep large-p walls stay resolved.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    T = agmon_box(p, tol)
    if h is None:
        h = min(0.01, GAMMA_UPPER ** (1.0 / p) / (10.0 * p))
    res = eigenvalues_1d(Problem1D.whole_line(power_potential(p), T, h), 1)
    if with_error:
        return float(res.values[0]), float(res.errors[0])
    return float(res.values[0])


def gamma_curve(ps, tol=1e-9, h=None):
    """(p, gamma_p, error) rows for the given p values."""
    rows = []
    for p in ps:
        g, err = gamma_p(float(p), tol=tol, h=h, with_error=True)
        rows.append((float(p), g, err))
    return rows


def gamma_minimum(bracket=(1.3, 2.5), xatol=1e-4, tol=1e-9):
    """Location and value of min_p gamma_p (bounded Brent search)."""
    res = minimize_scalar(lambda p: gamma_p(p, tol=tol), bounds=bracket, method="bounded",
                          options={"xatol": xatol})
    return float(res.x), float(res.fun)


def neumann_cut_ground(p, k, h=None):
    """Ground state of -u'' + |t|^p u on [-k, k] with Neumann ends."""
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    if h is None:
        h = min(0.01, k / 200.0)
    res = eigenvalues_1d(Problem1D.interval(power_potential(p), k, NEUMANN, h), 1)
    return float(res.values[0])


# ---- comparison operator ----------------------------------------------------

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"


@dataclass
class CompactPotential:
    """Nonnegative V with supp V in [-a, a]."""

    func: Callable
    a: float
    name: str = "V"
    scale: float = 0.02  # shortest length on which V varies; sets the grid step

    def __call__(self, t):
        return self.func(t)

    def validate(self, samples=4001, slope_growth=1.5):
        """Check the hypotheses by sampling.

        Nonnegativity and support are checked on [-2a, 2a].  A bounded
        derivative is checked by halving the sampling step: the largest
        difference quotient of a jump doubles, that of a Lipschitz function
        does not.
        """
        t = np.linspace(-2 * self.a, 2 * self.a, samples)
        v = np.asarray(self.func(t), dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValidationError(f"{self.name} is not finite on [-2a, 2a]")
        if v.min() < -1e-14:
            raise ValidationError(f"{self.name} takes negative values (min {v.min():.3e})")
        outside = np.abs(t) > self.a
        if np.abs(v[outside]).max(initial=0.0) > 0:
            raise ValidationError(f"{self.name} is not supported in [-{self.a}, {self.a}]")
        slopes = []
        for n in (samples, 2 * samples - 1, 4 * samples - 3):
            tt = np.linspace(-2 * self.a, 2 * self.a, n)
            slopes.append(np.abs(np.diff(self.func(tt)) / np.diff(tt)).max())
        if slopes[1] > slope_growth * slopes[0] and slopes[2] > slope_growth * slopes[1]:
            raise ValidationError(f"{self.name} has unbounded difference quotients (jump?)")
        return self


def indicator_well(a=1.0, width=0.01):
    """Indicator of [-a, a] smoothed over |t| in [a - w, a + w].

    The ramp is the C^2 quintic smoothstep, antisymmetric about |t| = a, so
    the well area is preserved and the first-order shift of bound-state
    energies vanishes.
    """

    def f(t):
        s = np.clip((a + width - np.abs(t)) / (2 * width), 0.0, 1.0)
        return s ** 3 * (10 - 15 * s + 6 * s ** 2)

    return CompactPotential(f, a + width, name=f"well(a={a}, w={width})", scale=width)


@dataclass
class Classification:
    lam: float
    bottom: float
    regime: str
    lam_crit: float = math.nan


def _comparison_step(V, h):
    return min(2e-3, V.scale / 20.0) if h is None else h


def comparison_bottom(V, omega, lam, h=None, decay_lengths=25.0):
    """inf spec(-d^2/dx^2 + omega^2 - lam V).

    The essential spectrum is [omega^2, inf), so the result is the smaller
    of omega^2 and the ground state on a Dirichlet box around supp V (a box
    value above omega^2 means there is no bound state).
    """
    h = _comparison_step(V, h)
    T = V.a + decay_lengths / max(omega, 1e-3)
    prob = Problem1D.whole_line(lambda t: omega ** 2 - lam * V(t), T, h)
    return min(float(eigenvalues_1d(prob, 1).values[0]), float(omega ** 2))


def critical_coupling(V, omega, h=None, xtol=1e-10):
    """Smallest lam with inf spec(L) = 0, by bracketing and Brent's method."""
    f = lambda lam: comparison_bottom(V, omega, lam, h=h)
    hi = 1.0
    while f(hi) > 0:
        hi *= 2
        if hi > 1e8:
            raise ValidationError("no sign change of the threshold up to lam = 1e8")
    return brentq(f, 0.0, hi, xtol=xtol)


def classify_comparison(V, omega, lam, h=None, atol=1e-9, validate=True):
    """Regime of the comparison operator from the sign of its threshold."""
    if validate:
        V.validate()
    bottom = comparison_bottom(V, omega, lam, h=h)
    if abs(bottom) <= atol:
        regime = CRITICAL
    elif bottom > 0:
        regime = SUBCRITICAL
    else:
        regime = SUPERCRITICAL
    return Classification(float(lam), bottom, regime, critical_coupling(V, omega, h=h))


def square_well_threshold(a=1.0, omega=1.0):
    """Zero-energy even bound state of the sharp well: q tan(q a) = omega, lam = omega^2 + q^2."""
    q = brentq(lambda q: q * math.tan(q * a) - omega, 1e-12, math.pi / (2 * a) - 1e-12)
    return omega ** 2 + q ** 2
