"""Harmonic-oscillator eigenfunctions and their position matrix elements.

The transverse basis is

    psi_n(y) = (2^n n! sqrt(pi))^(-1/2) exp(-y^2/2) H_n(y),

eigenfunctions of (-d^2/dy^2 + y^2)/2 with eigenvalues n + 1/2.  Values are
generated by the normalized three-term recurrence

    psi_{n+1} = (sqrt(2) y psi_n - sqrt(n) psi_{n-1}) / sqrt(n + 1),

carried in scaled form (mantissa times exp(scale)) so that neither the
Gaussian prefactor underflows nor the polynomial part overflows.  The only
matrix elements the package needs are the ones of the position operator,
which are tridiagonal and known in closed form.
"""
import math

import numpy as np

from .errors import StabilityError

SQRT2 = math.sqrt(2.0)
PI_QUARTER = math.pi ** -0.25

# rescale the running mantissa when it leaves [1/_BIG, _BIG]
_BIG = 1e150


def level_energy(n):
    """Oscillator eigenvalue n + 1/2."""
    if n < 0:
        raise ValueError(f"oscillator level must be nonnegative, got {n}")
    return n + 0.5


def eval_basis(y, N):
    """Values of psi_0 .. psi_N at ``y``.

    Parameters
    ----------
    y : float or array_like
        Evaluation point(s), dimensionless oscillator units.
    N : int
        Highest level, ``N >= 0``.

    Returns
    -------
    ndarray
        Shape ``(N + 1,)`` for scalar ``y``, otherwise ``(N + 1,) + y.shape``.

    Raises
    ------
    StabilityError
        If a non-finite value appears; ``err.index`` names the level.
    """
    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    y_arr = np.asarray(y, dtype=float)
    scalar = y_arr.ndim == 0
    yy = np.atleast_1d(y_arr).ravel()

    out = np.empty((N + 1, yy.size))
    # psi_n = mant_n * exp(scale); scale starts at the Gaussian exponent
    scale = -0.5 * yy * yy
    prev = np.zeros_like(yy)
    cur = np.full_like(yy, PI_QUARTER)
    out[0] = cur * np.exp(scale)
    s2y = SQRT2 * yy
    for n in range(N):
        nxt = (s2y * cur - math.sqrt(n) * prev) / math.sqrt(n + 1)
        prev, cur = cur, nxt
        big = np.abs(cur) > _BIG
        if big.any():
            f = np.abs(cur[big])
            cur[big] /= f
            prev[big] /= f
            scale[big] += np.log(f)
        out[n + 1] = cur * np.exp(scale)
        if not np.all(np.isfinite(out[n + 1])):
            raise StabilityError(f"non-finite oscillator value at level n={n + 1}", index=n + 1)

    if scalar:
        return out[:, 0]
    return out.reshape((N + 1,) + y_arr.shape)


def position_element(m, n):
    """(psi_m, y psi_n) in closed form.

    Only the first off-diagonals are nonzero: sqrt(n+1)/sqrt(2) for
    m = n + 1 and sqrt(n)/sqrt(2) for m = n - 1.
    """
    if m < 0 or n < 0:
        raise ValueError("oscillator levels must be nonnegative")
    if m == n + 1:
        return math.sqrt(n + 1) / SQRT2
    if m == n - 1:
        return math.sqrt(n) / SQRT2
    return 0.0


def position_offdiagonal(N):
    """Off-diagonal (psi_n, y psi_{n+1}) for n = 0 .. N-1, length N."""
    return np.sqrt(np.arange(1, N + 1, dtype=float)) / SQRT2


def position_matrix(N):
    """Dense (N+1) x (N+1) matrix of (psi_m, y psi_n); tests and small problems only."""
    e = position_offdiagonal(N)
    return np.diag(e, 1) + np.diag(e, -1)
