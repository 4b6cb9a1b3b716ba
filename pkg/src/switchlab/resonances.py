"""Resonance poles and on-shell scattering for the delta channel model.

Channel momenta are continued with

    p_n(z) = s_n * i * sqrt(eps_n - z),     eps_n = n + 1/2,

principal square root, so that s_n = +1 is the decaying branch
(Im p_n > 0 off the cut [eps_n, inf)).  The physical sheet is s = (+1, +1,
...); the sheet reached by crossing the real axis between eps_{n-2} and
eps_{n-1} flips the first n - 1 signs.  On the physical sheet and for real
z = eps < 1/2 one has p_n = i kappa_n exactly, and

    M(z) = 2 diag(p) - i lam Y = 2 i D B(eps) D,   D = diag((-1)^n),

so physical-sheet poles are the discrete eigenvalues.  Flipping every sign
maps M to -D M D, hence the pole set does not depend on which of the two
global conventions is called physical.
"""
import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchPointError, ConvergenceError, DomainError
from .oscillator import position_matrix, position_offdiagonal

BRANCH_GUARD = 1e-13
EVANESCENT_MARGIN = 60
AXIS_TOL = 1e-10


def channel_energy(n):
    return n + 0.5


@dataclass(frozen=True)
class SheetSignature:
    """Branch signs for p_0, p_1, ...; +1 beyond the stored prefix."""

    signs: tuple = ()

    def __post_init__(self):
        s = tuple(int(v) for v in self.signs)
        if any(v not in (1, -1) for v in s):
            raise ValueError("sheet signs must be +1 or -1")
        # canonical form: no trailing +1
        while s and s[-1] == 1:
            s = s[:-1]
        object.__setattr__(self, "signs", s)

    @classmethod
    def physical(cls):
        return cls(())

    @classmethod
    def nth(cls, n):
        """The n-th sheet: first n - 1 branches flipped (n = 1 is physical)."""
        if n < 1:
            raise ValueError("sheets are numbered from 1")
        return cls((-1,) * (n - 1))

    def sign(self, n):
        return self.signs[n] if n < len(self.signs) else 1

    @property
    def is_physical(self):
        return not self.signs

    @property
    def sheet_id(self):
        """Sheet number when the signature is of the n-th sheet form, else a +/- string."""
        if all(v == -1 for v in self.signs):
            return str(len(self.signs) + 1)
        return "".join("+" if v > 0 else "-" for v in self.signs)


def channel_momenta(z, N, sheet):
    """p_0 .. p_N at complex energy z on ``sheet``."""
    z = complex(z)
    n = np.arange(N + 1)
    eps = n + 0.5
    near = np.abs(z - eps) < BRANCH_GUARD
    if near.any():
        raise BranchPointError(f"z={z} sits on the channel threshold eps_{int(n[near][0])}")
    signs = np.array([sheet.sign(k) for k in range(N + 1)], dtype=float)
    return signs * 1j * np.sqrt(eps - z + 0j)


def secular_complex(z, lam, sheet, N):
    """Dense M_ln(z) = 2 p_l delta_ln - i lam (psi_l, y psi_n), size (N+1) x (N+1)."""
    p = channel_momenta(z, N, sheet)
    return np.diag(2.0 * p) - 1j * lam * position_matrix(N)


def _log_det_derivative(z, lam, sheet, N):
    """d/dz log det M(z) via the continuant recursion (O(N), no overflow)."""
    p = channel_momenta(z, N, sheet)
    a = 2.0 * p
    da = 1.0 / p  # d(2p)/dz with p^2 = z - eps
    b2 = (-(lam ** 2)) * position_offdiagonal(N) ** 2  # (-i lam y_n)^2
    r = a[0]
    g = da[0] / r
    g_prev = 0.0
    for k in range(1, N + 1):
        rk = a[k] - b2[k - 1] / r
        if rk == 0:
            rk = 1e-300
        gk = (da[k] + a[k] * g - b2[k - 1] * g_prev / r) / rk
        g_prev, g, r = g, gk, rk
    return g


def smallest_singular_value(z, lam, sheet, N):
    s = np.linalg.svd(secular_complex(z, lam, sheet, N), compute_uv=False)
    return float(s[-1]), float(s[0])


@dataclass
class ResonancePole:
    z: complex
    sheet: SheetSignature
    lam: float
    residual: float
    N: int
    iterations: int = 0

    @property
    def energy(self):
        return self.z


def default_truncation(z):
    """Open channels below Re z plus the evanescent margin."""
    return max(int(max(z.real, 0.0)) + EVANESCENT_MARGIN, 2 * EVANESCENT_MARGIN)


def find_pole(lam, sheet, seed, N=None, tol=1e-12, max_iter=60, residual_tol=1e-8):
    """Newton iteration on log det M(z) from ``seed``.

    Convergence means |dz| < tol (1 + |z|).  The result is accepted only if
    the smallest singular value of M is below ``residual_tol`` times the
    largest one, it is not glued to a threshold, and it lies on the
    half-plane the sheet describes (real for the physical sheet, Im z <= 0
    otherwise).

    Raises
    ------
    ConvergenceError
        On divergence, a rejected limit, or exhaustion of ``max_iter``;
        ``err.last`` holds the final iterate.
    """
    z = complex(seed)
    N = default_truncation(z) if N is None else N
    for it in range(1, max_iter + 1):
        try:
            g = _log_det_derivative(z, lam, sheet, N)
        except BranchPointError as exc:
            raise ConvergenceError(f"Newton hit a branch point: {exc}", last=z) from exc
        if g == 0 or not cmath.isfinite(g):
            raise ConvergenceError("log-derivative vanished or overflowed", last=z)
        dz = -1.0 / g
        # keep steps inside the disc of analyticity around the nearest threshold
        dist = np.min(np.abs(z - (np.arange(N + 1) + 0.5)))
        if abs(dz) > 0.5 * dist:
            dz *= 0.5 * dist / abs(dz)
        z = z + dz
        if not cmath.isfinite(z) or abs(z) > 1e6:
            raise ConvergenceError("Newton iteration diverged", last=z)
        if abs(dz) < tol * (1.0 + abs(z)):
            break
    else:
        raise ConvergenceError(f"no convergence in {max_iter} iterations", last=z)

    dist = np.min(np.abs(z - (np.arange(N + 1) + 0.5)))
    if dist < 1e-8:
        raise ConvergenceError(f"converged onto a channel threshold (distance {dist:.2e})", last=z)
    if sheet.is_physical:
        if abs(z.imag) > 1e-9:
            raise ConvergenceError("physical-sheet limit is not real", last=z)
        z = complex(z.real, 0.0)
    elif z.imag > tol * (1.0 + abs(z)):
        raise ConvergenceError(
            f"limit {z} lies in the upper half-plane: shadow of another sheet", last=z)
    smin, smax = smallest_singular_value(z, lam, sheet, N)
    if smin > residual_tol * smax:
        raise ConvergenceError(f"residual {smin / smax:.2e} above tolerance at {z}", last=z)
    return ResonancePole(z=z, sheet=sheet, lam=float(lam), residual=smin / smax, N=N, iterations=it)


def weak_coupling_offset(n, lam):
    """Leading-order pole offset from eps_n: -(lam^4 / 64) (2n + 1 + 2 i n (n + 1))."""
    return -(lam ** 4 / 64.0) * complex(2 * n + 1, 2 * n * (n + 1))


def threshold_seed(n, lam):
    return channel_energy(n) + weak_coupling_offset(n, lam)


@dataclass
class Trajectory:
    sheet: SheetSignature
    poles: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    completed: bool = False

    @property
    def lams(self):
        return np.array([p.lam for p in self.poles])

    @property
    def energies(self):
        return np.array([p.z for p in self.poles])


def track_trajectory(lam_start, lam_end, steps, sheet, seed, N=None, min_step=1e-4, tol=1e-12,
                     jump_ratio=0.3):
    """Continue a pole in the coupling from ``lam_start`` to ``lam_end``.

    Predictor: linear extrapolation of the last two poles.  Corrector:
    :func:`find_pole`.  A step is rejected when Newton fails or the corrected
    pole differs from the prediction by more than ``jump_ratio`` times the
    predicted displacement (or more than the coupling step, whichever is
    larger); the step is then halved down to
    ``min_step``, after which the polyline is returned truncated with the
    diagnostic in ``failures``.
    """
    traj = Trajectory(sheet=sheet)
    try:
        first = find_pole(lam_start, sheet, seed, N=N, tol=tol)
    except ConvergenceError as exc:
        traj.failures.append((float(lam_start), str(exc)))
        return traj
    traj.poles.append(first)
    if steps < 1 or lam_end == lam_start:
        traj.completed = True
        return traj

    nominal = (lam_end - lam_start) / steps
    direction = 1.0 if nominal > 0 else -1.0
    step = nominal
    lam = lam_start
    while direction * (lam_end - lam) > 1e-14:
        step = direction * min(abs(step), abs(lam_end - lam))
        lam_next = lam + step
        last = traj.poles[-1]
        if len(traj.poles) >= 2:
            prev = traj.poles[-2]
            slope = (last.z - prev.z) / (last.lam - prev.lam)
            pred = last.z + slope * step
        else:
            pred = last.z
        # a linear predictor is accurate to second order, so a corrector that
        # lands far from it compared with the predicted displacement (or the
        # coupling step, near square-root points) has likely hopped to a
        # neighbouring pole
        jump_tol = max(abs(step), 1e-6)
        if len(traj.poles) < 2:
            # no slope yet: only a coarse bound is available
            jump_tol = max(abs(step), 1e-3)
        else:
            jump_tol = max(jump_tol, jump_ratio * abs(pred - last.z))
        try:
            pole = find_pole(lam_next, sheet, pred, N=last.N if N is None else N, tol=tol)
            if abs(pole.z.imag) < abs(last.z.imag):
                # arrival on the real axis is a square-root point, where the
                # pole moves by about its remaining distance to the axis
                jump_tol = max(jump_tol, abs(pred - last.z) + 0.5 * abs(last.z.imag))
            if abs(pole.z - pred) > jump_tol:
                raise ConvergenceError(
                    f"corrector jumped by {abs(pole.z - pred):.2e} (allowed {jump_tol:.2e})", last=pole.z)
        except ConvergenceError as exc:
            if abs(step) / 2 < min_step:
                traj.failures.append((float(lam_next), f"continuation lost: {exc}"))
                return traj
            step /= 2
            continue
        traj.poles.append(pole)
        lam = lam_next
        step = direction * min(abs(nominal), 2 * abs(step))
    traj.completed = True
    return traj


def poles_in_rectangle(lam, sheet, re_range, im_range, n_re=24, n_im=10, N=None, tol=1e-12):
    """All poles reachable by Newton from a grid of seeds in the rectangle.

    Limits outside the rectangle are discarded; duplicates merged.
    """
    found = []
    res = np.linspace(*re_range, n_re)
    ims = np.linspace(*im_range, n_im)
    for re in res:
        for im in ims:
            try:
                pole = find_pole(lam, sheet, complex(re, im), N=N, tol=tol)
            except ConvergenceError:
                continue
            z = pole.z
            if not (re_range[0] <= z.real <= re_range[1] and im_range[0] <= z.imag <= min(im_range[1], 0.0)):
                continue
            if all(abs(z - q.z) > 1e-7 for q in found):
                found.append(pole)
    found.sort(key=lambda q: (q.z.real, q.z.imag))
    return found


@dataclass
class PoleBirth:
    lam: float
    z: complex
    sheet: SheetSignature
    track: Trajectory


def scan_pole_births(sheet, lam_grid, re_range, im_range, exclude=(), N=None, **grid):
    """Detect poles entering a rectangle as the coupling increases.

    At each grid coupling the rectangle is scanned for poles; a pole with no
    partner within the previous scan (after linear drift) and not close to
    any point in ``exclude`` is a candidate birth.  The candidate is tracked
    backwards in the coupling until it reaches the real axis or is lost; the
    birth coupling is the last tracked value, refined by linear
    extrapolation of Im z to zero.
    """
    lam_grid = list(lam_grid)
    births = []
    previous = None
    for lam in lam_grid:
        current = poles_in_rectangle(lam, sheet, re_range, im_range, N=N, **grid)
        if previous is not None:
            for pole in current:
                if any(abs(pole.z - q.z) < 0.05 for q in previous):
                    continue
                if any(abs(pole.z - e) < 1e-3 for e in exclude):
                    continue
                back = track_trajectory(lam, lam_grid[0], max(1, int(round((lam - lam_grid[0]) / 1e-3))),
                                        sheet, pole.z, N=N)
                z_end = back.poles[-1].z
                lam_b = back.poles[-1].lam
                cplx = [q for q in back.poles if abs(q.z.imag) > AXIS_TOL]
                if len(cplx) >= 2:
                    # Im z vanishes like a square root at the birth, so Im^2
                    # is extrapolated linearly
                    a, b = cplx[-2], cplx[-1]
                    ya, yb = a.z.imag ** 2, b.z.imag ** 2
                    if ya != yb:
                        t = yb / (yb - ya)
                        lam_b = b.lam + t * (b.lam - a.lam)
                        z_end = b.z + t * (b.z - a.z)
                births.append(PoleBirth(lam=float(lam_b), z=complex(z_end.real, 0.0), sheet=sheet, track=back))
        previous = current
    return births


@dataclass
class ScatteringSolution:
    """On-shell amplitudes; rows index the incident channel m, columns the outgoing n."""

    k: float
    lam: float
    N: int
    momenta: np.ndarray
    r: np.ndarray
    t: np.ndarray
    condition: float

    @property
    def open_channels(self):
        return self.r.shape[0]

    def flux_balance(self):
        """sum_n p_n (|t_mn|^2 + |r_mn|^2) - p_m for each incident channel m."""
        p = self.momenta
        flux = (np.abs(self.t) ** 2 + np.abs(self.r) ** 2) @ p
        return flux - p

    def reciprocity_defect(self):
        """max |p_n r_mn - p_m r_nm|.

        The amplitudes refer to unnormalized channel waves, so the symmetric
        object is diag(p) r, not r itself.
        """
        w = self.r * self.momenta[None, :]
        return float(np.abs(w - w.T).max()) if w.size else 0.0


def scattering_matrix(k, lam, N=None, margin=EVANESCENT_MARGIN, cond_warn=1e12):
    """Reflection and transmission amplitudes at energy k^2 > 1/2.

    Solves sum_n (2 p_n delta_ln - i lam Y_ln) r_mn = i lam Y_lm for every
    open incident channel m, with open momenta p_n = sqrt(k^2 - eps_n) > 0
    and closed ones p_n = -i sqrt(eps_n - k^2); with this sign of the
    coupling term that choice makes the closed channels decay.  t = delta + r.
    """
    k2 = float(k) ** 2
    if not k2 > 0.5:
        raise DomainError(f"k^2={k2} is below the lowest threshold 1/2: no open channel")
    nu = int(math.floor(k2 - 0.5)) + 1
    for n in range(nu + 1):
        if abs(k2 - channel_energy(n)) < 1e-12:
            raise BranchPointError(f"k^2={k2} coincides with the threshold eps_{n}")
    N = nu + margin - 1 if N is None else N
    if N < nu:
        raise ValueError(f"truncation N={N} smaller than the number of open channels {nu}")
    eps = np.arange(N + 1) + 0.5
    p = np.where(eps < k2, np.sqrt(np.abs(k2 - eps)) + 0j, -1j * np.sqrt(np.abs(eps - k2)))
    Y = position_matrix(N)
    A = np.diag(2.0 * p) - 1j * lam * Y
    rhs = 1j * lam * Y[:, :nu]
    cond = float(np.linalg.cond(A))
    if cond > cond_warn:
        import warnings
        warnings.warn(f"scattering system ill-conditioned (cond={cond:.2e})", RuntimeWarning, stacklevel=2)
    sol = np.linalg.solve(A, rhs)  # column m holds r_{m, .}
    r = sol[:nu, :].T.copy()
    t = np.eye(nu) + r
    return ScatteringSolution(k=float(k), lam=float(lam), N=N, momenta=p[:nu].real.copy(), r=r, t=t,
                              condition=cond)
