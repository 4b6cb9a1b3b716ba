"""Eigenfunctions of the channel models on a 2D grid and their nodal structure."""
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.linalg import solve_banded

from .errors import NotAnEigenvalue, UndefinedCountError
from .oscillator import eval_basis
from .secular import DELTA_PRIME, THRESHOLD, _secular_at_depth

# exp(-40) ~ 4e-18: modes past this contribute nothing at double precision
DECAY_CUTOFF = 40.0
DEFAULT_GRID = dict(x=(-8.0, 8.0), y=(-6.0, 6.0), step=0.02)


@dataclass
class ModeExpansion:
    variant: object
    eps: float
    depth: float
    coefficients: np.ndarray
    residual: float

    @property
    def kappa(self):
        return np.sqrt(np.arange(self.coefficients.size) + self.depth)


@dataclass
class Field2D:
    """Samples ``values[i, j] = f(x[i], y[j])`` on a rectangular grid."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    resolved: bool = True

    def __post_init__(self):
        if self.values.shape != (self.x.size, self.y.size):
            raise ValueError(f"values shape {self.values.shape} does not match grid "
                             f"({self.x.size}, {self.y.size})")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    @property
    def dx(self):
        return float(self.x[1] - self.x[0]) if self.x.size > 1 else 0.0

    @property
    def dy(self):
        return float(self.y[1] - self.y[0]) if self.y.size > 1 else 0.0


def null_vector(variant, eps, N, depth=None, tol=1e-10, iterations=3):
    """Unit null vector of B(eps) by inverse iteration, normalized so c_0 > 0.

    Pass ``depth`` (1/2 - eps from :class:`SpectralScan.depths`) to avoid
    the cancellation in 1/2 - eps for weakly bound states.

    Raises
    ------
    NotAnEigenvalue
        If ||B c|| exceeds 10 * tol * ||B||.
    """
    mu = THRESHOLD - eps if depth is None else depth
    if not mu > 0:
        raise NotAnEigenvalue(f"eps={eps} is not below the threshold 1/2")
    B = _secular_at_depth(variant, mu, N)
    ab = np.zeros((3, N + 1))
    ab[0, 1:] = B.e
    ab[1] = B.d
    ab[2, :-1] = B.e
    c = np.ones(N + 1) / math.sqrt(N + 1)
    for _ in range(iterations):
        try:
            c = solve_banded((1, 1), ab, c, check_finite=False)
        except np.linalg.LinAlgError:
            # exactly singular: the pivot that vanished already marks the kernel
            ab[1] += 1e-14 * B.norm_inf()
            c = solve_banded((1, 1), ab, c, check_finite=False)
        c /= np.linalg.norm(c)
    if c[0] < 0:
        c = -c
    residual = float(np.linalg.norm(B.matvec(c)))
    if residual > 10.0 * tol * B.norm_inf():
        raise NotAnEigenvalue(
            f"||B c|| = {residual:.3e} at eps={eps!r}: not a root of the secular equation "
            f"for {variant.label()}")
    return ModeExpansion(variant, THRESHOLD - mu, mu, c, residual)


def _axis(lo, hi, step):
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def evaluate_field(mode, x=None, y=None, step=None, coeff_floor=1e-16):
    """f(x, y) = sum_n c_n exp(-kappa_n |x|) psi_n(y), sgn(x)-odd for delta'.

    ``x``/``y`` may be arrays or ``(lo, hi)`` ranges sampled with ``step``;
    defaults cover [-8, 8] x [-6, 6] at step 0.02.  Coefficients below
    ``coeff_floor * max|c|`` are dropped, as are terms with kappa_n |x| > 40.
    The returned field has ``resolved=False`` when the grid cannot resolve the
    fastest retained exponential or oscillator oscillation.
    """
    step = DEFAULT_GRID["step"] if step is None else step
    xs = _axis(*DEFAULT_GRID["x"], step) if x is None else x
    ys = _axis(*DEFAULT_GRID["y"], step) if y is None else y
    xs = _axis(*xs, step) if isinstance(xs, tuple) else np.asarray(xs, dtype=float)
    ys = _axis(*ys, step) if isinstance(ys, tuple) else np.asarray(ys, dtype=float)

    c = mode.coefficients
    keep = np.nonzero(np.abs(c) > coeff_floor * np.abs(c).max())[0]
    n_eff = int(keep.max()) if keep.size else 0
    c = c[: n_eff + 1]
    kappa = mode.kappa[: n_eff + 1]

    psi = eval_basis(ys, n_eff)  # (n_eff + 1, ny)
    arg = np.outer(np.abs(xs), kappa)  # (nx, n_eff + 1)
    weights = np.where(arg > DECAY_CUTOFF, 0.0, np.exp(-np.minimum(arg, DECAY_CUTOFF))) * c
    values = weights @ psi
    if mode.variant.kind == DELTA_PRIME:
        values *= np.sign(xs)[:, None]

    dx = np.min(np.diff(xs)) if xs.size > 1 else math.inf
    dy = np.min(np.diff(ys)) if ys.size > 1 else math.inf
    # fastest retained decay rate and local oscillator wavenumber sqrt(2n+1)
    resolved = bool(kappa[-1] * dx <= 1.0 and math.sqrt(2 * n_eff + 1) * dy <= 1.0)
    return Field2D(xs, ys, values, resolved=resolved)


def nodal_domains(field, zero_band=1e-8):
    """Label sign domains with 4-connectivity; returns (labels, n_positive, n_negative).

    Points with |f| <= zero_band * max|f| belong to neither sign.
    """
    amp = np.abs(field.values).max()
    thr = zero_band * amp
    pos, n_pos = ndimage.label(field.values > thr)
    neg, n_neg = ndimage.label(field.values < -thr)
    labels = pos.copy()
    labels[neg > 0] = -neg[neg > 0]
    return labels, n_pos, n_neg


def nodal_count(field, zero_band=1e-8, noise_floor=1e-10):
    """Number of nodal lines, taken as (number of sign domains) - 1."""
    if np.abs(field.values).max() <= noise_floor:
        raise UndefinedCountError("field is below the noise floor everywhere")
    _, n_pos, n_neg = nodal_domains(field, zero_band)
    return n_pos + n_neg - 1


# ---- export -----------------------------------------------------------------

_MAGIC = b"SWF2"
_HEADER = struct.Struct("<4sII4d")


def write_field_csv(field, path):
    """Rows ``x,y,value`` with x varying slowest, 12 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write("x,y,value\n")
        for i, xv in enumerate(field.x):
            for j, yv in enumerate(field.y):
                fh.write(f"{xv:.12g},{yv:.12g},{field.values[i, j]:.12g}\n")


def read_field_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    return Field2D(xs, ys, data[:, 2].reshape(xs.size, ys.size))


def write_field_binary(field, path):
    """Compact grid format.

    Header (little-endian): 4-byte magic ``SWF2``, uint32 nx, uint32 ny,
    float64 x0, x1, y0, y1.  Payload: nx * ny float64 values, x index
    slowest.  Grid nodes are uniform, x_i = x0 + i (x1 - x0) / (nx - 1).
    """
    nx, ny = field.values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, nx, ny, field.x[0], field.x[-1], field.y[0], field.y[-1]))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field_binary(path):
    with open(path, "rb") as fh:
        magic, nx, ny, x0, x1, y0, y1 = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a field file (magic {magic!r})")
        values = np.frombuffer(fh.read(), dtype="<f8")
    if values.size != nx * ny:
        raise ValueError(f"{path}: payload has {values.size} values, header says {nx * ny}")
    return Field2D(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny), values.reshape(nx, ny).copy())
