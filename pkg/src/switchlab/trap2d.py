"""Finite-difference eigenvalues of -Laplace + |xy|^p - lam (x^2 + y^2)^(p/(p+2)) on a disc.

The disc is replaced by the lattice nodes (i h, j h) with i^2 + j^2 <= (R/h)^2
and the 5-point Laplacian.  Dirichlet: neighbours outside the disc are zero.
Neumann: each missing neighbour is a mirrored ghost equal to the node
itself, so the link simply drops out (the graph Laplacian of the clipped
lattice).  Both matrices are symmetric.

Eigenvalues come from ARPACK in shift-invert mode.  The shifted matrix is
factored by SuperLU with a symmetric fill-reducing ordering and no
off-diagonal pivoting, so its diagonal pivots are those of an LDL^T
factorization and their signs give the inertia (Sylvester's law).  The
inertia certifies that the shift lies below the spectrum, so the
eigenvalues nearest to it are the lowest ones, and counts eigenvalues
below 0 without computing them.
"""
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import ConvergenceError, DomainError
from .schrodinger1d import gamma_p
from .wavefields import Field2D

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
DEFAULT_SHIFT = -1.0
# keeps meshes within a few GB of fill-in on desk hardware
MAX_UNKNOWNS = 1_500_000


@dataclass(frozen=True)
class TrapPotential:
    p: float
    lam: float

    def __post_init__(self):
        if not self.p >= 1:
            raise DomainError(f"p must be >= 1, got {self.p}")
        if not self.lam >= 0:
            raise DomainError(f"coupling must be >= 0, got {self.lam}")

    @classmethod
    def critical(cls, p, tol=1e-6):
        """Coupling at the critical value lam = gamma_p."""
        return cls(p, gamma_p(p, tol=tol))

    def __call__(self, x, y):
        p = self.p
        return np.abs(x * y) ** p - self.lam * (x * x + y * y) ** (p / (p + 2.0))


@dataclass(frozen=True)
class DiscProblem:
    potential: TrapPotential
    R: float
    h: float
    boundary: str = DIRICHLET

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"radius must be positive, got {self.R}")
        if not 0 < self.h <= self.R / 50 * (1 + 1e-12):
            raise ValueError(f"grid step {self.h} must lie in (0, R/50] = (0, {self.R / 50}]")
        if self.boundary not in (DIRICHLET, NEUMANN):
            raise ValueError(f"unknown boundary condition {self.boundary!r}")

    def refined(self):
        return DiscProblem(self.potential, self.R, self.h / 2, self.boundary)

    def with_boundary(self, boundary):
        return DiscProblem(self.potential, self.R, self.h, boundary)

    def with_radius(self, R):
        return DiscProblem(self.potential, R, self.h, self.boundary)


@dataclass
class DiscMesh:
    m: int
    h: float
    index: np.ndarray  # (2m+1, 2m+1), -1 outside the disc
    x: np.ndarray
    y: np.ndarray

    @property
    def size(self):
        return self.x.size


def disc_mesh(R, h):
    m = int(math.floor(R / h + 1e-9))
    i = np.arange(-m, m + 1)
    I, J = np.meshgrid(i, i, indexing="ij")
    inside = I ** 2 + J ** 2 <= (R / h) ** 2 * (1 + 1e-12)
    index = np.full(I.shape, -1, dtype=np.int64)
    index[inside] = np.arange(int(inside.sum()))
    return DiscMesh(m, h, index, I[inside] * h, J[inside] * h)


def build_operator(problem, mesh=None):
    """Sparse symmetric matrix of the discretized operator (CSC)."""
    mesh = disc_mesh(problem.R, problem.h) if mesh is None else mesh
    if mesh.size > MAX_UNKNOWNS:
        raise MemoryError(f"{mesh.size} unknowns exceed the budget of {MAX_UNKNOWNS}")
    h2 = 1.0 / problem.h ** 2
    n = mesh.size
    diag = problem.potential(mesh.x, mesh.y).astype(float)
    if problem.boundary == DIRICHLET:
        diag += 4.0 * h2
    ii = np.rint(mesh.x / mesh.h).astype(np.int64) + mesh.m
    jj = np.rint(mesh.y / mesh.h).astype(np.int64) + mesh.m
    rows, cols = [], []
    size = 2 * mesh.m + 1
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        a, b = ii + di, jj + dj
        ok = (a >= 0) & (a < size) & (b >= 0) & (b < size)
        nb = np.full(n, -1, dtype=np.int64)
        nb[ok] = mesh.index[a[ok], b[ok]]
        has = nb >= 0
        rows.append(np.nonzero(has)[0])
        cols.append(nb[has])
        if problem.boundary == NEUMANN:
            diag[has] += h2
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    off = sp.csc_matrix((np.full(r.size, -h2), (r, c)), shape=(n, n))
    return (off + sp.diags(diag, format="csc")).tocsc()


def _symmetric_lu(A, sigma):
    M = (A - sigma * sp.identity(A.shape[0], format="csc")).tocsc()
    lu = sla.splu(M, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options=dict(SymmetricMode=True))
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise ConvergenceError("pivoting broke the symmetric factorization; inertia unavailable")
    return lu


def inertia_below(A, sigma):
    """Number of eigenvalues of A below ``sigma``."""
    lu = _symmetric_lu(A, sigma)
    return int(np.count_nonzero(lu.U.diagonal() < 0))


@dataclass
class DiscSpectrum:
    problem: DiscProblem
    values: np.ndarray
    residuals: np.ndarray
    unknowns: int
    shift: float
    vectors: np.ndarray = None
    mesh: DiscMesh = None
    refined_values: np.ndarray = None

    @property
    def extrapolated(self):
        """Richardson estimate from h and h/2 (second-order scheme), if refined."""
        if self.refined_values is None:
            return None
        return self.refined_values + (self.refined_values - self.values) / 3.0

    @property
    def refinement_error(self):
        if self.refined_values is None:
            return None
        return np.abs(self.refined_values - self.values) / 3.0


def _solve(problem, count, sigma, tol, want_vectors):
    mesh = disc_mesh(problem.R, problem.h)
    A = build_operator(problem, mesh)
    if count >= A.shape[0]:
        raise ValueError(f"mesh has {A.shape[0]} unknowns, {count} eigenvalues requested")
    # move the shift below the spectrum if needed
    for _ in range(60):
        lu = _symmetric_lu(A, sigma)
        if np.count_nonzero(lu.U.diagonal() < 0) == 0:
            break
        sigma = 2.0 * sigma - 1.0
    else:
        raise ConvergenceError("could not place the shift below the spectrum")
    op = sla.LinearOperator(A.shape, matvec=lu.solve, dtype=float)
    try:
        w, v = sla.eigsh(A, k=count, sigma=sigma, which="LM", OPinv=op, tol=tol)
    except sla.ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"ARPACK did not converge; {len(exc.eigenvalues)} of {count} values found: {exc.eigenvalues}",
            last=exc.eigenvalues) from exc
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    res = np.linalg.norm(A @ v - v * w, axis=0) / np.maximum(1.0, np.abs(w))
    return w, res, A.shape[0], sigma, (v if want_vectors else None), mesh


def disc_eigenvalues(problem, count=2, sigma=DEFAULT_SHIFT, tol=0.0, refine=False, vectors=False,
                     residual_tol=1e-8):
    """Lowest ``count`` eigenvalues of the disc problem.

    With ``refine=True`` the mesh is also solved at h/2 and the result
    carries the Richardson estimate and its error bar.

    Raises
    ------
    ConvergenceError
        If ARPACK fails or a relative residual exceeds ``residual_tol``.
    """
    w, res, n, shift, v, mesh = _solve(problem, count, sigma, tol, vectors)
    if np.any(res > residual_tol):
        raise ConvergenceError(f"eigenpair residuals {res} above {residual_tol}", last=w)
    out = DiscSpectrum(problem, w, res, n, shift, v, mesh if vectors else None)
    if refine:
        fine = disc_eigenvalues(problem.refined(), count, sigma, tol, refine=False, residual_tol=residual_tol)
        out.refined_values = fine.values
    return out


def negative_count(problem):
    """Number of negative eigenvalues of the disc matrix, from its inertia at 0."""
    return inertia_below(build_operator(problem), 0.0)


# ---- Dirichlet/Neumann squeeze -------------------------------------------------

@dataclass
class SqueezeRow:
    R: float
    dirichlet: list
    neumann: list

    @property
    def gap(self):
        return self.dirichlet[0] - self.neumann[0]


@dataclass
class SqueezeReport:
    potential: TrapPotential
    h: float
    rows: list = field(default_factory=list)
    bracket_ok: bool = True
    dirichlet_monotone: bool = True
    R_star: float = math.nan
    estimate: float = math.nan
    gap: float = math.nan
    flags: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["potential"] = dict(p=self.potential.p, lam=self.potential.lam)
        return d


def squeeze_scan(potential, R_grid, h, count=2, sigma=DEFAULT_SHIFT, rtol=1e-10):
    """Dirichlet and Neumann curves over a radius grid at a fixed lattice step.

    On one lattice the node sets grow with R, so the Dirichlet values must
    be non-increasing (discrete domain monotonicity) and Neumann values must
    stay below Dirichlet ones; violations are flagged, not hidden.  The
    estimate is the midpoint of the lowest pair at the largest R and the
    gap is their distance.
    """
    report = SqueezeReport(potential, float(h))
    for R in sorted(float(r) for r in R_grid):
        prob = DiscProblem(potential, R, h, DIRICHLET)
        d = disc_eigenvalues(prob, count, sigma).values
        nv = disc_eigenvalues(prob.with_boundary(NEUMANN), count, sigma).values
        report.rows.append(SqueezeRow(R, [float(v) for v in d], [float(v) for v in nv]))
    for row in report.rows:
        if row.neumann[0] > row.dirichlet[0] + rtol * max(1.0, abs(row.dirichlet[0])):
            report.bracket_ok = False
            report.flags.append(f"Neumann above Dirichlet at R={row.R}")
    for a, b in zip(report.rows, report.rows[1:]):
        if b.dirichlet[0] > a.dirichlet[0] + rtol * max(1.0, abs(a.dirichlet[0])):
            report.dirichlet_monotone = False
            report.flags.append(f"Dirichlet value rises from R={a.R} to R={b.R}: mesh inadequate")
    gaps = [row.gap for row in report.rows]
    # R*: first radius after which the gap never increases
    report.R_star = report.rows[-1].R
    for i in range(len(gaps) - 1, 0, -1):
        if gaps[i] <= gaps[i - 1]:
            report.R_star = report.rows[i - 1].R
        else:
            break
    last = report.rows[-1]
    report.estimate = 0.5 * (last.dirichlet[0] + last.neumann[0])
    report.gap = last.gap
    return report


@dataclass
class Bracket:
    """Dirichlet/Neumann bracket for the lowest eigenvalue at one radius after h-refinement."""

    R: float
    h: float
    dirichlet: DiscSpectrum
    neumann: DiscSpectrum

    @property
    def lower(self):
        return float(self.neumann.extrapolated[0] - self.neumann.refinement_error[0])

    @property
    def upper(self):
        return float(self.dirichlet.extrapolated[0] + self.dirichlet.refinement_error[0])

    @property
    def gap(self):
        return self.upper - self.lower

    def contains(self, value):
        return self.lower <= value <= self.upper


def refined_bracket(potential, R, h, count=2, sigma=DEFAULT_SHIFT):
    """Extrapolate both boundary conditions from h and h/2 and widen by the error bars.

    Staircase Neumann converges slowly, so the raw pair at a single h does
    not bracket the continuum eigenvalue reliably; the extrapolated values
    do, within their estimated discretization error.
    """
    prob = DiscProblem(potential, R, h, DIRICHLET)
    d = disc_eigenvalues(prob, count, sigma, refine=True)
    n = disc_eigenvalues(prob.with_boundary(NEUMANN), count, sigma, refine=True)
    return Bracket(float(R), float(h), d, n)


# ---- ground-state field -------------------------------------------------------

@dataclass
class TrapField:
    field: Field2D
    contours: list
    level: float
    eigenvalue: float
    residual: float
    problem: DiscProblem

    def metadata(self):
        pr = self.problem
        return dict(p=pr.potential.p, lam=pr.potential.lam, R=pr.R, h=pr.h, boundary=pr.boundary,
                    eigenvalues=[self.eigenvalue], residuals=[self.residual], level=self.level,
                    contours=len(self.contours))

    def write_sidecar(self, path):
        with open(path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def ground_state_field(problem, level=1e-3, sigma=DEFAULT_SHIFT, degenerate_gap=1e-8):
    """Lowest eigenvector on the square grid with its contour at ``level * max``.

    The vector is normalized in the discrete L2 norm (sum u^2 h^2 = 1) with
    positive maximum.  Nodes outside the disc are set to 0.  If the lowest
    level is degenerate within ``degenerate_gap`` a warning is issued and the
    combination invariant under the lattice reflections is returned.
    """
    from skimage.measure import find_contours

    # a few extra values keep ARPACK from stalling on a degenerate second level
    spec = disc_eigenvalues(problem, 4, sigma, vectors=True)
    mesh = spec.mesh
    u = spec.vectors[:, 0]
    if spec.values[1] - spec.values[0] < degenerate_gap:
        warnings.warn(f"lowest eigenvalue degenerate (gap {spec.values[1] - spec.values[0]:.2e}); "
                      "returning the symmetric combination", RuntimeWarning, stacklevel=2)
        grid = np.zeros_like(mesh.index, dtype=float)
        for k in range(2):
            g = np.zeros_like(grid)
            g[mesh.index >= 0] = spec.vectors[:, k]
            grid += g.sum() * g
        u = grid[mesh.index >= 0]
    u = u / (np.linalg.norm(u) * problem.h)
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    values = np.zeros(mesh.index.shape)
    values[mesh.index >= 0] = u
    axis = np.arange(-mesh.m, mesh.m + 1) * problem.h
    fld = Field2D(axis, axis, values)
    thr = level * np.abs(values).max()
    contours = []
    for c in find_contours(values, thr):
        contours.append(np.column_stack([axis[0] + c[:, 0] * problem.h, axis[0] + c[:, 1] * problem.h]))
    return TrapField(fld, contours, level, float(spec.values[0]), float(spec.residuals[0]), problem)
