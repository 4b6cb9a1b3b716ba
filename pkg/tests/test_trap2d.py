import json
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from switchlab.errors import DomainError
from switchlab.schrodinger1d import gamma_p
from switchlab.trap2d import (DIRICHLET, NEUMANN, DiscProblem, TrapPotential, build_operator,
                              disc_eigenvalues, disc_mesh, ground_state_field, inertia_below,
                              negative_count, refined_bracket, squeeze_scan)

J01 = 2.404825557695773


@pytest.fixture(scope="module")
def critical2():
    return TrapPotential.critical(2.0)


def test_potential_domain():
    with pytest.raises(DomainError):
        TrapPotential(0.5, 1.0)
    with pytest.raises(DomainError):
        TrapPotential(2.0, -0.1)
    V = TrapPotential(2.0, 1.0)
    assert V(3.0, 0.0) == pytest.approx(-3.0)
    assert V(1.0, 1.0) == pytest.approx(1.0 - math.sqrt(2.0))


def test_critical_coupling_from_gamma():
    assert TrapPotential.critical(2.0).lam == pytest.approx(1.0, abs=1e-6)
    assert TrapPotential.critical(3.0).lam == pytest.approx(gamma_p(3.0), abs=1e-6)


def test_grid_step_limit():
    V = TrapPotential(2.0, 0.0)
    with pytest.raises(ValueError):
        DiscProblem(V, 4.0, 0.1)
    DiscProblem(V, 5.0, 0.1)
    with pytest.raises(ValueError):
        DiscProblem(V, 5.0, 0.1, boundary="robin")


def test_mesh_is_clipped_square_lattice():
    mesh = disc_mesh(1.0, 0.02)
    assert np.all(mesh.x ** 2 + mesh.y ** 2 <= 1.0 + 1e-12)
    assert mesh.size == np.count_nonzero(mesh.index >= 0)
    # symmetric under the lattice reflections
    assert np.array_equal(mesh.index >= 0, (mesh.index >= 0).T)
    A = build_operator(DiscProblem(TrapPotential(2.0, 1.0), 1.0, 0.02))
    assert abs(A - A.T).max() == 0


def test_dirichlet_disc_lower_bound():
    R = 2.0
    E = disc_eigenvalues(DiscProblem(TrapPotential(2.0, 0.0), R, 0.04), 1).values[0]
    assert E >= (J01 / R) ** 2


@settings(max_examples=10)
@given(st.integers(30, 400), st.floats(-3.0, 3.0), st.integers(0, 2 ** 31 - 1))
def test_inertia_matches_dense(n, sigma, seed):
    rng = np.random.default_rng(seed)
    B = sp.random(n, n, density=4.0 / n, random_state=rng)
    A = (B + B.T + sp.diags(rng.normal(size=n))).tocsc()
    w = np.linalg.eigvalsh(A.toarray())
    if np.min(np.abs(w - sigma)) < 1e-9:
        return
    assert inertia_below(A, sigma) == np.count_nonzero(w < sigma)


def test_inertia_on_trap_operator():
    prob = DiscProblem(TrapPotential(2.0, 0.0), 8.0, 0.16)
    w = disc_eigenvalues(prob, 6).values
    A = build_operator(prob)
    for k in range(5):
        if w[k + 1] - w[k] > 1e-8:
            assert inertia_below(A, 0.5 * (w[k] + w[k + 1])) == k + 1


def test_h_squared_order():
    prob = DiscProblem(TrapPotential(2.0, 0.0), 8.0, 0.16)
    hs, E = [], []
    for _ in range(3):
        E.append(disc_eigenvalues(prob, 1).values[0])
        hs.append(prob.h)
        prob = prob.refined()
    # successive differences shrink by 2^slope
    d = np.abs(np.diff(E))
    slope = math.log2(d[0] / d[1])
    assert slope == pytest.approx(2.0, abs=0.3)


def test_degenerate_pairs_split_below_tolerance():
    w = disc_eigenvalues(DiscProblem(TrapPotential(2.0, 0.0), 8.0, 0.08), 6).values
    gaps = np.diff(w)
    # the x <-> y swap pairs odd states; the pair must survive discretization
    assert np.count_nonzero(gaps < 1e-6) >= 1
    assert np.all((gaps < 1e-6) | (gaps > 1e-2))


@settings(max_examples=8)
@given(st.floats(1.5, 3.0), st.floats(0.0, 1.0), st.floats(3.0, 6.0))
def test_neumann_below_dirichlet(p, frac, R):
    V = TrapPotential(p, frac * gamma_p(p, tol=1e-6))
    prob = DiscProblem(V, R, R / 50)
    d = disc_eigenvalues(prob, 1).values[0]
    n = disc_eigenvalues(prob.with_boundary(NEUMANN), 1).values[0]
    assert n <= d + 1e-10 * max(1.0, abs(d))


def test_squeeze_small_scan(critical2):
    rep = squeeze_scan(critical2, [4.0, 6.0, 8.0], 0.08)
    assert rep.bracket_ok and rep.dirichlet_monotone and not rep.flags
    assert [r.R for r in rep.rows] == [4.0, 6.0, 8.0]
    gaps = [r.gap for r in rep.rows]
    assert gaps[0] > gaps[1] > gaps[2]
    assert rep.estimate < 0
    d = rep.to_dict()
    assert d["potential"] == {"p": 2.0, "lam": critical2.lam}
    json.dumps(d)


def test_subcritical_stays_positive():
    rep = squeeze_scan(TrapPotential(2.0, 0.5), [4.0, 6.0, 8.0], 0.08, count=1)
    assert rep.bracket_ok and rep.dirichlet_monotone
    for row in rep.rows:
        assert row.neumann[0] > 0 and row.dirichlet[0] > 0
    assert rep.gap < 1e-3


def test_single_negative_eigenvalue(critical2):
    # coarser steps under-resolve the narrow channel ends, where staircase
    # Neumann nodes produce spurious negative values
    for bc in (DIRICHLET, NEUMANN):
        assert negative_count(DiscProblem(critical2, 10.0, 0.05, bc)) == 1


def test_spurious_neumann_states_leave_under_refinement(critical2):
    second = [disc_eigenvalues(DiscProblem(critical2, 10.0, h, NEUMANN), 2).values[1] for h in (0.1, 0.08, 0.05)]
    assert np.all(np.diff(second) > 0)


def test_refined_bracket_coarse(critical2):
    br = refined_bracket(critical2, 8.0, 0.16)
    assert br.lower <= br.upper
    assert br.contains(-0.18365)
    assert br.gap <= 5e-2
    assert br.dirichlet.extrapolated is not None


@pytest.fixture(scope="module")
def field10(critical2):
    return ground_state_field(DiscProblem(critical2, 10.0, 0.1))


def test_field_symmetry(field10):
    v = field10.field.values
    assert np.abs(v - v.T).max() < 1e-8
    assert np.abs(v - v[::-1, :]).max() < 1e-8
    assert np.abs(v - v[:, ::-1]).max() < 1e-8


def test_field_normalized_and_positive(field10):
    v = field10.field.values
    h = field10.problem.h
    assert np.sum(v ** 2) * h * h == pytest.approx(1.0, rel=1e-12)
    assert v.max() > 0 and v.min() > -1e-10 * v.max()
    assert field10.residual < 1e-8


def test_field_cross_shape(field10):
    # the ground state spreads along the axes (channels of |xy|^p) and dies off
    # faster along the diagonals
    v = field10.field.values
    h = field10.problem.h
    m = v.shape[0] // 2
    for r, factor in ((2.0, 2.0), (4.0, 100.0), (6.0, 100.0)):
        axis = v[m + int(round(r / h)), m]
        diag = v[m + int(round(r / h / math.sqrt(2))), m + int(round(r / h / math.sqrt(2)))]
        assert axis > factor * diag
    along = [v[m + int(round(r / h)), m] for r in (2.0, 4.0, 6.0, 8.0)]
    assert np.all(np.diff(along) < 0)


def test_field_contour_and_sidecar(field10, tmp_path):
    assert field10.contours
    thr = field10.level * field10.field.values.max()
    from scipy.interpolate import RegularGridInterpolator
    f = RegularGridInterpolator((field10.field.x, field10.field.y), field10.field.values)
    pts = np.vstack(field10.contours)
    assert np.allclose(f(pts), thr, atol=1e-3 * thr + 1e-12)
    path = tmp_path / "field.json"
    field10.write_sidecar(path)
    meta = json.loads(path.read_text())
    assert meta["R"] == 10.0 and meta["h"] == 0.1 and meta["boundary"] == DIRICHLET
    assert meta["eigenvalues"][0] == pytest.approx(field10.eigenvalue)
    assert meta["residuals"][0] < 1e-8


@pytest.fixture(scope="module")
def fields20(critical2):
    fd = ground_state_field(DiscProblem(critical2, 20.0, 0.05, DIRICHLET))
    fn = ground_state_field(DiscProblem(critical2, 20.0, 0.05, NEUMANN))
    X, Y = np.meshgrid(fd.field.x, fd.field.y, indexing="ij")
    bulk = np.hypot(X, Y) <= 5.0
    return fd, fn, np.abs(fd.field.values - fn.field.values)[bulk].max()


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="measured bulk difference 2.7e-6 at R=20, h=0.05; see decisions ledger")
def test_dirichlet_neumann_fields_agree_in_bulk(fields20):
    assert fields20[2] < 1e-6


@pytest.mark.slow
def test_dirichlet_neumann_fields_measured_difference(fields20):
    fd, fn, diff = fields20
    # relative to the field maximum the two agree to about 1e-5
    assert diff < 2e-5 * fd.field.values.max()
    assert fd.eigenvalue == pytest.approx(fn.eigenvalue, abs=1e-6)
