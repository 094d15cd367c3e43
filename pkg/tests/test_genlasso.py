import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from stagewise import GaussianSignal, LeastSquares, PenaltyMatrix, run_genlasso_gaussian
from stagewise.exceptions import InputError, UnsupportedError
from stagewise.genlasso import (
    DualState, dual_step, primal_recover, read_pgm, read_signal_csv, signs, write_pgm,
    write_signal_csv)
from stagewise.harness.scenarios import piecewise_constant, two_level_image
from stagewise.oracle import genlasso_constrained_value, genlasso_lambda_max, genlasso_path


def fused_signal(seed, n=20, segments=5):
    rng = np.random.default_rng(seed)
    truth = piecewise_constant(n, segments, rng)
    return truth, truth + rng.standard_normal(n)


# ---------------------------------------------------------------------------
# builders


def test_chain3_rows():
    D = PenaltyMatrix.chain(3)
    assert np.array_equal(D.D.toarray(), [[-1, 1, 0], [0, -1, 1]])
    assert D.rows == [[(0, -1.0), (1, 1.0)], [(1, -1.0), (2, 1.0)]]


def test_grid_row_counts():
    assert PenaltyMatrix.grid2d(2, 2).shape == (4, 4)
    assert PenaltyMatrix.grid2d(3, 5).shape == (3 * 4 + 5 * 2, 15)


def test_grid_rows_are_adjacent_pixels():
    D = PenaltyMatrix.grid2d(3, 4).D.toarray()
    for row in D:
        a, b = np.flatnonzero(row == -1)[0], np.flatnonzero(row == 1)[0]
        (ra, ca), (rb, cb) = divmod(a, 4), divmod(b, 4)
        assert abs(ra - rb) + abs(ca - cb) == 1


def test_trend_is_composed_chain():
    D2 = PenaltyMatrix.trend(5, 2).D.toarray()
    comp = PenaltyMatrix.chain(4).D.toarray() @ PenaltyMatrix.chain(5).D.toarray()
    assert np.array_equal(D2, comp)
    for row in D2:
        nz = row[row != 0]
        assert np.array_equal(nz, [1, -2, 1])


def test_graph_builder_and_errors():
    D = PenaltyMatrix.graph([(0, 2), (1, 2)], 3)
    assert np.array_equal(D.D.toarray(), [[-1, 0, 1], [0, -1, 1]])
    with pytest.raises(InputError):
        PenaltyMatrix.graph([(0, 3)], 3)
    with pytest.raises(InputError):
        PenaltyMatrix.graph([(1, 1)], 3)
    with pytest.raises(InputError):
        PenaltyMatrix.custom(sparse.csr_matrix(np.array([[1.0, -1.0], [0.0, 0.0]])))
    with pytest.raises(InputError):
        PenaltyMatrix.chain(1)


def test_penalty_value():
    D = PenaltyMatrix.chain(4)
    assert D.penalty(np.array([0.0, 1.0, 1.0, -1.0])) == 3.0


# ---------------------------------------------------------------------------
# dual step and primal recovery


def test_dual_step_sign_pattern():
    # D beta = (0, 1): only the second row moves, and beta = y - D^T u
    # shrinks that difference
    D = PenaltyMatrix.chain(3)
    new = dual_step(DualState(np.zeros(2)), np.array([1.0, 1.0, 2.0]), D, 0.1)
    assert np.array_equal(new.u, [0.0, 0.1])
    beta = primal_recover(new, GaussianSignal(np.array([1.0, 1.0, 2.0])), D)
    assert np.allclose(beta, [1.0, 1.1, 1.9])


def test_dual_step_fused_is_fixed_point():
    D = PenaltyMatrix.chain(4)
    u = DualState(np.array([0.3, -0.2, 0.1]))
    assert np.array_equal(dual_step(u, np.full(4, 2.5), D, 0.1).u, u.u)


def test_signs_zero_tol():
    assert np.array_equal(signs(np.array([1e-15, -2.0, 0.0]), 1e-12), [0.0, -1.0, 0.0])
    assert np.array_equal(signs(np.array([1e-15, -2.0, 0.0])), [1.0, -1.0, 0.0])


def test_primal_recover_examples():
    y = np.array([3.0, 1.0, 4.0])
    D = PenaltyMatrix.chain(3)
    loss = GaussianSignal(y)
    assert np.array_equal(primal_recover(DualState(np.zeros(2)), loss, D), y)
    beta = primal_recover(DualState(np.array([1.0, 0.0])), loss, D)
    assert np.array_equal(beta, y - np.array([-1.0, 1.0, 0.0]))
    u = DualState(np.array([0.4, -1.3]))
    beta = primal_recover(u, loss, D)
    assert np.abs(loss.grad(beta) + D.D.T @ u.u).max() <= 1e-12


def test_primal_recover_rejects_other_losses():
    with pytest.raises(UnsupportedError, match="Gaussian"):
        primal_recover(DualState(np.zeros(1)), LeastSquares(np.eye(2), np.ones(2)),
                       PenaltyMatrix.chain(2))


# ---------------------------------------------------------------------------
# runs


def test_piecewise_constant_input_stops_at_once():
    path = run_genlasso_gaussian(np.full(6, 2.0), PenaltyMatrix.chain(6), 0.1, 50)
    assert len(path) == 1
    assert path.status == "stationary"


def test_two_point_chain_meets_in_five_steps():
    path = run_genlasso_gaussian(np.array([0.0, 1.0]), PenaltyMatrix.chain(2), 0.1, 50)
    states = np.array([r.state for r in path.records])
    assert np.allclose(np.diff(states, axis=1).ravel(), [1.0, 0.8, 0.6, 0.4, 0.2, 0.0])
    assert path.status == "stationary"
    assert len(path) == 6
    assert path.direction == "regularizing"


def test_dual_sup_grows_by_at_most_eps(rng):
    y = rng.standard_normal(15)
    path = run_genlasso_gaussian(y, PenaltyMatrix.chain(15), 0.05, 50)
    d = np.diff(path.extra("dual_sup"))
    assert np.all(d >= -1e-12)
    assert np.all(d <= 0.05 + 1e-12)


def test_conjugate_identity_along_run(rng):
    y = rng.standard_normal(12)
    D = PenaltyMatrix.chain(12)
    loss = GaussianSignal(y)
    u = DualState(np.zeros(11))
    beta = y.copy()
    for _ in range(40):
        assert np.abs(loss.conj_grad(-(D.D.T @ u.u)) - beta).max() <= 1e-12
        u = dual_step(u, beta, D, 0.05)
        beta = primal_recover(u, loss, D)


@pytest.mark.parametrize("builder", [lambda: PenaltyMatrix.chain(20),
                                     lambda: PenaltyMatrix.grid2d(5, 6),
                                     lambda: PenaltyMatrix.trend(15, 2)])
def test_primal_and_dual_forms_agree(builder, rng):
    D = builder()
    y = rng.standard_normal(D.shape[1])
    a = run_genlasso_gaussian(y, D, 0.01, 300, form="primal")
    b = run_genlasso_gaussian(y, D, 0.01, 300, form="dual")
    assert len(a) == len(b)
    for ra, rb in zip(a.records, b.records):
        assert np.abs(ra.state - rb.state).max() <= 1e-12
        assert np.array_equal(signs(D.D @ ra.state, 1e-12), signs(D.D @ rb.state, 1e-12))


def test_shrinkage_direction_on_chain(rng):
    y = 3 * rng.standard_normal(25)
    D = PenaltyMatrix.chain(25)
    eps = 0.02
    path = run_genlasso_gaussian(y, D, eps, 200)
    strict = 0
    for prev, cur in zip(path.records[:-1], path.records[1:]):
        dp, dc = D.D @ prev.state, D.D @ cur.state
        s = np.sign(dp)
        big = np.abs(dp) > eps * 2.0  # ||D_l||^2 = 2 on a chain
        assert np.all(np.abs(dc[big]) <= np.abs(dp[big]) + 1e-12)
        # the own-row pull is cancelled only when both neighbours share its sign
        left = np.r_[0.0, s[:-1]]
        right = np.r_[s[1:], 0.0]
        moving = big & ~((left == s) & (right == s))
        assert np.all(np.abs(dc[moving]) < np.abs(dp[moving]))
        strict += moving.sum()
    assert strict > 0


def test_run_validation():
    with pytest.raises(InputError):
        run_genlasso_gaussian(np.ones(3), PenaltyMatrix.chain(4), 0.1, 5)
    with pytest.raises(InputError):
        run_genlasso_gaussian(np.ones(3), PenaltyMatrix.chain(3), 0.0, 5)
    with pytest.raises(InputError):
        run_genlasso_gaussian(np.ones(3), PenaltyMatrix.chain(3), 0.1, 5, form="both")


def test_records_track_penalty_and_loss(rng):
    y = rng.standard_normal(10)
    D = PenaltyMatrix.chain(10)
    path = run_genlasso_gaussian(y, D, 0.05, 30)
    for r in path.records:
        assert r.t == pytest.approx(D.penalty(r.state))
        assert r.loss == pytest.approx(0.5 * np.sum((y - r.state) ** 2))
    assert path.t[1] < path.t[0]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.005, 0.2))
def test_mean_is_preserved(seed, eps):
    # every row of D sums to zero, so D^T s has zero sum and the mean never moves
    y = np.random.default_rng(seed).standard_normal(12)
    path = run_genlasso_gaussian(y, PenaltyMatrix.chain(12), eps, 40)
    assert abs(path.final_state.mean() - y.mean()) <= 1e-12


# ---------------------------------------------------------------------------
# agreement with the exact path


def test_image_best_frame_near_oracle():
    rng = np.random.default_rng(0)
    truth = two_level_image(8, 8).ravel()
    y = truth + rng.standard_normal(64)
    D = PenaltyMatrix.grid2d(8, 8)
    path = run_genlasso_gaussian(y, D, 0.01, 3000)
    sw = min(np.mean((r.state - truth) ** 2) for r in path.snapshots())
    lmax = genlasso_lambda_max(y, D.D)
    sols = genlasso_path(y, D.D, lmax * np.geomspace(1, 1e-3, 60))
    assert all(s.converged for s in sols)
    orc = min(np.mean((s.beta - truth) ** 2) for s in sols)
    assert sw <= 1.1 * orc


def _criterion_gaps(y, D, eps, steps, n_points=5):
    path = run_genlasso_gaussian(y, D, eps, steps)
    picks = np.linspace(0, len(path) - 1, n_points + 1).astype(int)[1:]
    out = []
    for i in picks:
        r = path.records[i]
        up, lo, _ = genlasso_constrained_value(y, D.D, r.t, tol=1e-9)
        assert up - lo <= 1e-8
        out.append((r.loss - lo) / lo)
    return np.array(out)


def test_chain_criterion_gap_shrinks_with_eps():
    _, y = fused_signal(0)
    D = PenaltyMatrix.chain(20)
    coarse = _criterion_gaps(y, D, 0.01, 900)
    fine = _criterion_gaps(y, D, 0.005, 1800)
    assert np.all(coarse >= -1e-9)
    assert np.max(fine) < 0.7 * np.max(coarse)
    assert np.max(coarse) < 0.1


@pytest.mark.xfail(strict=True, reason="relative criterion gap at eps=0.01 is about "
                   "5e-2 and shrinks linearly in eps; 1e-2 needs eps near 2e-3")
def test_chain_criterion_gap_below_one_percent():
    _, y = fused_signal(0)
    gaps = _criterion_gaps(y, PenaltyMatrix.chain(20), 0.01, 900)
    assert np.max(gaps) <= 1e-2


# ---------------------------------------------------------------------------
# IO


def test_pgm_roundtrip(tmp_path):
    img = np.arange(12).reshape(3, 4) / 11.0
    dest = tmp_path / "img.pgm"
    write_pgm(str(dest), img)
    back = read_pgm(str(dest))
    assert back.shape == (3, 4)
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12


def test_pgm_comments_and_errors(tmp_path):
    f = tmp_path / "c.pgm"
    f.write_text("P2\n# comment\n2 1\n10\n0 10\n")
    assert np.array_equal(read_pgm(str(f)), [[0.0, 1.0]])
    bad = tmp_path / "bad.pgm"
    bad.write_text("P5\n2 1\n10\n")
    with pytest.raises(InputError):
        read_pgm(str(bad))
    short = tmp_path / "short.pgm"
    short.write_text("P2\n2 2\n10\n1 2 3\n")
    with pytest.raises(InputError):
        read_pgm(str(short))
    with pytest.raises(OSError):
        read_pgm(str(tmp_path / "missing.pgm"))


def test_signal_csv_roundtrip(tmp_path, rng):
    y = rng.standard_normal(7)
    dest = tmp_path / "y.csv"
    write_signal_csv(str(dest), y)
    assert np.array_equal(read_signal_csv(str(dest)), y)
