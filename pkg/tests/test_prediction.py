import numpy as np
import pytest

from qgshear.arakawa import State
from qgshear.diagnostics import invariants
from qgshear.grid import build_grid
from qgshear.prediction import (
    NonConvergenceError,
    _mode_data,
    _residuals_jacobian,
    format_prediction_table,
    generate_initial,
    predict_mu,
    prediction_table,
    topography,
)

# equilibrium slope for the default energy/enstrophy pair, by grid size
EXPECTED_MU = {
    6: -0.3995,
    8: -0.5646,
    10: -0.6402,
    16: -0.7106,
    22: -0.7298,
    32: -0.7409,
    64: -0.7487,
}


def test_topography_profile():
    g = build_grid(8)
    h = topography(g)
    x = g.x
    want = 0.2 * np.cos(x) + 0.4 * np.cos(2 * x)
    assert np.allclose(h[:, 0], want)
    assert np.allclose(h, h[:, :1])  # constant along the second axis
    assert abs(h.mean()) < 1e-15


def test_predicted_slopes_match_expected_values():
    for N, mu_want in EXPECTED_MU.items():
        out = predict_mu(N)
        assert out.mu == pytest.approx(mu_want, abs=2e-3)
        assert out.alpha > 0
        assert max(abs(r) for r in out.residuals) < 1e-10


def test_prediction_table_formatting():
    text = format_prediction_table(prediction_table((6, 8)))
    lines = text.strip().splitlines()
    assert lines[0] == "N predicted_mu"
    assert lines[1] == "6 -0.3995"
    assert lines[2] == "8 -0.5646"


def test_newton_jacobian_matches_finite_differences():
    N = 8
    h = topography(build_grid(N))
    delta, m, h2 = _mode_data(N, h)
    mu, alpha = -0.45, 1.3
    F, J = _residuals_jacobian(mu, alpha, delta, m, h2, 7.0, 20.0)
    eps = 1e-7
    for col, (dmu, dalpha) in enumerate(((eps, 0.0), (0.0, eps))):
        Fp, _ = _residuals_jacobian(mu + dmu, alpha + dalpha, delta, m, h2, 7.0, 20.0)
        Fm, _ = _residuals_jacobian(mu - dmu, alpha - dalpha, delta, m, h2, 7.0, 20.0)
        fd = (Fp - Fm) / (2 * eps)
        assert np.allclose(J[:, col], fd, rtol=1e-5, atol=1e-5)


def test_residuals_vanish_at_reported_solution():
    out = predict_mu(16)
    h = topography(build_grid(16))
    delta, m, h2 = _mode_data(16, h)
    F, _ = _residuals_jacobian(out.mu, out.alpha, delta, m, h2, 7.0, 20.0)
    assert np.max(np.abs(F)) < 1e-10


def test_prediction_rejects_bad_inputs():
    with pytest.raises(ValueError):
        predict_mu(8, E_target=-1.0)
    with pytest.raises(ValueError):
        predict_mu(8, mu0=0.5)


def test_initial_condition_hits_all_constraints():
    for N in (4, 6, 8, 16):
        g = build_grid(N)
        h = topography(g)
        st = generate_initial(g, h, 7.0, 20.0, seed=0)
        rec = invariants(st)
        assert abs(rec.C) < 1e-8
        assert abs(rec.M3) < 1e-8
        assert rec.E == pytest.approx(7.0, abs=1e-8)
        assert rec.Z == pytest.approx(20.0, abs=1e-8)


def test_initial_condition_deterministic_and_seed_sensitive():
    g = build_grid(8)
    h = topography(g)
    a = generate_initial(g, h, seed=3)
    b = generate_initial(g, h, seed=3)
    c = generate_initial(g, h, seed=4)
    assert np.array_equal(a.q, b.q)
    assert not np.array_equal(a.q, c.q)


def test_initial_condition_covers_target_range():
    g = build_grid(8)
    h = topography(g)
    for E_t in (2.0, 7.0, 20.0):
        st = generate_initial(g, h, E_t, 20.0, seed=1)
        assert invariants(st).E == pytest.approx(E_t, abs=1e-8)


def test_unreachable_energy_target_raises():
    # at this grid the enstrophy sphere caps the energy well below 50
    g = build_grid(8)
    h = topography(g)
    with pytest.raises(NonConvergenceError):
        generate_initial(g, h, 50.0, 20.0, seed=0, max_retries=1)
