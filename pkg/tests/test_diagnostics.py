import math

import numpy as np
import pytest

from qgshear.arakawa import State
from qgshear.diagnostics import (
    AveragingAccumulator,
    DiagnosticsRecord,
    KahanSum,
    diagnostics_row,
    estimate_mu,
    format_float,
    invariants,
)
from qgshear.grid import laplacian_pinv_apply, to_flat


def test_invariants_match_dense_quadratic_forms(ops6, h6, rng):
    q = rng.standard_normal((6, 6))
    rec = invariants(State(q=q, h=h6), t=2.5)
    d2 = ops6.delta**2
    qf, hf = to_flat(q), to_flat(h6)
    psi = ops6.lap_pinv @ (qf - hf)
    assert rec.t == 2.5
    assert rec.C == pytest.approx(d2 * qf.sum(), rel=1e-13, abs=1e-13)
    assert rec.E == pytest.approx(-0.5 * d2 * psi @ (qf - hf), rel=1e-12)
    assert rec.Z == pytest.approx(0.5 * d2 * qf @ qf, rel=1e-13)
    assert rec.M3 == pytest.approx(d2 / 3 * np.sum(qf**3), rel=1e-12)


def test_energy_positive_for_nonconstant_fields(h8, rng):
    # -lap_pinv is positive on zero-mean fields
    q = rng.standard_normal((8, 8))
    assert invariants(State(q=q, h=h8)).E > 0


def test_kahan_matches_fsum():
    rng = np.random.default_rng(7)
    ks = KahanSum(())
    vals = []
    for _ in range(2000):
        x = float(rng.standard_normal() * 10.0 ** rng.integers(-8, 8))
        vals.append(x)
        ks.add(np.asarray(x))
    want = math.fsum(vals)
    assert float(ks.total) == pytest.approx(want, rel=1e-15)
    # plain summation is measurably worse on this stream
    plain = sum(vals)
    assert abs(float(ks.total) - want) <= abs(plain - want)


def test_kahan_state_round_trip():
    ks = KahanSum((2, 2))
    for i in range(10):
        ks.add(np.full((2, 2), 0.1 * i))
    total, comp = ks.state()
    back = KahanSum.from_state(total, comp)
    back.add(np.ones((2, 2)))
    ks.add(np.ones((2, 2)))
    assert np.array_equal(back.total, ks.total)
    assert np.array_equal(back.comp, ks.comp)


def test_accumulator_streams_in_order(h8, rng):
    acc = AveragingAccumulator((8, 8), k0=3)
    st = State(q=rng.standard_normal((8, 8)), h=h8)
    with pytest.raises(ValueError):
        acc.add(st, 3)  # burn-in not yet passed
    acc.add(st, 4)
    with pytest.raises(ValueError):
        acc.add(st, 6)  # gap
    acc.add(st, 5)
    assert acc.count == 2


def test_streaming_mean_matches_batch(h8, rng):
    acc = AveragingAccumulator((8, 8), k0=0)
    qs, psis = [], []
    for k in range(1, 200):
        q = rng.standard_normal((8, 8))
        qs.append(q)
        psis.append(laplacian_pinv_apply(q - h8))
        acc.add(State(q=q, h=h8), k)
    assert np.max(np.abs(acc.mean_q() - np.mean(qs, axis=0))) < 1e-12
    assert np.max(np.abs(acc.mean_psi() - np.mean(psis, axis=0))) < 1e-12


def test_mu_estimate_recovers_exact_slope(rng):
    # arrange <q> exactly proportional to <psi>: with h = q - base the
    # stream function of every sample is pinv(base), and q = mu * psi
    N = 8
    base = rng.standard_normal((N, N))
    base -= base.mean()
    psi = laplacian_pinv_apply(base)
    mu_true = -0.25
    q = mu_true * psi
    h = q - base
    acc = AveragingAccumulator((N, N), k0=0)
    for k in range(1, 6):
        acc.add(State(q=q, h=h), k)
    assert estimate_mu(acc) == pytest.approx(mu_true, abs=1e-12)


def test_mu_estimate_needs_samples():
    acc = AveragingAccumulator((4, 4), k0=0)
    with pytest.raises(ValueError):
        estimate_mu(acc)


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, -2.5e-17, 1e300, -0.4344, np.pi):
        assert float(format_float(x)) == x


def test_diagnostics_row_layout():
    ref = DiagnosticsRecord(t=0.0, E=7.0, Z=20.0, C=0.5, M3=-0.25)
    rec = DiagnosticsRecord(t=1.0, E=7.7, Z=19.0, C=0.75, M3=-0.5, mu_hat=-0.4)
    row = diagnostics_row(rec, ref).split(",")
    assert len(row) == 10
    assert float(row[0]) == 1.0
    assert float(row[5]) == pytest.approx(0.1)  # relative energy drift
    assert float(row[6]) == pytest.approx(-0.05)
    assert float(row[7]) == pytest.approx(0.25)  # absolute drifts
    assert float(row[8]) == pytest.approx(0.25)
    assert float(row[9]) == -0.4
    row0 = diagnostics_row(ref, ref).split(",")
    assert row0[9] == "nan"
