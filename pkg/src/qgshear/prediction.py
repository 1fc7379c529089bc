"""Mean-field predictions and constraint-satisfying initial conditions.

The statistical theory for the conservative discretization predicts
<q> = mu <psi> with mu determined, together with an inverse-temperature
like parameter alpha, by splitting the ensemble energy and enstrophy
into mean and fluctuation parts over the spectral truncation
k, l in {-N/2+1, ..., N/2}:

    E_mean = 1/2 sum (k^2+l^2) |h_kl|^2 / (mu + k^2+l^2)^2 * delta^2
    E_fluc = 1/(2 alpha) sum 1 / (mu + k^2+l^2)
    Z_mean = 1/2 sum mu^2 |h_kl|^2 / (mu + k^2+l^2)^2 * delta^2
    Z_fluc = 1/(2 alpha) sum (k^2+l^2) / (mu + k^2+l^2)

and requiring E_mean + E_fluc = E_target, Z_mean + Z_fluc = Z_target.
The sums run over every retained mode including (0, 0), whose only
nonvanishing contribution is the 1/(2 alpha mu) term in E_fluc; the
solution branch of interest has -1 < mu < 0 so that term is finite.
Fourier coefficients are normalized as h_hat = fft2(h)/N, which makes
|h_hat|^2 * delta^2 equal (2 pi)^2 times the squared coefficient of the
corresponding complex exponential.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .arakawa import State
from .diagnostics import invariants
from .grid import GridSpec, build_grid

__all__ = [
    "NonConvergenceError",
    "PredictionOutput",
    "topography",
    "predict_mu",
    "prediction_table",
    "format_prediction_table",
    "generate_initial",
    "DEFAULT_PREDICTION_SIZES",
]

DEFAULT_PREDICTION_SIZES = (6, 8, 10, 16, 22, 32, 64)


class NonConvergenceError(RuntimeError):
    pass


def topography(grid: GridSpec) -> np.ndarray:
    """h(x, y) = 0.2 cos x + 0.4 cos 2x sampled on the grid (x = row)."""
    hx = 0.2 * np.cos(grid.x) + 0.4 * np.cos(2.0 * grid.x)
    return np.tile(hx[:, None], (1, grid.N))


@dataclass(frozen=True)
class PredictionOutput:
    mu: float
    alpha: float
    residuals: tuple
    iterations: int


def _mode_data(N: int, h: np.ndarray):
    delta = 2.0 * np.pi / N
    k = np.fft.fftfreq(N, d=1.0 / N)
    K, L = np.meshgrid(k, k, indexing="ij")
    m = (K**2 + L**2).ravel()
    h2 = (np.abs(np.fft.fft2(h) / N) ** 2).ravel()
    return delta, m, h2


def _residuals_jacobian(mu, alpha, delta, m, h2, E_t, Z_t):
    den = mu + m
    den2 = den * den
    den3 = den2 * den
    d2 = delta * delta
    E_mean = 0.5 * d2 * np.sum(m * h2 / den2)
    Z_mean = 0.5 * d2 * np.sum(mu * mu * h2 / den2)
    E_fluc = 0.5 / alpha * np.sum(1.0 / den)
    Z_fluc = 0.5 / alpha * np.sum(m / den)
    F = np.array([E_mean + E_fluc - E_t, Z_mean + Z_fluc - Z_t])
    J = np.array(
        [
            [
                -d2 * np.sum(m * h2 / den3) - 0.5 / alpha * np.sum(1.0 / den2),
                -0.5 / alpha**2 * np.sum(1.0 / den),
            ],
            [
                d2 * np.sum(h2 * mu * m / den3) - 0.5 / alpha * np.sum(m / den2),
                -0.5 / alpha**2 * np.sum(m / den),
            ],
        ]
    )
    return F, J


def predict_mu(
    N: int,
    E_target: float = 7.0,
    Z_target: float = 20.0,
    h: np.ndarray = None,
    mu0: float = -0.3,
    alpha0: float = 1.0,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> PredictionOutput:
    """Solve the two mean-field equations for (mu, alpha) by damped Newton.

    Steps are halved until mu stays inside (-m_min, 0) with m_min the
    smallest nonzero mode Laplacian (1 for these grids) and alpha stays
    positive, so every denominator remains on the solution branch.
    """
    if E_target <= 0 or Z_target <= 0:
        raise ValueError("targets must be positive")
    grid = build_grid(N)
    if h is None:
        h = topography(grid)
    delta, m, h2 = _mode_data(N, h)
    m_min = m[m > 0].min()
    x = np.array([float(mu0), float(alpha0)])
    if not (-m_min < x[0] < 0.0) or x[1] <= 0.0:
        raise ValueError("initial guess outside the solution branch")
    for it in range(1, max_iter + 1):
        F, J = _residuals_jacobian(x[0], x[1], delta, m, h2, E_target, Z_target)
        if np.max(np.abs(F)) <= tol:
            return PredictionOutput(
                mu=float(x[0]), alpha=float(x[1]), residuals=(F[0], F[1]), iterations=it
            )
        step = np.linalg.solve(J, -F)
        t = 1.0
        while not (-m_min < x[0] + t * step[0] < 0.0 and x[1] + t * step[1] > 0.0):
            t *= 0.5
            if t < 1e-14:
                raise NonConvergenceError("damping failed to keep iterate in domain")
        x = x + t * step
    raise NonConvergenceError(f"no convergence after {max_iter} iterations")


def prediction_table(sizes=DEFAULT_PREDICTION_SIZES, E_target=7.0, Z_target=20.0):
    return [(N, predict_mu(N, E_target, Z_target).mu) for N in sizes]


def format_prediction_table(rows) -> str:
    lines = ["N predicted_mu"]
    for N, mu in rows:
        lines.append(f"{N} {mu:.4f}")
    return "\n".join(lines) + "\n"


def _band_field(rng: np.random.Generator, N: int, lo: float, hi: float) -> np.ndarray:
    """Random real field supported on modes with lo < k^2+l^2 <= hi."""
    k = np.fft.fftfreq(N, d=1.0 / N)
    K, L = np.meshgrid(k, k, indexing="ij")
    m = K**2 + L**2
    mask = (m > lo) & (m <= hi)
    w = np.real(np.fft.ifft2(np.fft.fft2(rng.standard_normal((N, N))) * mask))
    return w


def _min_energy_field(N: int, h: np.ndarray, Z_target: float) -> np.ndarray:
    """Zero-mean field minimizing the energy at fixed enstrophy.

    Trust-region solution in Fourier space: mode m gets the h-aligned
    weight a_m h_m / (a_m - a_min) with a_m = -1/lambda_m, and whatever
    radius is left goes to the largest-|lambda| mode (the grid
    checkerboard), which carries the least energy per unit enstrophy.
    Used as a mixing direction able to pull the energy all the way down.
    """
    from .grid import laplacian_eigenvalues

    lam = laplacian_eigenvalues(N)
    a = np.zeros_like(lam)
    nz = lam != 0.0
    a[nz] = -1.0 / lam[nz]
    a_min = a[nz].min()
    fh = np.fft.fft2(h)
    qh = np.zeros_like(fh)
    denom = a - a_min
    fixed = (denom > 1e-12) & nz
    qh[fixed] = a[fixed] * fh[fixed] / denom[fixed]
    delta = 2.0 * np.pi / N
    R2 = 2.0 * Z_target / delta**2  # spatial sum(q^2) on the target sphere
    used = np.sum(np.abs(qh) ** 2) / N**2
    if used < R2:
        cb = np.zeros((N, N))
        cb[N // 2, N // 2] = 1.0  # the a_min eigenmode, real checkerboard
        qh += np.sqrt((R2 - used)) * N * cb
    q = np.real(np.fft.ifft2(qh))
    return q


def _zero_third_moment(q: np.ndarray) -> np.ndarray:
    """Shift q along the centered-square direction to kill sum(q^3).

    With g = q*q - mean(q*q), sum((q + s g)^3) is an exact cubic in s;
    the real root of smallest magnitude is applied. The direction has
    zero mean, so the total vorticity is untouched.
    """
    g = q * q - np.mean(q * q)
    c0 = np.sum(q**3)
    c1 = 3.0 * np.sum(q * q * g)
    c2 = 3.0 * np.sum(q * g * g)
    c3 = np.sum(g**3)
    roots = np.roots([c3, c2, c1, c0])
    real = roots[np.abs(roots.imag) < 1e-9 * (1.0 + np.abs(roots.real))].real
    if len(real) == 0:
        return q
    s = real[np.argmin(np.abs(real))]
    return q + s * g


def generate_initial(
    grid: GridSpec,
    h: np.ndarray,
    E_target: float = 7.0,
    Z_target: float = 20.0,
    seed: int = 0,
    tol: float = 1e-8,
    max_outer: int = 200,
    max_retries: int = 5,
) -> State:
    """Random vorticity field with C = 0, M3 = 0, E and Z at the targets.

    Projection loop: subtract the mean, zero the third moment along a
    cubic-shift direction, rescale to the enstrophy target, then mix
    with an enstrophy-neutral spectral-band field (orthogonal, equal
    norm) through an angle that lands on the energy target. The band is
    picked per retry so the mixing can push the energy either way: low
    wavenumbers raise it, high wavenumbers lower it. Each stage
    preserves what the previous ones fixed up to the mixing, which
    shrinks as the loop converges. Deterministic for a given seed.
    """
    if Z_target <= 0 or E_target <= 0:
        raise ValueError("targets must be positive")
    rng = np.random.default_rng(seed)
    nrm2 = lambda a: float(np.sum(a * a))
    m_max = 2.0 * (grid.N / 2) ** 2
    bands = ((0.0, 2.0), None, (0.5 * m_max, m_max), (0.0, m_max))
    w_floor = _min_energy_field(grid.N, h, Z_target)

    for retry in range(max_retries * len(bands)):
        q = rng.standard_normal((grid.N, grid.N))
        band = bands[retry % len(bands)]
        w_seed = w_floor if band is None else _band_field(rng, grid.N, *band)
        for _ in range(max_outer):
            q = q - np.mean(q)
            q = _zero_third_moment(q)
            rec = invariants(State(q=q, h=h))
            q = q * np.sqrt(Z_target / rec.Z)

            w = w_seed - (np.sum(w_seed * q) / nrm2(q)) * q
            if nrm2(w) <= 1e-12 * nrm2(w_seed):
                break  # mixing direction degenerate; redraw
            w = w * np.sqrt(nrm2(q) / nrm2(w))

            def energy_gap(theta):
                qt = np.cos(theta) * q + np.sin(theta) * w
                return invariants(State(q=qt, h=h)).E - E_target

            thetas = np.linspace(-np.pi, np.pi, 145)
            vals = np.array([energy_gap(t) for t in thetas])
            sign_change = np.flatnonzero(vals[:-1] * vals[1:] <= 0.0)
            if len(sign_change) == 0:
                break  # energy target unreachable from here; redraw
            j = sign_change[np.argmin(np.abs(thetas[sign_change]))]
            theta = brentq(energy_gap, thetas[j], thetas[j + 1], xtol=1e-15)
            q = np.cos(theta) * q + np.sin(theta) * w

            rec = invariants(State(q=q, h=h))
            if (
                abs(rec.C) <= tol
                and abs(rec.M3) <= tol
                and abs(rec.E - E_target) <= tol
                and abs(rec.Z - Z_target) <= tol
            ):
                return State(q=q, h=h)
    raise NonConvergenceError(
        "initial condition projection failed for every retry"
    )
