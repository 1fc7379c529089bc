"""Conservative semi-discretizations of the barotropic vorticity equation.

The evolved field is the potential vorticity q on the periodic grid;
the stream function is psi = lap_pinv(q - h) for a fixed topography h.
Four finite-difference Jacobian forms are provided:

    J0  = Dx q * Dy psi - Dy q * Dx psi
    JE  = Dx(q * Dy psi) - Dy(q * Dx psi)      conserves energy
    JZ  = Dy(Dx q * psi) - Dx(Dy q * psi)      conserves enstrophy
    JEZ = (J0 + JE + JZ) / 3                   conserves both

Each component is a quadratic form f_i(q) = (q - h)^T A^i q. The A^i
have at most 4 nonzero columns (8 for JEZ), row and column i of A^i
vanish (so f_i never depends on q_i), and every A^i is the torus
translate of A^1. Those three facts are what the splitting integrator
relies on: the first bounds the cost, the second makes each shear an
exact flow, the third reduces storage to a single template.
"""

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, OperatorSet, laplacian_pinv_apply, to_flat, to_grid

__all__ = [
    "SCHEMES",
    "State",
    "eval_direct",
    "coefficient_matrix",
    "CoefficientTemplate",
    "build_template",
    "component",
    "eval_componentwise",
    "torus_shift_perm",
    "dump_template",
    "load_template",
]

SCHEMES = ("J0", "JE", "JZ", "JEZ")


def _check_scheme(scheme: str) -> str:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    return scheme


@dataclass
class State:
    """Vorticity and topography samples as (N, N) arrays."""

    q: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        # contiguous layout keeps reductions bitwise reproducible no
        # matter where the array came from (fresh draw or checkpoint)
        self.q = np.ascontiguousarray(self.q, dtype=float)
        self.h = np.ascontiguousarray(self.h, dtype=float)
        if self.q.shape != self.h.shape or self.q.ndim != 2:
            raise ValueError("q and h must be (N, N) arrays of equal shape")

    @property
    def N(self) -> int:
        return self.q.shape[0]


def _ddx(f: np.ndarray, delta: float) -> np.ndarray:
    return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * delta)


def _ddy(f: np.ndarray, delta: float) -> np.ndarray:
    return (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * delta)


def eval_direct(scheme: str, state: State) -> np.ndarray:
    """Vectorized evaluation of the chosen Jacobian form, (N, N) result."""
    _check_scheme(scheme)
    q, h = state.q, state.h
    delta = 2.0 * np.pi / q.shape[0]
    psi = laplacian_pinv_apply(q - h)

    def j0():
        return _ddx(q, delta) * _ddy(psi, delta) - _ddy(q, delta) * _ddx(psi, delta)

    def je():
        return _ddx(q * _ddy(psi, delta), delta) - _ddy(q * _ddx(psi, delta), delta)

    def jz():
        return _ddy(_ddx(q, delta) * psi, delta) - _ddx(_ddy(q, delta) * psi, delta)

    if scheme == "J0":
        return j0()
    if scheme == "JE":
        return je()
    if scheme == "JZ":
        return jz()
    return (j0() + je() + jz()) / 3.0


def coefficient_matrix(scheme: str, ops: OperatorSet, i: int) -> np.ndarray:
    """Dense A^i (0-based i) such that f_i(q) = (q - h)^T A^i q.

    O(N^4) memory; meant for template construction and verification.
    """
    _check_scheme(scheme)
    n2 = ops.N**2
    if not 0 <= i < n2:
        raise IndexError("component index out of range")
    dxi = ops.dx[i]
    dyi = ops.dy[i]

    def a_zero():
        return np.outer(ops.ly[i], dxi) - np.outer(ops.lx[i], dyi)

    def a_energy():
        return ops.ly.T * dxi[None, :] - ops.lx.T * dyi[None, :]

    def a_enstrophy():
        rows = ops.dy * dxi[None, :] - ops.dx * dyi[None, :]
        return (rows @ ops.lap_pinv).T

    if scheme == "J0":
        return a_zero()
    if scheme == "JE":
        return a_energy()
    if scheme == "JZ":
        return a_enstrophy()
    return (a_zero() + a_energy() + a_enstrophy()) / 3.0


def torus_shift_perm(i: int, N: int) -> np.ndarray:
    """Permutation sigma_i with sigma_i[k] = node k translated by node i.

    Working on flat indices: node k = (r, c) maps to
    ((r + r_i) mod N, (c + c_i) mod N). sigma_0 is the identity and
    A^i[sigma_i[k], sigma_i[l]] = A^1[k, l].
    """
    ri, ci = i % N, i // N
    k = np.arange(N * N)
    r, c = k % N, k // N
    return ((c + ci) % N) * N + (r + ri) % N


_NONZERO_COLUMN_TOL = 1e-14


@dataclass(frozen=True)
class CoefficientTemplate:
    """Sparse column representation of A^1, shared by all A^i.

    ``offsets`` holds the flat indices of the nonzero columns of A^1;
    ``cols[j]`` is column offsets[j] reshaped to the grid. The columns
    of A^i sit at the torus translate of those offsets by i, with the
    same values translated on the grid.
    """

    scheme: str
    N: int
    offsets: np.ndarray
    cols: np.ndarray = field(repr=False)  # (ncols, N, N)

    @property
    def ncols(self) -> int:
        return len(self.offsets)

    def dense(self, i: int = 0) -> np.ndarray:
        """Materialize A^i, mainly for tests and small-N checks."""
        N = self.N
        A = np.zeros((N * N, N * N))
        sig = torus_shift_perm(i, N)
        for off, col in zip(self.offsets, self.cols):
            A[sig, sig[off]] = to_flat(col)
        return A


def build_template(scheme: str, ops: OperatorSet) -> CoefficientTemplate:
    """Extract the nonzero columns of A^1 and their offsets.

    Columns are detected by thresholding |entry| > 1e-14 and the count
    is asserted against the structural bound (4, or 8 for JEZ), which
    catches construction bugs early.
    """
    _check_scheme(scheme)
    N = ops.N
    A1 = coefficient_matrix(scheme, ops, 0)
    mask = np.abs(A1) > _NONZERO_COLUMN_TOL
    offsets = np.flatnonzero(mask.any(axis=0))
    bound = 8 if scheme == "JEZ" else 4
    if len(offsets) > bound:
        raise AssertionError(
            f"{scheme}: found {len(offsets)} nonzero columns, expected <= {bound}"
        )
    cols = np.stack([to_grid(A1[:, off], N) for off in offsets])
    return CoefficientTemplate(scheme=scheme, N=N, offsets=offsets, cols=cols)


def component(template: CoefficientTemplate, i: int, state: State) -> float:
    """f_i(q) = (q - h)^T A^i q via the shifted template, O(ncols N^2)."""
    N = template.N
    if not 0 <= i < N * N:
        raise IndexError("component index out of range")
    ri, ci = i % N, i // N
    p = np.roll(state.q - state.h, (-ri, -ci), axis=(0, 1))
    total = 0.0
    for off, col in zip(template.offsets, template.cols):
        ro, co = off % N, off // N
        total += state.q[(ro + ri) % N, (co + ci) % N] * np.sum(col * p)
    return total


def eval_componentwise(template: CoefficientTemplate, state: State) -> np.ndarray:
    """All f_i at once via FFT cross-correlations, (N, N) result.

    Equivalent to calling ``component`` for every i but O(ncols N^2 log N).
    Used for whole-field evaluations (diagnostics, consistency tests);
    the time stepper needs the sequential scalar version instead.
    """
    q, h = state.q, state.h
    p_hat = np.fft.fft2(q - h)
    out = np.zeros_like(q)
    N = template.N
    for off, col in zip(template.offsets, template.cols):
        ro, co = off % N, off // N
        corr = np.real(np.fft.ifft2(np.conj(np.fft.fft2(col)) * p_hat))
        out += np.roll(q, (-ro, -co), axis=(0, 1)) * corr
    return out


def dump_template(template: CoefficientTemplate, path) -> None:
    """Write the stored columns as `col_offset idx value` triplets."""
    with open(path, "w") as fh:
        fh.write(f"# template N={template.N} scheme={template.scheme}\n")
        fh.write("# col_offset idx value (0-based flat indices)\n")
        for off, col in zip(template.offsets, template.cols):
            flat = to_flat(col)
            for idx in np.flatnonzero(np.abs(flat) > _NONZERO_COLUMN_TOL):
                fh.write(f"{off} {idx} {flat[idx]:.17g}\n")


def load_template(path) -> CoefficientTemplate:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# template"):
            raise ValueError("not a template file")
        meta = dict(tok.split("=") for tok in header.split() if "=" in tok)
        N = int(meta["N"])
        scheme = _check_scheme(meta["scheme"])
        fh.readline()
        entries = {}
        for line in fh:
            off_s, idx_s, val_s = line.split()
            entries.setdefault(int(off_s), np.zeros(N * N))[int(idx_s)] = float(val_s)
    offsets = np.array(sorted(entries), dtype=int)
    cols = np.stack([to_grid(entries[o], N) for o in offsets])
    return CoefficientTemplate(scheme=scheme, N=N, offsets=offsets, cols=cols)
