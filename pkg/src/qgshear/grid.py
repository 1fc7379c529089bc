"""Periodic grid and divided-difference operators on [0, 2pi)^2.

The domain is sampled at x_r = r*delta, y_c = c*delta for r, c = 0..N-1
with delta = 2*pi/N. A field is stored either as an (N, N) array
``u[r, c] = u(x_r, y_c)`` or as a flat vector of length N^2 in
column-major order, n = c*N + r, so the x index varies fastest. All
dense operators below act on flat vectors in that convention, i.e.
Dx = I (x) D and Dy = D (x) I where (x) is the Kronecker product and D
is the one-dimensional central difference.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridSpec",
    "OperatorSet",
    "build_grid",
    "build_operators",
    "to_flat",
    "to_grid",
    "laplacian_pinv_apply",
    "laplacian_eigenvalues",
]


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry and the flat index convention."""

    N: int
    delta: float

    def linear_index(self, r: int, c: int) -> int:
        """Flat position of node (r, c), both 0-based, x index fastest."""
        return (c % self.N) * self.N + (r % self.N)

    def node(self, n: int):
        """Inverse of linear_index."""
        return n % self.N, n // self.N

    @property
    def x(self):
        return np.arange(self.N) * self.delta


def build_grid(N: int) -> GridSpec:
    if N < 4 or N % 2 != 0:
        raise ValueError("N must be even and at least 4")
    return GridSpec(N=int(N), delta=2.0 * np.pi / N)


def to_flat(field2d: np.ndarray) -> np.ndarray:
    return np.asarray(field2d).reshape(-1, order="F")


def to_grid(v: np.ndarray, N: int) -> np.ndarray:
    return np.asarray(v).reshape(N, N, order="F")


def _shift_matrix(N: int) -> np.ndarray:
    # (E v)_r = v_{r+1 mod N}
    E = np.zeros((N, N))
    E[np.arange(N), (np.arange(N) + 1) % N] = 1.0
    return E


def laplacian_eigenvalues(N: int) -> np.ndarray:
    """Eigenvalues of the five-point Laplacian on the (k, l) Fourier grid.

    lam[k, l] = (2 cos(2 pi k / N) + 2 cos(2 pi l / N) - 4) / delta^2,
    zero only at k = l = 0.
    """
    delta = 2.0 * np.pi / N
    k = np.arange(N)
    lam1 = (2.0 * np.cos(2.0 * np.pi * k / N) - 2.0) / delta**2
    return lam1[:, None] + lam1[None, :]


def laplacian_pinv_apply(field2d: np.ndarray) -> np.ndarray:
    """Apply the symmetric pseudo-inverse of the five-point Laplacian.

    Works mode by mode in Fourier space; the zero mode is mapped to
    zero, so the result always has zero mean. This is the fast path
    used in time stepping; it agrees with the dense matrix in
    OperatorSet to round-off.
    """
    f = np.asarray(field2d)
    N = f.shape[0]
    lam = laplacian_eigenvalues(N)
    inv = np.zeros_like(lam)
    nz = lam != 0.0
    inv[nz] = 1.0 / lam[nz]
    return np.real(np.fft.ifft2(np.fft.fft2(f) * inv))


@dataclass(frozen=True)
class OperatorSet:
    """Dense difference operators on flat fields.

    Memory is O(N^4); intended for template construction and
    verification at moderate N (a 32x32 grid costs ~8 MB per matrix).
    The time stepper and the spectral prediction never touch these.
    """

    N: int
    delta: float
    dx: np.ndarray = field(repr=False)
    dy: np.ndarray = field(repr=False)
    lap: np.ndarray = field(repr=False)
    lap_pinv: np.ndarray = field(repr=False)
    lx: np.ndarray = field(repr=False)
    ly: np.ndarray = field(repr=False)

    def pinv_apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.size != self.N**2:
            raise ValueError("field length does not match grid")
        return self.lap_pinv @ v.reshape(-1)


def build_operators(grid: GridSpec) -> OperatorSet:
    """Construct Dx, Dy, the Laplacian, its pseudo-inverse and Lx, Ly.

    D  = (E - E^T) / (2 delta)       central first difference
    D2 = (E - 2I + E^T) / delta^2    central second difference
    Dx = I (x) D,  Dy = D (x) I,  lap = I (x) D2 + D2 (x) I

    The pseudo-inverse is assembled by applying the Fourier-space
    inverse to every basis vector at once (columns of the identity),
    then symmetrized to remove round-off asymmetry.
    """
    N, delta = grid.N, grid.delta
    E = _shift_matrix(N)
    Id = np.eye(N)
    D = (E - E.T) / (2.0 * delta)
    D2 = (E - 2.0 * Id + E.T) / delta**2

    dx = np.kron(Id, D)
    dy = np.kron(D, Id)
    lap = np.kron(Id, D2) + np.kron(D2, Id)

    lam = laplacian_eigenvalues(N)
    inv = np.zeros_like(lam)
    nz = lam != 0.0
    inv[nz] = 1.0 / lam[nz]

    # identity columns as a stack of (N, N) fields, transformed in batch
    cols = np.eye(N * N).reshape(N, N, N * N, order="F")
    ch = np.fft.fft2(cols, axes=(0, 1))
    ch *= inv[:, :, None]
    lap_pinv = np.real(np.fft.ifft2(ch, axes=(0, 1))).reshape(
        N * N, N * N, order="F"
    )
    lap_pinv = 0.5 * (lap_pinv + lap_pinv.T)

    return OperatorSet(
        N=N,
        delta=delta,
        dx=dx,
        dy=dy,
        lap=lap,
        lap_pinv=lap_pinv,
        lx=dx @ lap_pinv,
        ly=dy @ lap_pinv,
    )
