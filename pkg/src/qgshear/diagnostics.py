"""Conserved quantities, streaming averages, and the mu estimate.

With psi = lap_pinv(q - h) and delta the grid spacing, the discrete
functionals are

    C  = delta^2 * sum(q)                total vorticity, linear
    E  = -1/2 delta^2 * psi . (q - h)    energy
    Z  =  1/2 delta^2 * q . q            enstrophy
    M3 =  1/3 delta^2 * sum(q^3)         third moment

Time averages of q and psi feed the least-squares slope
mu = <psi>.<q> / <psi>.<psi>. Sums run over up to 1e7 samples, so the
accumulators use compensated summation; plain summation loses about
three digits at that length.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .arakawa import State
from .grid import laplacian_pinv_apply

__all__ = [
    "DiagnosticsRecord",
    "invariants",
    "KahanSum",
    "AveragingAccumulator",
    "estimate_mu",
    "DIAG_COLUMNS",
    "format_float",
    "diagnostics_row",
    "write_diag_header",
]


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    E: float
    Z: float
    C: float
    M3: float
    mu_hat: Optional[float] = None


def invariants(state: State, t: float = 0.0, mu_hat: Optional[float] = None) -> DiagnosticsRecord:
    q, h = state.q, state.h
    delta = 2.0 * np.pi / q.shape[0]
    d2 = delta * delta
    psi = laplacian_pinv_apply(q - h)
    return DiagnosticsRecord(
        t=t,
        E=-0.5 * d2 * float(np.sum(psi * (q - h))),
        Z=0.5 * d2 * float(np.sum(q * q)),
        C=d2 * float(np.sum(q)),
        M3=d2 / 3.0 * float(np.sum(q**3)),
        mu_hat=mu_hat,
    )


class KahanSum:
    """Compensated elementwise sum of a stream of arrays."""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self.comp = np.zeros(shape)

    def add(self, x: np.ndarray) -> None:
        y = x - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t

    def state(self):
        return self.total.copy(), self.comp.copy()

    @classmethod
    def from_state(cls, total: np.ndarray, comp: np.ndarray) -> "KahanSum":
        out = cls(total.shape)
        out.total = total.copy()
        out.comp = comp.copy()
        return out


class AveragingAccumulator:
    """Running means of q and psi from step k0+1 onward."""

    def __init__(self, shape, k0: int):
        self.k0 = int(k0)
        self.k = int(k0)
        self.sum_q = KahanSum(shape)
        self.sum_psi = KahanSum(shape)

    @property
    def count(self) -> int:
        return self.k - self.k0

    def add(self, state: State, step_index: int) -> None:
        if step_index <= self.k0:
            raise ValueError("accumulation starts after the burn-in step index")
        if step_index != self.k + 1:
            raise ValueError("samples must arrive one per step, in order")
        self.k = step_index
        self.sum_q.add(state.q)
        self.sum_psi.add(laplacian_pinv_apply(state.q - state.h))

    def mean_q(self) -> np.ndarray:
        return self.sum_q.total / self.count

    def mean_psi(self) -> np.ndarray:
        return self.sum_psi.total / self.count


def estimate_mu(acc: AveragingAccumulator) -> float:
    """Least-squares slope of <q> against <psi>."""
    if acc.count < 1:
        raise ValueError("no samples accumulated")
    mq = acc.mean_q().ravel()
    mpsi = acc.mean_psi().ravel()
    den = float(mpsi @ mpsi)
    if den <= 1e-14:
        raise ValueError("mean stream function vanishes; mu undefined")
    return float(mpsi @ mq) / den


DIAG_COLUMNS = "t,E,Z,C,M3,relE,relZ,absC,absM3,mu_hat"


def format_float(x: float) -> str:
    # 17 significant digits round-trip float64 exactly
    return format(x, ".17g")


def write_diag_header(fh) -> None:
    fh.write(DIAG_COLUMNS + "\n")


def diagnostics_row(rec: DiagnosticsRecord, ref: DiagnosticsRecord) -> str:
    """CSV row with drift columns measured against the t=0 record."""
    rel_e = (rec.E - ref.E) / ref.E if ref.E != 0.0 else float("nan")
    rel_z = (rec.Z - ref.Z) / ref.Z if ref.Z != 0.0 else float("nan")
    fields = [
        rec.t,
        rec.E,
        rec.Z,
        rec.C,
        rec.M3,
        rel_e,
        rel_z,
        abs(rec.C - ref.C),
        abs(rec.M3 - ref.M3),
        rec.mu_hat if rec.mu_hat is not None else float("nan"),
    ]
    return ",".join(format_float(v) for v in fields)
