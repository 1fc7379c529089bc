"""Shear orderings: sequential, checkerboard, and commutation-minimizing.

A splitting step applies one shear per grid variable; the order of
application controls how commutator errors accumulate. The weight

    c^i_j = sum_k ( |A^i_{j,k}| + |A^i_{k,j}| )

measures how strongly shear i depends on variable j (it vanishes iff
the two shear fields commute). Reshaped to the grid, the weights of a
single variable form a symmetric peak around its node with a zero at
the node itself, and zeros at the antipodal node class: each variable
in the NW quadrant commutes with the matching variable in the SE
quadrant, and SW matches NE. The MinCom ordering greedily appends
whichever unlisted variables currently carry the least accumulated
weight, so nearly commuting shears end up adjacent.
"""

from dataclasses import dataclass

import numpy as np

from .arakawa import CoefficientTemplate
from .grid import build_grid, to_flat

__all__ = [
    "ORDERING_TAGS",
    "ShearOrdering",
    "commutation_weights",
    "shifted_weights",
    "plain_order",
    "bw_order",
    "mincom_order",
    "write_ordering",
    "read_ordering",
]

ORDERING_TAGS = ("Plain", "BW", "MinCom")

# Weights that should be equal differ by accumulated round-off; lump
# values within this band of the minimum into one tie group.
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class ShearOrdering:
    """A permutation of the flat indices 0..N^2-1 with its kind tag."""

    tag: str
    i1: int  # 0-based start index (only meaningful for MinCom)
    perm: np.ndarray

    def __post_init__(self):
        if self.tag not in ORDERING_TAGS:
            raise ValueError(f"unknown ordering tag {self.tag!r}")
        p = np.asarray(self.perm, dtype=np.int64)
        if sorted(p.tolist()) != list(range(len(p))):
            raise ValueError("perm is not a permutation of 0..M-1")
        object.__setattr__(self, "perm", p)


def commutation_weights(template: CoefficientTemplate) -> np.ndarray:
    """Weights c^1_j of the first variable, reshaped to the (N, N) grid.

    Row sums come from the stored columns directly; column sums are
    nonzero only at the stored offsets. Weights of any other variable
    are the torus translate, see ``shifted_weights``.
    """
    N = template.N
    c = np.abs(template.cols).sum(axis=0)  # sum_l |A^1[j, l]| on the grid
    for off, col in zip(template.offsets, template.cols):
        c[off % N, off // N] += np.abs(col).sum()
    return c


def shifted_weights(C1: np.ndarray, i: int) -> np.ndarray:
    """Weights c^i_j on the grid: the translate of C1 by node i."""
    N = C1.shape[0]
    return np.roll(C1, (i % N, i // N), axis=(0, 1))


def plain_order(N: int) -> ShearOrdering:
    build_grid(N)
    return ShearOrdering(tag="Plain", i1=0, perm=np.arange(N * N))


def bw_order(N: int) -> ShearOrdering:
    """Checkerboard: nodes with even r+c in row-major scan, then odd."""
    build_grid(N)
    black = [c * N + r for r in range(N) for c in range(N) if (r + c) % 2 == 0]
    white = [c * N + r for r in range(N) for c in range(N) if (r + c) % 2 == 1]
    return ShearOrdering(tag="BW", i1=0, perm=np.array(black + white))


def _tie_group(values: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Candidates whose value lies within the tie band of the minimum,
    in ascending index order (the deterministic tie-break)."""
    sub = values[candidates]
    mv = sub.min()
    return candidates[sub <= mv + _TIE_TOL * (1.0 + abs(mv))]


def _sort_batch(batch: np.ndarray, C1: np.ndarray) -> list:
    """Order one tie batch by cumulative weight seeded at its first element.

    Greedy like the outer loop: repeatedly take the remaining candidate
    with the least weight accumulated from the already chosen ones,
    breaking ties by ascending index.
    """
    if len(batch) <= 1:
        return [int(i) for i in batch]
    chosen = [int(batch[0])]
    acc = shifted_weights(C1, chosen[0]).copy()
    remaining = [int(i) for i in batch[1:]]
    while remaining:
        flat = to_flat(acc)
        tied = _tie_group(flat, np.array(remaining))
        pick = int(tied[0])
        chosen.append(pick)
        remaining.remove(pick)
        acc += shifted_weights(C1, pick)
    return chosen


def mincom_order(C1: np.ndarray, i1: int = 0) -> ShearOrdering:
    """Greedy minimal-cumulative-weight ordering starting at i1 (0-based).

    Maintains the cumulative weight matrix of all listed variables;
    each pass collects every unlisted variable tied at the current
    minimum into a batch, sorts the batch by the same criterion seeded
    at its first element, then appends it. Always terminates since each
    pass lists at least one variable.
    """
    N = C1.shape[0]
    M = N * N
    if not 0 <= i1 < M:
        raise IndexError("start index out of range")
    listed = [int(i1)]
    acc = np.zeros_like(C1)
    fresh = [int(i1)]
    while len(listed) < M:
        for i in fresh:
            acc += shifted_weights(C1, i)
        flat = to_flat(acc).copy()
        flat[listed] = np.inf
        batch = _tie_group(flat, np.flatnonzero(np.isfinite(flat)))
        fresh = _sort_batch(batch, C1)
        listed.extend(fresh)
    return ShearOrdering(tag="MinCom", i1=int(i1), perm=np.array(listed))


def write_ordering(path, ordering: ShearOrdering, N: int) -> None:
    """Cache file: header `N tag i1`, then the permutation, all 1-based."""
    with open(path, "w") as fh:
        fh.write(f"{N} {ordering.tag} {ordering.i1 + 1}\n")
        fh.write(" ".join(str(int(i) + 1) for i in ordering.perm) + "\n")


def read_ordering(path) -> tuple:
    with open(path) as fh:
        n_s, tag, i1_s = fh.readline().split()
        perm = np.array([int(t) - 1 for t in fh.read().split()], dtype=np.int64)
    N = int(n_s)
    if len(perm) != N * N:
        raise ValueError("permutation length does not match header N")
    return N, ShearOrdering(tag=tag, i1=int(i1_s) - 1, perm=perm)
