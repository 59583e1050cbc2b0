"""Regular lattice geometry and neighborhood structures.

Sites are indexed row-major: site = row * cols + col. Neighborhoods are the
four-nearest or eight-nearest structures, optionally wrapped on a torus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = ["Lattice", "build_lattice", "neighbor_sum"]

NEIGHBORHOOD_KINDS = ("four_nearest", "eight_nearest")

_OFFSETS = {
    "four_nearest": [(-1, 0), (1, 0), (0, -1), (0, 1)],
    "eight_nearest": [
        (-1, 0), (1, 0), (0, -1), (0, 1),
        (-1, -1), (-1, 1), (1, -1), (1, 1),
    ],
}


@dataclass(frozen=True)
class Lattice:
    """Immutable lattice with per-site neighbor lists.

    ``neighbors`` is an (n, max_degree) int array padded with -1;
    ``degree[i]`` gives the number of valid entries in row i.
    """

    rows: int
    cols: int
    wrap: bool
    neighborhood_kind: str
    neighbors: np.ndarray
    degree: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    def neighbor_list(self, i: int) -> np.ndarray:
        return self.neighbors[i, : self.degree[i]]

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency matrix in CSR form."""
        n = self.n_sites
        rows_idx = np.repeat(np.arange(n), self.degree)
        cols_idx = self.neighbors[self.neighbors >= 0]
        data = np.ones(cols_idx.size)
        return sp.csr_matrix((data, (rows_idx, cols_idx)), shape=(n, n))

    def spec(self) -> dict:
        """JSON-serializable lattice description."""
        return {
            "rows": self.rows,
            "cols": self.cols,
            "wrap": self.wrap,
            "neighborhood_kind": self.neighborhood_kind,
        }


def build_lattice(rows: int, cols: int, wrap: bool, neighborhood_kind: str) -> Lattice:
    """Construct a lattice with the requested neighborhood structure.

    On a torus (``wrap=True``) both dimensions must be >= 3 so that wrapped
    neighbors are distinct sites.
    """
    if rows < 1 or cols < 1:
        raise ValueError("lattice dimensions must be positive")
    if wrap and (rows < 3 or cols < 3):
        raise ValueError("torus lattices require rows >= 3 and cols >= 3")
    if neighborhood_kind not in NEIGHBORHOOD_KINDS:
        raise ValueError(f"unknown neighborhood kind {neighborhood_kind!r}")

    offsets = _OFFSETS[neighborhood_kind]
    n = rows * cols
    max_deg = len(offsets)
    nbr = np.full((n, max_deg), -1, dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            for dr, dc in offsets:
                rr, cc = r + dr, c + dc
                if wrap:
                    rr %= rows
                    cc %= cols
                elif not (0 <= rr < rows and 0 <= cc < cols):
                    continue
                nbr[i, deg[i]] = rr * cols + cc
                deg[i] += 1
    return Lattice(rows, cols, wrap, neighborhood_kind, nbr, deg)


def neighbor_sum(lattice: Lattice, values, i: int) -> float:
    """Sum of ``values`` over the neighbors of site ``i``."""
    values = np.asarray(values, dtype=float)
    if values.size != lattice.n_sites:
        raise ValueError("values length does not match the lattice")
    if not 0 <= i < lattice.n_sites:
        raise IndexError(f"site index {i} out of range")
    return float(values[lattice.neighbor_list(i)].sum())


def lattice_from_spec(spec: dict) -> Lattice:
    return build_lattice(
        spec["rows"], spec["cols"], spec["wrap"], spec["neighborhood_kind"]
    )
