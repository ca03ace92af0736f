"""Cells of the central hyperplane arrangement dual to a dataset.

Every datapoint x_i induces the hyperplane {theta : <theta, x~_i> = 0} in
the lifted parameter space R^{d+1}. The full-dimensional regions of this
arrangement are closed convex cones ("cells"); two inner-layer parameters
lie in the same cell iff they activate the same datapoints. Enumeration is
by incremental insertion with a margin-maximization feasibility subproblem
per candidate sign extension.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ._simplex import max_margin
from .errors import CellLookupError, PreconditionError, ZeroDirectionError
from .model import AtomicMeasure, Dataset

FEASIBILITY_EPS = 1e-9
BOUNDARY_EPS = 1e-9
MAX_CELLS_GUARD = 10**6


@dataclass(frozen=True)
class Cell:
    """A full-dimensional closed convex cone of the arrangement."""

    signs: tuple  # length n over {+1, -1}; +1 means datapoint is active
    witness: np.ndarray  # strictly interior point, ||witness||_inf <= 1
    margin: float  # min_i signs[i] * <witness, x~_i> > 0

    @property
    def active_set(self) -> tuple:
        return tuple(i for i, s in enumerate(self.signs) if s > 0)


@dataclass(frozen=True)
class CellDecomposition:
    cells: tuple
    lifted: np.ndarray  # (n, d+1) dataset lift the cells were built from
    generic: bool  # dataset in general position (rank test)
    lookup: dict = field(repr=False)

    @property
    def n(self) -> int:
        return self.lifted.shape[0]

    @property
    def size(self) -> int:
        return len(self.cells)


def expected_cell_count(n: int, d: int) -> int:
    """Region count of n generic central hyperplanes in R^{d+1}."""
    from math import comb

    return 2 * sum(comb(n - 1, k) for k in range(d + 1))


def is_generic(dataset: Dataset) -> bool:
    """True iff every d+1 lifted points are linearly independent."""
    lifted = dataset.lifted
    n, k = lifted.shape
    size = min(n, k)
    for idx in combinations(range(n), size):
        sub = lifted[list(idx)]
        if np.linalg.matrix_rank(sub, tol=1e-10) < size:
            return False
    return True


def _dedup_hyperplanes(lifted: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Group identical lifted points; returns (unique rows, rep index per row)."""
    n = lifted.shape[0]
    rep = np.full(n, -1, dtype=int)
    uniq = []
    for i in range(n):
        for u, row in enumerate(uniq):
            if np.max(np.abs(lifted[i] - row)) <= 1e-12 * max(
                1.0, np.max(np.abs(row))
            ):
                rep[i] = u
                break
        else:
            rep[i] = len(uniq)
            uniq.append(lifted[i])
    if len(uniq) < n:
        warnings.warn(
            f"{n - len(uniq)} duplicate datapoint(s) produce identical "
            "hyperplanes; deduplicated for enumeration"
        )
    return np.array(uniq), rep


def enumerate_cells(
    dataset: Dataset, max_cells: int = MAX_CELLS_GUARD
) -> CellDecomposition:
    """Enumerate all full-dimensional cells by incremental insertion."""
    lifted = dataset.lifted
    d = dataset.d
    uniq, rep = _dedup_hyperplanes(lifted)
    bound = expected_cell_count(uniq.shape[0], d)
    if bound > max_cells:
        raise PreconditionError(
            f"formula bound {bound} exceeds guard {max_cells}; "
            "raise max_cells to override"
        )

    # seed with the two sides of the first hyperplane
    partial: list[tuple] = [(1,), (-1,)]
    for h in range(1, uniq.shape[0]):
        rows = uniq[: h + 1]
        grown = []
        for signs in partial:
            for s_new in (1, -1):
                cand = signs + (s_new,)
                t, _ = max_margin(rows, np.array(cand, dtype=float))
                if t > FEASIBILITY_EPS:
                    grown.append(cand)
        partial = grown

    cells = []
    for signs in partial:
        full = tuple(int(signs[rep[i]]) for i in range(dataset.n))
        t, theta = max_margin(uniq, np.array(signs, dtype=float))
        if t <= FEASIBILITY_EPS:
            raise CellLookupError(f"feasibility subproblem failed for signs {signs}")
        cells.append(Cell(full, theta, float(t)))
    cells.sort(key=lambda c: c.signs)
    lookup = {c.signs: i for i, c in enumerate(cells)}
    return CellDecomposition(tuple(cells), lifted, is_generic(dataset), lookup)


def locate_cell(
    decomp: CellDecomposition, theta: np.ndarray
) -> tuple[int, np.ndarray]:
    """Map a parameter to its cell; boundary coords resolve to +1 (active side).

    Returns (cell index, boolean boundary flags per datapoint).
    """
    theta = np.asarray(theta, dtype=float).ravel()
    norm = np.linalg.norm(theta)
    if norm <= 0.0:
        raise ZeroDirectionError("cannot locate the zero parameter")
    vals = decomp.lifted @ theta
    boundary = np.abs(vals) <= BOUNDARY_EPS * norm
    signs = np.where(vals > 0, 1, -1)
    signs[boundary] = 1  # closed-cell convention, active side
    key = tuple(int(s) for s in signs)
    idx = decomp.lookup.get(key)
    if idx is not None:
        return idx, boundary
    # boundary pattern that is not itself a full-dimensional cell: choose the
    # matching cell with the most active-side boundary coordinates
    best = None
    fixed = ~boundary
    for i, cell in enumerate(decomp.cells):
        cs = np.array(cell.signs)
        if np.all(cs[fixed] == signs[fixed]):
            score = int(np.sum(cs[boundary] == 1))
            cand = (-score, cell.signs, i)
            if best is None or cand < best:
                best = cand
    if best is None:
        raise CellLookupError(f"no cell matches resolved pattern {key}")
    return best[2], boundary


def cone_membership(decomp: CellDecomposition, cell_index: int, v) -> bool:
    """True iff v lies in the (closed, tolerance-widened) cone of the cell."""
    v = np.asarray(v, dtype=float).ravel()
    norm = np.linalg.norm(v)
    cell = decomp.cells[cell_index]
    vals = np.array(cell.signs) * (decomp.lifted @ v)
    return bool(np.all(vals >= -BOUNDARY_EPS * norm))


def cell_sum_check(
    decomp: CellDecomposition, theta: np.ndarray, theta_p: np.ndarray
) -> bool:
    """Check ReLU additivity relu(u)+relu(u') = relu(u+u') at every datapoint.

    Holds whenever theta and theta_p lie in the same cell (precondition).
    """
    theta = np.asarray(theta, dtype=float).ravel()
    theta_p = np.asarray(theta_p, dtype=float).ravel()
    i1, _ = locate_cell(decomp, theta)
    i2, _ = locate_cell(decomp, theta_p)
    if i1 != i2:
        raise PreconditionError("parameters do not lie in the same cell")
    u = decomp.lifted @ theta
    v = decomp.lifted @ theta_p
    lhs = np.maximum(u, 0.0) + np.maximum(v, 0.0)
    rhs = np.maximum(u + v, 0.0)
    scale = max(1.0, float(np.max(np.abs(lhs))))
    return bool(np.max(np.abs(lhs - rhs)) <= 1e-9 * scale)


def cell_moments(
    decomp: CellDecomposition, cell_index: int, mu: AtomicMeasure
) -> tuple[np.ndarray, float]:
    """Per-cell aggregates (int c a dmu, int c b dmu) for a measure in the cell."""
    for theta in mu.thetas:
        idx, _ = locate_cell(decomp, theta)
        if idx != cell_index:
            raise PreconditionError(
                f"atom locates to cell {idx}, expected {cell_index}"
            )
    w = mu.p * mu.c
    return w @ mu.A, float(w @ mu.b)


def decomposition_to_json(decomp: CellDecomposition) -> str:
    payload = {
        "n": decomp.n,
        "d": decomp.lifted.shape[1] - 1,
        "generic": decomp.generic,
        "fingerprint": dataset_fingerprint(decomp.lifted),
        "cells": [
            {
                "signs": list(c.signs),
                "active_set": list(c.active_set),
                "witness": c.witness.tolist(),
                "margin": c.margin,
            }
            for c in decomp.cells
        ],
    }
    return json.dumps(payload, indent=2)


def dataset_fingerprint(lifted: np.ndarray) -> str:
    import hashlib

    return hashlib.sha256(np.ascontiguousarray(lifted).tobytes()).hexdigest()[:16]
