"""Generation-labelled backward-orbit trees.

A tree holds every point of the union of k-fold preimages of a base point for
k up to a depth. Nodes are stored generation by generation; inside a
generation they are sorted lexicographically by (re, im). Points that
coincide (within ``DEDUP_RADIUS``) with an earlier node are dropped, so the
node order is also the shadowing tie-break order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .errors import CapacityError

NODE_CAP = 10**6
DEDUP_RADIUS = 1e-10


@dataclass(frozen=True)
class PreimageTree:
    base: complex
    depth: int
    points: np.ndarray      # complex128, shape (n,)
    generation: np.ndarray  # int64
    parent: np.ndarray      # int64, -1 for the base point
    residual: np.ndarray    # |map(point) - parent point|, 0 for the base

    def __post_init__(self):
        for arr in (self.points, self.generation, self.parent, self.residual):
            arr.setflags(write=False)

    def __len__(self):
        return self.points.size

    def upto(self, depth: int) -> "PreimageTree":
        """The subtree of generations <= depth (a prefix of the node list)."""
        n = int(np.searchsorted(self.generation, depth, side="right"))
        return PreimageTree(self.base, min(depth, self.depth), self.points[:n].copy(),
                            self.generation[:n].copy(), self.parent[:n].copy(),
                            self.residual[:n].copy())

    def generation_slices(self):
        """Yield (k, slice) for every generation present in the tree."""
        gens = self.generation
        edges = np.flatnonzero(np.diff(gens)) + 1
        starts = np.concatenate([[0], edges])
        stops = np.concatenate([edges, [gens.size]])
        for a, b in zip(starts, stops):
            yield int(gens[a]), slice(int(a), int(b))


def _as_xy(z: np.ndarray) -> np.ndarray:
    return np.column_stack([z.real, z.imag])


def grow_tree(base: complex, depth: int,
              solve: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
              degree: int, cap: int = NODE_CAP) -> PreimageTree:
    """Build the backward-orbit tree of ``base``.

    ``solve(targets)`` must return ``(roots, residuals)`` of shape
    (len(targets), degree) for a batch of targets.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    points = [np.array([complex(base)])]
    gens = [np.zeros(1, dtype=np.int64)]
    parents = [np.full(1, -1, dtype=np.int64)]
    residuals = [np.zeros(1)]
    total = 1
    frontier_idx = np.array([0])
    frontier = points[0]
    for k in range(1, depth + 1):
        if frontier.size == 0:
            break
        if total + frontier.size * degree > cap:
            raise CapacityError(
                f"preimage tree would exceed {cap} nodes at generation {k}",
                depth_reached=k - 1)
        roots, res = solve(frontier)
        cand = roots.ravel()
        cand_res = res.ravel()
        cand_parent = np.repeat(frontier_idx, roots.shape[1])
        order = np.lexsort((cand.imag, cand.real))
        cand, cand_res, cand_parent = cand[order], cand_res[order], cand_parent[order]

        keep = np.ones(cand.size, dtype=bool)
        old = np.concatenate(points)
        dist, _ = cKDTree(_as_xy(old)).query(_as_xy(cand), k=1,
                                             distance_upper_bound=DEDUP_RADIUS)
        keep &= ~np.isfinite(dist)
        for i, j in sorted(cKDTree(_as_xy(cand)).query_pairs(DEDUP_RADIUS)):
            if keep[i]:
                keep[j] = False
        cand, cand_res, cand_parent = cand[keep], cand_res[keep], cand_parent[keep]

        frontier_idx = total + np.arange(cand.size)
        frontier = cand
        total += cand.size
        points.append(cand)
        gens.append(np.full(cand.size, k, dtype=np.int64))
        parents.append(cand_parent)
        residuals.append(cand_res)
    return PreimageTree(complex(base), depth, np.concatenate(points), np.concatenate(gens),
                        np.concatenate(parents), np.concatenate(residuals))
