"""Batched Aberth-Ehrlich iteration for many polynomials of equal degree.

All polynomials in a batch are solved simultaneously: every sweep updates every
root of every row with numpy array operations.
"""

from __future__ import annotations

import numpy as np

MAX_SWEEPS = 200
STEP_TOL = 1e-13
# Offset keeps the starting circle off the real axis, which avoids symmetric
# stalls for polynomials with real coefficients.
_ANGLE_OFFSET = 0.4
MERGE_RADIUS = 1e-7


def horner(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate row-wise polynomials (highest degree first) at x of shape (B, k)."""
    out = np.broadcast_to(coeffs[:, :1], x.shape).astype(complex)
    for j in range(1, coeffs.shape[1]):
        out = out * x + coeffs[:, j : j + 1]
    return out


def initial_guesses(batch: int, degree: int, radius) -> np.ndarray:
    angles = 2 * np.pi * np.arange(degree) / degree + _ANGLE_OFFSET
    radius = np.broadcast_to(np.asarray(radius, dtype=float), (batch,))
    return radius[:, None] * np.exp(1j * angles)[None, :]


def aberth(coeffs: np.ndarray, x0: np.ndarray, max_sweeps: int = MAX_SWEEPS,
           tol: float = STEP_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Run Aberth sweeps on a batch of polynomials.

    ``coeffs`` has shape (B, n+1) with nonzero leading column; ``x0`` has shape
    (B, n). Returns the root approximations and a boolean (B, n) array telling
    which roots met the step tolerance ``|step| < tol * max(1, |x|)``.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    n = coeffs.shape[1] - 1
    x = np.array(x0, dtype=complex)
    if n == 0:
        return x, np.ones(x.shape, dtype=bool)
    dcoeffs = coeffs[:, :-1] * np.arange(n, 0, -1)[None, :]
    converged = np.zeros(x.shape, dtype=bool)
    active = np.arange(x.shape[0])
    eye = np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        if active.size == 0:
            break
        xa = x[active]
        p = horner(coeffs[active], xa)
        dp = horner(dcoeffs[active], xa)
        diff = xa[:, :, None] - xa[:, None, :]
        diff[:, eye] = 1.0
        inv = 1.0 / diff
        inv[:, eye] = 0.0
        s = inv.sum(axis=2)
        denom = dp - p * s
        bad = denom == 0
        if bad.any():
            denom[bad] = 1e-30
        step = np.where(p == 0, 0.0, p / denom)
        x[active] = xa - step
        ok = np.abs(step) < tol * np.maximum(1.0, np.abs(xa))
        converged[active] = ok
        active = active[~ok.all(axis=1)]
    return x, converged


def merge_clusters(x: np.ndarray, converged: np.ndarray, radius: float = MERGE_RADIUS) -> np.ndarray:
    """Replace near-coincident roots by their centroid.

    Aberth converges only linearly onto a multiple root and stalls about
    sqrt(machine eps) away from it, while the cluster centroid is well
    conditioned. Roots separated by less than ``radius`` (relative) cannot be
    told apart from a multiple root in double precision. Clusters that contain
    an unconverged root use the looser ``radius * 100``.
    """
    x = x.copy()
    n = x.shape[1]
    if n < 2:
        return x
    scale = np.maximum(1.0, np.abs(x))
    gap = np.abs(x[:, :, None] - x[:, None, :]) / scale[:, :, None]
    gap[:, np.arange(n), np.arange(n)] = np.inf
    loose = radius * 100 * (~converged[:, :, None] | ~converged[:, None, :])
    close = gap < np.maximum(radius, loose)
    for b in np.flatnonzero(close.any(axis=(1, 2))):
        row = x[b]
        seen = set()
        for i in range(n):
            if i in seen:
                continue
            members = {i}
            stack = [i]
            while stack:
                j = stack.pop()
                for k in np.flatnonzero(close[b, j]):
                    if k not in members:
                        members.add(int(k))
                        stack.append(int(k))
            seen |= members
            if len(members) > 1:
                idx = sorted(members)
                row[idx] = row[idx].mean()
        x[b] = row
    return x


def solve_batch(coeffs: np.ndarray, radius) -> tuple[np.ndarray, np.ndarray]:
    """Roots of every row of ``coeffs``; returns (roots, converged flags)."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    batch, n = coeffs.shape[0], coeffs.shape[1] - 1
    x, conv = aberth(coeffs, initial_guesses(batch, n, radius))
    x = merge_clusters(x, conv)
    return x, conv
