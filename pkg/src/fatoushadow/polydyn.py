"""Polynomial dynamics in the plane: fixed points, basins, inverse orbits and
raster rendering of basins with inverse-orbit overlays."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _roots
from .errors import ConvergenceError, PreconditionError
from .tree import NODE_CAP, PreimageTree, grow_tree

SUPERATTRACTING_TOL = 1e-9
INDIFFERENT_TOL = 1e-9
CONVERGE_TOL = 1e-6
DEFAULT_MAX_ITER = 10**4
MAX_PIXELS = 4096 * 4096
ESCAPED = -1
UNDECIDED = -2


@dataclass(frozen=True)
class Polynomial:
    """f(z) = sum_j c_j z^j with coefficients in ascending order c_0..c_N."""
    coefficients: tuple[complex, ...]

    def __post_init__(self):
        c = tuple(complex(x) for x in self.coefficients)
        if not all(math.isfinite(x.real) and math.isfinite(x.imag) for x in c):
            raise PreconditionError("coefficients must be finite")
        if len(c) < 3:
            raise PreconditionError("polynomial degree must be >= 2")
        if abs(c[-1]) <= 1e-14:
            raise PreconditionError("leading coefficient must be nonzero")
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def _desc(self) -> np.ndarray:
        return np.array(self.coefficients[::-1])

    def __call__(self, z):
        out = np.polyval(self._desc(), np.asarray(z, dtype=complex))
        return complex(out) if np.ndim(out) == 0 else out

    def derivative(self, z):
        out = np.polyval(np.polyder(self._desc()), np.asarray(z, dtype=complex))
        return complex(out) if np.ndim(out) == 0 else out

    def escape_radius(self) -> float:
        """Radius beyond which |f(z)| > |z| and orbits tend to infinity.

        max(2, 1 + max|c_j/c_N|) as the Cauchy-type bound, raised to
        (1 + sum_{j<N} |c_j|) / |c_N| which makes the claim hold for non-monic f.
        """
        c = np.abs(np.array(self.coefficients))
        lead, low = c[-1], c[:-1]
        return float(max(2.0, 1 + (low / lead).max(), (1 + low.sum()) / lead))

    def root_radius(self, shift: complex = 0j) -> float:
        """Cauchy bound for the roots of f(z) - shift."""
        c = np.array(self.coefficients)
        c[0] -= shift
        return float(1 + np.abs(c[:-1] / c[-1]).max())


@dataclass(frozen=True)
class FixedPointInfo:
    location: complex
    multiplier: complex
    kind: str   # superattracting | attracting | indifferent | repelling


def classify_multiplier(lam: complex) -> str:
    a = abs(lam)
    if a <= SUPERATTRACTING_TOL:
        return "superattracting"
    if a < 1 - INDIFFERENT_TOL:
        return "attracting"
    if abs(a - 1) <= INDIFFERENT_TOL:
        return "indifferent"
    return "repelling"


def _solve_shifted(f: Polynomial, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Roots of f(z) - w for each w; returns (roots, residuals)."""
    desc = f._desc()
    polys = np.tile(desc, (targets.size, 1))
    polys[:, -1] -= targets
    radius = np.array([f.root_radius(w) for w in targets])
    roots, _ = _roots.solve_batch(polys, radius)
    # residual measured relative to the size of the terms being cancelled
    res = np.abs(_roots.horner(polys, roots))
    scale = _roots.horner(np.abs(polys), np.abs(roots)).real
    rel = res / (1.0 + scale)
    if rel.size and rel.max() > 1e-10:
        raise ConvergenceError(
            f"polynomial root solver did not converge (worst relative residual {rel.max():.3e})",
            float(res.max()))
    return roots, res


def fixed_points(f: Polynomial) -> list[FixedPointInfo]:
    """All N roots of f(z) - z with multiplicity, classified by multiplier."""
    coeffs = list(f.coefficients)
    coeffs[1] -= 1
    roots, _ = _solve_shifted(Polynomial(tuple(coeffs)), np.array([0j]))
    out = []
    for z in sorted(roots[0], key=lambda z: (z.real, z.imag)):
        lam = f.derivative(z)
        out.append(FixedPointInfo(complex(z), complex(lam), classify_multiplier(lam)))
    return out


def attracting_points(f: Polynomial) -> list[complex]:
    return [p.location for p in fixed_points(f) if p.kind in ("attracting", "superattracting")]


def _iterate_classify(f: Polynomial, z: np.ndarray, attractors, max_iter: int):
    """Vectorised orbit classification; returns (label, iterations) arrays."""
    z = np.array(z, dtype=complex).ravel()
    n = z.size
    label = np.full(n, UNDECIDED, dtype=np.int64)
    iters = np.full(n, max_iter, dtype=np.int64)
    att = np.asarray(list(attractors), dtype=complex)
    esc = f.escape_radius()
    desc = f._desc()
    idx = np.arange(n)
    cur = z
    for step in range(max_iter + 1):
        if idx.size == 0:
            break
        done = np.zeros(idx.size, dtype=bool)
        if att.size:
            near = np.abs(cur[:, None] - att[None, :]) <= CONVERGE_TOL
            hit = near.any(axis=1)
            first = np.argmax(near, axis=1)
            label[idx[hit]] = first[hit]
            iters[idx[hit]] = step
            done |= hit
        gone = ~done & (np.abs(cur) > esc)
        label[idx[gone]] = ESCAPED
        iters[idx[gone]] = step
        done |= gone
        idx, cur = idx[~done], cur[~done]
        if step == max_iter or idx.size == 0:
            break
        out = np.full(cur.shape, desc[0], dtype=complex)
        for c in desc[1:]:
            out = out * cur + c
        cur = out
    return label, iters


def classify_orbit(f: Polynomial, z0: complex, attractors, max_iter: int = DEFAULT_MAX_ITER):
    """(attractor index | "escaped" | "undecided", iterations) for one orbit."""
    label, iters = _iterate_classify(f, [z0], attractors, max_iter)
    lab = int(label[0])
    name = {ESCAPED: "escaped", UNDECIDED: "undecided"}.get(lab, lab)
    return name, int(iters[0])


def polynomial_preimage_tree(f: Polynomial, base: complex, depth: int,
                             cap: int = NODE_CAP) -> PreimageTree:
    """Union of f^{-k}(base), k <= depth, with no hypotheses on the base point."""
    return grow_tree(complex(base), depth, lambda w: _solve_shifted(f, w), f.degree, cap)


def inverse_orbit_tree_poly(f: Polynomial, p: complex, depth: int,
                            cap: int = NODE_CAP) -> PreimageTree:
    """Inverse-orbit tree of an attracting fixed point p.

    p must be an attracting fixed point and must have a preimage other than
    itself; f = z^N at 0 fails the latter.
    """
    p = complex(p)
    if abs(f(p) - p) > 1e-9:
        raise PreconditionError(f"{p} is not a fixed point (|f(p) - p| = {abs(f(p) - p):.2e})")
    if abs(f.derivative(p)) >= 1:
        raise PreconditionError(f"fixed point {p} is not attracting")
    roots, _ = _solve_shifted(f, np.array([p]))
    if np.all(np.abs(roots - p) <= 1e-8 * max(1.0, abs(p))):
        raise PreconditionError("hypothesis failed: every preimage of p equals p")
    return polynomial_preimage_tree(f, p, depth, cap)


@dataclass(frozen=True)
class Viewport:
    center: complex
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0) or not all(
                math.isfinite(v) for v in (self.width, self.height, self.center.real, self.center.imag)):
            raise PreconditionError("viewport must have positive finite extent")

    def pixel_centers(self, nx: int, ny: int) -> np.ndarray:
        """Complex coordinates of pixel centres, row 0 at the top."""
        x0 = self.center.real - self.width / 2
        y0 = self.center.imag + self.height / 2
        xs = x0 + (np.arange(nx) + 0.5) * (self.width / nx)
        ys = y0 - (np.arange(ny) + 0.5) * (self.height / ny)
        return xs[None, :] + 1j * ys[:, None]

    def to_pixel(self, z: np.ndarray, nx: int, ny: int):
        col = (z.real - (self.center.real - self.width / 2)) * nx / self.width - 0.5
        row = ((self.center.imag + self.height / 2) - z.imag) * ny / self.height - 0.5
        return col, row


@dataclass(frozen=True)
class BasinRaster:
    viewport: Viewport
    resolution: tuple[int, int]   # (width, height) in pixels
    attractors: tuple[complex, ...]
    label: np.ndarray             # (height, width): index, ESCAPED or UNDECIDED
    iterations: np.ndarray
    max_iter: int


# fixed palettes; index cycles for many attractors / generations
ATTRACTOR_COLORS = np.array([(66, 133, 244), (219, 68, 55), (15, 157, 88), (244, 180, 0),
                             (171, 71, 188), (0, 172, 193), (255, 112, 67), (158, 157, 36)],
                            dtype=float)
ESCAPED_COLOR = np.array((18, 18, 28), dtype=float)
UNDECIDED_COLOR = np.array((255, 0, 255), dtype=np.uint8)
GENERATION_COLORS = np.array([(255, 255, 255), (255, 235, 59), (255, 152, 0), (244, 67, 54),
                              (233, 30, 99), (156, 39, 176), (63, 81, 181), (3, 169, 244),
                              (0, 150, 136), (139, 195, 74)], dtype=np.uint8)


def basin_raster(f: Polynomial, viewport: Viewport, resolution, max_iter: int = DEFAULT_MAX_ITER,
                 attractors=None) -> BasinRaster:
    nx, ny = (int(v) for v in resolution)
    if nx <= 0 or ny <= 0:
        raise PreconditionError("resolution must be positive")
    if nx * ny > MAX_PIXELS:
        raise PreconditionError(f"resolution {nx}x{ny} exceeds the cap of {MAX_PIXELS} pixels")
    if attractors is None:
        attractors = attracting_points(f)
    z = viewport.pixel_centers(nx, ny)
    label, iters = _iterate_classify(f, z, attractors, max_iter)
    return BasinRaster(viewport, (nx, ny), tuple(attractors), label.reshape(ny, nx),
                       iters.reshape(ny, nx), max_iter)


def shade(raster: BasinRaster) -> np.ndarray:
    """RGB uint8 image: attractor hue darkened with iteration count."""
    lab, it = raster.label, raster.iterations
    img = np.zeros(lab.shape + (3,), dtype=np.uint8)
    bright = 1.0 - 0.75 * np.clip(np.log1p(it) / np.log1p(max(raster.max_iter, 1)), 0, 1)
    basin = lab >= 0
    colors = ATTRACTOR_COLORS[lab[basin] % len(ATTRACTOR_COLORS)]
    img[basin] = np.round(colors * bright[basin][:, None]).astype(np.uint8)
    esc = lab == ESCAPED
    glow = 1.0 + 4.0 * (1.0 - bright[esc])
    img[esc] = np.round(np.clip(ESCAPED_COLOR * glow[:, None], 0, 255)).astype(np.uint8)
    img[lab == UNDECIDED] = UNDECIDED_COLOR
    return img


def draw_overlay(img: np.ndarray, viewport: Viewport, tree: PreimageTree, radius: int = 2) -> np.ndarray:
    """Draw tree nodes as filled disks coloured by generation, deepest first."""
    img = img.copy()
    ny, nx = img.shape[:2]
    col, row = viewport.to_pixel(tree.points, nx, ny)
    offs = [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)
            if dx * dx + dy * dy <= radius * radius]
    order = np.argsort(-tree.generation, kind="stable")
    for i in order:
        c, r = int(round(col[i])), int(round(row[i]))
        color = GENERATION_COLORS[tree.generation[i] % len(GENERATION_COLORS)]
        for dy, dx in offs:
            y, x = r + dy, c + dx
            if 0 <= y < ny and 0 <= x < nx:
                img[y, x] = color
    return img


def ppm_bytes(img: np.ndarray) -> bytes:
    """Binary P6 encoding of an (h, w, 3) uint8 image."""
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def render_basin(f: Polynomial, viewport: Viewport, resolution, max_iter: int = DEFAULT_MAX_ITER,
                 overlay: PreimageTree | None = None) -> tuple[BasinRaster, bytes]:
    """Basin raster plus its P6 image, with an optional inverse-orbit overlay."""
    raster = basin_raster(f, viewport, resolution, max_iter)
    img = shade(raster)
    if overlay is not None:
        img = draw_overlay(img, viewport, overlay)
    return raster, ppm_bytes(img)


def raster_csv_rows(raster: BasinRaster):
    """(x, y, attractor, iterations) rows in row-major order."""
    ny, nx = raster.label.shape
    for y in range(ny):
        for x in range(nx):
            yield x, y, int(raster.label[y, x]), int(raster.iterations[y, x])
