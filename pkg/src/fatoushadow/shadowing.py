"""Shadowing of disk points by backward orbits of a base point.

For a Blaschke product g and base point p_hat, every z0 in the disk should lie
within a bounded hyperbolic distance of some point of the preimage tree of
p_hat. This module measures that distance over sample grids, computes the
explicit constants available for g = exp(i theta) z^m, and checks the
expansion properties near the circle that drive the general case.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import hyperbolic
from .blaschke import (BlaschkeProduct, derivative, evaluate, preimages_batch,
                       preimage_tree, _evaluate_unchecked)
from .errors import AnnulusNotFoundError, DomainError, NumericError, PreconditionError
from .tree import PreimageTree

SIGMA_SAMPLES = 10**5
CIRCLE_SAMPLES = 2048
LATTICE_STEP = 1e-3
BISECT_TOL = 1e-6
DEFAULT_EPSILON = 0.01
_SAMPLE_CHUNK = 64


@dataclass(frozen=True)
class SampleGrid:
    """Points r_i e^{2 pi i j / N} with r_i = 1 - 2^-i, i = 1..i_max.

    ``explicit`` replaces the lattice by a given list of points.
    """
    i_max: int = 1
    angles: int = 8
    explicit: tuple[complex, ...] | None = None

    def __post_init__(self):
        if self.explicit is not None:
            pts = np.asarray(self.explicit, dtype=complex)
            if pts.size == 0 or not np.all(np.isfinite(pts)) or np.any(np.abs(pts) >= 1):
                raise DomainError("grid points must lie in the open unit disk")
            object.__setattr__(self, "explicit", tuple(complex(p) for p in pts.ravel()))
            return
        if self.i_max < 1 or self.angles < 8:
            raise ValueError("grid needs i_max >= 1 and at least 8 angles per circle")

    @classmethod
    def from_points(cls, points) -> "SampleGrid":
        return cls(explicit=tuple(points))

    @property
    def radii(self) -> np.ndarray:
        return 1 - 2.0 ** -np.arange(1, self.i_max + 1)

    @property
    def points(self) -> np.ndarray:
        if self.explicit is not None:
            return np.array(self.explicit)
        ang = np.exp(2j * np.pi * np.arange(self.angles) / self.angles)
        return (self.radii[:, None] * ang[None, :]).ravel()

    def describe(self) -> str:
        if self.explicit is not None:
            return f"explicit({len(self.explicit)})"
        return f"i_max={self.i_max},N={self.angles}"


@dataclass(frozen=True)
class ShadowReport:
    z0: np.ndarray
    best_q: np.ndarray
    generation: np.ndarray
    distance: np.ndarray          # nan where status is not "ok"
    status: tuple[str, ...]       # "ok" or "overflow" per sample
    empirical_sup: float
    depth: int
    grid: SampleGrid
    theoretical_C0: float | None = None
    constants: dict = field(default_factory=dict)

    @property
    def n_errors(self) -> int:
        return sum(s != "ok" for s in self.status)


def _nearest_scan(points: np.ndarray, gens: np.ndarray, z0: np.ndarray,
                  slices) -> tuple[np.ndarray, np.ndarray]:
    """Running argmin of distance over generation slices.

    Strict improvement is required to replace the current best, so ties keep
    the earlier node (smaller generation, then lexicographic order).
    """
    best_d = np.full(z0.size, np.inf)
    best_i = np.zeros(z0.size, dtype=np.int64)
    for sl in slices:
        cand = points[sl]
        for a in range(0, z0.size, _SAMPLE_CHUNK):
            zs = z0[a:a + _SAMPLE_CHUNK, None]
            d = hyperbolic.distance_unchecked(zs, cand[None, :])
            j = np.argmin(d, axis=1)
            dj = d[np.arange(j.size), j]
            better = dj < best_d[a:a + _SAMPLE_CHUNK]
            best_d[a:a + _SAMPLE_CHUNK][better] = dj[better]
            best_i[a:a + _SAMPLE_CHUNK][better] = sl.start + j[better]
    return best_d, best_i


def nearest_in_tree(tree: PreimageTree, z0) -> tuple[np.ndarray, np.ndarray]:
    """Indices and distances of the nearest tree node for every point of z0."""
    z0 = np.atleast_1d(np.asarray(z0, dtype=complex))
    if np.any(np.abs(z0) >= 1):
        raise DomainError("sample points must lie in the open unit disk")
    d, i = _nearest_scan(tree.points, tree.generation, z0,
                         [sl for _, sl in tree.generation_slices()])
    return i, d


def shadow_distance(g: BlaschkeProduct, p_hat: complex, depth: int, z0: complex,
                    tree: PreimageTree | None = None) -> tuple[complex, float]:
    """Tree point closest to z0 in the hyperbolic metric, and its distance."""
    tree = tree if tree is not None else preimage_tree(g, p_hat, depth)
    i, d = nearest_in_tree(tree, [z0])
    if not np.isfinite(d[0]):
        raise hyperbolic.BoundaryOverflowError("sample numerically on the unit circle")
    return complex(tree.points[i[0]]), float(d[0])


def _verify_returns(g: BlaschkeProduct, q: np.ndarray, gen: np.ndarray, p_hat: complex):
    z = q.copy()
    for k in range(1, int(gen.max(initial=0)) + 1):
        mask = gen >= k
        z[mask] = _evaluate_unchecked(g, z[mask])
    err = np.abs(z - p_hat)
    if np.any(err > 1e-7 * np.maximum(gen, 1)):
        raise NumericError(f"shadowing point fails to return to the base point (err {err.max():.2e})")


def _report(g, p_hat, tree, depth, grid, best_i, best_d) -> ShadowReport:
    z0 = grid.points
    ok = np.isfinite(best_d)
    q = tree.points[best_i]
    gen = tree.generation[best_i]
    _verify_returns(g, q, gen, p_hat)
    sup = float(best_d[ok].max()) if ok.any() else float("nan")
    constants = {}
    c0 = None
    if g.is_power_map and p_hat != 0:
        sigma, c1, c2, c0 = theoretical_C0_power(g.m, p_hat, with_sigma=True)
        constants = {"sigma": sigma, "C0_prime": c1, "C0_doubleprime": c2, "C0": c0}
    return ShadowReport(z0, q, gen, np.where(ok, best_d, np.nan),
                        tuple("ok" if o else "overflow" for o in ok),
                        sup, depth, grid, c0, constants)


def _check_coverage(tree: PreimageTree, grid: SampleGrid):
    if np.abs(tree.points).max() <= np.abs(grid.points).max():
        warnings.warn("tree does not reach beyond the outermost grid circle; "
                      "increase the depth", RuntimeWarning, stacklevel=3)


def empirical_constant(g: BlaschkeProduct, p_hat: complex, depth: int, grid: SampleGrid,
                       tree: PreimageTree | None = None) -> ShadowReport:
    """Largest shadowing distance over the grid for the depth-``depth`` tree."""
    return empirical_profile(g, p_hat, [depth], grid, tree)[0]


def empirical_profile(g: BlaschkeProduct, p_hat: complex, depths, grid: SampleGrid,
                      tree: PreimageTree | None = None) -> list[ShadowReport]:
    """Reports for several depths sharing one tree and one scan.

    Trees of smaller depth are prefixes of the deepest one, so a single pass
    over generations yields every depth's minimisers.
    """
    depths = sorted(set(int(d) for d in depths))
    if not depths or depths[0] < 0:
        raise ValueError("depths must be non-negative")
    p_hat = complex(p_hat)
    if tree is None:
        tree = preimage_tree(g, p_hat, depths[-1])
    _check_coverage(tree.upto(depths[-1]), grid)
    z0 = grid.points
    best_d = np.full(z0.size, np.inf)
    best_i = np.zeros(z0.size, dtype=np.int64)
    slices = dict(tree.generation_slices())
    reports = []
    k_done = -1
    for depth in depths:
        todo = [slices[k] for k in range(k_done + 1, depth + 1) if k in slices]
        if todo:
            d, i = _nearest_scan(tree.points, tree.generation, z0, todo)
            better = d < best_d
            best_d = np.where(better, d, best_d)
            best_i = np.where(better, i, best_i)
        k_done = depth
        reports.append(_report(g, p_hat, tree, depth, grid, best_i.copy(), best_d.copy()))
    return reports


def theoretical_C0_power(m: int, p_hat: complex, with_sigma: bool = False,
                         samples: int = SIGMA_SAMPLES):
    """Shadowing constants for exp(i theta) z^m and base point p_hat = r e^{i theta0}.

    sigma is the largest |(z - p_hat)/(1 - conj(p_hat) z)| on |z| = r (the
    maximum over the closed disk is attained on its boundary), and
        C0'  = ln((1 + sigma)/(1 - sigma)),
        C0'' = -sqrt(ln(r)^2 + 4 m^2 pi^2) / (r^(1/m) ln r),
        C0   = max(C0', C0'').
    Returns (C0', C0'', C0), or (sigma, C0', C0'', C0) with ``with_sigma``.
    """
    if m < 2:
        raise PreconditionError("m must be >= 2")
    p_hat = complex(p_hat)
    r = abs(p_hat)
    if not 0 < r < 1:
        raise DomainError("need 0 < |p_hat| < 1")
    circle = r * np.exp(1j * (math.atan2(p_hat.imag, p_hat.real)
                              + 2 * np.pi * np.arange(samples) / samples))
    sigma = float(np.abs(hyperbolic.mobius_to_zero(p_hat, circle)).max())
    c1 = math.log((1 + sigma) / (1 - sigma))
    lr = math.log(r)
    c2 = -math.sqrt(lr * lr + 4 * m * m * math.pi**2) / (r ** (1 / m) * lr)
    out = (c1, c2, max(c1, c2))
    return (sigma, *out) if with_sigma else out


def bracket_point(m: int, theta: float, p_hat: complex, z0: complex) -> tuple[int, complex, float]:
    """The generation-k preimage of p_hat that brackets z0 = rho e^{i psi}.

    k is chosen with r^(1/m^k) <= rho < r^(1/m^(k+1)) and the argument phi of
    the returned point satisfies phi <= psi < phi + 2 pi / m^k. Returns
    (k, q, phi). Requires |z0| >= |p_hat|.
    """
    p_hat, z0 = complex(p_hat), complex(z0)
    r, rho = abs(p_hat), abs(z0)
    if not r <= rho < 1:
        raise DomainError("bracketing needs |p_hat| <= |z0| < 1")
    ratio = math.log(r) / math.log(rho) if rho > 0 else math.inf
    k = int(math.floor(math.log(ratio, m))) if ratio > 1 else 0
    # correct float drift in the logarithms
    while k > 0 and r ** (1 / m**k) > rho:
        k -= 1
    while r ** (1 / m ** (k + 1)) <= rho:
        k += 1
    mk = m**k
    theta0 = math.atan2(p_hat.imag, p_hat.real)
    geom = (mk - 1) // (m - 1)
    c = (theta0 - math.fmod(theta * geom, 2 * math.pi)) % (2 * math.pi)
    psi = math.atan2(z0.imag, z0.real) % (2 * math.pi)
    j = math.floor((psi * mk - c) / (2 * math.pi))
    phi = (2 * math.pi * j + c) / mk
    if phi > psi:
        j -= 1
        phi = (2 * math.pi * j + c) / mk
    s = r ** (1 / mk)
    return k, s * complex(np.exp(1j * phi)), phi


@dataclass(frozen=True)
class BoundChain:
    z0: np.ndarray
    q: np.ndarray
    generation: np.ndarray
    distance: np.ndarray
    curve_bound: np.ndarray
    c_doubleprime: float


def power_bound_chain(m: int, theta: float, p_hat: complex, grid: SampleGrid) -> BoundChain:
    """d(z0, q) and the radius-arc length for each grid point outside |p_hat|."""
    p_hat = complex(p_hat)
    r = abs(p_hat)
    _, c2, _ = theoretical_C0_power(m, p_hat)
    pts = grid.points
    pts = pts[np.abs(pts) > r]
    qs, ks, ds, bs = [], [], [], []
    for z in pts:
        k, q, phi = bracket_point(m, theta, p_hat, z)
        qs.append(q)
        ks.append(k)
        ds.append(hyperbolic.poincare_distance(z, q))
        bs.append(hyperbolic.radial_arc_bound(m, r, z, q, phi))
    return BoundChain(pts, np.array(qs), np.array(ks), np.array(ds), np.array(bs), c2)


@dataclass(frozen=True)
class AnnulusSpec:
    r0: float
    epsilon: float


def _min_derivative_on_circle(g: BlaschkeProduct, t: float, n: int = CIRCLE_SAMPLES) -> float:
    zs = t * np.exp(2j * np.pi * np.arange(n) / n)
    return float(np.abs(derivative(g, zs)).min())


def find_expanding_annulus(g: BlaschkeProduct, epsilon: float = DEFAULT_EPSILON,
                           r_floor: float = 0.5) -> AnnulusSpec:
    """Smallest r0 (searched down to ``r_floor``) with min |g'| > 1 + epsilon
    on every sampled circle of radius in [r0, 1].

    Circles are scanned downward from the unit circle in steps of 1e-3; the
    first failing step is refined by bisection to 1e-6.
    """
    if g.m1 < 1:
        raise PreconditionError("annulus search needs a zero at the origin")
    target = 1 + epsilon
    boundary_min = _min_derivative_on_circle(g, 1.0)
    if boundary_min <= target:
        raise AnnulusNotFoundError(
            f"|g'| reaches only {boundary_min:.6g} on the unit circle; "
            f"no annulus with margin {epsilon}", achieved_margin=boundary_min - 1)
    n_steps = int(round((1 - r_floor) / LATTICE_STEP))
    good = 1.0
    for i in range(1, n_steps + 1):
        t = 1 - i * LATTICE_STEP
        if _min_derivative_on_circle(g, t) <= target:
            lo, hi = t, good
            while hi - lo > BISECT_TOL:
                mid = 0.5 * (lo + hi)
                if _min_derivative_on_circle(g, mid) > target:
                    hi = mid
                else:
                    lo = mid
            return AnnulusSpec(hi, epsilon)
        good = t
    return AnnulusSpec(good, epsilon)


@dataclass(frozen=True)
class Violation:
    z: complex
    preimage: complex


def verify_annulus_expansion(g: BlaschkeProduct, annulus: AnnulusSpec, samples: int = 10**4,
                             seed: int = 0, points=None) -> list[Violation]:
    """Check |q| > |z| for every preimage q in the annulus of every sample z.

    Samples are drawn uniformly in radius and angle from the open annulus
    r0 < |z| < 1 unless ``points`` is given; points on or outside the annulus
    boundary are skipped.
    """
    r0 = annulus.r0
    if points is None:
        rng = np.random.default_rng(seed)
        rad = rng.uniform(r0, 1, samples)
        ang = rng.uniform(0, 2 * np.pi, samples)
        z = rad * np.exp(1j * ang)
    else:
        z = np.atleast_1d(np.asarray(points, dtype=complex))
    z = z[(np.abs(z) > r0) & (np.abs(z) < 1)]
    if z.size == 0:
        return []
    roots, _ = preimages_batch(g, z)
    mod = np.abs(roots)
    inside = (mod > r0) & (mod < 1)
    bad = inside & ~(mod > np.abs(z)[:, None] - 1e-12)
    return [Violation(complex(z[b]), complex(roots[b, c])) for b, c in zip(*np.nonzero(bad))]


def boundary_density_profile(g: BlaschkeProduct, depth: int, p_hat: complex = 0j,
                             tree: PreimageTree | None = None) -> list[tuple[int, float]]:
    """Largest angular gap among outer tree points, for each generation k <= depth.

    At generation k the points considered are all nodes of generation <= k
    whose modulus is at least the median modulus of generation k. A set with
    fewer than two distinct directions has gap 2 pi. Moduli within a relative
    1e-9 of the median count as on it (equal-modulus generations are common).
    """
    if g.m1 < 1 and complex(p_hat) == 0:
        raise PreconditionError("density profile of 0 needs a zero at the origin")
    tree = tree if tree is not None else preimage_tree(g, p_hat, depth)
    mods = np.abs(tree.points)
    args = np.angle(tree.points) % (2 * np.pi)
    out = []
    stop = 0
    for k, sl in tree.generation_slices():
        if k > depth:
            break
        stop = sl.stop
        med = np.median(mods[sl])
        sel = (mods[:stop] >= med * (1 - 1e-9)) & (mods[:stop] > 0)
        out.append((k, _max_gap(args[:stop][sel])))
    last = out[-1][0] if out else -1
    # generations with no new nodes keep the previous gap
    for k in range(last + 1, depth + 1):
        out.append((k, out[-1][1] if out else 2 * math.pi))
    return out


def _max_gap(angles: np.ndarray) -> float:
    a = np.sort(angles)
    if a.size < 2:
        return 2 * math.pi
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * math.pi]]))
    return float(gaps.max())
