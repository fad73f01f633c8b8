"""Finite Blaschke products on the unit disk.

    g(z) = exp(i*theta) * prod_j (z - a_j) / (1 - conj(a_j) z),   |a_j| < 1

Evaluation accepts scalars or numpy arrays. Preimages are the roots of the
degree-m polynomial  exp(i*theta) prod(z - a_j) - w prod(1 - conj(a_j) z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _roots
from .errors import CapacityError, ConvergenceError, DomainError, PreconditionError
from .tree import NODE_CAP, PreimageTree, grow_tree

DOMAIN_SLACK = 1e-6
POLE_TOL = 1e-14
ORIGIN_TOL = 1e-14
RESIDUAL_TOL = 1e-10
LEADING_TOL = 1e-14
INIT_RADIUS = 0.9


def _check_finite(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise DomainError("complex input must be finite")
    return z


@dataclass(frozen=True)
class BlaschkeProduct:
    theta: float
    zeros: tuple[complex, ...]
    _rot: complex = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        theta = float(self.theta)
        if not math.isfinite(theta):
            raise PreconditionError("theta must be finite")
        zeros = tuple(complex(a) for a in self.zeros)
        _check_finite(np.array(zeros))
        if len(zeros) < 2:
            raise PreconditionError(f"degree must be >= 2, got {len(zeros)}")
        bad = [a for a in zeros if abs(a) >= 1]
        if bad:
            raise PreconditionError(f"zeros must lie in the open unit disk: {bad}")
        object.__setattr__(self, "theta", theta % (2 * math.pi))
        object.__setattr__(self, "zeros", zeros)
        object.__setattr__(self, "_rot", complex(np.exp(1j * self.theta)))

    @classmethod
    def power(cls, m: int, theta: float = 0.0) -> "BlaschkeProduct":
        """exp(i*theta) z**m."""
        return cls(theta, (0j,) * m)

    @property
    def m(self) -> int:
        return len(self.zeros)

    @property
    def m1(self) -> int:
        """Number of zeros at the origin."""
        return sum(abs(a) <= ORIGIN_TOL for a in self.zeros)

    @property
    def is_power_map(self) -> bool:
        return self.m1 == self.m

    def __call__(self, z):
        return evaluate(self, z)

    def numerator_coeffs(self) -> np.ndarray:
        """exp(i theta) prod(z - a_j), highest degree first."""
        return self._rot * np.poly(np.array(self.zeros))

    def denominator_coeffs(self) -> np.ndarray:
        """prod(1 - conj(a_j) z), highest degree first, padded to length m+1."""
        c = np.array([1.0 + 0j])
        for a in self.zeros:
            c = np.convolve(c, np.array([-np.conj(a), 1.0]))
        return c


def _factors(g: BlaschkeProduct, z: np.ndarray):
    a = np.array(g.zeros)[:, None]
    zz = z.reshape(1, -1)
    den = 1 - np.conj(a) * zz
    if np.any(np.abs(den) < POLE_TOL):
        raise DomainError("point too close to a pole of the Blaschke product")
    return a, zz, den


def _check_domain(z: np.ndarray):
    if np.any(np.abs(z) > 1 + DOMAIN_SLACK):
        raise DomainError("evaluation point outside the closed unit disk")


def evaluate(g: BlaschkeProduct, z):
    """g(z) for a scalar or array z with |z| <= 1 + 1e-6."""
    z = _check_finite(z)
    _check_domain(z)
    a, zz, den = _factors(g, z)
    out = g._rot * np.prod((zz - a) / den, axis=0)
    out = out.reshape(z.shape)
    return complex(out) if out.ndim == 0 else out


def _evaluate_unchecked(g: BlaschkeProduct, z: np.ndarray) -> np.ndarray:
    a = np.array(g.zeros)[:, None]
    zz = z.reshape(1, -1)
    return (g._rot * np.prod((zz - a) / (1 - np.conj(a) * zz), axis=0)).reshape(z.shape)


def iterate(g: BlaschkeProduct, z, n: int):
    """n-fold composition g^n(z)."""
    z = _check_finite(z)
    for _ in range(n):
        z = np.asarray(evaluate(g, z))
    return complex(z) if z.ndim == 0 else z


def derivative(g: BlaschkeProduct, z):
    """g'(z) by the product rule (safe at the zeros of g).

    Each factor h_j = (z - a_j)/(1 - conj(a_j) z) has derivative
    (1 - |a_j|^2) / (1 - conj(a_j) z)^2.
    """
    z = _check_finite(z)
    _check_domain(z)
    a, zz, den = _factors(g, z)
    h = (zz - a) / den
    dh = (1 - np.abs(a) ** 2) / den**2
    m = g.m
    total = np.zeros(zz.shape[1], dtype=complex)
    for j in range(m):
        others = np.prod(np.delete(h, j, axis=0), axis=0) if m > 1 else 1.0
        total += dh[j] * others
    out = (g._rot * total).reshape(z.shape)
    return complex(out) if out.ndim == 0 else out


def boundary_derivative_modulus(g: BlaschkeProduct, zeta):
    """|g'(zeta)| on the unit circle in closed form.

    m1 + sum over nonzero a_l of (1 - |a_l|^2) / |zeta - a_l|^2.
    """
    zeta = _check_finite(zeta)
    if np.any(np.abs(np.abs(zeta) - 1) > 1e-12):
        raise DomainError("zeta must lie on the unit circle")
    if g.m1 < 1:
        raise PreconditionError("boundary derivative formula needs a zero at the origin")
    nonzero = np.array([a for a in g.zeros if abs(a) > ORIGIN_TOL])
    out = np.full(zeta.shape, float(g.m1))
    if nonzero.size:
        zz = zeta[..., None]
        out = out + np.sum((1 - np.abs(nonzero) ** 2) / np.abs(zz - nonzero) ** 2, axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PreimageSet:
    target: complex
    roots: tuple[complex, ...]
    residuals: tuple[float, ...]
    degree_deficit: int = 0   # roots lost "at infinity" by leading-coefficient cancellation


def _preimage_polys(g: BlaschkeProduct, w: np.ndarray) -> np.ndarray:
    num = g.numerator_coeffs()
    den = g.denominator_coeffs()
    return num[None, :] - w[:, None] * den[None, :]


def _solve_rows(g: BlaschkeProduct, polys: np.ndarray, w: np.ndarray):
    roots, _ = _roots.solve_batch(polys, INIT_RADIUS)
    residual = np.abs(_evaluate_unchecked(g, roots) - w[:, None])
    worst = float(residual.max()) if residual.size else 0.0
    if worst > RESIDUAL_TOL:
        raise ConvergenceError(
            f"preimage solver did not converge (worst residual {worst:.3e})", worst)
    return roots, residual


def preimages_batch(g: BlaschkeProduct, w) -> tuple[np.ndarray, np.ndarray]:
    """Preimages of every target in ``w``; returns (roots, residuals) of shape (B, m)."""
    w = _check_finite(np.atleast_1d(w)).ravel()
    if np.any(np.abs(w) >= 1):
        raise DomainError("preimage targets must lie in the open unit disk")
    polys = _preimage_polys(g, w)
    if np.any(np.abs(polys[:, 0]) < LEADING_TOL):
        # cannot happen for |w| < 1; guard kept for numerically extreme products
        raise ConvergenceError("leading coefficient cancelled in batch preimage solve")
    return _solve_rows(g, polys, w)


def preimages(g: BlaschkeProduct, w: complex) -> PreimageSet:
    """All m solutions of g(z) = w, with multiplicity, for |w| < 1."""
    w = complex(_check_finite(w))
    if abs(w) >= 1:
        raise DomainError("preimage target must lie in the open unit disk")
    poly = _preimage_polys(g, np.array([w]))[0]
    deficit = 0
    while poly.size > 1 and abs(poly[0]) < LEADING_TOL:
        poly = poly[1:]
        deficit += 1
    if poly.size == 1:
        return PreimageSet(w, (), (), deficit)
    roots, residual = _solve_rows(g, poly[None, :], np.array([w]))
    order = np.lexsort((roots[0].imag, roots[0].real))
    return PreimageSet(w, tuple(complex(r) for r in roots[0][order]),
                       tuple(float(r) for r in residual[0][order]), deficit)


def power_map_preimages(m: int, theta: float, p_hat: complex, k: int) -> list[complex]:
    """Closed-form k-th preimages of p_hat under exp(i*theta) z**m.

    With p_hat = r exp(i*theta0) the m**k points have modulus r**(1/m**k) and
    arguments (2*pi*j + theta0 - theta*(m**k - 1)/(m - 1)) / m**k.
    """
    if m < 2:
        raise PreconditionError("m must be >= 2")
    if k < 0:
        raise ValueError("k must be >= 0")
    p_hat = complex(p_hat)
    r = abs(p_hat)
    if not 0 < r < 1:
        raise DomainError("base point must satisfy 0 < |p_hat| < 1")
    count = m**k
    if count > NODE_CAP:
        raise CapacityError(f"{m}**{k} preimages exceed the node cap {NODE_CAP}", depth_reached=None)
    theta0 = math.atan2(p_hat.imag, p_hat.real)
    geom = (count - 1) // (m - 1)
    # Shifting the numerator by 2*pi only permutes j, so reduce it first.
    c = (theta0 - math.fmod(theta * geom, 2 * math.pi)) % (2 * math.pi)
    s = r ** (1.0 / count)
    phi = (2 * np.pi * np.arange(count) + c) / count
    return [complex(v) for v in s * np.exp(1j * phi)]


def preimage_tree(g: BlaschkeProduct, p_hat: complex, depth: int,
                  cap: int = NODE_CAP) -> PreimageTree:
    """Union of g^{-k}(p_hat) for k <= depth, deduplicated and generation-labelled."""
    p_hat = complex(_check_finite(p_hat))
    if abs(p_hat) >= 1:
        raise DomainError("base point must lie in the open unit disk")
    return grow_tree(p_hat, depth, lambda w: preimages_batch(g, w), g.m, cap)
